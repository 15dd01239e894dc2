//! Per-slot arrival model: a Poisson count plus at most one Bernoulli packet.
//!
//! The Poisson part models locally generated traffic, the Bernoulli part a
//! packet forwarded from a neighbour (at most one reception per slot).

use thiserror::Error;

/// Poisson series are summed until the accumulated mass reaches this bound.
const POISSON_CUTOFF: f64 = 1.0 - 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrafficError {
    #[error("rate and probability vectors differ in length ({rates} vs {probabilities})")]
    Length { rates: usize, probabilities: usize },
    #[error("slot {slot}: Poisson rate {value} must be finite and non-negative")]
    Rate { slot: usize, value: f64 },
    #[error("slot {slot}: Bernoulli probability {value} outside [0, 1]")]
    Probability { slot: usize, value: f64 },
}

/// Poisson rate (packets per slot) and Bernoulli probability for every slot
/// of the slotframe.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficSpec {
    poisson: Vec<f64>,
    bernoulli: Vec<f64>,
}

impl TrafficSpec {
    pub fn new(poisson: Vec<f64>, bernoulli: Vec<f64>) -> Result<Self, TrafficError> {
        if poisson.len() != bernoulli.len() {
            return Err(TrafficError::Length {
                rates: poisson.len(),
                probabilities: bernoulli.len(),
            });
        }
        for (slot, &value) in poisson.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(TrafficError::Rate { slot, value });
            }
        }
        for (slot, &value) in bernoulli.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(TrafficError::Probability { slot, value });
            }
        }
        Ok(Self { poisson, bernoulli })
    }

    /// No arrivals in any of `slots` slots.
    pub fn idle(slots: usize) -> Self {
        Self {
            poisson: vec![0.0; slots],
            bernoulli: vec![0.0; slots],
        }
    }

    /// The same Poisson rate in every slot, no Bernoulli part.
    pub fn uniform_poisson(slots: usize, rate: f64) -> Result<Self, TrafficError> {
        Self::new(vec![rate; slots], vec![0.0; slots])
    }

    /// The same Bernoulli probability in every slot, no Poisson part.
    pub fn uniform_bernoulli(slots: usize, probability: f64) -> Result<Self, TrafficError> {
        Self::new(vec![0.0; slots], vec![probability; slots])
    }

    pub fn slots(&self) -> usize {
        self.poisson.len()
    }

    pub fn poisson_rate(&self, slot: usize) -> f64 {
        self.poisson[slot]
    }

    pub fn bernoulli_probability(&self, slot: usize) -> f64 {
        self.bernoulli[slot]
    }

    pub fn poisson_rates(&self) -> &[f64] {
        &self.poisson
    }

    pub fn bernoulli_probabilities(&self) -> &[f64] {
        &self.bernoulli
    }

    /// `P[A = k]` for the arrivals `A` of `slot`.
    pub fn arrival_pmf(&self, slot: usize, k: usize) -> f64 {
        let (lambda, p) = (self.poisson[slot], self.bernoulli[slot]);
        let without = (1.0 - p) * poisson_pmf(lambda, k);
        if k == 0 {
            without
        } else {
            without + p * poisson_pmf(lambda, k - 1)
        }
    }

    /// `P[A >= k]` for the arrivals `A` of `slot`.
    pub fn arrival_tail(&self, slot: usize, k: usize) -> f64 {
        if k == 0 {
            return 1.0;
        }
        let (lambda, p) = (self.poisson[slot], self.bernoulli[slot]);
        (1.0 - p) * poisson_tail(lambda, k) + p * poisson_tail(lambda, k - 1)
    }

    /// `E[A]` for `slot`.
    pub fn expected_arrivals(&self, slot: usize) -> f64 {
        let (lambda, p) = (self.poisson[slot], self.bernoulli[slot]);
        (1.0 - p) * lambda + p * (lambda + 1.0)
    }

    /// Expected number of arriving packets per slotframe.
    pub fn expected_arrivals_per_slotframe(&self) -> f64 {
        (0..self.slots()).map(|i| self.expected_arrivals(i)).sum()
    }

    /// Probabilities `P[A = k]` for `k < limit` and `P[A >= limit]`, the
    /// distribution of accepted packets when at most `limit` fit.
    pub fn truncated(&self, slot: usize, limit: usize) -> Vec<f64> {
        let mut probs: Vec<f64> = (0..limit).map(|k| self.arrival_pmf(slot, k)).collect();
        probs.push(self.arrival_tail(slot, limit));
        probs
    }
}

/// `P[Y = k]` for `Y ~ Poisson(lambda)`.
pub fn poisson_pmf(lambda: f64, k: usize) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let ln_fact: f64 = (2..=k).map(|j| (j as f64).ln()).sum();
    (k as f64 * lambda.ln() - lambda - ln_fact).exp()
}

/// `P[Y >= k]` for `Y ~ Poisson(lambda)`.
///
/// Below the mode the complement of the lower sum is used; above it the
/// upper terms are summed directly, which keeps small tails accurate.
pub fn poisson_tail(lambda: f64, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if lambda == 0.0 {
        return 0.0;
    }
    if (k as f64) <= lambda {
        let lower: f64 = (0..k).map(|j| poisson_pmf(lambda, j)).sum();
        return (1.0 - lower).max(0.0);
    }
    let lower_mass: f64 = (0..k).map(|j| poisson_pmf(lambda, j)).sum();
    let mut term = poisson_pmf(lambda, k);
    let mut sum = 0.0;
    let mut j = k;
    while term > 0.0 {
        sum += term;
        if lower_mass + sum >= POISSON_CUTOFF && term < 1e-18 * sum {
            break;
        }
        j += 1;
        term *= lambda / j as f64;
    }
    sum
}
