//! Node metrics derived from a solved queue chain, and the three model
//! variants (M/D/1/K, distributed arrivals, full slot-aware model).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chain::{build_chain, ModelError, QueueChain};
use crate::stationary::{solve, SolverOptions};
use crate::traffic::TrafficSpec;

fn check_length(chain: &QueueChain, stationary: &[f64]) -> Result<(), ModelError> {
    if stationary.len() != chain.state_count() {
        return Err(ModelError::StationaryLength {
            got: stationary.len(),
            expected: chain.state_count(),
        });
    }
    Ok(())
}

/// Stationary mass of every slot column, `sum_q c(q, i)`.
fn slot_mass(chain: &QueueChain, stationary: &[f64]) -> Vec<f64> {
    let s = chain.slotframe_length();
    let mut mass = vec![0.0; s];
    for (j, &c) in stationary.iter().enumerate() {
        mass[j % s] += c;
    }
    mass
}

/// Probability that the node transmits in each slot of the slotframe.
pub fn transmission_probability(
    chain: &QueueChain,
    stationary: &[f64],
) -> Result<Vec<f64>, ModelError> {
    check_length(chain, stationary)?;
    let mass = slot_mass(chain, stationary);
    (0..chain.slotframe_length())
        .map(|i| {
            if !chain.transmits(i) {
                Ok(0.0)
            } else if mass[i] <= 0.0 {
                Err(ModelError::EmptyColumn { slot: i })
            } else {
                Ok((1.0 - stationary[chain.index(0, i)] / mass[i]).clamp(0.0, 1.0))
            }
        })
        .collect()
}

/// Expected number of packets accepted in slot `i` when `q` are queued.
fn expected_accepted(chain: &QueueChain, q: usize, i: usize) -> f64 {
    let free = chain.queue_limit() - q;
    let traffic = chain.traffic();
    let below: f64 = (1..free).map(|k| k as f64 * traffic.arrival_pmf(i, k)).sum();
    below + free as f64 * traffic.arrival_tail(i, free)
}

/// Fraction of offered packets admitted to the queue.
pub fn acceptance_probability(chain: &QueueChain, stationary: &[f64]) -> Result<f64, ModelError> {
    check_length(chain, stationary)?;
    let offered = chain.traffic().expected_arrivals_per_slotframe();
    if offered <= 0.0 {
        return Err(ModelError::NoTraffic);
    }
    let accepted: f64 = stationary
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c > 0.0)
        .map(|(j, &c)| {
            let (q, i) = chain.state(j);
            c * expected_accepted(chain, q, i)
        })
        .sum();
    Ok((chain.slotframe_length() as f64 * accepted / offered).clamp(0.0, 1.0))
}

/// `P[q packets queued]` over all slots, for `q = 0..=K`.
pub fn queue_marginals(chain: &QueueChain, stationary: &[f64]) -> Vec<f64> {
    let s = chain.slotframe_length();
    let mut levels = vec![0.0; chain.queue_limit() + 1];
    for (j, &c) in stationary.iter().enumerate() {
        levels[j / s] += c;
    }
    levels
}

/// `delta(i, j)`: slots from `i` forward to `j` within the slotframe.
pub fn slot_distance(from: usize, to: usize, slotframe_length: usize) -> usize {
    if to >= from {
        to - from
    } else {
        to + slotframe_length - from
    }
}

/// Slots until the packet at position `q >= 1` of the queue leaves, counted
/// from the start of slot `i` and including its transmission slot.
pub fn delay_from_state(
    slotframe_length: usize,
    tx_slots: &[usize],
    q: usize,
    slot: usize,
) -> Result<usize, ModelError> {
    let m = tx_slots.len();
    if m == 0 {
        return Err(ModelError::NoTxSlots);
    }
    let (first, last) = (tx_slots[0], tx_slots[m - 1]);
    // Index of the TX slot preceding `slot`.
    let preceding = if slot <= first || slot > last {
        m - 1
    } else {
        tx_slots.windows(2).position(|w| w[0] < slot && slot <= w[1]).unwrap()
    };
    let frames = q.div_ceil(m).saturating_sub(1);
    let target = tx_slots[(preceding + q) % m];
    Ok(frames * slotframe_length + 1 + slot_distance(slot, target, slotframe_length))
}

/// Expected queuing delay, in slots, of a packet arriving in a random slot.
pub fn expected_delay(chain: &QueueChain, stationary: &[f64]) -> Result<f64, ModelError> {
    check_length(chain, stationary)?;
    let s = chain.slotframe_length();
    let tx = chain.tx_slots();
    if tx.is_empty() {
        return Err(ModelError::NoTxSlots);
    }
    let mut total = 0.0;
    for (j, &c) in stationary.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let (q, i) = chain.state(j);
        let position = q.saturating_sub(usize::from(chain.transmits(i))) + 1;
        total += c * delay_from_state(s, tx, position, (i + 1) % s)? as f64;
    }
    Ok(total)
}

/// Which arrival model to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// One step per slotframe, one transmission per step.
    Md1k,
    /// Real TX slots, all traffic spread evenly over the slotframe as Poisson.
    Distributed,
    /// Real TX slots and per-slot traffic as given.
    Full,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Md1k, Variant::Distributed, Variant::Full];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Md1k => "md1k",
            Variant::Distributed => "distributed",
            Variant::Full => "full",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "md1k" | "m/d/1/k" => Ok(Variant::Md1k),
            "distributed" => Ok(Variant::Distributed),
            "full" => Ok(Variant::Full),
            other => Err(format!("unknown variant '{other}' (md1k, distributed, full)")),
        }
    }
}

/// Everything the model says about one node.
#[derive(Debug, Clone, Serialize)]
pub struct NodeMetrics {
    pub variant: Variant,
    pub queue_limit: usize,
    /// Expected arrivals per slotframe, `A_total`.
    pub offered: f64,
    /// Per-slot transmission probability over the real slotframe.
    pub transmission: Vec<f64>,
    /// Acceptance probability; 1 for a node without offered traffic.
    pub acceptance: f64,
    /// Expected queuing delay in slots.
    pub expected_delay: f64,
    /// `P[q packets queued]`, `q = 0..=K`.
    pub marginals: Vec<f64>,
    /// Stationary distribution of the chain that was solved.
    pub stationary: Vec<f64>,
    pub residual: f64,
    pub reachable: usize,
}

/// Solves the full slot-aware model of one node.
pub fn analyze_node(
    queue_limit: usize,
    tx_slots: &[usize],
    traffic: &TrafficSpec,
    options: &SolverOptions,
) -> Result<NodeMetrics, ModelError> {
    let chain = build_chain(queue_limit, traffic.slots(), tx_slots, traffic)?;
    metrics_of(&chain, Variant::Full, options)
}

fn metrics_of(
    chain: &QueueChain,
    variant: Variant,
    options: &SolverOptions,
) -> Result<NodeMetrics, ModelError> {
    let solution = solve(chain, options)?;
    let c = &solution.distribution;
    let offered = chain.traffic().expected_arrivals_per_slotframe();
    let acceptance = match acceptance_probability(chain, c) {
        Err(ModelError::NoTraffic) => 1.0,
        other => other?,
    };
    Ok(NodeMetrics {
        variant,
        queue_limit: chain.queue_limit(),
        offered,
        transmission: transmission_probability(chain, c)?,
        acceptance,
        expected_delay: expected_delay(chain, c)?,
        marginals: queue_marginals(chain, c),
        residual: solution.residual,
        reachable: solution.reachable,
        stationary: solution.distribution,
    })
}

/// Evaluates one node under `variant`. All variants see the same offered
/// load per slotframe.
///
/// The M/D/1/K variant steps once per slotframe, so its delay is scaled back
/// to slots, and its throughput is spread evenly over the real TX slots.
pub fn model_variant(
    variant: Variant,
    queue_limit: usize,
    tx_slots: &[usize],
    traffic: &TrafficSpec,
    options: &SolverOptions,
) -> Result<NodeMetrics, ModelError> {
    let s = traffic.slots();
    let offered = traffic.expected_arrivals_per_slotframe();
    match variant {
        Variant::Full => analyze_node(queue_limit, tx_slots, traffic, options),
        Variant::Distributed => {
            let spread = TrafficSpec::uniform_poisson(s, offered / s as f64)
                .expect("mean of a valid spec is a valid rate");
            let chain = build_chain(queue_limit, s, tx_slots, &spread)?;
            metrics_of(&chain, variant, options)
        }
        Variant::Md1k => {
            if tx_slots.is_empty() {
                return Err(ModelError::NoTxSlots);
            }
            let lumped = TrafficSpec::uniform_poisson(1, offered)
                .expect("mean of a valid spec is a valid rate");
            let chain = build_chain(queue_limit, 1, &[0], &lumped)?;
            let mut m = metrics_of(&chain, variant, options)?;
            m.expected_delay *= s as f64;
            let per_slot = m.acceptance * offered / tx_slots.len() as f64;
            let mut transmission = vec![0.0; s];
            for &t in tx_slots {
                if t >= s {
                    return Err(ModelError::SlotOutOfRange { slot: t, len: s });
                }
                transmission[t] = per_slot.min(1.0);
            }
            m.transmission = transmission;
            Ok(m)
        }
    }
}
