//! Slot-level simulation of the queueing policy, for single nodes and whole
//! collection networks.
//!
//! Policy in every slot: the queue length `q` at the start of the slot fixes
//! both whether the node transmits (TX slot and `q > 0`) and how many
//! arrivals fit (`K - q`). Arrivals come at uniformly random instants within
//! the slot, so their order is a uniform shuffle. The head-of-line packet
//! leaves at the end of the slot, which means a packet never leaves in the
//! slot it arrived in. Delays are counted in whole slots, from the end of the
//! arrival slot to the end of the departure slot.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::multihop::{NetworkError, NetworkScenario};
use crate::topology::{NodeId, ROOT};
use crate::traffic::TrafficSpec;

/// Slack applied when checking whether a value lies inside an interval.
const INCLUSION_SLACK: f64 = 1e-9;

/// Mean of per-run values with a two-sided 95% confidence interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub runs: Vec<f64>,
}

impl Estimate {
    /// Student-t interval over the per-run values.
    pub fn from_runs(runs: Vec<f64>) -> Self {
        let n = runs.len();
        let mean = runs.iter().sum::<f64>() / n.max(1) as f64;
        let half = if n < 2 {
            0.0
        } else {
            let var = runs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
                .expect("positive degrees of freedom")
                .inverse_cdf(0.975);
            t * (var / n as f64).sqrt()
        };
        Self {
            mean,
            ci_low: mean - half,
            ci_high: mean + half,
            runs,
        }
    }

    /// Interval for a proportion observed as `successes[r] / trials[r]` in
    /// run `r`. When every run gives the same ratio the sample variance
    /// carries no information, and the Agresti-Coull interval of the pooled
    /// counts is used instead.
    pub fn proportion(successes: &[u64], trials: &[u64]) -> Self {
        let runs: Vec<f64> = successes
            .iter()
            .zip(trials)
            .filter(|&(_, &t)| t > 0)
            .map(|(&s, &t)| s as f64 / t as f64)
            .collect();
        let mut e = Self::from_runs(runs);
        if e.ci_high - e.ci_low > 0.0 || e.runs.is_empty() {
            return e;
        }
        let (s, t) = (
            successes.iter().sum::<u64>() as f64,
            trials.iter().sum::<u64>() as f64,
        );
        let z: f64 = 1.959_963_984_540_054;
        let n = t + z * z;
        let p = (s + z * z / 2.0) / n;
        let half = z * (p * (1.0 - p) / n).sqrt();
        e.ci_low = e.ci_low.min((p - half).max(0.0));
        e.ci_high = e.ci_high.max((p + half).min(1.0));
        e
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.ci_low - INCLUSION_SLACK && value <= self.ci_high + INCLUSION_SLACK
    }
}

fn rng_for(seed: u64, run: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(run as u64))
}

/// Poisson sampler that also accepts a zero rate.
struct Counts(Option<Poisson<f64>>);

impl Counts {
    fn new(rate: f64) -> Self {
        Self((rate > 0.0).then(|| Poisson::new(rate).expect("positive finite rate")))
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        self.0.as_ref().map_or(0, |d| d.sample(rng) as usize)
    }
}

/// One node in isolation.
#[derive(Debug, Clone)]
pub struct QueueSpec {
    pub queue_limit: usize,
    pub tx_slots: Vec<usize>,
    pub traffic: TrafficSpec,
}

#[derive(Debug, Clone, Copy)]
pub struct QueueSimConfig {
    pub seed: u64,
    pub runs: usize,
    /// Arriving packets observed per run, after warm-up.
    pub packets: usize,
    pub warmup_frames: usize,
}

impl Default for QueueSimConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            runs: 10,
            packets: 10_000,
            warmup_frames: 10,
        }
    }
}

/// Single-node simulation results.
#[derive(Debug, Clone, Serialize)]
pub struct QueueStats {
    pub acceptance: Estimate,
    /// Mean delay in slots of accepted packets.
    pub delay: Estimate,
    /// Slot-start queue levels observed during measurement, `0..=K`.
    pub histogram: Vec<u64>,
    pub offered: u64,
    pub accepted: u64,
}

impl QueueStats {
    /// Empirical queue-level distribution.
    pub fn level_distribution(&self) -> Vec<f64> {
        let total = self.histogram.iter().sum::<u64>().max(1) as f64;
        self.histogram.iter().map(|&c| c as f64 / total).collect()
    }
}

struct QueueRun {
    offered: u64,
    accepted: u64,
    delay_sum: u64,
    histogram: Vec<u64>,
}

fn queue_run(spec: &QueueSpec, config: &QueueSimConfig, run: usize) -> QueueRun {
    let mut rng = rng_for(config.seed, run);
    let s = spec.traffic.slots();
    let k_max = spec.queue_limit;
    let mut transmits = vec![false; s];
    for &t in &spec.tx_slots {
        transmits[t] = true;
    }
    let warmup = config.warmup_frames * s;
    let counts: Vec<Counts> = (0..s).map(|i| Counts::new(spec.traffic.poisson_rate(i))).collect();
    // Arrival slot of each queued packet, and whether it is measured.
    let mut queue: VecDeque<(usize, bool)> = VecDeque::new();
    let mut stats = QueueRun {
        offered: 0,
        accepted: 0,
        delay_sum: 0,
        histogram: vec![0; k_max + 1],
    };
    let mut pending = 0usize;
    let can_transmit = !spec.tx_slots.is_empty();
    let mut t = 0usize;
    let idle = spec.traffic.expected_arrivals_per_slotframe() == 0.0;
    loop {
        let collecting = t >= warmup && (stats.offered as usize) < config.packets;
        if !collecting && t >= warmup && (pending == 0 || !can_transmit) {
            break;
        }
        if idle && t >= warmup {
            break;
        }
        let i = t % s;
        let q = queue.len();
        debug_assert!(q <= k_max);
        if collecting {
            stats.histogram[q] += 1;
        }
        let arrivals = counts[i].sample(&mut rng)
            + usize::from(rng.random::<f64>() < spec.traffic.bernoulli_probability(i));
        let admitted = arrivals.min(k_max - q);
        if collecting {
            stats.offered += arrivals as u64;
            stats.accepted += admitted as u64;
            pending += admitted;
        }
        queue.extend(std::iter::repeat_n((t, collecting), admitted));
        if transmits[i] && q > 0 {
            let (arrived, measured) = queue.pop_front().expect("q > 0");
            if measured {
                stats.delay_sum += (t - arrived) as u64;
                pending -= 1;
            }
        }
        t += 1;
    }
    stats
}

/// Simulates `config.runs` independent runs of one node.
pub fn simulate_queue(spec: &QueueSpec, config: &QueueSimConfig) -> QueueStats {
    let runs: Vec<QueueRun> = (0..config.runs)
        .into_par_iter()
        .map(|r| queue_run(spec, config, r))
        .collect();
    let offered: Vec<u64> = runs.iter().map(|r| r.offered).collect();
    let accepted: Vec<u64> = runs.iter().map(|r| r.accepted).collect();
    let mut acceptance = Estimate::proportion(&accepted, &offered);
    if runs.iter().all(|r| r.offered == 0) {
        acceptance = Estimate::from_runs(vec![1.0; runs.len()]);
    }
    let delay = Estimate::from_runs(
        runs.iter()
            .filter(|r| r.accepted > 0)
            .map(|r| r.delay_sum as f64 / r.accepted as f64)
            .collect(),
    );
    let mut histogram = vec![0; spec.queue_limit + 1];
    for r in &runs {
        histogram.iter_mut().zip(&r.histogram).for_each(|(h, c)| *h += c);
    }
    QueueStats {
        acceptance,
        delay,
        histogram,
        offered: offered.iter().sum(),
        accepted: accepted.iter().sum(),
    }
}

#[derive(Debug, Clone)]
pub struct NetworkSimConfig {
    pub seed: u64,
    pub runs: usize,
    /// Packets tracked end to end per run, counted from the first packet
    /// generated after warm-up.
    pub tracked_packets: usize,
    /// Only packets generated at these nodes are tracked. Empty means all.
    pub tracked_nodes: Vec<NodeId>,
    pub warmup_slots: usize,
    /// Minimum measurement window after warm-up, for throughput.
    pub measure_slots: usize,
}

impl NetworkSimConfig {
    /// Warm-up of `seconds` of simulated time at the given slot duration.
    pub fn with_warmup_seconds(mut self, seconds: f64, slot_duration: f64) -> Self {
        self.warmup_slots = (seconds / slot_duration).round() as usize;
        self
    }
}

impl Default for NetworkSimConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            runs: 5,
            tracked_packets: 100,
            tracked_nodes: Vec::new(),
            warmup_slots: 90_000,
            measure_slots: 0,
        }
    }
}

/// Packet counts of one run, over the whole run including warm-up.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Conservation {
    pub generated: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub lost: u64,
    pub queued: u64,
}

impl Conservation {
    pub fn balanced(&self) -> bool {
        self.generated == self.delivered + self.dropped + self.lost + self.queued
    }
}

/// Result of one network run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkRun {
    pub tracked: u64,
    pub tracked_delivered: u64,
    /// Sum of end-to-end delays (slots) of delivered tracked packets.
    pub tracked_delay: u64,
    pub sink_received: u64,
    pub measured_slots: u64,
    /// Per node: arrivals offered and accepted after warm-up.
    pub offered: Vec<u64>,
    pub accepted: Vec<u64>,
    pub max_queue: usize,
    pub conservation: Conservation,
}

/// Network simulation results.
#[derive(Debug, Clone, Serialize)]
pub struct NetworkStats {
    /// Share of tracked packets reaching the sink.
    pub pdr: Estimate,
    /// Mean end-to-end delay of delivered tracked packets, in slots.
    pub delay: Estimate,
    /// Packets per second received by the sink.
    pub throughput: Estimate,
    /// Per-node acceptance ratio; the sink accepts everything.
    pub acceptance: Vec<Estimate>,
    pub runs: Vec<NetworkRun>,
}

#[derive(Clone, Copy)]
struct Packet {
    generated: usize,
    tracked: bool,
}

/// One run of the network simulation.
pub fn simulate_network_run(
    scenario: &NetworkScenario,
    config: &NetworkSimConfig,
    run: usize,
) -> NetworkRun {
    let mut rng = rng_for(config.seed, run);
    let schedule = &scenario.schedule;
    let topology = &scenario.topology;
    let n_nodes = topology.node_count();
    let s = schedule.slotframe_length();
    let k_max = scenario.queue_limit;
    let rate = scenario.generation_rate;

    // Transmitter of every node per slot, if any.
    let mut sending: Vec<Vec<(NodeId, NodeId, f64)>> = vec![Vec::new(); s];
    for n in 0..n_nodes {
        for a in &schedule.node(n).tx {
            sending[a.slot].push((n, a.peer, scenario.packet_error(n, a.peer)));
        }
    }
    let trackable: Vec<bool> = (0..n_nodes)
        .map(|n| n != ROOT && (config.tracked_nodes.is_empty() || config.tracked_nodes.contains(&n)))
        .collect();

    // Generation is a Poisson process in continuous time, in slot units.
    let gap = |rng: &mut ChaCha8Rng| {
        let e: f64 = Exp1.sample(rng);
        e / rate
    };
    let mut next_generation: Vec<f64> = (0..n_nodes)
        .map(|n| if n == ROOT || rate == 0.0 { f64::INFINITY } else { gap(&mut rng) })
        .collect();
    let mut start = vec![0usize; n_nodes];
    let mut queues: Vec<VecDeque<Packet>> = vec![VecDeque::new(); n_nodes];
    let mut out = NetworkRun {
        tracked: 0,
        tracked_delivered: 0,
        tracked_delay: 0,
        sink_received: 0,
        measured_slots: 0,
        offered: vec![0; n_nodes],
        accepted: vec![0; n_nodes],
        max_queue: 0,
        conservation: Conservation::default(),
    };
    let mut unresolved = 0u64;
    let mut incoming: Vec<Vec<Packet>> = vec![Vec::new(); n_nodes];
    let mut senders: Vec<NodeId> = Vec::new();
    let target = config.tracked_packets as u64;
    let never_ends = rate == 0.0;

    let mut t = 0usize;
    loop {
        let measuring = t >= config.warmup_slots;
        let done_tracking = out.tracked >= target && unresolved == 0;
        if measuring
            && (done_tracking || never_ends)
            && t >= config.warmup_slots + config.measure_slots
        {
            break;
        }
        let i = t % s;
        for (len, q) in start.iter_mut().zip(&queues) {
            *len = q.len();
        }

        senders.clear();
        for &(n, peer, per) in &sending[i] {
            if start[n] == 0 {
                continue;
            }
            senders.push(n);
            let packet = queues[n][0];
            if per > 0.0 && rng.random::<f64>() < per {
                out.conservation.lost += 1;
                if packet.tracked {
                    unresolved -= 1;
                }
            } else {
                incoming[peer].push(packet);
            }
        }

        for n in 0..n_nodes {
            let arrivals = &mut incoming[n];
            let slot_end = (t + 1) as f64;
            while next_generation[n] < slot_end {
                next_generation[n] += gap(&mut rng);
                let tracked = measuring && trackable[n] && out.tracked < target;
                if tracked {
                    out.tracked += 1;
                    unresolved += 1;
                }
                out.conservation.generated += 1;
                arrivals.push(Packet { generated: t, tracked });
            }
            if arrivals.is_empty() {
                continue;
            }
            if n == ROOT {
                for p in arrivals.drain(..) {
                    out.conservation.delivered += 1;
                    if measuring {
                        out.sink_received += 1;
                    }
                    if p.tracked {
                        out.tracked_delivered += 1;
                        out.tracked_delay += (t - p.generated) as u64;
                        unresolved -= 1;
                    }
                }
                continue;
            }
            arrivals.shuffle(&mut rng);
            let room = k_max - start[n];
            if measuring {
                out.offered[n] += arrivals.len() as u64;
                out.accepted[n] += arrivals.len().min(room) as u64;
            }
            for (j, p) in arrivals.drain(..).enumerate() {
                if j < room {
                    queues[n].push_back(p);
                } else {
                    out.conservation.dropped += 1;
                    if p.tracked {
                        unresolved -= 1;
                    }
                }
            }
        }

        for &n in &senders {
            queues[n].pop_front();
        }
        for q in &queues {
            out.max_queue = out.max_queue.max(q.len());
        }
        if measuring {
            out.measured_slots += 1;
        }
        t += 1;
    }
    out.conservation.queued = queues.iter().map(|q| q.len() as u64).sum();
    out
}

/// Simulates `config.runs` independent network runs in parallel.
pub fn simulate_network(
    scenario: &NetworkScenario,
    config: &NetworkSimConfig,
) -> Result<NetworkStats, NetworkError> {
    scenario.check()?;
    let runs: Vec<NetworkRun> = (0..config.runs)
        .into_par_iter()
        .map(|r| simulate_network_run(scenario, config, r))
        .collect();
    let delivered: Vec<u64> = runs.iter().map(|r| r.tracked_delivered).collect();
    let tracked: Vec<u64> = runs.iter().map(|r| r.tracked).collect();
    let pdr = Estimate::proportion(&delivered, &tracked);
    let delay = Estimate::from_runs(
        runs.iter()
            .filter(|r| r.tracked_delivered > 0)
            .map(|r| r.tracked_delay as f64 / r.tracked_delivered as f64)
            .collect(),
    );
    let slot = scenario.schedule.slot_duration();
    let throughput = Estimate::from_runs(
        runs.iter()
            .map(|r| r.sink_received as f64 / (r.measured_slots.max(1) as f64 * slot))
            .collect(),
    );
    let acceptance = (0..scenario.topology.node_count())
        .map(|n| {
            let acc: Vec<u64> = runs.iter().map(|r| r.accepted[n]).collect();
            let off: Vec<u64> = runs.iter().map(|r| r.offered[n]).collect();
            if n == ROOT || off.iter().all(|&o| o == 0) {
                Estimate::from_runs(vec![1.0; runs.len()])
            } else {
                Estimate::proportion(&acc, &off)
            }
        })
        .collect();
    Ok(NetworkStats {
        pdr,
        delay,
        throughput,
        acceptance,
        runs,
    })
}
