//! Network-wide composition of per-node queue models.
//!
//! Every non-root node generates Poisson traffic at `p_gen` packets per slot.
//! Packets forwarded by a child arrive as the Bernoulli part of the parent's
//! arrivals in the child's TX slots, with the child's transmission
//! probability (reduced by the link's packet error ratio). Nodes are solved
//! leaves first; one tree level is solved in parallel.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::chain::ModelError;
use crate::conflict::validate;
use crate::metrics::{model_variant, NodeMetrics, Variant};
use crate::schedule::Schedule;
use crate::stationary::SolverOptions;
use crate::topology::{NodeId, Topology, ROOT};
use crate::traffic::{TrafficError, TrafficSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("schedule has {schedule} nodes, topology {topology}")]
    SizeMismatch { schedule: usize, topology: usize },
    #[error("schedule does not validate against the topology: {0}")]
    InvalidSchedule(String),
    #[error("node {node} transmits to {peer} in slot {slot}, but its parent is {parent:?}")]
    TreeMismatch {
        node: NodeId,
        slot: usize,
        peer: NodeId,
        parent: Option<NodeId>,
    },
    #[error("node {0} has traffic but no TX slots")]
    NoTxSlots(NodeId),
    #[error("generation rate {0} must be finite and non-negative")]
    Rate(f64),
    #[error("packet error ratio {per} of link {from} -> {to} outside [0, 1]")]
    PacketErrorRatio { from: NodeId, to: NodeId, per: f64 },
    #[error("node {node}: {source}")]
    Model { node: NodeId, source: ModelError },
    #[error("node {node}: {source}")]
    Traffic { node: NodeId, source: TrafficError },
}

/// Inputs of a network evaluation.
#[derive(Debug, Clone)]
pub struct NetworkScenario {
    pub schedule: Schedule,
    pub topology: Topology,
    /// Packets generated per slot at every non-root node.
    pub generation_rate: f64,
    pub queue_limit: usize,
    /// Packet error ratio per directed link `(from, to)`; absent links are
    /// lossless.
    pub packet_error: BTreeMap<(NodeId, NodeId), f64>,
    pub variant: Variant,
    pub solver: SolverOptions,
}

impl NetworkScenario {
    pub fn new(schedule: Schedule, topology: Topology, generation_rate: f64, queue_limit: usize) -> Self {
        Self {
            schedule,
            topology,
            generation_rate,
            queue_limit,
            packet_error: BTreeMap::new(),
            variant: Variant::Full,
            solver: SolverOptions::default(),
        }
    }

    /// Sets the generation rate from the mean interval between two packets
    /// of one node, in seconds.
    pub fn with_interval(mut self, seconds: f64) -> Self {
        self.generation_rate = self.schedule.slot_duration() / seconds;
        self
    }

    pub fn with_packet_error(mut self, from: NodeId, to: NodeId, per: f64) -> Self {
        self.packet_error.insert((from, to), per);
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_solver(mut self, solver: SolverOptions) -> Self {
        self.solver = solver;
        self
    }

    pub fn packet_error(&self, from: NodeId, to: NodeId) -> f64 {
        self.packet_error.get(&(from, to)).copied().unwrap_or(0.0)
    }

    /// Structural checks shared by the model and the simulation.
    pub fn check(&self) -> Result<(), NetworkError> {
        let (schedule, topology) = (&self.schedule, &self.topology);
        if schedule.node_count() != topology.node_count() {
            return Err(NetworkError::SizeMismatch {
                schedule: schedule.node_count(),
                topology: topology.node_count(),
            });
        }
        if !(self.generation_rate.is_finite() && self.generation_rate >= 0.0) {
            return Err(NetworkError::Rate(self.generation_rate));
        }
        for (&(from, to), &per) in &self.packet_error {
            if !(0.0..=1.0).contains(&per) {
                return Err(NetworkError::PacketErrorRatio { from, to, per });
            }
        }
        let report = validate(schedule, topology);
        if !report.is_valid() {
            let first = report
                .violations
                .first()
                .map(|v| v.to_string())
                .or_else(|| report.collisions.first().map(|c| c.to_string()))
                .unwrap_or_default();
            return Err(NetworkError::InvalidSchedule(first));
        }
        for n in 0..schedule.node_count() {
            let parent = topology.parent(n);
            for a in &schedule.node(n).tx {
                if Some(a.peer) != parent {
                    return Err(NetworkError::TreeMismatch {
                        node: n,
                        slot: a.slot,
                        peer: a.peer,
                        parent,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Model output for a whole network.
#[derive(Debug, Clone, Serialize)]
pub struct NetworkResult {
    /// Per-node metrics; `None` for the root, which runs no queue model.
    pub nodes: Vec<Option<NodeMetrics>>,
    /// End-to-end packet delivery ratio of packets generated at each node.
    pub pdr: Vec<f64>,
    /// End-to-end delay in slots.
    pub delay: Vec<f64>,
    /// Expected receptions of each node per slot.
    pub reception: Vec<Vec<f64>>,
    pub slot_duration: f64,
}

impl NetworkResult {
    /// Packets per second arriving at the sink.
    pub fn throughput(&self) -> f64 {
        throughput(self)
    }

    /// `(PDR, delay in slots)` of `node`.
    pub fn end_to_end(&self, node: NodeId) -> (f64, f64) {
        end_to_end(self, node)
    }

    pub fn delay_seconds(&self, node: NodeId) -> f64 {
        self.delay[node] * self.slot_duration
    }

    /// Mean PDR and mean delay (slots) over `nodes`.
    pub fn average(&self, nodes: &[NodeId]) -> (f64, f64) {
        let k = nodes.len().max(1) as f64;
        (
            nodes.iter().map(|&n| self.pdr[n]).sum::<f64>() / k,
            nodes.iter().map(|&n| self.delay[n]).sum::<f64>() / k,
        )
    }
}

/// Sink receptions per slotframe, divided by the slotframe duration.
pub fn throughput(result: &NetworkResult) -> f64 {
    let per_frame: f64 = result.reception[ROOT].iter().sum();
    per_frame / (result.reception[ROOT].len() as f64 * result.slot_duration)
}

pub fn end_to_end(result: &NetworkResult, node: NodeId) -> (f64, f64) {
    (result.pdr[node], result.delay[node])
}

/// Concentric test network with `rings` rings around the sink.
pub fn concentric_topology(rings: usize) -> Topology {
    Topology::concentric(rings)
}

/// Per-slot expected receptions of `n` given its children's transmission
/// probabilities.
fn receptions(scenario: &NetworkScenario, n: NodeId, tx: &[Vec<f64>]) -> Vec<f64> {
    let mut rx = vec![0.0; scenario.schedule.slotframe_length()];
    for a in &scenario.schedule.node(n).rx {
        rx[a.slot] = tx[a.peer][a.slot] * (1.0 - scenario.packet_error(a.peer, n));
    }
    rx
}

/// Metrics of a node that never holds a packet.
fn silent(variant: Variant, queue_limit: usize, slots: usize) -> NodeMetrics {
    let mut marginals = vec![0.0; queue_limit + 1];
    marginals[0] = 1.0;
    NodeMetrics {
        variant,
        queue_limit,
        offered: 0.0,
        transmission: vec![0.0; slots],
        acceptance: 1.0,
        expected_delay: 0.0,
        marginals,
        stationary: Vec::new(),
        residual: 0.0,
        reachable: 0,
    }
}

/// Solves every node and composes PDR, delay and throughput.
pub fn evaluate_network(scenario: &NetworkScenario) -> Result<NetworkResult, NetworkError> {
    scenario.check()?;
    let schedule = &scenario.schedule;
    let topology = &scenario.topology;
    let n_nodes = topology.node_count();
    let s = schedule.slotframe_length();

    let mut metrics: Vec<Option<NodeMetrics>> = vec![None; n_nodes];
    let mut tx = vec![vec![0.0; s]; n_nodes];
    let mut reception = vec![vec![0.0; s]; n_nodes];

    for level in topology.levels_leaves_first() {
        let solved: Vec<_> = level
            .par_iter()
            .filter(|&&n| n != ROOT)
            .map(|&n| {
                let rx = receptions(scenario, n, &tx);
                let traffic = TrafficSpec::new(vec![scenario.generation_rate; s], rx.clone())
                    .map_err(|source| NetworkError::Traffic { node: n, source })?;
                let tx_slots = schedule.tx_slots(n);
                let m = if tx_slots.is_empty() {
                    if traffic.expected_arrivals_per_slotframe() > 0.0 {
                        return Err(NetworkError::NoTxSlots(n));
                    }
                    silent(scenario.variant, scenario.queue_limit, s)
                } else {
                    model_variant(scenario.variant, scenario.queue_limit, &tx_slots, &traffic, &scenario.solver)
                        .map_err(|source| NetworkError::Model { node: n, source })?
                };
                Ok((n, rx, m))
            })
            .collect::<Result<_, NetworkError>>()?;
        for (n, rx, m) in solved {
            tx[n] = m.transmission.clone();
            reception[n] = rx;
            metrics[n] = Some(m);
        }
    }
    reception[ROOT] = receptions(scenario, ROOT, &tx);

    let mut pdr = vec![1.0; n_nodes];
    let mut delay = vec![0.0; n_nodes];
    // Parents precede children in the reversed leaves-first order.
    for n in topology.leaves_first().into_iter().rev() {
        if let (Some(p), Some(m)) = (topology.parent(n), &metrics[n]) {
            pdr[n] = pdr[p] * m.acceptance;
            delay[n] = delay[p] + m.expected_delay;
        }
    }
    Ok(NetworkResult {
        nodes: metrics,
        pdr,
        delay,
        reception,
        slot_duration: schedule.slot_duration(),
    })
}
