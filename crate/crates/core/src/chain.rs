//! Per-node Markov chain over states `(q, i)`: `q` queued packets at the
//! start of slot `i`.

use thiserror::Error;

use crate::matrix::TransitionMatrix;
use crate::stationary::SolveError;
use crate::traffic::TrafficSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("queue limit must be at least 1")]
    QueueLimit,
    #[error("slotframe length must be at least 1")]
    EmptySlotframe,
    #[error("TX slot {slot} outside a slotframe of {len} slots")]
    SlotOutOfRange { slot: usize, len: usize },
    #[error("traffic covers {traffic} slots, slotframe has {len}")]
    TrafficLength { traffic: usize, len: usize },
    #[error("no offered traffic")]
    NoTraffic,
    #[error("node never transmits")]
    NoTxSlots,
    #[error("TX slot {slot} has no stationary mass")]
    EmptyColumn { slot: usize },
    #[error("stationary vector has {got} entries, chain has {expected} states")]
    StationaryLength { got: usize, expected: usize },
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Transition structure of one node's queue.
#[derive(Debug, Clone)]
pub struct QueueChain {
    queue_limit: usize,
    slotframe_length: usize,
    tx_slots: Vec<usize>,
    transmits: Vec<bool>,
    traffic: TrafficSpec,
    matrix: TransitionMatrix,
}

/// Builds the chain for queue limit `K`, slotframe length `S`, the node's TX
/// slots and its per-slot arrivals. TX slots are sorted and deduplicated.
pub fn build_chain(
    queue_limit: usize,
    slotframe_length: usize,
    tx_slots: &[usize],
    traffic: &TrafficSpec,
) -> Result<QueueChain, ModelError> {
    let (k_max, s) = (queue_limit, slotframe_length);
    if k_max == 0 {
        return Err(ModelError::QueueLimit);
    }
    if s == 0 {
        return Err(ModelError::EmptySlotframe);
    }
    if traffic.slots() != s {
        return Err(ModelError::TrafficLength {
            traffic: traffic.slots(),
            len: s,
        });
    }
    let mut transmits = vec![false; s];
    for &slot in tx_slots {
        if slot >= s {
            return Err(ModelError::SlotOutOfRange { slot, len: s });
        }
        transmits[slot] = true;
    }
    let tx: Vec<usize> = (0..s).filter(|&i| transmits[i]).collect();

    // Accepted-packet distributions depend only on (slot, free space).
    let accepted: Vec<Vec<Vec<f64>>> = (0..s)
        .map(|i| (0..=k_max).map(|free| traffic.truncated(i, free)).collect())
        .collect();

    let mut rows = Vec::with_capacity((k_max + 1) * s);
    for q in 0..=k_max {
        for i in 0..s {
            let next = (i + 1) % s;
            let left = q.saturating_sub(usize::from(transmits[i]));
            let row = accepted[i][k_max - q]
                .iter()
                .enumerate()
                .map(|(k, &p)| ((left + k) * s + next, p))
                .collect();
            rows.push(row);
        }
    }
    Ok(QueueChain {
        queue_limit: k_max,
        slotframe_length: s,
        tx_slots: tx,
        transmits,
        traffic: traffic.clone(),
        matrix: TransitionMatrix::from_rows(rows),
    })
}

impl QueueChain {
    pub fn queue_limit(&self) -> usize {
        self.queue_limit
    }

    pub fn slotframe_length(&self) -> usize {
        self.slotframe_length
    }

    pub fn tx_slots(&self) -> &[usize] {
        &self.tx_slots
    }

    /// `tau_i`: 1 if the node transmits in `slot`.
    pub fn transmits(&self, slot: usize) -> bool {
        self.transmits[slot]
    }

    pub fn traffic(&self) -> &TrafficSpec {
        &self.traffic
    }

    pub fn matrix(&self) -> &TransitionMatrix {
        &self.matrix
    }

    pub fn state_count(&self) -> usize {
        (self.queue_limit + 1) * self.slotframe_length
    }

    pub fn index(&self, q: usize, slot: usize) -> usize {
        q * self.slotframe_length + slot
    }

    /// `(q, i)` of state index `j`.
    pub fn state(&self, j: usize) -> (usize, usize) {
        (j / self.slotframe_length, j % self.slotframe_length)
    }

    /// Empty queue at slot 0.
    pub fn start_state(&self) -> usize {
        0
    }

    /// State indices ordered by slot first, queue level second.
    pub fn slot_major_order(&self) -> Vec<usize> {
        (0..self.slotframe_length)
            .flat_map(|i| (0..=self.queue_limit).map(move |q| (q, i)))
            .map(|(q, i)| self.index(q, i))
            .collect()
    }
}
