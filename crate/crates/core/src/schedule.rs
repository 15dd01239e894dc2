//! Slot schedule data model and its JSON file format.
//!
//! A schedule assigns each node an ascending list of transmission and
//! reception slots within a slotframe of `S` slots. Every assignment names the
//! counterpart (peer) and the channel used in that slot.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::NodeId;

/// IEEE 802.15.4 channel number.
pub type Channel = u8;

/// Channels of the 2.4 GHz band.
pub const CHANNELS_2_4_GHZ: std::ops::RangeInclusive<Channel> = 11..=26;

/// Channel used by single-channel schedules.
pub const DEFAULT_CHANNEL: Channel = 11;

/// Typical TSCH slot duration in seconds.
pub const DEFAULT_SLOT_DURATION: f64 = 0.010;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("invalid schedule JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("slotframe length must be positive")]
    EmptySlotframe,
    #[error("slot duration must be positive and finite, got {0}")]
    SlotDuration(f64),
    #[error("node entry {position} has id {id}; ids must be 0..N in order")]
    NodeId { position: usize, id: NodeId },
    #[error("node {node}: slot {slot} outside slotframe of length {len}")]
    SlotOutOfRange { node: NodeId, slot: usize, len: usize },
    #[error("node {node}: peer {peer} does not exist")]
    PeerOutOfRange { node: NodeId, peer: NodeId },
    #[error("node {node}: slot {slot} links the node to itself")]
    SelfLink { node: NodeId, slot: usize },
    #[error("node {node}: {direction} slots must be strictly ascending (slot {slot})")]
    NotAscending {
        node: NodeId,
        direction: &'static str,
        slot: usize,
    },
    #[error("slot {slot} with link {tx}->{rx} is not active")]
    LinkNotActive { slot: usize, tx: NodeId, rx: NodeId },
}

/// One scheduled slot of a node: the slot index, the counterpart node, and
/// the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotAssignment {
    pub slot: usize,
    pub peer: NodeId,
    pub channel: Channel,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSlots {
    pub tx: Vec<SlotAssignment>,
    pub rx: Vec<SlotAssignment>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeEntry {
    id: NodeId,
    tx: Vec<SlotAssignment>,
    rx: Vec<SlotAssignment>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleFile {
    slotframe_length: usize,
    #[serde(default = "default_slot_duration")]
    slot_duration_s: f64,
    nodes: Vec<NodeEntry>,
}

fn default_slot_duration() -> f64 {
    DEFAULT_SLOT_DURATION
}

/// A structurally well-formed schedule.
///
/// Construction only checks what is needed to index the schedule safely
/// (slot and peer ranges, ascending order). Semantic invariants such as
/// TX/RX exclusivity and link consistency are checked by
/// [`crate::conflict::validate`] so that broken schedules can be reported
/// rather than rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    slotframe_length: usize,
    slot_duration: f64,
    nodes: Vec<NodeSlots>,
}

impl Schedule {
    pub fn new(
        slotframe_length: usize,
        slot_duration: f64,
        nodes: Vec<NodeSlots>,
    ) -> Result<Self, ScheduleError> {
        if slotframe_length == 0 {
            return Err(ScheduleError::EmptySlotframe);
        }
        if !(slot_duration.is_finite() && slot_duration > 0.0) {
            return Err(ScheduleError::SlotDuration(slot_duration));
        }
        let count = nodes.len();
        for (n, slots) in nodes.iter().enumerate() {
            for (direction, list) in [("tx", &slots.tx), ("rx", &slots.rx)] {
                let mut prev: Option<usize> = None;
                for a in list {
                    if a.slot >= slotframe_length {
                        return Err(ScheduleError::SlotOutOfRange {
                            node: n,
                            slot: a.slot,
                            len: slotframe_length,
                        });
                    }
                    if a.peer >= count {
                        return Err(ScheduleError::PeerOutOfRange { node: n, peer: a.peer });
                    }
                    if a.peer == n {
                        return Err(ScheduleError::SelfLink { node: n, slot: a.slot });
                    }
                    if prev.is_some_and(|p| p >= a.slot) {
                        return Err(ScheduleError::NotAscending {
                            node: n,
                            direction,
                            slot: a.slot,
                        });
                    }
                    prev = Some(a.slot);
                }
            }
        }
        Ok(Self {
            slotframe_length,
            slot_duration,
            nodes,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, ScheduleError> {
        let file: ScheduleFile = serde_json::from_str(text)?;
        let mut nodes = Vec::with_capacity(file.nodes.len());
        for (position, entry) in file.nodes.into_iter().enumerate() {
            if entry.id != position {
                return Err(ScheduleError::NodeId {
                    position,
                    id: entry.id,
                });
            }
            nodes.push(NodeSlots {
                tx: entry.tx,
                rx: entry.rx,
            });
        }
        Self::new(file.slotframe_length, file.slot_duration_s, nodes)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScheduleError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScheduleError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Pretty-printed JSON. Output is a pure function of the schedule.
    pub fn to_json(&self) -> String {
        let file = ScheduleFile {
            slotframe_length: self.slotframe_length,
            slot_duration_s: self.slot_duration,
            nodes: self
                .nodes
                .iter()
                .enumerate()
                .map(|(id, s)| NodeEntry {
                    id,
                    tx: s.tx.clone(),
                    rx: s.rx.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("schedule serializes")
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn slotframe_length(&self) -> usize {
        self.slotframe_length
    }

    /// Slot duration in seconds.
    pub fn slot_duration(&self) -> f64 {
        self.slot_duration
    }

    pub fn with_slot_duration(mut self, seconds: f64) -> Result<Self, ScheduleError> {
        if !(seconds.is_finite() && seconds > 0.0) {
            return Err(ScheduleError::SlotDuration(seconds));
        }
        self.slot_duration = seconds;
        Ok(self)
    }

    pub fn node(&self, n: NodeId) -> &NodeSlots {
        &self.nodes[n]
    }

    pub fn tx_slots(&self, n: NodeId) -> Vec<usize> {
        self.nodes[n].tx.iter().map(|a| a.slot).collect()
    }

    pub fn rx_slots(&self, n: NodeId) -> Vec<usize> {
        self.nodes[n].rx.iter().map(|a| a.slot).collect()
    }

    pub fn tx_assignment(&self, n: NodeId, slot: usize) -> Option<&SlotAssignment> {
        find(&self.nodes[n].tx, slot)
    }

    pub fn rx_assignment(&self, n: NodeId, slot: usize) -> Option<&SlotAssignment> {
        find(&self.nodes[n].rx, slot)
    }

    /// Receiver for a TX slot, transmitter for an RX slot. TX takes
    /// precedence if a (broken) schedule lists the slot in both.
    pub fn counterpart(&self, n: NodeId, slot: usize) -> Option<NodeId> {
        self.tx_assignment(n, slot)
            .or_else(|| self.rx_assignment(n, slot))
            .map(|a| a.peer)
    }

    pub fn channel(&self, n: NodeId, slot: usize) -> Option<Channel> {
        self.tx_assignment(n, slot)
            .or_else(|| self.rx_assignment(n, slot))
            .map(|a| a.channel)
    }

    /// Number of reception slots at `n` and their share of the slotframe.
    pub fn rx_ratio(&self, n: NodeId) -> (usize, f64) {
        let count = self.nodes[n].rx.len();
        (count, count as f64 / self.slotframe_length as f64)
    }
}

fn find(list: &[SlotAssignment], slot: usize) -> Option<&SlotAssignment> {
    list.binary_search_by_key(&slot, |a| a.slot)
        .ok()
        .map(|i| &list[i])
}

/// Accumulates links and produces a [`Schedule`] with sorted slot lists.
#[derive(Debug, Clone)]
pub struct ScheduleBuilder {
    slotframe_length: usize,
    slot_duration: f64,
    nodes: Vec<NodeSlots>,
}

impl ScheduleBuilder {
    pub fn new(node_count: usize, slotframe_length: usize) -> Self {
        Self {
            slotframe_length,
            slot_duration: DEFAULT_SLOT_DURATION,
            nodes: vec![NodeSlots::default(); node_count],
        }
    }

    pub fn slot_duration(mut self, seconds: f64) -> Self {
        self.slot_duration = seconds;
        self
    }

    pub fn set_slotframe_length(&mut self, len: usize) {
        self.slotframe_length = len;
    }

    /// Records a consistent link `tx -> rx` at `slot` on both endpoints.
    pub fn link(&mut self, tx: NodeId, rx: NodeId, slot: usize, channel: Channel) -> &mut Self {
        self.tx_only(tx, rx, slot, channel);
        self.rx_only(rx, tx, slot, channel);
        self
    }

    pub fn tx_only(&mut self, node: NodeId, peer: NodeId, slot: usize, channel: Channel) {
        self.nodes[node].tx.push(SlotAssignment {
            slot,
            peer,
            channel,
        });
    }

    pub fn rx_only(&mut self, node: NodeId, peer: NodeId, slot: usize, channel: Channel) {
        self.nodes[node].rx.push(SlotAssignment {
            slot,
            peer,
            channel,
        });
    }

    pub fn build(mut self) -> Result<Schedule, ScheduleError> {
        for n in &mut self.nodes {
            n.tx.sort_by_key(|a| a.slot);
            n.rx.sort_by_key(|a| a.slot);
        }
        Schedule::new(self.slotframe_length, self.slot_duration, self.nodes)
    }
}

/// The three-node example schedule: node 1 sends to the sink in slots 0 and
/// 1, node 2 sends to node 1 in slot 2.
pub fn three_node_example() -> Schedule {
    let mut b = ScheduleBuilder::new(3, 3);
    b.link(1, 0, 0, DEFAULT_CHANNEL)
        .link(1, 0, 1, DEFAULT_CHANNEL)
        .link(2, 1, 2, DEFAULT_CHANNEL);
    b.build().expect("example schedule is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_node_example_matches_notation() {
        let s = three_node_example();
        assert_eq!(s.slotframe_length(), 3);
        assert_eq!(s.tx_slots(0), Vec::<usize>::new());
        assert_eq!(s.rx_slots(0), vec![0, 1]);
        assert_eq!(s.tx_slots(1), vec![0, 1]);
        assert_eq!(s.rx_slots(1), vec![2]);
        assert_eq!(s.tx_slots(2), vec![2]);
        assert_eq!(s.counterpart(0, 0), Some(1));
        assert_eq!(s.counterpart(1, 2), Some(2));
        assert_eq!(s.counterpart(2, 2), Some(1));
        assert_eq!(s.counterpart(2, 0), None);
    }

    #[test]
    fn json_is_stable() {
        let s = three_node_example();
        let json = s.to_json();
        let back = Schedule::from_json(&json).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_json(), json);
    }

    #[test]
    fn rejects_structural_errors() {
        let unknown = r#"{"slotframe_length": 1, "nodes": [], "bogus": 0}"#;
        assert!(matches!(
            Schedule::from_json(unknown),
            Err(ScheduleError::Json(_))
        ));
        let out_of_range = r#"{"slotframe_length": 2, "nodes": [
            {"id": 0, "tx": [], "rx": [{"slot": 2, "peer": 1, "channel": 11}]},
            {"id": 1, "tx": [{"slot": 2, "peer": 0, "channel": 11}], "rx": []}]}"#;
        assert!(matches!(
            Schedule::from_json(out_of_range),
            Err(ScheduleError::SlotOutOfRange { slot: 2, .. })
        ));
        let unsorted = r#"{"slotframe_length": 3, "nodes": [
            {"id": 0, "tx": [], "rx": []},
            {"id": 1, "tx": [{"slot": 2, "peer": 0, "channel": 11},
                             {"slot": 1, "peer": 0, "channel": 11}], "rx": []}]}"#;
        assert!(matches!(
            Schedule::from_json(unsorted),
            Err(ScheduleError::NotAscending { node: 1, .. })
        ));
        let ids = r#"{"slotframe_length": 1, "nodes": [{"id": 1, "tx": [], "rx": []}]}"#;
        assert!(matches!(
            Schedule::from_json(ids),
            Err(ScheduleError::NodeId { position: 0, id: 1 })
        ));
    }

    #[test]
    fn slot_duration_defaults() {
        let text = r#"{"slotframe_length": 1, "nodes": [{"id": 0, "tx": [], "rx": []}]}"#;
        let s = Schedule::from_json(text).unwrap();
        assert_eq!(s.slot_duration(), DEFAULT_SLOT_DURATION);
    }
}
