//! Schedule generators for a data-collection tree.
//!
//! The traffic-aware generators are distributed algorithms. They run here as
//! message handlers on a single in-process FIFO queue, so delivery is
//! reliable and ordered and every run is deterministic. Unvisited children
//! are visited in ascending id order; channel selection takes the smallest
//! free channel.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::schedule::{Channel, Schedule, ScheduleBuilder, CHANNELS_2_4_GHZ, DEFAULT_CHANNEL};
use crate::topology::{NodeId, Topology, ROOT};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchedulerError {
    #[error("no free channel for the reception of node {node} in slot {slot}")]
    ChannelsExhausted { node: NodeId, slot: usize },
    #[error("node {node} found no idle slot for child {child}")]
    SlotsExhausted { node: NodeId, child: NodeId },
    #[error("channel set is empty")]
    NoChannels,
}

/// One delivered message: type, sender, receiver, payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceEntry {
    pub kind: &'static str,
    pub src: NodeId,
    pub dst: NodeId,
    pub payload: String,
}

impl fmt::Display for TraceEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.kind, self.src, self.dst)?;
        if !self.payload.is_empty() {
            write!(f, " {}", self.payload)?;
        }
        Ok(())
    }
}

trait Payload {
    fn kind(&self) -> &'static str;
    fn payload(&self) -> String;
}

/// FIFO message transport with a delivery log.
struct Transport<M> {
    queue: VecDeque<(NodeId, NodeId, M)>,
    trace: Vec<TraceEntry>,
}

impl<M: Payload> Transport<M> {
    /// `start` is delivered to `dst` without being logged.
    fn new(dst: NodeId, start: M) -> Self {
        Self {
            queue: VecDeque::from([(dst, dst, start)]),
            trace: Vec::new(),
        }
    }

    fn send(&mut self, src: NodeId, dst: NodeId, msg: M) {
        self.trace.push(TraceEntry {
            kind: msg.kind(),
            src,
            dst,
            payload: msg.payload(),
        });
        self.queue.push_back((src, dst, msg));
    }

    fn next(&mut self) -> Option<(NodeId, NodeId, M)> {
        self.queue.pop_front()
    }
}

/// Next unvisited child of `n` in ascending order, marking it visited.
fn next_child(topology: &Topology, visited: &mut [usize], n: NodeId) -> Option<NodeId> {
    let child = topology.children(n).get(visited[n]).copied();
    if child.is_some() {
        visited[n] += 1;
    }
    child
}

/// Proper descendant counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DescendantInfo {
    /// `gamma[n]`: number of nodes strictly below `n`.
    pub gamma: Vec<usize>,
    /// For every node, the proper descendant count of each of its children.
    pub child_gamma: Vec<BTreeMap<NodeId, usize>>,
    pub trace: Vec<TraceEntry>,
}

enum DescMsg {
    Forward,
    Backtrack(usize),
}

impl Payload for DescMsg {
    fn kind(&self) -> &'static str {
        match self {
            DescMsg::Forward => "Forward",
            DescMsg::Backtrack(_) => "Backtrack",
        }
    }

    fn payload(&self) -> String {
        match self {
            DescMsg::Forward => String::new(),
            DescMsg::Backtrack(j) => j.to_string(),
        }
    }
}

/// Depth-first Forward/Backtrack pass counting proper descendants.
pub fn proper_descendants(topology: &Topology) -> DescendantInfo {
    let n_nodes = topology.node_count();
    let mut gamma = vec![0; n_nodes];
    let mut child_gamma = vec![BTreeMap::new(); n_nodes];
    let mut visited = vec![0; n_nodes];
    let mut net = Transport::new(ROOT, DescMsg::Forward);

    while let Some((src, n, msg)) = net.next() {
        match msg {
            DescMsg::Forward => gamma[n] = 0,
            DescMsg::Backtrack(j) => {
                // The message carries the subtree size of the child.
                child_gamma[n].insert(src, j - 1);
                gamma[n] += j;
            }
        }
        if let Some(u) = next_child(topology, &mut visited, n) {
            net.send(n, u, DescMsg::Forward);
        } else if let Some(p) = topology.parent(n) {
            net.send(n, p, DescMsg::Backtrack(gamma[n] + 1));
        }
    }
    DescendantInfo {
        gamma,
        child_gamma,
        trace: net.trace,
    }
}

/// Output of a schedule generator.
#[derive(Debug, Clone)]
pub struct Generated {
    pub schedule: Schedule,
    /// Every message exchanged, in delivery order. Empty for centralised
    /// constructions.
    pub trace: Vec<TraceEntry>,
}

/// Sender-based dedicated slots: node `n` sends to its parent in slot `n`,
/// the slotframe has one slot per node and slot 0 stays free.
pub fn schedule_orchestra_sbd(topology: &Topology) -> Schedule {
    let n_nodes = topology.node_count();
    let mut b = ScheduleBuilder::new(n_nodes, n_nodes);
    for n in 1..n_nodes {
        let p = topology.parent(n).expect("non-root node has a parent");
        b.link(n, p, n, DEFAULT_CHANNEL);
    }
    b.build().expect("one slot per node is well formed")
}

/// Slotframe length of the single-channel traffic-aware schedule.
pub fn ta_single_length(descendants: &DescendantInfo) -> usize {
    1 + descendants.gamma.iter().skip(1).map(|g| g + 1).sum::<usize>()
}

/// Slotframe length of the multi-channel traffic-aware schedule.
pub fn ta_multi_length(descendants: &DescendantInfo) -> usize {
    let root = descendants.gamma[ROOT];
    let others = descendants.gamma.iter().skip(1).map(|g| 2 * g + 1).max().unwrap_or(0);
    1 + root.max(others)
}

enum ScMsg {
    Track(usize),
    AssignRx(usize),
}

impl Payload for ScMsg {
    fn kind(&self) -> &'static str {
        match self {
            ScMsg::Track(_) => "Track",
            ScMsg::AssignRx(_) => "AssignRX",
        }
    }

    fn payload(&self) -> String {
        match self {
            ScMsg::Track(z) | ScMsg::AssignRx(z) => z.to_string(),
        }
    }
}

/// Traffic-aware single-channel schedule: in depth-first order every node
/// takes `gamma + 1` consecutive slots towards its parent. Only one link is
/// active per slot.
pub fn schedule_ta_single(topology: &Topology, descendants: &DescendantInfo) -> Generated {
    let n_nodes = topology.node_count();
    let mut b = ScheduleBuilder::new(n_nodes, ta_single_length(descendants));
    let mut visited = vec![0; n_nodes];
    let mut net = Transport::new(ROOT, ScMsg::Track(1));

    while let Some((src, n, msg)) = net.next() {
        match msg {
            ScMsg::Track(z) => {
                if let Some(u) = next_child(topology, &mut visited, n) {
                    net.send(n, u, ScMsg::Track(z));
                } else if let Some(p) = topology.parent(n) {
                    let g = descendants.gamma[n];
                    for i in z..=z + g {
                        b.tx_only(n, p, i, DEFAULT_CHANNEL);
                        net.send(n, p, ScMsg::AssignRx(i));
                    }
                    net.send(n, p, ScMsg::Track(z + g + 1));
                }
            }
            ScMsg::AssignRx(i) => b.rx_only(n, src, i, DEFAULT_CHANNEL),
        }
    }
    Generated {
        schedule: b.build().expect("depth-first slot assignment is well formed"),
        trace: net.trace,
    }
}

/// Channels blocked at every node, per slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockTable {
    blocked: Vec<Vec<BTreeSet<Channel>>>,
}

impl BlockTable {
    fn new(nodes: usize, slots: usize) -> Self {
        Self {
            blocked: vec![vec![BTreeSet::new(); slots]; nodes],
        }
    }

    pub fn blocked(&self, node: NodeId, slot: usize) -> &BTreeSet<Channel> {
        &self.blocked[node][slot]
    }
}

enum McMsg {
    Track,
    AssignTx { slot: usize, channel: Channel },
    Block { slot: usize, channel: Channel, forward: bool },
}

impl Payload for McMsg {
    fn kind(&self) -> &'static str {
        match self {
            McMsg::Track => "Track",
            McMsg::AssignTx { .. } => "AssignTX",
            McMsg::Block { .. } => "Block",
        }
    }

    fn payload(&self) -> String {
        match *self {
            McMsg::Track => String::new(),
            McMsg::AssignTx { slot, channel } => format!("{slot} {channel}"),
            McMsg::Block {
                slot,
                channel,
                forward,
            } => format!("{slot} {channel} {forward}"),
        }
    }
}

/// Multi-channel traffic-aware schedule, as generated, with the final block
/// table of every node.
#[derive(Debug, Clone)]
pub struct MultiChannel {
    pub generated: Generated,
    pub blocks: BlockTable,
}

/// Traffic-aware multi-channel schedule. Parents reserve idle slots for each
/// child and pick a channel not blocked at the parent; every assignment is
/// announced to the neighbours of both endpoints and to the parents of those
/// neighbours.
pub fn schedule_ta_multi(
    topology: &Topology,
    descendants: &DescendantInfo,
    channels: &[Channel],
) -> Result<MultiChannel, SchedulerError> {
    if channels.is_empty() {
        return Err(SchedulerError::NoChannels);
    }
    let mut channels = channels.to_vec();
    channels.sort_unstable();
    channels.dedup();

    let n_nodes = topology.node_count();
    let s = ta_multi_length(descendants);
    let mut b = ScheduleBuilder::new(n_nodes, s);
    let mut busy = vec![vec![false; s]; n_nodes];
    let mut blocks = BlockTable::new(n_nodes, s);
    let mut visited = vec![0; n_nodes];
    let mut net = Transport::new(ROOT, McMsg::Track);

    let block_neighbors = |net: &mut Transport<McMsg>, n: NodeId, except: NodeId, slot, channel| {
        for v in topology.neighbors(n).filter(|&v| v != except) {
            net.send(n, v, McMsg::Block { slot, channel, forward: true });
        }
    };

    while let Some((src, n, msg)) = net.next() {
        match msg {
            McMsg::Track => {
                if let Some(u) = next_child(topology, &mut visited, n) {
                    let sigma = descendants.child_gamma[n][&u] + 1;
                    let free: Vec<usize> = (1..s).filter(|&i| !busy[n][i]).take(sigma).collect();
                    if free.len() < sigma {
                        return Err(SchedulerError::SlotsExhausted { node: n, child: u });
                    }
                    for i in free {
                        busy[n][i] = true;
                        let c = *channels
                            .iter()
                            .find(|c| !blocks.blocked[n][i].contains(c))
                            .ok_or(SchedulerError::ChannelsExhausted { node: n, slot: i })?;
                        b.rx_only(n, u, i, c);
                        net.send(n, u, McMsg::AssignTx { slot: i, channel: c });
                        block_neighbors(&mut net, n, u, i, c);
                    }
                    net.send(n, u, McMsg::Track);
                } else if let Some(p) = topology.parent(n) {
                    net.send(n, p, McMsg::Track);
                }
            }
            McMsg::AssignTx { slot, channel } => {
                busy[n][slot] = true;
                b.tx_only(n, src, slot, channel);
                block_neighbors(&mut net, n, src, slot, channel);
            }
            McMsg::Block {
                slot,
                channel,
                forward,
            } => {
                blocks.blocked[n][slot].insert(channel);
                if forward {
                    if let Some(p) = topology.parent(n) {
                        net.send(
                            n,
                            p,
                            McMsg::Block {
                                slot,
                                channel,
                                forward: false,
                            },
                        );
                    }
                }
            }
        }
    }
    Ok(MultiChannel {
        generated: Generated {
            schedule: b.build().expect("parent-driven assignment is well formed"),
            trace: net.trace,
        },
        blocks,
    })
}

/// The three bundled generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
pub enum Algorithm {
    #[serde(rename = "sbd")]
    Sbd,
    #[serde(rename = "ta-sc")]
    TaSingle,
    #[serde(rename = "ta-mc")]
    TaMulti,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Sbd, Algorithm::TaSingle, Algorithm::TaMulti];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Sbd => "sbd",
            Algorithm::TaSingle => "ta-sc",
            Algorithm::TaMulti => "ta-mc",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sbd" | "orchestra" => Ok(Algorithm::Sbd),
            "ta-sc" => Ok(Algorithm::TaSingle),
            "ta-mc" => Ok(Algorithm::TaMulti),
            other => Err(format!("unknown algorithm '{other}' (sbd, ta-sc, ta-mc)")),
        }
    }
}

/// Runs `algorithm` on `topology` with the full 2.4 GHz channel set.
pub fn generate(algorithm: Algorithm, topology: &Topology) -> Result<Generated, SchedulerError> {
    match algorithm {
        Algorithm::Sbd => Ok(Generated {
            schedule: schedule_orchestra_sbd(topology),
            trace: Vec::new(),
        }),
        Algorithm::TaSingle => Ok(schedule_ta_single(topology, &proper_descendants(topology))),
        Algorithm::TaMulti => {
            let channels: Vec<Channel> = CHANNELS_2_4_GHZ.collect();
            schedule_ta_multi(topology, &proper_descendants(topology), &channels)
                .map(|m| m.generated)
        }
    }
}
