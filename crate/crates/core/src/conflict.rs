//! Conflict analysis of a schedule against a topology.
//!
//! Two links active in the same slot disturb each other when any endpoint of
//! one is in range of any endpoint of the other. Acknowledgements travel in
//! the reverse direction, so all four endpoint combinations matter. A
//! schedule is conflict-free when disturbing links never share a channel.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::schedule::{Channel, Schedule, ScheduleError};
use crate::topology::{NodeId, Topology};

/// A directed transmission `tx -> rx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Link {
    pub tx: NodeId,
    pub rx: NodeId,
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.tx, self.rx)
    }
}

/// Links active in `slot`, ordered by transmitter.
pub fn active_links(schedule: &Schedule, slot: usize) -> Vec<Link> {
    (0..schedule.node_count())
        .filter_map(|n| {
            schedule
                .tx_assignment(n, slot)
                .map(|a| Link { tx: n, rx: a.peer })
        })
        .collect()
}

fn disturbs(topology: &Topology, a: Link, b: Link) -> bool {
    a.tx != b.tx
        && (topology.in_range(a.tx, b.tx)
            || topology.in_range(a.rx, b.tx)
            || topology.in_range(a.tx, b.rx)
            || topology.in_range(a.rx, b.rx))
}

/// All other links active in `slot` that may disturb `link` (data or
/// acknowledgement), never including `link` itself.
pub fn disturbing_links(
    schedule: &Schedule,
    topology: &Topology,
    slot: usize,
    link: Link,
) -> Result<Vec<Link>, ScheduleError> {
    let active = active_links(schedule, slot);
    if !active.contains(&link) {
        return Err(ScheduleError::LinkNotActive {
            slot,
            tx: link.tx,
            rx: link.rx,
        });
    }
    Ok(active
        .into_iter()
        .filter(|&other| disturbs(topology, link, other))
        .collect())
}

/// Broken schedule invariant found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "invariant", rename_all = "kebab-case")]
pub enum Violation {
    /// A node both transmits and receives in one slot.
    TxRxExclusive { node: NodeId, slot: usize },
    /// The peer of a TX slot does not list the matching RX slot.
    LinkConsistency {
        node: NodeId,
        slot: usize,
        peer: NodeId,
    },
    /// An RX slot has no matching TX slot at the peer.
    DanglingReception {
        node: NodeId,
        slot: usize,
        peer: NodeId,
    },
    /// The two ends of a link use different channels.
    ChannelConsistency {
        node: NodeId,
        slot: usize,
        peer: NodeId,
    },
    /// Schedule and topology disagree on the number of nodes.
    NodeCount { schedule: usize, topology: usize },
}

impl Violation {
    pub fn name(&self) -> &'static str {
        match self {
            Violation::TxRxExclusive { .. } => "tx-rx-exclusive",
            Violation::LinkConsistency { .. } => "link-consistency",
            Violation::DanglingReception { .. } => "dangling-reception",
            Violation::ChannelConsistency { .. } => "channel-consistency",
            Violation::NodeCount { .. } => "node-count",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::TxRxExclusive { node, slot } => {
                write!(f, "{}: node {node} transmits and receives in slot {slot}", self.name())
            }
            Violation::LinkConsistency { node, slot, peer } => write!(
                f,
                "{}: node {node} sends to {peer} in slot {slot}, but {peer} does not receive from {node}",
                self.name()
            ),
            Violation::DanglingReception { node, slot, peer } => write!(
                f,
                "{}: node {node} expects {peer} in slot {slot}, but {peer} does not send to {node}",
                self.name()
            ),
            Violation::ChannelConsistency { node, slot, peer } => write!(
                f,
                "{}: nodes {node} and {peer} use different channels in slot {slot}",
                self.name()
            ),
            Violation::NodeCount { schedule, topology } => write!(
                f,
                "{}: schedule has {schedule} nodes, topology has {topology}",
                self.name()
            ),
        }
    }
}

/// Two mutually disturbing links that share a channel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChannelCollision {
    pub slot: usize,
    pub first: Link,
    pub second: Link,
    pub channel: Channel,
}

impl fmt::Display for ChannelCollision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "collision slot {} channel {}: {} and {}",
            self.slot, self.channel, self.first, self.second
        )
    }
}

/// Active and disturbing links of one slot.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SlotConflicts {
    pub slot: usize,
    pub active: Vec<Link>,
    /// Disturbing set per active link. Links without disturbers are omitted.
    pub disturbing: Vec<(Link, Vec<Link>)>,
    /// Union of all disturbing sets of the slot.
    pub union: BTreeSet<Link>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ConflictReport {
    pub slots: Vec<SlotConflicts>,
    pub collisions: Vec<ChannelCollision>,
    pub violations: Vec<Violation>,
}

impl ConflictReport {
    /// No channel collisions and no invariant violations.
    pub fn is_valid(&self) -> bool {
        self.collisions.is_empty() && self.violations.is_empty()
    }

    /// `true` if no slot has two disturbing links at all, regardless of
    /// channels.
    pub fn is_interference_free(&self) -> bool {
        self.slots.iter().all(|s| s.union.is_empty())
    }
}

impl fmt::Display for ConflictReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "violation {v}")?;
        }
        for c in &self.collisions {
            writeln!(f, "{c}")?;
        }
        let busy = self.slots.iter().filter(|s| !s.active.is_empty()).count();
        let shared = self.slots.iter().filter(|s| !s.union.is_empty()).count();
        writeln!(
            f,
            "{} slots, {busy} with active links, {shared} with concurrent disturbing links",
            self.slots.len()
        )?;
        write!(
            f,
            "{}",
            if self.is_valid() {
                "schedule is conflict-free and valid"
            } else {
                "schedule is INVALID"
            }
        )
    }
}

/// Checks the schedule invariants and the per-slot channel constraint.
/// Every problem goes into the report.
pub fn validate(schedule: &Schedule, topology: &Topology) -> ConflictReport {
    let mut report = ConflictReport::default();
    if schedule.node_count() != topology.node_count() {
        report.violations.push(Violation::NodeCount {
            schedule: schedule.node_count(),
            topology: topology.node_count(),
        });
        return report;
    }

    for n in 0..schedule.node_count() {
        let slots = schedule.node(n);
        for a in &slots.tx {
            if schedule.rx_assignment(n, a.slot).is_some() {
                report.violations.push(Violation::TxRxExclusive { node: n, slot: a.slot });
            }
            match schedule.rx_assignment(a.peer, a.slot) {
                Some(back) if back.peer == n => {
                    if back.channel != a.channel {
                        report.violations.push(Violation::ChannelConsistency {
                            node: n,
                            slot: a.slot,
                            peer: a.peer,
                        });
                    }
                }
                _ => report.violations.push(Violation::LinkConsistency {
                    node: n,
                    slot: a.slot,
                    peer: a.peer,
                }),
            }
        }
        for a in &slots.rx {
            let matched = schedule
                .tx_assignment(a.peer, a.slot)
                .is_some_and(|back| back.peer == n);
            if !matched {
                report.violations.push(Violation::DanglingReception {
                    node: n,
                    slot: a.slot,
                    peer: a.peer,
                });
            }
        }
    }

    for slot in 0..schedule.slotframe_length() {
        let active = active_links(schedule, slot);
        let mut entry = SlotConflicts {
            slot,
            active: active.clone(),
            ..Default::default()
        };
        for (i, &a) in active.iter().enumerate() {
            let others: Vec<Link> = active
                .iter()
                .copied()
                .filter(|&b| disturbs(topology, a, b))
                .collect();
            for &b in others.iter().filter(|b| active[i + 1..].contains(b)) {
                let shared = schedule
                    .channel(a.tx, slot)
                    .filter(|&c| Some(c) == schedule.channel(b.tx, slot));
                if let Some(channel) = shared {
                    report.collisions.push(ChannelCollision {
                        slot,
                        first: a,
                        second: b,
                        channel,
                    });
                }
            }
            if !others.is_empty() {
                entry.union.extend(others.iter().copied());
                entry.disturbing.push((a, others));
            }
        }
        report.slots.push(entry);
    }
    report
}

/// Distinct transmitter channels used in `slot`.
pub fn channels_in_slot(schedule: &Schedule, slot: usize) -> BTreeSet<Channel> {
    active_links(schedule, slot)
        .iter()
        .filter_map(|l| schedule.channel(l.tx, slot))
        .collect()
}

/// Conflict graph of one slot: vertices are the active links, edges join
/// mutually disturbing links. Returned as adjacency lists over the indices
/// of the returned link vector.
pub fn conflict_graph(
    schedule: &Schedule,
    topology: &Topology,
    slot: usize,
) -> (Vec<Link>, Vec<Vec<usize>>) {
    let links = active_links(schedule, slot);
    let adjacency = links
        .iter()
        .map(|&a| {
            links
                .iter()
                .enumerate()
                .filter(|&(_, &b)| disturbs(topology, a, b))
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    (links, adjacency)
}

/// Greedy colouring in vertex order; each vertex takes the smallest colour
/// not used by an already coloured neighbour.
pub fn greedy_coloring(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let mut colors: Vec<Option<usize>> = vec![None; adjacency.len()];
    for v in 0..adjacency.len() {
        let used: BTreeSet<usize> = adjacency[v].iter().filter_map(|&u| colors[u]).collect();
        colors[v] = Some((0..).find(|c| !used.contains(c)).unwrap());
    }
    colors.into_iter().map(Option::unwrap).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{three_node_example, ScheduleBuilder, DEFAULT_CHANNEL};

    fn link(tx: NodeId, rx: NodeId) -> Link {
        Link { tx, rx }
    }

    #[test]
    fn active_links_of_three_node_example() {
        let s = three_node_example();
        assert_eq!(active_links(&s, 0), vec![link(1, 0)]);
        assert_eq!(active_links(&s, 2), vec![link(2, 1)]);
    }

    #[test]
    fn empty_slot_has_no_links() {
        let mut b = ScheduleBuilder::new(2, 4);
        b.link(1, 0, 1, DEFAULT_CHANNEL);
        let s = b.build().unwrap();
        assert!(active_links(&s, 0).is_empty());
        assert!(active_links(&s, 3).is_empty());
    }

    /// Links 1->0 and 3->2 in slot 0. Node 3 is in range of receiver 0,
    /// transmitters 1 and 3 do not hear each other.
    fn hidden_pair(ch_a: Channel, ch_b: Channel) -> (Schedule, Topology) {
        let topo = Topology::new(
            4,
            &[(0, 1), (2, 3), (0, 3)],
            vec![None, Some(0), Some(3), Some(0)],
        )
        .unwrap();
        let mut b = ScheduleBuilder::new(4, 1);
        b.link(1, 0, 0, ch_a).link(3, 2, 0, ch_b);
        (b.build().unwrap(), topo)
    }

    #[test]
    fn hidden_node_pair_is_disturbing() {
        // 3 is in range of receiver 0, but transmitters 1 and 3 do not hear
        // each other.
        let (s, t) = hidden_pair(DEFAULT_CHANNEL, DEFAULT_CHANNEL);
        assert!(!t.in_range(1, 3));
        let d = disturbing_links(&s, &t, 0, link(1, 0)).unwrap();
        assert_eq!(d, vec![link(3, 2)]);
        let report = validate(&s, &t);
        assert_eq!(report.collisions.len(), 1);
        assert!(!report.is_valid());
    }

    #[test]
    fn disjoint_links_do_not_disturb() {
        let mut b = ScheduleBuilder::new(5, 1);
        b.link(1, 0, 0, DEFAULT_CHANNEL).link(4, 3, 0, DEFAULT_CHANNEL);
        let s = b.build().unwrap();
        let t = Topology::new(
            5,
            &[(0, 1), (0, 2), (2, 3), (3, 4)],
            vec![None, Some(0), Some(0), Some(2), Some(3)],
        )
        .unwrap();
        assert!(disturbing_links(&s, &t, 0, link(1, 0)).unwrap().is_empty());
        assert!(validate(&s, &t).is_valid());
    }

    #[test]
    fn different_channels_resolve_a_conflict() {
        let (s, t) = hidden_pair(11, 12);
        let r = validate(&s, &t);
        assert!(r.is_valid());
        assert!(!r.is_interference_free());
    }

    #[test]
    fn query_link_must_be_active() {
        let s = three_node_example();
        let t = Topology::line(3);
        assert!(matches!(
            disturbing_links(&s, &t, 0, link(2, 1)),
            Err(ScheduleError::LinkNotActive { .. })
        ));
    }

    #[test]
    fn single_link_schedules_always_validate() {
        let s = three_node_example();
        let t = Topology::line(3);
        let r = validate(&s, &t);
        assert!(r.is_valid(), "{r}");
        assert!(r.is_interference_free());
    }

    #[test]
    fn reports_tx_rx_overlap_and_inconsistency() {
        let mut b = ScheduleBuilder::new(3, 2);
        b.link(1, 0, 0, DEFAULT_CHANNEL).link(2, 1, 0, DEFAULT_CHANNEL);
        b.tx_only(2, 1, 1, DEFAULT_CHANNEL);
        let s = b.build().unwrap();
        let r = validate(&s, &Topology::line(3));
        let names: Vec<_> = r.violations.iter().map(Violation::name).collect();
        assert!(names.contains(&"tx-rx-exclusive"));
        assert!(names.contains(&"link-consistency"));
        assert!(!r.is_valid());
    }

    #[test]
    fn greedy_coloring_of_triangle() {
        let adj = vec![vec![1, 2], vec![0, 2], vec![0, 1]];
        assert_eq!(greedy_coloring(&adj), vec![0, 1, 2]);
    }
}
