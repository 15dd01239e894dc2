//! Routing tree and radio neighbourhood of a data-collection network.
//!
//! Node 0 is always the sink. `in_range(v, w)` is a symmetric predicate: a
//! transmission of `v` may disturb a reception at `w`. It is also used as the
//! acknowledgement range.

use std::collections::{BTreeSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a node. The sink is always [`ROOT`].
pub type NodeId = usize;

/// The sink of the collection tree.
pub const ROOT: NodeId = 0;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("invalid topology JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("topology needs at least one node")]
    Empty,
    #[error("expected {expected} parent entries, found {found}")]
    ParentCount { expected: usize, found: usize },
    #[error("the root (node 0) must not have a parent")]
    RootHasParent,
    #[error("node {0} has no parent")]
    MissingParent(NodeId),
    #[error("node {node} references node {other}, but only {count} nodes exist")]
    OutOfRange {
        node: NodeId,
        other: NodeId,
        count: usize,
    },
    #[error("self loop at node {0}")]
    SelfLoop(NodeId),
    #[error("node {0} does not reach the root through its parents")]
    Cycle(NodeId),
    #[error("node {node} and its parent {parent} are not in range")]
    ParentNotInRange { node: NodeId, parent: NodeId },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyFile {
    nodes: usize,
    edges: Vec<[NodeId; 2]>,
    parents: Vec<Option<NodeId>>,
}

/// Symmetric neighbourhood plus a routing tree rooted at node 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    neighbors: Vec<BTreeSet<NodeId>>,
    parents: Vec<Option<NodeId>>,
    children: Vec<Vec<NodeId>>,
    depths: Vec<usize>,
}

impl Topology {
    /// Builds a topology from an undirected edge list and a parent vector.
    ///
    /// `parents[0]` must be `None`; every other node needs a parent that is in
    /// range and the parent pointers must lead to the root.
    pub fn new(
        node_count: usize,
        edges: &[(NodeId, NodeId)],
        parents: Vec<Option<NodeId>>,
    ) -> Result<Self, TopologyError> {
        if node_count == 0 {
            return Err(TopologyError::Empty);
        }
        if parents.len() != node_count {
            return Err(TopologyError::ParentCount {
                expected: node_count,
                found: parents.len(),
            });
        }
        let mut neighbors = vec![BTreeSet::new(); node_count];
        for &(v, w) in edges {
            if v.max(w) >= node_count {
                return Err(TopologyError::OutOfRange {
                    node: v.min(w),
                    other: v.max(w),
                    count: node_count,
                });
            }
            if v == w {
                return Err(TopologyError::SelfLoop(v));
            }
            neighbors[v].insert(w);
            neighbors[w].insert(v);
        }
        if parents[ROOT].is_some() {
            return Err(TopologyError::RootHasParent);
        }
        let mut children = vec![Vec::new(); node_count];
        for (n, p) in parents.iter().enumerate().skip(1) {
            let p = p.ok_or(TopologyError::MissingParent(n))?;
            if p >= node_count {
                return Err(TopologyError::OutOfRange {
                    node: n,
                    other: p,
                    count: node_count,
                });
            }
            if p == n {
                return Err(TopologyError::SelfLoop(n));
            }
            if !neighbors[n].contains(&p) {
                return Err(TopologyError::ParentNotInRange { node: n, parent: p });
            }
            children[p].push(n);
        }

        // Breadth-first from the root; anything not reached sits on a cycle.
        let mut depths = vec![usize::MAX; node_count];
        depths[ROOT] = 0;
        let mut queue = VecDeque::from([ROOT]);
        while let Some(n) = queue.pop_front() {
            for &c in &children[n] {
                depths[c] = depths[n] + 1;
                queue.push_back(c);
            }
        }
        if let Some(n) = depths.iter().position(|&d| d == usize::MAX) {
            return Err(TopologyError::Cycle(n));
        }

        Ok(Self {
            neighbors,
            parents,
            children,
            depths,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, TopologyError> {
        let file: TopologyFile = serde_json::from_str(text)?;
        let edges: Vec<_> = file.edges.iter().map(|e| (e[0], e[1])).collect();
        Self::new(file.nodes, &edges, file.parents)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TopologyError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TopologyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let file = TopologyFile {
            nodes: self.node_count(),
            edges: self.edges().into_iter().map(|(v, w)| [v, w]).collect(),
            parents: self.parents.clone(),
        };
        serde_json::to_string_pretty(&file).expect("topology serializes")
    }

    pub fn node_count(&self) -> usize {
        self.parents.len()
    }

    /// `true` if a transmission of `v` may disturb a reception at `w`.
    /// Every node is in range of itself.
    pub fn in_range(&self, v: NodeId, w: NodeId) -> bool {
        v == w || self.neighbors[v].contains(&w)
    }

    pub fn neighbors(&self, n: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.neighbors[n].iter().copied()
    }

    /// Undirected edges with `v < w`, sorted.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(v, ns)| ns.iter().filter(move |&&w| v < w).map(move |&w| (v, w)))
            .collect()
    }

    pub fn parent(&self, n: NodeId) -> Option<NodeId> {
        self.parents[n]
    }

    /// Children in ascending id order.
    pub fn children(&self, n: NodeId) -> &[NodeId] {
        &self.children[n]
    }

    /// Hop distance to the root.
    pub fn depth(&self, n: NodeId) -> usize {
        self.depths[n]
    }

    pub fn max_depth(&self) -> usize {
        self.depths.iter().copied().max().unwrap_or(0)
    }

    /// Nodes at maximal hop distance from the root (the outer ring of a
    /// concentric network).
    pub fn outermost(&self) -> Vec<NodeId> {
        let d = self.max_depth();
        (0..self.node_count())
            .filter(|&n| self.depths[n] == d && d > 0)
            .collect()
    }

    /// Nodes ordered so that every child appears before its parent. Within
    /// one depth, ids ascend.
    pub fn leaves_first(&self) -> Vec<NodeId> {
        let mut order: Vec<_> = (0..self.node_count()).collect();
        order.sort_by_key(|&n| (std::cmp::Reverse(self.depths[n]), n));
        order
    }

    /// Nodes grouped by depth, deepest level first.
    pub fn levels_leaves_first(&self) -> Vec<Vec<NodeId>> {
        let mut levels = vec![Vec::new(); self.max_depth() + 1];
        for n in 0..self.node_count() {
            levels[self.depths[n]].push(n);
        }
        levels.reverse();
        levels
    }

    /// Path from `n` to the root, starting with `n`.
    pub fn path_to_root(&self, mut n: NodeId) -> Vec<NodeId> {
        let mut path = vec![n];
        while let Some(p) = self.parents[n] {
            path.push(p);
            n = p;
        }
        path
    }

    /// Concentric network: one centre node plus `rings` rings, ring `k`
    /// holding `6k` equally spaced nodes (7, 19, 37, ... nodes in total).
    ///
    /// Ids are assigned centre first, then ring by ring counter-clockwise
    /// starting at angle zero. A ring-`k` node picks the angularly nearest
    /// ring-`(k-1)` node as parent; exact ties go to the node at the smaller
    /// angle. Radio links connect parent and child and angular neighbours on
    /// the same ring.
    pub fn concentric(rings: usize) -> Self {
        assert!(rings >= 1, "a concentric network needs at least one ring");
        let ring_start = |k: usize| if k == 0 { 0 } else { 1 + 3 * k * (k - 1) };
        let node_count = ring_start(rings + 1);
        let mut parents = vec![None; node_count];
        let mut edges = Vec::new();
        for k in 1..=rings {
            let size = 6 * k;
            let base = ring_start(k);
            for j in 0..size {
                let n = base + j;
                let parent = if k == 1 {
                    ROOT
                } else {
                    // Inner ring has 6(k-1) nodes. Position j maps to
                    // j(k-1)/k inner spacings; round half down.
                    let inner = 6 * (k - 1);
                    let num = 2 * (j * (k - 1)) as i64 - k as i64;
                    let den = 2 * k as i64;
                    let r = num.div_euclid(den) + i64::from(num.rem_euclid(den) != 0);
                    ring_start(k - 1) + (r as usize) % inner
                };
                parents[n] = Some(parent);
                edges.push((n, parent));
                edges.push((n, base + (j + 1) % size));
            }
        }
        Self::new(node_count, &edges, parents).expect("concentric construction is a valid tree")
    }

    /// A simple path 0 - 1 - ... - (n-1) rooted at node 0.
    pub fn line(node_count: usize) -> Self {
        let edges: Vec<_> = (1..node_count).map(|n| (n - 1, n)).collect();
        let parents = (0..node_count)
            .map(|n| n.checked_sub(1))
            .collect::<Vec<_>>();
        Self::new(node_count, &edges, parents).expect("line is a valid tree")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concentric_sizes() {
        assert_eq!(Topology::concentric(1).node_count(), 7);
        assert_eq!(Topology::concentric(2).node_count(), 19);
        assert_eq!(Topology::concentric(3).node_count(), 37);
    }

    #[test]
    fn single_ring_is_a_star() {
        let t = Topology::concentric(1);
        for n in 1..7 {
            assert_eq!(t.parent(n), Some(ROOT));
        }
        assert_eq!(t.children(ROOT), &[1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn two_rings_balance_children() {
        let t = Topology::concentric(2);
        for n in 1..=6 {
            assert_eq!(t.children(n).len(), 2, "node {n}");
        }
        assert_eq!(t.children(1), &[7, 8]);
        assert_eq!(t.outermost(), (7..19).collect::<Vec<_>>());
    }

    #[test]
    fn three_ring_parents_alternate() {
        let t = Topology::concentric(3);
        let counts: Vec<_> = (7..19).map(|n| t.children(n).len()).collect();
        assert_eq!(counts.iter().sum::<usize>(), 18);
        assert!(counts.iter().all(|&c| c == 1 || c == 2));
    }

    #[test]
    fn rejects_cycles_and_bad_parents() {
        let edges = [(0, 1), (1, 2)];
        let err = Topology::new(3, &edges, vec![None, Some(2), Some(1)]).unwrap_err();
        assert!(matches!(err, TopologyError::Cycle(_)));
        let err = Topology::new(3, &edges, vec![None, Some(0), Some(0)]).unwrap_err();
        assert!(matches!(
            err,
            TopologyError::ParentNotInRange { node: 2, parent: 0 }
        ));
        let err = Topology::new(2, &[(0, 1)], vec![Some(1), None]).unwrap_err();
        assert!(matches!(err, TopologyError::RootHasParent));
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let t = Topology::concentric(2);
        assert_eq!(Topology::from_json(&t.to_json()).unwrap(), t);
        let bad = r#"{"nodes": 1, "edges": [], "parents": [null], "extra": 1}"#;
        assert!(matches!(
            Topology::from_json(bad),
            Err(TopologyError::Json(_))
        ));
    }

    #[test]
    fn leaves_first_puts_children_before_parents() {
        let t = Topology::concentric(3);
        let order = t.leaves_first();
        let pos: Vec<_> = {
            let mut p = vec![0; order.len()];
            for (i, &n) in order.iter().enumerate() {
                p[n] = i;
            }
            p
        };
        for n in 1..t.node_count() {
            assert!(pos[n] < pos[t.parent(n).unwrap()]);
        }
    }
}
