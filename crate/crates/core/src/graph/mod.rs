//! Simple undirected graphs, party partitions, and ego networks.

mod load;
mod partition;

use std::collections::HashMap;
use std::fmt;

use crate::bits::BitRows;

pub use load::{load_edge_list, EdgeListFormat, LoadReport};
pub use partition::{
    ego_context, partition_nodes, y_ego_neighbours, Adjacency, EdgeClass, EgoContext,
    PartitionedGraph, Party, XSide, XView, YSide, YView,
};

/// Errors raised while loading graphs or resolving nodes.
#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("line {line}: expected two node tokens, found {found}")]
    Parse { line: usize, found: usize },

    #[error("line {line}: node token {token:?} is not an integer id")]
    NonIntegerId { line: usize, token: String },

    #[error("unknown node {0}")]
    UnknownNode(String),

    #[error("node {node} belongs to party {actual}, expected {expected}")]
    WrongParty {
        node: String,
        expected: Party,
        actual: Party,
    },

    #[error("edge list read failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Dense node index. Indices follow the sorted order of node labels, so two parties
/// holding the same label list derive the same ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for NodeId {
    fn from(v: usize) -> Self {
        NodeId(u32::try_from(v).expect("node index exceeds u32"))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Sorted, duplicate-free set of nodes.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct NodeSet(Vec<NodeId>);

impl NodeSet {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    /// Wraps a vector already sorted and deduplicated.
    pub(crate) fn from_sorted(nodes: Vec<NodeId>) -> Self {
        debug_assert!(nodes.windows(2).all(|w| w[0] < w[1]));
        Self(nodes)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = NodeId> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[NodeId] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<NodeId> {
        self.0
    }

    pub fn intersection_len(&self, other: &NodeSet) -> usize {
        sorted_intersection_count(&self.0, &other.0)
    }

    pub fn is_subset(&self, other: &NodeSet) -> bool {
        self.intersection_len(other) == self.len()
    }

    pub fn position(&self, v: NodeId) -> Option<usize> {
        self.0.binary_search(&v).ok()
    }
}

impl FromIterator<NodeId> for NodeSet {
    fn from_iter<T: IntoIterator<Item = NodeId>>(iter: T) -> Self {
        let mut v: Vec<NodeId> = iter.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }
}

impl<'a> IntoIterator for &'a NodeSet {
    type Item = NodeId;
    type IntoIter = std::iter::Copied<std::slice::Iter<'a, NodeId>>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter().copied()
    }
}

pub(crate) fn sorted_intersection_count(a: &[NodeId], b: &[NodeId]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Immutable simple undirected graph with sorted neighbour lists.
#[derive(Clone, Debug)]
pub struct Graph {
    labels: Vec<String>,
    index: HashMap<String, NodeId>,
    adj: Vec<Vec<NodeId>>,
    edge_count: usize,
}

impl Graph {
    /// Builds a graph on nodes labelled `"0".."node_count-1"`, so that label `k` has
    /// index `k`. Self-loops and duplicate edges are dropped.
    pub fn from_edges<I>(node_count: usize, edges: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let labels = (0..node_count).map(|v| v.to_string()).collect();
        let edges = edges
            .into_iter()
            .filter(|&(u, v)| u != v)
            .map(|(u, v)| {
                assert!(
                    u < node_count && v < node_count,
                    "edge endpoint out of range"
                );
                (u.min(v), u.max(v))
            })
            .collect();
        Self::assemble(labels, edges)
    }

    /// `labels` must be in canonical order; `edges` hold normalized `(lo, hi)` pairs.
    fn assemble(labels: Vec<String>, mut edges: Vec<(usize, usize)>) -> Self {
        edges.sort_unstable();
        edges.dedup();
        let mut adj = vec![Vec::new(); labels.len()];
        for &(u, v) in &edges {
            adj[u].push(NodeId::from(v));
            adj[v].push(NodeId::from(u));
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        let index = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), NodeId::from(i)))
            .collect();
        Self {
            labels,
            index,
            adj,
            edge_count: edges.len(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = NodeId> {
        (0..self.adj.len()).map(NodeId::from)
    }

    /// Each undirected edge once, as `(lo, hi)`.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes().flat_map(move |u| {
            self.adj[u.index()]
                .iter()
                .copied()
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }

    pub fn label(&self, v: NodeId) -> &str {
        &self.labels[v.index()]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn node(&self, label: &str) -> Option<NodeId> {
        self.index.get(label).copied()
    }

    pub fn neighbours(&self, v: NodeId) -> &[NodeId] {
        &self.adj[v.index()]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adj[v.index()].len()
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        let (a, b) = if self.degree(u) <= self.degree(v) {
            (u, v)
        } else {
            (v, u)
        };
        self.adj[a.index()].binary_search(&b).is_ok()
    }
}

/// Number of 2-paths `i - k - j` whose middle node `k` lies in `mids`.
pub fn two_path_count(g: &Graph, mids: &NodeSet, i: NodeId, j: NodeId) -> usize {
    debug_assert_ne!(i, j);
    common_neighbours_where(g.neighbours(i), g.neighbours(j), |k| mids.contains(k))
}

pub(crate) fn common_neighbours_where(
    a: &[NodeId],
    b: &[NodeId],
    mut keep: impl FnMut(NodeId) -> bool,
) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                if keep(a[i]) {
                    n += 1;
                }
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Exact egocentric betweenness of `a`: the sum, over non-adjacent pairs of
/// neighbours of `a`, of one over the number of 2-paths joining them inside the
/// ego network (which always includes the path through `a`).
///
/// Panics if `a` is not a node of `g`.
pub fn exact_ebc(g: &Graph, a: NodeId) -> f64 {
    let ego = g.neighbours(a);
    let d = ego.len();
    let mut rows = BitRows::new(d, d);
    for (p, &u) in ego.iter().enumerate() {
        for w in g.neighbours(u) {
            if let Ok(q) = ego.binary_search(w) {
                rows.set(p, q);
            }
        }
    }
    let mut total = 0.0;
    for p in 0..d {
        for q in p + 1..d {
            if !rows.get(p, q) {
                total += 1.0 / (1 + rows.and_count(p, &rows, q)) as f64;
            }
        }
    }
    total
}
