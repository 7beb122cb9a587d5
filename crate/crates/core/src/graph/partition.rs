//! Party partitions, per-party views, and ego contexts.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};

use super::{Graph, GraphError, NodeId, NodeSet};
use crate::SessionRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Party {
    X,
    Y,
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Party::X => "X",
            Party::Y => "Y",
        })
    }
}

/// Which parties can see an edge: internal to X, internal to Y, or spanning both.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeClass {
    X,
    Y,
    XY,
}

/// Read access to (some part of) a partitioned graph.
///
/// `neighbours` lists the neighbours the holder knows about, sorted. An omniscient
/// holder sees every edge; a party view only sees edges with at least one endpoint
/// in its own party.
pub trait Adjacency {
    fn node_count(&self) -> usize;
    fn party(&self, v: NodeId) -> Party;
    fn neighbours(&self, v: NodeId) -> &[NodeId];

    fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        let (a, b) = if self.neighbours(u).len() <= self.neighbours(v).len() {
            (u, v)
        } else {
            (v, u)
        };
        self.neighbours(a).binary_search(&b).is_ok()
    }
}

/// Holders that know `E_X ∪ E_XY`, i.e. can run party X's steps.
pub trait XSide: Adjacency {}

/// Holders that know `E_Y ∪ E_XY`, i.e. can run party Y's steps.
pub trait YSide: Adjacency {}

/// A graph together with the party each node belongs to.
#[derive(Clone, Debug)]
pub struct PartitionedGraph {
    graph: Arc<Graph>,
    party: Arc<[Party]>,
}

impl PartitionedGraph {
    /// Accepts an owned or shared graph; sharing lets many partitions of one graph
    /// coexist without copies.
    pub fn new(graph: impl Into<Arc<Graph>>, party: Vec<Party>) -> Self {
        let graph = graph.into();
        assert_eq!(graph.node_count(), party.len(), "one party per node");
        Self {
            graph,
            party: party.into(),
        }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn parties(&self) -> &[Party] {
        &self.party
    }

    pub fn party_of(&self, v: NodeId) -> Party {
        self.party[v.index()]
    }

    pub fn nodes_of(&self, p: Party) -> impl Iterator<Item = NodeId> + '_ {
        self.graph.nodes().filter(move |&v| self.party_of(v) == p)
    }

    pub fn edge_class(&self, u: NodeId, v: NodeId) -> EdgeClass {
        match (self.party_of(u), self.party_of(v)) {
            (Party::X, Party::X) => EdgeClass::X,
            (Party::Y, Party::Y) => EdgeClass::Y,
            _ => EdgeClass::XY,
        }
    }

    pub fn edges_of(&self, class: EdgeClass) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.graph
            .edges()
            .filter(move |&(u, v)| self.edge_class(u, v) == class)
    }

    /// Looks up a node by label.
    pub fn node(&self, label: &str) -> Result<NodeId, GraphError> {
        self.graph
            .node(label)
            .ok_or_else(|| GraphError::UnknownNode(label.to_owned()))
    }

    /// Party X's knowledge: every node, `E_X` and `E_XY`.
    pub fn x_view(&self) -> XView {
        XView(PartyView::of(self, Party::X))
    }

    /// Party Y's knowledge: every node, `E_Y` and `E_XY`.
    pub fn y_view(&self) -> YView {
        YView(PartyView::of(self, Party::Y))
    }
}

impl Adjacency for PartitionedGraph {
    fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    fn party(&self, v: NodeId) -> Party {
        self.party_of(v)
    }

    fn neighbours(&self, v: NodeId) -> &[NodeId] {
        self.graph.neighbours(v)
    }
}

impl XSide for PartitionedGraph {}
impl YSide for PartitionedGraph {}

/// Assigns each node to X independently with probability `x_fraction`. The graph is
/// left untouched. Deterministic in `(seed, x_fraction)`.
///
/// Panics unless `0 <= x_fraction <= 1`.
pub fn partition_nodes(g: Graph, seed: u64, x_fraction: f64) -> PartitionedGraph {
    assert!(
        (0.0..=1.0).contains(&x_fraction),
        "x_fraction must lie in [0, 1]"
    );
    let mut rng = SessionRng::seed_from_u64(seed);
    let party = (0..g.node_count())
        .map(|_| {
            if rng.gen_bool(x_fraction) {
                Party::X
            } else {
                Party::Y
            }
        })
        .collect();
    PartitionedGraph::new(g, party)
}

/// Adjacency restricted to the edges one party knows. Edges internal to the other
/// party are not stored at all.
#[derive(Clone, Debug)]
struct PartyView {
    holder: Party,
    party: Arc<[Party]>,
    adj: Vec<Vec<NodeId>>,
}

impl PartyView {
    fn of(pg: &PartitionedGraph, holder: Party) -> Self {
        let adj = pg
            .graph
            .nodes()
            .map(|v| {
                let own = pg.party_of(v) == holder;
                pg.graph
                    .neighbours(v)
                    .iter()
                    .copied()
                    .filter(|&w| own || pg.party_of(w) == holder)
                    .collect()
            })
            .collect();
        Self {
            holder,
            party: pg.party.clone(),
            adj,
        }
    }

    fn knows_edge(&self, u: NodeId, v: NodeId) -> Option<bool> {
        if self.party[u.index()] != self.holder && self.party[v.index()] != self.holder {
            return None;
        }
        Some(self.adj[u.index()].binary_search(&v).is_ok())
    }
}

macro_rules! party_view {
    ($name:ident, $side:ident, $doc:literal) => {
        #[doc = $doc]
        #[derive(Clone, Debug)]
        pub struct $name(PartyView);

        impl $name {
            /// `None` when both endpoints belong to the other party: that edge's
            /// membership is not part of this view.
            pub fn knows_edge(&self, u: NodeId, v: NodeId) -> Option<bool> {
                self.0.knows_edge(u, v)
            }

            pub fn holder(&self) -> Party {
                self.0.holder
            }

            /// Number of undirected edges present in this view.
            pub fn edge_count(&self) -> usize {
                self.0.adj.iter().map(Vec::len).sum::<usize>() / 2
            }
        }

        impl Adjacency for $name {
            fn node_count(&self) -> usize {
                self.0.adj.len()
            }

            fn party(&self, v: NodeId) -> Party {
                self.0.party[v.index()]
            }

            fn neighbours(&self, v: NodeId) -> &[NodeId] {
                &self.0.adj[v.index()]
            }
        }

        impl $side for $name {}
    };
}

party_view!(XView, XSide, "Party X's view of the graph.");
party_view!(YView, YSide, "Party Y's view of the graph.");

/// Ego node `a` with its neighbourhood split by party.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EgoContext {
    pub ego: NodeId,
    /// `N_a`, every neighbour of `a`.
    pub neighbourhood: NodeSet,
    /// `R*`, the neighbours of `a` inside X.
    pub x_neighbours: NodeSet,
    /// `X⁻`, the nodes of X other than `a`.
    pub x_minus: NodeSet,
    /// `N_a ∩ V_Y`.
    pub y_neighbours: NodeSet,
}

fn check_x_ego<G: Adjacency + ?Sized>(g: &G, a: NodeId) -> Result<(), GraphError> {
    if a.index() >= g.node_count() {
        return Err(GraphError::UnknownNode(a.to_string()));
    }
    match g.party(a) {
        Party::X => Ok(()),
        actual => Err(GraphError::WrongParty {
            node: a.to_string(),
            expected: Party::X,
            actual,
        }),
    }
}

/// Builds the ego context of an X node from X's knowledge.
pub fn ego_context<G: XSide + ?Sized>(g: &G, a: NodeId) -> Result<EgoContext, GraphError> {
    check_x_ego(g, a)?;
    let neighbourhood = NodeSet::from_sorted(g.neighbours(a).to_vec());
    let (x, y): (Vec<NodeId>, Vec<NodeId>) =
        neighbourhood.iter().partition(|&v| g.party(v) == Party::X);
    let x_minus = (0..g.node_count())
        .map(NodeId::from)
        .filter(|&v| v != a && g.party(v) == Party::X)
        .collect();
    Ok(EgoContext {
        ego: a,
        neighbourhood,
        x_neighbours: NodeSet::from_sorted(x),
        x_minus: NodeSet::from_sorted(x_minus),
        y_neighbours: NodeSet::from_sorted(y),
    })
}

/// `N_a ∩ V_Y` as party Y derives it from the spanning edges of `a`.
pub fn y_ego_neighbours<G: YSide + ?Sized>(g: &G, a: NodeId) -> Result<NodeSet, GraphError> {
    check_x_ego(g, a)?;
    Ok(NodeSet::from_sorted(
        g.neighbours(a)
            .iter()
            .copied()
            .filter(|&v| g.party(v) == Party::Y)
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pg(n: usize, edges: &[(usize, usize)], ys: &[usize]) -> PartitionedGraph {
        let g = Graph::from_edges(n, edges.iter().copied());
        let party = (0..n)
            .map(|v| if ys.contains(&v) { Party::Y } else { Party::X })
            .collect();
        PartitionedGraph::new(g, party)
    }

    #[test]
    fn star_all_in_x() {
        let p = pg(4, &[(0, 1), (0, 2), (0, 3)], &[]);
        let ctx = ego_context(&p, NodeId(0)).unwrap();
        assert_eq!(ctx.neighbourhood.len(), 3);
        assert_eq!(ctx.x_neighbours, ctx.neighbourhood);
        assert!(ctx.y_neighbours.is_empty());
        assert!(ctx.x_neighbours.is_subset(&ctx.x_minus));
    }

    #[test]
    fn mixed_neighbourhood() {
        let p = pg(3, &[(0, 1), (0, 2)], &[2]);
        let ctx = ego_context(&p, NodeId(0)).unwrap();
        assert_eq!(ctx.x_neighbours.as_slice(), &[NodeId(1)]);
        assert_eq!(ctx.neighbourhood.as_slice(), &[NodeId(1), NodeId(2)]);
        assert_eq!(ctx.x_minus.as_slice(), &[NodeId(1)]);
        assert_eq!(
            y_ego_neighbours(&p.y_view(), NodeId(0)).unwrap(),
            ctx.y_neighbours
        );
    }

    #[test]
    fn isolated_ego() {
        let p = pg(3, &[(1, 2)], &[]);
        let ctx = ego_context(&p, NodeId(0)).unwrap();
        assert!(ctx.neighbourhood.is_empty() && ctx.x_neighbours.is_empty());
    }

    #[test]
    fn ego_errors() {
        let p = pg(3, &[(0, 1)], &[1]);
        assert!(matches!(
            ego_context(&p, NodeId(1)),
            Err(GraphError::WrongParty { .. })
        ));
        assert!(matches!(
            ego_context(&p, NodeId(7)),
            Err(GraphError::UnknownNode(_))
        ));
    }

    #[test]
    fn degenerate_fractions() {
        let g = Graph::from_edges(20, (0..19).map(|v| (v, v + 1)));
        let all_x = partition_nodes(g.clone(), 3, 1.0);
        assert!(all_x.parties().iter().all(|&p| p == Party::X));
        assert_eq!(all_x.edges_of(EdgeClass::Y).count(), 0);
        assert_eq!(all_x.edges_of(EdgeClass::XY).count(), 0);
        let all_y = partition_nodes(g, 3, 0.0);
        assert!(all_y.parties().iter().all(|&p| p == Party::Y));
    }

    #[test]
    fn views_hide_the_other_side() {
        // 0,1 in X; 2,3 in Y.
        let p = pg(4, &[(0, 1), (2, 3), (1, 2)], &[2, 3]);
        let (x, y) = (p.x_view(), p.y_view());
        assert_eq!(x.knows_edge(NodeId(2), NodeId(3)), None);
        assert_eq!(y.knows_edge(NodeId(0), NodeId(1)), None);
        assert_eq!(x.knows_edge(NodeId(1), NodeId(2)), Some(true));
        assert_eq!(y.knows_edge(NodeId(0), NodeId(3)), Some(false));
        assert!(x.neighbours(NodeId(3)).is_empty());
        assert!(y.neighbours(NodeId(0)).is_empty());
        assert_eq!((x.edge_count(), y.edge_count()), (2, 2));
    }
}
