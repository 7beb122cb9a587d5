#![allow(dead_code)]

use std::sync::Arc;

use priv_ebc::{Adjacency, Graph, NodeId, NodeSet, PartitionedGraph, Party, SessionRng, YSide};
use rand::{Rng, SeedableRng};

pub fn ids(v: &[u32]) -> NodeSet {
    v.iter().map(|&i| NodeId(i)).collect()
}

/// Erdős–Rényi graph G(n, p).
pub fn gnp(n: usize, p: f64, seed: u64) -> Graph {
    let mut rng = SessionRng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, edges)
}

/// Random partition that always puts `ego` in X.
pub fn random_partition(g: Graph, ego: usize, seed: u64) -> PartitionedGraph {
    let mut rng = SessionRng::seed_from_u64(seed ^ 0x5eed);
    let parties = (0..g.node_count())
        .map(|v| {
            if v == ego || rng.gen_bool(0.5) {
                Party::X
            } else {
                Party::Y
            }
        })
        .collect();
    PartitionedGraph::new(Arc::new(g), parties)
}

/// Mutable adjacency for exhaustive sweeps; rebuilt from edge lists without touching
/// labels.
#[derive(Clone, Debug)]
pub struct SmallGraph {
    pub party: Vec<Party>,
    pub adj: Vec<Vec<NodeId>>,
}

impl SmallGraph {
    pub fn new(party: Vec<Party>) -> Self {
        let n = party.len();
        Self {
            party,
            adj: vec![Vec::new(); n],
        }
    }

    pub fn clear(&mut self) {
        self.adj.iter_mut().for_each(Vec::clear);
    }

    pub fn add(&mut self, u: usize, v: usize) {
        self.adj[u].push(NodeId(v as u32));
        self.adj[v].push(NodeId(u as u32));
    }

    pub fn finish(&mut self) {
        self.adj.iter_mut().for_each(|l| l.sort_unstable());
    }
}

impl Adjacency for SmallGraph {
    fn node_count(&self) -> usize {
        self.adj.len()
    }

    fn party(&self, v: NodeId) -> Party {
        self.party[v.index()]
    }

    fn neighbours(&self, v: NodeId) -> &[NodeId] {
        &self.adj[v.index()]
    }
}

impl YSide for SmallGraph {}
impl priv_ebc::XSide for SmallGraph {}

/// Binomial coefficient as f64 by exact integer product.
pub fn choose(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c as f64
}

/// Chi-square statistic and degrees of freedom, pooling cells with expected count
/// below 5 into one.
pub fn chi_square(observed: &[u64], expected_prob: &[f64]) -> (f64, usize) {
    let total: u64 = observed.iter().sum();
    let n = total as f64;
    let (mut stat, mut cells) = (0.0, 0usize);
    let (mut pool_o, mut pool_e) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(expected_prob) {
        let e = p * n;
        if e < 5.0 {
            pool_o += o as f64;
            pool_e += e;
        } else {
            stat += (o as f64 - e).powi(2) / e;
            cells += 1;
        }
    }
    if pool_e > 0.0 {
        stat += (pool_o - pool_e).powi(2) / pool_e;
        cells += 1;
    }
    (stat, cells.saturating_sub(1))
}

pub fn chi_square_critical(df: usize, alpha: f64) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    ChiSquared::new(df as f64).unwrap().inverse_cdf(1.0 - alpha)
}
