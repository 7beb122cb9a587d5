//! Synthetic graphs so experiments run without external datasets.

use std::fmt;
use std::str::FromStr;

use priv_ebc::{Graph, SessionRng};
use rand::{Rng, SeedableRng};

/// Preferential-attachment parameters, written `n=2000,m=3[,seed=7]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub nodes: usize,
    pub edges_per_node: usize,
    pub seed: u64,
}

impl FromStr for SyntheticSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (mut n, mut m, mut seed) = (None, None, 0u64);
        for part in s.split(',') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, got {part:?}"))?;
            let bad = |e: std::num::ParseIntError| format!("{k}: {e}");
            match k.trim() {
                "n" => n = Some(v.trim().parse().map_err(bad)?),
                "m" => m = Some(v.trim().parse().map_err(bad)?),
                "seed" => seed = v.trim().parse().map_err(bad)?,
                other => return Err(format!("unknown key {other:?}")),
            }
        }
        let (Some(nodes), Some(edges_per_node)) = (n, m) else {
            return Err("both n and m are required".into());
        };
        if edges_per_node == 0 || nodes <= edges_per_node {
            return Err(format!(
                "need 1 <= m < n, got n={nodes}, m={edges_per_node}"
            ));
        }
        Ok(Self {
            nodes,
            edges_per_node,
            seed,
        })
    }
}

impl fmt::Display for SyntheticSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={},m={},seed={}",
            self.nodes, self.edges_per_node, self.seed
        )
    }
}

/// Starts from a clique on `m + 1` nodes; every later node attaches to `m` distinct
/// earlier nodes picked with probability proportional to their current degree.
pub fn preferential_attachment(spec: &SyntheticSpec) -> Graph {
    let (n, m) = (spec.nodes, spec.edges_per_node);
    let mut rng = SessionRng::seed_from_u64(spec.seed);
    let mut edges = Vec::with_capacity(n * m);
    // Each edge contributes both endpoints, so a uniform pick is degree-weighted.
    let mut ends: Vec<usize> = Vec::with_capacity(2 * n * m);
    for u in 0..=m {
        for v in u + 1..=m {
            edges.push((u, v));
            ends.extend([u, v]);
        }
    }
    let mut targets = Vec::with_capacity(m);
    for v in m + 1..n {
        targets.clear();
        while targets.len() < m {
            let t = ends[rng.gen_range(0..ends.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            edges.push((t, v));
            ends.extend([t, v]);
        }
    }
    Graph::from_edges(n, edges)
}
