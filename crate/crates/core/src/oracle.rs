//! Brute-force references for tests. Deliberately built from different primitives
//! than the production paths: explicit subset enumeration, direct-space MPFR weights,
//! dense adjacency matrices, and triple loops over the full graph.

use std::collections::BTreeMap;

use rug::ops::Pow;
use rug::{Float, Integer};

use crate::graph::{EdgeClass, Graph, NodeId, NodeSet, PartitionedGraph, Party};

/// Largest `|X⁻|` the enumerators accept.
pub const MAX_ENUMERATION: usize = 20;

const ORACLE_BITS: u32 = 300;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("refusing to enumerate 2^{0} subsets (limit 2^{MAX_ENUMERATION})")]
    TooLarge(usize),

    #[error("R* is not a subset of X⁻")]
    NotSubset,

    #[error("distributions have {0} and {1} outcomes")]
    SupportMismatch(usize, usize),

    #[error("normalisers disagree: direct {direct}, by strata {strata}, closed form {closed}")]
    Normaliser {
        direct: f64,
        strata: f64,
        closed: f64,
    },

    #[error("exponent scale must be positive and finite")]
    BadScale,
}

/// Exponential-mechanism law over every subset of `X⁻`. Subset `k` holds the nodes
/// at the set bit positions of `k`.
#[derive(Clone, Debug)]
pub struct ExhaustivePmf {
    x_minus: NodeSet,
    mass: Vec<f64>,
    /// `ln C` by summing all `2^n` weights.
    pub ln_norm_direct: f64,
    /// `ln C` by summing `C(n, i)·e^{i·t}` over strata `i = 0..=n`.
    pub ln_norm_strata: f64,
    /// `ln C = n·ln(1 + e^t)`.
    pub ln_norm_closed: f64,
}

impl ExhaustivePmf {
    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn subset(&self, k: usize) -> NodeSet {
        subset_of(&self.x_minus, k)
    }

    /// Index of `r` in the support; `None` unless `r ⊆ X⁻`.
    pub fn index_of(&self, r: &NodeSet) -> Option<usize> {
        r.iter()
            .try_fold(0usize, |k, v| self.x_minus.position(v).map(|p| k | 1 << p))
    }

    pub fn mass_of(&self, r: &NodeSet) -> Option<f64> {
        self.index_of(r).map(|k| self.mass[k])
    }
}

fn subset_of(x_minus: &NodeSet, k: usize) -> NodeSet {
    x_minus
        .iter()
        .enumerate()
        .filter(|(p, _)| k >> p & 1 == 1)
        .map(|(_, v)| v)
        .collect()
}

fn mask_of(x_minus: &NodeSet, r_star: &NodeSet) -> Result<usize, OracleError> {
    let mut m = 0usize;
    for v in r_star {
        let p = x_minus.position(v).ok_or(OracleError::NotSubset)?;
        m |= 1 << p;
    }
    Ok(m)
}

fn guard(n: usize) -> Result<(), OracleError> {
    if n > MAX_ENUMERATION {
        Err(OracleError::TooLarge(n))
    } else {
        Ok(())
    }
}

/// Quality of subset `k`: the number of positions on which `k` agrees with `star`.
fn subset_quality(n: usize, k: usize, star: usize) -> usize {
    n - (k ^ star).count_ones() as usize
}

/// Evaluates `e^{q(S)·ε/(2Δ)} / C` for every `S ⊆ X⁻`, with `C` cross-checked three
/// ways to `1e-9` relative.
pub fn enumerate_exp_pmf(
    x_minus: &NodeSet,
    r_star: &NodeSet,
    epsilon: f64,
    delta: f64,
) -> Result<ExhaustivePmf, OracleError> {
    let n = x_minus.len();
    guard(n)?;
    let star = mask_of(x_minus, r_star)?;
    let t = epsilon / (2.0 * delta);
    if !(t > 0.0 && t.is_finite()) {
        return Err(OracleError::BadScale);
    }
    let tf = Float::with_val(ORACLE_BITS, t);
    // e^{q·t} for each attainable quality.
    let weights: Vec<Float> = (0..=n)
        .map(|q| Float::with_val(ORACLE_BITS, &tf * q as u32).exp())
        .collect();

    let mut direct = Float::new(ORACLE_BITS);
    for k in 0..1usize << n {
        direct += &weights[subset_quality(n, k, star)];
    }
    let mut strata = Float::new(ORACLE_BITS);
    for (i, w) in weights.iter().enumerate() {
        let c = Integer::from(Integer::binomial_u(n as u32, i as u32));
        strata += Float::with_val(ORACLE_BITS, w * &c);
    }
    let closed = Float::with_val(ORACLE_BITS, tf.clone().exp() + 1u32).pow(n as u32);

    let rel = |x: &Float| {
        let diff = Float::with_val(ORACLE_BITS, x - &closed);
        Float::with_val(ORACLE_BITS, diff / &closed).abs() <= 1e-9
    };
    if !(rel(&direct) && rel(&strata)) {
        return Err(OracleError::Normaliser {
            direct: direct.to_f64(),
            strata: strata.to_f64(),
            closed: closed.to_f64(),
        });
    }
    let mass = (0..1usize << n)
        .map(|k| {
            Float::with_val(ORACLE_BITS, &weights[subset_quality(n, k, star)] / &direct).to_f64()
        })
        .collect();
    Ok(ExhaustivePmf {
        x_minus: x_minus.clone(),
        mass,
        ln_norm_direct: direct.ln().to_f64(),
        ln_norm_strata: strata.ln().to_f64(),
        ln_norm_closed: closed.ln().to_f64(),
    })
}

/// Every subset of `X⁻` with quality exactly `i`.
pub fn enumerate_stratum(
    x_minus: &NodeSet,
    r_star: &NodeSet,
    i: usize,
) -> Result<Vec<NodeSet>, OracleError> {
    let n = x_minus.len();
    guard(n)?;
    let star = mask_of(x_minus, r_star)?;
    Ok((0..1usize << n)
        .filter(|&k| subset_quality(n, k, star) == i)
        .map(|k| subset_of(x_minus, k))
        .collect())
}

/// Total variation distance `½ Σ |p - q|` between two laws on the same outcomes.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64, OracleError> {
    if p.len() != q.len() {
        return Err(OracleError::SupportMismatch(p.len(), q.len()));
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// EBC of `a` from the square of the dense adjacency matrix of `N_a ∪ {a}`.
pub fn dense_ebc(g: &Graph, a: NodeId) -> f64 {
    let mut nodes: Vec<NodeId> = g.neighbours(a).to_vec();
    nodes.push(a);
    let m = nodes.len();
    let mut adj = vec![vec![0u64; m]; m];
    for (p, &u) in nodes.iter().enumerate() {
        for (q, &v) in nodes.iter().enumerate() {
            if g.has_edge(u, v) {
                adj[p][q] = 1;
            }
        }
    }
    let mut total = 0.0;
    let d = m - 1;
    for p in 0..d {
        for q in p + 1..d {
            if adj[p][q] == 0 {
                let paths: u64 = (0..m).map(|k| adj[p][k] * adj[k][q]).sum();
                total += 1.0 / paths as f64;
            }
        }
    }
    total
}

/// Noiseless spanning counts by triple loop over the full graph.
pub fn brute_spanning_counts(
    pg: &PartitionedGraph,
    a: NodeId,
    r: &NodeSet,
) -> BTreeMap<(NodeId, NodeId), usize> {
    let g = pg.graph();
    let ny: Vec<NodeId> = g
        .nodes()
        .filter(|&v| g.has_edge(a, v) && pg.party_of(v) == Party::Y)
        .collect();
    let mut out = BTreeMap::new();
    for i in r {
        for &j in &ny {
            let c = ny
                .iter()
                .filter(|&&k| {
                    g.has_edge(i, k)
                        && pg.edge_class(i, k) == EdgeClass::XY
                        && g.has_edge(k, j)
                        && pg.edge_class(k, j) == EdgeClass::Y
                })
                .count();
            out.insert((i, j), c);
        }
    }
    out
}

/// Noiseless partial sum by enumerating intermediates explicitly.
pub fn brute_partial_ebc_y(pg: &PartitionedGraph, a: NodeId, r: &NodeSet) -> f64 {
    let g = pg.graph();
    let ny: Vec<NodeId> = g
        .nodes()
        .filter(|&v| g.has_edge(a, v) && pg.party_of(v) == Party::Y)
        .collect();
    let mut mids: Vec<NodeId> = ny.clone();
    mids.extend(r.iter());
    mids.push(a);
    let mut total = 0.0;
    for (s, &i) in ny.iter().enumerate() {
        for &j in &ny[s + 1..] {
            if g.has_edge(i, j) {
                continue;
            }
            let k = mids
                .iter()
                .filter(|&&k| g.has_edge(i, k) && g.has_edge(k, j))
                .count();
            total += 1.0 / k as f64;
        }
    }
    total
}

/// The exact `2^n` law of the exponential mechanism as a dense f64 vector, for
/// pmf-ratio checks on tiny instances. Production paths never call this.
pub fn exp_pmf_masses(
    x_minus: &NodeSet,
    r_star: &NodeSet,
    epsilon: f64,
) -> Result<Vec<f64>, OracleError> {
    enumerate_exp_pmf(x_minus, r_star, epsilon, 1.0).map(|p| p.mass)
}
