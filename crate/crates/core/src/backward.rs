//! Party Y's reply: Laplace-noised spanning 2-path counts and a Laplace-noised partial
//! EBC sum, each released with half of Y's budget.

use rand::Rng;

use crate::bits::BitRows;
use crate::graph::{y_ego_neighbours, GraphError, NodeId, NodeSet, Party, YSide};
use crate::numeric::{
    count_sensitivity, partial_sum_sensitivity, LaplaceMechanism, NumericError, PrivacyParams,
};

#[derive(Debug, thiserror::Error)]
pub enum BackwardError {
    #[error(transparent)]
    Graph(#[from] GraphError),

    #[error(transparent)]
    Numeric(#[from] NumericError),

    #[error("released node {0} is not an X node other than the ego")]
    BadRelease(NodeId),

    #[error("ego has {0} neighbours in Y; the backward message needs at least 2")]
    Degenerate(usize),
}

/// One entry `T_ij` of the count vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CountEntry {
    pub i: NodeId,
    pub j: NodeId,
    pub value: f64,
}

/// Y's backward message. `counts` is sorted by `(i, j)` and covers exactly
/// `R × (N_a ∩ V_Y)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BackwardMsg {
    pub counts: Vec<CountEntry>,
    pub partial_sum: f64,
}

impl BackwardMsg {
    pub fn get(&self, i: NodeId, j: NodeId) -> Option<f64> {
        self.counts
            .binary_search_by(|e| (e.i, e.j).cmp(&(i, j)))
            .ok()
            .map(|k| self.counts[k].value)
    }
}

fn check_release<G: YSide + ?Sized>(g: &G, a: NodeId, r: &NodeSet) -> Result<(), BackwardError> {
    for i in r {
        if i == a || i.index() >= g.node_count() || g.party(i) != Party::X {
            return Err(BackwardError::BadRelease(i));
        }
    }
    Ok(())
}

/// Noiseless `T_ij = |{k ∈ N_a ∩ V_Y : {i,k} ∈ E_XY, {k,j} ∈ E_Y}|` for every
/// `i ∈ R`, `j ∈ N_a ∩ V_Y`, in `(i, j)` order.
pub fn spanning_count_cores<G: YSide + ?Sized>(
    g: &G,
    a: NodeId,
    r: &NodeSet,
) -> Result<Vec<CountEntry>, BackwardError> {
    let ny = y_ego_neighbours(g, a)?;
    check_release(g, a, r)?;
    Ok(count_cores(g, &ny, r))
}

fn count_cores<G: YSide + ?Sized>(g: &G, ny: &NodeSet, r: &NodeSet) -> Vec<CountEntry> {
    let m = ny.len();
    // Positions in N_y of each N_y node's Y-side neighbours inside N_y.
    let inner: Vec<Vec<usize>> = ny
        .iter()
        .map(|k| {
            g.neighbours(k)
                .iter()
                .filter_map(|&w| ny.position(w))
                .collect()
        })
        .collect();
    let mut counts = Vec::with_capacity(r.len() * m);
    let mut row = vec![0u32; m];
    for i in r {
        row.fill(0);
        for &k in g.neighbours(i) {
            if let Some(pk) = ny.position(k) {
                for &pj in &inner[pk] {
                    row[pj] += 1;
                }
            }
        }
        counts.extend(ny.iter().zip(&row).map(|(j, &c)| CountEntry {
            i,
            j,
            value: c as f64,
        }));
    }
    counts
}

/// Noisy counts: each core plus independent `Lap(2Δ₁/ε)` with `Δ₁ = 2|R|`, drawn in
/// `(i, j)` order. An empty `R` yields no entries and draws nothing.
pub fn spanning_counts<G: YSide + ?Sized, R: Rng + ?Sized>(
    g: &G,
    a: NodeId,
    r: &NodeSet,
    params: &PrivacyParams,
    rng: &mut R,
) -> Result<Vec<CountEntry>, BackwardError> {
    let ny = gated_neighbours(g, a)?;
    check_release(g, a, r)?;
    let mut counts = count_cores(g, &ny, r);
    if counts.is_empty() {
        return Ok(counts);
    }
    let mech = LaplaceMechanism::new(count_sensitivity(r.len()), params.epsilon / 2.0)?;
    for e in &mut counts {
        e.value = mech.release(e.value, rng);
    }
    Ok(counts)
}

fn gated_neighbours<G: YSide + ?Sized>(g: &G, a: NodeId) -> Result<NodeSet, BackwardError> {
    let ny = y_ego_neighbours(g, a)?;
    if ny.len() < 2 {
        return Err(BackwardError::Degenerate(ny.len()));
    }
    Ok(ny)
}

/// Noiseless partial sum over non-adjacent pairs `i < j` of `N_a ∩ V_Y` of
/// `1 / |K|`, where `K` holds the common neighbours of `i` and `j` inside
/// `R ∪ {a} ∪ (N_a ∩ V_Y)`.
pub fn partial_ebc_y_core<G: YSide + ?Sized>(
    g: &G,
    a: NodeId,
    r: &NodeSet,
) -> Result<f64, BackwardError> {
    let ny = y_ego_neighbours(g, a)?;
    check_release(g, a, r)?;
    Ok(partial_core(g, a, &ny, r))
}

fn partial_core<G: YSide + ?Sized>(g: &G, a: NodeId, ny: &NodeSet, r: &NodeSet) -> f64 {
    let m = ny.len();
    if m < 2 {
        return 0.0;
    }
    // Intermediate universe: N_y in columns 0..m, then R, then a.
    let width = m + r.len() + 1;
    let mut rows = BitRows::new(m, width);
    for (p, y) in ny.iter().enumerate() {
        for &w in g.neighbours(y) {
            if let Some(q) = ny.position(w) {
                rows.set(p, q);
            } else if let Some(q) = r.position(w) {
                rows.set(p, m + q);
            } else if w == a {
                rows.set(p, width - 1);
            }
        }
    }
    let mut total = 0.0;
    for p in 0..m {
        for q in p + 1..m {
            if !rows.get(p, q) {
                total += 1.0 / rows.and_count(p, &rows, q) as f64;
            }
        }
    }
    total
}

/// Noisy partial sum: the core plus `Lap(2Δ₂/ε)` with `Δ₂ = |N_a ∩ V_Y| - 1`.
pub fn partial_ebc_y<G: YSide + ?Sized, R: Rng + ?Sized>(
    g: &G,
    a: NodeId,
    r: &NodeSet,
    params: &PrivacyParams,
    rng: &mut R,
) -> Result<f64, BackwardError> {
    let ny = gated_neighbours(g, a)?;
    check_release(g, a, r)?;
    let core = partial_core(g, a, &ny, r);
    let mech = LaplaceMechanism::new(partial_sum_sensitivity(ny.len()), params.epsilon / 2.0)?;
    Ok(mech.release(core, rng))
}

/// Which parts of the backward message carry noise. Masking a part substitutes its
/// exact value; only the experiment harness does that.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BackwardNoise {
    pub counts: bool,
    pub partial_sum: bool,
}

impl Default for BackwardNoise {
    fn default() -> Self {
        Self {
            counts: true,
            partial_sum: true,
        }
    }
}

/// Both halves of Y's reply: counts first, then the partial sum, each at `ε/2`.
pub fn backward_message<G: YSide + ?Sized, R: Rng + ?Sized>(
    g: &G,
    a: NodeId,
    r: &NodeSet,
    params: &PrivacyParams,
    rng: &mut R,
) -> Result<BackwardMsg, BackwardError> {
    backward_message_masked(g, a, r, params, BackwardNoise::default(), rng)
}

pub fn backward_message_masked<G: YSide + ?Sized, R: Rng + ?Sized>(
    g: &G,
    a: NodeId,
    r: &NodeSet,
    params: &PrivacyParams,
    noise: BackwardNoise,
    rng: &mut R,
) -> Result<BackwardMsg, BackwardError> {
    gated_neighbours(g, a)?;
    let counts = if noise.counts {
        spanning_counts(g, a, r, params, rng)?
    } else {
        spanning_count_cores(g, a, r)?
    };
    let partial_sum = if noise.partial_sum {
        partial_ebc_y(g, a, r, params, rng)?
    } else {
        partial_ebc_y_core(g, a, r)?
    };
    Ok(BackwardMsg {
        counts,
        partial_sum,
    })
}
