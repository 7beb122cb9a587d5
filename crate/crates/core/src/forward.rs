//! Party X's release: the exponential mechanism over subsets of `X⁻`, sampled in two
//! stages (a stratum index, then a uniform member of that stratum).

use rand::Rng;

use crate::graph::{ego_context, EgoContext, GraphError, NodeId, NodeSet, XSide};
use crate::numeric::{sample_neg_exp1, LogScalar, PrecisionContext, PrivacyParams};

#[derive(Debug, thiserror::Error)]
pub enum ForwardError {
    #[error(transparent)]
    Graph(#[from] GraphError),

    #[error("stratum index {index} outside 0..={n}")]
    StratumOutOfRange { index: usize, n: usize },

    #[error("R* is not a subset of X⁻")]
    NotSubset,

    #[error("the stratified sampler requires quality sensitivity 1, got {0}")]
    Sensitivity(f64),
}

/// `|R ∩ R*| + |X⁻ ∖ (R ∪ R*)|`, which equals `|X⁻| - |R Δ R*|`.
///
/// `r` and `r_star` must be subsets of `x_minus`.
pub fn quality(r: &NodeSet, r_star: &NodeSet, x_minus: &NodeSet) -> usize {
    debug_assert!(r.is_subset(x_minus) && r_star.is_subset(x_minus));
    let common = r.intersection_len(r_star);
    x_minus.len() - (r.len() + r_star.len() - 2 * common)
}

/// Law of the stratum index `I`: `ln P(I = i) = ln C(n, i) + i·t - n·ln(1 + e^t)`.
#[derive(Clone, Debug)]
pub struct StratumDistribution<S> {
    n: usize,
    t: Option<f64>,
    log_pmf: Vec<S>,
    ctx: PrecisionContext,
}

impl<S: LogScalar> StratumDistribution<S> {
    /// Builds `p_0..p_n` by the recurrence `p_0 = -n·ln(1 + e^t)`,
    /// `p_i = p_{i-1} + ln((n - i + 1) / i) + t`, with `t = ε / (2Δ)`.
    pub fn new(n: usize, params: &PrivacyParams, ctx: PrecisionContext) -> Self {
        let t_f64 = params.exponent_scale();
        let t = S::from_f64(t_f64, &ctx);
        let mut log_pmf = Vec::with_capacity(n + 1);
        let mut p = S::from_f64(0.0, &ctx).sub(&S::from_usize(n, &ctx).mul(&t.softplus()));
        log_pmf.push(p.clone());
        for i in 1..=n {
            let ratio = S::from_usize(n - i + 1, &ctx).div(&S::from_usize(i, &ctx));
            p = p.add(&ratio.ln()).add(&t);
            log_pmf.push(p.clone());
        }
        Self {
            n,
            t: Some(t_f64),
            log_pmf,
            ctx,
        }
    }

    /// Wraps an arbitrary log-pmf over `0..=n`. Mass need not follow the binomial
    /// shape; used to inject degenerate laws.
    pub fn from_log_pmf(log_pmf: Vec<S>, ctx: PrecisionContext) -> Self {
        assert!(!log_pmf.is_empty(), "a stratum law needs at least index 0");
        Self {
            n: log_pmf.len() - 1,
            t: None,
            log_pmf,
            ctx,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Exponent scale `t`, absent for injected laws.
    pub fn t(&self) -> Option<f64> {
        self.t
    }

    pub fn log_pmf(&self) -> &[S] {
        &self.log_pmf
    }

    pub fn precision(&self) -> PrecisionContext {
        self.ctx
    }

    pub fn pmf_f64(&self) -> Vec<f64> {
        self.log_pmf.iter().map(|p| p.exp().to_f64()).collect()
    }
}

pub fn stratum_distribution<S: LogScalar>(
    n: usize,
    params: &PrivacyParams,
    ctx: PrecisionContext,
) -> StratumDistribution<S> {
    StratumDistribution::new(n, params, ctx)
}

/// Inverse-transform search for `I`, accumulating the log-CDF while scanning:
///
/// ```text
/// ψ ← ln U;  c ← p_0
/// for I in 1..=n: if c ≥ ψ return I - 1; c ← log_add(c, p_I)
/// return n
/// ```
pub fn inverse_transform_sample<S: LogScalar, R: Rng + ?Sized>(
    dist: &StratumDistribution<S>,
    rng: &mut R,
) -> usize {
    let psi: S = sample_neg_exp1(rng, &dist.ctx);
    let mut c = dist.log_pmf[0].clone();
    for i in 1..=dist.n {
        if c >= psi {
            return i - 1;
        }
        c = c.log_add(&dist.log_pmf[i]);
    }
    dist.n
}

/// Inverse-transform sampler with the log-CDF materialised once.
///
/// The table holds exactly the accumulator values the streaming search would
/// produce, so for the same draw of `ψ` both return the same index. The law depends
/// only on `(n, ε, Δ)`, none of it private, so one table serves any number of
/// releases.
#[derive(Clone, Debug)]
pub struct StratumSampler<S> {
    log_cdf: Vec<S>,
    ctx: PrecisionContext,
}

impl<S: LogScalar> StratumSampler<S> {
    pub fn new(dist: &StratumDistribution<S>) -> Self {
        let mut log_cdf = Vec::with_capacity(dist.n + 1);
        let mut c = dist.log_pmf[0].clone();
        log_cdf.push(c.clone());
        for p in &dist.log_pmf[1..] {
            c = c.log_add(p);
            log_cdf.push(c.clone());
        }
        Self {
            log_cdf,
            ctx: dist.ctx,
        }
    }

    pub fn n(&self) -> usize {
        self.log_cdf.len() - 1
    }

    pub fn log_cdf(&self) -> &[S] {
        &self.log_cdf
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let psi: S = sample_neg_exp1(rng, &self.ctx);
        self.index_for(&psi)
    }

    /// First index whose log-CDF reaches `psi`, or `n` if none does. The table is
    /// non-decreasing, so a binary search finds the same index as a linear scan.
    pub fn index_for(&self, psi: &S) -> usize {
        let n = self.n();
        self.log_cdf[..n].partition_point(|c| c < psi)
    }
}

/// Starts from `R*` and toggles the membership of `|X⁻| - index` distinct nodes of
/// `X⁻`, chosen uniformly without replacement by a partial Fisher–Yates shuffle. The
/// result has quality exactly `index` and is uniform over that stratum.
pub fn pick_and_flip<R: Rng + ?Sized>(
    x_minus: &NodeSet,
    r_star: &NodeSet,
    index: usize,
    rng: &mut R,
) -> Result<NodeSet, ForwardError> {
    let n = x_minus.len();
    if index > n {
        return Err(ForwardError::StratumOutOfRange { index, n });
    }
    let mut member = vec![false; n];
    let mut hits = 0;
    for v in r_star {
        match x_minus.position(v) {
            Some(p) => {
                member[p] = true;
                hits += 1;
            }
            None => break,
        }
    }
    if hits != r_star.len() {
        return Err(ForwardError::NotSubset);
    }

    let flips = n - index;
    let mut scratch: Vec<u32> = (0..n as u32).collect();
    for k in 0..flips {
        let j = rng.gen_range(k..n);
        scratch.swap(k, j);
        let p = scratch[k] as usize;
        member[p] = !member[p];
    }
    let nodes: Vec<NodeId> = x_minus
        .iter()
        .zip(&member)
        .filter_map(|(v, &m)| m.then_some(v))
        .collect();
    Ok(NodeSet::from_sorted(nodes))
}

/// X's forward message: the privately released approximation `R` of `R*`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ForwardMsg {
    pub nodes: NodeSet,
}

/// Samples `R` for ego `a` under `params`, streaming the stratum search.
pub fn forward_message<G, S, R>(
    g: &G,
    a: NodeId,
    params: &PrivacyParams,
    ctx: PrecisionContext,
    rng: &mut R,
) -> Result<ForwardMsg, ForwardError>
where
    G: XSide + ?Sized,
    S: LogScalar,
    R: Rng + ?Sized,
{
    if params.delta0 != 1.0 {
        return Err(ForwardError::Sensitivity(params.delta0));
    }
    let ego = ego_context(g, a)?;
    let dist = StratumDistribution::<S>::new(ego.x_minus.len(), params, ctx);
    let index = inverse_transform_sample(&dist, rng);
    release_at(&ego, index, rng)
}

/// Same law as [`forward_message`], drawing `I` from a prepared sampler for
/// `n = |X⁻|`.
pub fn forward_with_sampler<S, R>(
    ego: &EgoContext,
    sampler: &StratumSampler<S>,
    rng: &mut R,
) -> Result<ForwardMsg, ForwardError>
where
    S: LogScalar,
    R: Rng + ?Sized,
{
    assert_eq!(
        sampler.n(),
        ego.x_minus.len(),
        "sampler built for another |X⁻|"
    );
    let index = sampler.sample(rng);
    release_at(ego, index, rng)
}

fn release_at<R: Rng + ?Sized>(
    ego: &EgoContext,
    index: usize,
    rng: &mut R,
) -> Result<ForwardMsg, ForwardError> {
    let nodes = pick_and_flip(&ego.x_minus, &ego.x_neighbours, index, rng)?;
    Ok(ForwardMsg { nodes })
}
