//! The four experiment families. Each expands into `(mask, ε, ego, trial)` tasks with
//! their own generators, so results do not depend on scheduling.

use std::time::Instant;

use priv_ebc::{
    ego_context, exact_ebc, ClampMode, MechMask, NodeId, Party, PrecisionContext, Protocol,
    ProtocolConfig, SessionRng,
};
use rand::seq::index::sample;
use rand::SeedableRng;
use rayon::prelude::*;

use crate::config::{Dataset, EgoSelection, ExperimentConfig, ExperimentError, Parallelism};
use crate::results::{median, relative_error, ResultRow, RowKind, RunMetadata};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Sweep,
    Isolation,
    Timing,
    Degree,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Sweep => "sweep",
            Mode::Isolation => "isolate",
            Mode::Timing => "timing",
            Mode::Degree => "degree",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ego {
    pub label: String,
    pub id: NodeId,
    pub degree: usize,
    pub true_ebc: f64,
    /// At most one Y-side neighbour: answered without an exchange.
    pub degenerate: bool,
}

pub struct RunOutput {
    /// Skip rows, then detail rows in `(mask, ε, ego, trial)` order, then one summary
    /// row per `(mask, ε)`.
    pub rows: Vec<ResultRow>,
    pub meta: RunMetadata,
}

/// Generator for one task, keyed by every coordinate that identifies it.
pub fn task_rng(master: u64, ego: NodeId, eps_index: usize, trial: u32) -> SessionRng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&master.to_le_bytes());
    seed[8..16].copy_from_slice(&(ego.0 as u64).to_le_bytes());
    seed[16..24].copy_from_slice(&(eps_index as u64).to_le_bytes());
    seed[24..].copy_from_slice(&(trial as u64).to_le_bytes());
    SessionRng::from_seed(seed)
}

/// Resolves the ego selection to X nodes. Returns the egos and the labels that could
/// not be used, each with a reason.
pub fn select_egos(
    config: &ExperimentConfig,
    ds: &Dataset,
) -> (Vec<Ego>, Vec<(String, String)>, Vec<String>) {
    let pg = &ds.graph;
    let g = pg.graph();
    let x_nodes: Vec<NodeId> = pg.nodes_of(Party::X).collect();
    let mut skipped = Vec::new();
    let mut warnings = Vec::new();
    let ids: Vec<NodeId> = match &config.egos {
        EgoSelection::Explicit(labels) => labels
            .iter()
            .filter_map(|l| match pg.node(l) {
                Ok(v) if pg.party_of(v) == Party::X => Some(v),
                Ok(_) => {
                    skipped.push((l.clone(), "not in X".to_owned()));
                    None
                }
                Err(_) => {
                    skipped.push((l.clone(), "unknown node".to_owned()));
                    None
                }
            })
            .collect(),
        EgoSelection::Random { count, seed } => {
            if *count > x_nodes.len() {
                warnings.push(format!(
                    "asked for {count} egos but X has {} nodes; using all of them",
                    x_nodes.len()
                ));
            }
            let mut rng = SessionRng::seed_from_u64(*seed);
            let mut picked: Vec<NodeId> =
                sample(&mut rng, x_nodes.len(), (*count).min(x_nodes.len()))
                    .into_iter()
                    .map(|i| x_nodes[i])
                    .collect();
            picked.sort_unstable();
            picked
        }
        EgoSelection::DegreeStratified { count } => {
            let (picked, note) = degree_stratified(g, &x_nodes, *count);
            warnings.extend(note);
            picked
        }
    };
    let x_view = pg.x_view();
    let egos = ids
        .into_iter()
        .map(|a| Ego {
            label: g.label(a).to_owned(),
            id: a,
            degree: g.degree(a),
            true_ebc: exact_ebc(g, a),
            degenerate: ego_context(&x_view, a)
                .expect("ego is an X node")
                .y_neighbours
                .len()
                < 2,
        })
        .collect();
    (egos, skipped, warnings)
}

/// One node per degree value at evenly spaced positions along the distinct degrees,
/// ascending. When fewer distinct degrees exist than requested, positions are spread
/// over all X nodes sorted by degree instead.
fn degree_stratified(
    g: &priv_ebc::Graph,
    x_nodes: &[NodeId],
    count: usize,
) -> (Vec<NodeId>, Option<String>) {
    let mut by_degree: Vec<NodeId> = x_nodes.to_vec();
    by_degree.sort_by_key(|&v| (g.degree(v), v));
    let mut firsts: Vec<NodeId> = Vec::new();
    for &v in &by_degree {
        if firsts.last().is_none_or(|&u| g.degree(u) != g.degree(v)) {
            firsts.push(v);
        }
    }
    let (pool, note) = if count <= firsts.len() {
        (firsts, None)
    } else if count <= by_degree.len() {
        (by_degree, None)
    } else {
        let note = format!("asked for {count} egos but X has {} nodes", by_degree.len());
        (by_degree, Some(note))
    };
    let k = count.min(pool.len());
    let picked = (0..k)
        .map(|s| {
            let pos = if k == 1 {
                0
            } else {
                (s * (pool.len() - 1) + (k - 1) / 2) / (k - 1)
            };
            pool[pos]
        })
        .collect();
    (picked, note)
}

struct Task {
    group: usize,
    ego: usize,
    trial: u32,
}

pub fn run(
    mode: Mode,
    config: &ExperimentConfig,
    ds: &Dataset,
) -> Result<RunOutput, ExperimentError> {
    config.validate()?;
    let mut config = config.clone();
    let mut meta_warnings = Vec::new();
    if mode == Mode::Timing && config.parallelism != Parallelism::Off {
        meta_warnings.push("timing runs single-threaded; parallelism forced off".to_owned());
        config.parallelism = Parallelism::Off;
    }
    if mode == Mode::Degree && !matches!(config.egos, EgoSelection::DegreeStratified { .. }) {
        return Err(ExperimentError::Config(
            "the degree sweep needs degree-stratified ego selection".into(),
        ));
    }
    let (egos, skipped, warnings) = select_egos(&config, ds);
    meta_warnings.extend(warnings);

    let precision = PrecisionContext::new(config.precision_bits)
        .map_err(|e| ExperimentError::Config(e.to_string()))?;
    let groups: Vec<(MechMask, usize, f64)> = config
        .mech_masks
        .iter()
        .flat_map(|&m| {
            config
                .epsilons
                .iter()
                .enumerate()
                .map(move |(i, &e)| (m, i, e))
        })
        .collect();
    let protocols = groups
        .iter()
        .map(|&(mask, _, eps)| {
            let pc = ProtocolConfig::new(eps)
                .map_err(|e| ExperimentError::Config(e.to_string()))?
                .with_clamp(config.clamp)
                .with_mechanisms(mask)
                .with_precision(precision);
            Ok(Protocol::new(&ds.graph, pc))
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    // The stratum law depends only on |X⁻| and ε, so it is built once per group and
    // timed on its own; per-session times exclude it.
    let x_minus = ds.graph.nodes_of(Party::X).count().saturating_sub(1);
    let law_build_ms: Vec<f64> = protocols
        .iter()
        .map(|p| {
            let start = Instant::now();
            p.sampler(x_minus);
            start.elapsed().as_secs_f64() * 1e3
        })
        .collect();

    let tasks: Vec<Task> = (0..groups.len())
        .flat_map(|group| {
            (0..egos.len()).flat_map(move |ego| {
                (0..config.trials as u32).map(move |trial| Task { group, ego, trial })
            })
        })
        .collect();
    let run_task = |t: &Task| -> Result<ResultRow, ExperimentError> {
        let (mask, eps_index, eps) = groups[t.group];
        let ego = &egos[t.ego];
        let mut rng = task_rng(config.master_seed, ego.id, eps_index, t.trial);
        let start = Instant::now();
        let est = protocols[t.group].run(ego.id, &mut rng)?;
        let elapsed = start.elapsed().as_secs_f64() * 1e3;
        Ok(ResultRow {
            dataset: ds.name.clone(),
            ego: ego.label.clone(),
            ego_degree: Some(ego.degree),
            epsilon: eps,
            trial: RowKind::Trial(t.trial),
            mech_mask: mask,
            true_ebc: Some(ego.true_ebc),
            private_ebc: Some(est.value),
            relative_error: relative_error(ego.true_ebc, est.value),
            elapsed_ms: Some(elapsed),
            skipped_terms: Some(est.skipped_terms),
        })
    };
    let details: Vec<ResultRow> = match config.parallelism {
        Parallelism::Off => tasks.iter().map(run_task).collect::<Result<_, _>>()?,
        Parallelism::Workers(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| ExperimentError::Config(e.to_string()))?
            .install(|| tasks.par_iter().map(run_task).collect::<Result<_, _>>())?,
    };

    let mut rows = Vec::new();
    for &(mask, _, eps) in &groups {
        for (label, _) in &skipped {
            rows.push(skip_row(&ds.name, label, eps, mask));
        }
    }
    rows.extend(details.iter().cloned());
    rows.extend(summarise(&ds.name, &groups, &details));

    let g = ds.graph.graph();
    let meta = RunMetadata {
        mode: mode.name().to_owned(),
        dataset: ds.name.clone(),
        nodes: g.node_count(),
        edges: g.edge_count(),
        x_nodes: ds.graph.nodes_of(Party::X).count(),
        partition_seed: config.partition_seed,
        x_fraction: config.x_fraction,
        master_seed: config.master_seed,
        epsilons: config.epsilons.clone(),
        trials: config.trials,
        clamp: clamp_name(config.clamp),
        mech_masks: config.mech_masks.iter().map(ToString::to_string).collect(),
        precision_bits: config.precision_bits,
        parallelism: config.parallelism.to_string(),
        non_private: config.mech_masks.iter().any(|m| !m.is_all()),
        zero_ebc_egos: egos
            .iter()
            .filter(|e| e.true_ebc <= 0.0)
            .map(|e| e.label.clone())
            .collect(),
        degenerate_egos: egos
            .iter()
            .filter(|e| e.degenerate)
            .map(|e| e.label.clone())
            .collect(),
        skipped_egos: skipped
            .iter()
            .map(|(l, why)| format!("{l}: {why}"))
            .collect(),
        law_build_ms,
        degree_spread_pct: (mode == Mode::Degree)
            .then(|| degree_spread_pct(&details))
            .flatten(),
        warnings: meta_warnings,
    };
    Ok(RunOutput { rows, meta })
}

fn clamp_name(c: ClampMode) -> String {
    c.to_string()
}

fn skip_row(dataset: &str, label: &str, eps: f64, mask: MechMask) -> ResultRow {
    ResultRow {
        dataset: dataset.to_owned(),
        ego: label.to_owned(),
        ego_degree: None,
        epsilon: eps,
        trial: RowKind::Skip,
        mech_mask: mask,
        true_ebc: None,
        private_ebc: None,
        relative_error: None,
        elapsed_ms: None,
        skipped_terms: None,
    }
}

fn summarise(
    dataset: &str,
    groups: &[(MechMask, usize, f64)],
    details: &[ResultRow],
) -> Vec<ResultRow> {
    groups
        .iter()
        .map(|&(mask, _, eps)| {
            let group: Vec<&ResultRow> = details
                .iter()
                .filter(|r| r.mech_mask == mask && r.epsilon == eps)
                .collect();
            let errs: Vec<f64> = group.iter().filter_map(|r| r.relative_error).collect();
            let mut elapsed: Vec<f64> = group.iter().filter_map(|r| r.elapsed_ms).collect();
            ResultRow {
                dataset: dataset.to_owned(),
                ego: "*".to_owned(),
                ego_degree: None,
                epsilon: eps,
                trial: RowKind::Summary,
                mech_mask: mask,
                true_ebc: None,
                private_ebc: None,
                relative_error: (!errs.is_empty())
                    .then(|| errs.iter().sum::<f64>() / errs.len() as f64),
                elapsed_ms: median(&mut elapsed),
                skipped_terms: Some(group.iter().filter_map(|r| r.skipped_terms).sum()),
            }
        })
        .collect()
}

/// Buckets egos by `floor(log2 degree)` and compares bucket medians of the relative
/// error with the overall median.
pub fn degree_spread_pct(details: &[ResultRow]) -> Option<f64> {
    let mut buckets: std::collections::BTreeMap<u32, Vec<f64>> = Default::default();
    let mut all = Vec::new();
    for r in details {
        if let (Some(d), Some(e)) = (r.ego_degree, r.relative_error) {
            buckets
                .entry(usize::BITS - 1 - d.max(1).leading_zeros())
                .or_default()
                .push(e);
            all.push(e);
        }
    }
    let max = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let global = median(&mut all)?;
    if max <= 0.0 {
        return Some(0.0);
    }
    let gap = buckets
        .values_mut()
        .filter_map(|b| median(b))
        .map(|m| (m - global).abs())
        .fold(0.0, f64::max);
    Some(100.0 * gap / max)
}

pub fn run_error_sweep(
    config: &ExperimentConfig,
    ds: &Dataset,
) -> Result<RunOutput, ExperimentError> {
    run(Mode::Sweep, config, ds)
}

pub fn run_mechanism_isolation(
    config: &ExperimentConfig,
    ds: &Dataset,
) -> Result<RunOutput, ExperimentError> {
    run(Mode::Isolation, config, ds)
}

pub fn run_timing(config: &ExperimentConfig, ds: &Dataset) -> Result<RunOutput, ExperimentError> {
    run(Mode::Timing, config, ds)
}

pub fn run_degree_sweep(
    config: &ExperimentConfig,
    ds: &Dataset,
) -> Result<RunOutput, ExperimentError> {
    run(Mode::Degree, config, ds)
}
