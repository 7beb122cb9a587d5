use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use priv_ebc::protocol::{run_two_process, PartyRole, TwoProcessOutcome};
use priv_ebc::{ClampMode, MechMask, PrecisionContext, ProtocolConfig, SessionRng};
use priv_ebc_experiment::{
    run, write_csv, write_metadata, Dataset, EgoSelection, ExperimentConfig, ExperimentError,
    GraphSource, Mode, Parallelism, SyntheticSpec,
};
use rand::SeedableRng;

#[derive(Parser)]
#[command(
    name = "priv-ebc",
    version,
    about = "Two-party private egocentric betweenness experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Relative error against ε.
    Sweep(RunArgs),
    /// Relative error with only some mechanisms private.
    Isolate(RunArgs),
    /// Single-threaded runtime against ε.
    Timing(RunArgs),
    /// Relative error against ego degree.
    Degree(RunArgs),
    /// One side of a two-process session over TCP.
    Party(PartyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Edgelist,
}

#[derive(Args)]
struct GraphArgs {
    /// Whitespace-separated edge list (SNAP or KONECT layout).
    #[arg(
        long,
        conflicts_with = "synthetic",
        required_unless_present = "synthetic"
    )]
    graph: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "edgelist")]
    format: Format,
    /// Preferential-attachment graph, e.g. `n=2000,m=3,seed=1`.
    #[arg(long)]
    synthetic: Option<SyntheticSpec>,
    #[arg(long, default_value_t = 1)]
    partition_seed: u64,
    /// Probability that a node belongs to X.
    #[arg(long, default_value_t = 0.5)]
    x_frac: f64,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Number of egos (random, or degree-stratified for `degree`).
    #[arg(long, conflicts_with = "ego_ids")]
    egos: Option<usize>,
    /// Explicit ego labels.
    #[arg(long, value_delimiter = ',')]
    ego_ids: Option<Vec<String>>,
    #[arg(long, default_value_t = 0)]
    ego_seed: u64,
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// `nonneg` clamps received counts at zero; `raw` skips non-positive denominators.
    #[arg(long, default_value = "nonneg")]
    clamp: ClampMode,
    /// Masks such as `all`, `mech1`, `mech2+mech3`, `none`.
    #[arg(long, value_delimiter = ',')]
    mech_masks: Option<Vec<MechMask>>,
    #[arg(long, default_value_t = PrecisionContext::DEFAULT_BITS)]
    precision_bits: u32,
    /// `off` or a worker count.
    #[arg(long, default_value = "off")]
    parallel: Parallelism,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV destination, stdout when absent. Metadata goes to `<out>.meta.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Role {
    X,
    Y,
}

#[derive(Args)]
struct PartyArgs {
    #[arg(value_enum)]
    role: Role,
    #[command(flatten)]
    graph: GraphArgs,
    /// Y listens here; X connects here.
    #[arg(long)]
    addr: String,
    /// Ego label, agreed by both sides beforehand.
    #[arg(long)]
    ego: String,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value = "nonneg")]
    clamp: ClampMode,
    #[arg(long, default_value_t = PrecisionContext::DEFAULT_BITS)]
    precision_bits: u32,
    /// Must match on both sides.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn source(g: &GraphArgs) -> GraphSource {
    match (&g.graph, g.synthetic) {
        (Some(path), _) => GraphSource::EdgeList(path.clone()),
        (None, Some(spec)) => GraphSource::Synthetic(spec),
        (None, None) => unreachable!("clap requires one of --graph and --synthetic"),
    }
}

fn experiment_config(mode: Mode, a: RunArgs) -> (ExperimentConfig, Option<PathBuf>) {
    let (default_eps, default_egos): (&[f64], usize) = match mode {
        Mode::Sweep => (&[0.1, 0.5, 1.0, 1.5, 3.0, 7.0], 60),
        Mode::Isolation => (&[1.0], 60),
        Mode::Timing => (&[0.1, 0.5, 1.0, 1.5, 3.0, 7.0], 20),
        Mode::Degree => (&[1.0], 100),
    };
    let count = a.egos.unwrap_or(default_egos);
    let egos = match (a.ego_ids, mode) {
        (Some(ids), _) => EgoSelection::Explicit(ids),
        (None, Mode::Degree) => EgoSelection::DegreeStratified { count },
        (None, _) => EgoSelection::Random {
            count,
            seed: a.ego_seed,
        },
    };
    let mech_masks = a.mech_masks.unwrap_or_else(|| match mode {
        Mode::Isolation => ["mech1", "mech2", "mech3", "all"]
            .iter()
            .map(|m| m.parse().expect("valid mask"))
            .collect(),
        _ => vec![MechMask::ALL],
    });
    let config = ExperimentConfig {
        source: source(&a.graph),
        partition_seed: a.graph.partition_seed,
        x_fraction: a.graph.x_frac,
        egos,
        epsilons: a.eps.unwrap_or_else(|| default_eps.to_vec()),
        trials: a.trials,
        clamp: a.clamp,
        mech_masks,
        precision_bits: a.precision_bits,
        parallelism: a.parallel,
        master_seed: a.seed,
    };
    (config, a.out)
}

fn run_experiment(mode: Mode, args: RunArgs) -> Result<(), ExperimentError> {
    let (config, out) = experiment_config(mode, args);
    config.validate()?;
    let ds = Dataset::load(&config)?;
    let output = run(mode, &config, &ds)?;
    for w in &output.meta.warnings {
        eprintln!("warning: {w}");
    }
    for s in &output.meta.skipped_egos {
        eprintln!("warning: skipped ego {s}");
    }
    match out {
        Some(path) => {
            write_csv(BufWriter::new(File::create(&path)?), &output.rows)?;
            let mut meta_path = path.into_os_string();
            meta_path.push(".meta.json");
            let mut f = BufWriter::new(File::create(meta_path)?);
            write_metadata(&mut f, &output.meta)?;
            f.flush()?;
        }
        None => write_csv(io::stdout().lock(), &output.rows)?,
    }
    Ok(())
}

/// Each process loads the whole file and keeps only its own view.
fn run_party(a: PartyArgs) -> Result<(), ExperimentError> {
    let mut config = ExperimentConfig::synthetic(
        SyntheticSpec {
            nodes: 2,
            edges_per_node: 1,
            seed: 0,
        },
        vec![a.eps],
    );
    config.source = source(&a.graph);
    config.partition_seed = a.graph.partition_seed;
    config.x_fraction = a.graph.x_frac;
    config.precision_bits = a.precision_bits;
    config.validate()?;
    let ds = Dataset::load(&config)?;
    let ego = ds
        .graph
        .node(&a.ego)
        .map_err(|e| ExperimentError::Config(e.to_string()))?;
    let precision = PrecisionContext::new(a.precision_bits)
        .map_err(|e| ExperimentError::Config(e.to_string()))?;
    let pc = ProtocolConfig::new(a.eps)
        .map_err(|e| ExperimentError::Config(e.to_string()))?
        .with_clamp(a.clamp)
        .with_precision(precision);
    let mut rng = SessionRng::seed_from_u64(a.seed);
    let outcome = match a.role {
        Role::X => {
            let view = ds.graph.x_view();
            drop(ds);
            run_two_process(PartyRole::X(&view), &a.addr, ego, pc, &mut rng)?
        }
        Role::Y => {
            let view = ds.graph.y_view();
            drop(ds);
            run_two_process(PartyRole::Y(&view), &a.addr, ego, pc, &mut rng)?
        }
    };
    match outcome {
        TwoProcessOutcome::X(est) => println!("{}", est.value),
        TwoProcessOutcome::Y(ledger) => {
            eprintln!("replied; spent ε = {}", ledger.spent(priv_ebc::Party::Y))
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sweep(a) => run_experiment(Mode::Sweep, a),
        Command::Isolate(a) => run_experiment(Mode::Isolation, a),
        Command::Timing(a) => run_experiment(Mode::Timing, a),
        Command::Degree(a) => run_experiment(Mode::Degree, a),
        Command::Party(a) => run_party(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
