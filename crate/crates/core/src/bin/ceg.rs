use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ceg::bench::{bench_report, BoundCheck, ReportedBnFigures};
use ceg::dot::export_dot;
use ceg::generate::{
    example1_ceg, example2_observation, model_selection_ceg, random_positive_observation, random_tree, RandomTreeParams,
};
use ceg::io::{Model, ModelFile, ObservationFile, ResultFile};
use ceg::positions::{build_transporter_ceg_with, minimize_ceg_with};
use ceg::propagation::{conditional_atom_probability, conditional_reach_probability, propagate, reduce};
use ceg::{CegError, CegPath, Compatibility, CompatibleObservation, PositionOptions, TransporterCeg};

#[derive(Parser)]
#[command(name = "ceg", version, about = "Exact inference on chain event graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a CEG from a tree model, or minimize a CEG model.
    Build(BuildArgs),
    /// Condition a model on an observation.
    Propagate(PropagateArgs),
    /// Evaluate a probability on a model.
    Query(QueryArgs),
    /// Storage and operation-count report for a model family.
    Bench(BenchArgs),
}

#[derive(Args)]
struct MergeArgs {
    /// Grid size for probability equality when merging (0 = exact).
    #[arg(long, default_value_t = 0.0)]
    tolerance: f64,
    /// Merge on probabilities alone, ignoring edge labels.
    #[arg(long)]
    ignore_labels: bool,
}

impl MergeArgs {
    fn options(&self) -> Result<PositionOptions, CliError> {
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return Err(CegError::InvalidParameter("--tolerance must be finite and non-negative".into()).into());
        }
        Ok(PositionOptions { prob_tolerance: self.tolerance, match_labels: !self.ignore_labels })
    }
}

#[derive(Args)]
struct BuildArgs {
    /// Model file with a `tree` or `ceg` section.
    model: PathBuf,
    /// Where to write the CEG model file.
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    merge: MergeArgs,
}

#[derive(Args)]
struct PropagateArgs {
    /// Model file; tree models are built into a CEG first.
    model: PathBuf,
    observation: PathBuf,
    /// Result file with τ, Φ and π̂.
    #[arg(short, long)]
    out: PathBuf,
    /// Write the reduced graph of the observation as a CEG model file.
    #[arg(long, value_name = "FILE")]
    reduce: Option<PathBuf>,
    /// Minimize the reduced graph before writing it.
    #[arg(long, requires = "reduce")]
    minimize: bool,
    /// Write the annotated graph in DOT format.
    #[arg(long, value_name = "FILE")]
    dot: Option<PathBuf>,
    /// Print the operation counters.
    #[arg(long)]
    counts: bool,
}

#[derive(Args)]
struct QueryArgs {
    model: PathBuf,
    /// Result file from `propagate`; needed for conditional queries.
    #[arg(short, long)]
    result: Option<PathBuf>,
    #[command(subcommand)]
    query: Query,
}

#[derive(Subcommand)]
enum Query {
    /// Prior probability of a root-to-sink path.
    Atom { edges: Vec<String> },
    /// Probability of passing through a position; conditional when a
    /// result is given.
    Reach { position: String },
    /// Conditional probability of a root-to-sink path.
    ConditionalAtom { edges: Vec<String> },
}

#[derive(Args)]
struct BenchArgs {
    #[command(subcommand)]
    family: Family,
    /// Also write the report as JSON.
    #[arg(long, value_name = "FILE", global = true)]
    json: Option<PathBuf>,
    /// Record propagation wall time (makes output non-reproducible).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Subcommand)]
enum Family {
    /// The running example with its observation.
    Example1,
    /// The model-selection family with the vacuous observation.
    ModelSelection { n: usize },
    /// A seeded random tree with a random positive observation.
    Random(RandomArgs),
}

#[derive(Args)]
struct RandomArgs {
    /// Seed; falls back to CEG_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = RandomTreeParams::default().max_depth)]
    max_depth: usize,
    #[arg(long, default_value_t = RandomTreeParams::default().max_branch)]
    max_branch: usize,
    #[arg(long, default_value_t = RandomTreeParams::default().merge_bias)]
    merge_bias: f64,
    #[arg(long, default_value_t = RandomTreeParams::default().max_vertices)]
    max_vertices: usize,
    #[arg(long, default_value_t = RandomTreeParams::default().leaf_prob)]
    leaf_prob: f64,
    /// Probability of keeping each edge in the observation.
    #[arg(long, default_value_t = 0.7)]
    keep: f64,
}

#[derive(Debug)]
struct CliError {
    code: u8,
    kind: &'static str,
    message: String,
}

impl CliError {
    fn new(code: u8, kind: &'static str, message: impl Into<String>) -> Self {
        CliError { code, kind, message: message.into() }
    }

    fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::new(5, "io", format!("{}: {err}", path.display()))
    }
}

impl From<CegError> for CliError {
    fn from(e: CegError) -> Self {
        let kind = match &e {
            CegError::InvalidTree(_) => "validation",
            CegError::MalformedGraph(_) => "graph",
            CegError::InvalidPath(_) => "path",
            CegError::EdgeNotAtPosition { .. } => "observation",
            CegError::ZeroProbabilityObservation => "zero-probability",
            CegError::InstanceTooLarge { .. } | CegError::InvalidParameter(_) => "parameter",
            CegError::UnknownId(_) => "unknown-id",
            CegError::Format(_) => "format",
        };
        let code = if matches!(e, CegError::ZeroProbabilityObservation) { 4 } else { 2 };
        CliError::new(code, kind, e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let one_line = self.message.replace('\n', "; ");
        write!(f, "error[{}]: {}", self.kind, one_line)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, text: &str) -> CliResult {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Loads a model file as a CEG, building it if the file holds a tree.
fn load_ceg(path: &Path, opts: &PositionOptions) -> CliResult<(TransporterCeg, ModelFile)> {
    let file = ModelFile::parse(&read(path)?)?;
    let ceg = match file.load()? {
        Model::Tree(tree) => {
            tree.ensure_valid()?;
            build_transporter_ceg_with(&tree, opts)?.0
        }
        Model::Ceg(ceg) => ceg,
    };
    Ok((ceg, file))
}

fn parse_path(ceg: &TransporterCeg, edges: &[String]) -> CliResult<CegPath> {
    let ids = edges
        .iter()
        .flat_map(|s| s.split(','))
        .filter(|s| !s.is_empty())
        .map(|name| ceg.edge_by_name(name).ok_or_else(|| CegError::UnknownId(format!("edge {name:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CegPath::new(ids))
}

/// Twelve significant digits.
fn sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    // exponent after rounding, so 0.9999999999999 does not gain a digit
    let sci = format!("{x:.11e}");
    let exp: i32 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).unwrap_or(0);
    if (-5..12).contains(&exp) {
        format!("{:.*}", (11 - exp).max(0) as usize, x)
    } else {
        sci
    }
}

fn build(args: &BuildArgs) -> CliResult {
    let opts = args.merge.options()?;
    let file = ModelFile::parse(&read(&args.model)?)?;
    let (ceg, atoms) = match file.load()? {
        Model::Tree(tree) => {
            let report = tree.validate();
            if !report.is_valid() {
                return Err(CegError::InvalidTree(report).into());
            }
            let atoms = tree.enumerate_atoms()?.len() as u128;
            (build_transporter_ceg_with(&tree, &opts)?.0, atoms)
        }
        Model::Ceg(ceg) => {
            let min = minimize_ceg_with(&ceg, &opts)?;
            let atoms = min.path_count();
            (min, atoms)
        }
    };
    if let Some(out) = &args.out {
        write(out, &ModelFile::from_ceg(&ceg, file.name.clone(), file.description.clone()).to_json())?;
    }
    println!("positions: {} (incl. sink), edges: {}, atoms: {}", ceg.position_count(), ceg.edge_count(), atoms);
    Ok(())
}

fn run_propagate(args: &PropagateArgs) -> CliResult {
    let (ceg, file) = load_ceg(&args.model, &PositionOptions::default())?;
    let obs_file = ObservationFile::parse(&read(&args.observation)?)?;
    let obs = match obs_file.resolve(&ceg)? {
        Compatibility::Compatible(obs) => obs,
        Compatibility::Incompatible { witness } => {
            let names: Vec<&str> = witness.edges.iter().map(|e| ceg.edge(*e).name.as_str()).collect();
            return Err(CliError::new(
                3,
                "incompatible",
                format!("path set is not a compatible observation; witness path {}", names.join(",")),
            ));
        }
    };
    let result = propagate(&ceg, &obs)?;
    write(&args.out, &ResultFile::from_result(&ceg, &result, file.name.clone()).to_json())?;
    if let Some(path) = &args.reduce {
        let mut reduced = reduce(&ceg, &result)?.ceg;
        if args.minimize {
            reduced = minimize_ceg_with(&reduced, &PositionOptions::default())?;
        }
        write(path, &ModelFile::from_ceg(&reduced, file.name.clone(), None).to_json())?;
    }
    if let Some(path) = &args.dot {
        write(path, &export_dot(&ceg, Some(&result)))?;
    }
    println!("P(observation): {}", sig12(result.event_probability()));
    if args.counts {
        let c = result.counters;
        println!(
            "backward edge ops: {}, backward vertex ops: {}, forward edge ops: {}, total: {}",
            c.backward_edge_ops,
            c.backward_vertex_ops,
            c.forward_edge_ops,
            c.total()
        );
    }
    Ok(())
}

fn query(args: &QueryArgs) -> CliResult {
    let (ceg, _) = load_ceg(&args.model, &PositionOptions::default())?;
    let result = match &args.result {
        Some(path) => Some(ResultFile::parse(&read(path)?)?.to_result(&ceg)?),
        None => None,
    };
    let value = match &args.query {
        Query::Atom { edges } => ceg.path_probability(&parse_path(&ceg, edges)?)?,
        Query::Reach { position } => {
            let w =
                ceg.position_by_name(position).ok_or_else(|| CegError::UnknownId(format!("position {position:?}")))?;
            match &result {
                Some(r) => conditional_reach_probability(&ceg, r, w),
                None => ceg.reach_probability(w),
            }
        }
        Query::ConditionalAtom { edges } => {
            let r =
                result.as_ref().ok_or_else(|| CegError::InvalidParameter("conditional-atom needs --result".into()))?;
            conditional_atom_probability(&ceg, r, &parse_path(&ceg, edges)?)?
        }
    };
    println!("{}", sig12(value));
    Ok(())
}

fn bench(args: &BenchArgs) -> CliResult {
    let timed = args.timing;
    let report = match &args.family {
        Family::Example1 => {
            let g = example1_ceg();
            let mut r = bench_report("example1", &g, &example2_observation(&g), timed)?;
            r.reported_bn = Some(ReportedBnFigures::treatment_example());
            r
        }
        Family::ModelSelection { n } => {
            let g = model_selection_ceg(*n)?;
            let mut r =
                bench_report(&format!("model-selection n={n}"), &g, &CompatibleObservation::vacuous(&g), timed)?;
            r.bounds = Some(BoundCheck::for_model_selection(*n, &g));
            r
        }
        Family::Random(a) => {
            let seed = match a.seed {
                Some(s) => s,
                None => match std::env::var("CEG_SEED") {
                    Ok(v) => {
                        v.parse().map_err(|_| CegError::InvalidParameter(format!("CEG_SEED {v:?} is not a u64")))?
                    }
                    Err(_) => 0,
                },
            };
            if !(0.0..=1.0).contains(&a.keep) {
                return Err(CegError::InvalidParameter("--keep must lie in [0,1]".into()).into());
            }
            let params = RandomTreeParams {
                max_depth: a.max_depth,
                max_branch: a.max_branch,
                merge_bias: a.merge_bias,
                max_vertices: a.max_vertices,
                leaf_prob: a.leaf_prob,
            };
            let tree = random_tree(seed, &params)?;
            let g = build_transporter_ceg_with(&tree, &PositionOptions::default())?.0;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let obs = random_positive_observation(&g, &mut rng, a.keep, 1000)
                .unwrap_or_else(|| CompatibleObservation::vacuous(&g));
            bench_report(&format!("random seed={seed}"), &g, &obs, timed)?
        }
    };
    print!("{report}");
    if let Some(path) = &args.json {
        write(path, &ceg::io::to_json(&report))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error[usage]: {first}");
            return ExitCode::from(2);
        }
    };
    let outcome = match &cli.command {
        Command::Build(a) => build(a),
        Command::Propagate(a) => run_propagate(a),
        Command::Query(a) => query(a),
        Command::Bench(a) => bench(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code)
        }
    }
}
