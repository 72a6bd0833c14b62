//! Command-line front end: single solves, experiment runs from TOML files,
//! and the inequality battery.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 size-limit refusal,
//! 3 property violation.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use bipartite_core::boundary::{boundary_generic_cost, boundary_matching_cost, default_aug_cap};
use bipartite_core::experiments::{
    estimate_beta, records_csv_string, run_concentration, run_convergence, run_density_limit,
    run_poissonization_gap, run_singular_decay, run_tail_max, EstimateRecord, ExperimentConfig, TailMaxConfig,
};
use bipartite_core::geometry::{BoxRegion, PointCloud};
use bipartite_core::graph::{generic_cost, tsp_heuristic, GraphFamily};
use bipartite_core::lemmas::{run_suite, CostOracle, ExactOracle, LemmaInstance, PerturbedOracle, Suite, SuiteReport};
use bipartite_core::matching::{m_p_cost, CostParams, SolveResult, SCHEMA_VERSION};
use bipartite_core::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SIZE_LIMIT: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;

/// Output directory when neither `--out` nor the environment names one.
pub const DEFAULT_OUT_DIR: &str = "bipartite-out";
pub const OUT_DIR_ENV: &str = "BIPARTITE_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "bipartite", version, about = "Bipartite matching and tour functionals on random point sets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve one instance and print the certificate as JSON.
    Solve(SolveArgs),
    /// Run a Monte Carlo experiment described by a TOML file.
    Experiment(ExperimentArgs),
    /// Run the inequality battery on seeded corpora.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FunctionalArg {
    Matching,
    Tsp,
    TspHeur,
    Tree,
    Rreg,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[arg(long, value_enum)]
    pub functional: FunctionalArg,
    /// Maximum degree for `tree`, degree for `rreg`.
    #[arg(long, default_value_t = 2)]
    pub degree: usize,
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub points_x: PathBuf,
    #[arg(long)]
    pub points_y: PathBuf,
    /// Use the boundary functional on `--box`.
    #[arg(long)]
    pub boundary: bool,
    /// Box as `lo..hi`; each end is one number or a comma-separated point.
    #[arg(long = "box")]
    pub region: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    /// Exterior vertices per side for the generic boundary functional.
    #[arg(long)]
    pub aug_cap: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    pub config: PathBuf,
    #[arg(long, env = OUT_DIR_ENV)]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    All,
    Subadd,
    Regularity,
    Inverse,
    Boundary,
    Homogeneity,
    Axioms,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Suite {
        match s {
            SuiteArg::All => Suite::All,
            SuiteArg::Subadd => Suite::Subadd,
            SuiteArg::Regularity => Suite::Regularity,
            SuiteArg::Inverse => Suite::Inverse,
            SuiteArg::Boundary => Suite::Boundary,
            SuiteArg::Homogeneity => Suite::Homogeneity,
            SuiteArg::Axioms => Suite::Axioms,
        }
    }
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub suite: SuiteArg,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Instances per check; defaults to each check's corpus size.
    #[arg(long)]
    pub instances: Option<usize>,
    #[arg(long, env = OUT_DIR_ENV)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Perturb solver costs to exercise the failure path.
    #[arg(long, hide = true)]
    pub corrupt: bool,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(Error::SizeLimit { .. }) => EXIT_SIZE_LIMIT,
            _ => EXIT_USAGE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Results go to stdout, diagnostics to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Solve(a) => cmd_solve(&a).map(|r| {
            emit(&r.to_json());
            EXIT_OK
        }),
        Command::Experiment(a) => with_threads(a.threads, || cmd_experiment(&a)).map(|files| {
            for f in files {
                emit(&f.display().to_string());
            }
            EXIT_OK
        }),
        Command::Verify(a) => with_threads(a.threads, || cmd_verify(&a)),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Prints a line to stdout; a closed pipe is not an error.
fn emit(line: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> CliResult<T> + Send) -> CliResult<T> {
    match threads {
        None => f(),
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?
            .install(f),
    }
}

fn read_cloud(path: &Path) -> CliResult<PointCloud> {
    let file = fs::File::open(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    PointCloud::read_csv(file).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Parses `lo..hi`, where each end is a single number (repeated over all
/// axes) or a comma-separated point.
pub fn parse_box(text: &str, dim: usize) -> CliResult<BoxRegion> {
    let (lo, hi) = text
        .split_once("..")
        .ok_or_else(|| CliError::Usage(format!("box '{text}' is not of the form lo..hi")))?;
    let end = |s: &str| -> CliResult<Vec<f64>> {
        let v = s
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| CliError::Usage(format!("box '{text}': {e}")))?;
        match v.len() {
            1 => Ok(vec![v[0]; dim]),
            n if n == dim => Ok(v),
            n => Err(CliError::Usage(format!("box '{text}' has {n} coordinates, points have {dim}"))),
        }
    };
    Ok(BoxRegion::from_bounds(end(lo)?, end(hi)?)?)
}

pub fn cmd_solve(args: &SolveArgs) -> CliResult<SolveResult> {
    let x = read_cloud(&args.points_x)?;
    let y = read_cloud(&args.points_y)?;
    if x.dim() != y.dim() {
        return Err(CliError::Usage(format!(
            "dimension mismatch: {} has dimension {}, {} has dimension {}",
            args.points_x.display(),
            x.dim(),
            args.points_y.display(),
            y.dim()
        )));
    }
    let params = CostParams::new(args.p, args.eps)?;
    let family = match args.functional {
        FunctionalArg::Matching => Some(GraphFamily::matching()),
        FunctionalArg::Tsp => Some(GraphFamily::tsp()),
        FunctionalArg::Tree => Some(GraphFamily::spanning_tree(args.degree)?),
        FunctionalArg::Rreg => Some(GraphFamily::r_regular(args.degree)?),
        FunctionalArg::TspHeur => None,
    };
    if args.boundary {
        let text = args
            .region
            .as_deref()
            .ok_or_else(|| CliError::Usage("--boundary needs --box lo..hi".into()))?;
        let region = parse_box(text, x.dim())?;
        return match family {
            Some(f) if f == GraphFamily::matching() => Ok(boundary_matching_cost(&x, &y, &params, &region)?),
            Some(f) => {
                let cap = args.aug_cap.unwrap_or_else(|| default_aug_cap(x.len(), y.len(), &f));
                Ok(boundary_generic_cost(&x, &y, &f, &params, &region, cap)?)
            }
            None => Err(CliError::Usage("the heuristic tour has no boundary variant".into())),
        };
    }
    Ok(match family {
        Some(f) if f == GraphFamily::matching() => m_p_cost(&x, &y, &params)?,
        Some(f) => generic_cost(&x, &y, &f, &params)?,
        None => tsp_heuristic(&x, &y, &params)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    Convergence,
    DensityLimit,
    SingularDecay,
    PoissonGap,
    TailMax,
    Concentration,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Convergence,
        ExperimentKind::DensityLimit,
        ExperimentKind::SingularDecay,
        ExperimentKind::PoissonGap,
        ExperimentKind::TailMax,
        ExperimentKind::Concentration,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::DensityLimit => "density-limit",
            ExperimentKind::SingularDecay => "singular-decay",
            ExperimentKind::PoissonGap => "poisson-gap",
            ExperimentKind::TailMax => "tail-max",
            ExperimentKind::Concentration => "concentration",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExperimentFile {
    Standard(ExperimentKind, ExperimentConfig),
    TailMax(TailMaxConfig),
}

fn deserialize_tracked<T: serde::de::DeserializeOwned>(table: toml::Table) -> CliResult<T> {
    let mut unknown = Vec::new();
    let parsed: std::result::Result<T, _> =
        serde_ignored::deserialize(toml::Value::Table(table), |path| unknown.push(path.to_string()));
    match (parsed, unknown.is_empty()) {
        (Ok(v), true) => Ok(v),
        (Ok(_), false) => Err(CliError::Usage(format!("invalid config: unknown keys: {}", unknown.join(", ")))),
        (Err(e), true) => Err(CliError::Usage(format!("invalid config: {e}"))),
        (Err(e), false) => Err(CliError::Usage(format!(
            "invalid config: {e}; unknown keys: {}",
            unknown.join(", ")
        ))),
    }
}

/// Parses an experiment file: a top-level `kind` plus the fields of the
/// matching configuration, with the measure under `[measure]`.
pub fn parse_experiment(text: &str) -> CliResult<ExperimentFile> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
    let kind = match table.remove("kind") {
        Some(toml::Value::String(s)) => s,
        Some(_) => return Err(CliError::Usage("invalid config: kind must be a string".into())),
        None => return Err(CliError::Usage("invalid config: missing key kind".into())),
    };
    let kind = ExperimentKind::ALL
        .into_iter()
        .find(|k| k.name() == kind)
        .ok_or_else(|| {
            let names: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
            CliError::Usage(format!("invalid config: kind '{kind}' is not one of {}", names.join(", ")))
        })?;
    if kind == ExperimentKind::TailMax {
        return Ok(ExperimentFile::TailMax(deserialize_tracked(table)?));
    }
    let cfg: ExperimentConfig = deserialize_tracked(table)?;
    cfg.validate().map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
    Ok(ExperimentFile::Standard(kind, cfg))
}

fn out_dir(arg: &Option<PathBuf>) -> PathBuf {
    arg.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn write_file(dir: &Path, name: &str, contents: &str, written: &mut Vec<PathBuf>) -> CliResult<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    written.push(path);
    Ok(())
}

fn summary<C: Serialize, R: Serialize>(kind: ExperimentKind, config: &C, report: &R) -> String {
    let value = json!({
        "schema_version": SCHEMA_VERSION,
        "kind": kind.name(),
        "config": config,
        "report": report,
    });
    let mut text = serde_json::to_string_pretty(&value).expect("summaries always serialize");
    text.push('\n');
    text
}

fn functional_label(cfg: &ExperimentConfig) -> &'static str {
    if cfg.boundary {
        "boundary-matching"
    } else {
        cfg.functional.label()
    }
}

#[derive(Serialize)]
struct TailCsvRow {
    n: u64,
    trials: usize,
    moment: f64,
    normalized: f64,
    alpha: f64,
    gamma: f64,
    seed: u64,
    schema_version: u32,
}

/// Runs the experiment file at `args.config`; returns the files written.
pub fn cmd_experiment(args: &ExperimentArgs) -> CliResult<Vec<PathBuf>> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.config.display())))?;
    let file = parse_experiment(&text)?;
    let dir = out_dir(&args.out);
    fs::create_dir_all(&dir).map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();
    let cfg = match file {
        ExperimentFile::TailMax(cfg) => {
            let report = run_tail_max(&cfg)?;
            let mut w = csv_writer();
            for r in &report.rows {
                w.serialize(TailCsvRow {
                    n: r.n,
                    trials: r.trials,
                    moment: r.moment,
                    normalized: r.normalized,
                    alpha: cfg.alpha,
                    gamma: cfg.gamma,
                    seed: cfg.seed,
                    schema_version: SCHEMA_VERSION,
                })
                .map_err(|e| CliError::Usage(format!("csv: {e}")))?;
            }
            write_file(&dir, "tail-max.csv", &csv_finish(w), &mut written)?;
            write_file(&dir, "tail-max.json", &summary(ExperimentKind::TailMax, &cfg, &report), &mut written)?;
            return Ok(written);
        }
        ExperimentFile::Standard(kind, cfg) => (kind, cfg),
    };
    let (kind, cfg) = cfg;
    for w in cfg.validate()? {
        eprintln!("warning: {w}");
    }
    let stem = kind.name();
    let label = functional_label(&cfg);
    let csv = |records: &[EstimateRecord], label: &str| records_csv_string(records, label, cfg.seed);
    match kind {
        ExperimentKind::Convergence => {
            let records = run_convergence(&cfg)?;
            let beta = estimate_beta(&records).ok();
            write_file(&dir, &format!("{stem}.csv"), &csv(&records, label), &mut written)?;
            let report = json!({ "records": records, "beta": beta, "in_theory": cfg.in_theory() });
            write_file(&dir, &format!("{stem}.json"), &summary(kind, &cfg, &report), &mut written)?;
        }
        ExperimentKind::DensityLimit => {
            let report = run_density_limit(&cfg)?;
            write_file(&dir, &format!("{stem}.csv"), &csv(&report.records, label), &mut written)?;
            write_file(
                &dir,
                &format!("{stem}-calibration.csv"),
                &csv(&report.calibration_plain, "matching"),
                &mut written,
            )?;
            write_file(
                &dir,
                &format!("{stem}-calibration-boundary.csv"),
                &csv(&report.calibration_boundary, "boundary-matching"),
                &mut written,
            )?;
            write_file(&dir, &format!("{stem}.json"), &summary(kind, &cfg, &report), &mut written)?;
        }
        ExperimentKind::SingularDecay => {
            let report = run_singular_decay(&cfg)?;
            write_file(&dir, &format!("{stem}.csv"), &csv(&report.records, label), &mut written)?;
            write_file(&dir, &format!("{stem}.json"), &summary(kind, &cfg, &report), &mut written)?;
        }
        ExperimentKind::PoissonGap => {
            let report = run_poissonization_gap(&cfg)?;
            write_file(&dir, &format!("{stem}-fixed.csv"), &csv(&report.fixed, label), &mut written)?;
            write_file(&dir, &format!("{stem}-poisson.csv"), &csv(&report.poisson, label), &mut written)?;
            write_file(&dir, &format!("{stem}.json"), &summary(kind, &cfg, &report), &mut written)?;
        }
        ExperimentKind::Concentration => {
            let report = run_concentration(&cfg)?;
            let records: Vec<EstimateRecord> = report
                .rows
                .iter()
                .map(|r| EstimateRecord {
                    n: r.n,
                    trials: r.trials,
                    mean: r.mean,
                    stderr: r.std / (r.trials as f64).sqrt(),
                    ratio: r.mean / (r.n as f64).powf(1.0 - cfg.p / cfg.d as f64),
                    ratio_stderr: r.std_over_scale / (r.trials as f64).sqrt(),
                    p: cfg.p,
                    d: cfg.d,
                })
                .collect();
            write_file(&dir, &format!("{stem}.csv"), &csv(&records, label), &mut written)?;
            write_file(&dir, &format!("{stem}.json"), &summary(kind, &cfg, &report), &mut written)?;
        }
        ExperimentKind::TailMax => unreachable!("handled above"),
    }
    Ok(written)
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

fn csv_finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv output is utf-8")
}

/// Runs the battery; writes the report and shrunk counterexamples to the
/// output directory and returns the exit code.
pub fn cmd_verify(args: &VerifyArgs) -> CliResult<i32> {
    let suite: Suite = args.suite.into();
    let oracle: Box<dyn CostOracle> = if args.corrupt {
        Box::new(PerturbedOracle { amount: 0.05 })
    } else {
        Box::new(ExactOracle)
    };
    let report = run_suite(suite, args.seed, args.instances, oracle.as_ref())?;
    print_suite(&report);
    let failed = !report.passed();
    if args.out.is_some() || failed {
        write_verify_outputs(&out_dir(&args.out), &report)?;
    }
    Ok(if failed { EXIT_VIOLATION } else { EXIT_OK })
}

fn print_suite(report: &SuiteReport) {
    for r in &report.reports {
        emit(&format!(
            "{} {}: {} instances, {} violations, max lhs/rhs {:.6}",
            if r.passed() { "PASS" } else { "FAIL" },
            r.check,
            r.instances,
            r.violations,
            r.max_usage
        ));
    }
    for a in &report.axioms {
        emit(&format!(
            "{} axioms {} (n <= {}): merge {:?}, restriction {:?}, max degree {}",
            if a.all_ok() { "PASS" } else { "FAIL" },
            a.family,
            a.n_max,
            a.merge_observed,
            a.restriction_observed,
            a.max_degree_observed
        ));
    }
}

fn write_instance_csvs(dir: &Path, stem: &str, inst: &LemmaInstance, written: &mut Vec<PathBuf>) -> CliResult<()> {
    for (side, groups) in [("x", &inst.xs), ("y", &inst.ys)] {
        for (i, g) in groups.iter().enumerate() {
            write_file(dir, &format!("{stem}-{side}{i}.csv"), &g.to_csv_string(), written)?;
        }
    }
    Ok(())
}

fn write_verify_outputs(dir: &Path, report: &SuiteReport) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();
    let mut text = serde_json::to_string_pretty(report).expect("reports always serialize");
    text.push('\n');
    write_file(dir, "verify-report.json", &text, &mut written)?;
    for r in &report.reports {
        if let Some(cx) = &r.counterexample {
            let stem = format!("{}-counterexample", r.check);
            let mut text = serde_json::to_string_pretty(cx).expect("instances always serialize");
            text.push('\n');
            write_file(dir, &format!("{stem}.json"), &text, &mut written)?;
            write_instance_csvs(dir, &stem, &cx.shrunk, &mut written)?;
            eprintln!(
                "{}: shrunk counterexample with {} points written to {}",
                r.check,
                cx.shrunk.point_count(),
                dir.join(format!("{stem}.json")).display()
            );
        }
    }
    Ok(written)
}
