//! Experiment orchestration: JSON config, the estimator registry, seeded
//! parallel Monte-Carlo runs, CSV emission and the command-line interface.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{load_cluster, ClusterState, SignPolicy};
use crate::distributions::{make_spec, DistKind, DistributionSpec};
use crate::error::{Error, Result};
use crate::iterative::{
    distributed_lanczos, distributed_power_method, hot_potato_oja, IterativeConfig,
};
use crate::linalg::sym_eig;
use crate::oneshot::{error_metric, AggregationMethod};
use crate::rng::mix64;
use crate::shift_invert::{shift_invert, Lambda1Estimate, ShiftInvertConfig};
use crate::theory::{epsilon_erm, taylor_slope_families};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Centralized,
    SingleMachine,
    Naive,
    Signfix,
    Projection,
    Power,
    Lanczos,
    HotPotato,
    ShiftInvert,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Centralized,
        Method::SingleMachine,
        Method::Naive,
        Method::Signfix,
        Method::Projection,
        Method::Power,
        Method::Lanczos,
        Method::HotPotato,
        Method::ShiftInvert,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Centralized => "centralized",
            Method::SingleMachine => "single-machine",
            Method::Naive => "naive",
            Method::Signfix => "signfix",
            Method::Projection => "projection",
            Method::Power => "power",
            Method::Lanczos => "lanczos",
            Method::HotPotato => "hot-potato",
            Method::ShiftInvert => "shift-invert",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }

    fn needs_samples(self) -> bool {
        self == Method::HotPotato
    }
}

fn default_epsilon() -> f64 {
    1e-6
}
fn default_failure_prob() -> f64 {
    0.1
}
fn default_oja_step() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub distribution: DistKind,
    pub m: usize,
    pub n_grid: Vec<usize>,
    pub methods: Vec<String>,
    pub replicates: u64,
    pub master_seed: u64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_failure_prob")]
    pub failure_prob: f64,
    #[serde(default = "default_oja_step")]
    pub oja_step: f64,
    #[serde(default)]
    pub output_path: Option<String>,
    #[serde(default)]
    pub desk_scale: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<Vec<Method>> {
        if self.replicates < 1 {
            return Err(Error::Config("replicates must be >= 1".into()));
        }
        if self.m < 1 {
            return Err(Error::Config("m must be >= 1".into()));
        }
        if self.n_grid.is_empty() {
            return Err(Error::Config("n_grid must not be empty".into()));
        }
        if !self.n_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("n_grid must be strictly ascending".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("methods must not be empty".into()));
        }
        self.methods.iter().map(|s| Method::parse(s)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub method: String,
    pub m: usize,
    pub n: usize,
    pub d: usize,
    pub replicate: u64,
    pub seed: u64,
    pub error: f64,
    pub degenerate: bool,
    pub rounds: u64,
    pub matvecs: u64,
    pub wall_ms: f64,
}

fn is_degenerate_outcome(e: &Error) -> bool {
    matches!(e, Error::Degenerate(_) | Error::Cancellation(_))
}

fn estimate_error(
    method: Method,
    cluster: &mut ClusterState,
    spec: &DistributionSpec,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(f64, bool)> {
    let v1 = &spec.population_v1;
    let run = |w: crate::linalg::Vector| error_metric(&w, v1);
    let outcome = match method {
        Method::Centralized => {
            let info = sym_eig(&cluster.pooled_covariance(), 0.0)?;
            if info.gap <= 1e-12 * info.lambda1.abs().max(1.0) {
                return Ok((1.0, true));
            }
            run(info.v1)
        }
        Method::SingleMachine => {
            // mean loss of the individual local solutions
            let mut total = 0.0;
            let mut any_degenerate = false;
            for i in 0..cluster.m() {
                match cluster.local_erm(i, SignPolicy::Canonical) {
                    Ok(w) => total += error_metric(&w, v1)?,
                    Err(e) if is_degenerate_outcome(&e) => {
                        total += 1.0;
                        any_degenerate = true;
                    }
                    Err(e) => return Err(e),
                }
            }
            return Ok((total / cluster.m() as f64, any_degenerate));
        }
        Method::Naive | Method::Signfix | Method::Projection => {
            let agg = match method {
                Method::Naive => AggregationMethod::NaiveAverage,
                Method::Signfix => AggregationMethod::SignFixAverage,
                _ => AggregationMethod::ProjectionAverage,
            };
            cluster
                .gather_local_erms(SignPolicy::UnbiasedRandom(seed))
                .and_then(|vs| agg.aggregate(&vs))
                .and_then(|w| run(w))
        }
        Method::Power | Method::Lanczos => {
            let icfg = IterativeConfig::new(200_000, cfg.epsilon, cfg.failure_prob, seed)?;
            let out = if method == Method::Power {
                distributed_power_method(cluster, &icfg)?
            } else {
                distributed_lanczos(cluster, &icfg)?
            };
            run(out.estimate)
        }
        Method::HotPotato => {
            let icfg = IterativeConfig::new(200_000, cfg.epsilon, cfg.failure_prob, seed)?;
            hot_potato_oja(cluster, cfg.oja_step, &icfg).and_then(|out| run(out.estimate))
        }
        Method::ShiftInvert => {
            let scfg = ShiftInvertConfig {
                gap_estimate: None,
                epsilon: cfg.epsilon,
                failure_prob: cfg.failure_prob,
                warm_start: true,
                lambda1_mode: Lambda1Estimate::Machine0,
                seed,
                ..Default::default()
            };
            shift_invert(cluster, &scfg).and_then(|out| run(out.w))
        }
    };
    match outcome {
        Ok(err) => Ok((err, false)),
        Err(e) if is_degenerate_outcome(&e) => Ok((1.0, true)),
        Err(e) => Err(e),
    }
}

fn run_replicate(
    spec: &DistributionSpec,
    cfg: &ExperimentConfig,
    methods: &[Method],
    n: usize,
    replicate: u64,
) -> Result<Vec<RunRecord>> {
    let derived_master = mix64(cfg.master_seed, n as u64);
    let record_seed = mix64(derived_master, replicate);
    let retain = methods.iter().any(|m| m.needs_samples());
    let mut cluster = load_cluster(spec, cfg.m, n, derived_master, replicate, retain)?;
    let mut records = Vec::with_capacity(methods.len());
    for (idx, &method) in methods.iter().enumerate() {
        let method_seed = mix64(record_seed, idx as u64);
        let ledger_before = cluster.ledger();
        let started = Instant::now();
        let (error, degenerate) = estimate_error(method, &mut cluster, spec, cfg, method_seed)?;
        let wall_ms = started.elapsed().as_secs_f64() * 1e3;
        let ledger_after = cluster.ledger();
        records.push(RunRecord {
            method: method.name().to_string(),
            m: cfg.m,
            n,
            d: spec.d,
            replicate,
            seed: record_seed,
            error,
            degenerate,
            rounds: ledger_after.0 - ledger_before.0,
            matvecs: ledger_after.1 - ledger_before.1,
            wall_ms,
        });
    }
    Ok(records)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    let methods = cfg.validate()?;
    let spec = make_spec(cfg.distribution.clone())?;
    let jobs: Vec<(usize, u64)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| (0..cfg.replicates).map(move |r| (n, r)))
        .collect();
    let nested: Vec<Vec<RunRecord>> = jobs
        .par_iter()
        .map(|&(n, r)| run_replicate(&spec, cfg, &methods, n, r))
        .collect::<Result<_>>()?;
    let mut records: Vec<RunRecord> = nested.into_iter().flatten().collect();
    records.sort_by(|a, b| {
        (a.n, &a.method, a.replicate).cmp(&(b.n, &b.method, b.replicate))
    });
    Ok(records)
}

pub const CSV_HEADER: &str = "method,m,n,d,replicate,seed,error,degenerate,rounds,matvecs,wall_ms";

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv_string(records: &[RunRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.method,
            r.m,
            r.n,
            r.d,
            r.replicate,
            r.seed,
            fmt_f64(r.error),
            r.degenerate,
            r.rounds,
            r.matvecs,
            fmt_f64(r.wall_ms),
        ));
    }
    out
}

pub fn emit_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    let io_err = |source: std::io::Error| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let mut file = std::fs::File::create(path).map_err(io_err)?;
    file.write_all(csv_string(records).as_bytes()).map_err(io_err)?;
    Ok(())
}

pub fn parse_csv(text: &str) -> Result<Vec<RunRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(Error::Config(format!(
                "bad CSV header: {:?}",
                other.unwrap_or("")
            )))
        }
    }
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            return Err(Error::Config(format!(
                "line {}: expected 11 fields, found {}",
                lineno + 2,
                fields.len()
            )));
        }
        let bad = |what: &str| Error::Config(format!("line {}: bad {what}", lineno + 2));
        records.push(RunRecord {
            method: fields[0].to_string(),
            m: fields[1].parse().map_err(|_| bad("m"))?,
            n: fields[2].parse().map_err(|_| bad("n"))?,
            d: fields[3].parse().map_err(|_| bad("d"))?,
            replicate: fields[4].parse().map_err(|_| bad("replicate"))?,
            seed: fields[5].parse().map_err(|_| bad("seed"))?,
            error: fields[6].parse().map_err(|_| bad("error"))?,
            degenerate: fields[7].parse().map_err(|_| bad("degenerate"))?,
            rounds: fields[8].parse().map_err(|_| bad("rounds"))?,
            matvecs: fields[9].parse().map_err(|_| bad("matvecs"))?,
            wall_ms: fields[10].parse().map_err(|_| bad("wall_ms"))?,
        });
    }
    Ok(records)
}

// ---------------------------------------------------------------------------
// CLI

#[derive(Parser, Debug)]
#[command(
    name = "dpca",
    about = "Simulated multi-machine estimation of the leading principal component",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// JSON experiment config; omitted fields use the subcommand defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    /// Replaces the n grid with a single value.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    replicates: Option<u64>,
    /// Estimator name; repeat to run several.
    #[arg(long = "method")]
    methods: Vec<String>,
    #[arg(long)]
    verbose: bool,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Single-round aggregation sweep over the n grid.
    OneshotSweep(RunArgs),
    /// Multi-round baselines: power method, Lanczos, hot-potato SGD.
    IterativeCompare(RunArgs),
    /// Warm-started shift-and-invert solve over the n grid.
    ShiftInvert(RunArgs),
    /// Sign-fixed averaging on the asymmetric lower-bound distribution.
    Lowerbound(RunArgs),
    /// Second-order perturbation scaling report.
    TaylorCheck {
        #[arg(long, default_value_t = 20)]
        families: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Estimation-error curves for both synthetic distributions.
    ReproduceFig1 {
        /// d=50, 100 replicates; finishes in minutes.
        #[arg(long)]
        desk_scale: bool,
        /// d=300, 400 replicates.
        #[arg(long)]
        full: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the centralized risk bound for the given parameters.
    Bounds {
        #[arg(long)]
        b: f64,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        delta: f64,
    },
}

fn load_config(args: &RunArgs, default: ExperimentConfig) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.display().to_string(),
                source,
            })?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("bad config: {e}")))?
        }
        None => default,
    };
    if let Some(m) = args.m {
        cfg.m = m;
    }
    if let Some(n) = args.n {
        cfg.n_grid = vec![n];
    }
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(r) = args.replicates {
        cfg.replicates = r;
    }
    if !args.methods.is_empty() {
        cfg.methods = args.methods.clone();
    }
    if let Some(out) = &args.out {
        cfg.output_path = Some(out.display().to_string());
    }
    Ok(cfg)
}

fn run_and_emit(cfg: &ExperimentConfig, verbose: bool) -> Result<()> {
    if verbose {
        eprintln!(
            "running {} methods x {} n-points x {} replicates (m={}, seed={})",
            cfg.methods.len(),
            cfg.n_grid.len(),
            cfg.replicates,
            cfg.m,
            cfg.master_seed
        );
    }
    let records = run_experiment(cfg)?;
    match &cfg.output_path {
        Some(path) => emit_csv(&records, Path::new(path)),
        None => {
            print!("{}", csv_string(&records));
            Ok(())
        }
    }
}

fn names(methods: &[Method]) -> Vec<String> {
    methods.iter().map(|m| m.name().to_string()).collect()
}

fn default_chain_config() -> ExperimentConfig {
    ExperimentConfig {
        distribution: DistKind::GaussianChain {
            d: 50,
            structure_seed: 0,
        },
        m: 25,
        n_grid: vec![250, 500, 1000],
        methods: names(&[
            Method::Centralized,
            Method::SingleMachine,
            Method::Naive,
            Method::Signfix,
            Method::Projection,
        ]),
        replicates: 20,
        master_seed: 1,
        epsilon: default_epsilon(),
        failure_prob: default_failure_prob(),
        oja_step: default_oja_step(),
        output_path: None,
        desk_scale: true,
    }
}

fn fig1_config(kind: DistKind, full: bool, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        distribution: kind,
        m: 25,
        n_grid: vec![250, 500, 1000, 2000, 4000],
        methods: names(&[
            Method::Centralized,
            Method::SingleMachine,
            Method::Naive,
            Method::Signfix,
            Method::Projection,
        ]),
        replicates: if full { 400 } else { 100 },
        master_seed: seed,
        epsilon: default_epsilon(),
        failure_prob: default_failure_prob(),
        oja_step: default_oja_step(),
        output_path: None,
        desk_scale: !full,
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::OneshotSweep(args) => {
            let cfg = load_config(&args, default_chain_config())?;
            run_and_emit(&cfg, args.verbose)
        }
        Cmd::IterativeCompare(args) => {
            let mut default = default_chain_config();
            default.m = 8;
            default.n_grid = vec![1000];
            default.methods = names(&[Method::Power, Method::Lanczos, Method::HotPotato]);
            default.replicates = 5;
            let cfg = load_config(&args, default)?;
            run_and_emit(&cfg, args.verbose)
        }
        Cmd::ShiftInvert(args) => {
            let mut default = default_chain_config();
            default.m = 8;
            default.n_grid = vec![1000];
            default.methods = names(&[Method::ShiftInvert]);
            default.replicates = 5;
            let cfg = load_config(&args, default)?;
            run_and_emit(&cfg, args.verbose)
        }
        Cmd::Lowerbound(args) => {
            let default = ExperimentConfig {
                distribution: DistKind::AsymmetricXiLb { delta: 0.3 },
                m: 256,
                n_grid: vec![200, 400, 800],
                methods: names(&[Method::Signfix, Method::Centralized]),
                replicates: 100,
                master_seed: 1,
                epsilon: default_epsilon(),
                failure_prob: default_failure_prob(),
                oja_step: default_oja_step(),
                output_path: None,
                desk_scale: true,
            };
            let cfg = load_config(&args, default)?;
            run_and_emit(&cfg, args.verbose)
        }
        Cmd::TaylorCheck { families, seed } => {
            let reports = taylor_slope_families(families, seed)?;
            let mut all_ok = true;
            for (i, (slope, ratio)) in reports.iter().enumerate() {
                let ok = (1.9..=2.5).contains(slope) && *ratio <= 100.0;
                all_ok &= ok;
                println!(
                    "family {i}: slope {slope:.4} ratio {ratio:.4} {}",
                    if ok { "ok" } else { "FAIL" }
                );
            }
            if all_ok {
                Ok(())
            } else {
                Err(Error::NumericalFailure(
                    "second-order scaling check failed".into(),
                ))
            }
        }
        Cmd::ReproduceFig1 {
            desk_scale,
            full,
            out,
            seed,
        } => {
            if desk_scale && full {
                return Err(Error::Config(
                    "--desk-scale and --full are mutually exclusive".into(),
                ));
            }
            let d = if full { 300 } else { 50 };
            let seed = seed.unwrap_or(1);
            for kind in [
                DistKind::GaussianChain {
                    d,
                    structure_seed: 0,
                },
                DistKind::ScaledUniformChain {
                    d,
                    structure_seed: 0,
                },
            ] {
                let label = match kind {
                    DistKind::GaussianChain { .. } => "gaussian-chain",
                    _ => "scaled-uniform-chain",
                };
                let mut cfg = fig1_config(kind, full, seed);
                if let Some(base) = &out {
                    let mut path = base.clone();
                    let stem = path
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| "fig1".into());
                    path.set_file_name(format!("{stem}-{label}.csv"));
                    cfg.output_path = Some(path.display().to_string());
                }
                eprintln!("distribution: {label}");
                run_and_emit(&cfg, true)?;
            }
            Ok(())
        }
        Cmd::Bounds {
            b,
            d,
            p,
            m,
            n,
            delta,
        } => {
            let v = epsilon_erm(b, d, p, m, n, delta)?;
            println!("{v:.5}");
            Ok(())
        }
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Parameter(_) | Error::Io { .. } => 2,
        _ => 3,
    }
}

pub fn cli_main(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return 2;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
