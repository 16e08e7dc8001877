//! Command-line front end for the `hdqkd-core` analysis engine.

pub mod config;
pub mod report;
pub mod sweep;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hdqkd_core::bounds::{
    basic_sampling_error, c_gamma, default_beta, verify_at_delta, verify_consistency, SamplingGeometry,
    SecurityTargets,
};
use hdqkd_core::entropy::PrimeDimension;
use hdqkd_core::keyrate::{
    evaluate_flagged, optimize_m, EvalOptions, Flag, KeyRateResult, LeakMode, LeakageModel,
    NoiseThresholds,
};
use hdqkd_core::montecarlo::{adversarial_word, check_dominance, DominanceSettings, WordFamily};
use hdqkd_core::mub::{build_mub_bases, ClassTable, ORACLE_MAX_DIMENSION};
use hdqkd_core::protocol::{run_protocol, ChannelModel, ProtocolSetup, SimulationRun};
use serde::Serialize;

use crate::report::{json, num, BoundsRecord, KeyRateRecord, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] hdqkd_core::Error),
    #[error("output error: {0}")]
    Output(String),
    #[error("strict mode: {0}")]
    Strict(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Core(_) => 2,
            CliError::Output(_) => 1,
            CliError::Strict(_) => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "hdqkd", version, about = "Finite-key analysis of high-dimensional BB84 with d+1 MUBs")]
pub struct Cli {
    /// Output format (default depends on the subcommand).
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Master seed for randomized subcommands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Exit with code 3 when any point is infeasible.
    #[arg(long, global = true)]
    pub strict: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Key length and rate for a single scenario.
    Keyrate(KeyrateArgs),
    /// Sampling-bound quantities at delta_min or a given delta.
    Bounds(BoundsArgs),
    /// Parameter sweep driven by a scenario file.
    Sweep(SweepArgs),
    /// Seeded end-to-end simulation of the test stage.
    Simulate(SimulateArgs),
    /// Monte Carlo check of the sampling bound against fixed words.
    VerifySampling(VerifyArgs),
    /// Outcome class of every Bell label in every basis.
    MubTable(MubTableArgs),
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseArg {
    Symmetric(f64),
    Matrix(PathBuf),
}

impl std::str::FromStr for NoiseArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            Some(("symmetric", q)) => q.parse().map(NoiseArg::Symmetric).map_err(|e| format!("{q:?}: {e}")),
            Some(("matrix", p)) => Ok(NoiseArg::Matrix(PathBuf::from(p))),
            _ => Err("expected symmetric:<Q> or matrix:<path>".into()),
        }
    }
}

impl NoiseArg {
    fn thresholds(&self, d: PrimeDimension) -> Result<NoiseThresholds, CliError> {
        match self {
            NoiseArg::Symmetric(q) => Ok(NoiseThresholds::symmetric(d, *q)?),
            NoiseArg::Matrix(p) => {
                let t = config::load_thresholds(p)?;
                if t.dimension() != d {
                    return Err(CliError::Config(format!(
                        "{}: matrix has d = {}, expected {}",
                        p.display(),
                        t.dimension().get(),
                        d.get()
                    )));
                }
                Ok(t)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LeakArg {
    Shannon(f64),
    Fixed(f64),
}

impl std::str::FromStr for LeakArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (mode, val) = s.split_once(':').map_or((s, None), |(a, b)| (a, Some(b)));
        let parse = |v: &str| v.parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
        match (mode, val) {
            ("shannon", None) => Ok(LeakArg::Shannon(1.0)),
            ("shannon", Some(f)) => parse(f).map(LeakArg::Shannon),
            ("fixed", Some(b)) => parse(b).map(LeakArg::Fixed),
            _ => Err("expected shannon[:f] or fixed:<bits>".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelArg {
    Depolarizing(f64),
    Lambda(PathBuf),
}

impl std::str::FromStr for ChannelArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            Some(("depolarizing", q)) => q.parse().map(ChannelArg::Depolarizing).map_err(|e| format!("{q:?}: {e}")),
            Some(("lambda", p)) => Ok(ChannelArg::Lambda(PathBuf::from(p))),
            _ => Err("expected depolarizing:<Q> or lambda:<path>".into()),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TargetArgs {
    #[arg(long, default_value_t = 1e-14)]
    pub eps: f64,
    #[arg(long = "eps-sec", default_value_t = 1e-12)]
    pub eps_sec: f64,
}

impl TargetArgs {
    fn targets(&self) -> Result<SecurityTargets, CliError> {
        Ok(SecurityTargets::new(self.eps, self.eps_sec)?)
    }
}

#[derive(Debug, Clone, Args)]
pub struct LeakArgs {
    /// shannon[:f] or fixed:<bits>.
    #[arg(long, default_value = "shannon")]
    pub leak: LeakArg,
    /// Correctness parameter of the verification hash; 1 disables it.
    #[arg(long = "eps-cor", default_value_t = 1.0)]
    pub eps_cor: f64,
}

impl LeakArgs {
    fn model(&self) -> Result<LeakageModel, CliError> {
        let mode = match self.leak {
            LeakArg::Shannon(f) => LeakMode::Shannon { efficiency: f },
            LeakArg::Fixed(bits) => LeakMode::Fixed { bits },
        };
        Ok(LeakageModel::new(mode, self.eps_cor)?)
    }
}

#[derive(Debug, Clone, Args)]
pub struct KeyrateArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long = "N", value_parser = parse_count)]
    pub total: u64,
    #[command(flatten)]
    pub targets: TargetArgs,
    /// symmetric:<Q> or matrix:<path>.
    #[arg(long)]
    pub noise: NoiseArg,
    #[command(flatten)]
    pub leak: LeakArgs,
    /// Fixed sample size.
    #[arg(long, conflicts_with = "optimize_m", value_parser = parse_count)]
    pub m: Option<u64>,
    /// Optimize the sample size (the default when --m is absent).
    #[arg(long = "optimize-m")]
    pub optimize_m: bool,
    /// Split ratio; c_gamma when absent.
    #[arg(long)]
    pub c: Option<f64>,
    /// Default 1/d^2.
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long = "N", value_parser = parse_count)]
    pub total: u64,
    #[arg(long, value_parser = parse_count)]
    pub m: u64,
    #[command(flatten)]
    pub targets: TargetArgs,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Evaluate at this delta instead of delta_min.
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Scenario file (.toml or .json).
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long = "N", value_parser = parse_count)]
    pub total: u64,
    #[arg(long, value_parser = parse_count)]
    pub m: u64,
    /// depolarizing:<Q> or lambda:<path>.
    #[arg(long)]
    pub channel: ChannelArg,
    /// Threshold matrix file, or symmetric:<Q>.
    #[arg(long)]
    pub thresholds: String,
    #[arg(long, default_value_t = 1)]
    pub repeats: u64,
    #[command(flatten)]
    pub targets: TargetArgs,
    #[command(flatten)]
    pub leak: LeakArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    UniformClass,
    Alternating,
    Blocked,
    Random,
}

impl From<FamilyArg> for WordFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::UniformClass => WordFamily::UniformClass,
            FamilyArg::Alternating => WordFamily::Alternating,
            FamilyArg::Blocked => WordFamily::Blocked,
            FamilyArg::Random => WordFamily::Random,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long = "N", value_parser = parse_count_usize)]
    pub total: usize,
    /// Default N/2.
    #[arg(long, value_parser = parse_count_usize)]
    pub m: Option<usize>,
    #[arg(long, value_enum, default_value = "alternating")]
    pub family: FamilyArg,
    /// Comma-separated slacks.
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2,0.3")]
    pub deltas: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0.99)]
    pub level: f64,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct MubTableArgs {
    #[arg(long)]
    pub d: usize,
    /// Also certify the table against the numerical POVM oracle.
    #[arg(long)]
    pub oracle: bool,
}

/// Integer count, also accepting exponent notation such as `1e9`.
fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let x: f64 = s.parse().map_err(|_| format!("{s:?} is not a count"))?;
    if x >= 0.0 && x.fract() == 0.0 && x < 1.8e19 {
        Ok(x as u64)
    } else {
        Err(format!("{s:?} is not a nonnegative integer"))
    }
}

fn parse_count_usize(s: &str) -> Result<usize, String> {
    parse_count(s).and_then(|v| usize::try_from(v).map_err(|e| e.to_string()))
}

fn dim(d: usize) -> Result<PrimeDimension, CliError> {
    Ok(PrimeDimension::new(d)?)
}

/// Rendered output plus any strict-mode violation found while producing it.
pub struct Output {
    pub text: String,
    pub infeasible: Vec<String>,
    /// Diagnostics for stderr.
    pub notes: Vec<String>,
}

impl Output {
    fn plain(text: String) -> Self {
        Output {
            text,
            infeasible: Vec::new(),
            notes: Vec::new(),
        }
    }
}

/// Parses nothing, prints nothing: computes the output of one invocation.
pub fn execute(cli: &Cli) -> Result<Output, CliError> {
    match cli.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
            pool.install(|| dispatch(cli))
        }
        None => dispatch(cli),
    }
}

/// Executes and writes the output; the error carries the exit code.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let out = execute(cli)?;
    for n in &out.notes {
        eprintln!("{n}");
    }
    match &cli.out {
        Some(p) => fs::write(p, &out.text).map_err(|e| CliError::Output(format!("{}: {e}", p.display())))?,
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(out.text.as_bytes())
                .and_then(|_| so.flush())
                .map_err(|e| CliError::Output(e.to_string()))?;
        }
    }
    if cli.strict && !out.infeasible.is_empty() {
        return Err(CliError::Strict(out.infeasible.join("; ")));
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<Output, CliError> {
    let seed = cli.seed;
    match &cli.command {
        Command::Keyrate(a) => keyrate(a, cli.format.unwrap_or(Format::Json)),
        Command::Bounds(a) => bounds(a, cli.format.unwrap_or(Format::Json)),
        Command::Sweep(a) => sweep_cmd(a, cli.format.unwrap_or(Format::Csv)),
        Command::Simulate(a) => simulate(a, cli.format.unwrap_or(Format::Csv), seed.unwrap_or(0)),
        Command::VerifySampling(a) => verify(a, cli.format.unwrap_or(Format::Csv), seed.unwrap_or(0)),
        Command::MubTable(a) => mub_table(a, cli.format),
    }
}

fn infeasible_note(r: &KeyRateResult, what: String) -> Option<String> {
    r.has(Flag::Infeasible).then(|| format!("{what}: statistics infeasible (negative weight {})", r.negativity))
}

fn keyrate(a: &KeyrateArgs, format: Format) -> Result<Output, CliError> {
    let d = dim(a.d)?;
    let qhat = a.noise.thresholds(d)?;
    let targets = a.targets.targets()?;
    let leak = a.leak.model()?;
    let opts = EvalOptions {
        split: a.c,
        beta: a.beta,
        ..EvalOptions::default()
    };
    let r = match a.m {
        Some(m) => evaluate_flagged(&qhat, a.total, m, &targets, &leak, &opts)?,
        None => optimize_m(&qhat, a.total, &targets, &leak, &opts)?,
    };
    let rec = KeyRateRecord::from_result(&r);
    let text = match format {
        Format::Json => json(&rec)?,
        Format::Csv => {
            let mut t = Table::new(KeyRateRecord::HEADER);
            t.push(rec.csv_row());
            t.to_csv()?
        }
    };
    Ok(Output {
        text,
        infeasible: infeasible_note(&r, format!("N={} m={}", r.total, r.m)).into_iter().collect(),
        notes: Vec::new(),
    })
}

fn bounds(a: &BoundsArgs, format: Format) -> Result<Output, CliError> {
    let d = dim(a.d)?;
    let targets = a.targets.targets()?;
    let geom = SamplingGeometry::new(a.total, a.m, d)?;
    let beta = a.beta.unwrap_or_else(|| default_beta(d));
    let split = a.c.unwrap_or_else(|| c_gamma(&geom, beta));
    let report = match a.delta {
        Some(delta) => verify_at_delta(&targets, &geom, split, beta, delta)?,
        None => verify_consistency(&targets, &geom, split, beta)?,
    };
    let delta = a.delta.unwrap_or(report.delta_min.delta);
    let basic = basic_sampling_error(delta, a.m, a.total).ok().map(|p| p.ln());
    let rec = BoundsRecord::new(a.d, a.total, a.m, a.targets.eps, a.targets.eps_sec, delta, basic, &report);
    let text = match format {
        Format::Json => json(&rec)?,
        Format::Csv => {
            let mut t = Table::new(BoundsRecord::HEADER);
            t.push(rec.csv_row());
            t.to_csv()?
        }
    };
    Ok(Output::plain(text))
}

fn sweep_cmd(a: &SweepArgs, format: Format) -> Result<Output, CliError> {
    let cfg: config::ScenarioConfig = config::load(&a.config)?;
    let base = a.config.parent().unwrap_or(Path::new("."));
    let out = sweep::run_sweep(&cfg, base)?;
    let text = match format {
        Format::Csv => out.table().to_csv()?,
        Format::Json => json(&out)?,
    };
    let mut notes = Vec::new();
    if let Some(inc) = &out.nonmonotone {
        if inc.is_empty() {
            notes.push("non-monotonicity: none (rate never increases with noise)".to_string());
        }
        for i in inc {
            notes.push(format!(
                "non-monotonicity: rate increases on Q in [{}, {}]: {} -> {}",
                i.from, i.to, i.rate_from, i.rate_to
            ));
        }
    }
    let infeasible = out
        .rows
        .iter()
        .filter(|r| r.infeasible())
        .map(|r| format!("{}={}: statistics infeasible", out.axis, r.axis))
        .collect();
    Ok(Output { text, infeasible, notes })
}

#[derive(Debug, Serialize)]
struct SimulationRecord {
    seed: u64,
    aborted: bool,
    reasons: Vec<String>,
    basis_sizes: Vec<u64>,
    /// `frequencies[j][c-1] = w(q^j_c)`.
    frequencies: Vec<Vec<f64>>,
    ell: u64,
    rate: f64,
    flags: Vec<&'static str>,
}

impl SimulationRecord {
    fn new(run: &SimulationRun) -> Self {
        let obs = &run.observed;
        let d = obs.dimension().get();
        SimulationRecord {
            seed: run.seed,
            aborted: run.aborted,
            reasons: run.reasons.iter().map(ToString::to_string).collect(),
            basis_sizes: (0..=d).map(|j| obs.basis_size(j)).collect(),
            frequencies: (0..=d).map(|j| (1..d).map(|c| obs.frequency(j, c)).collect()).collect(),
            ell: run.result.as_ref().map_or(0, |r| r.ell),
            rate: run.result.as_ref().map_or(0.0, |r| r.rate),
            flags: run.result.as_ref().map(|r| r.flag_names()).unwrap_or_default(),
        }
    }
}

fn simulate(a: &SimulateArgs, format: Format, seed: u64) -> Result<Output, CliError> {
    let d = dim(a.d)?;
    let channel = match &a.channel {
        ChannelArg::Depolarizing(q) => ChannelModel::depolarizing(d, *q)?,
        ChannelArg::Lambda(p) => {
            let w = config::load::<config::LambdaFile>(p)?.weights()?;
            if w.dimension() != d {
                return Err(CliError::Config(format!("{}: lambda has a different d", p.display())));
            }
            ChannelModel::from_weights(&w)?
        }
    };
    let thresholds = match a.thresholds.parse::<NoiseArg>() {
        Ok(n) => n.thresholds(d)?,
        Err(_) => NoiseArg::Matrix(PathBuf::from(&a.thresholds)).thresholds(d)?,
    };
    let setup = ProtocolSetup {
        total: a.total,
        m: a.m,
        thresholds,
        targets: a.targets.targets()?,
        leak: a.leak.model()?,
        options: EvalOptions::default(),
    };
    let runs = (0..a.repeats)
        .map(|r| run_protocol(&channel, &setup, seed.wrapping_add(r)))
        .collect::<Result<Vec<_>, _>>()?;
    let records: Vec<SimulationRecord> = runs.iter().map(SimulationRecord::new).collect();
    let text = match format {
        Format::Json => json(&records)?,
        Format::Csv => {
            let dd = d.get();
            let mut header = vec!["seed".to_string(), "aborted".into(), "reasons".into()];
            header.extend((0..=dd).map(|j| format!("m_{j}")));
            for j in 0..=dd {
                header.extend((1..dd).map(|c| format!("w_{j}_{c}")));
            }
            header.extend(["ell".to_string(), "rate".into()]);
            let mut t = Table::new(header);
            for r in &records {
                let mut row = vec![r.seed.to_string(), r.aborted.to_string(), r.reasons.join(";")];
                row.extend(r.basis_sizes.iter().map(u64::to_string));
                row.extend(r.frequencies.iter().flatten().map(|&x| num(x)));
                row.extend([r.ell.to_string(), num(r.rate)]);
                t.push(row);
            }
            t.to_csv()?
        }
    };
    let infeasible = runs
        .iter()
        .filter_map(|r| r.result.as_ref().and_then(|k| infeasible_note(k, format!("seed {}", r.seed))))
        .collect();
    Ok(Output {
        text,
        infeasible,
        notes: Vec::new(),
    })
}

#[derive(Debug, Serialize)]
struct DominanceRecord {
    delta: f64,
    j: Option<usize>,
    c: Option<usize>,
    trials: u64,
    failures: u64,
    upper99: f64,
    analytic_bound_log: f64,
    dominated: bool,
}

fn verify(a: &VerifyArgs, format: Format, seed: u64) -> Result<Output, CliError> {
    let d = dim(a.d)?;
    let m = a.m.unwrap_or(a.total / 2);
    let word = adversarial_word(a.family.into(), d, a.total, seed);
    let settings = DominanceSettings {
        trials: a.trials,
        seed,
        level: a.level,
        split: a.c,
        beta: a.beta,
    };
    let rows = check_dominance(&word, m, &a.deltas, &settings)?;
    let records: Vec<DominanceRecord> = rows
        .iter()
        .map(|r| DominanceRecord {
            delta: r.delta,
            j: r.cell.map(|c| c.0),
            c: r.cell.map(|c| c.1),
            trials: r.report.trials,
            failures: r.report.failures,
            upper99: r.report.upper,
            analytic_bound_log: r.analytic.ln(),
            dominated: r.dominated(),
        })
        .collect();
    let text = match format {
        Format::Json => json(&records)?,
        Format::Csv => {
            let mut t = Table::new(["delta", "j", "c", "trials", "failures", "upper99", "analytic_bound_log", "dominated"]);
            let opt = |x: Option<usize>| x.map_or_else(|| "all".to_string(), |v| v.to_string());
            for r in &records {
                t.push(vec![
                    num(r.delta),
                    opt(r.j),
                    opt(r.c),
                    r.trials.to_string(),
                    r.failures.to_string(),
                    num(r.upper99),
                    num(r.analytic_bound_log),
                    r.dominated.to_string(),
                ]);
            }
            t.to_csv()?
        }
    };
    let informative = rows.iter().filter(|r| !r.vacuous()).count();
    let violated = rows.iter().filter(|r| !r.dominated()).count();
    Ok(Output {
        text,
        infeasible: Vec::new(),
        notes: vec![format!(
            "{} rows, {informative} with a non-vacuous bound, {violated} not dominated",
            rows.len()
        )],
    })
}

#[derive(Debug, Serialize)]
struct ClassCell {
    j: usize,
    c: usize,
    labels: Vec<String>,
    oracle_match: Option<bool>,
    oracle_residual: Option<f64>,
}

fn mub_table(a: &MubTableArgs, format: Option<Format>) -> Result<Output, CliError> {
    let d = dim(a.d)?;
    let closed = ClassTable::closed_form(d);
    let cert = if a.oracle {
        if d.get() > ORACLE_MAX_DIMENSION {
            return Err(CliError::Config(format!("--oracle supports d <= {ORACLE_MAX_DIMENSION}")));
        }
        Some(build_mub_bases(d)?.certify()?)
    } else {
        None
    };
    let mut cells = Vec::new();
    for j in 0..=d.get() {
        for c in 0..d.get() {
            let set = closed.outcome_set(j, c);
            let found = cert
                .as_ref()
                .and_then(|k| k.cells.iter().find(|x| x.basis == j && x.symbol == c));
            cells.push(ClassCell {
                j,
                c,
                labels: set.iter().map(ToString::to_string).collect(),
                oracle_match: found.map(|x| x.oracle_set == x.closed_form),
                oracle_residual: found.map(|x| x.residual),
            });
        }
    }
    let text = match format {
        Some(Format::Json) => json(&cells)?,
        Some(Format::Csv) => {
            let mut t = Table::new(["j", "c", "labels", "oracle_match", "oracle_residual"]);
            for x in &cells {
                t.push(vec![
                    x.j.to_string(),
                    x.c.to_string(),
                    x.labels.join(" "),
                    x.oracle_match.map(|b| b.to_string()).unwrap_or_default(),
                    x.oracle_residual.map(num).unwrap_or_default(),
                ]);
            }
            t.to_csv()?
        }
        None => {
            let mut s = format!("d = {}\n", d.get());
            for x in &cells {
                if x.c == 0 {
                    s.push_str(&format!("basis {}\n", x.j));
                }
                s.push_str(&format!("  c={}: {}", x.c, x.labels.join(" ")));
                if let Some(ok) = x.oracle_match {
                    s.push_str(if ok { "  [oracle ok]" } else { "  [oracle MISMATCH]" });
                }
                s.push('\n');
            }
            if let Some(k) = &cert {
                s.push_str(&format!(
                    "oracle: eigen residual {:e}, orthonormality {:e}, unbiasedness {:e}, completeness {:e}, determinism {:e}, mismatches {}\n",
                    k.eigen_residual, k.orthonormality, k.unbiasedness, k.completeness, k.determinism, k.mismatches
                ));
            }
            s
        }
    };
    Ok(Output::plain(text))
}
