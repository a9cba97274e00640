//! Command-line front end. Every subcommand is a pure function of its flags:
//! the bytes written depend only on the arguments and `--seed`.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bounds::{
    approx_recovery_threshold, bernoulli_fano_bound, bernoulli_noiseless_bound, gaussian_single_item_bound,
    gaussian_subset_bound, mi_gaussian_bernoulli, mi_noiseless_bernoulli, noiseless_threshold, ApproxVariant,
    BernoulliChannel, BoundReport,
};
use crate::decode::{exact_pe_oracle, OracleResult};
use crate::error::Error;
use crate::experiments::{
    estimate_pe, figure1_data, sig6, sweep_n, write_figure1_csv, write_sweep_csv, Decoder, DesignMode,
    ExperimentConfig, PeEstimate, SweepResult,
};
use crate::infotheory::GeniePattern;
use crate::model::{bernoulli_design, round_proportions, NoiseModel, Proportions, TestDesign};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_GUARD: i32 = 3;
pub const EXIT_CONVERGENCE: i32 = 4;

/// Largest population for which `bounds` evaluates the pattern-scanning Fano bound.
const FANO_SCAN_MAX_P: usize = 10_000;

#[derive(Debug, Parser)]
#[command(name = "pooled-data", version, about = "Bounds, exact oracles and Monte Carlo experiments for pooled data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate every bound that applies to the given parameters.
    Bounds(BoundsArgs),
    /// Estimate the error probability at a single number of tests.
    Simulate(SimArgs),
    /// Estimate the error probability along a range of test counts.
    Sweep(SimArgs),
    /// Exact noiseless error probability by full enumeration.
    Oracle(OracleArgs),
    /// Table of f(r) for uniform, two-heavy-label and random proportions.
    Figure1(FigureArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseKind {
    None,
    Gaussian,
    Clipped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DecoderKind {
    Ml,
    MostCommon,
}

#[derive(Debug, Args)]
pub struct Output {
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Write to FILE instead of standard output.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Proportions: comma-separated values, `uniform:D` or `fig1`.
    #[arg(long, value_parser = parse_pi)]
    pub pi: Proportions,
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub qmax: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long, value_parser = parse_pi)]
    pub pi: Proportions,
    #[arg(long)]
    pub p: usize,
    /// Number of tests: `N`, or an inclusive range `A:B` for sweeps.
    #[arg(long, value_parser = parse_n)]
    pub n: NRange,
    #[arg(long, default_value_t = 0.5)]
    pub q: f64,
    #[arg(long, value_enum, default_value = "none")]
    pub noise: NoiseKind,
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub qmax: usize,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses every core. Output does not depend on it.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// `bernoulli` or explicit rows such as `rows:1100,0011`.
    #[arg(long, default_value = "bernoulli", value_parser = parse_design)]
    pub design: DesignSpec,
    #[arg(long, value_enum, default_value = "ml")]
    pub decoder: DecoderKind,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, value_parser = parse_pi)]
    pub pi: Proportions,
    #[arg(long)]
    pub p: usize,
    #[arg(long, value_parser = parse_design)]
    pub design: DesignSpec,
    /// Number of tests when `--design bernoulli`.
    #[arg(long, default_value_t = 0)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5)]
    pub q: f64,
    #[arg(long, default_value_t = 0)]
    pub qmax: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct FigureArgs {
    #[arg(long, default_value_t = 10)]
    pub d: usize,
    /// Number of random proportion vectors.
    #[arg(long, default_value_t = 0)]
    pub random: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NRange {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DesignSpec {
    Bernoulli,
    Rows(TestDesign),
}

pub fn parse_pi(s: &str) -> Result<Proportions, String> {
    let s = s.trim();
    if s == "fig1" {
        return Ok(Proportions::fig1());
    }
    if let Some(d) = s.strip_prefix("uniform:") {
        let d: usize = d.parse().map_err(|_| format!("bad label count in `{s}`"))?;
        return Proportions::uniform(d).map_err(|e| e.to_string());
    }
    let v = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| format!("`{x}` is not a number")))
        .collect::<Result<Vec<_>, _>>()?;
    Proportions::new(v).map_err(|e| e.to_string())
}

pub fn parse_n(s: &str) -> Result<NRange, String> {
    let num = |x: &str| x.trim().parse::<usize>().map_err(|_| format!("`{x}` is not a test count"));
    match s.split_once(':') {
        Some((a, b)) => {
            let (start, end) = (num(a)?, num(b)?);
            if start > end {
                return Err(format!("empty range `{s}`"));
            }
            Ok(NRange { start, end })
        }
        None => {
            let n = num(s)?;
            Ok(NRange { start: n, end: n })
        }
    }
}

pub fn parse_design(s: &str) -> Result<DesignSpec, String> {
    if s == "bernoulli" {
        return Ok(DesignSpec::Bernoulli);
    }
    let rows = s
        .strip_prefix("rows:")
        .ok_or_else(|| format!("design must be `bernoulli` or `rows:...`, got `{s}`"))?;
    TestDesign::parse_rows(rows).map(DesignSpec::Rows).map_err(|e| e.to_string())
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Model(Error),
    Io(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Model(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) => f.write_str(m),
            CliError::Model(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_FAILURE,
            CliError::Model(e) => match e {
                Error::InvalidProportions(_)
                | Error::InvalidParameter(_)
                | Error::LengthMismatch { .. }
                | Error::Regime(_) => EXIT_USAGE,
                Error::Guard { .. } => EXIT_GUARD,
                Error::Quadrature(_) => EXIT_CONVERGENCE,
                Error::Inconsistent => EXIT_FAILURE,
            },
        }
    }
}

/// One line of `bounds` output: an evaluated bound or the reason it does not apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundEntry {
    Report(BoundReport),
    Failed { name: String, error: String },
}

fn entry(name: &str, r: crate::error::Result<BoundReport>) -> BoundEntry {
    match r {
        Ok(rep) => BoundEntry::Report(rep),
        Err(e) => BoundEntry::Failed {
            name: name.into(),
            error: e.to_string(),
        },
    }
}

fn noise_model(kind: NoiseKind, sigma2: Option<f64>) -> Result<NoiseModel, CliError> {
    let need = || sigma2.ok_or_else(|| CliError::Usage("this noise model needs --sigma2".into()));
    let noise = match kind {
        NoiseKind::None => NoiseModel::Noiseless,
        NoiseKind::Gaussian => NoiseModel::Gaussian { sigma2: need()? },
        NoiseKind::Clipped => NoiseModel::ClippedGaussian { sigma2: need()? },
    };
    noise.validate()?;
    Ok(noise)
}

pub fn cmd_bounds(a: &BoundsArgs) -> Vec<BoundEntry> {
    let mut out = vec![entry("noiseless_threshold", noiseless_threshold(&a.pi, a.p))];
    let counts = round_proportions(&a.pi, a.p);
    if let Some(s2) = a.sigma2 {
        out.push(entry("gaussian_subset", gaussian_subset_bound(&a.pi, a.p, s2, a.delta)));
        let first = counts.as_ref().ok().map(|c| c.counts()[0]);
        out.push(entry("gaussian_single_item", gaussian_single_item_bound(a.p, s2, a.delta, first)));
    }
    if let Some(q) = a.q {
        out.push(entry("bernoulli_noiseless", bernoulli_noiseless_bound(&a.pi, a.p, q, a.delta)));
        let channels = std::iter::once(("bernoulli_fano_noiseless", BernoulliChannel::Noiseless)).chain(
            a.sigma2.map(|sigma2| ("bernoulli_fano_gaussian", BernoulliChannel::Gaussian { sigma2 })),
        );
        for (name, ch) in channels {
            let r = if a.p > FANO_SCAN_MAX_P {
                Err(Error::Guard {
                    work: a.p as f64,
                    limit: FANO_SCAN_MAX_P as f64,
                })
            } else {
                counts.clone().and_then(|c| bernoulli_fano_bound(&c, q, ch, a.delta))
            };
            out.push(entry(name, r));
        }
    }
    if let Some(qmax) = a.qmax {
        out.push(entry(
            "approx_noiseless",
            approx_recovery_threshold(&a.pi, a.p, qmax, ApproxVariant::Noiseless { eta: 0.0 }),
        ));
        if let Some(q) = a.q {
            let mi = counts.clone().and_then(|c| {
                let full = GeniePattern::full(c);
                match a.sigma2 {
                    Some(s2) => mi_gaussian_bernoulli(&full, q, s2, a.p),
                    None => mi_noiseless_bernoulli(&full, q),
                }
            });
            let r = mi.and_then(|mi| {
                approx_recovery_threshold(
                    &a.pi,
                    a.p,
                    qmax,
                    ApproxVariant::Fano {
                        mi_per_test: mi,
                        delta: a.delta,
                    },
                )
            });
            out.push(entry("approx_fano", r));
        }
    }
    out
}

fn sim_config(a: &SimArgs, n: usize) -> Result<ExperimentConfig, CliError> {
    let noise = noise_model(a.noise, a.sigma2)?;
    let design = match &a.design {
        DesignSpec::Bernoulli => DesignMode::Bernoulli,
        DesignSpec::Rows(x) => DesignMode::Fixed(x.clone()),
    };
    let n = match &design {
        DesignMode::Fixed(x) => x.n(),
        DesignMode::Bernoulli => n,
    };
    let cfg = ExperimentConfig {
        qmax: a.qmax,
        design,
        decoder: match a.decoder {
            DecoderKind::Ml => Decoder::Ml,
            DecoderKind::MostCommon => Decoder::MostCommonLabel,
        },
        ..ExperimentConfig::new(a.pi.clone(), a.p, n, a.q, noise, a.trials, a.seed)
    };
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateOutput {
    pub config: ExperimentConfig,
    pub estimate: PeEstimate,
}

pub fn cmd_simulate(a: &SimArgs) -> Result<SimulateOutput, CliError> {
    if a.n.start != a.n.end {
        return Err(CliError::Usage("simulate takes a single --n; use sweep for ranges".into()));
    }
    let config = sim_config(a, a.n.start)?;
    let estimate = estimate_pe(&config, a.threads)?;
    Ok(SimulateOutput { config, estimate })
}

pub fn cmd_sweep(a: &SimArgs) -> Result<SweepResult, CliError> {
    if matches!(a.design, DesignSpec::Rows(_)) {
        return Err(CliError::Usage("sweep needs --design bernoulli".into()));
    }
    let config = sim_config(a, a.n.start)?;
    let grid: Vec<usize> = (a.n.start..=a.n.end).collect();
    Ok(sweep_n(&config, &grid, a.threads)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleOutput {
    pub counts: Vec<usize>,
    pub design: TestDesign,
    pub qmax: usize,
    #[serde(flatten)]
    pub result: OracleResult,
}

pub fn cmd_oracle(a: &OracleArgs) -> Result<OracleOutput, CliError> {
    let counts = round_proportions(&a.pi, a.p)?;
    let design = match &a.design {
        DesignSpec::Rows(x) => x.clone(),
        DesignSpec::Bernoulli => bernoulli_design(a.n, a.p, a.q, a.seed)?,
    };
    let result = exact_pe_oracle(&design, &counts, a.qmax)?;
    Ok(OracleOutput {
        counts: counts.counts().to_vec(),
        design,
        qmax: a.qmax,
        result,
    })
}

fn to_json<T: Serialize>(v: &T) -> Result<Vec<u8>, CliError> {
    let mut s = serde_json::to_vec_pretty(v).map_err(|e| CliError::Io(e.to_string()))?;
    s.push(b'\n');
    Ok(s)
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| CliError::Io(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

/// Runs a parsed invocation and returns the bytes it would write.
pub fn execute(cli: &Cli) -> Result<Vec<u8>, CliError> {
    match &cli.command {
        Command::Bounds(a) => {
            let entries = cmd_bounds(a);
            match a.output.format {
                Format::Json => to_json(&entries),
                Format::Csv => {
                    let rows = entries
                        .iter()
                        .map(|e| match e {
                            BoundEntry::Report(r) => vec![
                                r.name.clone(),
                                sig6(r.n_bound),
                                r.argmax.as_ref().map(|a| json!(a).to_string()).unwrap_or_default(),
                                r.vacuous.to_string(),
                                r.regime_note.clone(),
                            ],
                            BoundEntry::Failed { name, error } => {
                                vec![name.clone(), String::new(), String::new(), String::new(), error.clone()]
                            }
                        })
                        .collect();
                    csv_bytes(&["name", "n_bound", "argmax", "vacuous", "note"], rows)
                }
            }
        }
        Command::Simulate(a) => {
            let out = cmd_simulate(a)?;
            match a.output.format {
                Format::Json => to_json(&out),
                Format::Csv => {
                    let e = &out.estimate;
                    csv_bytes(
                        &["n", "trials", "failures", "pe_hat", "ci_low", "ci_high"],
                        vec![vec![
                            out.config.n.to_string(),
                            e.trials.to_string(),
                            e.failures.to_string(),
                            sig6(e.pe_hat),
                            sig6(e.ci_low),
                            sig6(e.ci_high),
                        ]],
                    )
                }
            }
        }
        Command::Sweep(a) => {
            let out = cmd_sweep(a)?;
            match a.output.format {
                Format::Json => to_json(&out),
                Format::Csv => {
                    let mut buf = Vec::new();
                    write_sweep_csv(&out, &mut buf)?;
                    Ok(buf)
                }
            }
        }
        Command::Oracle(a) => {
            let out = cmd_oracle(a)?;
            match a.output.format {
                Format::Json => to_json(&out),
                Format::Csv => csv_bytes(
                    &["pe_exact", "pe_unique", "candidates_total"],
                    vec![vec![
                        sig6(out.result.pe_exact),
                        sig6(out.result.pe_unique),
                        out.result.candidates_total.to_string(),
                    ]],
                ),
            }
        }
        Command::Figure1(a) => {
            let rows = figure1_data(a.d, a.random, a.seed)?;
            match a.output.format {
                Format::Json => to_json(&rows),
                Format::Csv => {
                    let mut buf = Vec::new();
                    write_figure1_csv(&rows, &mut buf)?;
                    Ok(buf)
                }
            }
        }
    }
}

fn output_target(cli: &Cli) -> Option<&PathBuf> {
    match &cli.command {
        Command::Bounds(a) => a.output.out.as_ref(),
        Command::Simulate(a) | Command::Sweep(a) => a.output.out.as_ref(),
        Command::Oracle(a) => a.output.out.as_ref(),
        Command::Figure1(a) => a.output.out.as_ref(),
    }
}

/// Parses `args`, runs the command, writes the result and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let bytes = match execute(&cli) {
        Ok(b) => b,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return e.exit_code();
        }
    };
    let written = match output_target(&cli) {
        Some(path) => std::fs::write(path, &bytes).map_err(|e| format!("{}: {e}", path.display())),
        None => stdout.write_all(&bytes).map_err(|e| e.to_string()),
    };
    match written {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_FAILURE
        }
    }
}
