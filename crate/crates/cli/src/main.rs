use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ivcheck::mlik::{validity_ratio, Estimator, EvidenceConfig};
use ivcheck::pipeline::{
    emit_decision_csv, emit_report, load_dataset, necessary_test, run_csv, BinarizeRule, ColumnMap, CsvOptions,
    PipelineConfig,
};
use ivcheck::respvar::{SamplingConstraint, ViolationClass};
use ivcheck::simlab::{
    acceptance_subgrid, full_grid, run_grid_experiment, run_palmer, run_power_experiment, write_grid_csv,
    write_manifest, write_palmer_csv, write_power_csv, GridConfig, Link, Manifest, PowerConfig, PALMER_SIZE,
};
use ivcheck::{build_contingency, Error, MissingPolicy};

const EXIT_INPUT: u8 = 2;
const EXIT_ESTIMATOR: u8 = 3;

#[derive(Parser)]
#[command(name = "ivcheck", version, about = "Test whether a binary instrument is valid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the necessary test only.
    Nectest(DataArgs),
    /// Compute the Validity-Ratio without the necessary test.
    Ratio {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        ratio: RatioArgs,
    },
    /// Necessary test, then Validity-Ratio, then the decision rule.
    Nps {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        ratio: RatioArgs,
    },
    /// Run a simulation study.
    #[command(subcommand)]
    Simulate(Simulate),
}

#[derive(Subcommand)]
enum Simulate {
    /// Necessary-test power against sampled invalid models.
    Power(PowerArgs),
    /// The parametric binary grid.
    Grid(GridArgs),
    /// The three Palmer datasets.
    Palmer(PalmerArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Output {
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV with a header row.
    input: PathBuf,
    #[arg(long, default_value = "z")]
    z: String,
    #[arg(long, default_value = "x")]
    x: String,
    #[arg(long, default_value = "y")]
    y: String,
    /// One rule for all of z, x, y, or three comma-separated rules.
    #[arg(long, default_value = "none")]
    binarize: String,
    /// Covariates to partial out of z, x and y.
    #[arg(long, value_delimiter = ',')]
    covariates: Vec<String>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Also run the monotonicity inequalities.
    #[arg(long)]
    monotonicity: bool,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    /// Drop rows with missing values instead of failing.
    #[arg(long)]
    lenient: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct EvidenceArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Parallel AIS chains.
    #[arg(long)]
    mc_chains: Option<usize>,
    /// AIS temperature rungs for tables of up to 2000 rows.
    #[arg(long)]
    ais_rungs: Option<usize>,
    /// Keep the ladder length fixed instead of growing it with the table size.
    #[arg(long)]
    fixed_rungs: bool,
    /// Use plain prior Monte Carlo with this many draws instead of AIS.
    #[arg(long)]
    prior_mc: Option<u64>,
    /// Also integrate the unrestricted exclusion-violating class.
    #[arg(long)]
    excl_full: bool,
}

impl EvidenceArgs {
    fn config(&self) -> EvidenceConfig {
        let mut cfg = EvidenceConfig {
            seed: self.seed,
            excl_full: self.excl_full,
            ..Default::default()
        };
        if let Some(c) = self.mc_chains {
            cfg.ais.chains = c;
        }
        cfg.ais.scale_rungs = !self.fixed_rungs;
        if let Some(r) = self.ais_rungs {
            cfg.ais.rungs = r;
        }
        if let Some(n) = self.prior_mc {
            cfg.estimator = Estimator::PriorMc;
            cfg.prior_mc_samples = n;
        }
        cfg
    }
}

#[derive(Args)]
struct RatioArgs {
    /// Decision threshold; must exceed 1.
    #[arg(long)]
    gamma: f64,
    #[arg(long, value_delimiter = ',', default_value = "excl,air,both")]
    violations: Vec<ViolationClass>,
    /// Prior odds of a valid over an invalid instrument.
    #[arg(long, default_value_t = 1.0)]
    prior_ratio: f64,
    #[command(flatten)]
    evidence: EvidenceArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConstraintKind {
    None,
    NondecreasingZy,
    NondecreasingZyXy,
    MiThreshold,
    FixedConditional,
}

#[derive(Args)]
struct PowerArgs {
    #[arg(long, default_value = "excl")]
    class: ViolationClass,
    #[arg(long, value_enum, default_value = "none")]
    constraint: ConstraintKind,
    /// Mass on nondecreasing functions for the nondecreasing constraints.
    #[arg(long, default_value_t = 1.0)]
    nd_alpha: f64,
    /// Mutual-information threshold in nats.
    #[arg(long, default_value_t = 0.1)]
    tau: f64,
    /// Conditional probability for the fixed-conditional constraint.
    #[arg(long, default_value_t = 0.5)]
    value: f64,
    #[arg(long, default_value_t = 200)]
    models: usize,
    #[arg(long, default_value_t = 10)]
    bins: usize,
    /// Skip the monotonicity inequalities.
    #[arg(long)]
    no_monotonicity: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridSet {
    Full,
    Acceptance,
}

#[derive(Clone, Copy, ValueEnum)]
enum LinkArg {
    NoisyOr,
    Additive,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, value_enum, default_value = "acceptance")]
    points: GridSet,
    #[arg(long, default_value_t = 50_000)]
    size: usize,
    #[arg(long, value_enum, default_value = "noisy-or")]
    link: LinkArg,
    #[arg(long, default_value_t = 10.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[command(flatten)]
    evidence: EvidenceArgs,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct PalmerArgs {
    #[arg(long, default_value_t = PALMER_SIZE)]
    size: usize,
    #[arg(long, default_value_t = 10.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[command(flatten)]
    evidence: EvidenceArgs,
    #[command(flatten)]
    output: Output,
}

enum Failure {
    Input(Error),
    Estimator(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_estimator_failure() {
            Failure::Estimator(e.to_string())
        } else {
            Failure::Input(e)
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(Error::Io(e))
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn parse_rules(s: &str) -> Result<[BinarizeRule; 3], Error> {
    let rules: Vec<BinarizeRule> = s.split(',').map(str::parse).collect::<Result<_, _>>()?;
    match rules.as_slice() {
        [r] => Ok([*r; 3]),
        [a, b, c] => Ok([*a, *b, *c]),
        _ => Err(Error::InvalidParameter("--binarize takes one rule or three".into())),
    }
}

fn pipeline_config(data: &DataArgs, ratio: Option<&RatioArgs>) -> Result<PipelineConfig, Error> {
    if !data.delimiter.is_ascii() {
        return Err(Error::InvalidParameter(
            "delimiter must be a single ASCII character".into(),
        ));
    }
    let mut cfg = PipelineConfig::new(ratio.map_or(f64::INFINITY, |r| r.gamma));
    cfg.columns = ColumnMap {
        z: data.z.clone(),
        x: data.x.clone(),
        y: data.y.clone(),
        covariates: data.covariates.clone(),
    };
    cfg.binarize = parse_rules(&data.binarize)?;
    cfg.alpha = data.alpha;
    cfg.monotonicity = data.monotonicity;
    cfg.csv = CsvOptions {
        delimiter: data.delimiter as u8,
        policy: if data.lenient {
            MissingPolicy::Lenient
        } else {
            MissingPolicy::Strict
        },
        ..Default::default()
    };
    match ratio {
        Some(r) => {
            cfg.violations = r.violations.clone();
            cfg.prior_ratio = r.prior_ratio;
            cfg.evidence = r.evidence.config();
        }
        None => {
            cfg.gamma = 2.0;
            cfg.violations.clear();
        }
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::Nectest(data) => {
            let cfg = pipeline_config(&data, None)?;
            let (ds, _) = load_dataset(&data.input, &cfg)?;
            let nt = necessary_test(&ds, &cfg)?;
            let mut w = sink(data.output.out.as_deref())?;
            match data.output.format {
                Format::Json => emit_report(&nt, &mut w)?,
                Format::Csv => writeln!(w, "necessary_test_passed\n{}", nt.passed)?,
            }
            w.flush()?;
            Ok(false)
        }
        Command::Ratio { data, ratio } => {
            let cfg = pipeline_config(&data, Some(&ratio))?;
            let (ds, _) = load_dataset(&data.input, &cfg)?;
            let report = validity_ratio(
                &build_contingency(&ds),
                &cfg.violations,
                cfg.prior_ratio,
                cfg.gamma,
                &cfg.evidence,
            )?;
            let mut w = sink(data.output.out.as_deref())?;
            match data.output.format {
                Format::Json => emit_report(&report, &mut w)?,
                Format::Csv => writeln!(
                    w,
                    "log_validity_ratio,decision\n{},{}",
                    report.log_validity_ratio.map(|v| v.to_string()).unwrap_or_default(),
                    serde_json::to_value(report.decision)
                        .map_err(Error::from)?
                        .as_str()
                        .unwrap_or_default()
                )?,
            }
            w.flush()?;
            Ok(report.estimator_failed())
        }
        Command::Nps { data, ratio } => {
            let cfg = pipeline_config(&data, Some(&ratio))?;
            let d = run_csv(&data.input, &cfg)?;
            let mut w = sink(data.output.out.as_deref())?;
            match data.output.format {
                Format::Json => emit_report(&d, &mut w)?,
                Format::Csv => emit_decision_csv(&d, &mut w)?,
            }
            w.flush()?;
            Ok(d.estimator_failed())
        }
        Command::Simulate(sim) => simulate(sim),
    }
}

fn simulate(sim: Simulate) -> Result<bool, Failure> {
    match sim {
        Simulate::Power(a) => {
            let constraint = match a.constraint {
                ConstraintKind::None => SamplingConstraint::None,
                ConstraintKind::NondecreasingZy => SamplingConstraint::NondecreasingZy { alpha: a.nd_alpha },
                ConstraintKind::NondecreasingZyXy => SamplingConstraint::NondecreasingZyXy { alpha: a.nd_alpha },
                ConstraintKind::MiThreshold => SamplingConstraint::MiThreshold { tau: a.tau },
                ConstraintKind::FixedConditional => SamplingConstraint::FixedConditional { v: a.value },
            };
            let mut cfg = PowerConfig::new(a.class, constraint, a.models);
            cfg.bins = a.bins;
            cfg.monotonicity = !a.no_monotonicity;
            let curve = run_power_experiment(&cfg, a.seed)?;
            write_outputs(&a.output, "power", a.seed, &cfg, &curve, |w| {
                write_power_csv(std::slice::from_ref(&curve), w)
            })?;
            Ok(false)
        }
        Simulate::Grid(a) => {
            let points = match a.points {
                GridSet::Full => full_grid(),
                GridSet::Acceptance => acceptance_subgrid(),
            };
            let mut cfg = GridConfig::new(points, a.size);
            cfg.link = match a.link {
                LinkArg::NoisyOr => Link::NoisyOr,
                LinkArg::Additive => Link::Additive,
            };
            cfg.gamma = a.gamma;
            cfg.alpha = a.alpha;
            cfg.evidence = a.evidence.config();
            let seed = a.evidence.seed;
            let results = run_grid_experiment(&cfg, seed)?;
            write_outputs(&a.output, "grid", seed, &cfg, &results, |w| write_grid_csv(&results, w))?;
            Ok(results.iter().any(|r| r.log_validity_ratio.is_none()))
        }
        Simulate::Palmer(a) => {
            let ev = a.evidence.config();
            let results = run_palmer(a.size, ev.seed, a.alpha, a.gamma, &ev)?;
            let config = serde_json::json!({ "size": a.size, "gamma": a.gamma, "alpha": a.alpha, "evidence": ev });
            write_outputs(&a.output, "palmer", ev.seed, &config, &results, |w| {
                write_palmer_csv(&results, w)
            })?;
            Ok(results.iter().any(|r| r.report.estimator_failed()))
        }
    }
}

/// JSON writes the full result. CSV writes the tidy table and, when writing
/// to a file, a manifest beside it.
fn write_outputs<C: serde::Serialize, R: serde::Serialize>(
    out: &Output,
    name: &str,
    seed: u64,
    config: &C,
    result: &R,
    csv: impl FnOnce(&mut dyn Write) -> ivcheck::Result<()>,
) -> Result<(), Failure> {
    let mut w = sink(out.out.as_deref())?;
    match out.format {
        Format::Json => {
            let doc = serde_json::json!({ "manifest": Manifest::new(name, seed, config), "result": result });
            emit_report(&doc, &mut w)?;
        }
        Format::Csv => {
            csv(&mut w)?;
            if let Some(p) = &out.out {
                write_manifest(
                    &Manifest::new(name, seed, config),
                    BufWriter::new(File::create(manifest_path(p))?),
                )?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("warning: evidence estimator failed; decision is inconclusive");
            ExitCode::from(EXIT_ESTIMATOR)
        }
        Err(Failure::Input(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Estimator(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ESTIMATOR)
        }
    }
}
