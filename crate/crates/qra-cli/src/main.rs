//! `qra` — command-line front end for the reputation engine.
//!
//! Three subcommands cover the workflow end to end: `detect` replays a
//! rating-event stream through either the full engine or the CUSUM baseline
//! and writes per-event verdicts plus a run summary; `simulate` generates a
//! synthetic attack scenario with ground-truth labels; `compare` scores both
//! detectors against each other, either over one pre-generated scenario or
//! over a seeded Monte Carlo grid.
//!
//! Exit codes: 0 on success, 2 when an input file fails to parse, 3 when the
//! configuration is invalid, 1 for everything else (I/O, internal errors).

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qra_core::baseline::{self, CompareError, ComparisonRow, Scenario, SuiteParams};
use qra_core::config::ConfigError;
use qra_core::io::{self, IoError};
use qra_core::pipeline::EngineError;
use qra_core::render::fmt_trunc;
use qra_core::repository::Direction;
use qra_core::snapshot::{self, SnapshotError};
use qra_core::{Engine, RunConfig, UserStatus, UserVerdict};

#[derive(Debug, Parser)]
#[command(
    name = "qra",
    version,
    about = "Streaming reputation engine: detect rating attacks, simulate them, \
             and benchmark against a CUSUM baseline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Replay a rating-event stream and write verdicts plus a run summary
    Detect(DetectArgs),
    /// Generate a synthetic attack scenario with ground-truth labels
    Simulate(SimulateArgs),
    /// Compare the engine against the CUSUM baseline
    Compare(CompareArgs),
}

/// Configuration shared by every subcommand: an optional `key = value` file,
/// overridden by individual flags.
#[derive(Debug, Args)]
struct ConfigArgs {
    /// Config file in `key = value` form; the flags below override it
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Slack added to the detector's threshold deviation
    #[arg(long, value_name = "S")]
    sensitivity: Option<f64>,
    /// Similarity at or above which feedback is trusted outright
    #[arg(long, value_name = "SIM")]
    sim_high: Option<f64>,
    /// Similarity below which feedback counts as off-topic
    #[arg(long, value_name = "SIM")]
    sim_low: Option<f64>,
    /// Latent-space rank for feedback similarity
    #[arg(long, value_name = "K")]
    rank_k: Option<usize>,
    /// Repository forgetting half-life in seconds
    #[arg(long, value_name = "SECS")]
    half_life: Option<f64>,
    /// RNG seed for scenario generation
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn any_set(&self) -> bool {
        self.config.is_some()
            || self.sensitivity.is_some()
            || self.sim_high.is_some()
            || self.sim_low.is_some()
            || self.rank_k.is_some()
            || self.half_life.is_some()
            || self.seed.is_some()
    }

    fn load(&self) -> Result<RunConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|err| {
                    CliError::Params(format!("cannot read config file {}: {err}", path.display()))
                })?;
                RunConfig::parse(&text)?
            }
            None => RunConfig::default(),
        };
        if let Some(v) = self.sensitivity {
            config.sensitivity = v;
        }
        if let Some(v) = self.sim_high {
            config.sim_high = v;
        }
        if let Some(v) = self.sim_low {
            config.sim_low = v;
        }
        if let Some(v) = self.rank_k {
            config.rank_k = v;
        }
        if let Some(v) = self.half_life {
            config.half_life_secs = v;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DetectorKind {
    /// Full engine: threshold band, feedback verification, behavior analysis
    Qra,
    /// Per-product CUSUM change detector on raw ratings
    Cusum,
}

#[derive(Debug, Args)]
struct DetectArgs {
    /// Rating events, one JSON object per line
    #[arg(value_name = "EVENTS")]
    events: PathBuf,
    /// Repository seed documents, one JSON object per line
    #[arg(long, value_name = "PATH")]
    seeds: Option<PathBuf>,
    /// Which detector to run the stream through
    #[arg(long, value_enum, default_value_t = DetectorKind::Qra)]
    detector: DetectorKind,
    /// Verdict CSV output path (doubles as the threshold trace)
    #[arg(long, value_name = "PATH", default_value = "verdicts.csv")]
    verdicts: PathBuf,
    /// Run summary output path
    #[arg(long, value_name = "PATH", default_value = "summary.txt")]
    summary: PathBuf,
    /// Save the engine state after the run (qra detector only)
    #[arg(long, value_name = "PATH")]
    snapshot_out: Option<PathBuf>,
    /// Resume from a saved snapshot instead of a fresh engine (qra only)
    #[arg(long, value_name = "PATH")]
    resume: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Honest raters scoring the true quality plus noise
    #[arg(long, value_name = "N")]
    n_honest: usize,
    /// Colluding attackers pushing the scale extreme
    #[arg(long, value_name = "N")]
    n_malicious: usize,
    /// True product quality honest ratings scatter around
    #[arg(long, value_name = "Q", default_value_t = 4.0)]
    q: f64,
    /// Attack direction: upgrading or downgrading
    #[arg(long, value_name = "DIR", default_value = "downgrading", value_parser = parse_direction)]
    attack: Direction,
    /// Event stream output path
    #[arg(long, value_name = "PATH", default_value = "scenario_events.jsonl")]
    events_out: PathBuf,
    /// Ground-truth labels output path
    #[arg(long, value_name = "PATH", default_value = "scenario_truth.jsonl")]
    truth_out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Replay one pre-generated scenario: its event stream
    #[arg(long, value_name = "PATH", requires = "truth")]
    events: Option<PathBuf>,
    /// Ground-truth labels matching --events
    #[arg(long, value_name = "PATH", requires = "events")]
    truth: Option<PathBuf>,
    /// Rater-count grid for generated scenarios
    #[arg(long, value_delimiter = ',', value_name = "N,N,...",
          default_values_t = vec![0usize, 10, 15, 20, 25])]
    sizes: Vec<usize>,
    /// Scenarios averaged per grid size
    #[arg(long, value_name = "N", default_value_t = 100)]
    seeds_per_size: usize,
    /// Fraction of each size that colludes
    #[arg(long, value_name = "F", default_value_t = 0.3)]
    malicious_fraction: f64,
    /// True product quality for generated scenarios
    #[arg(long, value_name = "Q", default_value_t = 4.0)]
    q: f64,
    /// Attack direction for generated scenarios
    #[arg(long, value_name = "DIR", default_value = "downgrading", value_parser = parse_direction)]
    attack: Direction,
    /// Comparison CSV output path
    #[arg(long, value_name = "PATH", default_value = "comparison.csv")]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

fn parse_direction(s: &str) -> Result<Direction, String> {
    s.parse()
}

#[derive(Debug)]
enum CliError {
    Config(ConfigError),
    Params(String),
    Files(IoError),
    Engine(EngineError),
    Compare(CompareError),
    Snapshot(SnapshotError),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(err) => err.fmt(f),
            CliError::Params(msg) => f.write_str(msg),
            CliError::Files(err) => err.fmt(f),
            CliError::Engine(err) => err.fmt(f),
            CliError::Compare(err) => err.fmt(f),
            CliError::Snapshot(err) => err.fmt(f),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(err: ConfigError) -> Self {
        CliError::Config(err)
    }
}

impl From<IoError> for CliError {
    fn from(err: IoError) -> Self {
        CliError::Files(err)
    }
}

impl From<EngineError> for CliError {
    fn from(err: EngineError) -> Self {
        CliError::Engine(err)
    }
}

impl From<CompareError> for CliError {
    fn from(err: CompareError) -> Self {
        CliError::Compare(err)
    }
}

impl From<SnapshotError> for CliError {
    fn from(err: SnapshotError) -> Self {
        CliError::Snapshot(err)
    }
}

fn io_exit_code(err: &IoError) -> u8 {
    match err {
        IoError::Parse { .. } => 2,
        IoError::Io { .. } => 1,
    }
}

fn engine_exit_code(err: &EngineError) -> u8 {
    match err {
        EngineError::InvalidEvent(_) => 2,
        EngineError::Config(_) => 3,
        _ => 1,
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Params(_) => 3,
            CliError::Files(err) => io_exit_code(err),
            CliError::Engine(err) => engine_exit_code(err),
            CliError::Compare(err) => match err {
                CompareError::Engine(inner) => engine_exit_code(inner),
                CompareError::Config(_) => 3,
                CompareError::Repository(_) => 1,
                // A verdict user missing from ground truth means the two
                // input files do not describe the same scenario.
                CompareError::Eval(_) => 2,
            },
            CliError::Snapshot(err) => match err {
                SnapshotError::Corrupt(_) => 2,
                SnapshotError::Write(inner) => io_exit_code(inner),
                SnapshotError::Io { .. } => 1,
            },
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Detect(args) => cmd_detect(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Compare(args) => cmd_compare(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn cmd_detect(args: DetectArgs) -> Result<(), CliError> {
    if args.detector == DetectorKind::Cusum {
        if args.snapshot_out.is_some() || args.resume.is_some() {
            return Err(CliError::Params(
                "--snapshot-out and --resume apply to the qra detector only".into(),
            ));
        }
        if args.seeds.is_some() {
            return Err(CliError::Params(
                "--seeds applies to the qra detector only; the baseline ignores feedback".into(),
            ));
        }
        return detect_cusum(args);
    }
    detect_qra(args)
}

fn detect_qra(args: DetectArgs) -> Result<(), CliError> {
    let mut engine = match &args.resume {
        Some(path) => {
            if args.config.any_set() {
                return Err(CliError::Params(
                    "config flags conflict with --resume; the snapshot carries its own config"
                        .into(),
                ));
            }
            snapshot::load_snapshot(path)?
        }
        None => Engine::new(args.config.load()?)?,
    };

    if let Some(seeds_path) = &args.seeds {
        // One repository seeding call per (product, direction): repeated
        // calls replace rather than extend, so docs must arrive batched.
        let mut grouped: BTreeMap<String, (Vec<(String, i64)>, Vec<(String, i64)>)> =
            BTreeMap::new();
        for seed in io::read_seeds(seeds_path)? {
            let entry = grouped.entry(seed.product_id).or_default();
            let bucket = match seed.direction {
                Direction::Upgrading => &mut entry.0,
                Direction::Downgrading => &mut entry.1,
            };
            bucket.push((seed.text, seed.timestamp));
        }
        for (product, (up, down)) in &grouped {
            if !up.is_empty() {
                engine
                    .seed_repository(product, Direction::Upgrading, up)
                    .map_err(EngineError::Repository)?;
            }
            if !down.is_empty() {
                engine
                    .seed_repository(product, Direction::Downgrading, down)
                    .map_err(EngineError::Repository)?;
            }
        }
    }

    let events = io::read_events(&args.events, engine.scale())?;
    let mut verdicts = Vec::with_capacity(events.len());
    for event in &events {
        verdicts.push(engine.process_event(event)?);
    }

    io::write_verdicts_csv(&args.verdicts, &verdicts)?;
    // Count events the engine has seen in total so a resumed run reports
    // cumulative per-product state consistently.
    let total_events: usize = engine.products().map(|p| p.event_count()).sum();
    let summary = io::detect_summary(engine.config(), &engine, total_events);
    io::atomic_write(&args.summary, summary.as_bytes())?;
    if let Some(path) = &args.snapshot_out {
        snapshot::save_snapshot(path, &engine)?;
    }

    print!("{summary}");
    println!();
    println!("verdicts -> {}", args.verdicts.display());
    println!("summary  -> {}", args.summary.display());
    if let Some(path) = &args.snapshot_out {
        println!("snapshot -> {}", path.display());
    }
    Ok(())
}

fn detect_cusum(args: DetectArgs) -> Result<(), CliError> {
    let config = args.config.load()?;
    let scale = config.scale();
    let events = io::read_events(&args.events, &scale)?;
    let verdicts = baseline::run_cusum_detector(&events, &scale, config.cusum_params());

    io::write_verdicts_csv(&args.verdicts, &verdicts)?;
    let summary = cusum_summary(&config, &verdicts);
    io::atomic_write(&args.summary, summary.as_bytes())?;

    print!("{summary}");
    println!();
    println!("verdicts -> {}", args.verdicts.display());
    println!("summary  -> {}", args.summary.display());
    Ok(())
}

/// Summary for a baseline run, shaped like the engine's but without the
/// feedback-dependent fields the baseline has no notion of.
fn cusum_summary(config: &RunConfig, verdicts: &[UserVerdict]) -> String {
    let mut out = String::new();
    out.push_str("== run summary (cusum baseline) ==\n");
    out.push_str(&format!("events = {}\n", verdicts.len()));
    if verdicts.is_empty() {
        out.push_str("no events\n");
    }
    out.push_str("\n[config]\n");
    out.push_str(&config.echo());

    let mut order: Vec<&str> = Vec::new();
    let mut by_product: BTreeMap<&str, Vec<&UserVerdict>> = BTreeMap::new();
    for verdict in verdicts {
        if !by_product.contains_key(verdict.product_id.as_str()) {
            order.push(&verdict.product_id);
        }
        by_product.entry(&verdict.product_id).or_default().push(verdict);
    }
    for product in order {
        let rows = &by_product[product];
        out.push_str(&format!("\n[product {product}]\n"));
        out.push_str(&format!("events = {}\n", rows.len()));
        let mut malicious: Vec<&str> = Vec::new();
        for verdict in rows {
            if verdict.status == UserStatus::MaliciousUser
                && !malicious.contains(&verdict.user_id.as_str())
            {
                malicious.push(&verdict.user_id);
            }
        }
        out.push_str(&format!("malicious_users = {}\n", malicious.join(",")));
        match rows.iter().rev().find_map(|v| v.score_after) {
            Some(score) => {
                out.push_str(&format!("score = {}\n", fmt_trunc(score, 4)));
            }
            None => out.push_str("no accepted ratings\n"),
        }
    }
    out
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let config = args.config.load()?;
    let scale = config.scale();
    check_quality_on_scale(args.q, &scale)?;

    let scenario = baseline::generate_scenario(
        &scale,
        args.n_honest,
        args.n_malicious,
        args.q,
        args.attack,
        config.seed,
        config.honest_noise,
    );
    io::write_events_jsonl(&args.events_out, &scenario.events)?;
    io::write_truth_jsonl(&args.truth_out, &scenario)?;

    println!(
        "wrote {} events: {} honest + {} malicious raters, q = {}, {} attack, seed {}",
        scenario.events.len(),
        args.n_honest,
        args.n_malicious,
        args.q,
        args.attack.as_str(),
        scenario.seed,
    );
    println!("events -> {}", args.events_out.display());
    println!("truth  -> {}", args.truth_out.display());
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<(), CliError> {
    let config = args.config.load()?;
    let rows = match (&args.events, &args.truth) {
        (Some(events_path), Some(truth_path)) => {
            let events = io::read_events(events_path, &config.scale())?;
            let truth = io::read_truth_jsonl(truth_path)?;
            let n_users = truth.len();
            let scenario = Scenario { events, truth, q: args.q, seed: config.seed };
            let record = baseline::compare_detectors(&scenario, &config)?;
            vec![ComparisonRow {
                n_users,
                qra_far: record.qra.false_alarm_rate,
                cusum_far: record.cusum.false_alarm_rate,
                qra_detection: record.qra.detection_rate,
                cusum_detection: record.cusum.detection_rate,
                seeds: 1,
            }]
        }
        _ => {
            if !args.malicious_fraction.is_finite()
                || !(0.0..=1.0).contains(&args.malicious_fraction)
            {
                return Err(CliError::Params(
                    "--malicious-fraction must be in [0, 1]".into(),
                ));
            }
            if args.seeds_per_size == 0 {
                return Err(CliError::Params("--seeds-per-size must be at least 1".into()));
            }
            check_quality_on_scale(args.q, &config.scale())?;
            let params = SuiteParams {
                sizes: args.sizes.clone(),
                seeds_per_size: args.seeds_per_size,
                malicious_fraction: args.malicious_fraction,
                q: args.q,
                attack: args.attack,
            };
            baseline::run_comparison_suite(&config, &params)?
        }
    };

    io::write_comparison_csv(&args.out, &rows)?;
    print!("{}", io::comparison_csv(&rows));
    println!("comparison -> {}", args.out.display());
    Ok(())
}

fn check_quality_on_scale(q: f64, scale: &qra_core::RatingScale) -> Result<(), CliError> {
    let (lo, hi) = (scale.min() as f64, scale.max() as f64);
    if !q.is_finite() || q < lo || q > hi {
        return Err(CliError::Params(format!(
            "--q {q} is outside the rating scale {lo}..{hi}"
        )));
    }
    Ok(())
}
