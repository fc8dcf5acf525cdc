//! Single command-line entry point: every model family is a subcommand,
//! every run is reproducible from `(argv, master seed)`, and every output
//! is machine-readable — a JSON summary on standard output plus optional
//! CSV artifacts written atomically (write-then-rename, so a failed run
//! never leaves a partial file).
//!
//! Exit codes: 0 success, 1 runtime error (a model precondition reported
//! verbatim, or I/O), 2 argument error. `EPISIM_THREADS` caps the worker
//! pool; results do not depend on it.

mod artifact;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use episim_core::dists::DurationDistribution;
use episim_core::sim::MajorThreshold;

/// Errors after successful argument parsing: `Usage` exits 2, `Runtime`
/// exits 1. Model precondition violations map to `Runtime` with the
/// condition text untouched.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<episim_core::Error> for CliError {
    fn from(e: episim_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(format!("cannot serialize output: {e}"))
    }
}

/// JSON payload plus the master seed consumed (None when the command is
/// deterministic); main folds both into the provenance envelope.
pub type CmdOutput = (serde_json::Value, Option<u64>);

#[derive(Parser)]
#[command(
    name = "episim",
    version,
    about = "Stochastic SIR epidemic models: exact final-size distributions, \
             Monte Carlo, branching asymptotics, inference, vaccination and \
             structured populations"
)]
struct Cli {
    /// JSON object with default values for the subcommand's flags
    /// (explicit flags win), e.g. {"n": 1000, "lambda": 1.5}
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact final-size distribution via the high-precision triangular solve
    #[command(name = "exact-pmf")]
    ExactPmf(ExactPmfArgs),
    /// Event-driven Monte Carlo campaign with minor/major classification
    Simulate(SimulateArgs),
    /// Monte Carlo via the infection-pressure threshold construction
    Sellke(SellkeArgs),
    /// Monte Carlo via the two-phase random-graph construction (constant periods)
    #[command(name = "reed-frost")]
    ReedFrost(ReedFrostArgs),
    /// Branching-process limits: R0, extinction probability, final-size
    /// fraction and the large-n spread of the major branch
    Asymptotics(AsymptoticsArgs),
    /// Deterministic SIR trajectory (law-of-large-numbers limit)
    Ode(OdeArgs),
    /// Estimate R0 and the critical vaccination coverage from one final size
    Estimate(EstimateArgs),
    /// Reproduction number under vaccination and the critical coverage
    Vaccinate(VaccinateArgs),
    /// Multitype epidemics: offspring matrix, Perron root R0, simulation
    Multitype(MultitypeArgs),
    /// Two-level mixing: household outbreak mean, R0, simulation
    Households(HouseholdsArgs),
    /// Open population with demography: endemic level and quasi-stationary runs
    Endemic(EndemicArgs),
    /// Mean major-outbreak duration against ln n across community sizes
    #[command(name = "duration-experiment")]
    DurationExperiment(DurationArgs),
}

/// `exp:RATE`, `const:VALUE` or `gamma:SHAPE:RATE`.
fn parse_dist(spec: &str) -> Result<DurationDistribution, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    let built = match parts.as_slice() {
        ["exp", rate] => DurationDistribution::exponential(num(rate, spec)?),
        ["const", value] => DurationDistribution::constant(num(value, spec)?),
        ["gamma", shape, rate] => {
            DurationDistribution::gamma(num(shape, spec)?, num(rate, spec)?)
        }
        _ => {
            return Err(format!(
                "invalid duration spec '{spec}': expected exp:RATE, const:VALUE or gamma:SHAPE:RATE"
            ))
        }
    };
    built.map_err(|e| e.to_string())
}

fn num(field: &str, spec: &str) -> Result<f64, String> {
    field
        .parse()
        .map_err(|_| format!("invalid number '{field}' in duration spec '{spec}'"))
}

/// `auto` (histogram gap rule) or an explicit final-size threshold.
#[derive(Clone, Copy)]
enum ThresholdArg {
    Auto,
    Fixed(u64),
}

impl From<ThresholdArg> for MajorThreshold {
    fn from(t: ThresholdArg) -> Self {
        match t {
            ThresholdArg::Auto => MajorThreshold::Auto,
            ThresholdArg::Fixed(z) => MajorThreshold::Fixed(z),
        }
    }
}

fn parse_threshold(s: &str) -> Result<ThresholdArg, String> {
    if s == "auto" {
        return Ok(ThresholdArg::Auto);
    }
    s.parse()
        .map(ThresholdArg::Fixed)
        .map_err(|_| format!("invalid threshold '{s}': expected 'auto' or a final size"))
}

#[derive(Args)]
struct ExactPmfArgs {
    /// Community size (initial susceptibles plus index cases)
    #[arg(long)]
    n: u64,
    /// Number of index cases
    #[arg(long, default_value_t = 1)]
    m: u64,
    /// Per-infective contact rate
    #[arg(long)]
    lambda: f64,
    /// Infectious period: exp:RATE, const:VALUE or gamma:SHAPE:RATE
    #[arg(long, value_parser = parse_dist)]
    dist: DurationDistribution,
    /// Working precision of the triangular solve, in bits
    #[arg(long, default_value_t = episim_core::exact::DEFAULT_PRECISION_BITS)]
    precision_bits: usize,
    /// Write the distribution as CSV `k,probability`
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 1)]
    m: u64,
    #[arg(long)]
    lambda: f64,
    /// Infectious period: exp:RATE, const:VALUE or gamma:SHAPE:RATE
    #[arg(long, value_parser = parse_dist)]
    dist: DurationDistribution,
    /// Optional latent period (delays events, leaves final sizes alone)
    #[arg(long, value_parser = parse_dist)]
    latent: Option<DurationDistribution>,
    #[arg(long, default_value_t = 1000)]
    reps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Major-outbreak rule: 'auto' or an explicit final size
    #[arg(long, default_value = "auto", value_parser = parse_threshold)]
    threshold: ThresholdArg,
    /// Write the final-size histogram as CSV `final_size,count`
    #[arg(long, value_name = "FILE")]
    histogram: Option<PathBuf>,
}

#[derive(Args)]
struct SellkeArgs {
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 1)]
    m: u64,
    #[arg(long)]
    lambda: f64,
    /// Infectious period: exp:RATE, const:VALUE or gamma:SHAPE:RATE
    #[arg(long, value_parser = parse_dist)]
    dist: DurationDistribution,
    #[arg(long, default_value_t = 1000)]
    reps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Major-outbreak rule: 'auto' or an explicit final size
    #[arg(long, default_value = "auto", value_parser = parse_threshold)]
    threshold: ThresholdArg,
    /// Write the final-size histogram as CSV `final_size,count`
    #[arg(long, value_name = "FILE")]
    histogram: Option<PathBuf>,
}

#[derive(Args)]
struct ReedFrostArgs {
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 1)]
    m: u64,
    #[arg(long)]
    lambda: f64,
    /// Recovery rate; the constant infectious period is 1/gamma
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1000)]
    reps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Major-outbreak rule: 'auto' or an explicit final size
    #[arg(long, default_value = "auto", value_parser = parse_threshold)]
    threshold: ThresholdArg,
    /// Write the final-size histogram as CSV `final_size,count`
    #[arg(long, value_name = "FILE")]
    histogram: Option<PathBuf>,
}

#[derive(Args)]
struct AsymptoticsArgs {
    /// Per-infective contact rate
    #[arg(long)]
    lambda: f64,
    /// Infectious period: exp:RATE, const:VALUE or gamma:SHAPE:RATE
    #[arg(long, value_parser = parse_dist)]
    dist: DurationDistribution,
    /// Number of index cases
    #[arg(long, default_value_t = 1)]
    m: u64,
    /// Community size; enables the central-limit spread of the major branch
    #[arg(long)]
    n: Option<u64>,
    /// Initially infected fraction in the balance equation
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
}

#[derive(Args)]
struct OdeArgs {
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Initially infective fraction
    #[arg(long)]
    i0: f64,
    /// Initially susceptible fraction (default 1 - i0)
    #[arg(long)]
    s0: Option<f64>,
    #[arg(long, default_value_t = 100.0)]
    t_end: f64,
    /// Integration step
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    /// Write the trajectory as CSV `t,s,i,r`
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Observed final size (index cases not counted)
    #[arg(long)]
    z: u64,
    /// Community size
    #[arg(long)]
    n: u64,
    /// Number of index cases
    #[arg(long, default_value_t = 1)]
    m: u64,
    /// Squared coefficient of variation of the infectious period
    #[arg(long, default_value_t = 1.0)]
    r2: f64,
}

#[derive(Args)]
struct VaccinateArgs {
    /// Basic reproduction number without vaccination
    #[arg(long)]
    r0: f64,
    /// Vaccination coverage in [0, 1]
    #[arg(long)]
    v: f64,
    /// Vaccine efficacy in (0, 1]
    #[arg(long, default_value_t = 1.0)]
    efficacy: f64,
    /// leaky (efficacy scales susceptibility) or all-or-nothing
    /// (efficacy is the probability of full protection)
    #[arg(long, default_value = "leaky", value_parser = ["leaky", "all-or-nothing"])]
    mode: String,
}

#[derive(Args)]
struct MultitypeArgs {
    /// Community size; with --reps, runs the stochastic model
    #[arg(long)]
    n: Option<u64>,
    /// Replicates; requires --n
    #[arg(long)]
    reps: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Major-outbreak rule: 'auto' or an explicit total final size
    #[arg(long, default_value = "auto", value_parser = parse_threshold)]
    threshold: ThresholdArg,
    /// Write the total final-size histogram as CSV `final_size,count`
    #[arg(long, value_name = "FILE")]
    histogram: Option<PathBuf>,
}

#[derive(Args)]
struct HouseholdsArgs {
    /// Household size distribution: comma list of probabilities for
    /// sizes 1, 2, ... (e.g. 0,0.5,0.5 for sizes 2 and 3 equally likely)
    #[arg(long, value_delimiter = ',')]
    size_dist: Vec<f64>,
    /// Within-household per-pair contact rate
    #[arg(long)]
    lambda_h: f64,
    /// Global contact rate (targets uniform over the community)
    #[arg(long)]
    lambda_g: f64,
    /// Infectious period: exp:RATE, const:VALUE or gamma:SHAPE:RATE
    #[arg(long, value_parser = parse_dist)]
    dist: DurationDistribution,
    /// Number of households; enables the stochastic model
    #[arg(long)]
    households: Option<u64>,
    /// Number of index cases
    #[arg(long, default_value_t = 1)]
    m: u64,
    #[arg(long, default_value_t = 1000)]
    reps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Major-outbreak rule: 'auto' or an explicit final size
    #[arg(long, default_value = "auto", value_parser = parse_threshold)]
    threshold: ThresholdArg,
    /// Write the final-size histogram as CSV `final_size,count`
    #[arg(long, value_name = "FILE")]
    histogram: Option<PathBuf>,
}

#[derive(Args)]
struct EndemicArgs {
    /// Stationary population size (births balance deaths)
    #[arg(long)]
    n: u64,
    #[arg(long)]
    lambda: f64,
    /// Recovery rate
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Birth/death rate
    #[arg(long)]
    mu: f64,
    #[arg(long, default_value_t = 500.0)]
    t_max: f64,
    #[arg(long, default_value_t = 1)]
    reps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Initial susceptible count (default: the endemic equilibrium)
    #[arg(long)]
    s0: Option<u64>,
    /// Initial infective count (default: the endemic equilibrium)
    #[arg(long)]
    i0: Option<u64>,
    /// Initial recovered count (default: the endemic equilibrium)
    #[arg(long)]
    r0_init: Option<u64>,
    /// Write replicate 0's trajectory as CSV `t,S,I,R`
    #[arg(long, value_name = "FILE")]
    trajectory: Option<PathBuf>,
    /// Recording interval for --trajectory
    #[arg(long, default_value_t = 1.0)]
    record_step: f64,
}

#[derive(Args)]
struct DurationArgs {
    #[arg(long)]
    lambda: f64,
    /// Infectious period: exp:RATE, const:VALUE or gamma:SHAPE:RATE
    #[arg(long, value_parser = parse_dist)]
    dist: DurationDistribution,
    /// Number of index cases
    #[arg(long, default_value_t = 1)]
    m: u64,
    /// Comma list of community sizes, e.g. 100,1000,10000
    #[arg(long, value_delimiter = ',')]
    n_grid: Vec<u64>,
    /// Replicates per community size
    #[arg(long, default_value_t = 1000)]
    reps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write per-size results as CSV `n,mean_T,se_T`
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args().collect();
    match run(&raw) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(raw: &[String]) -> Result<(), CliError> {
    init_threads()?;
    let argv = merge_config(raw)?;
    // Parse errors and --help are handled by clap itself: usage text on
    // the right stream, exit 2 for errors, 0 for help.
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let (payload, master_seed) = dispatch(&cli)?;
    print_envelope(payload, master_seed, raw)?;
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<CmdOutput, CliError> {
    match &cli.command {
        Command::ExactPmf(a) => commands::exact_pmf(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Sellke(a) => commands::sellke(a),
        Command::ReedFrost(a) => commands::reed_frost(a),
        Command::Asymptotics(a) => commands::asymptotics(a),
        Command::Ode(a) => commands::ode(a),
        Command::Estimate(a) => commands::estimate(a),
        Command::Vaccinate(a) => commands::vaccinate(a),
        Command::Multitype(a) => commands::multitype(a, cli.config.as_deref()),
        Command::Households(a) => commands::households(a),
        Command::Endemic(a) => commands::endemic(a),
        Command::DurationExperiment(a) => commands::duration_experiment(a),
    }
}

/// Cap the worker pool from `EPISIM_THREADS`; replicate results never
/// depend on the pool size, only wall time does.
fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("EPISIM_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t >= 1)
        .ok_or_else(|| CliError::Usage(format!("EPISIM_THREADS must be a positive integer (got '{raw}')")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Runtime(format!("cannot configure the thread pool: {e}")))
}

/// Fold `--config FILE` defaults into the argument vector: each scalar or
/// scalar-array entry becomes `--key value` right after the subcommand, so
/// clap's own validation and precedence apply. Keys already given on the
/// command line are skipped (flags win); structured keys consumed directly
/// by a subcommand (the multitype scenario) are left to it.
fn merge_config(raw: &[String]) -> Result<Vec<String>, CliError> {
    let Some(config_path) = find_config(raw) else {
        return Ok(raw.to_vec());
    };
    let Some(sub_index) = find_subcommand(raw) else {
        return Ok(raw.to_vec());
    };
    let subcommand = raw[sub_index].as_str();

    let text = std::fs::read_to_string(&config_path)
        .map_err(|e| CliError::Usage(format!("cannot read config file '{config_path}': {e}")))?;
    let doc: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("config file '{config_path}' is not valid JSON: {e}")))?;
    let serde_json::Value::Object(entries) = doc else {
        return Err(CliError::Usage(format!(
            "config file '{config_path}' must hold a JSON object of flag values"
        )));
    };

    let mut tokens = Vec::new();
    for (key, value) in &entries {
        let flag = format!("--{}", key.replace('_', "-"));
        if subcommand == "multitype"
            && matches!(key.as_str(), "fractions" | "matrix" | "dists" | "seeds")
        {
            continue;
        }
        // An explicit flag beats the config default.
        if raw[sub_index..]
            .iter()
            .any(|t| *t == flag || t.starts_with(&format!("{flag}=")))
        {
            continue;
        }
        match value {
            serde_json::Value::Null | serde_json::Value::Bool(false) => {}
            serde_json::Value::Bool(true) => tokens.push(flag),
            serde_json::Value::Number(x) => {
                tokens.push(flag);
                tokens.push(x.to_string());
            }
            serde_json::Value::String(s) => {
                tokens.push(flag);
                tokens.push(s.clone());
            }
            serde_json::Value::Array(items) => {
                let mut parts = Vec::with_capacity(items.len());
                for item in items {
                    match item {
                        serde_json::Value::Number(x) => parts.push(x.to_string()),
                        serde_json::Value::String(s) => parts.push(s.clone()),
                        _ => {
                            return Err(CliError::Usage(format!(
                                "config key '{key}' must be a scalar or an array of scalars"
                            )))
                        }
                    }
                }
                tokens.push(flag);
                tokens.push(parts.join(","));
            }
            serde_json::Value::Object(_) => {
                return Err(CliError::Usage(format!(
                    "config key '{key}' must be a scalar or an array of scalars"
                )))
            }
        }
    }

    let mut argv = raw[..=sub_index].to_vec();
    argv.extend(tokens);
    argv.extend(raw[sub_index + 1..].iter().cloned());
    Ok(argv)
}

fn find_config(raw: &[String]) -> Option<String> {
    for (i, token) in raw.iter().enumerate() {
        if token == "--config" {
            return raw.get(i + 1).cloned();
        }
        if let Some(path) = token.strip_prefix("--config=") {
            return Some(path.to_string());
        }
    }
    None
}

/// First token after the program name that is not a flag or a flag value.
fn find_subcommand(raw: &[String]) -> Option<usize> {
    let mut i = 1;
    while i < raw.len() {
        let token = &raw[i];
        if let Some(flag) = token.strip_prefix("-") {
            let takes_value = !token.contains('=')
                && !matches!(flag.trim_start_matches('-'), "help" | "h" | "version" | "V");
            i += if takes_value { 2 } else { 1 };
        } else {
            return Some(i);
        }
    }
    None
}

/// Merge the payload with `{version, argv, master_seed}` and print it.
/// serde_json keeps object keys sorted, so identical inputs give
/// byte-identical output.
fn print_envelope(
    payload: serde_json::Value,
    master_seed: Option<u64>,
    raw_argv: &[String],
) -> Result<(), CliError> {
    let mut envelope = match payload {
        serde_json::Value::Object(map) => map,
        other => {
            let mut map = serde_json::Map::new();
            map.insert("result".into(), other);
            map
        }
    };
    envelope.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    envelope.insert("argv".into(), raw_argv.iter().cloned().collect::<Vec<_>>().into());
    envelope.insert(
        "master_seed".into(),
        master_seed.map_or(serde_json::Value::Null, Into::into),
    );
    let text = serde_json::to_string_pretty(&serde_json::Value::Object(envelope))?;
    println!("{text}");
    Ok(())
}
