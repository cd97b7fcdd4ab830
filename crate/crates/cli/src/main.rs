//! Command-line front end for the hinderfit growth toolkit.
//!
//! Subcommands: `trend` runs the Mann-Kendall gate, `fit` runs the gated
//! family ladder and emits a JSON report, `forecast` extends a fitted
//! report forward in time, `eval` evaluates the dimensionless profile at
//! one point, and `synth` generates noisy synthetic series.
//!
//! Exit codes: 0 on success, 2 on validation or gate failure (a JSON
//! error object goes to stderr), 1 on internal error.

use std::io::Write;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hinderfit::dataset::{self, DatasetError, SynthConfig};
use hinderfit::fit::{self, FitError, GateResult, LadderConfig};
use hinderfit::forecast::{self, Forecast, ForecastError};
use hinderfit::kernel::{self, GrowthFamily, KernelError, SolverSettings, MAX_ORDER};
use hinderfit::report::{self, ReportError};
use hinderfit::stats::{self, StatsError, TrendDirection};
use hinderfit::GrowthModel;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "hinderfit", version, about = "Growth-curve fitting under the hindering formalism")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mann-Kendall trend gate for a growth series.
    Trend(TrendArgs),
    /// Fit the gated family ladder to a CSV series.
    Fit(FitArgs),
    /// Extend a fitted report forward in time.
    Forecast(ForecastArgs),
    /// Evaluate the dimensionless profile at one point.
    Eval(EvalArgs),
    /// Generate a synthetic noisy growth series as CSV.
    Synth(SynthArgs),
}

#[derive(Args)]
struct TrendArgs {
    /// Input CSV with columns t,Q.
    csv: PathBuf,
    /// Significance level for each one-tailed test.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Test only the quantity (rising) or only its growth rate (falling).
    #[arg(long, value_enum)]
    on: Option<TrendTarget>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TrendTarget {
    Q,
    G,
}

#[derive(Args)]
struct FitArgs {
    /// Input CSV series.
    csv: PathBuf,
    /// Largest single-term hindering order scanned.
    #[arg(long = "k-max", default_value_t = 12)]
    k_max: u32,
    /// Cap on hindering terms in the final model.
    #[arg(long = "max-terms", default_value_t = 3)]
    max_terms: u32,
    /// Significance level for the gate and the F-chain.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Candidate families to consider.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "sth,logistic,multi")]
    families: Vec<FamilyChoice>,
    /// Name of the time column.
    #[arg(long = "t-col", default_value = "t")]
    t_col: String,
    /// Name of the quantity column.
    #[arg(long = "q-col", default_value = "Q")]
    q_col: String,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write model curves and residuals to this CSV.
    #[arg(long)]
    curves: Option<PathBuf>,
    /// Grid points for --curves (default 500).
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyChoice {
    Sth,
    Logistic,
    Multi,
}

#[derive(Args)]
struct ForecastArgs {
    /// JSON report produced by `fit`.
    report: PathBuf,
    /// Forecast horizon, in the time unit of the fitted data.
    #[arg(long, allow_negative_numbers = true)]
    to: f64,
    /// Grid step (default: 1/100 of the span past the data).
    #[arg(long)]
    step: Option<f64>,
}

#[derive(Args)]
struct EvalArgs {
    /// Profile family.
    #[arg(long, value_enum)]
    family: EvalFamily,
    /// Hindering order, required for sth.
    #[arg(long)]
    k: Option<u32>,
    /// Dimensionless position x = g_u (t - t_h).
    #[arg(long, allow_negative_numbers = true)]
    x: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalFamily {
    Sth,
    Logistic,
}

#[derive(Args)]
struct SynthArgs {
    /// Profile family.
    #[arg(long, value_enum)]
    family: SynthFamily,
    /// Hindering order, required for sth.
    #[arg(long)]
    k: Option<u32>,
    /// Unhindered growth rate g_u.
    #[arg(long, allow_negative_numbers = true)]
    gu: f64,
    /// Hindering scale Q_h.
    #[arg(long, allow_negative_numbers = true)]
    qh: f64,
    /// Time of the Q = Q_h crossing.
    #[arg(long, allow_negative_numbers = true)]
    th: f64,
    /// First grid time.
    #[arg(long, allow_negative_numbers = true)]
    t0: f64,
    /// Last grid time.
    #[arg(long, allow_negative_numbers = true)]
    t1: f64,
    /// Number of grid points.
    #[arg(long)]
    n: usize,
    /// Relative noise level (multiplicative log-normal).
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthFamily {
    Sth,
    Logistic,
    Exponential,
}

/// Failure bound for an exit code: validation and gate problems exit 2,
/// internal errors exit 1.
enum Failure {
    Validation { kind: &'static str, message: String, gate: Option<Box<GateResult>> },
    Internal { message: String },
}

fn invalid(kind: &'static str, message: impl Into<String>) -> Failure {
    Failure::Validation { kind, message: message.into(), gate: None }
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        let kind = match &e {
            DatasetError::Io { .. } => "io",
            DatasetError::Parse { .. } => "parse",
            DatasetError::MissingColumn { .. } => "missing_column",
            DatasetError::DuplicateTime { .. } => "duplicate_time",
            DatasetError::NonPositiveQ { .. } => "non_positive_q",
            DatasetError::TooFewRows { .. } => "too_few_rows",
            DatasetError::EmptyLabel { .. } => "empty_label",
            DatasetError::Config { .. } => "config",
            DatasetError::Stats(_) => "stats",
            DatasetError::Fit(f) => return f.clone().into(),
        };
        invalid(kind, e.to_string())
    }
}

impl From<FitError> for Failure {
    fn from(e: FitError) -> Self {
        match e {
            FitError::GateFailed(gate) => Failure::Validation {
                kind: "gate",
                message: "growth preconditions not met (Q must rise, its rate must fall)".into(),
                gate: Some(gate),
            },
            FitError::OptimizerFailure => {
                Failure::Internal { message: "no optimizer restart converged".into() }
            }
            FitError::Kernel(k) => invalid("kernel", k.to_string()),
            FitError::Stats(s) => invalid("stats", s.to_string()),
            other => invalid("model", other.to_string()),
        }
    }
}

impl From<KernelError> for Failure {
    fn from(e: KernelError) -> Self {
        invalid("kernel", e.to_string())
    }
}

impl From<StatsError> for Failure {
    fn from(e: StatsError) -> Self {
        invalid("stats", e.to_string())
    }
}

impl From<ForecastError> for Failure {
    fn from(e: ForecastError) -> Self {
        match e {
            ForecastError::Fit(f) => f.into(),
            ForecastError::Kernel(k) => k.into(),
            other => invalid("forecast", other.to_string()),
        }
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Serialize { message } => Failure::Internal { message },
            ReportError::Fit(f) => f.into(),
            ReportError::Forecast(f) => f.into(),
            ReportError::Parse { .. } => invalid("parse", e.to_string()),
            ReportError::Schema { .. } => invalid("schema", e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    // Validation output is a single JSON object on stderr, so silence the
    // default panic printer; the payload is recovered below.
    panic::set_hook(Box::new(|_| {}));
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| run(cli)));
    let code = match outcome {
        Ok(Ok(code)) => code,
        Ok(Err(failure)) => report_failure(failure),
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| (*s).to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unexpected panic".into());
            report_failure(Failure::Internal { message })
        }
    };
    ExitCode::from(code)
}

fn report_failure(failure: Failure) -> u8 {
    let (code, body) = match failure {
        Failure::Validation { kind, message, gate } => {
            let mut err = json!({ "kind": kind, "message": message });
            if let Some(gate) = gate {
                err["gate"] = serde_json::to_value(&*gate).unwrap_or(Value::Null);
            }
            (2, json!({ "error": err }))
        }
        Failure::Internal { message } => {
            (1, json!({ "error": { "kind": "internal", "message": message } }))
        }
    };
    eprintln!("{body}");
    code
}

fn run(cli: Cli) -> Result<u8, Failure> {
    init_thread_pool()?;
    match cli.command {
        Command::Trend(args) => run_trend(args),
        Command::Fit(args) => run_fit(args),
        Command::Forecast(args) => run_forecast(args),
        Command::Eval(args) => run_eval(args),
        Command::Synth(args) => run_synth(args),
    }
}

/// Caps the rayon pool when HINDERFIT_THREADS is set.
fn init_thread_pool() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("HINDERFIT_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| {
            invalid("config", format!("HINDERFIT_THREADS must be a positive integer, got {raw:?}"))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Internal { message: e.to_string() })
}

fn run_trend(args: TrendArgs) -> Result<u8, Failure> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(invalid("config", format!("alpha must lie in (0, 1), got {}", args.alpha)));
    }
    let dataset = dataset::load_csv(&args.csv, dataset::DEFAULT_T_COL, dataset::DEFAULT_Q_COL)?;
    let series = &dataset.series;
    let (value, passed) = match args.on {
        None => {
            // The rate series is one point shorter, so the full gate
            // needs 9 rows where each single test needs 8.
            if series.len() < 9 {
                return Err(invalid(
                    "config",
                    "the full gate needs at least 9 rows (the rate series loses one); \
                     use --on q to test the quantity alone",
                ));
            }
            let gate = fit::check_growth_preconditions(series, args.alpha)?;
            (serde_json::to_value(&gate), gate.passed)
        }
        Some(TrendTarget::Q) => {
            let trend = stats::mk_test(series.values(), TrendDirection::Increasing)?;
            let passed = trend.p_one_tailed < args.alpha;
            (serde_json::to_value(&trend), passed)
        }
        Some(TrendTarget::G) => {
            let rates: Vec<f64> =
                stats::growth_rates(series).into_iter().map(|(_, g)| g).collect();
            let trend = stats::mk_test(&rates, TrendDirection::Decreasing)?;
            let passed = trend.p_one_tailed < args.alpha;
            (serde_json::to_value(&trend), passed)
        }
    };
    let value = value.map_err(|e| Failure::Internal { message: e.to_string() })?;
    print_json(&value)?;
    Ok(if passed { 0 } else { 2 })
}

fn run_fit(args: FitArgs) -> Result<u8, Failure> {
    if !(1..=MAX_ORDER).contains(&args.k_max) {
        return Err(invalid("config", format!("--k-max must lie in 1..={MAX_ORDER}")));
    }
    if args.max_terms < 1 {
        return Err(invalid("config", "--max-terms must be at least 1"));
    }
    if args.grid.is_some() && args.curves.is_none() {
        return Err(invalid("config", "--grid only applies together with --curves"));
    }
    let grid_n = args.grid.unwrap_or(500);
    if args.curves.is_some() && grid_n < 2 {
        return Err(invalid("config", "--grid needs at least 2 points"));
    }

    let dataset = dataset::load_csv(&args.csv, &args.t_col, &args.q_col)?;
    let config = LadderConfig {
        alpha: args.alpha,
        k_max: args.k_max,
        max_terms: args.max_terms,
        include_sth: args.families.contains(&FamilyChoice::Sth),
        include_logistic: args.families.contains(&FamilyChoice::Logistic),
        include_multi: args.families.contains(&FamilyChoice::Multi),
        settings: SolverSettings::default(),
    };
    let ladder = fit::run_ladder(&dataset.series, &config)?;

    let (t_min, t_max) = dataset.series.span();
    let settings = SolverSettings::default();
    let forecasts = vec![forecast::forecast(&ladder.chosen.model, t_max, &settings)?];
    let doc = report::build_report(&dataset, &ladder, &forecasts)?;
    let bytes = report::emit_report_json(&doc)?;
    match &args.out {
        Some(path) => write_file(path, &bytes)?,
        None => print_bytes(&bytes)?,
    }

    if let Some(path) = &args.curves {
        let grid = linspace(t_min, t_max, grid_n);
        let bytes =
            report::emit_curves_csv(&ladder.chosen.model, &grid, Some(&dataset.series), &settings)?;
        write_file(path, &bytes)?;
    }
    Ok(0)
}

fn run_forecast(args: ForecastArgs) -> Result<u8, Failure> {
    let bytes = std::fs::read(&args.report).map_err(|e| {
        invalid("io", format!("cannot read {}: {e}", args.report.display()))
    })?;
    let doc = report::parse_report(&bytes)?;
    let t_last = doc.input.t_max;
    if !(args.to.is_finite() && args.to > t_last) {
        return Err(invalid(
            "config",
            format!("--to must exceed the last fitted time {t_last}, got {}", args.to),
        ));
    }
    let span = args.to - t_last;
    let step = args.step.unwrap_or(span / 100.0);
    if !(step.is_finite() && step > 0.0) {
        return Err(invalid("config", format!("--step must be positive, got {step}")));
    }
    let grid = step_grid(t_last, args.to, step)?;
    let series = forecast::forecast_series(&doc.chosen.model, &grid, &SolverSettings::default())?;
    print_forecast_csv(&series)
}

fn run_eval(args: EvalArgs) -> Result<u8, Failure> {
    let family = match args.family {
        EvalFamily::Sth => {
            let k = args.k.ok_or_else(|| invalid("config", "--family sth requires --k"))?;
            GrowthFamily::single_term(k)?
        }
        EvalFamily::Logistic => {
            if args.k.is_some() {
                return Err(invalid("config", "--k only applies to --family sth"));
            }
            GrowthFamily::Logistic
        }
    };
    let settings = SolverSettings::default();
    let h = kernel::h_of_x(&family, args.x, &settings)?;
    let value = json!({
        "family": family.label(),
        "x": args.x,
        "h": h,
        "dh_dx": kernel::dh_dx(&family, h)?,
        "g_factor": kernel::growth_rate_factor(&family, h)?,
        "f": kernel::f_transform(&family, h)?,
        "asymmetry": kernel::asymmetry(&family, args.x, &settings)?,
    });
    print_json(&value)?;
    Ok(0)
}

fn run_synth(args: SynthArgs) -> Result<u8, Failure> {
    let family = match args.family {
        SynthFamily::Sth => {
            let k = args.k.ok_or_else(|| invalid("config", "--family sth requires --k"))?;
            GrowthFamily::single_term(k)?
        }
        SynthFamily::Logistic | SynthFamily::Exponential => {
            if args.k.is_some() {
                return Err(invalid("config", "--k only applies to --family sth"));
            }
            match args.family {
                SynthFamily::Logistic => GrowthFamily::Logistic,
                _ => GrowthFamily::Exponential,
            }
        }
    };
    let model = GrowthModel::new(family, args.gu, args.qh, args.th)?;
    let cfg = SynthConfig {
        model,
        t0: args.t0,
        t1: args.t1,
        n: args.n,
        sigma: args.sigma,
        seed: args.seed,
    };
    let dataset = dataset::synth_generate(&cfg)?;

    let mut out = String::from("t,Q\n");
    for (t, q) in dataset.series.points() {
        out.push_str(&format!("{t:.16e},{q:.16e}\n"));
    }
    print_bytes(out.as_bytes())?;
    Ok(0)
}

/// Uniform grid hitting both endpoints exactly.
fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let last = (n - 1) as f64;
    (0..n).map(|i| a + (b - a) * (i as f64 / last)).collect()
}

/// Fixed-step grid from `a` to `b`; the final point is pinned to `b`.
fn step_grid(a: f64, b: f64, step: f64) -> Result<Vec<f64>, Failure> {
    let n_full = ((b - a) / step).floor();
    if n_full > 1e6 {
        return Err(invalid("config", format!("--step {step} yields over 1e6 grid points")));
    }
    let n_full = n_full as usize;
    let mut grid: Vec<f64> = (0..=n_full).map(|i| a + i as f64 * step).collect();
    let tail = *grid.last().expect("grid has at least one point");
    if b - tail > 1e-9 * step {
        grid.push(b);
    } else {
        *grid.last_mut().expect("grid has at least one point") = b;
    }
    Ok(grid)
}

fn print_json(value: &Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::Internal { message: e.to_string() })?;
    print_bytes(format!("{text}\n").as_bytes())
}

fn print_forecast_csv(series: &[Forecast]) -> Result<u8, Failure> {
    let mut out = String::from("t,x_minus_xh,Q,g\n");
    for point in series {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e}\n",
            point.t, point.x_minus_xh, point.q, point.g
        ));
    }
    print_bytes(out.as_bytes())?;
    Ok(0)
}

fn print_bytes(bytes: &[u8]) -> Result<(), Failure> {
    let mut stdout = std::io::stdout().lock();
    stdout
        .write_all(bytes)
        .and_then(|()| stdout.flush())
        .map_err(|e| Failure::Internal { message: e.to_string() })
}

fn write_file(path: &PathBuf, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes)
        .map_err(|e| invalid("io", format!("cannot write {}: {e}", path.display())))
}
