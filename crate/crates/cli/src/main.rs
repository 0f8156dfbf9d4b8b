use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use trajent::analytics::{kappa_het, kappa_ho, kappa_qj, optimize_unraveling, rate_report, CommonBathCurve};
use trajent::config::{load_scenario, Method, ScenarioConfig};
use trajent::entanglement::{concurrence_pure, eof_from_concurrence};
use trajent::ensemble::{simulate, EnsembleSpec, Unraveling};
use trajent::lindblad::{self, evolve_rho};
use trajent::model::{Preset, Scenario};
use trajent::qj::default_dt;
use trajent::sim::SimParams;
use trajent::stats::{fit_rate, fit_reference, EnsembleSummary, RateFit};
use trajent::{qsd, Error};

const DEFAULT_T_MAX: f64 = 5.0;
const DEFAULT_POINTS: f64 = 100.0;
const DEFAULT_N_TRAJ: usize = 1000;
const DEFAULT_RESTARTS: usize = 8;
/// Master-equation steps keep `dt·γ_max` at or below this.
const MASTER_RATE_STEP: f64 = 0.01;

#[derive(Parser)]
#[command(name = "trajent", version, about = "Average entanglement of two-qubit quantum trajectories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trajectory ensemble: mean concurrence with the closed form and the master-equation value (CSV)
    Simulate(RunArgs),
    /// Master-equation concurrence (CSV)
    Master(RunArgs),
    /// Closed-form disentanglement rates (JSON)
    Rates(ConfigArgs),
    /// Decay rate of a `simulate` CSV (JSON)
    Fit(FitArgs),
    /// Lowest-rate measurement basis for thermal baths (JSON)
    Optimize(OptimizeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    tmax: Option<f64>,
    /// Recording stride
    #[arg(long)]
    grid: Option<f64>,
    /// Number of trajectories
    #[arg(long)]
    traj: Option<usize>,
    /// qj, qsd-homodyne, qsd-heterodyne or master
    #[arg(long)]
    unraveling: Option<String>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct FitArgs {
    /// CSV written by `simulate`
    input: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long)]
    config: PathBuf,
    /// Seed for the random restarts
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_RESTARTS)]
    restarts: usize,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CommonArgs {
    /// Output file (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TRAJENT_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => with_threads(&a.common, || cmd_simulate(&a)),
        Command::Master(a) => with_threads(&a.common, || cmd_master(&a)),
        Command::Rates(a) => with_threads(&a.common, || cmd_rates(&a)),
        Command::Fit(a) => with_threads(&a.common, || cmd_fit(&a)),
        Command::Optimize(a) => with_threads(&a.common, || cmd_optimize(&a)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}

fn with_threads(common: &CommonArgs, f: impl FnOnce() -> CliResult<()> + Send) -> CliResult<()> {
    match common.threads {
        None => f(),
        Some(0) => Err(Failure::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure::Config(e.to_string()))?
            .install(f),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Config(format!("{}: {e}", path.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Failure::Config(e.to_string())),
    }
}

fn emit_json(out: &Option<PathBuf>, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Config(e.to_string()))?;
    text.push('\n');
    emit(out, &text)
}

struct Resolved {
    params: SimParams,
    n_traj: usize,
    seed: u64,
    method: Method,
}

fn resolve(args: &RunArgs, cfg: &ScenarioConfig) -> CliResult<Resolved> {
    let run = &cfg.run;
    let s = &cfg.scenario;
    let method = match &args.unraveling {
        Some(u) => u.parse::<Method>()?,
        None => run.method.unwrap_or(Method::Trajectories(Unraveling::QuantumJump)),
    };
    let t_max = args.tmax.or(run.t_max).unwrap_or(DEFAULT_T_MAX);
    let grid = args.grid.or(run.record_grid).unwrap_or(t_max / DEFAULT_POINTS);
    let dt = match args.dt.or(run.dt) {
        Some(dt) => dt,
        None => {
            let rate_cap = |limit: f64| if s.max_rate() > 0.0 { limit / s.max_rate() } else { f64::INFINITY };
            let auto = match method {
                Method::Trajectories(Unraveling::QuantumJump) => default_dt(s),
                Method::Trajectories(_) => default_dt(s).min(rate_cap(qsd::MAX_RATE_STEP)),
                Method::Master => rate_cap(MASTER_RATE_STEP),
            };
            auto.min(grid)
        }
    };
    let params = SimParams::new(t_max, dt, grid)?;
    let n_traj = args.traj.or(run.n_traj).unwrap_or(DEFAULT_N_TRAJ);
    if n_traj == 0 {
        return Err(Failure::Config("--traj must be at least 1".into()));
    }
    Ok(Resolved { params, n_traj, seed: args.seed.or(run.seed).unwrap_or(0), method })
}

/// Master-equation run on the same grid, with a step inside the RK4 stability budget.
fn master_series(s: &Scenario, params: &SimParams) -> CliResult<lindblad::RhoSeries> {
    let mut p = *params;
    if s.max_rate() > 0.0 {
        p.dt = p.dt.min(MASTER_RATE_STEP / s.max_rate());
    }
    Ok(evolve_rho(s, &p)?)
}

/// Closed-form mean concurrence for the chosen unraveling, when one is known.
fn analytic_curve(s: &Scenario, method: Method) -> CliResult<Option<Box<dyn Fn(f64) -> f64>>> {
    if let Preset::CommonBath { gamma } = s.preset() {
        if method == Method::Trajectories(Unraveling::QuantumJump) {
            let curve = CommonBathCurve::new(s.initial(), gamma)?;
            return Ok(Some(Box::new(move |t| curve.mean(t))));
        }
        return Ok(None);
    }
    let local_h = s.preset() != Preset::Custom || s.h0().max_abs() == 0.0;
    if !s.all_local() || !local_h {
        return Ok(None);
    }
    let kappa = match method {
        Method::Trajectories(Unraveling::QuantumJump) => kappa_qj(s)?,
        Method::Trajectories(Unraveling::Homodyne) => kappa_ho(s)?,
        Method::Trajectories(Unraveling::Heterodyne) => kappa_het(s)?,
        Method::Master => return Ok(None),
    };
    let c0 = concurrence_pure(s.initial())?;
    Ok(Some(Box::new(move |t| c0 * (-kappa * t).exp())))
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn cmd_simulate(args: &RunArgs) -> CliResult<()> {
    let cfg = load_scenario(&args.config)?;
    let r = resolve(args, &cfg)?;
    let s = &cfg.scenario;
    let rho = master_series(s, &r.params)?;
    let (mean, stderr) = match r.method {
        Method::Trajectories(unraveling) => {
            let spec = EnsembleSpec { unraveling, params: r.params, n_traj: r.n_traj, seed: r.seed };
            let summary = simulate(s, &spec)?;
            (summary.mean_c, summary.stderr)
        }
        Method::Master => (rho.concurrences.clone(), vec![0.0; rho.times.len()]),
    };
    let analytic = analytic_curve(s, r.method)?;
    let mut out = String::from("t,mean_C,stderr_C,analytic_C,C_rho\n");
    for (k, &t) in rho.times.iter().enumerate() {
        let a = analytic.as_ref().map_or(f64::NAN, |f| f(t));
        writeln!(out, "{},{},{},{},{}", num(t), num(mean[k]), num(stderr[k]), num(a), num(rho.concurrences[k])).unwrap();
    }
    emit(&args.common.out, &out)
}

fn cmd_master(args: &RunArgs) -> CliResult<()> {
    let cfg = load_scenario(&args.config)?;
    let mut r = resolve(args, &cfg)?;
    r.method = Method::Master;
    let rho = master_series(&cfg.scenario, &r.params)?;
    let mut out = String::from("t,C_rho,EoF_rho,purity\n");
    for ((t, c), state) in rho.times.iter().zip(&rho.concurrences).zip(&rho.states) {
        let m = state.matrix();
        let purity = (*m * *m).trace().re;
        writeln!(out, "{},{},{},{}", num(*t), num(*c), num(eof_from_concurrence(c.clamp(0.0, 1.0))?), num(purity)).unwrap();
    }
    emit(&args.common.out, &out)
}

fn cmd_rates(args: &ConfigArgs) -> CliResult<()> {
    let cfg = load_scenario(&args.config)?;
    let report = rate_report(&cfg.scenario).map_err(|e| match e {
        Error::NonLocalChannel(id) => Failure::Config(format!(
            "channel `{id}` acts on both qubits; the closed-form rates only hold for jump operators local to one qubit"
        )),
        other => other.into(),
    })?;
    emit_json(&args.common.out, &report)
}

#[derive(Serialize)]
struct FitOutput {
    fit: RateFit,
    /// Rate of `analytic_C` fitted over the same window with the same weights.
    analytic_rate: Option<f64>,
    absolute_difference: Option<f64>,
    relative_difference: Option<f64>,
}

struct Table {
    t: Vec<f64>,
    mean: Vec<f64>,
    stderr: Vec<f64>,
    analytic: Option<Vec<f64>>,
}

fn read_table(path: &Path) -> CliResult<Table> {
    let bad = |msg: String| Failure::Config(format!("{}: {msg}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let t_col = col("t").ok_or_else(|| bad("missing column `t`".into()))?;
    let m_col = col("mean_C").ok_or_else(|| bad("missing column `mean_C`".into()))?;
    let (se_col, a_col) = (col("stderr_C"), col("analytic_C"));
    let mut table = Table { t: vec![], mean: vec![], stderr: vec![], analytic: a_col.map(|_| vec![]) };
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |k: usize| -> CliResult<f64> {
            let raw = rec.get(k).ok_or_else(|| bad(format!("row {} is short", row + 2)))?;
            raw.trim().parse::<f64>().map_err(|_| bad(format!("row {}: `{raw}` is not a number", row + 2)))
        };
        table.t.push(field(t_col)?);
        table.mean.push(field(m_col)?);
        table.stderr.push(match se_col {
            Some(k) => field(k)?,
            None => 0.0,
        });
        if let (Some(k), Some(a)) = (a_col, table.analytic.as_mut()) {
            a.push(field(k)?);
        }
    }
    if table.t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(bad("times must be strictly increasing".into()));
    }
    Ok(table)
}

fn cmd_fit(args: &FitArgs) -> CliResult<()> {
    let table = read_table(&args.input)?;
    let n = table.t.len();
    let summary = EnsembleSummary {
        times: table.t,
        mean_c: table.mean,
        stderr: table.stderr,
        mean_eof: vec![0.0; n],
        stderr_eof: vec![0.0; n],
        n_traj: 0,
        empirical_rho: None,
    };
    let fit = fit_rate(&summary)?;
    let analytic_rate = match &table.analytic {
        Some(a) if a.iter().all(|v| v.is_finite()) => Some(fit_reference(&summary, &fit, a)?.rate),
        _ => None,
    };
    let absolute_difference = analytic_rate.map(|a| (fit.rate - a).abs());
    let relative_difference = analytic_rate.filter(|a| *a != 0.0).map(|a| (fit.rate - a).abs() / a.abs());
    emit_json(&args.common.out, &FitOutput { fit, analytic_rate, absolute_difference, relative_difference })
}

#[derive(Serialize)]
struct PhaseEntry {
    channel: String,
    phase: f64,
}

#[derive(Serialize)]
struct OptimizeOutput {
    gamma_plus: [f64; 2],
    gamma_minus: [f64; 2],
    /// Rows `μ` of each qubit's mixing, entries `[u_{μ+}, u_{μ−}]` as `[re, im]`.
    mixing_a: Vec<[[f64; 2]; 2]>,
    mixing_b: Vec<[[f64; 2]; 2]>,
    laser_phases: Vec<PhaseEntry>,
    rate: f64,
    closed_form: f64,
    difference: f64,
}

fn cmd_optimize(args: &OptimizeArgs) -> CliResult<()> {
    let cfg = load_scenario(&args.config)?;
    let rates = cfg.scenario.preset().thermal_rates().ok_or_else(|| {
        Failure::Config(format!(
            "optimize needs a photon_counting, thermal or rotated_thermal scenario, got {}",
            cfg.scenario.preset().name()
        ))
    })?;
    let best = optimize_unraveling(&rates, args.restarts, args.seed)?;
    let rows = |q: usize| -> Vec<[[f64; 2]; 2]> {
        best.mixing[q].rows.iter().map(|r| [[r[0].re, r[0].im], [r[1].re, r[1].im]]).collect()
    };
    let out = OptimizeOutput {
        gamma_plus: rates.plus,
        gamma_minus: rates.minus,
        mixing_a: rows(0),
        mixing_b: rows(1),
        laser_phases: best.phases.iter().map(|(id, p)| PhaseEntry { channel: id.clone(), phase: *p }).collect(),
        rate: best.rate,
        closed_form: best.closed_form,
        difference: (best.rate - best.closed_form).abs(),
    };
    emit_json(&args.common.out, &out)
}
