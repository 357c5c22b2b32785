//! `loadcov`: coverage of load-aware multi-tier cellular networks from a
//! scenario file, analytically or by simulation.
//!
//! Exit codes: 0 success, 1 usage, 2 invalid input, 3 series did not
//! converge (the result is still written).

mod sweep;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use loadcov::analytic::{
    coverage, coverage_fully_loaded, coverage_idle_only, g_trace_with, AnalyticError,
    CoverageResult,
};
use loadcov::mcsim::{
    coverage_region_raster, estimate_coverage, estimate_coverage_system, sample_realization,
    LoadModel, Placement, RasterMode, SimConfig, SimError,
};
use loadcov::model::{with_user_load, ModelError, Network, SeriesControl, Warning};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use sweep::{parse_values, Point, Target};

/// Expected stations of the sparsest tier inside a default raster window.
const RASTER_STATIONS: f64 = 50.0;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Validation(String),
    NotConverged(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Validation(_) => 2,
            Failure::NotConverged(_) => 3,
        }
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<AnalyticError> for Failure {
    fn from(e: AnalyticError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Validation(format!("csv: {e}"))
    }
}

#[derive(Parser, Debug)]
#[command(name = "loadcov", version, about = "Coverage of load-aware multi-tier cellular networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Coverage probability of one scenario.
    Coverage(CoverageArgs),
    /// Coverage over a grid of one parameter, as CSV.
    Sweep(SweepArgs),
    /// Monte Carlo estimate of one scenario.
    Simulate(SimulateArgs),
    /// Analytic against Monte Carlo with z-scores.
    Compare(CompareArgs),
    /// Serving-station map of one sampled realization, as CSV.
    Raster(RasterArgs),
}

#[derive(Args, Debug)]
struct Io {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SeriesArgs {
    /// Stop once series terms fall below this.
    #[arg(long, default_value_t = 1e-10, allow_negative_numbers = true)]
    epsilon: f64,
    #[arg(long, default_value_t = 10_000)]
    max_terms: usize,
}

impl SeriesArgs {
    fn control(&self) -> Result<SeriesControl, Failure> {
        Ok(SeriesControl::new(self.epsilon, self.max_terms)?)
    }
}

#[derive(Args, Debug)]
struct LoadArgs {
    /// Activity model shared by both engines.
    #[arg(long, value_enum, default_value_t = LoadArg::ConditionalThinning)]
    load: LoadArg,
    /// Derive activity from a user density instead of the scenario's
    /// activity factors.
    #[arg(long, allow_negative_numbers = true)]
    user_density: Option<f64>,
    /// Resource blocks per station, used with --user-density.
    #[arg(long, default_value_t = 20)]
    resource_blocks: u32,
}

#[derive(Args, Debug)]
struct McArgs {
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = PlacementArg::Ppp)]
    placement: PlacementArg,
    /// Window radius; sized from the sparsest tier when omitted.
    #[arg(long, allow_negative_numbers = true)]
    radius: Option<f64>,
}

#[derive(Args, Debug)]
struct CoverageArgs {
    #[command(flatten)]
    io: Io,
    #[arg(long, value_enum, default_value_t = Engine::Analytic)]
    engine: Engine,
    #[command(flatten)]
    series: SeriesArgs,
    #[command(flatten)]
    load: LoadArgs,
    #[command(flatten)]
    mc: McArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    io: Io,
    #[arg(long, value_enum, default_value_t = Engine::Analytic)]
    engine: Engine,
    /// tier[k].{density,activity,power,target_sir_db,access_fraction,open_fraction},
    /// target_sir_db, user_density or alpha.
    #[arg(long)]
    sweep_target: String,
    /// a,b,c or lin:start:stop:count or log:start:stop:count.
    #[arg(long, allow_hyphen_values = true)]
    sweep_values: String,
    /// Also write the per-term series trace of every point here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Terms per point in the trace.
    #[arg(long, default_value_t = 40)]
    trace_terms: u32,
    #[command(flatten)]
    series: SeriesArgs,
    #[command(flatten)]
    load: LoadArgs,
    #[command(flatten)]
    mc: McArgs,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    io: Io,
    #[command(flatten)]
    load: LoadArgs,
    #[command(flatten)]
    mc: McArgs,
    /// Also write one sampled realization (trial 0 of the seed) here.
    #[arg(long)]
    realization: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    io: Io,
    #[arg(long)]
    sweep_target: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    sweep_values: Option<String>,
    #[command(flatten)]
    series: SeriesArgs,
    #[command(flatten)]
    load: LoadArgs,
    #[command(flatten)]
    mc: McArgs,
}

#[derive(Args, Debug)]
struct RasterArgs {
    #[command(flatten)]
    io: Io,
    /// Pixels per side.
    #[arg(long, default_value_t = 256)]
    resolution: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Full)]
    mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = PlacementArg::Ppp)]
    placement: PlacementArg,
    /// Half-width of the square; sized for about 50 stations of the
    /// sparsest tier when omitted.
    #[arg(long, allow_negative_numbers = true)]
    radius: Option<f64>,
    /// Also write the sampled realization here.
    #[arg(long)]
    realization: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Engine {
    Analytic,
    Mc,
    Both,
}

impl Engine {
    fn analytic(self) -> bool {
        self != Engine::Mc
    }

    fn mc(self) -> bool {
        self != Engine::Analytic
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
enum LoadArg {
    ConditionalThinning,
    FullyLoaded,
    IdleOnly,
}

impl From<LoadArg> for LoadModel {
    fn from(l: LoadArg) -> Self {
        match l {
            LoadArg::ConditionalThinning => LoadModel::ConditionalThinning,
            LoadArg::FullyLoaded => LoadModel::FullyLoaded,
            LoadArg::IdleOnly => LoadModel::IdleOnly,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
enum PlacementArg {
    Ppp,
    HexFirstTier,
}

impl From<PlacementArg> for Placement {
    fn from(p: PlacementArg) -> Self {
        match p {
            PlacementArg::Ppp => Placement::Ppp,
            PlacementArg::HexFirstTier => Placement::HexFirstTier,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ModeArg {
    Full,
    ThinnedRegions,
    ThinnedBiased,
}

impl From<ModeArg> for RasterMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Full => RasterMode::Full,
            ModeArg::ThinnedRegions => RasterMode::ThinnedRegions,
            ModeArg::ThinnedBiased => RasterMode::ThinnedBiased,
        }
    }
}

fn load_network(path: &Path) -> Result<Network, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
    Network::from_json(&text).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    let result = match out {
        Some(path) => fs::write(path, bytes),
        None => io::stdout().lock().write_all(bytes),
    };
    result.map_err(|e| {
        let target = out.map_or("standard output".to_string(), |p| p.display().to_string());
        Failure::Validation(format!("writing {target}: {e}"))
    })
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("plain data serializes");
    bytes.push(b'\n');
    bytes
}

/// Analytic coverage under the chosen load model.
fn analytic(net: &Network, load: &LoadArgs, ctl: &SeriesControl) -> Result<CoverageResult, Failure> {
    let net = match load.user_density {
        Some(lu) => with_user_load(net, lu, load.resource_blocks)?,
        None => net.clone(),
    };
    Ok(match load.load {
        LoadArg::ConditionalThinning => coverage(&net, ctl)?,
        LoadArg::FullyLoaded => coverage_fully_loaded(&net.fully_loaded())?,
        LoadArg::IdleOnly => coverage_idle_only(&net, ctl)?,
    })
}

#[derive(Debug, Clone, Serialize)]
struct McReport {
    mean: f64,
    stderr: f64,
    trials: u64,
    empty_trials: u64,
    window_radius: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    served_fraction: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_activity: Option<Vec<f64>>,
    warnings: Vec<Warning>,
}

fn monte_carlo(net: &Network, load: &LoadArgs, mc: &McArgs) -> Result<McReport, Failure> {
    let sim = |sized: SimConfig| match mc.radius {
        Some(r) => SimConfig::new(r, mc.trials, mc.seed),
        None => Ok(sized),
    };
    if let Some(lu) = load.user_density {
        let cfg = sim(SimConfig::for_system(net, mc.trials, mc.seed)?)?;
        let e = estimate_coverage_system(net, lu, load.resource_blocks, &cfg)?;
        return Ok(McReport {
            mean: e.coverage.mean,
            stderr: e.coverage.stderr,
            trials: e.coverage.trials,
            empty_trials: e.coverage.empty_trials,
            window_radius: cfg.window_radius,
            warnings: e.coverage.warnings(),
            served_fraction: Some(e.served_fraction),
            mean_activity: Some(e.mean_activity),
        });
    }
    let cfg = sim(SimConfig::for_network(net, mc.trials, mc.seed)?)?;
    let e = estimate_coverage(net, &cfg, mc.placement.into(), load.load.into())?;
    Ok(McReport {
        mean: e.mean,
        stderr: e.stderr,
        trials: e.trials,
        empty_trials: e.empty_trials,
        window_radius: cfg.window_radius,
        warnings: e.warnings(),
        served_fraction: None,
        mean_activity: None,
    })
}

fn not_converged(results: &[&CoverageResult]) -> Result<(), Failure> {
    let failed = results.iter().filter(|r| !r.converged).count();
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::NotConverged(format!(
            "{failed} analytic evaluation(s) did not converge"
        )))
    }
}

#[derive(Serialize)]
struct CoverageReport {
    seed: u64,
    engine: Engine,
    load: LoadArg,
    #[serde(skip_serializing_if = "Option::is_none")]
    user_density: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", flatten)]
    analytic: Option<CoverageResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mc: Option<McReport>,
}

fn run_coverage(args: CoverageArgs) -> Result<(), Failure> {
    let net = load_network(&args.io.scenario)?;
    let ctl = args.series.control()?;
    let result = match args.engine.analytic() {
        true => Some(analytic(&net, &args.load, &ctl)?),
        false => None,
    };
    let mc = match args.engine.mc() {
        true => Some(monte_carlo(&net, &args.load, &args.mc)?),
        false => None,
    };
    let report = CoverageReport {
        seed: args.mc.seed,
        engine: args.engine,
        load: args.load.load,
        user_density: args.load.user_density,
        analytic: result,
        mc,
    };
    emit(args.io.out.as_deref(), &json_bytes(&report))?;
    not_converged(&report.analytic.iter().collect::<Vec<_>>())
}

fn sweep_points(base: &Network, target: &str, values: &str) -> Result<Vec<Point>, Failure> {
    let target: Target = target.parse().map_err(Failure::Usage)?;
    let values = parse_values(values).map_err(Failure::Usage)?;
    target.check(base)?;
    values.iter().map(|&v| target.apply(base, v)).collect()
}

/// Load flags for one sweep point: a swept user density overrides the flag.
fn point_load(load: &LoadArgs, point: &Point) -> LoadArgs {
    LoadArgs {
        load: load.load,
        user_density: point.user_density.or(load.user_density),
        resource_blocks: load.resource_blocks,
    }
}

fn run_sweep(args: SweepArgs) -> Result<(), Failure> {
    let base = load_network(&args.io.scenario)?;
    let ctl = args.series.control()?;
    let split = args
        .sweep_target
        .parse::<Target>()
        .is_ok_and(|t| t.is_access_split());
    let points = sweep_points(&base, &args.sweep_target, &args.sweep_values)?;

    let mut header = vec!["param"];
    if args.engine.analytic() {
        header.extend(["analytic", "lower", "upper", "terms_used"]);
        if split {
            header.push("analytic_open");
        }
    }
    if args.engine.mc() {
        header.extend(["mc_mean", "mc_stderr"]);
    }

    let mut table = csv::Writer::from_writer(Vec::new());
    table.write_record(&header)?;
    let mut trace = csv::Writer::from_writer(Vec::new());
    trace.write_record(["param", "m", "g_m", "partial_sum", "majorant"])?;
    let mut results = Vec::new();
    // network warnings repeat at every point; report each once
    let mut seen: Vec<String> = Vec::new();
    for point in &points {
        let load = point_load(&args.load, point);
        let mut row = vec![point.param.to_string()];
        if args.engine.analytic() {
            let r = analytic(&point.net, &load, &ctl)?;
            for w in &r.warnings {
                let w = w.to_string();
                if !seen.contains(&w) {
                    eprintln!("warning: {}={}: {w}", args.sweep_target, point.param);
                    seen.push(w);
                }
            }
            row.extend([
                r.value.to_string(),
                r.lower.to_string(),
                r.upper.to_string(),
                r.terms_used.to_string(),
            ]);
            if let Some(open) = &point.open {
                row.push(analytic(open, &load, &ctl)?.value.to_string());
            }
            results.push(r);
        }
        if args.engine.mc() {
            let e = monte_carlo(&point.net, &load, &args.mc)?;
            row.extend([e.mean.to_string(), e.stderr.to_string()]);
        }
        table.write_record(&row)?;
        if args.trace.is_some() {
            let net = match load.user_density {
                Some(lu) => with_user_load(&point.net, lu, load.resource_blocks)?,
                None => point.net.clone(),
            };
            for t in g_trace_with(&net, args.trace_terms, &ctl)? {
                trace.write_record([
                    point.param.to_string(),
                    t.m.to_string(),
                    t.g_m.to_string(),
                    t.partial_sum.to_string(),
                    t.majorant.to_string(),
                ])?;
            }
        }
    }
    if args.engine.mc() {
        eprintln!("seed = {}", args.mc.seed);
    }
    emit(args.io.out.as_deref(), &finish_csv(table)?)?;
    if let Some(path) = &args.trace {
        emit(Some(path), &finish_csv(trace)?)?;
    }
    not_converged(&results.iter().collect::<Vec<_>>())
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, Failure> {
    w.into_inner()
        .map_err(|e| Failure::Validation(format!("csv: {}", e.error())))
}

#[derive(Serialize)]
struct SimulateReport {
    seed: u64,
    placement: PlacementArg,
    load: LoadArg,
    #[serde(skip_serializing_if = "Option::is_none")]
    user_density: Option<f64>,
    #[serde(flatten)]
    estimate: McReport,
}

fn run_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let net = load_network(&args.io.scenario)?;
    let estimate = monte_carlo(&net, &args.load, &args.mc)?;
    if let Some(path) = &args.realization {
        let mut rng = ChaCha8Rng::seed_from_u64(args.mc.seed);
        let real = sample_realization(&net, estimate.window_radius, args.mc.placement.into(), &mut rng)?;
        let mut bytes = Vec::new();
        real.write_csv(&mut bytes)?;
        emit(Some(path), &bytes)?;
    }
    let report = SimulateReport {
        seed: args.mc.seed,
        placement: args.mc.placement,
        load: args.load.load,
        user_density: args.load.user_density,
        estimate,
    };
    emit(args.io.out.as_deref(), &json_bytes(&report))
}

#[derive(Serialize)]
struct CompareRow {
    #[serde(skip_serializing_if = "Option::is_none")]
    param: Option<f64>,
    analytic: f64,
    lower: f64,
    upper: f64,
    converged: bool,
    mc_mean: f64,
    mc_stderr: f64,
    /// |analytic - mc| / max(stderr, 1/trials)
    z: f64,
    flagged: bool,
}

#[derive(Serialize)]
struct CompareReport {
    seed: u64,
    trials: u64,
    placement: PlacementArg,
    load: LoadArg,
    #[serde(skip_serializing_if = "Option::is_none")]
    target: Option<String>,
    rows: Vec<CompareRow>,
    flagged: usize,
}

fn run_compare(args: CompareArgs) -> Result<(), Failure> {
    let base = load_network(&args.io.scenario)?;
    let ctl = args.series.control()?;
    let points = match (&args.sweep_target, &args.sweep_values) {
        (Some(t), Some(v)) => sweep_points(&base, t, v)?,
        (None, None) => vec![Point {
            param: f64::NAN,
            net: base.clone(),
            open: None,
            user_density: None,
        }],
        _ => {
            return Err(Failure::Usage(
                "--sweep-target and --sweep-values go together".into(),
            ))
        }
    };
    let mut rows = Vec::new();
    for point in &points {
        let load = point_load(&args.load, point);
        let r = analytic(&point.net, &load, &ctl)?;
        let e = monte_carlo(&point.net, &load, &args.mc)?;
        let stderr = e.stderr.max(1.0 / e.trials as f64);
        let z = (r.value - e.mean).abs() / stderr;
        rows.push(CompareRow {
            param: args.sweep_target.as_ref().map(|_| point.param),
            analytic: r.value,
            lower: r.lower,
            upper: r.upper,
            converged: r.converged,
            mc_mean: e.mean,
            mc_stderr: e.stderr,
            z,
            flagged: z > 3.0,
        });
    }
    let flagged = rows.iter().filter(|r| r.flagged).count();
    if flagged > 0 {
        eprintln!("{flagged} row(s) with z > 3");
    }
    let report = CompareReport {
        seed: args.mc.seed,
        trials: args.mc.trials,
        placement: args.mc.placement,
        load: args.load.load,
        target: args.sweep_target.clone(),
        rows,
        flagged,
    };
    // disagreement and uncertified rows are reported, not treated as errors
    emit(args.io.out.as_deref(), &json_bytes(&report))
}

fn run_raster(args: RasterArgs) -> Result<(), Failure> {
    let net = load_network(&args.io.scenario)?;
    if args.resolution == 0 {
        return Err(Failure::Validation("resolution must be >= 1".into()));
    }
    let radius = match args.radius {
        Some(r) => r,
        None => {
            let sparsest = net
                .tiers()
                .iter()
                .map(|t| t.density)
                .filter(|&d| d > 0.0)
                .fold(f64::INFINITY, f64::min);
            (RASTER_STATIONS / (std::f64::consts::PI * sparsest)).sqrt()
        }
    };
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Failure::Validation(format!("radius must be > 0, got {radius}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let real = sample_realization(&net, radius, args.placement.into(), &mut rng)?;
    let raster = coverage_region_raster(&real, args.resolution, args.mode.into())?;
    if let Some(path) = &args.realization {
        let mut bytes = Vec::new();
        real.write_csv(&mut bytes)?;
        emit(Some(path), &bytes)?;
    }
    let mut bytes = Vec::new();
    raster.write_csv(&mut bytes)?;
    eprintln!("seed = {}, radius = {radius}", args.seed);
    emit(args.io.out.as_deref(), &bytes)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::Coverage(a) => run_coverage(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Compare(a) => run_compare(a),
        Command::Raster(a) => run_raster(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("usage error: {m}"),
                Failure::Validation(m) => eprintln!("error: {m}"),
                Failure::NotConverged(m) => eprintln!("not converged: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
