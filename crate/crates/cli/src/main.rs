use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use pulsewave::coeff::{load_coefficient, Kernel, PeriodicCoefficient};
use pulsewave::eigen::{solve, EigenMethod, SolverConfig};
use pulsewave::floquet::dispersion_curve;
use pulsewave::front::spread_report;
use pulsewave::pde::{simulate_default, Boundary, Scheme, SimulationConfig, SimulationTrace};
use pulsewave::speed::{
    default_method, direction_symmetry_check, minimal_speed, Direction, SpeedConfig,
};
use pulsewave::svg::{space_time_heatmap, xy_plot, Mark};
use pulsewave::sweep::{convergence_table, run_sweep, write_csv, SweepPlan};
use pulsewave::AtomDiscretization;

#[derive(Parser)]
#[command(name = "pulsewave", version, about = "Minimal speeds of pulsating fronts in periodic media")]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Principal eigenpair at one lambda, as JSON.
    Eigen {
        /// Coefficient file (JSON or TOML)
        coeff: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
        #[command(flatten)]
        solver: SolverArgs,
        /// Write the eigenfunction as CSV (x, psi)
        #[arg(long)]
        psi_csv: Option<PathBuf>,
    },
    /// mu(lambda) on a uniform lambda grid, as CSV (lambda, mu, residual).
    Dispersion {
        coeff: PathBuf,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
        to: f64,
        #[arg(long, default_value_t = 61)]
        points: usize,
        #[command(flatten)]
        solver: SolverArgs,
        /// CSV destination; stdout when absent
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Minimal speed c* and its decay rate, as JSON.
    Speed {
        coeff: PathBuf,
        #[arg(long, value_enum, default_value_t = DirectionArg::Positive)]
        direction: DirectionArg,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Runs the reaction-diffusion equation from the default bump.
    Simulate {
        coeff: PathBuf,
        #[command(flatten)]
        sim: SimArgs,
        /// Front positions as CSV (t, x_plus, x_minus); stdout when absent
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Binary snapshot dump
        #[arg(long)]
        snapshots: Option<PathBuf>,
        /// Space-time heatmap of u
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Simulates, fits the front and compares with c*, as JSON.
    Spread {
        coeff: PathBuf,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, value_enum, default_value_t = DirectionArg::Positive)]
        direction: DirectionArg,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Minimal speeds over a family of coefficients from a plan file.
    Sweep {
        /// Sweep plan (JSON or TOML)
        plan: PathBuf,
        /// CSV destination; overrides the plan, stdout when neither is set
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Scatter plot of c* by plan index
        #[arg(long)]
        svg: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Speed gap to the Dirac comb with the same mean and period, as JSON.
    OptimalGap {
        coeff: PathBuf,
        /// Mollifier widths for a convergence table (coefficients with atoms)
        #[arg(long, value_delimiter = ',')]
        widths: Vec<f64>,
        #[arg(long, value_enum, default_value_t = KernelArg::Triangle)]
        kernel: KernelArg,
        /// Convergence table as CSV (width, c_star, gap, direction_defect)
        #[arg(long)]
        table: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Positive,
    Negative,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Triangle,
    Gaussian,
}

#[derive(Args)]
struct SolverArgs {
    /// fd, evolution or floquet; picked from the coefficient when absent
    #[arg(long, value_parser = parse_snake::<EigenMethod>)]
    method: Option<EigenMethod>,
    /// Finite-difference nodes per period
    #[arg(long, default_value_t = SolverConfig::default().grid_n)]
    grid: usize,
    #[arg(long, default_value_t = SolverConfig::default().tolerance)]
    tolerance: f64,
    /// Points of the lambda scan
    #[arg(long, default_value_t = SpeedConfig::default().scan_points)]
    scan_points: usize,
}

impl SolverArgs {
    fn solver(&self) -> SolverConfig {
        SolverConfig {
            grid_n: self.grid,
            tolerance: self.tolerance,
            ..SolverConfig::default()
        }
    }

    fn speed(&self) -> SpeedConfig {
        SpeedConfig {
            solver: self.solver(),
            scan_points: self.scan_points,
            method: self.method,
            ..SpeedConfig::default()
        }
    }
}

#[derive(Clone, Copy, Default, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Preset {
    #[default]
    Reference,
    Coarse,
}

/// Simulation settings from a file; every field is optional.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimFile {
    preset: Option<Preset>,
    half_width_periods: Option<usize>,
    cells_per_period: Option<usize>,
    dt: Option<f64>,
    t_end: Option<f64>,
    scheme: Option<Scheme>,
    boundary: Option<Boundary>,
    snapshot_interval: Option<f64>,
    snapshot_stride: Option<usize>,
    threshold: Option<f64>,
    atom_mode: Option<AtomDiscretization>,
}

/// Starts from a preset, then applies the config file, then the flags.
#[derive(Args)]
struct SimArgs {
    /// Simulation config file (JSON or TOML)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Domain half-width in periods
    #[arg(long)]
    half_width_periods: Option<usize>,
    /// Grid cells per period
    #[arg(long)]
    cells_per_period: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// semi_implicit, strang_cn or duhamel
    #[arg(long, value_parser = parse_snake::<Scheme>)]
    scheme: Option<Scheme>,
    /// dirichlet_zero or neumann
    #[arg(long, value_parser = parse_snake::<Boundary>)]
    boundary: Option<Boundary>,
    #[arg(long)]
    snapshot_interval: Option<f64>,
    #[arg(long)]
    snapshot_stride: Option<usize>,
    /// Level that locates the front
    #[arg(long)]
    threshold: Option<f64>,
    /// lumped or split
    #[arg(long, value_parser = parse_snake::<AtomDiscretization>)]
    atom_mode: Option<AtomDiscretization>,
}

impl SimArgs {
    fn config(&self, period: f64) -> Result<SimulationConfig> {
        let file: SimFile = match &self.config {
            Some(p) => read_structured(p)?,
            None => SimFile::default(),
        };
        let preset = self.preset.or(file.preset).unwrap_or_default();
        let t_end = self.t_end.or(file.t_end);
        let mut cfg = match preset {
            Preset::Reference => SimulationConfig::reference(period),
            Preset::Coarse => SimulationConfig::coarse(period, 60.0),
        };
        if let Some(t) = t_end {
            cfg.t_end = t;
        }
        if let Some(k) = self.half_width_periods.or(file.half_width_periods) {
            cfg.half_width = k as f64 * period;
        }
        if let Some(n) = self.cells_per_period.or(file.cells_per_period) {
            cfg.dx = period / n as f64;
        }
        if let Some(dt) = self.dt.or(file.dt) {
            cfg.dt = dt;
        }
        if let Some(s) = self.scheme.or(file.scheme) {
            cfg.scheme = s;
        }
        if let Some(b) = self.boundary.or(file.boundary) {
            cfg.boundary = b;
        }
        if let Some(v) = self.snapshot_interval.or(file.snapshot_interval) {
            cfg.snapshot_interval = v;
        }
        if let Some(v) = self.snapshot_stride.or(file.snapshot_stride) {
            cfg.snapshot_stride = Some(v);
        }
        if let Some(v) = self.threshold.or(file.threshold) {
            cfg.threshold = v;
        }
        if let Some(v) = self.atom_mode.or(file.atom_mode) {
            cfg.atom_mode = v;
        }
        Ok(cfg)
    }
}

fn parse_snake<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// `.toml` files as TOML, anything else as JSON.
fn read_structured<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    if is_toml {
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    } else {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

fn load(path: &Path) -> Result<PeriodicCoefficient> {
    load_coefficient(path).with_context(|| format!("loading coefficient {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// A file when given, stdout otherwise.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn eigen(coeff: &Path, lambda: f64, solver: &SolverArgs, psi_csv: Option<&Path>) -> Result<()> {
    let b = load(coeff)?;
    let method = solver.method.unwrap_or_else(|| default_method(&b));
    let pair = solve(&b, lambda, method, &solver.solver())?;
    if let Some(p) = psi_csv {
        let mut w = create(p)?;
        writeln!(w, "x,psi")?;
        let h = b.period() / pair.psi.len() as f64;
        for (i, v) in pair.psi.iter().enumerate() {
            writeln!(w, "{:?},{v:?}", i as f64 * h)?;
        }
        w.flush()?;
    }
    print_json(&json!({
        "lambda": pair.lambda,
        "mu": pair.mu,
        "residual": pair.residual,
        "ratio_bound_ok": pair.ratio_bound_ok(&b),
        "method": pair.method,
        "grid_n": pair.grid_n,
    }))
}

fn dispersion(coeff: &Path, from: f64, to: f64, points: usize, solver: &SolverArgs, output: Option<&Path>) -> Result<()> {
    if points < 2 || !(to > from) {
        bail!("need at least two points and --to above --from");
    }
    let b = load(coeff)?;
    let lambdas: Vec<f64> = (0..points)
        .map(|k| from + (to - from) * k as f64 / (points - 1) as f64)
        .collect();
    let method = solver.method.unwrap_or_else(|| default_method(&b));
    let rows: Vec<(f64, f64, f64)> = if method == EigenMethod::Floquet {
        let curve = dispersion_curve(&b, &lambdas)?;
        (0..points).map(|k| (curve.lambdas[k], curve.mus[k], curve.residuals[k])).collect()
    } else {
        let cfg = solver.solver();
        lambdas
            .iter()
            .map(|&l| solve(&b, l, method, &cfg).map(|p| (l, p.mu, p.residual)))
            .collect::<pulsewave::Result<_>>()?
    };
    let mut w = sink(output)?;
    writeln!(w, "lambda,mu,residual")?;
    for (l, mu, r) in rows {
        writeln!(w, "{l:?},{mu:?},{r:?}")?;
    }
    w.flush()?;
    Ok(())
}

fn speed(coeff: &Path, direction: DirectionArg, solver: &SolverArgs) -> Result<()> {
    let b = load(coeff)?;
    let cfg = solver.speed();
    match direction {
        DirectionArg::Positive => print_json(&minimal_speed(&b, Direction::Positive, &cfg)?),
        DirectionArg::Negative => print_json(&minimal_speed(&b, Direction::Negative, &cfg)?),
        DirectionArg::Both => {
            let (pos, neg) = direction_symmetry_check(&b, &cfg)?;
            let difference = (pos.c_star - neg.c_star).abs();
            print_json(&json!({ "positive": pos, "negative": neg, "difference": difference }))
        }
    }
}

fn run_simulation(b: &PeriodicCoefficient, sim: &SimArgs) -> Result<SimulationTrace> {
    let cfg = sim.config(b.period())?;
    log::info!(
        "simulating {} on [-{}, {}] with dx = {}, dt = {}, t_end = {}",
        b.describe(),
        cfg.half_width,
        cfg.half_width,
        cfg.dx,
        cfg.dt,
        cfg.t_end
    );
    let trace = simulate_default(b, &cfg)?;
    if let Some(t) = trace.contaminated_at {
        log::warn!("the solution reached the boundary region at t = {t}; widen the domain");
    }
    Ok(trace)
}

fn simulate(coeff: &Path, sim: &SimArgs, output: Option<&Path>, snapshots: Option<&Path>, svg: Option<&Path>) -> Result<()> {
    let b = load(coeff)?;
    let trace = run_simulation(&b, sim)?;
    if let Some(p) = snapshots {
        let mut w = create(p)?;
        trace.write_snapshots(&mut w)?;
        w.flush()?;
    }
    if let Some(p) = svg {
        let title = format!("u(x, t) for {}", b.describe());
        std::fs::write(p, space_time_heatmap(&trace, &title, 240, 160))
            .with_context(|| format!("writing {}", p.display()))?;
    }
    let mut w = sink(output)?;
    trace.write_front_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn spread(coeff: &Path, sim: &SimArgs, direction: DirectionArg, solver: &SolverArgs) -> Result<()> {
    let b = load(coeff)?;
    let trace = run_simulation(&b, sim)?;
    let cfg = solver.speed();
    let report = |d: Direction| -> Result<serde_json::Value> {
        let r = spread_report(&b, &trace, d, &cfg)?;
        Ok(json!({
            "c_fit": r.c_fit,
            "c_eigen": r.c_eigen,
            "rel_err": r.rel_err,
            "lambda_edge": finite_or_null(r.lambda_edge),
            "lambda_star": r.lambda_star,
            "speed_error": r.fit.speed_error,
            "residual_rms": r.fit.residual_rms,
            "periodicity_defect": finite_or_null(r.fit.periodicity_defect),
        }))
    };
    match direction {
        DirectionArg::Positive => print_json(&report(Direction::Positive)?),
        DirectionArg::Negative => print_json(&report(Direction::Negative)?),
        DirectionArg::Both => print_json(&json!({
            "positive": report(Direction::Positive)?,
            "negative": report(Direction::Negative)?,
        })),
    }
}

fn finite_or_null(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn sweep(plan_path: &Path, output: Option<&Path>, svg: Option<&Path>, solver: &SolverArgs) -> Result<()> {
    let mut plan: SweepPlan = read_structured(plan_path)?;
    if let Some(p) = output {
        plan.output = Some(p.to_path_buf());
    }
    if solver.method.is_some() {
        plan.method = solver.method;
    }
    let outcome = run_sweep(&plan, &solver.speed())?;
    if plan.output.is_none() {
        let mut w = sink(None)?;
        write_csv(&outcome.records, &mut w)?;
        w.flush()?;
    }
    let s = &outcome.summary;
    eprintln!(
        "{} rows, {} failed; comb speed {}; band violations {:?}; ordering violations {:?}",
        s.rows, s.failures, s.c_comb, s.band_violations, s.ordering_violations
    );
    if let Some(p) = svg {
        let pts: Vec<(f64, f64)> = outcome
            .records
            .iter()
            .filter_map(|r| r.c_star.map(|c| (r.index as f64, c)))
            .collect();
        let last = outcome.records.len().saturating_sub(1) as f64;
        let comb = [(0.0, s.c_comb), (last, s.c_comb)];
        let floor = [(0.0, s.band.0), (last, s.band.0)];
        let plot = xy_plot(
            &[
                ("c* by member", &pts, Mark::Points),
                ("Dirac comb", &comb, Mark::Line),
                ("lower bound", &floor, Mark::Line),
            ],
            &format!("Minimal speeds, alpha = {}, L = {}", plan.alpha, plan.period),
            "plan index",
            "c*",
        );
        std::fs::write(p, plot).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn optimal_gap(coeff: &Path, widths: &[f64], kernel: KernelArg, table: Option<&Path>, solver: &SolverArgs) -> Result<()> {
    let b = load(coeff)?;
    let cfg = solver.speed();
    let comb = pulsewave::coeff::make_delta_comb(b.alpha(), b.period())?;
    let c_comb = minimal_speed(&comb, Direction::Positive, &SpeedConfig { method: None, ..cfg })?.c_star;
    let c_star = minimal_speed(&b, Direction::Positive, &cfg)?.c_star;
    let mut out = json!({
        "c_star": c_star,
        "c_comb": c_comb,
        "gap": c_comb - c_star,
        "lower_bound": 2.0 * b.alpha().sqrt(),
    });
    if !widths.is_empty() {
        let kernel = match kernel {
            KernelArg::Triangle => Kernel::Triangle,
            KernelArg::Gaussian => Kernel::GaussianTruncated,
        };
        let t = convergence_table(&b, widths, kernel, &cfg)?;
        if let Some(p) = table {
            let mut w = create(p)?;
            t.write_csv(&mut w)?;
            w.flush()?;
        }
        out["mollified"] = json!({
            "rows": t.rows,
            "final_gap": t.final_gap(),
            "monotone": t.monotone,
        });
    } else if table.is_some() {
        bail!("--table needs --widths");
    }
    print_json(&out)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match &cli.command {
        Command::Eigen { coeff, lambda, solver, psi_csv } => eigen(coeff, *lambda, solver, psi_csv.as_deref()),
        Command::Dispersion { coeff, from, to, points, solver, output } => {
            dispersion(coeff, *from, *to, *points, solver, output.as_deref())
        }
        Command::Speed { coeff, direction, solver } => speed(coeff, *direction, solver),
        Command::Simulate { coeff, sim, output, snapshots, svg } => {
            simulate(coeff, sim, output.as_deref(), snapshots.as_deref(), svg.as_deref())
        }
        Command::Spread { coeff, sim, direction, solver } => spread(coeff, sim, *direction, solver),
        Command::Sweep { plan, output, svg, solver } => sweep(plan, output.as_deref(), svg.as_deref(), solver),
        Command::OptimalGap { coeff, widths, kernel, table, solver } => {
            optimal_gap(coeff, widths, *kernel, table.as_deref(), solver)
        }
    }
}
