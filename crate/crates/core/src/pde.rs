//! Finite-difference simulation of `u_t = u_xx + b(x) u (1 - u)` on `[-X, X]`.
//!
//! Point masses act as rates `m / dx` on single nodes, the same lumping the
//! eigenvalue solver uses, so simulated and eigenvalue speeds refer to one
//! discrete model.
//!
//! Schemes:
//! - [`Scheme::SemiImplicit`] (default): one linear solve per step,
//!   `(I - dt D + dt diag(b u^n)) u^{n+1} = (1 + dt b) u^n`. For data in
//!   `[0, 1]` the step keeps `0 <= u <= 1`, fixes `0` and `1`, and is
//!   monotone in `u^n`, for every `dt`.
//! - [`Scheme::StrangCn`]: Crank-Nicolson half steps around an exact
//!   logistic update. Nonnegative only for `dt <= 2 dx^2`.
//! - [`Scheme::Duhamel`]: `u^{n+1} = G_dt * (u + dt b u (1 - u))` with a
//!   discrete Gaussian; needs `dt * max b <= 1`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::coeff::{AtomDiscretization, PeriodicCoefficient};
use crate::error::{Error, Result};
use crate::linalg::solve_tridiagonal;

/// Tolerated undershoot below zero before a step is reported as broken.
pub const UNDERSHOOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    SemiImplicit,
    StrangCn,
    Duhamel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    DirichletZero,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Half-width `X` of the domain; a whole number of periods.
    pub half_width: f64,
    /// Grid spacing; must divide the period.
    pub dx: f64,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub boundary: Boundary,
    /// Time between stored snapshots.
    pub snapshot_interval: f64,
    /// Keep every `stride`-th node in snapshots; `None` keeps 64 per period.
    pub snapshot_stride: Option<usize>,
    /// Level used to locate the front.
    pub threshold: f64,
    pub atom_mode: AtomDiscretization,
}

impl SimulationConfig {
    /// `dx = L / 512`, `dt = 5e-3`, `t_end = 60` on `[-160 L, 160 L]`.
    pub fn reference(period: f64) -> Self {
        Self {
            half_width: 160.0 * period,
            dx: period / 512.0,
            dt: 5e-3,
            t_end: 60.0,
            scheme: Scheme::SemiImplicit,
            boundary: Boundary::DirichletZero,
            snapshot_interval: 0.2,
            snapshot_stride: None,
            threshold: 0.5,
            atom_mode: AtomDiscretization::Lumped,
        }
    }

    /// Smallest admissible grid: `dx = L / 256`, `X = 20 L`.
    pub fn coarse(period: f64, t_end: f64) -> Self {
        Self {
            half_width: 20.0 * period,
            dx: period / 256.0,
            t_end,
            ..Self::reference(period)
        }
    }
}

/// Nodes `x_j = -X + j dx`, `j = 0..n`, with the coefficient tiled on them.
#[derive(Debug, Clone)]
pub struct Grid {
    pub x0: f64,
    pub dx: f64,
    pub period: f64,
    pub nodes_per_period: usize,
    pub rates: Vec<f64>,
}

impl Grid {
    pub fn new(
        b: &PeriodicCoefficient,
        half_width: f64,
        dx: f64,
        mode: AtomDiscretization,
    ) -> Result<Self> {
        let l = b.period();
        let per = whole_ratio(l, dx).ok_or_else(|| {
            Error::param(format!("dx = {dx} must divide the period {l}"))
        })?;
        let periods = whole_ratio(half_width, l).ok_or_else(|| {
            Error::param(format!("half-width {half_width} must be a whole number of periods"))
        })?;
        if per < 256 {
            return Err(Error::param(format!("dx must be at most L/256 (got L/{per})")));
        }
        if periods < 20 {
            return Err(Error::param(format!(
                "half-width must be at least 20 periods (got {periods})"
            )));
        }
        let cell = b.grid_rates(per, mode);
        let n = 2 * periods * per + 1;
        // x_j = -X + j dx is congruent to (j mod per) dx because X is a
        // multiple of L.
        let rates = (0..n).map(|j| cell[j % per]).collect();
        Ok(Self {
            x0: -(periods as f64) * l,
            dx: l / per as f64,
            period: l,
            nodes_per_period: per,
            rates,
        })
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.dx
    }

    /// Indicator of `[-0.5, 0.5]` with linear ramps one cell wide.
    pub fn default_initial(&self) -> Vec<f64> {
        (0..self.len())
            .map(|j| ((0.5 + 0.5 * self.dx - self.x(j).abs()) / self.dx).clamp(0.0, 1.0))
            .collect()
    }

    /// `f` sampled on the nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.len()).map(|j| f(self.x(j))).collect()
    }
}

fn whole_ratio(a: f64, b: f64) -> Option<usize> {
    let r = a / b;
    let k = r.round();
    if k >= 1.0 && (r - k).abs() <= 1e-9 * k {
        Some(k as usize)
    } else {
        None
    }
}

/// One time step of a fixed scheme on a fixed grid.
pub struct Stepper<'g> {
    grid: &'g Grid,
    dt: f64,
    scheme: Scheme,
    boundary: Boundary,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    scratch: Vec<f64>,
    kernel: Vec<f64>,
}

impl<'g> Stepper<'g> {
    pub fn new(grid: &'g Grid, dt: f64, scheme: Scheme, boundary: Boundary) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::param("dt must be positive"));
        }
        let n = grid.len();
        let kernel = if scheme == Scheme::Duhamel {
            let max_rate = grid.rates.iter().fold(0.0f64, |a, &b| a.max(b));
            if dt * max_rate > 1.0 {
                return Err(Error::Stability(format!(
                    "Duhamel step needs dt * max b <= 1 (dt = {dt}, max b = {max_rate})"
                )));
            }
            gaussian_kernel(dt, grid.dx)
        } else {
            Vec::new()
        };
        Ok(Self {
            grid,
            dt,
            scheme,
            boundary,
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
            rhs: vec![0.0; n],
            scratch: vec![0.0; n],
            kernel,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&mut self, u: &mut [f64]) -> Result<()> {
        if u.len() != self.grid.len() {
            return Err(Error::InvalidInput(format!(
                "state has {} values, grid has {}",
                u.len(),
                self.grid.len()
            )));
        }
        match self.scheme {
            Scheme::SemiImplicit => self.step_semi_implicit(u)?,
            Scheme::StrangCn => {
                self.crank_nicolson(u, 0.5 * self.dt)?;
                logistic(u, &self.grid.rates, self.dt);
                self.crank_nicolson(u, 0.5 * self.dt)?;
            }
            Scheme::Duhamel => self.step_duhamel(u),
        }
        let min = u.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        if !(min >= -UNDERSHOOT_TOLERANCE) {
            return Err(Error::SchemeViolation(format!(
                "{:?} step produced u = {min:e}",
                self.scheme
            )));
        }
        Ok(())
    }

    /// Fills the bands of `I - theta D` with boundary rows.
    fn diffusion_bands(&mut self, theta: f64) {
        let r = theta / (self.grid.dx * self.grid.dx);
        let n = self.grid.len();
        self.lower.fill(-r);
        self.upper.fill(-r);
        self.diag.fill(1.0 + 2.0 * r);
        match self.boundary {
            Boundary::DirichletZero => {
                self.diag[0] = 1.0;
                self.upper[0] = 0.0;
                self.diag[n - 1] = 1.0;
                self.lower[n - 1] = 0.0;
            }
            Boundary::Neumann => {
                self.upper[0] = -2.0 * r;
                self.lower[n - 1] = -2.0 * r;
            }
        }
    }

    fn step_semi_implicit(&mut self, u: &mut [f64]) -> Result<()> {
        let dt = self.dt;
        self.diffusion_bands(dt);
        let n = u.len();
        for j in 0..n {
            let b = self.grid.rates[j];
            self.diag[j] += dt * b * u[j];
            self.rhs[j] = (1.0 + dt * b) * u[j];
        }
        if self.boundary == Boundary::DirichletZero {
            self.diag[0] = 1.0;
            self.diag[n - 1] = 1.0;
            self.rhs[0] = 0.0;
            self.rhs[n - 1] = 0.0;
        }
        solve_tridiagonal(&self.lower, &self.diag, &self.upper, &mut self.rhs, &mut self.scratch)?;
        u.copy_from_slice(&self.rhs);
        Ok(())
    }

    /// `(I - h/2 D) u_new = (I + h/2 D) u`.
    fn crank_nicolson(&mut self, u: &mut [f64], h: f64) -> Result<()> {
        let n = u.len();
        let r = 0.5 * h / (self.grid.dx * self.grid.dx);
        for j in 0..n {
            let left = if j > 0 {
                u[j - 1]
            } else {
                match self.boundary {
                    Boundary::DirichletZero => 0.0,
                    Boundary::Neumann => u[1],
                }
            };
            let right = if j + 1 < n {
                u[j + 1]
            } else {
                match self.boundary {
                    Boundary::DirichletZero => 0.0,
                    Boundary::Neumann => u[n - 2],
                }
            };
            self.rhs[j] = u[j] + r * (left - 2.0 * u[j] + right);
        }
        self.diffusion_bands(0.5 * h);
        if self.boundary == Boundary::DirichletZero {
            self.rhs[0] = 0.0;
            self.rhs[n - 1] = 0.0;
        }
        solve_tridiagonal(&self.lower, &self.diag, &self.upper, &mut self.rhs, &mut self.scratch)?;
        u.copy_from_slice(&self.rhs);
        Ok(())
    }

    fn step_duhamel(&mut self, u: &mut [f64]) {
        let n = u.len();
        let dt = self.dt;
        for j in 0..n {
            let b = self.grid.rates[j];
            self.scratch[j] = u[j] + dt * b * u[j] * (1.0 - u[j]);
        }
        for j in 0..n {
            let mut acc = self.kernel[0] * self.scratch[j];
            for (d, w) in self.kernel.iter().enumerate().skip(1) {
                for idx in [j as i64 - d as i64, j as i64 + d as i64] {
                    let v = if idx >= 0 && (idx as usize) < n {
                        self.scratch[idx as usize]
                    } else {
                        match self.boundary {
                            Boundary::DirichletZero => 0.0,
                            Boundary::Neumann => self.scratch[reflect(idx, n)],
                        }
                    };
                    acc += w * v;
                }
            }
            u[j] = acc;
        }
        if self.boundary == Boundary::DirichletZero {
            u[0] = 0.0;
            u[n - 1] = 0.0;
        }
    }
}

fn reflect(idx: i64, n: usize) -> usize {
    let last = n as i64 - 1;
    let mut i = idx;
    while i < 0 || i > last {
        if i < 0 {
            i = -i;
        }
        if i > last {
            i = 2 * last - i;
        }
    }
    i as usize
}

/// One-sided weights of the heat kernel `G(., t)` on nodes spaced `dx`,
/// truncated at eight standard deviations and normalised to unit sum.
fn gaussian_kernel(t: f64, dx: f64) -> Vec<f64> {
    let sigma = (2.0 * t).sqrt();
    let k = ((8.0 * sigma / dx).ceil() as usize).max(1);
    let mut w: Vec<f64> = (0..=k)
        .map(|d| (-(d as f64 * dx).powi(2) / (4.0 * t)).exp())
        .collect();
    let total = w[0] + 2.0 * w[1..].iter().sum::<f64>();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Exact solution of `u' = b u (1 - u)` over `dt`, node by node.
fn logistic(u: &mut [f64], rates: &[f64], dt: f64) {
    for (v, &b) in u.iter_mut().zip(rates) {
        if b == 0.0 || *v == 0.0 {
            continue;
        }
        let e = (b * dt).exp();
        *v = if e.is_finite() {
            *v * e / (1.0 + *v * (e - 1.0))
        } else {
            1.0
        };
    }
}

/// One Strang step (Crank-Nicolson half steps around the exact logistic
/// update) applied to `u` in place.
pub fn step_strang(u: &mut [f64], grid: &Grid, dt: f64, boundary: Boundary) -> Result<()> {
    Stepper::new(grid, dt, Scheme::StrangCn, boundary)?.step(u)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrontSample {
    pub t: f64,
    /// Rightmost crossing of the threshold, `NaN` before the front forms.
    pub x_plus: f64,
    /// Leftmost crossing of the threshold.
    pub x_minus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub values: Vec<f64>,
    pub sup_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationTrace {
    pub config: SimulationConfig,
    pub period: f64,
    pub dx: f64,
    /// Position of the first stored snapshot point and spacing between points.
    pub snapshot_x0: f64,
    pub snapshot_dx: f64,
    pub snapshot_stride: usize,
    pub times: Vec<f64>,
    pub front: Vec<FrontSample>,
    pub snapshots: Vec<Snapshot>,
    /// First time `u > 1e-8` within two periods of the boundary.
    pub contaminated_at: Option<f64>,
    /// Extremes of `u` over every node and step.
    pub min_value: f64,
    pub max_value: f64,
    /// Final state on the full grid.
    pub final_state: Vec<f64>,
}

impl SimulationTrace {
    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn snapshot_x(&self, k: usize) -> f64 {
        self.snapshot_x0 + k as f64 * self.snapshot_dx
    }

    /// Snapshot points per period.
    pub fn snapshot_points_per_period(&self) -> usize {
        (self.period / self.snapshot_dx).round() as usize
    }

    pub fn is_contaminated(&self) -> bool {
        self.contaminated_at.is_some()
    }

    /// Front position at time `t`, linearly interpolated between steps.
    pub fn front_at(&self, t: f64) -> Option<FrontSample> {
        let i = self.front.partition_point(|s| s.t < t);
        if i == 0 {
            return self.front.first().copied();
        }
        if i >= self.front.len() {
            return self.front.last().copied();
        }
        let (a, b) = (self.front[i - 1], self.front[i]);
        let w = (t - a.t) / (b.t - a.t);
        Some(FrontSample {
            t,
            x_plus: a.x_plus + w * (b.x_plus - a.x_plus),
            x_minus: a.x_minus + w * (b.x_minus - a.x_minus),
        })
    }

    /// Snapshot values at time `t`, linear in time between stored snapshots.
    pub fn snapshot_at(&self, t: f64) -> Option<Vec<f64>> {
        let s = &self.snapshots;
        if s.is_empty() || t < s[0].t || t > s[s.len() - 1].t + 1e-12 {
            return None;
        }
        let i = s.partition_point(|p| p.t < t);
        if i == 0 {
            return Some(s[0].values.clone());
        }
        if i >= s.len() {
            return Some(s[s.len() - 1].values.clone());
        }
        let (a, b) = (&s[i - 1], &s[i]);
        let w = (t - a.t) / (b.t - a.t);
        Some(
            a.values
                .iter()
                .zip(&b.values)
                .map(|(p, q)| p + w * (q - p))
                .collect(),
        )
    }

    /// Index of the stored snapshot closest to `t`.
    pub fn nearest_snapshot(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }

    pub fn write_front_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x_plus", "x_minus"])?;
        for s in &self.front {
            w.write_record([s.t.to_string(), s.x_plus.to_string(), s.x_minus.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Little-endian dump: magic `PWSNAP01`, `u64` snapshot count, `u64`
    /// points per snapshot, `f64` first position, `f64` spacing, then per
    /// snapshot an `f64` time followed by the values.
    pub fn write_snapshots<W: Write>(&self, mut out: W) -> Result<()> {
        let points = self.snapshots.first().map_or(0, |s| s.values.len());
        out.write_all(b"PWSNAP01")?;
        out.write_all(&(self.snapshots.len() as u64).to_le_bytes())?;
        out.write_all(&(points as u64).to_le_bytes())?;
        out.write_all(&self.snapshot_x0.to_le_bytes())?;
        out.write_all(&self.snapshot_dx.to_le_bytes())?;
        for s in &self.snapshots {
            out.write_all(&s.t.to_le_bytes())?;
            for v in &s.values {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Reads a dump written by [`SimulationTrace::write_snapshots`] as
/// `(x0, dx, [(t, values)])`.
pub fn read_snapshots(bytes: &[u8]) -> Result<(f64, f64, Vec<(f64, Vec<f64>)>)> {
    let bad = || Error::Parse("malformed snapshot dump".into());
    if bytes.len() < 40 || &bytes[..8] != b"PWSNAP01" {
        return Err(bad());
    }
    let word = |i: usize| -> [u8; 8] { bytes[i..i + 8].try_into().expect("eight bytes") };
    let count = u64::from_le_bytes(word(8)) as usize;
    let points = u64::from_le_bytes(word(16)) as usize;
    let x0 = f64::from_le_bytes(word(24));
    let dx = f64::from_le_bytes(word(32));
    if bytes.len() != 40 + count * (points + 1) * 8 {
        return Err(bad());
    }
    let mut out = Vec::with_capacity(count);
    let mut pos = 40;
    for _ in 0..count {
        let t = f64::from_le_bytes(word(pos));
        pos += 8;
        let values = (0..points)
            .map(|k| f64::from_le_bytes(word(pos + 8 * k)))
            .collect();
        pos += 8 * points;
        out.push((t, values));
    }
    Ok((x0, dx, out))
}

/// Rightmost crossing of `theta`, searched outward from `hint`.
fn right_crossing(u: &[f64], theta: f64, grid: &Grid, hint: &mut Option<usize>) -> f64 {
    let n = u.len();
    let mut j = match *hint {
        Some(j) => j,
        None => match u.iter().rposition(|&v| v >= theta) {
            Some(j) => j,
            None => return f64::NAN,
        },
    };
    while j + 1 < n && u[j + 1] >= theta {
        j += 1;
    }
    while j > 0 && u[j] < theta {
        j -= 1;
    }
    if u[j] < theta {
        *hint = None;
        return f64::NAN;
    }
    *hint = Some(j);
    if j + 1 >= n {
        return grid.x(j);
    }
    grid.x(j) + (u[j] - theta) / (u[j] - u[j + 1]) * grid.dx
}

fn left_crossing(u: &[f64], theta: f64, grid: &Grid, hint: &mut Option<usize>) -> f64 {
    let n = u.len();
    let mut j = match *hint {
        Some(j) => j,
        None => match u.iter().position(|&v| v >= theta) {
            Some(j) => j,
            None => return f64::NAN,
        },
    };
    while j > 0 && u[j - 1] >= theta {
        j -= 1;
    }
    while j + 1 < n && u[j] < theta {
        j += 1;
    }
    if u[j] < theta {
        *hint = None;
        return f64::NAN;
    }
    *hint = Some(j);
    if j == 0 {
        return grid.x(0);
    }
    grid.x(j) - (u[j] - theta) / (u[j] - u[j - 1]) * grid.dx
}

/// Integrates from `u0` (nodal values on the grid built from `cfg`) to
/// `cfg.t_end`. Use [`Grid::new`] with the same parameters to build `u0`.
pub fn simulate(
    b: &PeriodicCoefficient,
    u0: &[f64],
    cfg: &SimulationConfig,
) -> Result<SimulationTrace> {
    let grid = Grid::new(b, cfg.half_width, cfg.dx, cfg.atom_mode)?;
    simulate_on(&grid, u0, cfg)
}

/// Runs the default bump datum.
pub fn simulate_default(b: &PeriodicCoefficient, cfg: &SimulationConfig) -> Result<SimulationTrace> {
    let grid = Grid::new(b, cfg.half_width, cfg.dx, cfg.atom_mode)?;
    let u0 = grid.default_initial();
    simulate_on(&grid, &u0, cfg)
}

pub fn simulate_on(grid: &Grid, u0: &[f64], cfg: &SimulationConfig) -> Result<SimulationTrace> {
    let n = grid.len();
    if u0.len() != n {
        return Err(Error::InvalidInput(format!(
            "initial data has {} values, grid has {n}",
            u0.len()
        )));
    }
    if u0.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidInput("initial data must be finite and nonnegative".into()));
    }
    if !(cfg.t_end > 0.0 && cfg.t_end.is_finite()) {
        return Err(Error::param("t_end must be positive"));
    }
    if !(cfg.snapshot_interval > 0.0) {
        return Err(Error::param("snapshot interval must be positive"));
    }
    if !(cfg.threshold > 0.0 && cfg.threshold < 1.0) {
        return Err(Error::param("front threshold must lie in (0, 1)"));
    }
    let guard = 2 * grid.nodes_per_period;
    if u0[..guard].iter().chain(&u0[n - guard..]).any(|&v| v != 0.0) {
        return Err(Error::InvalidInput(
            "initial data must vanish within two periods of the boundary".into(),
        ));
    }
    let stride = cfg
        .snapshot_stride
        .unwrap_or_else(|| (grid.nodes_per_period / 64).max(1));
    if stride == 0 || grid.nodes_per_period % stride != 0 {
        return Err(Error::param("snapshot stride must divide the nodes per period"));
    }

    let steps = (cfg.t_end / cfg.dt).round().max(1.0) as usize;
    let dt = cfg.t_end / steps as f64;
    let snap_every = ((cfg.snapshot_interval / dt).round() as usize).max(1);
    let mut stepper = Stepper::new(grid, dt, cfg.scheme, cfg.boundary)?;

    let mut u = u0.to_vec();
    let mut times = Vec::with_capacity(steps + 1);
    let mut front = Vec::with_capacity(steps + 1);
    let mut snapshots = Vec::new();
    let mut contaminated_at = None;
    let (mut min_value, mut max_value) = extremes(&u);
    let (mut hint_r, mut hint_l) = (None, None);
    let theta = cfg.threshold;

    let mut record = |k: usize,
                      u: &[f64],
                      times: &mut Vec<f64>,
                      front: &mut Vec<FrontSample>,
                      snapshots: &mut Vec<Snapshot>,
                      contaminated_at: &mut Option<f64>| {
        let t = k as f64 * dt;
        times.push(t);
        front.push(FrontSample {
            t,
            x_plus: right_crossing(u, theta, grid, &mut hint_r),
            x_minus: left_crossing(u, theta, grid, &mut hint_l),
        });
        if k % snap_every == 0 || k == steps {
            let values: Vec<f64> = u.iter().step_by(stride).copied().collect();
            let sup_norm = values.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            snapshots.push(Snapshot { t, values, sup_norm });
        }
        if contaminated_at.is_none() {
            let edge = u[..guard].iter().chain(&u[n - guard..]).fold(0.0f64, |a, &b| a.max(b));
            if edge > 1e-8 {
                *contaminated_at = Some(t);
                log::warn!("boundary contamination at t = {t}");
            }
        }
    };

    record(0, &u, &mut times, &mut front, &mut snapshots, &mut contaminated_at);
    for k in 1..=steps {
        stepper.step(&mut u)?;
        let (lo, hi) = extremes(&u);
        min_value = min_value.min(lo);
        max_value = max_value.max(hi);
        record(k, &u, &mut times, &mut front, &mut snapshots, &mut contaminated_at);
    }

    Ok(SimulationTrace {
        config: *cfg,
        period: grid.period,
        dx: grid.dx,
        snapshot_x0: grid.x0,
        snapshot_dx: grid.dx * stride as f64,
        snapshot_stride: stride,
        times,
        front,
        snapshots,
        contaminated_at,
        min_value,
        max_value,
        final_state: u,
    })
}

fn extremes(u: &[f64]) -> (f64, f64) {
    u.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
}

/// `e^{M^2 t / 4} (1 + erf(M sqrt(t) / 2))`, the closed form of the
/// Gronwall-type growth factor for differences of solutions when
/// `|b (1 - u - v)| <= M`.
pub fn continuous_dependence_bound(m: f64, t: f64) -> f64 {
    (m * m * t / 4.0).exp() * (1.0 + libm::erf(m * t.sqrt() / 2.0))
}

/// `|| u(t) - v(t) ||_inf / || u0 - v0 ||_inf` for two solutions on the grid
/// described by `cfg` (its `t_end` is replaced by `t`).
pub fn continuous_dependence_probe(
    b: &PeriodicCoefficient,
    u0: &[f64],
    v0: &[f64],
    t: f64,
    cfg: &SimulationConfig,
) -> Result<f64> {
    let denom = u0
        .iter()
        .zip(v0)
        .map(|(a, c)| (a - c).abs())
        .fold(0.0, f64::max);
    if denom == 0.0 {
        if u0.len() == v0.len() {
            return Ok(0.0);
        }
        return Err(Error::InvalidInput("data have different lengths".into()));
    }
    if u0.len() != v0.len() {
        return Err(Error::InvalidInput("data have different lengths".into()));
    }
    let cfg = SimulationConfig { t_end: t, ..*cfg };
    let grid = Grid::new(b, cfg.half_width, cfg.dx, cfg.atom_mode)?;
    let (u, v) = rayon::join(
        || simulate_on(&grid, u0, &cfg),
        || simulate_on(&grid, v0, &cfg),
    );
    let (u, v) = (u?, v?);
    let num = u
        .final_state
        .iter()
        .zip(&v.final_state)
        .map(|(a, c)| (a - c).abs())
        .fold(0.0, f64::max);
    Ok(num / denom)
}
