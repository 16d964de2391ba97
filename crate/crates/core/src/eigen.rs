//! Principal eigenpair of `-psi'' + 2 lambda psi' - b psi = mu psi` on one
//! period, with `psi > 0`.
//!
//! The finite-difference operator on `N` periodic nodes is a Z-matrix:
//! off-diagonal entries are nonpositive, using exponential fitting of the
//! diffusion coefficient when the cell Peclet number `|lambda| dx` exceeds 1.
//! Its transpose is the operator at `-lambda`, so the discrete spectrum is
//! symmetric in `lambda` exactly.

use serde::{Deserialize, Serialize};

use crate::coeff::{AtomDiscretization, PeriodicCoefficient};
use crate::error::{Error, Result};
use crate::floquet::CellLayout;
use crate::linalg::CyclicTridiagonal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub grid_n: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Base time step of the evolution solver; `None` picks one from the
    /// eigenvalue band.
    pub evolution_dt: Option<f64>,
    pub atom_mode: AtomDiscretization,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grid_n: 2048,
            tolerance: 1e-10,
            max_iterations: 10_000,
            evolution_dt: None,
            atom_mode: AtomDiscretization::Lumped,
        }
    }
}

impl SolverConfig {
    pub fn with_grid(grid_n: usize) -> Self {
        Self {
            grid_n,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_n < 64 {
            return Err(Error::param(format!("grid_n = {} is below 64", self.grid_n)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::param("tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::param("max_iterations must be positive"));
        }
        if let Some(dt) = self.evolution_dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::param("evolution_dt must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    Fd,
    Evolution,
    Floquet,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenPair {
    pub lambda: f64,
    pub mu: f64,
    /// Samples at `x_i = i L / N`, scaled so that `max psi = 1`.
    pub psi: Vec<f64>,
    pub grid_n: usize,
    pub method: EigenMethod,
    pub residual: f64,
}

impl EigenPair {
    pub fn ratio(&self) -> f64 {
        let (lo, hi) = min_max(&self.psi);
        hi / lo
    }

    /// Whether `max psi / min psi <= e^{alpha L^2}` up to a relative `1e-3`.
    pub fn ratio_bound_ok(&self, b: &PeriodicCoefficient) -> bool {
        self.ratio() <= ratio_bound(b) * (1.0 + 1e-3)
    }
}

/// `e^{alpha L^2}`, the a priori bound on `max psi / min psi`.
pub fn ratio_bound(b: &PeriodicCoefficient) -> f64 {
    (b.alpha() * b.period() * b.period()).exp()
}

/// `[-alpha - alpha^2 L^2, -alpha]`, the band containing every `mu(lambda, b)`.
pub fn eigenvalue_band(b: &PeriodicCoefficient) -> (f64, f64) {
    let a = b.alpha();
    let l = b.period();
    (-a - a * a * l * l, -a)
}

/// Periodic tridiagonal discretisation of `-d^2 + 2 lambda d - b`.
#[derive(Debug, Clone)]
pub struct DriftOperator {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub dx: f64,
}

impl DriftOperator {
    pub fn new(b: &PeriodicCoefficient, lambda: f64, n: usize, mode: AtomDiscretization) -> Self {
        let rates = b.grid_rates(n, mode);
        Self::from_rates(&rates, b.period() / n as f64, lambda)
    }

    pub fn from_rates(rates: &[f64], dx: f64, lambda: f64) -> Self {
        let pe = lambda * dx;
        let sigma = if pe.abs() <= 1.0 { 1.0 } else { pe / pe.tanh() };
        let d2 = sigma / (dx * dx);
        let adv = lambda / dx;
        let n = rates.len();
        Self {
            lower: vec![-d2 - adv; n],
            diag: rates.iter().map(|r| 2.0 * d2 - r).collect(),
            upper: vec![-d2 + adv; n],
            dx,
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            out[i] = self.lower[i] * x[(i + n - 1) % n]
                + self.diag[i] * x[i]
                + self.upper[i] * x[(i + 1) % n];
        }
    }

    /// Factorisation of `scale_a * A + plus_identity * I`.
    fn factor_combination(&self, scale_a: f64, plus_identity: f64) -> Result<CyclicTridiagonal> {
        let lower: Vec<f64> = self.lower.iter().map(|v| scale_a * v).collect();
        let upper: Vec<f64> = self.upper.iter().map(|v| scale_a * v).collect();
        let diag: Vec<f64> = self.diag.iter().map(|v| scale_a * v + plus_identity).collect();
        CyclicTridiagonal::factor(&lower, &diag, &upper)
    }
}

/// Power iteration for a positive operator given as an in-place map.
/// Returns the dominant eigenvalue estimate, the normalised vector and the
/// final residual `|| T psi / theta - psi ||_inf`.
fn power_iterate(
    mut psi: Vec<f64>,
    tolerance: f64,
    max_iterations: usize,
    mut op: impl FnMut(&mut [f64]),
) -> Result<(f64, Vec<f64>, f64)> {
    let mut y = vec![0.0; psi.len()];
    let mut residual = f64::INFINITY;
    normalise_max(&mut psi);
    for _ in 0..max_iterations {
        y.copy_from_slice(&psi);
        op(&mut y);
        let theta = y.iter().sum::<f64>() / psi.iter().sum::<f64>();
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::IterationLimit {
                iterations: max_iterations,
                residual,
            });
        }
        residual = y
            .iter()
            .zip(&psi)
            .map(|(a, b)| (a / theta - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut psi, &mut y);
        normalise_max(&mut psi);
        if residual <= tolerance {
            return Ok((theta, psi, residual));
        }
    }
    Err(Error::IterationLimit {
        iterations: max_iterations,
        residual,
    })
}

fn normalise_max(v: &mut [f64]) {
    let m = v.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if m > 0.0 {
        v.iter_mut().for_each(|x| *x /= m);
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

fn check_positive(psi: &[f64]) -> Result<()> {
    let (lo, hi) = min_max(psi);
    if lo > 0.0 {
        Ok(())
    } else {
        Err(Error::SpuriousMode { min_ratio: lo / hi })
    }
}

/// Finite differences plus shifted inverse iteration.
///
/// The residual reported is `|| (mu - s) (A - s)^{-1} psi - psi ||_inf` for
/// the shift `s`; the unpreconditioned residual `|| A psi - mu psi ||` has a
/// round-off floor of order `eps / dx^2`.
pub fn principal_eigenpair_fd(
    b: &PeriodicCoefficient,
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<EigenPair> {
    cfg.validate()?;
    if !lambda.is_finite() {
        return Err(Error::param("lambda must be finite"));
    }
    let op = DriftOperator::new(b, lambda, cfg.grid_n, cfg.atom_mode);
    let (band_lo, _) = eigenvalue_band(b);
    let step = b.alpha() + b.alpha().powi(2) * b.period().powi(2) + 1.0;
    let mut shift = band_lo - 1.0;
    let mut fact = op.factor_combination(1.0, -shift)?;
    // A non-positive pivot means the shift is not below the discrete spectrum.
    for _ in 0..8 {
        if fact.min_pivot() > 0.0 {
            break;
        }
        shift -= step;
        fact = op.factor_combination(1.0, -shift)?;
    }
    if fact.min_pivot() <= 0.0 {
        return Err(Error::SpuriousMode { min_ratio: f64::NAN });
    }
    let (theta, psi, residual) = power_iterate(
        vec![1.0; cfg.grid_n],
        cfg.tolerance,
        cfg.max_iterations,
        |x| fact.solve_in_place(x),
    )?;
    check_positive(&psi)?;
    Ok(EigenPair {
        lambda,
        mu: shift + 1.0 / theta,
        psi,
        grid_n: cfg.grid_n,
        method: EigenMethod::Fd,
        residual,
    })
}

/// `mu` from the dominant eigenvalue `rho` of the backward-Euler approximation
/// of the time-`t` solution operator of `v_t = v_xx - 2 lambda v_x + b v`,
/// via `mu = -ln(rho) / t`.
///
/// The implicit step is applied to the full generator, so it is an inverse
/// M-matrix (positivity preserving) for any `dt` below `1 / (alpha + alpha^2 L^2)`.
/// Three step sizes `dt, dt/2, dt/4` are combined by Richardson
/// extrapolation; the gap between the last two extrapolants is folded into
/// the reported residual.
pub fn principal_eigenpair_evolution(
    b: &PeriodicCoefficient,
    lambda: f64,
    t: f64,
    cfg: &SolverConfig,
) -> Result<EigenPair> {
    cfg.validate()?;
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::param("evolution time t must be positive"));
    }
    if !lambda.is_finite() {
        return Err(Error::param("lambda must be finite"));
    }
    let op = DriftOperator::new(b, lambda, cfg.grid_n, cfg.atom_mode);
    let (band_lo, _) = eigenvalue_band(b);
    let dt0 = cfg
        .evolution_dt
        .unwrap_or_else(|| (t / 256.0).min(0.125 / (1.0 - band_lo)));

    let mut psi = vec![1.0; cfg.grid_n];
    let mut estimates = [0.0; 3];
    let mut power_residual: f64 = 0.0;
    for (k, est) in estimates.iter_mut().enumerate() {
        let steps = ((t / dt0).ceil() as usize).max(1) << k;
        let dt = t / steps as f64;
        let fact = op.factor_combination(dt, 1.0)?;
        if fact.min_pivot() <= 0.0 {
            return Err(Error::Stability(format!(
                "implicit step dt = {dt} is not positivity preserving for this coefficient"
            )));
        }
        let (rho, v, r) = power_iterate(psi, cfg.tolerance, cfg.max_iterations, |x| {
            for _ in 0..steps {
                fact.solve_in_place(x);
            }
        })?;
        *est = -rho.ln() / t;
        power_residual = power_residual.max(r);
        psi = v;
    }
    check_positive(&psi)?;
    let r1 = 2.0 * estimates[1] - estimates[0];
    let r1_fine = 2.0 * estimates[2] - estimates[1];
    let r2 = (4.0 * r1_fine - r1) / 3.0;
    Ok(EigenPair {
        lambda,
        mu: r2,
        psi,
        grid_n: cfg.grid_n,
        method: EigenMethod::Evolution,
        residual: power_residual.max((r2 - r1_fine).abs()),
    })
}

/// Transfer-matrix eigenvalue with the eigenfunction sampled on the grid.
pub fn principal_eigenpair_floquet(
    b: &PeriodicCoefficient,
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<EigenPair> {
    cfg.validate()?;
    let layout = CellLayout::from_coefficient(b)?;
    let root = layout.principal_root(lambda)?;
    let n = cfg.grid_n;
    let xs: Vec<f64> = (0..n).map(|i| i as f64 * b.period() / n as f64).collect();
    let mut psi = layout.eigenfunction_at(lambda, root.mu, &xs)?;
    normalise_max(&mut psi);
    check_positive(&psi)?;
    Ok(EigenPair {
        lambda,
        mu: root.mu,
        psi,
        grid_n: n,
        method: EigenMethod::Floquet,
        residual: root.residual,
    })
}

/// Finite differences, falling back to the evolution solver (`t = 1`) when
/// the inverse iteration lands on a sign-changing vector.
pub fn principal_eigenpair(
    b: &PeriodicCoefficient,
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<EigenPair> {
    match principal_eigenpair_fd(b, lambda, cfg) {
        Err(Error::SpuriousMode { min_ratio }) => {
            log::warn!(
                "finite-difference eigenvector not positive (min/max = {min_ratio:e}) at lambda = {lambda}; using the evolution solver"
            );
            principal_eigenpair_evolution(b, lambda, 1.0, cfg)
        }
        other => other,
    }
}

pub fn solve(
    b: &PeriodicCoefficient,
    lambda: f64,
    method: EigenMethod,
    cfg: &SolverConfig,
) -> Result<EigenPair> {
    match method {
        EigenMethod::Fd => principal_eigenpair(b, lambda, cfg),
        EigenMethod::Evolution => principal_eigenpair_evolution(b, lambda, 1.0, cfg),
        EigenMethod::Floquet => principal_eigenpair_floquet(b, lambda, cfg),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridAudit {
    pub lambda: f64,
    pub grids: Vec<usize>,
    pub mus: Vec<f64>,
    /// Observed order from each consecutive triple of grids.
    pub orders: Vec<f64>,
}

impl GridAudit {
    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Finite-difference `mu` on a sequence of grids refined by a constant
/// ratio, with the observed order `ln(|d_k| / |d_k+1|) / ln r` from
/// successive differences `d_k`.
pub fn grid_convergence(
    b: &PeriodicCoefficient,
    lambda: f64,
    grids: &[usize],
    cfg: &SolverConfig,
) -> Result<GridAudit> {
    if grids.len() < 3 {
        return Err(Error::param("grid audit needs at least three grids"));
    }
    let ratio = grids[1] as f64 / grids[0] as f64;
    if !(ratio > 1.0) || grids.windows(2).any(|w| (w[1] as f64 / w[0] as f64 - ratio).abs() > 1e-12) {
        return Err(Error::param("audit grids must be refined by a constant ratio"));
    }
    let mus = grids
        .iter()
        .map(|&n| principal_eigenpair_fd(b, lambda, &SolverConfig { grid_n: n, ..*cfg }).map(|p| p.mu))
        .collect::<Result<Vec<_>>>()?;
    let orders: Vec<f64> = mus
        .windows(3)
        .map(|w| ((w[0] - w[1]).abs() / (w[1] - w[2]).abs()).ln() / ratio.ln())
        .collect();
    for (k, o) in orders.iter().enumerate() {
        log::info!(
            "grid audit {} at lambda {lambda}: N = {} -> {} order {o:.3}",
            b.describe(),
            grids[k],
            grids[k + 2]
        );
    }
    Ok(GridAudit {
        lambda,
        grids: grids.to_vec(),
        mus,
        orders,
    })
}

/// `(int psi'^2 - int b psi^2) / int psi^2` for the periodic piecewise-linear
/// interpolant of `psi`; atoms evaluate `psi` pointwise.
pub fn rayleigh_mu0(b: &PeriodicCoefficient, psi: &[f64]) -> Result<f64> {
    let n = psi.len();
    if n < 2 {
        return Err(Error::InvalidInput("trial function needs at least two samples".into()));
    }
    if psi.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidInput("trial function must be positive".into()));
    }
    let l = b.period();
    let h = l / n as f64;
    let mut grad = 0.0;
    let mut norm = 0.0;
    for i in 0..n {
        let (p, q) = (psi[i], psi[(i + 1) % n]);
        grad += (q - p) * (q - p) / h;
        norm += h * (p * p + p * q + q * q) / 3.0;
    }
    let knots: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
    let interp = |x: f64| crate::coeff::lerp_periodic(psi, l, x);
    let potential = b.integrate_continuous_against(|x| interp(x).powi(2), &knots)
        + b.atoms()
            .iter()
            .map(|a| a.mass * interp(a.position).powi(2))
            .sum::<f64>();
    Ok((grad - potential) / norm)
}

/// `min_i (A psi)_i / psi_i` for the discrete operator the pair was computed
/// on. For the exact eigenvector this equals `mu`.
pub fn maxmin_check(b: &PeriodicCoefficient, pair: &EigenPair) -> Result<f64> {
    if b.has_atoms() {
        return Err(Error::Unsupported(
            "pointwise quotient needs a coefficient without atoms".into(),
        ));
    }
    check_positive(&pair.psi)?;
    let op = DriftOperator::new(b, pair.lambda, pair.grid_n, AtomDiscretization::Lumped);
    let mut out = vec![0.0; pair.grid_n];
    op.apply(&pair.psi, &mut out);
    Ok(out
        .iter()
        .zip(&pair.psi)
        .map(|(a, p)| a / p)
        .fold(f64::INFINITY, f64::min))
}
