//! Minimal wave speed `c* = min_{lambda > 0} (lambda^2 - mu(lambda)) / lambda`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeff::{make_delta_comb, PeriodicCoefficient};
use crate::eigen::{self, EigenMethod, SolverConfig};
use crate::error::{Error, Result};
use crate::floquet::CellLayout;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Positive,
    Negative,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Positive => 1.0,
            Direction::Negative => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedConfig {
    pub solver: SolverConfig,
    /// Points of the geometric lambda scan.
    pub scan_points: usize,
    /// Final width of the golden-section bracket.
    pub lambda_tol: f64,
    /// Eigenvalue method; `None` uses transfer matrices when the coefficient
    /// allows it and finite differences otherwise.
    pub method: Option<EigenMethod>,
}

impl Default for SpeedConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            scan_points: 48,
            lambda_tol: 1e-6,
            method: None,
        }
    }
}

impl SpeedConfig {
    pub fn with_method(method: EigenMethod) -> Self {
        Self {
            method: Some(method),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedResult {
    pub c_star: f64,
    pub lambda_star: f64,
    pub direction: Direction,
    pub mu_at_star: f64,
    /// Final golden-section bracket around `lambda_star`.
    pub bracket: (f64, f64),
    pub method: EigenMethod,
    /// Half-width of the final bracket.
    pub tolerance_achieved: f64,
    /// More than one local minimum was seen in the scan.
    pub multimodal_scan: bool,
}

/// `[0.5 sqrt(alpha), 2 sqrt(alpha + alpha^2 L^2)]`.
pub fn scan_range(b: &PeriodicCoefficient) -> (f64, f64) {
    let a = b.alpha();
    let l = b.period();
    (0.5 * a.sqrt(), 2.0 * (a + a * a * l * l).sqrt())
}

/// `[2 sqrt(alpha), 2 sqrt(alpha + alpha^2 L^2)]`.
pub fn speed_bounds(b: &PeriodicCoefficient) -> (f64, f64) {
    let a = b.alpha();
    let l = b.period();
    (2.0 * a.sqrt(), 2.0 * (a + a * a * l * l).sqrt())
}

pub fn default_method(b: &PeriodicCoefficient) -> EigenMethod {
    if b.is_piecewise_or_atomic() {
        EigenMethod::Floquet
    } else {
        EigenMethod::Fd
    }
}

/// `lambda -> mu(lambda, b)` for a fixed method.
pub struct MuEvaluator<'a> {
    b: &'a PeriodicCoefficient,
    method: EigenMethod,
    layout: Option<CellLayout>,
    cfg: SolverConfig,
}

impl<'a> MuEvaluator<'a> {
    pub fn new(b: &'a PeriodicCoefficient, method: EigenMethod, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let layout = match method {
            EigenMethod::Floquet => Some(CellLayout::from_coefficient(b)?),
            _ => None,
        };
        Ok(Self {
            b,
            method,
            layout,
            cfg,
        })
    }

    pub fn method(&self) -> EigenMethod {
        self.method
    }

    pub fn mu(&self, lambda: f64) -> Result<f64> {
        let r = match (&self.layout, self.method) {
            (Some(layout), _) => layout.principal_root(lambda).map(|r| r.mu),
            (None, EigenMethod::Evolution) => {
                eigen::principal_eigenpair_evolution(self.b, lambda, 1.0, &self.cfg).map(|p| p.mu)
            }
            (None, _) => eigen::principal_eigenpair(self.b, lambda, &self.cfg).map(|p| p.mu),
        };
        r.map_err(|e| e.at_lambda(lambda))
    }
}

/// Minimal speed in one direction. The negative direction uses
/// `mu(-lambda)` and is computed independently of the positive one.
pub fn minimal_speed(
    b: &PeriodicCoefficient,
    direction: Direction,
    cfg: &SpeedConfig,
) -> Result<SpeedResult> {
    if cfg.scan_points < 3 {
        return Err(Error::param("speed scan needs at least three points"));
    }
    if !(cfg.lambda_tol > 0.0) {
        return Err(Error::param("lambda tolerance must be positive"));
    }
    let method = cfg.method.unwrap_or_else(|| default_method(b));
    let eval = MuEvaluator::new(b, method, cfg.solver)?;
    let s = direction.sign();
    let phi = |lambda: f64| -> Result<f64> {
        let mu = eval.mu(s * lambda)?;
        Ok((lambda * lambda - mu) / lambda)
    };

    let (lo, hi) = scan_range(b);
    let n = cfg.scan_points;
    let grid: Vec<f64> = (0..n)
        .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
        .collect();
    let values = grid
        .par_iter()
        .map(|&l| phi(l))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;

    // Strict comparison keeps the smallest lambda among ties.
    let mut best = 0;
    for k in 1..n {
        if values[k] < values[best] {
            best = k;
        }
    }
    if best == 0 || best == n - 1 {
        return Err(Error::BracketEscape {
            lambda: grid[best],
            lo,
            hi,
        });
    }
    let local_minima = (1..n - 1)
        .filter(|&k| values[k] < values[k - 1] && values[k] <= values[k + 1])
        .count();
    let multimodal_scan = local_minima > 1;
    if multimodal_scan {
        log::warn!(
            "speed profile has {local_minima} local minima on the scan of {}; refining the lowest at lambda = {}",
            b.describe(),
            grid[best]
        );
    }

    let (lambda_star, c_star, bracket) =
        golden_section(phi, grid[best - 1], grid[best + 1], cfg.lambda_tol)?;
    let (lambda_star, c_star) = if values[best] < c_star {
        (grid[best], values[best])
    } else {
        (lambda_star, c_star)
    };
    let mu_at_star = lambda_star * lambda_star - lambda_star * c_star;
    Ok(SpeedResult {
        c_star,
        lambda_star,
        direction,
        mu_at_star,
        bracket,
        method,
        tolerance_achieved: 0.5 * (bracket.1 - bracket.0),
        multimodal_scan,
    })
}

/// Golden-section search for a minimum of `f` on `[a, b]`, stopping once the
/// bracket is narrower than `tol`. Returns the best point seen, its value and
/// the final bracket.
pub fn golden_section(
    mut f: impl FnMut(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<(f64, f64, (f64, f64))> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2)?;
        }
    }
    let (x, fx) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    Ok((x, fx, (a, b)))
}

/// Both directions, computed concurrently and independently.
pub fn direction_symmetry_check(
    b: &PeriodicCoefficient,
    cfg: &SpeedConfig,
) -> Result<(SpeedResult, SpeedResult)> {
    let (pos, neg) = rayon::join(
        || minimal_speed(b, Direction::Positive, cfg),
        || minimal_speed(b, Direction::Negative, cfg),
    );
    Ok((pos?, neg?))
}

/// `c*(h) - c*(b)` where `h` is the Dirac comb with the same `alpha` and `L`.
pub fn speed_gap_to_optimum(b: &PeriodicCoefficient, cfg: &SpeedConfig) -> Result<f64> {
    let h = make_delta_comb(b.alpha(), b.period())?;
    let comb_cfg = SpeedConfig {
        method: None,
        ..*cfg
    };
    let (ch, cb) = rayon::join(
        || minimal_speed(&h, Direction::Positive, &comb_cfg),
        || minimal_speed(b, Direction::Positive, cfg),
    );
    Ok(ch?.c_star - cb?.c_star)
}
