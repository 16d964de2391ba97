//! Transfer-matrix solution of the periodic eigenproblem for piecewise-constant
//! and atomic coefficients.
//!
//! On a segment of constant level `b` the equation
//! `psi'' - 2 lambda psi' + (mu + b) psi = 0` has the closed-form propagator
//! `exp(K l)` with `K = [[0, 1], [-(mu + b), 2 lambda]]`. Writing
//! `K = lambda I + N`, `N^2 = D I` with `D = lambda^2 - mu - b`, so
//! `exp(K l) = e^{lambda l} (C I + S N)` where `C, S` are `cosh, sinh/sqrt`
//! (or `cos, sin/sqrt`) of `sqrt(|D|) l`. An atom of mass `m` applies
//! `[[1, 0], [-m, 1]]` to `(psi, psi')`.
//!
//! The root search works with the reduced matrices `C I + S N`, i.e. without
//! the `e^{lambda l}` factors, which keeps entries of moderate size at large
//! `lambda`. The periodicity condition becomes
//! `tr M_reduced(mu) = 2 cosh(lambda L)`.

use std::ops::Mul;

use rayon::prelude::*;
use serde::Serialize;

use crate::coeff::{Continuous, PeriodicCoefficient};
use crate::error::{Error, Result};

/// Number of subintervals scanned for the first sign change of the dispersion
/// function before bisection.
const ROOT_SCAN: usize = 64;
/// Eigenfunction samples per segment in the positivity certificate.
const CERT_POINTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn scale(self, s: f64) -> Mat2 {
        let m = self.0;
        Mat2([[s * m[0][0], s * m[0][1]], [s * m[1][0], s * m[1][1]]])
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1],
            m[1][0] * v[0] + m[1][1] * v[1],
        ]
    }

    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                d = d.max((self.0[i][j] - other.0[i][j]).abs());
            }
        }
        d
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (self.0, rhs.0);
        let mut c = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(c)
    }
}

/// `(C, S)` with `C = cosh(sqrt(D) l)` and `S = sinh(sqrt(D) l) / sqrt(D)`,
/// continued analytically to `D <= 0`.
fn hyperbolic_pair(d: f64, l: f64) -> (f64, f64) {
    let z = d * l * l;
    if z.abs() < 1e-4 {
        let c = 1.0 + z / 2.0 + z * z / 24.0;
        let s = l * (1.0 + z / 6.0 + z * z / 120.0);
        (c, s)
    } else if d > 0.0 {
        let r = d.sqrt();
        ((r * l).cosh(), (r * l).sinh() / r)
    } else {
        let w = (-d).sqrt();
        ((w * l).cos(), (w * l).sin() / w)
    }
}

/// Propagator without the `e^{lambda l}` factor; determinant `1`.
pub fn reduced_propagator(level: f64, length: f64, lambda: f64, mu: f64) -> Mat2 {
    let q = mu + level;
    let (c, s) = hyperbolic_pair(lambda * lambda - q, length);
    Mat2([[c - s * lambda, s], [-s * q, c + s * lambda]])
}

/// Exact map of `(psi, psi')` across a segment of constant level.
pub fn interval_propagator(level: f64, length: f64, lambda: f64, mu: f64) -> Mat2 {
    reduced_propagator(level, length, lambda, mu).scale((lambda * length).exp())
}

/// Jump of `(psi, psi')` across an atom of mass `m`.
pub fn atom_jump(mass: f64) -> Mat2 {
    Mat2([[1.0, 0.0], [-mass, 1.0]])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Piece {
    Segment { level: f64, length: f64 },
    Atom { mass: f64 },
}

/// The cell `[0, L)` as an ordered list of constant segments and atoms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellLayout {
    pub period: f64,
    pub alpha: f64,
    pub pieces: Vec<Piece>,
}

impl CellLayout {
    pub fn from_coefficient(b: &PeriodicCoefficient) -> Result<Self> {
        let l = b.period();
        let mut cuts: Vec<f64> = vec![0.0, l];
        match b.continuous() {
            Some(Continuous::Samples { values }) if values.iter().any(|v| *v != values[0]) => {
                return Err(Error::Unsupported(
                    "transfer matrices need a piecewise-constant or atomic coefficient".into(),
                ))
            }
            Some(Continuous::Samples { .. }) => {}
            Some(Continuous::Piecewise { breakpoints, .. }) => cuts.extend(breakpoints),
            None => {}
        }
        cuts.extend(b.atoms().iter().map(|a| a.position));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();

        let mut pieces = Vec::new();
        let mut atoms = b.atoms().iter().peekable();
        for w in cuts.windows(2) {
            let (x0, x1) = (w[0], w[1]);
            if let Some(a) = atoms.peek() {
                if a.position == x0 {
                    pieces.push(Piece::Atom { mass: a.mass });
                    atoms.next();
                }
            }
            pieces.push(Piece::Segment {
                level: b.eval_continuous(0.5 * (x0 + x1)),
                length: x1 - x0,
            });
        }
        Ok(Self {
            period: l,
            alpha: b.alpha(),
            pieces,
        })
    }

    /// The same cell with its origin moved to the start of piece `k`.
    pub fn rotated(&self, k: usize) -> Self {
        let mut pieces = self.pieces.clone();
        let n = pieces.len().max(1);
        pieces.rotate_left(k % n);
        Self {
            pieces,
            ..self.clone()
        }
    }

    pub fn reduced_monodromy(&self, lambda: f64, mu: f64) -> Mat2 {
        self.pieces.iter().fold(Mat2::IDENTITY, |m, p| match *p {
            Piece::Segment { level, length } => reduced_propagator(level, length, lambda, mu) * m,
            Piece::Atom { mass } => atom_jump(mass) * m,
        })
    }

    pub fn monodromy(&self, lambda: f64, mu: f64) -> Mat2 {
        self.reduced_monodromy(lambda, mu)
            .scale((lambda * self.period).exp())
    }

    /// `tr M_reduced - 2 cosh(lambda L)`; zero exactly when a periodic
    /// solution exists.
    pub fn dispersion_function(&self, lambda: f64, mu: f64) -> f64 {
        self.reduced_monodromy(lambda, mu).trace() - 2.0 * (lambda * self.period).cosh()
    }

    /// Reduced map of `(psi, psi')` from `from` to `to` (`0 <= from <= to <= L`).
    /// States are left limits, so an atom at `from` is crossed and one at
    /// `to` is not.
    fn transfer(&self, lambda: f64, mu: f64, from: f64, to: f64) -> Mat2 {
        let mut m = Mat2::IDENTITY;
        let mut x0 = 0.0;
        for p in &self.pieces {
            match *p {
                Piece::Atom { mass } => {
                    if x0 >= from && x0 < to {
                        m = atom_jump(mass) * m;
                    }
                }
                Piece::Segment { level, length } => {
                    let a = x0.max(from);
                    let b = (x0 + length).min(to);
                    if b > a {
                        m = reduced_propagator(level, b - a, lambda, mu) * m;
                    }
                    x0 += length;
                }
            }
        }
        m
    }

    /// Samples of the periodic solution for `(lambda, mu)` at the sorted
    /// positions `xs` in `[0, L]`.
    ///
    /// Shooting alone is unstable once `lambda L` is large (the periodic
    /// solution is the decaying mode of the reduced system), so the state is
    /// advanced from sample to sample and projected back onto the periodic
    /// direction of the monodromy based at each sample.
    pub fn eigenfunction_at(&self, lambda: f64, mu: f64, xs: &[f64]) -> Result<Vec<f64>> {
        let mut state = self.periodic_vector_at(lambda, mu, 0.0)?;
        let mut pos = 0.0;
        let mut out = Vec::with_capacity(xs.len());
        for &x in xs {
            let x = x.clamp(pos, self.period);
            state = self.transfer(lambda, mu, pos, x).apply(state);
            let v = self.periodic_vector_at(lambda, mu, x)?;
            let dot = state[0] * v[0] + state[1] * v[1];
            state = [dot * v[0], dot * v[1]];
            out.push((lambda * x).exp() * state[0]);
            pos = x;
        }
        Ok(out)
    }

    /// Unit eigenvector for the eigenvalue `e^{-lambda L}` of the reduced
    /// monodromy based at `x`, with a nonnegative first component.
    fn periodic_vector_at(&self, lambda: f64, mu: f64, x: f64) -> Result<[f64; 2]> {
        let m = (self.transfer(lambda, mu, 0.0, x) * self.transfer(lambda, mu, x, self.period)).0;
        let r = (-lambda * self.period).exp();
        let c1 = [m[0][1], r - m[0][0]];
        let c2 = [r - m[1][1], m[1][0]];
        let n1 = c1[0].hypot(c1[1]);
        let n2 = c2[0].hypot(c2[1]);
        let (v, n) = if n1 >= n2 { (c1, n1) } else { (c2, n2) };
        if n == 0.0 {
            // Monodromy is a multiple of the identity: every vector is periodic.
            return Ok([1.0, 0.0]);
        }
        let v = [v[0] / n, v[1] / n];
        if v[0] > 0.0 {
            Ok(v)
        } else if v[0] < 0.0 {
            Ok([-v[0], -v[1]])
        } else {
            Err(Error::PrincipalBranch { lambda, mu })
        }
    }

    /// Checks that the periodic solution is strictly positive at
    /// `CERT_POINTS` points in every segment.
    fn certify_positive(&self, lambda: f64, mu: f64) -> Result<()> {
        let mut xs = Vec::new();
        let mut x0 = 0.0;
        for p in &self.pieces {
            if let Piece::Segment { length, .. } = *p {
                xs.extend((0..CERT_POINTS).map(|k| x0 + length * k as f64 / CERT_POINTS as f64));
                x0 += length;
            }
        }
        let psi = self.eigenfunction_at(lambda, mu, &xs)?;
        if psi.iter().all(|&v| v > 0.0) {
            Ok(())
        } else {
            Err(Error::PrincipalBranch { lambda, mu })
        }
    }

    fn bracket(&self) -> (f64, f64) {
        let a = self.alpha;
        let l = self.period;
        (-a - a * a * l * l - 0.5, -a + 0.5)
    }

    /// Principal root of the dispersion function at `lambda`.
    pub fn principal_root(&self, lambda: f64) -> Result<DispersionRoot> {
        if !lambda.is_finite() {
            return Err(Error::param("lambda must be finite"));
        }
        let (lo, hi) = self.bracket();
        let root = match self.first_root(lambda, lo, hi) {
            Some(r) => r,
            None => {
                let width = hi - lo;
                let (lo2, hi2) = (lo - width, hi + 0.5);
                log::debug!("widening dispersion bracket to [{lo2}, {hi2}] at lambda = {lambda}");
                self.first_root(lambda, lo2, hi2)
                    .ok_or(Error::BracketFailure { lambda, lo: lo2, hi: hi2 })?
            }
        };
        self.certify_positive(lambda, root)?;
        let scale = 2.0 * (lambda * self.period).cosh();
        Ok(DispersionRoot {
            lambda,
            mu: root,
            residual: self.dispersion_function(lambda, root).abs() / scale,
        })
    }

    /// First `+ -> -` sign change of the dispersion function scanning upward
    /// from `lo`, refined by bisection to machine precision.
    fn first_root(&self, lambda: f64, lo: f64, hi: f64) -> Option<f64> {
        let g = |mu: f64| self.dispersion_function(lambda, mu);
        let h = (hi - lo) / ROOT_SCAN as f64;
        let mut a = lo;
        let mut ga = g(a);
        for k in 1..=ROOT_SCAN {
            let b = lo + k as f64 * h;
            let gb = g(b);
            if ga > 0.0 && gb <= 0.0 {
                return Some(bisect(g, a, b, ga, gb));
            }
            a = b;
            ga = gb;
        }
        None
    }
}

fn bisect(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut ga: f64, mut gb: f64) -> f64 {
    if gb == 0.0 {
        return b;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = g(m);
        if gm > 0.0 {
            a = m;
            ga = gm;
        } else {
            b = m;
            gb = gm;
            if gm == 0.0 {
                break;
            }
        }
    }
    if ga.abs() < gb.abs() {
        a
    } else {
        b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DispersionRoot {
    pub lambda: f64,
    pub mu: f64,
    /// `|g(lambda, mu)| / (2 cosh(lambda L))`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispersionCurve {
    pub lambdas: Vec<f64>,
    pub mus: Vec<f64>,
    pub residuals: Vec<f64>,
    pub b_hash: String,
}

/// Principal eigenvalue `mu(lambda, b)` from the transfer-matrix condition.
pub fn dispersion_mu(b: &PeriodicCoefficient, lambda: f64) -> Result<f64> {
    dispersion_root(b, lambda).map(|r| r.mu)
}

pub fn dispersion_root(b: &PeriodicCoefficient, lambda: f64) -> Result<DispersionRoot> {
    CellLayout::from_coefficient(b)?.principal_root(lambda)
}

/// `mu(lambda, b)` on every point of `lambdas` (must be increasing).
/// The first failing point is reported with its `lambda`.
pub fn dispersion_curve(b: &PeriodicCoefficient, lambdas: &[f64]) -> Result<DispersionCurve> {
    if lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("lambda grid must be strictly increasing"));
    }
    let layout = CellLayout::from_coefficient(b)?;
    let roots: Vec<Result<DispersionRoot>> = lambdas
        .par_iter()
        .map(|&l| layout.principal_root(l).map_err(|e| e.at_lambda(l)))
        .collect();
    let roots = roots.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(DispersionCurve {
        lambdas: lambdas.to_vec(),
        mus: roots.iter().map(|r| r.mu).collect(),
        residuals: roots.iter().map(|r| r.residual).collect(),
        b_hash: b.content_hash(),
    })
}
