//! Periodic nonnegative coefficients with prescribed cell mass.
//!
//! A [`PeriodicCoefficient`] is an `L`-periodic nonnegative measure whose
//! mass per period is `alpha * L`. It has an optional continuous part
//! (uniform samples read as a periodic piecewise-linear function, or a
//! piecewise-constant profile) and a finite list of point masses in the open
//! cell `(0, L)`.
//!
//! Every constructor checks nonnegativity and the cell mass (to `1e-12`
//! relative); the value is immutable afterwards.

mod file;

pub use file::{load_coefficient, CoefficientFile, CoefficientKind, ContinuousFile};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Relative tolerance on the cell-mass constraint.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Default number of samples per period for sampled profiles.
pub const DEFAULT_SAMPLES: usize = 1024;

/// Smallest accepted number of samples per period.
pub const MIN_SAMPLES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub position: f64,
    pub mass: f64,
}

impl Atom {
    pub fn new(position: f64, mass: f64) -> Self {
        Self { position, mass }
    }
}

/// Continuous part of a coefficient.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Continuous {
    /// Values at `x_i = i L / n`, interpolated linearly with wraparound.
    Samples { values: Vec<f64> },
    /// Level `levels[i]` on `[breakpoints[i], breakpoints[i+1])`; the last
    /// segment wraps around to `breakpoints[0] + L`.
    Piecewise { breakpoints: Vec<f64>, levels: Vec<f64> },
}

/// Which of the four admissible shapes a coefficient has.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyKind {
    Samples,
    Piecewise,
    Atoms,
    Mixture,
}

/// How point masses are put on a uniform node grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomDiscretization {
    /// Whole mass `m / dx` on the node whose dual cell contains the atom.
    #[default]
    Lumped,
    /// Mass shared between the two neighbouring nodes with linear weights.
    Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// Hat of half-width `width / 2` and height `2 m / width`.
    #[default]
    Triangle,
    /// Gaussian with standard deviation `width / 6`, cut at `width / 2`.
    GaussianTruncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierSpec {
    pub width: f64,
    pub kernel: Kernel,
}

impl MollifierSpec {
    pub fn triangle(width: f64) -> Self {
        Self {
            width,
            kernel: Kernel::Triangle,
        }
    }

    pub fn gaussian(width: f64) -> Self {
        Self {
            width,
            kernel: Kernel::GaussianTruncated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicCoefficient {
    period: f64,
    alpha: f64,
    continuous: Option<Continuous>,
    atoms: Vec<Atom>,
}

impl PeriodicCoefficient {
    /// Builds and validates a coefficient.
    pub fn new(
        period: f64,
        alpha: f64,
        continuous: Option<Continuous>,
        mut atoms: Vec<Atom>,
    ) -> Result<Self> {
        check_positive("period", period)?;
        check_positive("alpha", alpha)?;
        if continuous.is_none() && atoms.is_empty() {
            return Err(Error::param("coefficient has neither a continuous part nor atoms"));
        }
        if let Some(c) = &continuous {
            validate_continuous(c, period)?;
        }
        for a in &atoms {
            if !(a.position.is_finite() && a.position > 0.0 && a.position < period) {
                return Err(Error::param(format!(
                    "atom position {} must lie in the open cell (0, {period})",
                    a.position
                )));
            }
            if !(a.mass.is_finite() && a.mass > 0.0) {
                return Err(Error::param(format!("atom mass {} must be positive", a.mass)));
            }
        }
        atoms.sort_by(|a, b| a.position.total_cmp(&b.position));
        if atoms.windows(2).any(|w| w[0].position == w[1].position) {
            return Err(Error::param("atom positions must be pairwise distinct"));
        }
        let b = Self {
            period,
            alpha,
            continuous,
            atoms,
        };
        let target = alpha * period;
        let mass = b.mass();
        if ((mass - target) / target).abs() > MASS_TOLERANCE {
            return Err(Error::param(format!(
                "cell mass {mass} differs from alpha * L = {target}"
            )));
        }
        Ok(b)
    }

    /// Samples profile whose mean is taken as `alpha`.
    pub fn from_samples(period: f64, values: Vec<f64>) -> Result<Self> {
        check_positive("period", period)?;
        let mass = samples_mass(&values, period);
        Self::new(period, mass / period, Some(Continuous::Samples { values }), vec![])
    }

    /// Samples profile rescaled to cell mass `alpha * L`.
    pub fn from_samples_normalized(period: f64, alpha: f64, mut values: Vec<f64>) -> Result<Self> {
        check_positive("period", period)?;
        check_positive("alpha", alpha)?;
        let mass = samples_mass(&values, period);
        if !(mass > 0.0) {
            return Err(Error::param("samples have no mass to normalise"));
        }
        let scale = alpha * period / mass;
        values.iter_mut().for_each(|v| *v *= scale);
        Self::new(period, alpha, Some(Continuous::Samples { values }), vec![])
    }

    pub fn from_piecewise(period: f64, breakpoints: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        let c = Continuous::Piecewise { breakpoints, levels };
        validate_continuous(&c, period)?;
        let alpha = continuous_mass(&c, period) / period;
        Self::new(period, alpha, Some(c), vec![])
    }

    pub fn from_atoms(period: f64, atoms: Vec<Atom>) -> Result<Self> {
        check_positive("period", period)?;
        let alpha = atoms.iter().map(|a| a.mass).sum::<f64>() / period;
        Self::new(period, alpha, None, atoms)
    }

    pub fn mixture(period: f64, continuous: Continuous, atoms: Vec<Atom>) -> Result<Self> {
        validate_continuous(&continuous, period)?;
        let mass = continuous_mass(&continuous, period) + atoms.iter().map(|a| a.mass).sum::<f64>();
        Self::new(period, mass / period, Some(continuous), atoms)
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn continuous(&self) -> Option<&Continuous> {
        self.continuous.as_ref()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn kind(&self) -> BodyKind {
        match (&self.continuous, self.atoms.is_empty()) {
            (Some(Continuous::Samples { .. }), true) => BodyKind::Samples,
            (Some(Continuous::Piecewise { .. }), true) => BodyKind::Piecewise,
            (None, _) => BodyKind::Atoms,
            (Some(_), false) => BodyKind::Mixture,
        }
    }

    pub fn has_atoms(&self) -> bool {
        !self.atoms.is_empty()
    }

    /// True when the continuous part is piecewise constant (constant samples
    /// included), so that the transfer-matrix solver applies.
    pub fn is_piecewise_or_atomic(&self) -> bool {
        match &self.continuous {
            Some(Continuous::Samples { values }) => values.iter().all(|v| *v == values[0]),
            _ => true,
        }
    }

    /// Trapezoidal mass of the continuous part plus the atom masses.
    pub fn mass(&self) -> f64 {
        let c = self
            .continuous
            .as_ref()
            .map_or(0.0, |c| continuous_mass(c, self.period));
        c + self.atoms.iter().map(|a| a.mass).sum::<f64>()
    }

    /// `|| b - alpha ||_inf` for coefficients without atoms, `+inf` otherwise.
    pub fn sup_distance_from_mean(&self) -> f64 {
        if self.has_atoms() {
            return f64::INFINITY;
        }
        match &self.continuous {
            Some(Continuous::Samples { values }) => values
                .iter()
                .map(|v| (v - self.alpha).abs())
                .fold(0.0, f64::max),
            Some(Continuous::Piecewise { levels, .. }) => levels
                .iter()
                .map(|v| (v - self.alpha).abs())
                .fold(0.0, f64::max),
            None => f64::INFINITY,
        }
    }

    /// Value of the continuous part at `x` (any real; periodic).
    pub fn eval_continuous(&self, x: f64) -> f64 {
        match &self.continuous {
            None => 0.0,
            Some(Continuous::Samples { values }) => lerp_periodic(values, self.period, x),
            Some(Continuous::Piecewise { breakpoints, levels }) => {
                levels[segment_index(breakpoints, wrap(x, self.period))]
            }
        }
    }

    /// `int_a^b` of the continuous part, exact for the representation.
    pub fn integrate_continuous(&self, a: f64, b: f64) -> f64 {
        self.antiderivative(b) - self.antiderivative(a)
    }

    fn antiderivative(&self, x: f64) -> f64 {
        let Some(c) = &self.continuous else {
            return 0.0;
        };
        let l = self.period;
        let k = (x / l).floor();
        let r = x - k * l;
        k * continuous_mass(c, l) + antiderivative_in_cell(c, l, r)
    }

    /// Points inside `[0, L)` where the continuous part is not smooth.
    fn knots(&self) -> Vec<f64> {
        match &self.continuous {
            None => vec![],
            Some(Continuous::Samples { values }) => {
                let dx = self.period / values.len() as f64;
                (0..values.len()).map(|i| i as f64 * dx).collect()
            }
            Some(Continuous::Piecewise { breakpoints, .. }) => breakpoints.clone(),
        }
    }

    /// `int_[0,L) b(x) g(x) dx` over the continuous part, where `g` is smooth
    /// between consecutive points of `extra_knots` (and the coefficient's own
    /// knots). Simpson's rule per piece is exact whenever `b * g` is a cubic
    /// there.
    pub fn integrate_continuous_against(&self, g: impl Fn(f64) -> f64, extra_knots: &[f64]) -> f64 {
        let Some(c) = &self.continuous else {
            return 0.0;
        };
        let l = self.period;
        let mut knots = self.knots();
        knots.extend(extra_knots.iter().map(|&x| wrap(x, l)));
        knots.push(0.0);
        knots.sort_by(f64::total_cmp);
        knots.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * l);
        knots.push(l);
        let piecewise = matches!(c, Continuous::Piecewise { .. });
        let mut total = 0.0;
        for w in knots.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let m = 0.5 * (a + b);
            let (fa, fm, fb) = if piecewise {
                let level = self.eval_continuous(m);
                (level * g(a), level * g(m), level * g(b))
            } else {
                (
                    self.eval_continuous(a) * g(a),
                    self.eval_continuous(m) * g(m),
                    self.eval_continuous(b) * g(b),
                )
            };
            total += (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        }
        total
    }

    /// Node values of `b` on `n` uniform nodes `x_i = i L / n`, with atoms
    /// turned into rates of order `m / dx`.
    ///
    /// Samples are interpolated at the nodes; piecewise-constant parts are
    /// averaged over the dual cell `[x_i - dx/2, x_i + dx/2]`.
    pub fn grid_rates(&self, n: usize, mode: AtomDiscretization) -> Vec<f64> {
        let l = self.period;
        let dx = l / n as f64;
        let mut rates: Vec<f64> = match &self.continuous {
            None => vec![0.0; n],
            Some(Continuous::Samples { values }) if values.len() == n => values.clone(),
            // Cell averages keep the mass when the profile is finer than the grid.
            Some(_) => (0..n)
                .map(|i| {
                    let x = i as f64 * dx;
                    self.integrate_continuous(x - 0.5 * dx, x + 0.5 * dx) / dx
                })
                .collect(),
        };
        for a in &self.atoms {
            let s = a.position / dx;
            match mode {
                AtomDiscretization::Lumped => {
                    let j = (s.round() as usize) % n;
                    rates[j] += a.mass / dx;
                }
                AtomDiscretization::Split => {
                    let j = s.floor();
                    let theta = s - j;
                    let j = j as usize % n;
                    rates[j] += (1.0 - theta) * a.mass / dx;
                    rates[(j + 1) % n] += theta * a.mass / dx;
                }
            }
        }
        rates
    }

    /// Smallest distance between neighbouring atoms, counting the seam.
    pub fn min_atom_gap(&self) -> f64 {
        match self.atoms.len() {
            0 => f64::INFINITY,
            1 => self.period,
            k => {
                let mut gap = self.atoms[0].position + self.period - self.atoms[k - 1].position;
                for w in self.atoms.windows(2) {
                    gap = gap.min(w[1].position - w[0].position);
                }
                gap
            }
        }
    }

    /// Same coefficient seen from a cell origin moved by `-shift`, i.e.
    /// `b_new(x) = b(x - shift)`. Sample profiles only shift by whole cells.
    pub fn shifted(&self, shift: f64) -> Result<Self> {
        let l = self.period;
        let continuous = match &self.continuous {
            None => None,
            Some(Continuous::Samples { values }) => {
                let n = values.len();
                let steps = shift / (l / n as f64);
                let k = steps.round();
                if (steps - k).abs() > 1e-9 {
                    return Err(Error::param(
                        "sampled profiles can only be shifted by whole grid cells",
                    ));
                }
                let k = (k as i64).rem_euclid(n as i64) as usize;
                let mut v = values.clone();
                v.rotate_right(k);
                Some(Continuous::Samples { values: v })
            }
            Some(Continuous::Piecewise { breakpoints, levels }) => {
                let mut segs: Vec<(f64, f64)> = breakpoints
                    .iter()
                    .zip(levels)
                    .map(|(&p, &v)| (snap_cell(wrap(p + shift, l), l), v))
                    .collect();
                segs.sort_by(|a, b| a.0.total_cmp(&b.0));
                Some(Continuous::Piecewise {
                    breakpoints: segs.iter().map(|s| s.0).collect(),
                    levels: segs.iter().map(|s| s.1).collect(),
                })
            }
        };
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom::new(snap_cell(wrap(a.position + shift, l), l), a.mass))
            .collect();
        Self::new(l, self.alpha, continuous, atoms)
    }

    /// `b_s(x) = s^2 b(s x)`: period `L / s`, mean `s^2 alpha`.
    pub fn rescaled(&self, s: f64) -> Result<Self> {
        check_positive("scale", s)?;
        let continuous = self.continuous.as_ref().map(|c| match c {
            Continuous::Samples { values } => Continuous::Samples {
                values: values.iter().map(|v| v * s * s).collect(),
            },
            Continuous::Piecewise { breakpoints, levels } => Continuous::Piecewise {
                breakpoints: breakpoints.iter().map(|p| p / s).collect(),
                levels: levels.iter().map(|v| v * s * s).collect(),
            },
        });
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom::new(a.position / s, a.mass * s))
            .collect();
        let alpha = self.alpha * s * s;
        let period = self.period / s;
        // Rescaling perturbs the mass at round-off level; re-normalise.
        let mut b = Self {
            period,
            alpha,
            continuous,
            atoms,
        };
        let scale = alpha * period / b.mass();
        b.scale_mass(scale);
        Self::new(b.period, b.alpha, b.continuous, b.atoms)
    }

    fn scale_mass(&mut self, scale: f64) {
        match &mut self.continuous {
            Some(Continuous::Samples { values }) => values.iter_mut().for_each(|v| *v *= scale),
            Some(Continuous::Piecewise { levels, .. }) => levels.iter_mut().for_each(|v| *v *= scale),
            None => {}
        }
        self.atoms.iter_mut().for_each(|a| a.mass *= scale);
    }

    /// Short human-readable label.
    pub fn describe(&self) -> String {
        let cont = match &self.continuous {
            None => String::new(),
            Some(Continuous::Samples { values }) => format!("samples(n={})", values.len()),
            Some(Continuous::Piecewise { levels, .. }) => format!("piecewise({} segments)", levels.len()),
        };
        let atoms = if self.atoms.is_empty() {
            String::new()
        } else {
            format!("atoms({})", self.atoms.len())
        };
        let body = match (cont.is_empty(), atoms.is_empty()) {
            (false, true) => cont,
            (true, false) => atoms,
            _ => format!("{cont}+{atoms}"),
        };
        format!("{body};alpha={};L={}", self.alpha, self.period)
    }

    /// Stable content hash used as provenance id.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("coefficient serialises");
        let digest = Sha256::digest(&bytes);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// `b = alpha` sampled on the default grid.
pub fn make_constant(alpha: f64, period: f64) -> Result<PeriodicCoefficient> {
    make_constant_with_grid(alpha, period, DEFAULT_SAMPLES)
}

pub fn make_constant_with_grid(alpha: f64, period: f64, n: usize) -> Result<PeriodicCoefficient> {
    check_positive("alpha", alpha)?;
    check_positive("period", period)?;
    PeriodicCoefficient::new(
        period,
        alpha,
        Some(Continuous::Samples {
            values: vec![alpha; n],
        }),
        vec![],
    )
}

/// One atom of mass `alpha L` at the cell centre.
pub fn make_delta_comb(alpha: f64, period: f64) -> Result<PeriodicCoefficient> {
    check_positive("alpha", alpha)?;
    check_positive("period", period)?;
    PeriodicCoefficient::new(period, alpha, None, vec![Atom::new(0.5 * period, alpha * period)])
}

/// Two-level habitat: level `b1` on a zone of length `fraction * L` centred
/// at `L/2`, level `b2` elsewhere, with `b1 = contrast * b2` and mean
/// `alpha`. `contrast = f64::INFINITY` means `b2 = 0`.
pub fn make_shigesada(
    alpha: f64,
    period: f64,
    fraction: f64,
    contrast: f64,
) -> Result<PeriodicCoefficient> {
    check_positive("alpha", alpha)?;
    check_positive("period", period)?;
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::param(format!("zone fraction {fraction} must lie in (0, 1]")));
    }
    if contrast.is_nan() || contrast < 0.0 {
        return Err(Error::param(format!(
            "contrast {contrast} would need a negative level"
        )));
    }
    if fraction == 1.0 {
        return PeriodicCoefficient::new(
            period,
            alpha,
            Some(Continuous::Piecewise {
                breakpoints: vec![0.0],
                levels: vec![alpha],
            }),
            vec![],
        );
    }
    let (b1, b2) = if contrast.is_infinite() {
        (alpha / fraction, 0.0)
    } else {
        let b2 = alpha / (fraction * contrast + 1.0 - fraction);
        (contrast * b2, b2)
    };
    let lo = 0.5 * period * (1.0 - fraction);
    let hi = 0.5 * period * (1.0 + fraction);
    let mut c = Continuous::Piecewise {
        breakpoints: vec![0.0, lo, hi],
        levels: vec![b2, b1, b2],
    };
    // Floating-point lengths can miss alpha L by an ulp or two.
    let mass = continuous_mass(&c, period);
    if let Continuous::Piecewise { levels, .. } = &mut c {
        levels.iter_mut().for_each(|v| *v *= alpha * period / mass);
    }
    PeriodicCoefficient::new(period, alpha, Some(c), vec![])
}

const FOURIER_CLIP_WIDTH: f64 = 0.1;

/// Zero below 0, `v^2 / 2w` on `[0, w]`, `v - w/2` above: nonnegative and C1.
fn soft_clip(v: f64, w: f64) -> f64 {
    if v <= 0.0 {
        0.0
    } else if v < w {
        0.5 * v * v / w
    } else {
        v - 0.5 * w
    }
}

/// Random smooth profile `alpha (1 + sum_k (a_k cos + b_k sin)(2 pi k x / L))`
/// with `|a_k|, |b_k| <= amplitude / k^smoothness`, passed through a C1
/// clip at zero and renormalised to cell mass `alpha L`. Deterministic in
/// `seed`.
pub fn make_fourier_random(
    alpha: f64,
    period: f64,
    seed: u64,
    smoothness: f64,
    modes: usize,
    n: usize,
) -> Result<PeriodicCoefficient> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amplitude: f64 = rng.gen_range(0.2..1.5);
    let coeffs: Vec<(f64, f64)> = (1..=modes)
        .map(|k| {
            let s = amplitude / (k as f64).powf(smoothness);
            (rng.gen_range(-s..s), rng.gen_range(-s..s))
        })
        .collect();
    let values: Vec<f64> = (0..n)
        .map(|i| {
            let x = i as f64 / n as f64;
            let wave: f64 = coeffs
                .iter()
                .enumerate()
                .map(|(j, (a, b))| {
                    let arg = 2.0 * std::f64::consts::PI * (j + 1) as f64 * x;
                    a * arg.cos() + b * arg.sin()
                })
                .sum();
            soft_clip(1.0 + wave, FOURIER_CLIP_WIDTH) * alpha
        })
        .collect();
    PeriodicCoefficient::from_samples_normalized(period, alpha, values)
}

/// Replaces every atom by a bump of equal mass and width `spec.width`,
/// returning a sampled profile on `DEFAULT_SAMPLES` nodes.
pub fn mollify(b: &PeriodicCoefficient, spec: MollifierSpec) -> Result<PeriodicCoefficient> {
    mollify_with_grid(b, spec, DEFAULT_SAMPLES)
}

pub fn mollify_with_grid(
    b: &PeriodicCoefficient,
    spec: MollifierSpec,
    n: usize,
) -> Result<PeriodicCoefficient> {
    if !b.has_atoms() {
        return Err(Error::NothingToMollify);
    }
    check_positive("mollifier width", spec.width)?;
    let gap = b.min_atom_gap();
    if spec.width >= gap {
        return Err(Error::KernelOverlap {
            width: spec.width,
            gap,
        });
    }
    if n < MIN_SAMPLES {
        return Err(Error::param(format!("need at least {MIN_SAMPLES} samples")));
    }
    let l = b.period();
    let dx = l / n as f64;

    let mut values: Vec<f64> = match b.continuous() {
        None => vec![0.0; n],
        Some(Continuous::Samples { values }) if values.len() == n => values.clone(),
        Some(c) => {
            // Dual-cell averages conserve the continuous mass exactly for
            // piecewise parts; samples on another grid are renormalised.
            let mut v: Vec<f64> = (0..n)
                .map(|i| {
                    let x = i as f64 * dx;
                    b.integrate_continuous(x - 0.5 * dx, x + 0.5 * dx) / dx
                })
                .collect();
            let want = continuous_mass(c, l);
            let got = samples_mass(&v, l);
            if got > 0.0 {
                v.iter_mut().for_each(|x| *x *= want / got);
            }
            v
        }
    };

    let half = 0.5 * spec.width;
    for atom in b.atoms() {
        let mut bump = vec![0.0; n];
        let lo = ((atom.position - half) / dx).floor() as i64;
        let hi = ((atom.position + half) / dx).ceil() as i64;
        for k in lo..=hi {
            let d = (k as f64 * dx - atom.position).abs();
            if d >= half {
                continue;
            }
            let shape = match spec.kernel {
                Kernel::Triangle => 1.0 - d / half,
                Kernel::GaussianTruncated => {
                    let sigma = spec.width / 6.0;
                    (-0.5 * (d / sigma).powi(2)).exp()
                }
            };
            bump[k.rem_euclid(n as i64) as usize] += shape;
        }
        let raw: f64 = bump.iter().sum::<f64>() * dx;
        if raw > 0.0 {
            let scale = atom.mass / raw;
            for (v, s) in values.iter_mut().zip(&bump) {
                *v += s * scale;
            }
        } else {
            let j = ((atom.position / dx).round() as usize) % n;
            values[j] += atom.mass / dx;
        }
    }
    PeriodicCoefficient::from_samples_normalized(l, b.alpha(), values)
}

/// `int_[0,L) b eta`, with `eta` given by uniform periodic samples read as a
/// piecewise-linear function; atoms evaluate `eta` pointwise.
pub fn weak_pairing(b: &PeriodicCoefficient, eta: &[f64]) -> Result<f64> {
    if eta.len() < 2 {
        return Err(Error::InvalidInput(
            "test function needs at least two samples".into(),
        ));
    }
    if eta.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("test function has non-finite samples".into()));
    }
    let l = b.period();
    let h = l / eta.len() as f64;
    let knots: Vec<f64> = (0..eta.len()).map(|i| i as f64 * h).collect();
    let eta_at = |x: f64| lerp_periodic(eta, l, x);
    let cont = b.integrate_continuous_against(eta_at, &knots);
    let atoms: f64 = b.atoms().iter().map(|a| a.mass * eta_at(a.position)).sum();
    Ok(cont + atoms)
}

pub(crate) fn wrap(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    if r >= period {
        0.0
    } else {
        r
    }
}

fn snap_cell(x: f64, period: f64) -> f64 {
    if (period - x).abs() <= 1e-14 * period {
        0.0
    } else {
        x
    }
}

/// Periodic linear interpolation of uniform samples on `[0, period)`.
pub fn lerp_periodic(values: &[f64], period: f64, x: f64) -> f64 {
    let n = values.len();
    let s = wrap(x, period) / period * n as f64;
    let i = s.floor();
    let t = s - i;
    let i = (i as usize) % n;
    values[i] * (1.0 - t) + values[(i + 1) % n] * t
}

fn samples_mass(values: &[f64], period: f64) -> f64 {
    values.iter().sum::<f64>() * period / values.len() as f64
}

fn continuous_mass(c: &Continuous, period: f64) -> f64 {
    match c {
        Continuous::Samples { values } => samples_mass(values, period),
        Continuous::Piecewise { breakpoints, levels } => {
            let k = breakpoints.len();
            (0..k)
                .map(|i| {
                    let end = if i + 1 < k {
                        breakpoints[i + 1]
                    } else {
                        breakpoints[0] + period
                    };
                    levels[i] * (end - breakpoints[i])
                })
                .sum()
        }
    }
}

fn segment_index(breakpoints: &[f64], x: f64) -> usize {
    // Last breakpoint <= x; points before the first one wrap to the last segment.
    match breakpoints.partition_point(|&p| p <= x) {
        0 => breakpoints.len() - 1,
        i => i - 1,
    }
}

fn antiderivative_in_cell(c: &Continuous, period: f64, x: f64) -> f64 {
    match c {
        Continuous::Samples { values } => {
            let n = values.len();
            let dx = period / n as f64;
            let s = x / dx;
            let k = (s.floor() as usize).min(n - 1);
            let t = s - k as f64;
            let full: f64 = (0..k)
                .map(|j| 0.5 * (values[j] + values[(j + 1) % n]))
                .sum::<f64>()
                * dx;
            let a = values[k];
            let b = values[(k + 1) % n];
            full + dx * (a * t + 0.5 * (b - a) * t * t)
        }
        Continuous::Piecewise { breakpoints, levels } => {
            let k = breakpoints.len();
            let mut total = 0.0;
            // Segment pieces intersected with [0, x].
            for i in 0..k {
                let start = breakpoints[i];
                let end = if i + 1 < k {
                    breakpoints[i + 1]
                } else {
                    breakpoints[0] + period
                };
                for (s, e) in [(start, end), (start - period, end - period)] {
                    let lo = s.max(0.0);
                    let hi = e.min(x);
                    if hi > lo {
                        total += levels[i] * (hi - lo);
                    }
                }
            }
            total
        }
    }
}

fn validate_continuous(c: &Continuous, period: f64) -> Result<()> {
    match c {
        Continuous::Samples { values } => {
            if values.len() < MIN_SAMPLES {
                return Err(Error::param(format!(
                    "sampled profile needs at least {MIN_SAMPLES} values, got {}",
                    values.len()
                )));
            }
            if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::param("sampled values must be finite and nonnegative"));
            }
        }
        Continuous::Piecewise { breakpoints, levels } => {
            if breakpoints.is_empty() || breakpoints.len() != levels.len() {
                return Err(Error::param(
                    "piecewise profile needs one level per breakpoint",
                ));
            }
            if breakpoints.iter().any(|p| !(p.is_finite() && *p >= 0.0 && *p < period)) {
                return Err(Error::param("breakpoints must lie in [0, L)"));
            }
            if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::param("breakpoints must be strictly increasing"));
            }
            if levels.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::param("levels must be finite and nonnegative"));
            }
        }
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(format!("{name} must be positive and finite, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn constant_profiles() {
        let b = make_constant(1.0, 1.0).unwrap();
        assert_eq!(b.kind(), BodyKind::Samples);
        assert_eq!(b.mass(), 1.0);
        let b = make_constant(2.0, 0.5).unwrap();
        assert!(rel(b.mass(), 1.0) <= MASS_TOLERANCE);
        assert!(b.eval_continuous(0.37).eq(&2.0));
        assert!(matches!(make_constant(0.0, 1.0), Err(Error::InvalidParameter(_))));
        assert!(make_constant(1.0, -1.0).is_err());
    }

    #[test]
    fn delta_comb_layout() {
        let h = make_delta_comb(1.0, 1.0).unwrap();
        assert_eq!(h.atoms(), &[Atom::new(0.5, 1.0)]);
        assert_eq!(h.kind(), BodyKind::Atoms);
        assert_eq!(h.mass(), 1.0);
        let h = make_delta_comb(3.0, 2.0).unwrap();
        assert_eq!(h.atoms(), &[Atom::new(1.0, 6.0)]);
    }

    #[test]
    fn shigesada_levels() {
        let b = make_shigesada(1.0, 1.0, 0.5, f64::INFINITY).unwrap();
        assert_eq!(b.eval_continuous(0.5), 2.0);
        assert_eq!(b.eval_continuous(0.1), 0.0);
        assert!(rel(b.mass(), 1.0) <= MASS_TOLERANCE);

        let b = make_shigesada(1.0, 1.0, 0.25, f64::INFINITY).unwrap();
        assert_eq!(b.eval_continuous(0.5), 4.0);
        assert!(rel(b.mass(), 1.0) <= MASS_TOLERANCE);

        let b = make_shigesada(1.0, 1.0, 1.0, 7.0).unwrap();
        assert_eq!(b.eval_continuous(0.9), 1.0);
        assert_eq!(b.sup_distance_from_mean(), 0.0);

        let b = make_shigesada(2.0, 3.0, 0.4, 3.0).unwrap();
        let b2 = b.eval_continuous(0.0);
        let b1 = b.eval_continuous(1.5);
        assert!((b1 / b2 - 3.0).abs() < 1e-12);
        assert!(rel(b.mass(), 6.0) <= MASS_TOLERANCE);

        assert!(make_shigesada(1.0, 1.0, 0.5, -1.0).is_err());
        assert!(make_shigesada(1.0, 1.0, 0.0, 1.0).is_err());
        assert!(make_shigesada(1.0, 1.0, 1.5, 1.0).is_err());
    }

    #[test]
    fn validation_rejects_bad_coefficients() {
        assert!(PeriodicCoefficient::from_atoms(1.0, vec![Atom::new(0.0, 1.0)]).is_err());
        assert!(PeriodicCoefficient::from_atoms(1.0, vec![Atom::new(1.0, 1.0)]).is_err());
        assert!(
            PeriodicCoefficient::from_atoms(1.0, vec![Atom::new(0.3, 1.0), Atom::new(0.3, 1.0)])
                .is_err()
        );
        assert!(PeriodicCoefficient::from_atoms(1.0, vec![Atom::new(0.3, -1.0)]).is_err());
        assert!(PeriodicCoefficient::from_samples(1.0, vec![1.0; 8]).is_err());
        let mut v = vec![1.0; 32];
        v[3] = -0.1;
        assert!(PeriodicCoefficient::from_samples(1.0, v).is_err());
        // Wrong declared alpha.
        assert!(PeriodicCoefficient::new(1.0, 2.0, None, vec![Atom::new(0.5, 1.0)]).is_err());
    }

    #[test]
    fn triangle_mollifier_height_and_mass() {
        let h = make_delta_comb(1.0, 1.0).unwrap();
        let b = mollify(&h, MollifierSpec::triangle(0.1)).unwrap();
        // Atom sits on a node, so the bump peak is sampled exactly.
        let peak = b.eval_continuous(0.5);
        assert!((peak - 20.0).abs() < 0.05, "peak {peak}");
        assert_eq!(b.eval_continuous(0.44), 0.0);
        for eps in [0.2, 0.1, 0.05] {
            let b = mollify(&h, MollifierSpec::triangle(eps)).unwrap();
            assert!(rel(b.mass(), h.mass()) <= MASS_TOLERANCE);
            let g = mollify(&h, MollifierSpec::gaussian(eps)).unwrap();
            assert!(rel(g.mass(), h.mass()) <= MASS_TOLERANCE);
        }
    }

    #[test]
    fn mollifier_respects_gap() {
        let b = PeriodicCoefficient::from_atoms(1.0, vec![Atom::new(0.3, 0.7), Atom::new(0.55, 0.3)])
            .unwrap();
        assert!((b.min_atom_gap() - 0.25).abs() < 1e-15);
        assert!(matches!(
            mollify(&b, MollifierSpec::triangle(0.3)),
            Err(Error::KernelOverlap { .. })
        ));
        assert!(mollify(&b, MollifierSpec::triangle(0.2)).is_ok());
        let c = make_constant(1.0, 1.0).unwrap();
        assert!(matches!(
            mollify(&c, MollifierSpec::triangle(0.1)),
            Err(Error::NothingToMollify)
        ));
    }

    #[test]
    fn mollify_mixture_keeps_continuous_mass() {
        let b = PeriodicCoefficient::mixture(
            1.0,
            Continuous::Piecewise {
                breakpoints: vec![0.0, 0.5],
                levels: vec![1.0, 0.0],
            },
            vec![Atom::new(0.75, 0.5)],
        )
        .unwrap();
        let m = mollify(&b, MollifierSpec::triangle(0.1)).unwrap();
        assert!(rel(m.mass(), 1.0) <= MASS_TOLERANCE);
        assert!((m.eval_continuous(0.25) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weak_pairing_examples() {
        let one = vec![1.0; 64];
        let b = make_constant(1.0, 1.0).unwrap();
        assert!((weak_pairing(&b, &one).unwrap() - 1.0).abs() < 1e-14);

        let h = make_delta_comb(1.0, 1.0).unwrap();
        let ramp: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        assert!((weak_pairing(&h, &ramp).unwrap() - 0.5).abs() < 1e-14);

        let s = make_shigesada(1.0, 1.0, 0.5, f64::INFINITY).unwrap();
        assert!((weak_pairing(&s, &one).unwrap() - 1.0).abs() < 1e-14);

        assert!(weak_pairing(&s, &[1.0]).is_err());
    }

    #[test]
    fn mollified_pairing_converges_to_point_evaluation() {
        let h = make_delta_comb(1.0, 1.0).unwrap();
        let eta: Vec<f64> = (0..1024).map(|i| (2.0 * PI * i as f64 / 1024.0).cos()).collect();
        // Closed form for the point mass: alpha L cos(pi).
        let exact = -1.0;
        assert!((weak_pairing(&h, &eta).unwrap() - exact).abs() < 1e-12);
        let mut last = f64::INFINITY;
        for eps in [0.2, 0.1, 0.05, 0.025] {
            let b = mollify(&h, MollifierSpec::triangle(eps)).unwrap();
            let err = (weak_pairing(&b, &eta).unwrap() - exact).abs();
            assert!(err < last, "eps {eps}: {err} !< {last}");
            last = err;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn shifted_frame_pairing_is_invariant() {
        let b = PeriodicCoefficient::from_atoms(1.0, vec![Atom::new(0.3, 0.7), Atom::new(0.55, 0.3)])
            .unwrap();
        let n = 512;
        let eta: Vec<f64> = (0..n)
            .map(|i| {
                let x = i as f64 / n as f64;
                (2.0 * PI * x).sin() + 0.3 * (6.0 * PI * x).cos()
            })
            .collect();
        let shifted = b.shifted(0.5).unwrap();
        let eta_shift: Vec<f64> = (0..n).map(|i| eta[(i + n / 2) % n]).collect();
        let a = weak_pairing(&b, &eta).unwrap();
        let c = weak_pairing(&shifted, &eta_shift).unwrap();
        assert!((a - c).abs() < 1e-13);
    }

    #[test]
    fn integrals_exact_for_representation() {
        let s = make_shigesada(1.0, 1.0, 0.5, f64::INFINITY).unwrap();
        assert!((s.integrate_continuous(0.0, 1.0) - 1.0).abs() < 1e-14);
        assert!((s.integrate_continuous(0.2, 0.3) - 0.1).abs() < 1e-14);
        assert!((s.integrate_continuous(-0.5, 1.5) - 2.0).abs() < 1e-13);
        let v: Vec<f64> = (0..32).map(|i| 1.0 + (i % 4) as f64).collect();
        let b = PeriodicCoefficient::from_samples(2.0, v).unwrap();
        assert!((b.integrate_continuous(0.0, 2.0) - b.mass()).abs() < 1e-13);
    }

    #[test]
    fn grid_rates_conserve_mass() {
        let b = PeriodicCoefficient::mixture(
            1.0,
            Continuous::Piecewise {
                breakpoints: vec![0.1, 0.6],
                levels: vec![0.4, 1.0],
            },
            vec![Atom::new(0.3337, 0.2)],
        )
        .unwrap();
        for mode in [AtomDiscretization::Lumped, AtomDiscretization::Split] {
            let n = 256;
            let r = b.grid_rates(n, mode);
            let m: f64 = r.iter().sum::<f64>() / n as f64;
            assert!((m - b.mass()).abs() < 1e-12, "{mode:?}: {m}");
        }
    }

    #[test]
    fn rescaling_maps_alpha_and_period() {
        let h = make_delta_comb(1.0, 1.0).unwrap();
        let r = h.rescaled(2.0).unwrap();
        assert_eq!(r.period(), 0.5);
        assert_eq!(r.alpha(), 4.0);
        assert_eq!(r.atoms()[0], Atom::new(0.25, 2.0));
    }

    #[test]
    fn fourier_profiles_are_admissible_and_deterministic() {
        for seed in 0..20 {
            let b = make_fourier_random(1.0, 1.0, seed, 2.0, 8, 256).unwrap();
            assert!(rel(b.mass(), 1.0) <= MASS_TOLERANCE);
            let again = make_fourier_random(1.0, 1.0, seed, 2.0, 8, 256).unwrap();
            assert_eq!(b, again);
        }
    }
}
