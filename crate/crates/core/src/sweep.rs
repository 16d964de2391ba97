//! Batch experiments over coefficient families.

use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeff::{
    make_delta_comb, make_fourier_random, make_shigesada, mollify, Kernel, MollifierSpec,
    PeriodicCoefficient, DEFAULT_SAMPLES,
};
use crate::eigen::EigenMethod;
use crate::error::{Error, Result};
use crate::speed::{
    default_method, direction_symmetry_check, minimal_speed, speed_bounds, Direction,
    MuEvaluator, SpeedConfig,
};

/// Slack on the speed band and on the ordering against the comb.
pub const BAND_TOLERANCE: f64 = 1e-3;
pub const ORDERING_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// Every pair of zone fraction and contrast; `inf` contrast means an
    /// empty outer zone.
    Shigesada {
        fractions: Vec<f64>,
        #[serde(deserialize_with = "contrasts")]
        contrasts: Vec<f64>,
    },
    /// The Dirac comb smoothed at each width.
    MollifiedComb {
        widths: Vec<f64>,
        #[serde(default)]
        kernel: Kernel,
    },
    /// `count` random smooth profiles; member seeds are drawn from `seed`.
    FourierRandom {
        seed: u64,
        count: usize,
        smoothness: f64,
        #[serde(default = "default_modes")]
        modes: usize,
    },
}

/// Accepts `null`, `"inf"` or `"infinity"` for an empty outer zone, since
/// JSON has no infinite numbers.
fn contrasts<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Contrast {
        Number(f64),
        Word(String),
        Null(()),
    }
    Vec::<Contrast>::deserialize(d)?
        .into_iter()
        .map(|c| match c {
            Contrast::Number(v) => Ok(v),
            Contrast::Null(()) => Ok(f64::INFINITY),
            Contrast::Word(w) if matches!(w.to_ascii_lowercase().as_str(), "inf" | "infinity") => {
                Ok(f64::INFINITY)
            }
            Contrast::Word(w) => Err(serde::de::Error::custom(format!("unknown contrast {w:?}"))),
        })
        .collect()
}

fn default_modes() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    #[serde(flatten)]
    pub family: Family,
    pub alpha: f64,
    pub period: f64,
    /// `None` picks transfer matrices or finite differences per member.
    #[serde(default)]
    pub method: Option<EigenMethod>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl SweepPlan {
    pub fn new(family: Family, alpha: f64, period: f64) -> Self {
        Self {
            family,
            alpha,
            period,
            method: None,
            output: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::param("alpha must be positive"));
        }
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(Error::param("period must be positive"));
        }
        let empty = match &self.family {
            Family::Shigesada {
                fractions,
                contrasts,
            } => fractions.is_empty() || contrasts.is_empty(),
            Family::MollifiedComb { widths, .. } => widths.is_empty(),
            Family::FourierRandom { count, .. } => *count == 0,
        };
        if empty {
            return Err(Error::param("sweep plan has no members"));
        }
        Ok(())
    }

    /// Members in plan order, each with a short parameter label.
    pub fn members(&self) -> Vec<(String, Result<PeriodicCoefficient>)> {
        let (a, l) = (self.alpha, self.period);
        match &self.family {
            Family::Shigesada {
                fractions,
                contrasts,
            } => fractions
                .iter()
                .flat_map(|&f| contrasts.iter().map(move |&k| (f, k)))
                .map(|(f, k)| {
                    (
                        format!("shigesada f={f} contrast={k}"),
                        make_shigesada(a, l, f, k),
                    )
                })
                .collect(),
            Family::MollifiedComb { widths, kernel } => {
                let comb = make_delta_comb(a, l).map_err(|e| e.to_string());
                widths
                    .iter()
                    .map(|&w| {
                        let spec = MollifierSpec {
                            width: w,
                            kernel: *kernel,
                        };
                        (
                            format!("mollified_comb eps={w}"),
                            comb.clone().map_err(Error::InvalidInput).and_then(|h| mollify(&h, spec)),
                        )
                    })
                    .collect()
            }
            Family::FourierRandom {
                seed,
                count,
                smoothness,
                modes,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..*count)
                    .map(|_| {
                        let s: u64 = rng.gen();
                        (
                            format!("fourier_random seed={s}"),
                            make_fourier_random(a, l, s, *smoothness, *modes, DEFAULT_SAMPLES),
                        )
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub index: usize,
    pub descriptor: String,
    pub hash: String,
    pub method: Option<EigenMethod>,
    pub c_star: Option<f64>,
    pub lambda_star: Option<f64>,
    pub mu_at_zero: Option<f64>,
    pub mu_at_star: Option<f64>,
    /// `c*(h) - c*(b)` against the comb with the same `alpha` and `L`.
    pub gap_to_h: Option<f64>,
    /// `sup |b - alpha|`, infinite with atoms.
    pub sup_deviation: f64,
    pub error: Option<String>,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl SweepRecord {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub rows: usize,
    pub failures: usize,
    pub c_comb: f64,
    pub band: (f64, f64),
    /// Plan indices with `c*` outside the band.
    pub band_violations: Vec<usize>,
    /// Plan indices with `c*(b) > c*(h)`.
    pub ordering_violations: Vec<usize>,
}

impl SweepSummary {
    pub fn holds(&self) -> bool {
        self.band_violations.is_empty() && self.ordering_violations.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub records: Vec<SweepRecord>,
    pub summary: SweepSummary,
}

fn solve_member(
    b: &PeriodicCoefficient,
    method: Option<EigenMethod>,
    c_comb: f64,
    cfg: &SpeedConfig,
) -> Result<(EigenMethod, f64, f64, f64, f64, f64)> {
    let method = method.unwrap_or_else(|| default_method(b));
    let cfg = SpeedConfig {
        method: Some(method),
        ..*cfg
    };
    let r = minimal_speed(b, Direction::Positive, &cfg)?;
    let mu0 = MuEvaluator::new(b, method, cfg.solver)?.mu(0.0)?;
    Ok((method, r.c_star, r.lambda_star, mu0, r.mu_at_star, c_comb - r.c_star))
}

/// Solves every member concurrently. Rows come back in plan order; a failed
/// member is recorded with its error and does not stop the sweep.
pub fn run_sweep(plan: &SweepPlan, cfg: &SpeedConfig) -> Result<SweepOutcome> {
    plan.validate()?;
    let comb = make_delta_comb(plan.alpha, plan.period)?;
    let c_comb = minimal_speed(&comb, Direction::Positive, &SpeedConfig { method: None, ..*cfg })?.c_star;

    let records: Vec<SweepRecord> = plan
        .members()
        .into_par_iter()
        .enumerate()
        .map(|(index, (descriptor, member))| {
            let start = Instant::now();
            let (hash, sup_deviation, solved) = match member {
                Ok(b) => (
                    b.content_hash(),
                    b.sup_distance_from_mean(),
                    solve_member(&b, plan.method, c_comb, cfg),
                ),
                Err(e) => (String::new(), f64::NAN, Err(e)),
            };
            let mut rec = SweepRecord {
                index,
                descriptor,
                hash,
                method: None,
                c_star: None,
                lambda_star: None,
                mu_at_zero: None,
                mu_at_star: None,
                gap_to_h: None,
                sup_deviation,
                error: None,
                wall_time: Duration::ZERO,
            };
            match solved {
                Ok((method, c, lambda, mu0, mu_star, gap)) => {
                    rec.method = Some(method);
                    rec.c_star = Some(c);
                    rec.lambda_star = Some(lambda);
                    rec.mu_at_zero = Some(mu0);
                    rec.mu_at_star = Some(mu_star);
                    rec.gap_to_h = Some(gap);
                }
                Err(e) => {
                    log::warn!("sweep row {index} ({}) failed: {e}", rec.descriptor);
                    rec.error = Some(e.to_string());
                }
            }
            rec.wall_time = start.elapsed();
            rec
        })
        .collect();

    let summary = summarize(&records, plan.alpha, plan.period, c_comb);
    if !summary.holds() {
        log::warn!(
            "sweep violations: band {:?}, ordering {:?}",
            summary.band_violations,
            summary.ordering_violations
        );
    }
    let outcome = SweepOutcome { records, summary };
    if let Some(path) = &plan.output {
        write_csv(&outcome.records, std::fs::File::create(path)?)?;
    }
    Ok(outcome)
}

fn summarize(records: &[SweepRecord], alpha: f64, period: f64, c_comb: f64) -> SweepSummary {
    let (lo, hi) = speed_bounds(&make_delta_comb(alpha, period).expect("plan was validated"));
    let mut band_violations = Vec::new();
    let mut ordering_violations = Vec::new();
    for r in records {
        if let (Some(c), Some(gap)) = (r.c_star, r.gap_to_h) {
            if c < lo - BAND_TOLERANCE || c > hi + BAND_TOLERANCE {
                band_violations.push(r.index);
            }
            if gap < -ORDERING_TOLERANCE {
                ordering_violations.push(r.index);
            }
        }
    }
    SweepSummary {
        rows: records.len(),
        failures: records.iter().filter(|r| !r.is_ok()).count(),
        c_comb,
        band: (lo, hi),
        band_violations,
        ordering_violations,
    }
}

/// One CSV row per record; columns follow the `SweepRecord` fields, with
/// failed solves leaving the numeric columns empty.
pub fn write_csv<W: Write>(records: &[SweepRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub width: f64,
    pub c_star: f64,
    /// `c*(b) - c*(mollified)`.
    pub gap: f64,
    /// `|c+ - c-|` of the mollified profile.
    pub direction_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub c_limit: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Speeds never fall as the width shrinks between consecutive rows.
    pub monotone: bool,
}

impl ConvergenceTable {
    pub fn final_gap(&self) -> Option<f64> {
        self.rows.last().map(|r| r.gap)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Speeds of `b` with every atom smoothed to each width in turn, set against
/// the speed of `b` itself.
pub fn convergence_table(
    b: &PeriodicCoefficient,
    widths: &[f64],
    kernel: Kernel,
    cfg: &SpeedConfig,
) -> Result<ConvergenceTable> {
    if !b.has_atoms() {
        return Err(Error::NothingToMollify);
    }
    let c_limit = minimal_speed(b, Direction::Positive, &SpeedConfig { method: None, ..*cfg })?.c_star;
    let rows = widths
        .par_iter()
        .map(|&width| {
            let m = mollify(b, MollifierSpec { width, kernel })?;
            let (pos, neg) = direction_symmetry_check(&m, cfg)?;
            Ok(ConvergenceRow {
                width,
                c_star: pos.c_star,
                gap: c_limit - pos.c_star,
                direction_defect: (pos.c_star - neg.c_star).abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let monotone = rows
        .windows(2)
        .all(|w| (w[1].width - w[0].width) * (w[1].c_star - w[0].c_star) <= 0.0);
    for r in &rows {
        log::info!("width {:>8}: c* = {:.10}, gap {:+.3e}", r.width, r.c_star, r.gap);
    }
    if !monotone {
        log::info!("mollified speeds are not monotone in the width");
    }
    Ok(ConvergenceTable {
        c_limit,
        rows,
        monotone,
    })
}
