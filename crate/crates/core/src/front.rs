//! Spreading speeds and edge decay rates read off simulation traces.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::coeff::PeriodicCoefficient;
use crate::pde::SimulationTrace;
use crate::speed::{minimal_speed, Direction, SpeedConfig};

/// Bounds on `u` that delimit the leading edge used by the decay probe.
pub const EDGE_LOW: f64 = 1e-8;
pub const EDGE_HIGH: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontFit {
    pub direction: Direction,
    pub speed_estimate: f64,
    pub intercept: f64,
    pub fit_window: (f64, f64),
    pub residual_rms: f64,
    /// Half the spread between fits on `[0.4, 0.7] T` and `[0.7, 1.0] T`.
    pub speed_error: f64,
    /// `sup |u(x -+ L, t1) - u(x, t1 + L / c)|` over one period around the front.
    pub periodicity_defect: f64,
}

struct Line {
    slope: f64,
    intercept: f64,
    rms: f64,
}

fn least_squares(points: &[(f64, f64)]) -> Option<Line> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mx = points.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = points.iter().map(|p| (p.0 - mt).powi(2)).sum();
    if stt == 0.0 {
        return None;
    }
    let stx: f64 = points.iter().map(|p| (p.0 - mt) * (p.1 - mx)).sum();
    let slope = stx / stt;
    let intercept = mx - slope * mt;
    let rms = (points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Some(Line {
        slope,
        intercept,
        rms,
    })
}

/// Signed front positions (`x+` or `-x-`) with times in `[t1, t2]`.
fn front_points(trace: &SimulationTrace, direction: Direction, t1: f64, t2: f64) -> Vec<(f64, f64)> {
    trace
        .front
        .iter()
        .filter(|s| s.t >= t1 - 1e-12 && s.t <= t2 + 1e-12)
        .map(|s| match direction {
            Direction::Positive => (s.t, s.x_plus),
            Direction::Negative => (s.t, -s.x_minus),
        })
        .filter(|p| p.1.is_finite())
        .collect()
}

/// Least-squares speed over the last `window_fraction` of the run.
pub fn fit_front(
    trace: &SimulationTrace,
    direction: Direction,
    window_fraction: f64,
) -> Result<FrontFit> {
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::param("window fraction must lie in (0, 1]"));
    }
    let t_end = trace.t_end();
    let (t1, t2) = ((1.0 - window_fraction) * t_end, t_end);
    if let Some(t) = trace.contaminated_at {
        if t <= t2 {
            return Err(Error::Contaminated { time: t });
        }
    }
    let points = front_points(trace, direction, t1, t2);
    let tolerance = 2.0 * trace.dx;
    let mut running = f64::NEG_INFINITY;
    let mut backtrack: f64 = 0.0;
    for p in &points {
        running = running.max(p.1);
        backtrack = backtrack.max(running - p.1);
    }
    if backtrack > tolerance {
        return Err(Error::NoisyFront {
            backtrack,
            tolerance,
        });
    }
    let line = least_squares(&points)
        .ok_or_else(|| Error::InvalidInput("front never crossed the threshold in the window".into()))?;
    let speed = line.slope;
    if !(speed > 0.0) {
        return Err(Error::InvalidInput(format!("front is not advancing (slope {speed})")));
    }

    let l = trace.period;
    if t2 - t1 < 5.0 * l / speed {
        return Err(Error::InvalidInput(format!(
            "fit window [{t1}, {t2}] spans fewer than five period crossings"
        )));
    }
    if line.rms > 0.1 * l {
        return Err(Error::InvalidInput(format!(
            "front positions scatter too much about the fit (rms {})",
            line.rms
        )));
    }

    let early = least_squares(&front_points(trace, direction, 0.4 * t_end, 0.7 * t_end));
    let late = least_squares(&front_points(trace, direction, 0.7 * t_end, t_end));
    let speed_error = match (early, late) {
        (Some(a), Some(b)) => 0.5 * (a.slope - b.slope).abs(),
        _ => f64::NAN,
    };

    Ok(FrontFit {
        direction,
        speed_estimate: speed,
        intercept: line.intercept,
        fit_window: (t1, t2),
        residual_rms: line.rms,
        speed_error,
        periodicity_defect: periodicity_defect(trace, direction, speed, t1),
    })
}

/// Compares the profile one period behind at `t1` with the profile at
/// `t1 + L / c` over the period centred on the front.
fn periodicity_defect(trace: &SimulationTrace, direction: Direction, speed: f64, t_min: f64) -> f64 {
    let l = trace.period;
    let period_time = l / speed;
    let last = match trace.snapshots.last() {
        Some(s) => s.t,
        None => return f64::NAN,
    };
    let target = (0.75 * trace.t_end()).min(last - period_time).max(t_min);
    let Some(first) = trace.nearest_snapshot(target) else {
        return f64::NAN;
    };
    let t1 = first.t;
    let t2 = t1 + period_time;
    let (Some(later), Some(front)) = (trace.snapshot_at(t2), trace.front_at(t2)) else {
        return f64::NAN;
    };
    let shift = trace.snapshot_points_per_period();
    let (centre, offset) = match direction {
        Direction::Positive => (front.x_plus, -(shift as i64)),
        Direction::Negative => (front.x_minus, shift as i64),
    };
    let mut defect: f64 = 0.0;
    for (k, v) in later.iter().enumerate() {
        let x = trace.snapshot_x(k);
        if (x - centre).abs() > 0.5 * l {
            continue;
        }
        let src = k as i64 + offset;
        if src < 0 || src as usize >= first.values.len() {
            continue;
        }
        defect = defect.max((first.values[src as usize] - v).abs());
    }
    defect
}

/// Exponential decay rate of the leading edge at (about) time `t`: the
/// slope of `ln u` against `x` where `1e-8 <= u <= 1e-3` ahead of the front.
pub fn decay_rate_probe(trace: &SimulationTrace, t: f64, direction: Direction) -> Result<f64> {
    let snap = trace
        .nearest_snapshot(t)
        .ok_or_else(|| Error::InsufficientEdge("trace has no snapshots".into()))?;
    let front = trace
        .front_at(snap.t)
        .ok_or_else(|| Error::InsufficientEdge("trace has no front positions".into()))?;
    let points: Vec<(f64, f64)> = snap
        .values
        .iter()
        .enumerate()
        .filter_map(|(k, &v)| {
            let x = trace.snapshot_x(k);
            let ahead = match direction {
                Direction::Positive => x > front.x_plus,
                Direction::Negative => x < front.x_minus,
            };
            (ahead && (EDGE_LOW..=EDGE_HIGH).contains(&v)).then(|| (x, v.ln()))
        })
        .collect();
    let span = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max)
        - points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    if points.len() < 8 || !(span >= 3.0 * trace.period) {
        return Err(Error::InsufficientEdge(format!(
            "{} points spanning {span:.3} (need 8 spanning three periods)",
            points.len()
        )));
    }
    let line = least_squares(&points).expect("edge points are distinct");
    Ok(match direction {
        Direction::Positive => -line.slope,
        Direction::Negative => line.slope,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpreadReport {
    pub c_fit: f64,
    pub c_eigen: f64,
    pub rel_err: f64,
    pub lambda_edge: f64,
    pub lambda_star: f64,
    pub fit: FrontFit,
}

/// Fits the simulated front and sets it against the eigenvalue speed.
/// The edge decay rate is `NaN` when the leading edge is too short to probe.
pub fn spread_report(
    b: &PeriodicCoefficient,
    trace: &SimulationTrace,
    direction: Direction,
    cfg: &SpeedConfig,
) -> Result<SpreadReport> {
    let fit = fit_front(trace, direction, 0.5)?;
    let eigen = minimal_speed(b, direction, cfg)?;
    let lambda_edge = decay_rate_probe(trace, trace.t_end(), direction).unwrap_or(f64::NAN);
    Ok(SpreadReport {
        c_fit: fit.speed_estimate,
        c_eigen: eigen.c_star,
        rel_err: (fit.speed_estimate - eigen.c_star).abs() / eigen.c_star,
        lambda_edge,
        lambda_star: eigen.lambda_star,
        fit,
    })
}
