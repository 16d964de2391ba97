//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pulsewave::coeff::{
    make_constant, make_delta_comb, make_fourier_random, make_shigesada, Atom, Kernel,
    PeriodicCoefficient,
};
use pulsewave::eigen::{
    eigenvalue_band, grid_convergence, maxmin_check, principal_eigenpair_fd, rayleigh_mu0,
    SolverConfig,
};
use pulsewave::floquet::{dispersion_mu, CellLayout, Piece};
use pulsewave::front::{fit_front, spread_report};
use pulsewave::pde::{
    continuous_dependence_bound, continuous_dependence_probe, simulate, simulate_default, Grid,
    SimulationConfig, SimulationTrace,
};
use pulsewave::speed::{direction_symmetry_check, minimal_speed, Direction, SpeedConfig};
use pulsewave::sweep::convergence_table;

const ENSEMBLE: u64 = 200;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn two_atoms() -> PeriodicCoefficient {
    PeriodicCoefficient::from_atoms(1.0, vec![Atom::new(0.3, 0.7), Atom::new(0.55, 0.3)]).unwrap()
}

/// Random smooth members of the mean-one class on the unit cell.
fn ensemble() -> Vec<PeriodicCoefficient> {
    (0..ENSEMBLE)
        .map(|seed| make_fourier_random(1.0, 1.0, seed, 2.0, 8, 256).unwrap())
        .collect()
}

fn speed(b: &PeriodicCoefficient) -> f64 {
    minimal_speed(b, Direction::Positive, &SpeedConfig::default()).unwrap().c_star
}

fn constant_coefficients() -> Verdict {
    let mut worst: f64 = 0.0;
    for alpha in [0.25, 1.0, 4.0] {
        for l in [0.5, 1.0, 2.0] {
            let b = make_constant(alpha, l).unwrap();
            let r = minimal_speed(&b, Direction::Positive, &SpeedConfig::default()).unwrap();
            worst = worst
                .max((r.c_star - 2.0 * alpha.sqrt()).abs())
                .max((r.lambda_star - alpha.sqrt()).abs());
        }
    }
    verdict(worst <= 1e-6, format!("max error {worst:.2e} over 9 cases"))
}

fn eigenvalue_band_holds(members: &[PeriodicCoefficient]) -> Verdict {
    let cfg = SolverConfig::default();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for b in members {
        for lambda in [0.0, 0.5, 1.0, 2.0] {
            let mu = principal_eigenpair_fd(b, lambda, &cfg).unwrap().mu;
            lo = lo.min(mu);
            hi = hi.max(mu);
        }
    }
    let (band_lo, band_hi) = eigenvalue_band(&members[0]);
    verdict(
        lo >= band_lo - 1e-3 && hi <= band_hi + 1e-3,
        format!("mu in [{lo:.6}, {hi:.6}] against [{band_lo}, {band_hi}]"),
    )
}

fn speed_band_holds(members: &[PeriodicCoefficient], speeds: &[f64]) -> Verdict {
    let lo = speeds.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = speeds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let far: Vec<f64> = members
        .iter()
        .zip(speeds)
        .filter(|(b, _)| b.sup_distance_from_mean() >= 0.5)
        .map(|(_, &c)| c)
        .collect();
    let far_min = far.iter().copied().fold(f64::INFINITY, f64::min);
    let upper = 2.0 * 2f64.sqrt();
    verdict(
        lo >= 2.0 - 1e-3 && hi <= upper + 1e-3 && far_min > 2.0 + 1e-4,
        format!(
            "c* in [{lo:.6}, {hi:.6}]; {} members with sup deviation >= 0.5 have c* >= {far_min:.6}",
            far.len()
        ),
    )
}

fn oracle_equivalence() -> Verdict {
    let cases = [
        make_delta_comb(1.0, 1.0).unwrap(),
        two_atoms(),
        make_shigesada(1.0, 1.0, 0.5, f64::INFINITY).unwrap(),
        make_shigesada(1.0, 1.0, 0.25, 4.0).unwrap(),
        make_shigesada(1.0, 1.0, 0.125, 10.0).unwrap(),
    ];
    let cfg = SolverConfig::with_grid(4096);
    let mut worst: f64 = 0.0;
    for b in &cases {
        for k in 0..20 {
            let lambda = 0.1 * k as f64;
            let fd = principal_eigenpair_fd(b, lambda, &cfg).unwrap().mu;
            worst = worst.max((fd - dispersion_mu(b, lambda).unwrap()).abs());
        }
    }
    verdict(worst <= 2e-4, format!("max |mu_fd - mu_floquet| = {worst:.2e} over 5 x 20 points"))
}

fn optimality(members: &[PeriodicCoefficient], speeds: &[f64]) -> Verdict {
    let comb = make_delta_comb(1.0, 1.0).unwrap();
    let c_comb = speed(&comb);
    let ensemble_gap = members
        .iter()
        .zip(speeds)
        .filter(|(b, _)| b.sup_distance_from_mean() > 0.0)
        .map(|(_, &c)| c_comb - c)
        .fold(f64::INFINITY, f64::min);
    let mut shigesada_gap = f64::INFINITY;
    for f in [0.5, 0.25, 0.125, 0.0625] {
        for contrast in [2.0, 10.0, f64::INFINITY] {
            let b = make_shigesada(1.0, 1.0, f, contrast).unwrap();
            shigesada_gap = shigesada_gap.min(c_comb - speed(&b));
        }
    }
    let table = convergence_table(
        &comb,
        &[0.4, 0.2, 0.1, 0.05, 0.025],
        Kernel::Triangle,
        &SpeedConfig::default(),
    )
    .unwrap();
    let final_gap = table.final_gap().unwrap();
    verdict(
        ensemble_gap >= 1e-4 && shigesada_gap >= 1e-4 && final_gap <= 1e-2,
        format!(
            "c*(comb) = {c_comb:.8}; min gap ensemble {ensemble_gap:.4}, shigesada {shigesada_gap:.4}; \
             mollified gap at 0.025 = {final_gap:.5} (monotone: {})",
            table.monotone
        ),
    )
}

fn direction_symmetry(two_atom_trace: &SimulationTrace) -> Verdict {
    let (pos, neg) = direction_symmetry_check(&two_atoms(), &SpeedConfig::default()).unwrap();
    let eigen_defect = (pos.c_star - neg.c_star).abs();
    let fp = fit_front(two_atom_trace, Direction::Positive, 0.5).unwrap();
    let fm = fit_front(two_atom_trace, Direction::Negative, 0.5).unwrap();
    let sim_defect = (fp.speed_estimate - fm.speed_estimate).abs() / pos.c_star;
    verdict(
        eigen_defect <= 1e-6 && sim_defect <= 0.02,
        format!(
            "|c+ - c-| = {eigen_defect:.2e}; fits {:.5} / {:.5}, relative difference {:.3}%",
            fp.speed_estimate,
            fm.speed_estimate,
            100.0 * sim_defect
        ),
    )
}

fn spreading(runs: &[(&str, PeriodicCoefficient, SimulationTrace)]) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, b, trace) in runs {
        let r = spread_report(b, trace, Direction::Positive, &SpeedConfig::default()).unwrap();
        let decay_err = (r.lambda_edge - r.lambda_star).abs() / r.lambda_star;
        pass &= r.rel_err <= 0.03 && decay_err <= 0.1;
        parts.push(format!(
            "{name}: fit {:.4} vs {:.4} ({:.2}%), edge {:.4} vs {:.4} ({:.1}%)",
            r.c_fit,
            r.c_eigen,
            100.0 * r.rel_err,
            r.lambda_edge,
            r.lambda_star,
            100.0 * decay_err
        ));
    }
    verdict(pass, parts.join("; "))
}

/// Piecewise-linear bump of the given height and half-width.
fn bump(grid: &Grid, centre: f64, height: f64, width: f64) -> Vec<f64> {
    grid.sample(|x| (height * (1.0 - ((x - centre) / width).abs())).clamp(0.0, 1.0))
}

fn simulator_properties(traces: &[&SimulationTrace]) -> Verdict {
    let range_err = traces
        .iter()
        .map(|t| (-t.min_value).max(t.max_value - 1.0).max(0.0))
        .fold(0.0, f64::max);

    // Ordered pairs u0 <= v0 on a mix of coefficients.
    let coefficients = [
        make_constant(1.0, 1.0).unwrap(),
        make_delta_comb(1.0, 1.0).unwrap(),
        two_atoms(),
        make_shigesada(1.0, 1.0, 0.5, f64::INFINITY).unwrap(),
        make_fourier_random(1.0, 1.0, 7, 2.0, 8, 256).unwrap(),
    ];
    let cfg = SimulationConfig::coarse(1.0, 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut order_violation: f64 = 0.0;
    for k in 0..20 {
        let b = &coefficients[k % coefficients.len()];
        let grid = Grid::new(b, cfg.half_width, cfg.dx, cfg.atom_mode).unwrap();
        let c = rng.gen_range(-3.0..3.0);
        let u0 = bump(&grid, c, rng.gen_range(0.2..1.0), rng.gen_range(0.5..3.0));
        let extra = bump(&grid, c + rng.gen_range(-2.0..2.0), rng.gen_range(0.1..1.0), rng.gen_range(0.3..2.0));
        let v0: Vec<f64> = u0.iter().zip(&extra).map(|(a, e)| (a + e).min(1.0)).collect();
        let u = simulate(b, &u0, &cfg).unwrap();
        let v = simulate(b, &v0, &cfg).unwrap();
        for (su, sv) in u.snapshots.iter().zip(&v.snapshots) {
            for (a, c) in su.values.iter().zip(&sv.values) {
                order_violation = order_violation.max(a - c);
            }
        }
        for (a, c) in u.final_state.iter().zip(&v.final_state) {
            order_violation = order_violation.max(a - c);
        }
    }

    // Shifting the datum by one period shifts the solution by one period.
    let comb = make_delta_comb(1.0, 1.0).unwrap();
    let grid = Grid::new(&comb, cfg.half_width, cfg.dx, cfg.atom_mode).unwrap();
    let per = grid.nodes_per_period;
    let u0 = grid.default_initial();
    let mut shifted = vec![0.0; u0.len()];
    shifted[per..].copy_from_slice(&u0[..u0.len() - per]);
    let a = simulate(&comb, &u0, &cfg).unwrap();
    let s = simulate(&comb, &shifted, &cfg).unwrap();
    let shift_err = (0..u0.len() - per)
        .map(|j| (a.final_state[j] - s.final_state[j + per]).abs())
        .fold(0.0, f64::max);

    // Continuous dependence with a perturbation on the datum's support.
    let mut dependence_ok = true;
    let mut ratios = Vec::new();
    let cfg1 = SimulationConfig::coarse(1.0, 1.0);
    for b in [make_constant(1.0, 1.0).unwrap(), make_fourier_random(1.0, 1.0, 3, 2.0, 8, 256).unwrap()] {
        let grid = Grid::new(&b, cfg1.half_width, cfg1.dx, cfg1.atom_mode).unwrap();
        let u0 = grid.default_initial();
        let v0: Vec<f64> = u0.iter().map(|&u| if u > 0.0 { u + 0.01 } else { u }).collect();
        let m = grid.rates.iter().copied().fold(0.0, f64::max);
        let ratio = continuous_dependence_probe(&b, &u0, &v0, 1.0, &cfg1).unwrap();
        let bound = continuous_dependence_bound(m, 1.0);
        dependence_ok &= ratio <= bound;
        ratios.push(format!("{ratio:.4} <= {bound:.4}"));
    }

    verdict(
        range_err <= 1e-10 && order_violation <= 1e-12 && shift_err <= 1e-10 && dependence_ok,
        format!(
            "range excess {range_err:.1e}; order violation {order_violation:.1e} on 20 pairs; \
             shift error {shift_err:.1e}; dependence ratios {}",
            ratios.join(", ")
        ),
    )
}

/// Random unit cell of flat segments and atoms.
fn random_layout(rng: &mut ChaCha8Rng) -> CellLayout {
    let k = rng.gen_range(1..6);
    let lengths: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = lengths.iter().sum();
    let mut pieces = Vec::new();
    for length in lengths {
        if rng.gen_bool(0.4) {
            pieces.push(Piece::Atom { mass: rng.gen_range(0.0..2.0) });
        }
        pieces.push(Piece::Segment {
            level: rng.gen_range(0.0..4.0),
            length: length / total,
        });
    }
    CellLayout {
        period: 1.0,
        alpha: 1.0,
        pieces,
    }
}

fn structural_identities() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut det_err: f64 = 0.0;
    for _ in 0..500 {
        let cell = random_layout(&mut rng);
        let lambda = rng.gen_range(-2.0..2.0);
        let mu = rng.gen_range(-3.0..0.5);
        let want = (2.0 * lambda * cell.period).exp();
        det_err = det_err.max((cell.monodromy(lambda, mu).det() / want - 1.0).abs());
    }

    let smooth: Vec<PeriodicCoefficient> = (0..5)
        .map(|s| make_fourier_random(1.0, 1.0, 100 + s, 2.0, 8, 256).unwrap())
        .collect();
    let cfg = SolverConfig::default();
    let mut even_err: f64 = 0.0;
    for b in smooth.iter().chain([&make_delta_comb(1.0, 1.0).unwrap(), &two_atoms()]) {
        for lambda in [0.3, 1.0, 2.5] {
            let plus = principal_eigenpair_fd(b, lambda, &cfg).unwrap().mu;
            let minus = principal_eigenpair_fd(b, -lambda, &cfg).unwrap().mu;
            even_err = even_err.max((plus - minus).abs());
        }
        if b.has_atoms() {
            let plus = dispersion_mu(b, 1.3).unwrap();
            even_err = even_err.max((plus - dispersion_mu(b, -1.3).unwrap()).abs());
        }
    }

    let mut maxmin_err: f64 = 0.0;
    let mut rayleigh_err: f64 = 0.0;
    for b in &smooth {
        for lambda in [0.0, 0.7, 1.5] {
            let pair = principal_eigenpair_fd(b, lambda, &cfg).unwrap();
            maxmin_err = maxmin_err.max((maxmin_check(b, &pair).unwrap() - pair.mu).abs());
        }
        let pair = principal_eigenpair_fd(b, 0.0, &cfg).unwrap();
        rayleigh_err = rayleigh_err.max((rayleigh_mu0(b, &pair.psi).unwrap() - pair.mu).abs());
    }

    verdict(
        det_err <= 1e-12 && even_err <= 1e-6 && maxmin_err <= 1e-4 && rayleigh_err <= 1e-6,
        format!(
            "det {det_err:.1e}; evenness {even_err:.1e}; max-min {maxmin_err:.1e}; Rayleigh {rayleigh_err:.1e}"
        ),
    )
}

fn smooth_profile() -> PeriodicCoefficient {
    let n = 8192;
    let values = (0..n)
        .map(|i| {
            let x = i as f64 / n as f64;
            let tau = 2.0 * std::f64::consts::PI;
            1.0 + 0.5 * (tau * x).cos() + 0.3 * (3.0 * tau * x).sin()
        })
        .collect();
    PeriodicCoefficient::from_samples(1.0, values).unwrap()
}

fn grid_audit() -> Verdict {
    // Coarse grids keep the successive differences well above the solver
    // tolerance.
    let grids = [64, 128, 256, 512];
    let cfg = SolverConfig {
        tolerance: 1e-13,
        ..SolverConfig::default()
    };
    let lambda = 1.0;
    // Members whose soft clip stays inactive are C-infinity.
    let mut smooth = vec![smooth_profile()];
    smooth.extend(
        (0..40)
            .map(|s| make_fourier_random(1.0, 1.0, s, 2.0, 8, 8192).unwrap())
            .filter(|b| match b.continuous() {
                Some(pulsewave::coeff::Continuous::Samples { values }) => {
                    values.iter().all(|&v| v > 0.06)
                }
                _ => false,
            })
            .take(8),
    );
    let smooth_min = smooth
        .iter()
        .map(|b| grid_convergence(b, lambda, &grids, &cfg).unwrap().min_order())
        .fold(f64::INFINITY, f64::min);
    let atomic = [make_delta_comb(1.0, 1.0).unwrap(), two_atoms()];
    let atomic_orders: Vec<f64> = atomic
        .iter()
        .map(|b| grid_convergence(b, lambda, &grids, &cfg).unwrap().min_order())
        .collect();
    let atomic_min = atomic_orders.iter().copied().fold(f64::INFINITY, f64::min);
    verdict(
        smooth_min >= 1.9 && atomic_min >= 0.9,
        format!(
            "smooth min order {smooth_min:.3} over {} profiles; atomic orders {:?}",
            smooth.len(),
            atomic_orders.iter().map(|o| format!("{o:.3}")).collect::<Vec<_>>()
        ),
    )
}

#[test]
fn acceptance_criteria() {
    let members = ensemble();
    let speeds: Vec<f64> = members.iter().map(speed).collect();

    let reference = SimulationConfig::reference(1.0);
    let sims: Vec<(&str, PeriodicCoefficient)> = vec![
        ("constant", make_constant(1.0, 1.0).unwrap()),
        ("comb", make_delta_comb(1.0, 1.0).unwrap()),
        ("shigesada f=0.5", make_shigesada(1.0, 1.0, 0.5, f64::INFINITY).unwrap()),
        ("two-atom comb", two_atoms()),
    ];
    let runs: Vec<(&str, PeriodicCoefficient, SimulationTrace)> = sims
        .into_iter()
        .map(|(name, b)| {
            let trace = simulate_default(&b, &reference).unwrap();
            (name, b, trace)
        })
        .collect();

    let results = [
        ("constant-coefficient exactness", constant_coefficients()),
        ("eigenvalue band", eigenvalue_band_holds(&members)),
        ("speed band", speed_band_holds(&members, &speeds)),
        ("oracle equivalence", oracle_equivalence()),
        ("optimality of the comb", optimality(&members, &speeds)),
        ("direction symmetry", direction_symmetry(&runs[3].2)),
        ("spreading at the minimal speed", spreading(&runs[..3])),
        (
            "simulator properties",
            simulator_properties(&runs.iter().map(|r| &r.2).collect::<Vec<_>>()),
        ),
        ("structural identities", structural_identities()),
        ("grid-convergence audit", grid_audit()),
    ];

    let mut failed = Vec::new();
    for (k, (name, v)) in results.iter().enumerate() {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {tag}: {name}: {}", k + 1, v.detail);
        if !v.pass {
            failed.push(k + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
