//! Independent reference computations for the integration tests.
//!
//! With `psi = e^{lambda x} phi` the eigenproblem becomes the Hill equation
//! `-phi'' = (mu + b - lambda^2) phi` with `phi(x + L) = e^{-lambda L} phi(x)`,
//! so for layered coefficients `mu` is the lowest root of
//! `tr M_phi(mu) = 2 cosh(lambda L)` (Kronig-Penney).

#![allow(dead_code)]

#[derive(Debug, Clone, Copy)]
pub enum Layer {
    Flat { level: f64, length: f64 },
    Delta { mass: f64 },
}

type M2 = [[f64; 2]; 2];

fn mul(a: M2, b: M2) -> M2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

/// `(phi, phi')` across a layer where `-phi'' = k2 phi`.
fn layer_matrix(k2: f64, len: f64) -> M2 {
    if k2 > 0.0 {
        let k = k2.sqrt();
        let (s, c) = (k * len).sin_cos();
        [[c, s / k], [-k * s, c]]
    } else if k2 < 0.0 {
        let k = (-k2).sqrt();
        let (s, c) = ((k * len).sinh(), (k * len).cosh());
        [[c, s / k], [k * s, c]]
    } else {
        [[1.0, len], [0.0, 1.0]]
    }
}

pub fn half_trace(layers: &[Layer], lambda: f64, mu: f64) -> f64 {
    let mut m: M2 = [[1.0, 0.0], [0.0, 1.0]];
    for layer in layers {
        let step = match *layer {
            Layer::Flat { level, length } => layer_matrix(mu + level - lambda * lambda, length),
            Layer::Delta { mass } => [[1.0, 0.0], [-mass, 1.0]],
        };
        m = mul(step, m);
    }
    0.5 * (m[0][0] + m[1][1])
}

pub fn period(layers: &[Layer]) -> f64 {
    layers
        .iter()
        .map(|l| match l {
            Layer::Flat { length, .. } => *length,
            Layer::Delta { .. } => 0.0,
        })
        .sum()
}

pub fn mass(layers: &[Layer]) -> f64 {
    layers
        .iter()
        .map(|l| match l {
            Layer::Flat { level, length } => level * length,
            Layer::Delta { mass } => *mass,
        })
        .sum()
}

/// Lowest `mu` with `half_trace = cosh(lambda L)`: march up in steps of
/// `1e-3` from twice the depth of the `-alpha - alpha^2 L^2` floor, then
/// bisect.
pub fn kp_mu(layers: &[Layer], lambda: f64) -> f64 {
    let l = period(layers);
    let alpha = mass(layers) / l;
    let target = (lambda * l).cosh();
    let g = |mu: f64| half_trace(layers, lambda, mu) - target;
    let mut lo = -2.0 * (alpha + alpha * alpha * l * l) - 0.5;
    assert!(g(lo) > 0.0);
    let mut hi = lo;
    while g(hi) > 0.0 {
        lo = hi;
        hi += 1e-3;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `min_{lambda > 0} (lambda^2 - mu(lambda)) / lambda` by a dense scan and
/// ternary refinement. Returns `(c*, lambda*)`.
pub fn kp_speed(layers: &[Layer]) -> (f64, f64) {
    let phi = |l: f64| (l * l - kp_mu(layers, l)) / l;
    let grid: Vec<f64> = (1..=600).map(|k| k as f64 * 0.01).collect();
    let k = (0..grid.len())
        .min_by(|&a, &b| phi(grid[a]).total_cmp(&phi(grid[b])))
        .unwrap();
    assert!(k > 0 && k + 1 < grid.len(), "minimum at the edge of the scan");
    let (mut a, mut b) = (grid[k - 1], grid[k + 1]);
    while b - a > 1e-9 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if phi(m1) <= phi(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    let l = 0.5 * (a + b);
    (phi(l), l)
}

/// Comb with one atom of mass `alpha L` at `L/2`.
pub fn comb(alpha: f64, l: f64) -> Vec<Layer> {
    vec![
        Layer::Flat { level: 0.0, length: 0.5 * l },
        Layer::Delta { mass: alpha * l },
        Layer::Flat { level: 0.0, length: 0.5 * l },
    ]
}

/// Atoms of mass 0.7 at 0.3 and 0.3 at 0.55 on the unit cell.
pub fn two_atom_comb() -> Vec<Layer> {
    vec![
        Layer::Flat { level: 0.0, length: 0.3 },
        Layer::Delta { mass: 0.7 },
        Layer::Flat { level: 0.0, length: 0.25 },
        Layer::Delta { mass: 0.3 },
        Layer::Flat { level: 0.0, length: 0.45 },
    ]
}

/// Level `b1` on a centred zone of fraction `f`, `b2` elsewhere, mean `alpha`.
pub fn two_level(alpha: f64, l: f64, f: f64, b2: f64) -> Vec<Layer> {
    let b1 = (alpha - (1.0 - f) * b2) / f;
    let outer = 0.5 * (1.0 - f) * l;
    vec![
        Layer::Flat { level: b2, length: outer },
        Layer::Flat { level: b1, length: f * l },
        Layer::Flat { level: b2, length: outer },
    ]
}

/// Maclaurin series, accurate for `|x| < 3`.
pub fn erf(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    while term.abs() > 1e-17 * sum.abs().max(1e-300) {
        n += 1.0;
        term *= -x * x / n;
        sum += term / (2.0 * n + 1.0);
    }
    2.0 / std::f64::consts::PI.sqrt() * sum
}
