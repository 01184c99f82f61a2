//! Independent numerical oracles shared by the integration tests.
#![allow(dead_code)]

use sbp_core::cube::Instance;

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(order);
    for i in 0..order {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = order as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Composite Gauss-Legendre rule over `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let rule = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let c = a + (k as f64 + 0.5) * h;
        for &(x, w) in &rule {
            total += w * f(c + 0.5 * h * x);
        }
    }
    0.5 * h * total
}

pub fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `P(|Z| <= k)` by quadrature of the density.
pub fn p_oracle(k: f64) -> f64 {
    integrate(phi, -k, k, 64, 20)
}

pub fn mu2_oracle(k: f64) -> f64 {
    integrate(|x| x * x * phi(x), -k, k, 64, 20) / p_oracle(k)
}

/// Joint acceptance probability at correlation `rho` as a two-dimensional
/// tensor-product quadrature of the bivariate normal density over the square.
pub fn q_oracle_2d(k: f64, rho: f64) -> f64 {
    let rule = gauss_legendre(16);
    let panels = 48;
    let h = 2.0 * k / panels as f64;
    let mut nodes = Vec::with_capacity(panels * rule.len());
    for p in 0..panels {
        let c = -k + (p as f64 + 0.5) * h;
        for &(x, w) in &rule {
            nodes.push((c + 0.5 * h * x, 0.5 * h * w));
        }
    }
    let det = 1.0 - rho * rho;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * det.sqrt());
    let mut total = 0.0;
    for &(u, wu) in &nodes {
        let mut row = 0.0;
        for &(v, wv) in &nodes {
            row += wv * (-(u * u - 2.0 * rho * u * v + v * v) / (2.0 * det)).exp();
        }
        total += wu * row;
    }
    norm * total
}

/// Joint acceptance probability by conditioning on the first coordinate; the
/// inner Gaussian mass is itself a quadrature of the density, clipped to
/// `[-10, 10]`.
pub fn q_oracle_1d(k: f64, rho: f64) -> f64 {
    let s = (1.0 - rho * rho).sqrt();
    let f = |u: f64| {
        let lo = ((-k - rho * u) / s).max(-10.0);
        let hi = ((k - rho * u) / s).min(10.0);
        if hi <= lo {
            0.0
        } else {
            phi(u) * integrate(phi, lo, hi, 8, 20)
        }
    };
    // The inner mass switches over a width of order `s` near `u = +-K`.
    let edge = (40.0 * s).min(0.25 * k);
    integrate(f, -k, -k + edge, 32, 20)
        + integrate(f, -k + edge, k - edge, 64, 20)
        + integrate(f, k - edge, k, 32, 20)
}

/// Root of `f` on `[lo, hi]` by plain bisection.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let f_lo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Minimum and count over the full cube, recomputing every row sum from scratch.
pub fn naive(inst: &Instance, k: f64) -> (f64, u64) {
    let mut best = f64::INFINITY;
    let mut count = 0;
    for mask in 0u64..(1 << inst.n) {
        let mut worst: f64 = 0.0;
        for row in &inst.rows {
            let mut sum = 0.0;
            for (j, a) in row.iter().enumerate() {
                sum += if (mask >> j) & 1 == 1 { -a } else { *a };
            }
            worst = worst.max(sum.abs());
        }
        best = best.min(worst);
        count += u64::from(worst <= k);
    }
    (best, count)
}
