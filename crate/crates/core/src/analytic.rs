//! Scalar quantities of the symmetric binary perceptron: the one-row
//! acceptance probability, the pair probability, critical densities and the
//! pair free energy.
//!
//! Counting quantities (expected solution counts, moment ratios) use the
//! integer row count `m`. Per-coordinate quantities (`F`, `F''`, the `L`
//! curve) use the real density `alpha`, so that `F(1/2) = -log 2` holds
//! exactly at `alpha = alpha_c(K)`.

use crate::error::{domain, Result};
use crate::quadrature::{integrate, Tolerance};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, LN_2, PI};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_677_939_946_059_934_381_868;

/// The `(K, alpha, n)` triple with its integer row count `m = round(alpha n)`
/// (ties to even).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(rename = "K")]
    pub k: f64,
    pub alpha: f64,
    pub n: usize,
    pub m: usize,
}

impl ModelParams {
    pub fn new(k: f64, alpha: f64, n: usize) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return domain(format!("K must be positive and finite, got {k}"));
        }
        Self::build(k, alpha, n)
    }

    /// The `K = 0` model, used only for limit checks.
    pub fn degenerate(alpha: f64, n: usize) -> Result<Self> {
        Self::build(0.0, alpha, n)
    }

    /// Parameters with an exact integer row count; `alpha` becomes `m / n`.
    pub fn from_rows(k: f64, n: usize, m: usize) -> Result<Self> {
        if n == 0 {
            return domain("n must be at least 1");
        }
        let mut params = Self::new(k, m as f64 / n as f64, n)?;
        params.m = m;
        Ok(params)
    }

    /// `alpha = alpha_c(K)`.
    pub fn critical(k: f64, n: usize) -> Result<Self> {
        Self::new(k, alpha_c(k)?, n)
    }

    /// `m = round(alpha n)` rows at the bound `K = K_c(m / n)`, so that
    /// `E|Z| = 1` holds with the integer row count.
    pub fn critical_rows(alpha: f64, n: usize) -> Result<Self> {
        let base = Self::degenerate(alpha, n)?;
        if base.m == 0 {
            return domain(format!("alpha = {alpha}, n = {n} gives no rows"));
        }
        Self::from_rows(k_c(base.m as f64 / n as f64)?, n, base.m)
    }

    fn build(k: f64, alpha: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return domain("n must be at least 1");
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return domain(format!(
                "alpha must be non-negative and finite, got {alpha}"
            ));
        }
        let m = (alpha * n as f64).round_ties_even();
        Ok(Self {
            k,
            alpha,
            n,
            m: m as usize,
        })
    }
}

pub fn std_normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `P(Z <= x)`.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `P(Z > x)`, accurate deep in the upper tail.
pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

fn check_bound(k: f64) -> Result<()> {
    if k.is_nan() || k < 0.0 {
        return domain(format!("K must be non-negative, got {k}"));
    }
    Ok(())
}

fn check_positive_bound(k: f64) -> Result<()> {
    if !(k > 0.0) || k.is_infinite() {
        return domain(format!("K must be positive and finite, got {k}"));
    }
    Ok(())
}

/// `p_K = P(|Z| <= K)` for a standard normal `Z`.
pub fn gauss_p(k: f64) -> Result<f64> {
    check_bound(k)?;
    Ok(libm::erf(k * FRAC_1_SQRT_2))
}

/// `1 - p_K`, without cancellation for large `K`.
pub fn gauss_p_complement(k: f64) -> Result<f64> {
    check_bound(k)?;
    Ok(libm::erfc(k * FRAC_1_SQRT_2))
}

/// `log p_K`, using `log1p(-(1 - p_K))` once `p_K` is close to one.
pub fn log_gauss_p(k: f64) -> Result<f64> {
    check_positive_bound(k)?;
    if k < 1.0 {
        Ok(libm::erf(k * FRAC_1_SQRT_2).ln())
    } else {
        Ok((-libm::erfc(k * FRAC_1_SQRT_2)).ln_1p())
    }
}

/// The truncated second moment `E[Z^2 | |Z| <= K]`, by quadrature and in
/// closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mu2 {
    pub integral: f64,
    pub closed_form: f64,
}

impl Mu2 {
    pub fn value(&self) -> f64 {
        self.closed_form
    }
}

pub fn mu2(k: f64) -> Result<Mu2> {
    check_positive_bound(k)?;
    let p = gauss_p(k)?;
    let tol = Tolerance {
        abs: 1e-15,
        rel: 1e-14,
        ..Tolerance::default()
    };
    let half = integrate(|x| x * x * std_normal_pdf(x), 0.0, k, &[], tol)?;
    Ok(Mu2 {
        integral: 2.0 * half.value / p,
        closed_form: mu2_closed(k, p),
    })
}

fn mu2_closed(k: f64, p: f64) -> f64 {
    1.0 - (2.0 / PI).sqrt() * k * (-0.5 * k * k).exp() / p
}

/// `q_K(beta)` together with `1 - q_K(beta)`; both are accurate to the
/// quadrature tolerance in absolute terms, and the complement keeps its
/// relative accuracy when `q` is close to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairProbability {
    pub q: f64,
    pub complement: f64,
}

impl PairProbability {
    pub fn ln_q(&self) -> f64 {
        if self.q > 0.5 {
            (-self.complement).ln_1p()
        } else {
            self.q.ln()
        }
    }
}

/// Joint acceptance probability of two sign vectors at normalized Hamming
/// distance `beta` for one Gaussian row.
pub fn pair_q(k: f64, beta: f64) -> Result<f64> {
    Ok(pair_q_parts(k, beta)?.q)
}

pub fn pair_q_parts(k: f64, beta: f64) -> Result<PairProbability> {
    check_positive_bound(k)?;
    if !(0.0..=1.0).contains(&beta) {
        return domain(format!("beta must lie in [0, 1], got {beta}"));
    }
    let p = gauss_p(k)?;
    let tail = gauss_p_complement(k)?;
    // q(beta) = q(1 - beta): Y -> -Y swaps the two constraints.
    let b = beta.min(1.0 - beta);
    if b == 0.0 {
        return Ok(PairProbability {
            q: p,
            complement: tail,
        });
    }
    // Condition on U = sqrt(b) X + sqrt(1-b) Y = y; then V = rho y + w W with
    // rho = 2b - 1, w = 2 sqrt(b (1-b)). `excess` is the mass of |U| <= K that
    // fails |V| <= K, and the integrand is even in y.
    let w = 2.0 * (b * (1.0 - b)).sqrt();
    let r = 1.0 - 2.0 * b;
    let integrand = |y: f64| {
        let upper = (k + r * y) / w;
        let lower = (-k + r * y) / w;
        std_normal_pdf(y) * (std_normal_sf(upper) + std_normal_cdf(lower))
    };
    let mut breaks = Vec::new();
    if r > 0.0 {
        let knee = (k - 8.0 * w) / r;
        if knee > 0.0 && knee < k {
            breaks.push(knee);
        }
    }
    let tol = Tolerance {
        abs: 1e-15,
        rel: 1e-14,
        ..Tolerance::default()
    };
    let excess = 2.0 * integrate(integrand, 0.0, k, &breaks, tol)?.value;
    Ok(PairProbability {
        q: p - excess,
        complement: tail + excess,
    })
}

/// `q_K / p_K^2 - 1` at correlation `rho = 2 beta - 1`, from the Hermite
/// (Mehler) expansion of the bivariate normal density. Only even orders
/// survive, and the order-`2j` coefficient is `4 phi(K)^2 h_{2j-1}(K)^2 / 2j`
/// in terms of normalized Hermite polynomials. The series is summed until a
/// Cramér-type bound on the remainder drops below `1e-17`.
pub fn pair_q_relative_excess(k: f64, rho: f64) -> Result<f64> {
    check_positive_bound(k)?;
    if !(rho.abs() < 1.0) {
        return domain(format!("series needs |rho| < 1, got {rho}"));
    }
    let p = gauss_p(k)?;
    let scale = 4.0 * std_normal_pdf(k).powi(2) / (p * p);
    // |h_j(x)| <= 1.0865 exp(x^2 / 4)
    let h_bound_sq = 1.0865f64.powi(2) * (0.5 * k * k).exp();
    let rho2 = rho * rho;
    let (mut h_prev, mut h_cur) = (1.0, k);
    let mut power = rho2;
    let mut sum = 0.0;
    let mut j = 1usize;
    loop {
        // h_cur = h_j with j odd; contributes the order j+1 term.
        let order = (j + 1) as f64;
        sum += scale * power * h_cur * h_cur / order;
        let remainder = scale * h_bound_sq * power * rho2 / ((order + 2.0) * (1.0 - rho2));
        if remainder < 1e-17 {
            return Ok(sum);
        }
        if j > 200_000 {
            return domain(format!("Hermite series too slow at rho = {rho}"));
        }
        // Advance two orders: h_{j+1}, h_{j+2}.
        for _ in 0..2 {
            let jf = j as f64;
            let next = (k * h_cur - jf.sqrt() * h_prev) / (jf + 1.0).sqrt();
            h_prev = h_cur;
            h_cur = next;
            j += 1;
        }
        power *= rho2;
    }
}

/// Critical density `alpha_c(K) = -log 2 / log p_K` at which `E|Z| = 1`.
pub fn alpha_c(k: f64) -> Result<f64> {
    Ok(-LN_2 / log_gauss_p(k)?)
}

/// Critical bound `K_c(alpha)`, the inverse of [`alpha_c`].
///
/// Brackets `[1e-6, 20]` (widened if needed), bisects to a relative width of
/// `1e-12`, then takes one secant step inside the final bracket.
pub fn k_c(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return domain(format!("alpha must be positive and finite, got {alpha}"));
    }
    let target = alpha.ln();
    // ln alpha_c(K) - ln alpha, increasing in K.
    let g = |k: f64| -> Result<f64> { Ok(LN_2.ln() - (-log_gauss_p(k)?).ln() - target) };

    let (mut lo, mut hi) = (1e-6, 20.0);
    let mut g_lo = g(lo)?;
    while g_lo > 0.0 {
        lo *= 0.5;
        if lo < 1e-300 {
            return domain(format!(
                "alpha = {alpha} is below every representable critical density"
            ));
        }
        g_lo = g(lo)?;
    }
    let mut g_hi = g(hi)?;
    while g_hi < 0.0 {
        hi *= 1.5;
        if hi > 38.0 {
            return domain(format!(
                "alpha = {alpha} exceeds the largest representable critical density"
            ));
        }
        g_hi = g(hi)?;
    }
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        let g_mid = g(mid)?;
        if g_mid == 0.0 {
            return Ok(mid);
        }
        if g_mid < 0.0 {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
            g_hi = g_mid;
        }
    }
    if g_hi == g_lo {
        return Ok(0.5 * (lo + hi));
    }
    let secant = lo - g_lo * (hi - lo) / (g_hi - g_lo);
    Ok(secant.clamp(lo, hi))
}

/// `log E|Z_K| = n log 2 + m log p_K`, with the integer row count.
pub fn log_expected_solutions(params: &ModelParams) -> f64 {
    let n = params.n as f64;
    if params.m == 0 {
        return n * LN_2;
    }
    if params.k <= 0.0 {
        return f64::NEG_INFINITY;
    }
    n * LN_2 + params.m as f64 * log_gauss_p(params.k).expect("K > 0 checked")
}

/// Binary entropy in nats, with `H(0) = H(1) = 0`.
pub fn binary_entropy(beta: f64) -> f64 {
    if beta <= 0.0 || beta >= 1.0 {
        return 0.0;
    }
    -beta * beta.ln() - (1.0 - beta) * (-beta).ln_1p()
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&beta) {
        return domain(format!("beta must lie in [0, 1], got {beta}"));
    }
    Ok(())
}

/// `F(beta) = H(beta) + alpha log q_K(beta)`; the endpoints use the limits
/// `H -> 0`, `q -> p`.
pub fn free_energy(params: &ModelParams, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let ln_q = pair_q_parts(params.k, beta)?.ln_q();
    Ok(binary_entropy(beta) + params.alpha * ln_q)
}

/// `F(1/2) = log 2 + 2 alpha log p`, without quadrature.
pub fn free_energy_half(params: &ModelParams) -> Result<f64> {
    Ok(LN_2 + 2.0 * params.alpha * log_gauss_p(params.k)?)
}

/// `F'(beta)` on the open interval, using
/// `q'(beta) = (e^{-K^2/2beta} - e^{-K^2/2(1-beta)}) / (pi sqrt(beta (1-beta)))`.
pub fn free_energy_derivative(params: &ModelParams, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return domain(format!("F' needs 0 < beta < 1, got {beta}"));
    }
    let k2 = params.k * params.k;
    let q = pair_q(params.k, beta)?;
    let dq = ((-k2 / (2.0 * beta)).exp() - (-k2 / (2.0 * (1.0 - beta))).exp())
        / (PI * (beta * (1.0 - beta)).sqrt());
    Ok((1.0 - beta).ln() - beta.ln() + params.alpha * dq / q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondDerivative {
    pub closed_form: f64,
    /// Central second difference of [`free_energy`] at 1/2.
    pub finite_difference: f64,
    pub step: f64,
}

pub const SECOND_DIFFERENCE_STEP: f64 = 1e-4;

/// `F''(1/2) = 4 (-1 + (2/pi) alpha K^2 e^{-K^2} / p^2)`.
pub fn free_energy_second_deriv_half(params: &ModelParams) -> Result<SecondDerivative> {
    let closed_form = second_deriv_half_closed(params)?;
    let h = SECOND_DIFFERENCE_STEP;
    let centre = free_energy(params, 0.5)?;
    let left = free_energy(params, 0.5 - h)?;
    let right = free_energy(params, 0.5 + h)?;
    Ok(SecondDerivative {
        closed_form,
        finite_difference: (left - 2.0 * centre + right) / (h * h),
        step: h,
    })
}

pub fn second_deriv_half_closed(params: &ModelParams) -> Result<f64> {
    let k = params.k;
    let p = gauss_p(k)?;
    Ok(4.0 * (-1.0 + (2.0 / PI) * params.alpha * k * k * (-k * k).exp() / (p * p)))
}

/// The curve `L(beta)` with `F'(beta) > 0` iff `L(beta) < q(beta)` on
/// `(0, 1/2)`. The difference of exponentials and the log-ratio are both
/// evaluated in forms that stay accurate as `beta -> 1/2`.
pub fn l_curve(params: &ModelParams, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 0.5) {
        return domain(format!("L(beta) needs 0 < beta < 1/2, got {beta}"));
    }
    let k2 = params.k * params.k;
    let a = -k2 / (2.0 * (1.0 - beta));
    let gap = -k2 * (1.0 - 2.0 * beta) / (2.0 * beta * (1.0 - beta));
    // e^a - e^b with b - a = gap <= 0
    let numerator = -a.exp() * gap.exp_m1();
    let log_ratio = ((1.0 - 2.0 * beta) / beta).ln_1p();
    Ok(params.alpha / PI * numerator / ((beta * (1.0 - beta)).sqrt() * log_ratio))
}

/// `L(1/2)` as a limit: `2 alpha K^2 e^{-K^2} / pi`.
pub fn l_curve_half_limit(params: &ModelParams) -> f64 {
    let k2 = params.k * params.k;
    2.0 * params.alpha * k2 * (-k2).exp() / PI
}

/// Empirical band of `(alpha_c(K_c(alpha) + eps) - alpha_c(K_c(alpha))) / eps`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationBand {
    pub alpha: f64,
    pub k_c: f64,
    pub eps: Vec<f64>,
    pub ratios: Vec<f64>,
    pub c_low: f64,
    pub c_high: f64,
}

/// `alpha_c(K_c(alpha) + eps) - alpha_c(K_c(alpha))`; exactly zero at `eps = 0`.
pub fn alpha_shift(alpha: f64, eps: f64) -> Result<f64> {
    let kc = k_c(alpha)?;
    Ok(alpha_c(kc + eps)? - alpha_c(kc)?)
}

pub const PERTURBATION_GRID_POINTS: usize = 41;

/// Ratio band over a geometric grid of `eps` spanning four decades up to
/// `eps_max`.
pub fn perturbation_equivalence(alpha: f64, eps_max: f64) -> Result<PerturbationBand> {
    if !(eps_max > 0.0) {
        return domain(format!("eps must be positive, got {eps_max}"));
    }
    let kc = k_c(alpha)?;
    let base = alpha_c(kc)?;
    let last = (PERTURBATION_GRID_POINTS - 1) as f64;
    let mut eps = Vec::with_capacity(PERTURBATION_GRID_POINTS);
    let mut ratios = Vec::with_capacity(PERTURBATION_GRID_POINTS);
    for i in 0..PERTURBATION_GRID_POINTS {
        let e = eps_max * 10f64.powf(-4.0 * (last - i as f64) / last);
        eps.push(e);
        ratios.push((alpha_c(kc + e)? - base) / e);
    }
    let c_low = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let c_high = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(PerturbationBand {
        alpha,
        k_c: kc,
        eps,
        ratios,
        c_low,
        c_high,
    })
}
