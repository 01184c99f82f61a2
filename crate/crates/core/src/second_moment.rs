//! The second-moment ratio
//!
//! ```text
//! E|Z|^2 / (E|Z|)^2 = 2^-n  sum_s  C(n, (n+s)/2) (q(beta_s) / p^2)^m,   beta_s = 1/2 + s/(2n),
//! ```
//!
//! summed over `s = -n, -n+2, ..., n` in log space. The sum splits into a
//! central part `|s| <= 2 delta n`, a bulk part, and an edge part
//! `|s| >= (1 - 2 delta) n` that contains the two endpoint summands.

use crate::analytic::{
    alpha_c, gauss_p, log_gauss_p, mu2, pair_q_parts, pair_q_relative_excess, ModelParams,
};
use crate::error::{domain, Error, Result};
use crate::stats::{linear_regression, log_sum_exp, Regression};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::LN_2;

pub const DEFAULT_DELTA: f64 = 0.05;
pub const MAX_RATIO_DIM: usize = 10_000_000;
/// Above this dimension, `q` near `beta = 1/2` comes from the correlation
/// series instead of quadrature.
pub const SERIES_MIN_DIM: usize = 10_000;
/// The series is used for `|s| <= n^SERIES_EXPONENT`.
pub const SERIES_EXPONENT: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentRatioReport {
    pub params: ModelParams,
    pub delta: f64,
    pub total: f64,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub log_total: f64,
    pub log_i1: f64,
    pub log_i2: f64,
    pub log_i3: f64,
    /// The `s = n` summand, `2^-n p^-m`.
    pub endpoint_plus: f64,
    /// The `s = -n` summand; equal to `endpoint_plus` by symmetry.
    pub endpoint_minus: f64,
    /// `B = sqrt(alpha) (1 - mu2) / 2`.
    pub b_value: f64,
    /// `1 / sqrt(1 - 4 B^2)`, the large-n limit of the central part; absent
    /// when `4 B^2 >= 1`.
    pub gaussian_limit: Option<f64>,
    /// Number of summands whose `q` came from the correlation series.
    pub series_terms: usize,
}

/// One summand of the ratio, split into its `m`-independent pieces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioTerm {
    pub s: i64,
    /// `log(2^-n C(n, (n+s)/2))`.
    pub log_weight: f64,
    /// `log(q(beta_s) / p^2)`.
    pub log_q_ratio: f64,
}

impl RatioTerm {
    pub fn log_summand(&self, m: usize) -> f64 {
        if m == 0 {
            self.log_weight
        } else {
            self.log_weight + m as f64 * self.log_q_ratio
        }
    }
}

fn ln_choose(n: usize, j: usize) -> f64 {
    let lg = |x: usize| libm::lgamma(x as f64 + 1.0);
    lg(n) - lg(j) - lg(n - j)
}

/// All `n + 1` summand pieces for bound `k`, ordered by `s` ascending, plus
/// the number of series-evaluated terms.
fn term_table(k: f64, n: usize) -> Result<(Vec<RatioTerm>, usize)> {
    if n == 0 || n > MAX_RATIO_DIM {
        return Err(Error::Budget {
            n,
            limit: MAX_RATIO_DIM,
        });
    }
    let log_p = log_gauss_p(k)?;
    let nf = n as f64;
    let series_radius = if n > SERIES_MIN_DIM {
        nf.powf(SERIES_EXPONENT)
    } else {
        -1.0
    };
    // q(beta) = q(1 - beta): evaluate j <= n/2 and mirror.
    let half: Vec<(f64, bool)> = (0..=n / 2)
        .into_par_iter()
        .map(|j| -> Result<(f64, bool)> {
            let s = 2 * j as i64 - n as i64;
            if j == 0 {
                return Ok((-log_p, false));
            }
            if s == 0 {
                return Ok((0.0, false));
            }
            if (s.abs() as f64) <= series_radius {
                let excess = pair_q_relative_excess(k, s as f64 / nf)?;
                return Ok((excess.ln_1p(), true));
            }
            let q = pair_q_parts(k, j as f64 / nf)?;
            Ok((q.ln_q() - 2.0 * log_p, false))
        })
        .collect::<Result<Vec<_>>>()?;
    let series_terms = (0..=n).filter(|&j| half[j.min(n - j)].1).count();
    let terms = (0..=n)
        .map(|j| RatioTerm {
            s: 2 * j as i64 - n as i64,
            log_weight: ln_choose(n, j) - nf * LN_2,
            log_q_ratio: half[j.min(n - j)].0,
        })
        .collect();
    Ok((terms, series_terms))
}

/// The summands of the ratio for `params`, ordered by `s` ascending.
pub fn ratio_terms(params: &ModelParams) -> Result<Vec<RatioTerm>> {
    Ok(term_table(params.k, params.n)?.0)
}

pub fn ratio_exact(params: &ModelParams, delta: f64) -> Result<MomentRatioReport> {
    if !(delta > 0.0 && delta < 0.25) {
        return domain(format!("delta must lie in (0, 1/4), got {delta}"));
    }
    let (terms, series_terms) = term_table(params.k, params.n)?;
    let n = params.n as f64;
    let m = params.m;

    let (mut central, mut bulk, mut edge) = (Vec::new(), Vec::new(), Vec::new());
    for t in &terms {
        let v = t.log_summand(m);
        let a = t.s.unsigned_abs() as f64;
        if a <= 2.0 * delta * n {
            central.push(v);
        } else if a >= (1.0 - 2.0 * delta) * n {
            edge.push(v);
        } else {
            bulk.push(v);
        }
    }
    let all: Vec<f64> = terms.iter().map(|t| t.log_summand(m)).collect();
    let (log_i1, log_i2, log_i3) = (
        log_sum_exp(&central),
        log_sum_exp(&bulk),
        log_sum_exp(&edge),
    );
    // Binomial theorem: with no rows the sum is exactly one.
    let log_total = if m == 0 { 0.0 } else { log_sum_exp(&all) };

    let mu = mu2(params.k)?.value();
    let b_value = params.alpha.sqrt() * (1.0 - mu) / 2.0;
    let four_b2 = 4.0 * b_value * b_value;
    Ok(MomentRatioReport {
        params: *params,
        delta,
        total: log_total.exp(),
        i1: log_i1.exp(),
        i2: log_i2.exp(),
        i3: log_i3.exp(),
        log_total,
        log_i1,
        log_i2,
        log_i3,
        endpoint_plus: all[all.len() - 1].exp(),
        endpoint_minus: all[0].exp(),
        b_value,
        gaussian_limit: (four_b2 < 1.0).then(|| 1.0 / (1.0 - four_b2).sqrt()),
        series_terms,
    })
}

/// Ratio totals for each row count in `m_list` at fixed `K` and `n`.
pub fn ratio_monotone_in_alpha(k: f64, n: usize, m_list: &[usize]) -> Result<Vec<f64>> {
    let limit = (alpha_c(k)? * n as f64).round_ties_even() as usize;
    if let Some(&m) = m_list.iter().find(|&&m| m > limit) {
        return domain(format!("m = {m} exceeds round(alpha_c(K) n) = {limit}"));
    }
    let (terms, _) = term_table(k, n)?;
    Ok(m_list
        .iter()
        .map(|&m| {
            if m == 0 {
                return 1.0;
            }
            let logs: Vec<f64> = terms.iter().map(|t| t.log_summand(m)).collect();
            log_sum_exp(&logs).exp()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayPoint {
    pub n: usize,
    /// `1 - q(1/n) / p`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndpointDecay {
    #[serde(rename = "K")]
    pub k: f64,
    pub points: Vec<DecayPoint>,
    /// Free log-log fit of the gap against `n`.
    pub fit: Regression,
    /// `c` in the fixed-exponent fit `gap ~ c / sqrt(n)`.
    pub constant: f64,
    /// Root-mean-square log residual of the fixed-exponent fit.
    pub residual: f64,
}

pub fn q_endpoint_decay(k: f64, n_list: &[usize]) -> Result<EndpointDecay> {
    if let Some(&n) = n_list.iter().find(|&&n| n < 10) {
        return domain(format!("n must be at least 10, got {n}"));
    }
    let p = gauss_p(k)?;
    let mut points = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let q = pair_q_parts(k, 1.0 / n as f64)?.q;
        let gap = (p - q) / p;
        if !(gap > 0.0) {
            return Err(Error::Verification(format!(
                "nonpositive gap {gap} at n = {n}"
            )));
        }
        points.push(DecayPoint { n, gap });
    }
    let x: Vec<f64> = points.iter().map(|pt| (pt.n as f64).ln()).collect();
    let y: Vec<f64> = points.iter().map(|pt| pt.gap.ln()).collect();
    let fit = linear_regression(&x, &y)?;
    let shifted: Vec<f64> = x.iter().zip(&y).map(|(a, b)| b + 0.5 * a).collect();
    let log_c = crate::stats::mean(&shifted);
    let residual =
        (shifted.iter().map(|v| (v - log_c).powi(2)).sum::<f64>() / shifted.len() as f64).sqrt();
    Ok(EndpointDecay {
        k,
        points,
        fit,
        constant: log_c.exp(),
        residual,
    })
}
