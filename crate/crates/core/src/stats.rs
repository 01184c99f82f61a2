//! Small descriptive statistics used by the reports.

use crate::error::{domain, Result};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;
/// One-sided 95% normal quantile.
pub const Z_95_ONE_SIDED: f64 = 1.644_853_626_951_472_2;

pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Sum with a fixed pairwise split, so the result depends only on the order
/// of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (l, r) = xs.split_at(xs.len() / 2);
    pairwise_sum(l) + pairwise_sum(r)
}

/// Sample standard deviation (denominator `len - 1`); zero for fewer than two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mu = mean(xs);
    let dev: Vec<f64> = xs.iter().map(|x| (x - mu) * (x - mu)).collect();
    (pairwise_sum(&dev) / (xs.len() - 1) as f64).sqrt()
}

pub fn standard_error(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    sample_std(xs) / (xs.len() as f64).sqrt()
}

/// Linear-interpolation quantile (Hyndman–Fan type 7) of ascending data.
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `log(sum(exp(terms)))` with a pairwise reduction of the shifted exponentials.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let shifted: Vec<f64> = terms.iter().map(|t| (t - max).exp()).collect();
    max + pairwise_sum(&shifted).ln()
}

/// An exact count of successes with its Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Proportion {
    pub count: u64,
    pub trials: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Proportion {
    pub fn new(count: u64, trials: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(count, trials, Z_95);
        let estimate = if trials == 0 {
            0.0
        } else {
            count as f64 / trials as f64
        };
        Self {
            count,
            trials,
            estimate,
            ci_low,
            ci_high,
        }
    }

    /// One-sided 95% Wilson upper bound, used for zero-count cells.
    pub fn upper_bound(&self) -> f64 {
        wilson_interval(self.count, self.trials, Z_95_ONE_SIDED).1
    }
}

pub fn wilson_interval(count: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let phat = count as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (phat + z2 / (2.0 * n)) / denom;
    let half = z * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let low = if count == 0 {
        0.0
    } else {
        (centre - half).max(0.0)
    };
    let high = if count == trials {
        1.0
    } else {
        (centre + half).min(1.0)
    };
    (low, high)
}

/// Ordinary least squares fit `y = intercept + slope x` with a 95% Student-t
/// interval on the slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Regression {
    pub slope: f64,
    pub intercept: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub slope_se: Option<f64>,
    pub r_squared: f64,
    pub points: usize,
}

pub fn linear_regression(x: &[f64], y: &[f64]) -> Result<Regression> {
    if x.len() != y.len() {
        return domain("regression needs paired data");
    }
    if x.len() < 2 {
        return domain("regression needs at least two points");
    }
    let k = x.len() as f64;
    let mx = mean(x);
    let my = mean(y);
    let sxx = pairwise_sum(&x.iter().map(|a| (a - mx) * (a - mx)).collect::<Vec<_>>());
    let sxy = pairwise_sum(
        &x.iter()
            .zip(y)
            .map(|(a, b)| (a - mx) * (b - my))
            .collect::<Vec<_>>(),
    );
    let syy = pairwise_sum(&y.iter().map(|b| (b - my) * (b - my)).collect::<Vec<_>>());
    if sxx == 0.0 {
        return domain("regression needs at least two distinct x values");
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss = pairwise_sum(
        &x.iter()
            .zip(y)
            .map(|(a, b)| {
                let r = b - intercept - slope * a;
                r * r
            })
            .collect::<Vec<_>>(),
    );
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - rss / syy };
    let (ci_low, ci_high, slope_se) = if x.len() > 2 {
        let se = (rss / (k - 2.0) / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, k - 2.0)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975);
        (Some(slope - t * se), Some(slope + t * se), Some(se))
    } else {
        (None, None, None)
    };
    Ok(Regression {
        slope,
        intercept,
        ci_low,
        ci_high,
        slope_se,
        r_squared,
        points: x.len(),
    })
}
