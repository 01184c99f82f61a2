//! Experiments on the row-by-row solution-set process.

use super::{map_trials, stream_id, ExperimentConfig, TrialRecord};
use crate::analytic::alpha_c;
use crate::cube::{run_capacity, CapacityTrace};
use crate::error::Result;
use crate::stats::{mean, quantile_sorted, sample_std, sorted, standard_error, Proportion};
use serde::Serialize;
use std::sync::atomic::AtomicBool;

/// Per-`t` means of `Y_{t+1}` are assessed only with at least this many live trajectories.
pub const MIN_ALIVE: usize = 30;

const SURFACE_X: [f64; 7] = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacitySummary {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: f64,
    pub alpha_c: f64,
    pub trials: usize,
    pub mean_alpha_star: f64,
    pub std_alpha_star: f64,
    pub se_alpha_star: f64,
    pub median_alpha_star: f64,
    pub truncated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityReport {
    #[serde(rename = "K")]
    pub k: f64,
    pub per_n: Vec<CapacitySummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleStep {
    pub t: usize,
    /// Trajectories with `S_t` nonempty.
    pub alive: usize,
    pub mean_y_next: f64,
    pub se_y_next: f64,
    pub std_y_next: f64,
    /// `alive >= MIN_ALIVE`.
    pub assessed: bool,
    pub within_3se: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfacePoint {
    pub x: f64,
    pub t: usize,
    /// Trajectories with `S_t` empty.
    pub empty: Proportion,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleSummary {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: f64,
    pub trials: usize,
    pub steps: Vec<MartingaleStep>,
    /// Largest `|mean| / se` over assessed steps.
    pub worst_standardized_mean: f64,
    pub assessed_steps: usize,
    pub failing_steps: usize,
    /// `sqrt(log n / n)`.
    pub y_scale: f64,
    /// `round(alpha_c n) - ceil(x log n)`.
    pub t_target: usize,
    /// Quantiles 0.5, 0.9 and the maximum of `max_{t <= t_target} |Q_t|`.
    pub max_abs_q: [f64; 3],
    pub empty_at_target: Proportion,
    pub surface: Vec<SurfacePoint>,
    /// Largest `|Q_t - sum log(1 + Y_i)|` over all trajectories.
    pub max_reconstruction_error: f64,
    /// Trajectories with nonincreasing sizes, `Y_t >= -1`, and `Y = -1` exactly at emptying.
    pub nested: Proportion,
    pub coupled_k: f64,
    /// Trials with `alpha*(coupled_k) >= alpha*(K)` on the same rows.
    pub alpha_star_monotone: Proportion,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleReport {
    #[serde(rename = "K")]
    pub k: f64,
    pub x: f64,
    pub per_n: Vec<MartingaleSummary>,
}

fn record(seed: u64, trace: &CapacityTrace) -> TrialRecord {
    TrialRecord {
        seed,
        stream_id: trace.stream_id,
        n: trace.n,
        m: trace.capacity_rows,
        k: trace.k,
        disc: None,
        count_at_kc: None,
        alpha_star: Some(trace.alpha_star),
    }
}

fn traces(
    config: &ExperimentConfig,
    n: usize,
    k: f64,
    samples: usize,
    interrupt: Option<&AtomicBool>,
) -> Result<(Vec<CapacityTrace>, bool)> {
    map_trials(config.trials, interrupt, |i| {
        run_capacity(n, k, config.seed, stream_id(n, i), samples)
    })
}

pub(crate) fn capacity_with_records(
    config: &ExperimentConfig,
    interrupt: Option<&AtomicBool>,
) -> Result<(CapacityReport, Vec<TrialRecord>, bool)> {
    config.validate()?;
    let k = config.bound()?;
    let mut per_n = Vec::new();
    let mut records = Vec::new();
    for &n in &config.n_list {
        let (runs, interrupted) = traces(config, n, k, config.overlap_samples, interrupt)?;
        records.extend(runs.iter().map(|t| record(config.seed, t)));
        if interrupted {
            return Ok((CapacityReport { k, per_n }, records, true));
        }
        let a: Vec<f64> = runs.iter().map(|t| t.alpha_star).collect();
        per_n.push(CapacitySummary {
            n,
            k,
            alpha_c: alpha_c(k)?,
            trials: a.len(),
            mean_alpha_star: mean(&a),
            std_alpha_star: sample_std(&a),
            se_alpha_star: standard_error(&a),
            median_alpha_star: quantile_sorted(&sorted(&a), 0.5),
            truncated: runs.iter().filter(|t| t.truncated).count(),
        });
    }
    Ok((CapacityReport { k, per_n }, records, false))
}

fn is_nested(trace: &CapacityTrace) -> bool {
    let sizes_ok =
        trace.sizes.windows(2).all(|w| w[1] <= w[0]) && trace.sizes.iter().all(|&s| s > 0);
    let y_ok = trace.y_trace.iter().all(|&y| y >= -1.0);
    let live = &trace.y_trace[..trace.capacity_rows.min(trace.y_trace.len())];
    let terminal_ok = trace.truncated || trace.y_trace.last() == Some(&-1.0);
    sizes_ok && y_ok && terminal_ok && live.iter().all(|&y| y > -1.0)
}

fn summarize(
    config: &ExperimentConfig,
    n: usize,
    k: f64,
    runs: &[CapacityTrace],
    coupled: &[CapacityTrace],
) -> Result<MartingaleSummary> {
    let horizon = runs.iter().map(|t| t.y_trace.len()).max().unwrap_or(0);
    let mut steps = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let y: Vec<f64> = runs
            .iter()
            .filter(|r| r.capacity_rows >= t)
            .filter_map(|r| r.y_trace.get(t).copied())
            .collect();
        if y.is_empty() {
            break;
        }
        let (mu, se) = (mean(&y), standard_error(&y));
        steps.push(MartingaleStep {
            t,
            alive: y.len(),
            mean_y_next: mu,
            se_y_next: se,
            std_y_next: sample_std(&y),
            assessed: y.len() >= MIN_ALIVE,
            within_3se: mu.abs() <= 3.0 * se,
        });
    }
    let assessed: Vec<&MartingaleStep> = steps.iter().filter(|s| s.assessed).collect();
    let worst_standardized_mean = assessed
        .iter()
        .map(|s| {
            if s.se_y_next > 0.0 {
                s.mean_y_next.abs() / s.se_y_next
            } else if s.mean_y_next == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max);

    let critical_rows = (alpha_c(k)? * n as f64).round_ties_even() as i64;
    let target = |x: f64| critical_rows - (x * (n as f64).ln()).ceil() as i64;
    let t_target = target(config.x).max(0) as usize;
    let empty_at = |t: usize| {
        Proportion::new(
            runs.iter().filter(|r| r.capacity_rows < t).count() as u64,
            runs.len() as u64,
        )
    };
    let mut xs: Vec<f64> = SURFACE_X.to_vec();
    if !xs.contains(&config.x) {
        xs.push(config.x);
        xs.sort_by(f64::total_cmp);
    }
    let surface = xs
        .into_iter()
        .filter(|&x| target(x) >= 0)
        .map(|x| {
            let t = target(x) as usize;
            SurfacePoint {
                x,
                t,
                empty: empty_at(t),
            }
        })
        .collect();

    let max_q: Vec<f64> = runs
        .iter()
        .map(|r| {
            r.q_trace
                .iter()
                .take(t_target + 1)
                .fold(0.0, |a: f64, q| a.max(q.abs()))
        })
        .collect();
    let max_q = sorted(&max_q);
    Ok(MartingaleSummary {
        n,
        k,
        trials: runs.len(),
        failing_steps: assessed.iter().filter(|s| !s.within_3se).count(),
        assessed_steps: assessed.len(),
        steps,
        worst_standardized_mean,
        y_scale: ((n as f64).ln() / n as f64).sqrt(),
        t_target,
        max_abs_q: [
            quantile_sorted(&max_q, 0.5),
            quantile_sorted(&max_q, 0.9),
            max_q[max_q.len() - 1],
        ],
        empty_at_target: empty_at(t_target),
        surface,
        max_reconstruction_error: runs
            .iter()
            .map(CapacityTrace::q_reconstruction_error)
            .fold(0.0, f64::max),
        nested: Proportion::new(
            runs.iter().filter(|r| is_nested(r)).count() as u64,
            runs.len() as u64,
        ),
        coupled_k: k * config.coupled_factor,
        alpha_star_monotone: Proportion::new(
            runs.iter()
                .zip(coupled)
                .filter(|(a, b)| b.alpha_star >= a.alpha_star)
                .count() as u64,
            runs.len() as u64,
        ),
    })
}

pub(crate) fn martingale_with_records(
    config: &ExperimentConfig,
    interrupt: Option<&AtomicBool>,
) -> Result<(MartingaleReport, Vec<TrialRecord>, bool)> {
    config.validate()?;
    let k = config.bound()?;
    let mut per_n = Vec::new();
    let mut records = Vec::new();
    for &n in &config.n_list {
        let (runs, interrupted) = traces(config, n, k, config.overlap_samples, interrupt)?;
        records.extend(runs.iter().map(|t| record(config.seed, t)));
        if interrupted {
            return Ok((
                MartingaleReport {
                    k,
                    x: config.x,
                    per_n,
                },
                records,
                true,
            ));
        }
        let (coupled, interrupted) = traces(config, n, k * config.coupled_factor, 0, interrupt)?;
        if interrupted {
            return Ok((
                MartingaleReport {
                    k,
                    x: config.x,
                    per_n,
                },
                records,
                true,
            ));
        }
        per_n.push(summarize(config, n, k, &runs, &coupled)?);
    }
    Ok((
        MartingaleReport {
            k,
            x: config.x,
            per_n,
        },
        records,
        false,
    ))
}

pub fn run_capacity_experiment(config: &ExperimentConfig) -> Result<CapacityReport> {
    Ok(capacity_with_records(config, None)?.0)
}

pub fn run_martingale(config: &ExperimentConfig) -> Result<MartingaleReport> {
    Ok(martingale_with_records(config, None)?.0)
}
