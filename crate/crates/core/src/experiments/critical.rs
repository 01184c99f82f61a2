//! Experiments on the discrepancy at the critical bound `K_c(m/n)`.

use super::{critical_records, map_trials, ExperimentConfig, TrialRecord};
use crate::analytic::gauss_p;
use crate::cube::{count_solutions_pruned, generate_instance};
use crate::error::{domain, Result};
use crate::rng::{CounterRng, Domain};
use crate::stats::{
    linear_regression, mean, quantile_sorted, sample_std, sorted, standard_error, Proportion,
    Regression,
};
use serde::Serialize;
use std::sync::atomic::AtomicBool;

/// Quantile depth of the window width `q(1 - d) - q(d)`.
pub const WINDOW_QUANTILE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowSummary {
    pub n: usize,
    pub m: usize,
    pub k_c: f64,
    pub trials: usize,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub q10: f64,
    pub q90: f64,
    /// `q90 - q10`.
    pub spread: f64,
    pub median_minus_kc: f64,
    pub success: Proportion,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowReport {
    pub alpha: f64,
    pub per_n: Vec<WindowSummary>,
    /// `log std` against `log n`; absent with fewer than two usable `n`.
    pub regression: Option<Regression>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuccessSummary {
    pub n: usize,
    pub m: usize,
    pub k_c: f64,
    /// Trials with `disc <= K_c`.
    pub success: Proportion,
    /// Sample mean of `|Z_{K_c}|`, when counts were recorded.
    pub mean_count: Option<f64>,
    pub count_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuccessReport {
    pub alpha: f64,
    pub per_n: Vec<SuccessSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailCell {
    pub n: usize,
    pub y: f64,
    pub ny: f64,
    /// Trials with `K_c - disc > y`.
    pub proportion: Proportion,
    /// No trial reached this depth.
    pub censored: bool,
    /// One-sided 95% bound for censored cells, two-sided upper limit otherwise.
    pub upper_bound: f64,
    pub log_frequency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub alpha: f64,
    pub n_list: Vec<usize>,
    pub y_grid: Vec<f64>,
    pub cells: Vec<TailCell>,
    /// Pooled fit of log frequency against `n y` over uncensored cells.
    pub regression: Option<Regression>,
    /// Counts are nonincreasing in `y` at every `n`.
    pub monotone_in_y: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnulusCell {
    pub eps: f64,
    /// Trials with `K_c - eps/n <= disc <= K_c`.
    pub window: Proportion,
    /// `window / eps`.
    pub ratio: Option<f64>,
    /// Mean of `|Xi| = |Z_{K_c}| - |Z_{K_c - eps/n}|`.
    pub mean_xi: f64,
    pub xi_se: f64,
    pub xi_ratio: Option<f64>,
    /// Tight rows `|<a_i, x>| in [K_c - eps/n, K_c]` for one uniform `x` per trial.
    pub tight_mean: f64,
    /// `m (p(K_c) - p(K_c - eps/n))`.
    pub tight_expected: f64,
    pub tight_histogram: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnulusSet {
    pub n: usize,
    pub m: usize,
    pub k_c: f64,
    pub trials: usize,
    pub mean_count_at_kc: f64,
    pub cells: Vec<AnnulusCell>,
    /// Largest over smallest `ratio` among `eps > 0` cells with a nonzero count.
    pub ratio_spread: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnticoncentrationReport {
    pub alpha: f64,
    pub per_n: Vec<AnnulusSet>,
}

pub(crate) type WithRecords<R> = (R, Vec<TrialRecord>, bool);

/// Records for every `n` in the configuration, in order; stops early if interrupted.
fn collect(
    config: &ExperimentConfig,
    with_count: bool,
    interrupt: Option<&AtomicBool>,
) -> Result<(Vec<TrialRecord>, bool)> {
    config.validate()?;
    let alpha = config.density()?;
    let mut all = Vec::new();
    for &n in &config.n_list {
        let (recs, interrupted) =
            critical_records(alpha, n, config.trials, config.seed, with_count, interrupt)?;
        all.extend(recs);
        if interrupted {
            return Ok((all, true));
        }
    }
    Ok((all, false))
}

/// Records grouped by `n`, in order of first appearance.
fn by_n(records: &[TrialRecord]) -> Vec<(usize, Vec<&TrialRecord>)> {
    let mut groups: Vec<(usize, Vec<&TrialRecord>)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|(n, _)| *n == r.n) {
            Some((_, g)) => g.push(r),
            None => groups.push((r.n, vec![r])),
        }
    }
    groups
}

fn discs(group: &[&TrialRecord]) -> Result<Vec<f64>> {
    group
        .iter()
        .map(|r| {
            r.disc.ok_or_else(|| {
                crate::Error::Domain(format!("record {} has no discrepancy", r.stream_id))
            })
        })
        .collect()
}

pub fn window_from_records(alpha: f64, records: &[TrialRecord]) -> Result<WindowReport> {
    let mut per_n = Vec::new();
    for (n, group) in by_n(records) {
        let d = discs(&group)?;
        let s = sorted(&d);
        let k_c = group[0].k;
        let q10 = quantile_sorted(&s, WINDOW_QUANTILE);
        let q90 = quantile_sorted(&s, 1.0 - WINDOW_QUANTILE);
        let median = quantile_sorted(&s, 0.5);
        per_n.push(WindowSummary {
            n,
            m: group[0].m,
            k_c,
            trials: d.len(),
            mean: mean(&d),
            median,
            std: sample_std(&d),
            q10,
            q90,
            spread: q90 - q10,
            median_minus_kc: median - k_c,
            success: Proportion::new(
                d.iter().filter(|&&v| v <= k_c).count() as u64,
                d.len() as u64,
            ),
        });
    }
    let usable: Vec<&WindowSummary> = per_n.iter().filter(|s| s.std > 0.0).collect();
    let regression = if usable.len() >= 2 {
        let x: Vec<f64> = usable.iter().map(|s| (s.n as f64).ln()).collect();
        let y: Vec<f64> = usable.iter().map(|s| s.std.ln()).collect();
        Some(linear_regression(&x, &y)?)
    } else {
        None
    };
    Ok(WindowReport {
        alpha,
        per_n,
        regression,
    })
}

pub fn success_from_records(alpha: f64, records: &[TrialRecord]) -> Result<SuccessReport> {
    let mut per_n = Vec::new();
    for (n, group) in by_n(records) {
        let d = discs(&group)?;
        let k_c = group[0].k;
        let counts: Option<Vec<f64>> = group
            .iter()
            .map(|r| r.count_at_kc.map(|c| c as f64))
            .collect();
        per_n.push(SuccessSummary {
            n,
            m: group[0].m,
            k_c,
            success: Proportion::new(
                d.iter().filter(|&&v| v <= k_c).count() as u64,
                d.len() as u64,
            ),
            mean_count: counts.as_deref().map(mean),
            count_se: counts.as_deref().map(standard_error),
        });
    }
    Ok(SuccessReport { alpha, per_n })
}

pub fn tail_from_records(
    alpha: f64,
    records: &[TrialRecord],
    y_grid: &[f64],
) -> Result<TailReport> {
    if y_grid.iter().any(|y| !(*y >= 0.0)) {
        return domain("y grid must be non-negative");
    }
    let mut cells = Vec::new();
    let mut n_list = Vec::new();
    let mut monotone_in_y = true;
    for (n, group) in by_n(records) {
        n_list.push(n);
        let d = discs(&group)?;
        let k_c = group[0].k;
        let mut previous: Option<(f64, u64)> = None;
        for &y in y_grid {
            let count = d.iter().filter(|&&v| k_c - v > y).count() as u64;
            if let Some((py, pc)) = previous {
                if y > py && count > pc {
                    monotone_in_y = false;
                }
            }
            previous = Some((y, count));
            let proportion = Proportion::new(count, d.len() as u64);
            let censored = count == 0;
            cells.push(TailCell {
                n,
                y,
                ny: n as f64 * y,
                proportion,
                censored,
                upper_bound: if censored {
                    proportion.upper_bound()
                } else {
                    proportion.ci_high
                },
                log_frequency: (!censored).then(|| proportion.estimate.ln()),
            });
        }
    }
    let fit: Vec<&TailCell> = cells.iter().filter(|c| !c.censored).collect();
    let distinct = fit.iter().any(|c| c.ny != fit[0].ny);
    let regression = if fit.len() >= 2 && distinct {
        let x: Vec<f64> = fit.iter().map(|c| c.ny).collect();
        let y: Vec<f64> = fit
            .iter()
            .map(|c| c.log_frequency.expect("uncensored"))
            .collect();
        Some(linear_regression(&x, &y)?)
    } else {
        None
    };
    Ok(TailReport {
        alpha,
        n_list,
        y_grid: y_grid.to_vec(),
        cells,
        regression,
        monotone_in_y,
    })
}

struct AnnulusTrial {
    /// `|Z_{K_c - eps/n}|` per eps.
    inner_counts: Vec<u64>,
    /// Tight rows for the trial's uniform `x`, per eps.
    tight: Vec<u32>,
}

pub fn anticoncentration_from_records(
    alpha: f64,
    records: &[TrialRecord],
    eps_list: &[f64],
    interrupt: Option<&AtomicBool>,
) -> Result<(AnticoncentrationReport, bool)> {
    if eps_list.iter().any(|e| !(*e >= 0.0 && *e <= 1.0)) {
        return domain("eps values must lie in [0, 1]");
    }
    let mut per_n = Vec::new();
    for (n, group) in by_n(records) {
        let (m, k_c) = (group[0].m, group[0].k);
        let inner_bounds: Vec<f64> = eps_list.iter().map(|e| k_c - e / n as f64).collect();
        let (extra, interrupted) = map_trials(group.len(), interrupt, |i| {
            let rec = group[i as usize];
            let inst = generate_instance(n, m, rec.seed, rec.stream_id)?;
            let disc = rec.disc.unwrap_or(f64::INFINITY);
            let inner_counts = inner_bounds
                .iter()
                .map(|&b| {
                    if disc > b || b < 0.0 {
                        Ok(0)
                    } else {
                        count_solutions_pruned(&inst, b)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let rng = CounterRng::new(rec.seed, Domain::UniformSigns);
            let x: Vec<i8> = (0..n)
                .map(|j| {
                    if rng.below(rec.stream_id, 0, j as u32, 2) == 0 {
                        1
                    } else {
                        -1
                    }
                })
                .collect();
            let sums = inst.row_sums(&x);
            let tight = inner_bounds
                .iter()
                .map(|&b| sums.iter().filter(|s| (b..=k_c).contains(&s.abs())).count() as u32)
                .collect();
            Ok(AnnulusTrial {
                inner_counts,
                tight,
            })
        })?;
        if interrupted {
            return Ok((AnticoncentrationReport { alpha, per_n }, true));
        }
        let counts_at_kc = group
            .iter()
            .map(|r| match r.count_at_kc {
                Some(c) => Ok(c),
                None => {
                    if r.disc.is_some_and(|d| d > k_c) {
                        return Ok(0);
                    }
                    count_solutions_pruned(&generate_instance(n, m, r.seed, r.stream_id)?, k_c)
                }
            })
            .collect::<Result<Vec<u64>>>()?;
        let d = discs(&group)?;
        let p_outer = gauss_p(k_c)?;
        let trials = d.len();
        let mut cells = Vec::new();
        for (e, (&eps, &inner)) in eps_list.iter().zip(&inner_bounds).enumerate() {
            let hits = d.iter().filter(|&&v| inner <= v && v <= k_c).count() as u64;
            let window = Proportion::new(hits, trials as u64);
            let xi: Vec<f64> = counts_at_kc
                .iter()
                .zip(&extra)
                .map(|(&c, t)| (c - t.inner_counts[e]) as f64)
                .collect();
            let tight: Vec<u32> = extra.iter().map(|t| t.tight[e]).collect();
            let mut tight_histogram =
                vec![0u64; tight.iter().copied().max().unwrap_or(0) as usize + 1];
            for &t in &tight {
                tight_histogram[t as usize] += 1;
            }
            let p_inner = if inner > 0.0 { gauss_p(inner)? } else { 0.0 };
            let mean_xi = mean(&xi);
            cells.push(AnnulusCell {
                eps,
                window,
                ratio: (eps > 0.0).then(|| window.estimate / eps),
                mean_xi,
                xi_se: standard_error(&xi),
                xi_ratio: (eps > 0.0).then(|| mean_xi / eps),
                tight_mean: mean(&tight.iter().map(|&t| f64::from(t)).collect::<Vec<_>>()),
                tight_expected: m as f64 * (p_outer - p_inner),
                tight_histogram,
            });
        }
        let ratios: Vec<f64> = cells
            .iter()
            .filter(|c| c.window.count > 0)
            .filter_map(|c| c.ratio)
            .collect();
        let ratio_spread = (ratios.len() >= 2).then(|| {
            let hi = ratios.iter().copied().fold(f64::MIN, f64::max);
            let lo = ratios.iter().copied().fold(f64::MAX, f64::min);
            hi / lo
        });
        per_n.push(AnnulusSet {
            n,
            m,
            k_c,
            trials,
            mean_count_at_kc: mean(&counts_at_kc.iter().map(|&c| c as f64).collect::<Vec<_>>()),
            cells,
            ratio_spread,
        });
    }
    Ok((AnticoncentrationReport { alpha, per_n }, false))
}

pub(crate) fn window_with_records(
    config: &ExperimentConfig,
    interrupt: Option<&AtomicBool>,
) -> Result<WithRecords<WindowReport>> {
    let (records, interrupted) = collect(config, false, interrupt)?;
    Ok((
        window_from_records(config.density()?, &records)?,
        records,
        interrupted,
    ))
}

pub(crate) fn success_with_records(
    config: &ExperimentConfig,
    interrupt: Option<&AtomicBool>,
) -> Result<WithRecords<SuccessReport>> {
    let (records, interrupted) = collect(config, true, interrupt)?;
    Ok((
        success_from_records(config.density()?, &records)?,
        records,
        interrupted,
    ))
}

pub(crate) fn tail_with_records(
    config: &ExperimentConfig,
    interrupt: Option<&AtomicBool>,
) -> Result<WithRecords<TailReport>> {
    let (records, interrupted) = collect(config, false, interrupt)?;
    Ok((
        tail_from_records(config.density()?, &records, &config.y_grid)?,
        records,
        interrupted,
    ))
}

pub(crate) fn anticoncentration_with_records(
    config: &ExperimentConfig,
    interrupt: Option<&AtomicBool>,
) -> Result<WithRecords<AnticoncentrationReport>> {
    let (records, interrupted) = collect(config, true, interrupt)?;
    if interrupted {
        let (report, _) =
            anticoncentration_from_records(config.density()?, &[], &config.eps_list, None)?;
        return Ok((report, records, true));
    }
    let (report, extra_interrupted) =
        anticoncentration_from_records(config.density()?, &records, &config.eps_list, interrupt)?;
    Ok((report, records, extra_interrupted))
}

pub fn run_window(config: &ExperimentConfig) -> Result<WindowReport> {
    Ok(window_with_records(config, None)?.0)
}

pub fn run_success_at_kc(config: &ExperimentConfig) -> Result<SuccessReport> {
    Ok(success_with_records(config, None)?.0)
}

pub fn run_tail_lower(config: &ExperimentConfig, y_grid: &[f64]) -> Result<TailReport> {
    let (records, _) = collect(config, false, None)?;
    tail_from_records(config.density()?, &records, y_grid)
}

pub fn run_anticoncentration(
    config: &ExperimentConfig,
    eps_list: &[f64],
) -> Result<AnticoncentrationReport> {
    let (records, _) = collect(config, true, None)?;
    Ok(anticoncentration_from_records(config.density()?, &records, eps_list, None)?.0)
}
