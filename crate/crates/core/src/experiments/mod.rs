//! Monte Carlo experiments at desk scale.
//!
//! Trial `i` at dimension `n` always uses the matrix stream
//! `(seed, stream_id(n, i))`, so the window, success, tail and
//! anticoncentration experiments see the same instances for the same seed.
//! Trials run on the rayon pool and are reduced in trial order, so reports are
//! byte-identical across thread counts.

mod critical;
mod process;

pub use critical::{
    anticoncentration_from_records, run_anticoncentration, run_success_at_kc, run_tail_lower,
    run_window, success_from_records, tail_from_records, window_from_records, AnnulusCell,
    AnnulusSet, AnticoncentrationReport, SuccessReport, SuccessSummary, TailCell, TailReport,
    WindowReport, WindowSummary, WINDOW_QUANTILE,
};
pub use process::{
    run_capacity_experiment, run_martingale, CapacityReport, CapacitySummary, MartingaleReport,
    MartingaleStep, MartingaleSummary, SurfacePoint, MIN_ALIVE,
};

use crate::analytic::{alpha_c, k_c, ModelParams};
use crate::cube::{count_solutions_pruned, generate_instance, solve_pruned, MAX_DIM};
use crate::error::{domain, Error, Result};
use crate::rng::RNG_TRANSFORM;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};

/// Largest `n` accepted unless the configuration opts in to larger runs.
pub const DEFAULT_N_CAP: usize = 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Window,
    Capacity,
    TailLower,
    SuccessAtKc,
    Anticoncentration,
    Martingale,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Window,
        ExperimentKind::Capacity,
        ExperimentKind::TailLower,
        ExperimentKind::SuccessAtKc,
        ExperimentKind::Anticoncentration,
        ExperimentKind::Martingale,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Window => "window",
            ExperimentKind::Capacity => "capacity",
            ExperimentKind::TailLower => "tail_lower",
            ExperimentKind::SuccessAtKc => "success_at_kc",
            ExperimentKind::Anticoncentration => "anticoncentration",
            ExperimentKind::Martingale => "martingale",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::Domain(format!("unknown experiment kind '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Fixes `K`; the density becomes `alpha_c(K)`.
    #[serde(rename = "K")]
    pub k: Option<f64>,
    /// Fixes the density; `K` becomes `K_c(alpha)`.
    pub alpha: Option<f64>,
    pub n_list: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// Directory receiving `<kind>.csv` and `<kind>.json`.
    pub output_path: Option<PathBuf>,
    /// Lower-tail depths `y` (tail_lower).
    pub y_grid: Vec<f64>,
    /// Annulus widths `eps` in units of `1/n` (anticoncentration).
    pub eps_list: Vec<f64>,
    /// Margin `x` in `t = round(alpha_c n) - ceil(x log n)` (martingale).
    pub x: f64,
    /// Overlap pairs sampled per row (capacity, martingale).
    pub overlap_samples: usize,
    /// Second bound, as a multiple of `K`, for the coupled capacity comparison
    /// (martingale).
    pub coupled_factor: f64,
    /// Permit `n` above [`DEFAULT_N_CAP`] (up to the hard cap of 30).
    pub allow_large_n: bool,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, n_list: Vec<usize>, trials: usize, seed: u64) -> Self {
        Self {
            kind,
            k: Some(1.0),
            alpha: None,
            n_list,
            trials,
            seed,
            output_path: None,
            y_grid: vec![0.0, 0.01, 0.02, 0.04, 0.06, 0.08, 0.1],
            eps_list: vec![0.1, 0.3, 1.0],
            x: 3.0,
            overlap_samples: 0,
            coupled_factor: 1.1,
            allow_large_n: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.k, self.alpha) {
            (Some(_), Some(_)) | (None, None) => {
                return domain("exactly one of K and alpha must be given")
            }
            (Some(k), None) if !(k > 0.0 && k.is_finite()) => {
                return domain(format!("K must be positive, got {k}"))
            }
            (None, Some(a)) if !(a > 0.0 && a.is_finite()) => {
                return domain(format!("alpha must be positive, got {a}"))
            }
            _ => {}
        }
        if self.trials == 0 {
            return domain("trials must be at least 1");
        }
        if self.n_list.is_empty() {
            return domain("n_list must not be empty");
        }
        let cap = if self.allow_large_n {
            MAX_DIM
        } else {
            DEFAULT_N_CAP
        };
        for &n in &self.n_list {
            if n > MAX_DIM {
                return Err(Error::Budget { n, limit: MAX_DIM });
            }
            if n > cap {
                return Err(Error::Budget { n, limit: cap });
            }
            if n < 2 {
                return domain(format!("n must be at least 2, got {n}"));
            }
        }
        if self.trials > u32::MAX as usize {
            return domain("trials exceed the stream range");
        }
        if self.y_grid.iter().any(|y| !(*y >= 0.0)) {
            return domain("y grid must be non-negative");
        }
        if self.eps_list.iter().any(|e| !(*e >= 0.0 && *e <= 1.0)) {
            return domain("eps values must lie in [0, 1]");
        }
        if !(self.coupled_factor > 1.0) {
            return domain("coupled factor must exceed 1");
        }
        Ok(())
    }

    /// The fixed density.
    pub fn density(&self) -> Result<f64> {
        match (self.k, self.alpha) {
            (Some(k), None) => alpha_c(k),
            (None, Some(a)) => Ok(a),
            _ => domain("exactly one of K and alpha must be given"),
        }
    }

    /// The fixed bound (capacity-type experiments).
    pub fn bound(&self) -> Result<f64> {
        match (self.k, self.alpha) {
            (Some(k), None) => Ok(k),
            (None, Some(a)) => k_c(a),
            _ => domain("exactly one of K and alpha must be given"),
        }
    }
}

/// Stream index of trial `trial` at dimension `n`.
pub fn stream_id(n: usize, trial: u64) -> u64 {
    ((n as u64) << 32) | trial
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub stream_id: u64,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "K")]
    pub k: f64,
    pub disc: Option<f64>,
    pub count_at_kc: Option<u64>,
    pub alpha_star: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub version: &'static str,
    pub rng_transform: &'static str,
    /// Seconds since the epoch from `SOURCE_DATE_EPOCH`, else absent so that
    /// reruns stay byte-identical.
    pub timestamp: Option<u64>,
}

impl Metadata {
    pub fn current() -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION"),
            rng_transform: RNG_TRANSFORM,
            timestamp: std::env::var("SOURCE_DATE_EPOCH")
                .ok()
                .and_then(|s| s.trim().parse().ok()),
        }
    }
}

/// Runs `work` for trials `0..trials` in parallel, returning results in trial
/// order. Trials not started when `interrupt` is raised are dropped and the
/// flag in the result is set.
pub(crate) fn map_trials<T, F>(
    trials: usize,
    interrupt: Option<&AtomicBool>,
    work: F,
) -> Result<(Vec<T>, bool)>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    let out: Vec<Option<T>> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            if interrupt.is_some_and(|f| f.load(Ordering::Relaxed)) {
                return Ok(None);
            }
            work(i).map(Some)
        })
        .collect::<Result<_>>()?;
    let interrupted = out.iter().any(Option::is_none);
    Ok((out.into_iter().flatten().collect(), interrupted))
}

/// Exact discrepancy (and optionally `|Z_{K_c}|`) for trials `0..trials` at
/// `m = round(alpha n)` rows and `K_c = K_c(m/n)`.
pub fn critical_records(
    alpha: f64,
    n: usize,
    trials: usize,
    seed: u64,
    with_count: bool,
    interrupt: Option<&AtomicBool>,
) -> Result<(Vec<TrialRecord>, bool)> {
    let params = ModelParams::critical_rows(alpha, n)?;
    map_trials(trials, interrupt, |i| {
        let stream = stream_id(n, i);
        let inst = generate_instance(n, params.m, seed, stream)?;
        let disc = solve_pruned(&inst)?.disc_value;
        let count = if with_count {
            // Below the discrepancy there are no solutions.
            Some(if disc > params.k {
                0
            } else {
                count_solutions_pruned(&inst, params.k)?
            })
        } else {
            None
        };
        Ok(TrialRecord {
            seed,
            stream_id: stream,
            n,
            m: params.m,
            k: params.k,
            disc: Some(disc),
            count_at_kc: count,
            alpha_star: None,
        })
    })
}

/// All records of an experiment plus its typed report.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ExperimentReport {
    Window(WindowReport),
    Capacity(CapacityReport),
    TailLower(TailReport),
    SuccessAtKc(SuccessReport),
    Anticoncentration(AnticoncentrationReport),
    Martingale(MartingaleReport),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub metadata: Metadata,
    pub interrupted: bool,
    pub report: ExperimentReport,
    #[serde(skip)]
    pub records: Vec<TrialRecord>,
}

impl ExperimentOutput {
    /// One line per `n` for terminal display.
    pub fn summary_lines(&self) -> Vec<String> {
        match &self.report {
            ExperimentReport::Window(r) => r
                .per_n
                .iter()
                .map(|s| {
                    format!(
                        "n={} m={} K_c={:.6} std={:.6} spread={:.6} success={:.4}",
                        s.n, s.m, s.k_c, s.std, s.spread, s.success.estimate
                    )
                })
                .collect(),
            ExperimentReport::SuccessAtKc(r) => r
                .per_n
                .iter()
                .map(|s| {
                    format!(
                        "n={} success={:.4} [{:.4}, {:.4}] mean|Z|={:.4}",
                        s.n,
                        s.success.estimate,
                        s.success.ci_low,
                        s.success.ci_high,
                        s.mean_count.unwrap_or(f64::NAN)
                    )
                })
                .collect(),
            ExperimentReport::TailLower(r) => {
                let mut lines = Vec::new();
                for &n in &r.n_list {
                    let cells: Vec<String> = r
                        .cells
                        .iter()
                        .filter(|c| c.n == n)
                        .map(|c| format!("{}:{}", c.y, c.proportion.count))
                        .collect();
                    lines.push(format!("n={n} counts {}", cells.join(" ")));
                }
                lines
            }
            ExperimentReport::Anticoncentration(r) => r
                .per_n
                .iter()
                .flat_map(|a| {
                    a.cells.iter().map(move |c| {
                        format!(
                            "n={} eps={} window={:.4} ratio={:.4} mean|Xi|={:.4}",
                            a.n,
                            c.eps,
                            c.window.estimate,
                            c.ratio.unwrap_or(f64::NAN),
                            c.mean_xi
                        )
                    })
                })
                .collect(),
            ExperimentReport::Capacity(r) => r
                .per_n
                .iter()
                .map(|s| {
                    format!(
                        "n={} mean alpha*={:.4} (alpha_c={:.4}) std={:.4}",
                        s.n, s.mean_alpha_star, s.alpha_c, s.std_alpha_star
                    )
                })
                .collect(),
            ExperimentReport::Martingale(r) => r
                .per_n
                .iter()
                .map(|s| {
                    format!(
                        "n={} worst |mean Y|/se={:.3} P(empty at t={})={:.4}",
                        s.n, s.worst_standardized_mean, s.t_target, s.empty_at_target.estimate
                    )
                })
                .collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "seed",
            "stream_id",
            "n",
            "m",
            "K",
            "disc",
            "count_at_kc",
            "alpha_star",
        ])?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        for r in &self.records {
            w.write_record([
                r.seed.to_string(),
                r.stream_id.to_string(),
                r.n.to_string(),
                r.m.to_string(),
                r.k.to_string(),
                opt(r.disc.map(|v| v.to_string())),
                opt(r.count_at_kc.map(|v| v.to_string())),
                opt(r.alpha_star.map(|v| v.to_string())),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        writeln!(out)?;
        Ok(())
    }

    /// Writes `<kind>.csv` and `<kind>.json` into `dir`, returning both paths.
    pub fn write_files(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let stem = self.config.kind.name();
        let csv_path = dir.join(format!("{stem}.csv"));
        let json_path = dir.join(format!("{stem}.json"));
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(&csv_path)?))?;
        self.write_json(std::io::BufWriter::new(std::fs::File::create(&json_path)?))?;
        Ok((csv_path, json_path))
    }
}

/// Runs the experiment selected by `config.kind`.
pub fn run_experiment(
    config: &ExperimentConfig,
    interrupt: Option<&AtomicBool>,
) -> Result<ExperimentOutput> {
    config.validate()?;
    let (report, records, interrupted) = match config.kind {
        ExperimentKind::Window => {
            let (r, recs, i) = critical::window_with_records(config, interrupt)?;
            (ExperimentReport::Window(r), recs, i)
        }
        ExperimentKind::SuccessAtKc => {
            let (r, recs, i) = critical::success_with_records(config, interrupt)?;
            (ExperimentReport::SuccessAtKc(r), recs, i)
        }
        ExperimentKind::TailLower => {
            let (r, recs, i) = critical::tail_with_records(config, interrupt)?;
            (ExperimentReport::TailLower(r), recs, i)
        }
        ExperimentKind::Anticoncentration => {
            let (r, recs, i) = critical::anticoncentration_with_records(config, interrupt)?;
            (ExperimentReport::Anticoncentration(r), recs, i)
        }
        ExperimentKind::Capacity => {
            let (r, recs, i) = process::capacity_with_records(config, interrupt)?;
            (ExperimentReport::Capacity(r), recs, i)
        }
        ExperimentKind::Martingale => {
            let (r, recs, i) = process::martingale_with_records(config, interrupt)?;
            (ExperimentReport::Martingale(r), recs, i)
        }
    };
    Ok(ExperimentOutput {
        config: config.clone(),
        metadata: Metadata::current(),
        interrupted,
        report,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for kind in ExperimentKind::ALL {
            assert_eq!(kind.name().parse::<ExperimentKind>().unwrap(), kind);
        }
        assert_eq!(
            "success-at-kc".parse::<ExperimentKind>().unwrap(),
            ExperimentKind::SuccessAtKc
        );
        assert!("bogus".parse::<ExperimentKind>().is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = ExperimentConfig::new(ExperimentKind::Window, vec![10], 5, 1);
        assert!(c.validate().is_ok());
        c.alpha = Some(1.0);
        assert!(c.validate().is_err());
        c.alpha = None;
        c.n_list = vec![28];
        assert!(matches!(c.validate(), Err(Error::Budget { .. })));
        c.allow_large_n = true;
        assert!(c.validate().is_ok());
        c.n_list = vec![31];
        assert!(matches!(c.validate(), Err(Error::Budget { .. })));
        c.n_list = vec![10];
        c.trials = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn streams_are_distinct_per_n_and_trial() {
        assert_ne!(stream_id(20, 1), stream_id(21, 1));
        assert_ne!(stream_id(20, 1), stream_id(20, 2));
    }
}
