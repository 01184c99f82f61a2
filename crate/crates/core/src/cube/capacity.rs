//! The solution-set process `S_0 ⊇ S_1 ⊇ ...`, where `S_t` holds the sign
//! vectors satisfying the first `t` rows.
//!
//! `S_t` is a packed bitset over the half cube (coordinate 0 fixed to `+1`);
//! half-cube index `i` has coordinate `j >= 1` negative exactly when bit
//! `j - 1` of `i` is set. Row sums come from two lookup tables over the low
//! and high index bits, so filtering a row costs one addition per survivor.

use super::{check_bound, generate_row, MAX_DIM};
use crate::analytic::{alpha_c, gauss_p, log_gauss_p};
use crate::error::{domain, Error, Result};
use crate::rng::{CounterRng, Domain};
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;
use std::io::Write;

/// Hard cap on the number of rows added when none is given.
pub const MAX_ROWS_CAP: usize = 100_000;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CapacityOptions {
    /// Stop after this many rows even if solutions remain. `None` picks
    /// `min(8 alpha_c(K) n + 64, MAX_ROWS_CAP)`.
    pub max_rows: Option<usize>,
    /// Values of `t` at which overlaps are sampled; `None` samples at every `t`.
    pub checkpoints: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapSample {
    pub t: usize,
    /// `|<sigma1, sigma2>|` for independent uniform pairs from `S_t`.
    pub overlaps: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityTrace {
    #[serde(rename = "K")]
    pub k: f64,
    pub n: usize,
    pub seed: u64,
    pub stream_id: u64,
    /// `t*`, the last `t` with `S_t` nonempty.
    pub capacity_rows: usize,
    /// `t* / n`.
    pub alpha_star: f64,
    /// `|S_t|` over the full cube for `t = 0..=t*`.
    pub sizes: Vec<u64>,
    /// `Q_t = log(|S_t| / (2^n p^t))` for `t = 0..=t*`.
    pub q_trace: Vec<f64>,
    /// `Y_t = |S_t| / (p |S_{t-1}|) - 1` for `t = 1..`; entry `i` is
    /// `Y_{i+1}`. The last entry is the terminal `Y_{t*+1} = -1` unless the
    /// run was truncated.
    pub y_trace: Vec<f64>,
    pub overlap_samples: Vec<OverlapSample>,
    /// The row cap was reached with `S_t` still nonempty.
    pub truncated: bool,
}

impl CapacityTrace {
    /// `max_t |Q_t - sum_{i<=t} log(1 + Y_i)|` over `t = 0..=t*`.
    pub fn q_reconstruction_error(&self) -> f64 {
        let mut acc = 0.0;
        let mut worst = self.q_trace[0].abs();
        for (t, q) in self.q_trace.iter().enumerate().skip(1) {
            acc += self.y_trace[t - 1].ln_1p();
            worst = worst.max((q - acc).abs());
        }
        worst
    }

    /// CSV projection with columns `t, size, q_t, y_t` for `t = 0..=t*`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "size", "q_t", "y_t"])?;
        for (t, (&size, q)) in self.sizes.iter().zip(&self.q_trace).enumerate() {
            let y = if t == 0 {
                String::new()
            } else {
                self.y_trace[t - 1].to_string()
            };
            w.write_record([t.to_string(), size.to_string(), q.to_string(), y])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct RowTables {
    lo_bits: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl RowTables {
    fn new(n: usize) -> Self {
        let free = n - 1;
        let lo_bits = if free <= 6 { free } else { (free / 2).max(6) };
        Self {
            lo_bits,
            lo: vec![0.0; 1 << lo_bits],
            hi: vec![0.0; 1 << (free - lo_bits)],
        }
    }

    /// Signed partial sums of `coeffs` for every bit pattern (set bit = minus).
    fn fill(table: &mut [f64], coeffs: &[f64]) {
        table[0] = coeffs.iter().sum();
        for x in 1..table.len() {
            let low = x.trailing_zeros() as usize;
            table[x] = table[x & (x - 1)] - 2.0 * coeffs[low];
        }
    }

    fn load(&mut self, row: &[f64]) {
        let split = 1 + self.lo_bits;
        Self::fill(&mut self.lo, &row[1..split]);
        Self::fill(&mut self.hi, &row[split..]);
    }
}

/// Keeps the members of `bits` whose row sum satisfies `|sum| <= k`;
/// returns the new population count.
fn filter_row(bits: &mut [u64], tables: &RowTables, a0: f64, k: f64) -> u64 {
    let lo_mask = (1usize << tables.lo_bits) - 1;
    let mut population = 0u64;
    for (w, word) in bits.iter_mut().enumerate() {
        if *word == 0 {
            continue;
        }
        let start = w * 64;
        let base = a0 + tables.hi[start >> tables.lo_bits];
        let lo = &tables.lo[start & lo_mask..];
        let keep = if *word == u64::MAX {
            let mut mask = 0u64;
            for (b, v) in lo[..64].iter().enumerate() {
                mask |= u64::from((base + v).abs() <= k) << b;
            }
            mask
        } else {
            let mut rest = *word;
            let mut keep = rest;
            while rest != 0 {
                let b = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                if !((base + lo[b]).abs() <= k) {
                    keep &= !(1u64 << b);
                }
            }
            keep
        };
        *word = keep;
        population += u64::from(keep.count_ones());
    }
    population
}

/// Half-cube index of the `rank`-th set bit, given per-word prefix counts.
fn select(bits: &[u64], prefix: &[u64], rank: u64) -> u64 {
    let w = prefix.partition_point(|&c| c <= rank) - 1;
    let mut word = bits[w];
    for _ in 0..(rank - prefix[w]) {
        word &= word - 1;
    }
    (w * 64) as u64 + u64::from(word.trailing_zeros())
}

fn sample_overlaps(
    bits: &[u64],
    n: usize,
    t: usize,
    count: usize,
    rng: &CounterRng,
    stream_id: u64,
) -> Vec<u32> {
    let mut prefix = Vec::with_capacity(bits.len() + 1);
    let mut acc = 0u64;
    for &word in bits {
        prefix.push(acc);
        acc += u64::from(word.count_ones());
    }
    prefix.push(acc);
    (0..count)
        .map(|i| {
            let r1 = rng.below(stream_id, t as u32, 2 * i as u32, acc);
            let r2 = rng.below(stream_id, t as u32, 2 * i as u32 + 1, acc);
            let (a, b) = (select(bits, &prefix, r1), select(bits, &prefix, r2));
            (n as i64 - 2 * i64::from((a ^ b).count_ones())).unsigned_abs() as u32
        })
        .collect()
}

pub fn run_capacity(
    n: usize,
    k: f64,
    seed: u64,
    stream_id: u64,
    overlap_sample_count: usize,
) -> Result<CapacityTrace> {
    run_capacity_with(
        n,
        k,
        seed,
        stream_id,
        overlap_sample_count,
        &CapacityOptions::default(),
    )
}

pub fn run_capacity_with(
    n: usize,
    k: f64,
    seed: u64,
    stream_id: u64,
    overlap_sample_count: usize,
    options: &CapacityOptions,
) -> Result<CapacityTrace> {
    if n == 0 {
        return domain("n must be at least 1");
    }
    if n > MAX_DIM {
        return Err(Error::Budget { n, limit: MAX_DIM });
    }
    check_bound(k)?;
    if k == 0.0 {
        return domain("K must be positive");
    }
    let p = gauss_p(k)?;
    let log_p = log_gauss_p(k)?;
    let max_rows = match options.max_rows {
        Some(r) => r,
        None => {
            let guess = 8.0 * alpha_c(k)? * n as f64 + 64.0;
            if guess.is_finite() {
                (guess as usize).min(MAX_ROWS_CAP)
            } else {
                MAX_ROWS_CAP
            }
        }
    };
    let sampled = |t: usize| match &options.checkpoints {
        Some(list) => list.contains(&t),
        None => true,
    };

    let half = 1u64 << (n - 1);
    let words = half.div_ceil(64) as usize;
    let mut bits = vec![u64::MAX; words];
    if half < 64 {
        bits[0] = (1u64 << half) - 1;
    }
    let rng = CounterRng::new(seed, Domain::OverlapSampling);
    let mut tables = RowTables::new(n);
    let log_full = n as f64 * LN_2;

    let mut sizes = vec![2 * half];
    let mut q_trace = vec![0.0];
    let mut y_trace = Vec::new();
    let mut overlap_samples = Vec::new();
    if overlap_sample_count > 0 && sampled(0) {
        overlap_samples.push(OverlapSample {
            t: 0,
            overlaps: sample_overlaps(&bits, n, 0, overlap_sample_count, &rng, stream_id),
        });
    }
    let mut truncated = false;
    loop {
        let t = sizes.len();
        if t > max_rows {
            truncated = true;
            break;
        }
        let row = generate_row(n, seed, stream_id, t - 1);
        tables.load(&row);
        let size = 2 * filter_row(&mut bits, &tables, row[0], k);
        let previous = sizes[t - 1];
        y_trace.push((size as f64 / previous as f64) / p - 1.0);
        if size == 0 {
            break;
        }
        sizes.push(size);
        q_trace.push((size as f64).ln() - log_full - t as f64 * log_p);
        if overlap_sample_count > 0 && sampled(t) {
            overlap_samples.push(OverlapSample {
                t,
                overlaps: sample_overlaps(&bits, n, t, overlap_sample_count, &rng, stream_id),
            });
        }
    }
    let capacity_rows = sizes.len() - 1;
    Ok(CapacityTrace {
        k,
        n,
        seed,
        stream_id,
        capacity_rows,
        alpha_star: capacity_rows as f64 / n as f64,
        sizes,
        q_trace,
        y_trace,
        overlap_samples,
        truncated,
    })
}

/// Fraction of the overlaps sampled at `t` that exceed `threshold`.
pub fn regularity_statistic(trace: &CapacityTrace, t: usize, threshold: f64) -> Result<f64> {
    let sample = trace
        .overlap_samples
        .iter()
        .find(|s| s.t == t && !s.overlaps.is_empty())
        .ok_or(Error::MissingData(t))?;
    let above = sample
        .overlaps
        .iter()
        .filter(|&&v| f64::from(v) > threshold)
        .count();
    Ok(above as f64 / sample.overlaps.len() as f64)
}
