//! Exact computations over the hypercube `{-1, +1}^n`.
//!
//! Matrix entries are Gaussian with variance `1/n`, rounded to the nearest
//! multiple of `2^-44`. Every signed row sum of such entries is a multiple of
//! `2^-44` below `2^9` in magnitude, so it is exactly representable and
//! independent of summation order. Incremental (Gray-code, branch-and-bound,
//! table-driven) and naive evaluations therefore agree bit for bit, and the
//! closed comparison `|<a, sigma>| <= K` is decided without rounding.

mod capacity;
mod gray;
mod prune;

pub use capacity::{
    regularity_statistic, run_capacity, run_capacity_with, CapacityOptions, CapacityTrace,
    OverlapSample,
};
pub use gray::{count_solutions, solve_exact};
pub use prune::{count_solutions_pruned, solve_pruned};

use crate::error::{domain, Error, Result};
use crate::rng::{CounterRng, Domain};
use serde::{Deserialize, Serialize};

/// Largest dimension accepted by the exact enumerators.
pub const MAX_DIM: usize = 30;

/// Entries are multiples of this quantum.
pub const ENTRY_QUANTUM: f64 = 1.0 / 17_592_186_044_416.0; // 2^-44

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub n: usize,
    pub rows: Vec<Vec<f64>>,
    pub seed: u64,
    pub stream_id: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub disc_value: f64,
    pub argmin: Vec<i8>,
    /// `(K, |Z_K|)` when a count was requested.
    pub count_at: Option<(f64, u64)>,
}

/// Entry `(row, col)` of the matrix for `(seed, stream_id)`.
#[inline]
pub fn gaussian_entry(rng: &CounterRng, n: usize, stream_id: u64, row: u32, col: u32) -> f64 {
    let z = rng.normal(stream_id, row, col) / (n as f64).sqrt();
    (z / ENTRY_QUANTUM).round() * ENTRY_QUANTUM
}

/// Row `row` (0-based) of the matrix for `(seed, stream_id)`; rows do not
/// depend on how many rows are generated.
pub fn generate_row(n: usize, seed: u64, stream_id: u64, row: usize) -> Vec<f64> {
    let rng = CounterRng::new(seed, Domain::Matrix);
    (0..n)
        .map(|j| gaussian_entry(&rng, n, stream_id, row as u32, j as u32))
        .collect()
}

pub fn generate_instance(n: usize, m: usize, seed: u64, stream_id: u64) -> Result<Instance> {
    if n == 0 {
        return domain("n must be at least 1");
    }
    if n > u32::MAX as usize || m > u32::MAX as usize {
        return domain("matrix dimensions exceed the counter range");
    }
    let rows = (0..m)
        .map(|i| generate_row(n, seed, stream_id, i))
        .collect();
    Ok(Instance {
        n,
        rows,
        seed,
        stream_id,
    })
}

impl Instance {
    /// An instance from explicit rows; `seed` and `stream_id` are zero.
    pub fn from_rows(n: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if n == 0 {
            return domain("n must be at least 1");
        }
        if let Some(i) = rows.iter().position(|r| r.len() != n) {
            return domain(format!(
                "row {i} has length {} instead of {n}",
                rows[i].len()
            ));
        }
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return domain("matrix entries must be finite");
        }
        Ok(Self {
            n,
            rows,
            seed: 0,
            stream_id: 0,
        })
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    /// Regenerates the rows from `(seed, stream_id)`.
    pub fn regenerate(&self) -> Result<Self> {
        generate_instance(self.n, self.m(), self.seed, self.stream_id)
    }

    /// `<a_i, sigma>` for every row, summed left to right.
    pub fn row_sums(&self, sigma: &[i8]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| {
                r.iter()
                    .zip(sigma)
                    .map(|(a, &s)| if s > 0 { *a } else { -*a })
                    .sum()
            })
            .collect()
    }

    /// `||A sigma||_inf`.
    pub fn objective(&self, sigma: &[i8]) -> f64 {
        self.row_sums(sigma)
            .into_iter()
            .fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Column-major copy: column `j` occupies `[j m, (j+1) m)`.
    pub(crate) fn columns(&self) -> Vec<f64> {
        let m = self.m();
        let mut cols = vec![0.0; m * self.n];
        for (i, row) in self.rows.iter().enumerate() {
            for (j, &a) in row.iter().enumerate() {
                cols[j * m + i] = a;
            }
        }
        cols
    }

    pub(crate) fn check_budget(&self) -> Result<()> {
        if self.n > MAX_DIM {
            return Err(Error::Budget {
                n: self.n,
                limit: MAX_DIM,
            });
        }
        Ok(())
    }
}

/// Sign vector for a half-cube index: coordinate 0 is `+1`, coordinate
/// `j >= 1` is `-1` exactly when bit `j - 1` of `index` is set.
pub fn sigma_from_index(n: usize, index: u64) -> Vec<i8> {
    (0..n)
        .map(|j| {
            if j > 0 && (index >> (j - 1)) & 1 == 1 {
                -1
            } else {
                1
            }
        })
        .collect()
}

pub(crate) fn check_bound(k: f64) -> Result<()> {
    if !(k >= 0.0) || k.is_nan() {
        return domain(format!("K must be non-negative, got {k}"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entries_are_on_the_grid() {
        let inst = generate_instance(7, 5, 3, 9).unwrap();
        for &a in inst.rows.iter().flatten() {
            assert_eq!((a / ENTRY_QUANTUM).fract(), 0.0);
            assert!(a.abs() < 8.0);
        }
        assert_eq!(inst.regenerate().unwrap(), inst);
    }

    #[test]
    fn rows_do_not_depend_on_row_count() {
        let short = generate_instance(6, 2, 1, 4).unwrap();
        let long = generate_instance(6, 5, 1, 4).unwrap();
        assert_eq!(short.rows[..], long.rows[..2]);
        assert_eq!(generate_row(6, 1, 4, 3), long.rows[3]);
    }

    #[test]
    fn from_rows_validates_lengths() {
        assert!(Instance::from_rows(3, vec![vec![1.0, 2.0]]).is_err());
        assert!(Instance::from_rows(0, vec![]).is_err());
        assert!(Instance::from_rows(2, vec![vec![1.0, f64::NAN]]).is_err());
    }

    #[test]
    fn sigma_index_layout() {
        assert_eq!(sigma_from_index(4, 0b101), vec![1, -1, 1, -1]);
    }
}
