//! Reflected Gray-code enumeration of the half cube.
//!
//! Step `i` flips coordinate `1 + trailing_zeros(i)`, so consecutive sign
//! vectors differ in one coordinate and all `m` row sums update in `O(m)`.

use super::{check_bound, sigma_from_index, Instance, SolveReport};
use crate::error::Result;

/// Adds `delta * col` to `sums` and returns the largest resulting `|sum|`.
#[inline]
fn update_max(sums: &mut [f64], col: &[f64], delta: f64) -> f64 {
    let mut lanes = [0.0f64; 4];
    let mut s_chunks = sums.chunks_exact_mut(4);
    let mut c_chunks = col.chunks_exact(4);
    for (s, c) in (&mut s_chunks).zip(&mut c_chunks) {
        for l in 0..4 {
            s[l] += delta * c[l];
            lanes[l] = lanes[l].max(s[l].abs());
        }
    }
    for (s, c) in s_chunks
        .into_remainder()
        .iter_mut()
        .zip(c_chunks.remainder())
    {
        *s += delta * c;
        lanes[0] = lanes[0].max(s.abs());
    }
    lanes[0].max(lanes[1]).max(lanes[2].max(lanes[3]))
}

/// Calls `visit(gray_index, max_abs_row_sum)` for every vertex of the half cube.
fn enumerate(inst: &Instance, mut visit: impl FnMut(u64, f64)) {
    let n = inst.n;
    let m = inst.m();
    let cols = inst.columns();
    let mut sums: Vec<f64> = inst.row_sums(&vec![1; n]);
    let mut signs = vec![1.0f64; n];
    visit(0, sums.iter().fold(0.0, |a, v| a.max(v.abs())));
    for step in 1u64..(1u64 << (n - 1)) {
        let j = step.trailing_zeros() as usize + 1;
        signs[j] = -signs[j];
        let value = update_max(&mut sums, &cols[j * m..(j + 1) * m], 2.0 * signs[j]);
        visit(step ^ (step >> 1), value);
    }
}

/// Exact discrepancy and one minimizer; the reported value is recomputed
/// directly from the minimizer.
pub fn solve_exact(inst: &Instance) -> Result<SolveReport> {
    inst.check_budget()?;
    let mut best = (f64::INFINITY, 0u64);
    enumerate(inst, |index, value| {
        if value < best.0 {
            best = (value, index);
        }
    });
    let argmin = sigma_from_index(inst.n, best.1);
    let disc_value = inst.objective(&argmin);
    Ok(SolveReport {
        disc_value,
        argmin,
        count_at: None,
    })
}

/// `|Z_K|` over the full cube, with the closed constraint `|<a_i, sigma>| <= K`.
pub fn count_solutions(inst: &Instance, k: f64) -> Result<u64> {
    inst.check_budget()?;
    check_bound(k)?;
    let mut count = 0u64;
    enumerate(inst, |_, value| {
        if value <= k {
            count += 1;
        }
    });
    Ok(2 * count)
}
