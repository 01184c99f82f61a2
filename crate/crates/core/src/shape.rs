//! Grid verification of the shape of `F` at `alpha = alpha_c(K)`.
//!
//! Three facts are checked numerically, in floating point:
//!
//! 1. `F` is decreasing on `(0, b1]`: `L(beta) > q(beta)` at every point of a
//!    fine grid (plus a geometric grid towards 0, where `F' -> -inf`).
//! 2. `F` is increasing on `[b2, 1/2)`: `L(beta) < q(beta)` on the grid.
//! 3. `F(beta) <= F(1/2) - eps_gap` on `[b1, b2]`: grid values, widened by a
//!    per-cell derivative budget times half the cell width.
//!
//! The cut points follow the three K regimes: `b1 = K/12, b2 = 0.04` below
//! `K = 0.1`; `b1 = 0.005, b2 = 0.3` on `[0.1, 4]`; above 4, `b2 = 0.2` and
//! `b1` is the last fine-grid point before `L` first meets `q`.

use crate::analytic::{
    alpha_c, free_energy, free_energy_half, free_energy_second_deriv_half, l_curve, pair_q,
    ModelParams,
};
use crate::error::{domain, Result};
use serde::Serialize;

/// Nominal bound on `|d/dbeta (F(beta) - F(1/2))|` over the gap region.
pub const DERIVATIVE_BUDGET: f64 = 6.0;
pub const DEFAULT_GRID_STEP: f64 = 1e-4;
/// The decreasing prefix is checked on a grid this many times finer.
pub const FINE_GRID_FACTOR: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    #[serde(rename = "K>4")]
    Large,
    #[serde(rename = "0.1<=K<=4")]
    Middle,
    #[serde(rename = "K<0.1")]
    Small,
}

impl Regime {
    pub fn for_bound(k: f64) -> Self {
        if k > 4.0 {
            Regime::Large
        } else if k >= 0.1 {
            Regime::Middle
        } else {
            Regime::Small
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Regime::Large => "K>4",
            Regime::Middle => "0.1<=K<=4",
            Regime::Small => "K<0.1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeRegion {
    Decreasing,
    Increasing,
    Gap,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeFailure {
    pub region: ShapeRegion,
    pub beta: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeVerdict {
    #[serde(rename = "K")]
    pub k: f64,
    pub alpha: f64,
    pub regime: Regime,
    pub b1: f64,
    pub b2: f64,
    /// Verified margin below `F(1/2)` on `[b1, b2]`; meaningful when positive.
    pub eps_gap: f64,
    pub grid_step: f64,
    pub fine_step: f64,
    /// Largest per-cell Lipschitz bound used in the gap region.
    pub derivative_budget: f64,
    pub max_observed_slope: f64,
    /// Gap cells whose secant slope exceeded [`DERIVATIVE_BUDGET`].
    pub slope_flagged_cells: usize,
    pub checked_points: usize,
    pub verified: bool,
    pub failure: Option<ShapeFailure>,
}

/// A sampled `F` curve with its curvature at 1/2 and the shape verdict for
/// the same `K`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreeEnergyProfile {
    pub params: ModelParams,
    pub beta_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub second_deriv_half: f64,
    pub verdict: ShapeVerdict,
}

pub fn free_energy_profile(
    params: &ModelParams,
    beta_grid: &[f64],
    grid_step: f64,
) -> Result<FreeEnergyProfile> {
    if beta_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return domain("beta grid must be strictly ascending");
    }
    let values = beta_grid
        .iter()
        .map(|&b| free_energy(params, b))
        .collect::<Result<Vec<_>>>()?;
    Ok(FreeEnergyProfile {
        params: *params,
        beta_grid: beta_grid.to_vec(),
        values,
        second_deriv_half: free_energy_second_deriv_half(params)?.closed_form,
        verdict: verify_shape(params.k, grid_step)?,
    })
}

/// Uniform grid `start, start + step, ...` up to and including `end`.
fn uniform_grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    let cells = ((end - start) / step).floor() as usize;
    let mut grid: Vec<f64> = (0..=cells).map(|i| start + i as f64 * step).collect();
    if end - grid[grid.len() - 1] > 1e-3 * step {
        grid.push(end);
    }
    grid
}

pub fn verify_shape(k: f64, grid_step: f64) -> Result<ShapeVerdict> {
    if !(k > 0.0 && k.is_finite()) {
        return domain(format!("K must be positive, got {k}"));
    }
    if !(grid_step > 0.0 && grid_step <= 1e-2) {
        return domain(format!("grid step must lie in (0, 0.01], got {grid_step}"));
    }
    let alpha = alpha_c(k)?;
    let params = ModelParams::new(k, alpha, 1)?;
    let regime = Regime::for_bound(k);
    let fine = grid_step / FINE_GRID_FACTOR;

    let mut verdict = ShapeVerdict {
        k,
        alpha,
        regime,
        b1: 0.0,
        b2: 0.0,
        eps_gap: f64::NEG_INFINITY,
        grid_step,
        fine_step: fine,
        derivative_budget: DERIVATIVE_BUDGET,
        max_observed_slope: 0.0,
        slope_flagged_cells: 0,
        checked_points: 0,
        verified: false,
        failure: None,
    };
    let fail = |v: &mut ShapeVerdict, region, beta, detail: String| {
        v.failure = Some(ShapeFailure {
            region,
            beta,
            detail,
        });
    };

    // Geometric approach to 0, below the fine grid.
    let tiny: Vec<f64> = (0..=40)
        .map(|i| fine * 10f64.powf(-8.0 * (40 - i) as f64 / 40.0))
        .collect();

    // Decreasing prefix.
    let (b1, b2) = match regime {
        Regime::Small => (k / 12.0, 0.04),
        Regime::Middle => (0.005, 0.3),
        Regime::Large => {
            let b2 = 0.2;
            let mut last_good = None;
            for &beta in tiny
                .iter()
                .chain(uniform_grid(fine, b2, fine).iter().skip(1))
            {
                verdict.checked_points += 1;
                if l_curve(&params, beta)? > pair_q(k, beta)? {
                    last_good = Some(beta);
                } else {
                    break;
                }
            }
            match last_good {
                Some(b1) => (b1, b2),
                None => {
                    fail(
                        &mut verdict,
                        ShapeRegion::Decreasing,
                        tiny[0],
                        "L <= q at the first grid point".into(),
                    );
                    return Ok(verdict);
                }
            }
        }
    };
    verdict.b1 = b1;
    verdict.b2 = b2;
    if !(b1 > 0.0 && b1 <= b2 && b2 < 0.5) {
        fail(
            &mut verdict,
            ShapeRegion::Gap,
            b1,
            format!("inconsistent cut points b1 = {b1}, b2 = {b2}"),
        );
        return Ok(verdict);
    }

    if regime != Regime::Large {
        for &beta in tiny.iter().chain(uniform_grid(fine, b1, fine).iter()) {
            verdict.checked_points += 1;
            let (l, q) = (l_curve(&params, beta)?, pair_q(k, beta)?);
            if !(l > q) {
                fail(
                    &mut verdict,
                    ShapeRegion::Decreasing,
                    beta,
                    format!("L = {l} <= q = {q}"),
                );
                return Ok(verdict);
            }
        }
    }

    // Increasing suffix, including a geometric approach to 1/2.
    let mut suffix = uniform_grid(b2, 0.5, grid_step);
    suffix.retain(|&b| b < 0.5 - 0.5 * grid_step);
    suffix.extend((1..=8).map(|j| 0.5 - grid_step * 10f64.powi(-j)));
    for &beta in &suffix {
        verdict.checked_points += 1;
        let (l, q) = (l_curve(&params, beta)?, pair_q(k, beta)?);
        if !(l < q) {
            fail(
                &mut verdict,
                ShapeRegion::Increasing,
                beta,
                format!("L = {l} >= q = {q}"),
            );
            return Ok(verdict);
        }
    }

    // Gap region.
    let f_half = free_energy_half(&params)?;
    let grid = uniform_grid(b1, b2, grid_step);
    let values = grid
        .iter()
        .map(|&b| free_energy(&params, b))
        .collect::<Result<Vec<_>>>()?;
    verdict.checked_points += grid.len();
    let mut eps_gap = f64::INFINITY;
    let mut budget_used = DERIVATIVE_BUDGET;
    let mut worst_beta = b1;
    for (i, w) in values.windows(2).enumerate() {
        let width = grid[i + 1] - grid[i];
        let slope = (w[1] - w[0]).abs() / width;
        verdict.max_observed_slope = verdict.max_observed_slope.max(slope);
        let budget = if slope > DERIVATIVE_BUDGET {
            verdict.slope_flagged_cells += 1;
            2.0 * slope
        } else {
            DERIVATIVE_BUDGET
        };
        budget_used = budget_used.max(budget);
        let upper = w[0].max(w[1]) + 0.5 * budget * width;
        if f_half - upper < eps_gap {
            eps_gap = f_half - upper;
            worst_beta = grid[i];
        }
    }
    if grid.len() == 1 {
        eps_gap = f_half - values[0];
    }
    verdict.eps_gap = eps_gap;
    verdict.derivative_budget = budget_used;
    if eps_gap > 0.0 {
        verdict.verified = true;
    } else {
        fail(
            &mut verdict,
            ShapeRegion::Gap,
            worst_beta,
            format!("F within {eps_gap} of F(1/2)"),
        );
    }
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regime_boundaries() {
        assert_eq!(Regime::for_bound(4.0), Regime::Middle);
        assert_eq!(Regime::for_bound(4.01), Regime::Large);
        assert_eq!(Regime::for_bound(0.1), Regime::Middle);
        assert_eq!(Regime::for_bound(0.099), Regime::Small);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(verify_shape(0.0, 1e-4).is_err());
        assert!(verify_shape(1.0, 0.0).is_err());
        assert!(verify_shape(1.0, 0.05).is_err());
    }

    #[test]
    fn uniform_grid_includes_end() {
        let g = uniform_grid(0.1, 0.3, 0.07);
        assert_eq!(g.len(), 4);
        assert_eq!(*g.last().unwrap(), 0.3);
        let g = uniform_grid(0.0, 1.0, 0.25);
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }
}
