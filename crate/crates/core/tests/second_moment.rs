mod common;

use common::{p_oracle, q_oracle_1d};
use sbp_core::analytic::{alpha_c, k_c, ModelParams};
use sbp_core::second_moment::*;

/// `E|Z|^2 / (E|Z|)^2` summed over all ordered pairs of sign vectors.
fn brute_force_ratio(k: f64, n: usize, m: usize) -> f64 {
    let p = p_oracle(k);
    let mut by_distance = vec![0.0; n + 1];
    for (d, slot) in by_distance.iter_mut().enumerate() {
        let beta = d as f64 / n as f64;
        let q = if d == 0 || d == n {
            p
        } else {
            q_oracle_1d(k, 2.0 * beta - 1.0)
        };
        *slot = (q / (p * p)).powi(m as i32);
    }
    let cube = 1u32 << n;
    let mut total = 0.0;
    for a in 0..cube {
        for b in 0..cube {
            total += by_distance[(a ^ b).count_ones() as usize];
        }
    }
    total / (cube as f64 * cube as f64)
}

#[test]
fn matches_pairwise_enumeration() {
    for (k, n, m) in [
        (1.0, 6usize, 4usize),
        (0.5, 7, 2),
        (2.0, 8, 12),
        (1.0, 5, 9),
    ] {
        let params = ModelParams::from_rows(k, n, m).unwrap();
        let got = ratio_exact(&params, 0.1).unwrap();
        let want = brute_force_ratio(k, n, m);
        assert!(
            ((got.total - want) / want).abs() < 1e-10,
            "K={k} n={n} m={m}: {} vs {want}",
            got.total
        );
        let parts = got.i1 + got.i2 + got.i3;
        assert!(((parts - got.total) / got.total).abs() < 1e-12);
    }
}

#[test]
fn empty_row_set_gives_one() {
    for n in [1usize, 10, 101, 1000] {
        let params = ModelParams::from_rows(1.0, n, 0).unwrap();
        assert_eq!(ratio_exact(&params, 0.05).unwrap().total, 1.0);
    }
}

#[test]
fn endpoint_summands_are_one_at_criticality() {
    for n in [100usize, 400, 1600] {
        let params = ModelParams::critical_rows(alpha_c(1.0).unwrap(), n).unwrap();
        let r = ratio_exact(&params, 0.05).unwrap();
        assert!((r.endpoint_plus - 1.0).abs() < 1e-9);
        assert!((r.endpoint_minus - 1.0).abs() < 1e-9);
    }
}

#[test]
fn monotone_in_row_count() {
    let k = 1.0;
    let n = 500;
    let limit = (alpha_c(k).unwrap() * n as f64).round() as usize;
    let m_list: Vec<usize> = (0..=limit).collect();
    let totals = ratio_monotone_in_alpha(k, n, &m_list).unwrap();
    assert_eq!(totals[0], 1.0);
    assert!(totals[1] > 1.0);
    assert!(totals.windows(2).all(|w| w[1] >= w[0]));
    for n in [2usize, 3, 10] {
        assert!(ratio_monotone_in_alpha(k, n, &[0, 1]).unwrap()[1] > 1.0);
    }
    assert!(ratio_monotone_in_alpha(k, n, &[limit + 1]).is_err());
}

#[test]
fn summation_order_does_not_matter() {
    let params = ModelParams::critical_rows(alpha_c(1.0).unwrap(), 800).unwrap();
    let terms = ratio_terms(&params).unwrap();
    let mut logs: Vec<f64> = terms.iter().map(|t| t.log_summand(params.m)).collect();
    let forward: f64 = logs.iter().map(|v| v.exp()).sum();
    logs.reverse();
    let backward: f64 = logs.iter().map(|v| v.exp()).sum();
    logs.sort_by(f64::total_cmp);
    let ascending: f64 = logs.iter().map(|v| v.exp()).sum();
    let total = ratio_exact(&params, 0.05).unwrap().total;
    for v in [forward, backward, ascending] {
        assert!(((v - total) / total).abs() < 1e-12);
    }
}

#[test]
fn critical_ratio_is_bounded_and_settles() {
    let alpha = alpha_c(1.0).unwrap();
    let mut totals = Vec::new();
    let mut edges = Vec::new();
    let mut bulk_rates = Vec::new();
    for n in [100usize, 200, 400, 800, 1600, 3200] {
        let params = ModelParams::critical_rows(alpha, n).unwrap();
        let r = ratio_exact(&params, 0.2).unwrap();
        assert!(r.total <= 10.0);
        totals.push(r.total);
        edges.push(r.i3);
        bulk_rates.push(r.log_i2 / n as f64);
    }
    let steps: Vec<f64> = totals.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    assert!(steps.windows(2).all(|w| w[1] < w[0]), "totals {totals:?}");
    assert!(bulk_rates.iter().all(|&r| r < 0.0), "rates {bulk_rates:?}");
    let (a, b) = (bulk_rates[4], bulk_rates[5]);
    assert!(((b - a) / a).abs() < 0.1);
    // The two endpoint summands dominate the edge region.
    let excess: Vec<f64> = edges.iter().map(|e| e - 2.0).collect();
    assert!(excess.iter().all(|&e| e >= -1e-9), "edge excess {excess:?}");
    assert!(
        excess.windows(2).all(|w| w[1] <= w[0]),
        "edge excess {excess:?}"
    );
    assert!(excess[5] < 1e-3);
}

#[test]
fn central_part_approaches_gaussian_limit() {
    let alpha = alpha_c(1.0).unwrap();
    let params = ModelParams::critical_rows(alpha, 100_000).unwrap();
    let r = ratio_exact(&params, 0.05).unwrap();
    assert!(r.series_terms > 0);
    let limit = r.gaussian_limit.unwrap();
    assert!(
        ((r.i1 - limit) / limit).abs() < 5e-3,
        "I1 = {}, limit = {limit}",
        r.i1
    );
}

#[test]
fn rejects_out_of_range_delta() {
    let params = ModelParams::from_rows(1.0, 10, 3).unwrap();
    assert!(ratio_exact(&params, 0.25).is_err());
    assert!(ratio_exact(&params, -0.1).is_err());
}

#[test]
fn endpoint_gap_decays_like_inverse_root() {
    let n_list = [100usize, 1_000, 10_000, 100_000, 1_000_000];
    for k in [0.5, 1.0, 2.0] {
        let d = q_endpoint_decay(k, &n_list).unwrap();
        assert!(d.points.iter().all(|pt| pt.gap > 0.0));
        assert!(
            d.fit.slope >= -0.6 && d.fit.slope <= -0.4,
            "K = {k}: slope {}",
            d.fit.slope
        );
        assert!(d.constant > 0.0);
        // gap ~ sqrt(2/pi) * 2 phi(K) / p / sqrt(n) to leading order, a positive multiple of e^{-K^2/2}.
        assert!(
            d.constant > 0.1 * (-0.5 * k * k).exp(),
            "K = {k}: c = {}",
            d.constant
        );
    }
    assert!(q_endpoint_decay(1.0, &[5]).is_err());
    let kc = k_c(1.8).unwrap();
    assert!(q_endpoint_decay(kc, &[10, 20]).is_ok());
}
