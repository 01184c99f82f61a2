use sbp_core::analytic::alpha_c;
use sbp_core::experiments::*;
use std::sync::atomic::AtomicBool;

fn render(output: &ExperimentOutput) -> (Vec<u8>, Vec<u8>) {
    let mut csv = Vec::new();
    let mut json = Vec::new();
    output.write_csv(&mut csv).unwrap();
    output.write_json(&mut json).unwrap();
    (csv, json)
}

fn run_with_threads(config: &ExperimentConfig, threads: usize) -> ExperimentOutput {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap();
    pool.install(|| run_experiment(config, None).unwrap())
}

#[test]
fn outputs_are_byte_identical_across_runs_and_threads() {
    for kind in ExperimentKind::ALL {
        let mut config = ExperimentConfig::new(kind, vec![8, 10], 24, 99);
        config.overlap_samples = if kind == ExperimentKind::Capacity {
            4
        } else {
            0
        };
        let first = render(&run_with_threads(&config, 1));
        for threads in [1, 3] {
            assert_eq!(render(&run_with_threads(&config, threads)), first, "{kind}");
        }
        assert!(first
            .0
            .starts_with(b"seed,stream_id,n,m,K,disc,count_at_kc,alpha_star\n"));
        let json: serde_json::Value = serde_json::from_slice(&first.1).unwrap();
        assert_eq!(json["config"]["seed"], 99);
        assert_eq!(json["metadata"]["version"], env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn files_land_in_the_output_directory() {
    let dir = std::env::temp_dir().join(format!("sbp-exp-{}", std::process::id()));
    let config = ExperimentConfig::new(ExperimentKind::Window, vec![8], 10, 3);
    let out = run_experiment(&config, None).unwrap();
    let (csv, json) = out.write_files(&dir).unwrap();
    assert_eq!(csv.file_name().unwrap(), "window.csv");
    assert_eq!(json.file_name().unwrap(), "window.json");
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 11);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn interrupt_returns_partial_results() {
    let flag = AtomicBool::new(true);
    let config = ExperimentConfig::new(ExperimentKind::SuccessAtKc, vec![8, 10], 20, 5);
    let out = run_experiment(&config, Some(&flag)).unwrap();
    assert!(out.interrupted);
    assert!(out.records.is_empty());
}

#[test]
fn experiments_share_instances() {
    let alpha = alpha_c(1.0).unwrap();
    let (records, _) = critical_records(alpha, 12, 300, 17, true, None).unwrap();
    let success = success_from_records(alpha, &records).unwrap();
    let tail = tail_from_records(alpha, &records, &[0.0, 0.05]).unwrap();
    assert_eq!(
        success.per_n[0].success.count,
        tail.cells[0].proportion.count
    );
    let window = run_window(&ExperimentConfig::new(
        ExperimentKind::Window,
        vec![12],
        300,
        17,
    ))
    .unwrap();
    assert_eq!(window.per_n[0].success, success.per_n[0].success);
    for r in &records {
        assert_eq!(r.stream_id, stream_id(12, r.stream_id & 0xffff_ffff));
        let c = r.count_at_kc.unwrap();
        assert_eq!(c > 0, r.disc.unwrap() <= r.k);
    }
}

#[test]
fn window_report_shape() {
    let report = run_window(&ExperimentConfig::new(
        ExperimentKind::Window,
        vec![10, 12, 14],
        200,
        23,
    ))
    .unwrap();
    assert_eq!(report.per_n.len(), 3);
    for s in &report.per_n {
        assert!(s.std > 0.0 && s.spread > 0.0);
        assert!(s.q10 <= s.median && s.median <= s.q90);
        assert!(s.success.ci_low <= s.success.estimate && s.success.estimate <= s.success.ci_high);
    }
    let reg = report.regression.unwrap();
    assert!(reg.ci_low.unwrap() <= reg.slope && reg.slope <= reg.ci_high.unwrap());
}

#[test]
fn tail_cells_are_nested_and_censored_honestly() {
    let alpha = alpha_c(1.0).unwrap();
    let (records, _) = critical_records(alpha, 10, 200, 31, false, None).unwrap();
    let tail = tail_from_records(alpha, &records, &[0.0, 0.02, 0.1, 5.0]).unwrap();
    assert!(tail.monotone_in_y);
    assert!(tail.cells[0].proportion.estimate <= 1.0);
    let deep = &tail.cells[3];
    assert!(deep.censored && deep.log_frequency.is_none());
    assert_eq!(deep.proportion.count, 0);
    assert!(deep.upper_bound > 0.0 && deep.upper_bound < 0.05);
}

#[test]
fn zero_width_annulus_is_empty() {
    let alpha = alpha_c(1.0).unwrap();
    let (records, _) = critical_records(alpha, 10, 100, 37, true, None).unwrap();
    let (report, interrupted) =
        anticoncentration_from_records(alpha, &records, &[0.0, 0.5], None).unwrap();
    assert!(!interrupted);
    let set = &report.per_n[0];
    assert_eq!(set.cells[0].window.count, 0);
    assert_eq!(set.cells[0].mean_xi, 0.0);
    assert!(set.cells[1].mean_xi >= 0.0);
}

#[test]
fn martingale_diagnostics_on_small_cube() {
    let mut config = ExperimentConfig::new(ExperimentKind::Martingale, vec![12], 200, 41);
    config.x = 1.0;
    let report = run_martingale(&config).unwrap();
    let s = &report.per_n[0];
    assert!(s.max_reconstruction_error <= 1e-10);
    assert_eq!(s.nested.count, 200);
    assert_eq!(s.alpha_star_monotone.count, 200);
    assert!(s.assessed_steps > 0);
    assert!(s
        .steps
        .iter()
        .filter(|st| st.assessed)
        .all(|st| st.alive >= MIN_ALIVE));
}

#[test]
fn invalid_configurations_are_rejected() {
    let mut config = ExperimentConfig::new(ExperimentKind::Capacity, vec![8], 4, 1);
    config.k = None;
    assert!(run_experiment(&config, None).is_err());
    config.alpha = Some(1.5);
    assert!(run_experiment(&config, None).is_ok());
    config.n_list = vec![40];
    assert!(run_experiment(&config, None).is_err());
}
