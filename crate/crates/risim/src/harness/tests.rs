use super::*;
use crate::scenario::Scenario;

fn tiny_scenario() -> Scenario {
    let mut s = Scenario::default();
    s.geometry.tx_count = 2;
    s.geometry.ris_count = 4;
    s.geometry.ris_spacing = 0.125;
    s.scatterer.clusters = 1;
    s.scatterer.per_cluster = 3;
    s.run.realizations = 2;
    s.run.epsilon = 1e-3;
    s.run.max_outer = 40;
    s
}

#[test]
fn run_is_deterministic_for_a_fixed_seed() {
    let s = tiny_scenario();
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let sum_a = run_experiment(&s, Some(dir_a.path())).unwrap();
    let sum_b = run_experiment(&s, Some(dir_b.path())).unwrap();
    assert_eq!(sum_a.failed_count, 0);
    assert_eq!(sum_a.mean_rate, sum_b.mean_rate);
    for file in ["trace.csv", "rate_vs_iter.csv"] {
        let a = std::fs::read(dir_a.path().join(file)).unwrap();
        let b = std::fs::read(dir_b.path().join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
}

#[test]
fn different_seeds_change_the_outcome() {
    let s = tiny_scenario();
    let mut s2 = s.clone();
    s2.run.seed = 99;
    let a = run_experiment(&s, None).unwrap();
    let b = run_experiment(&s2, None).unwrap();
    assert_ne!(a.mean_rate, b.mean_rate);
}

#[test]
fn summary_aggregates_are_recomputable_from_the_trace() {
    let s = tiny_scenario();
    let dir = tempfile::tempdir().unwrap();
    let summary = run_experiment(&s, Some(dir.path())).unwrap();

    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut finals: std::collections::BTreeMap<usize, f64> = Default::default();
    for line in trace.lines().skip(1) {
        let mut parts = line.split(',');
        let realization: usize = parts.next().unwrap().parse().unwrap();
        let _iter: usize = parts.next().unwrap().parse().unwrap();
        let rate: f64 = parts.next().unwrap().parse().unwrap();
        finals.insert(realization, rate); // rows are ordered; the last wins
    }
    let recomputed: f64 = finals.values().sum::<f64>() / finals.len() as f64;
    assert!(
        (recomputed - summary.mean_rate).abs() <= 1e-12 * summary.mean_rate.abs(),
        "recomputed {recomputed} vs summary {}",
        summary.mean_rate
    );

    let text = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(text.contains("\"mean_rate_bps_hz\""));
    assert!(text.contains(&format!("{}", summary.mean_rate)));
}

#[test]
fn failed_realizations_set_the_exit_code() {
    let mut s = tiny_scenario();
    s.geometry.bundle = Some(std::path::PathBuf::from("/nonexistent/bundle.zb"));
    let summary = run_experiment(&s, None).unwrap();
    assert_eq!(summary.failed_count, s.run.realizations);
    assert_eq!(summary.exit_code(), 1);
    assert_eq!(tiny_scenario_exit_code(), 0);
}

fn tiny_scenario_exit_code() -> i32 {
    run_experiment(&tiny_scenario(), None).unwrap().exit_code()
}

#[test]
fn coupling_aware_warm_start_never_loses_rate() {
    let mut s = tiny_scenario();
    s.geometry.ris_count = 6;
    s.run.realizations = 3;
    let rows = compare_coupling(&s).unwrap();
    assert_eq!(rows.len(), 3);
    for row in rows {
        assert!(
            row.mca_rate >= row.mcu_rate - 1e-10,
            "realization {}: MCA {} < MCU {}",
            row.realization,
            row.mca_rate,
            row.mcu_rate
        );
    }
}

#[test]
fn mcu_mode_runs_and_reports_true_network_rates() {
    let mut s = tiny_scenario();
    s.run.coupling = crate::scenario::CouplingMode::Mcu;
    let summary = run_experiment(&s, None).unwrap();
    assert_eq!(summary.failed_count, 0);
    assert!(summary.mean_rate > 0.0);
}

#[test]
fn spacing_sweep_emits_one_row_per_point() {
    let mut s = tiny_scenario();
    s.run.realizations = 1;
    let table = sweep_spacing(&s, &[0.5, 0.25, 0.125, 0.0625], ApertureMode::FixedCount).unwrap();
    assert_eq!(table.rows.len(), 4);
    for row in &table.rows {
        assert_eq!(row.n_ris, s.geometry.ris_count);
        assert!(row.mean_rate > 0.0);
    }
    let csv = table.to_csv();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("d_over_lambda,"));

    let single = sweep_spacing(&s, &[0.125], ApertureMode::FixedCount).unwrap();
    assert_eq!(single.rows.len(), 1);
}

#[test]
fn fixed_aperture_scales_the_element_count() {
    let mut s = tiny_scenario();
    s.run.realizations = 1;
    s.run.ris_cap = 16;
    // Reference aperture: 4 elements at lambda/8 -> 0.5 lambda.
    let table = sweep_spacing(&s, &[0.25, 0.125, 0.0625], ApertureMode::FixedAperture).unwrap();
    let counts: Vec<usize> = table.rows.iter().map(|r| r.n_ris).collect();
    assert_eq!(counts, vec![2, 4, 8]);

    let err = sweep_spacing(&s, &[0.01], ApertureMode::FixedAperture).unwrap_err();
    assert!(matches!(err, Error::Unsupported(_)));
}

#[test]
fn fixed_count_rate_is_stable_between_wide_and_tight_spacing() {
    // Desk-scale restatement of the "same rate at d = lambda/2 and lambda/16"
    // observation; the 15% envelope was calibrated on these seeds.
    let mut s = tiny_scenario();
    s.geometry.ris_count = 8;
    s.run.realizations = 3;
    s.run.epsilon = 1e-4;
    s.run.max_outer = 60;
    let table = sweep_spacing(&s, &[0.5, 1.0 / 16.0], ApertureMode::FixedCount).unwrap();
    let wide = table.rows[0].mean_rate;
    let tight = table.rows[1].mean_rate;
    let rel = (wide - tight).abs() / wide.max(tight);
    assert!(
        rel < 0.15,
        "fixed-count rates diverged: d=1/2 -> {wide}, d=1/16 -> {tight} (rel {rel:.3})"
    );
}

#[test]
fn flipped_ris_transmitter_block_breaks_the_consistency_check() {
    let mut rng = rand::SeedableRng::seed_from_u64(77);
    let net = synth::random_reduced_network(&mut rng, 2, 2, 4);
    let loads = synth::random_loads(&mut rng, 4, (-302.5, -19.66), 0.2);
    assert!(channel_consistency_error(&net, &loads) < 1e-10);

    // Fixture fault: sign-flip Z_SOT in the copy that feeds the decoupled
    // route, keep the direct route on the true network.
    let mut tampered = net.clone();
    tampered.z_sot = -tampered.z_sot;
    let h_true = end_to_end_channel(&net, &loads.impedances()).unwrap();
    let d = decouple_element(&tampered, &loads, 0).unwrap();
    let chi = num_complex::Complex64::new(1.0, 0.0) + d.a_k * loads.impedance(0);
    let rec = &d.b + (&d.u * d.v.adjoint()).map(|v| v / chi);
    let rel = linalg::rel_frobenius(&rec, &h_true);
    assert!(
        rel > 1e-3,
        "sign flip in Z_SOT should break the reconstruction, rel {rel:.3e}"
    );
}

#[test]
fn quick_verification_corpus_is_clean() {
    for check in verify(VerifyLevel::Quick) {
        assert!(
            check.passed,
            "check {} breached: {} > {} (worst case {})",
            check.name,
            check.report.max_relative_error,
            check.tolerance,
            check.report.worst_case_id
        );
    }
}

#[test]
fn exported_bundle_reproduces_the_network() {
    let mut s = tiny_scenario();
    s.run.realizations = 1;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scene.zbundle");
    export_impedances(&s, &path).unwrap();

    let direct = realize_network(&s, 0).unwrap();
    let mut via_bundle = s.clone();
    via_bundle.geometry.bundle = Some(path);
    let loaded = realize_network(&via_bundle, 0).unwrap();
    assert!(linalg::rel_frobenius(&loaded.z_rot, &direct.z_rot) < 1e-15);
    assert!(linalg::rel_frobenius(&loaded.z_ss, &direct.z_ss) < 1e-15);
    assert!(linalg::rel_frobenius(&loaded.z_sot, &direct.z_sot) < 1e-15);
}
