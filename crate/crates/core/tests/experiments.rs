use std::path::PathBuf;

use isac_lab::cli::load_config;
use isac_lab::experiments::{
    self, presets, CrlbSweepConfig, EstimatorKind, HeatmapConfig, LayoutConfig, MseConfig, NamedLayout, SweepAxis,
};
use isac_lab::fisher::WeightForm;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn shipped_configs_match_presets() {
    let full = load_config(&configs().join("full_scale.toml")).unwrap();
    assert_eq!(full.scenario, presets::full_scale(presets::multistatic_3x3()));
    let desk = load_config(&configs().join("desk.toml")).unwrap();
    assert_eq!(desk.scenario, presets::desk());
    let mc = load_config(&configs().join("scaled_mc.toml")).unwrap();
    let mut want = presets::scaled_mc();
    want.waveform.snr_db = 30.0;
    assert_eq!(mc.scenario, want);
    let mse = mc.experiment.mse_vs_snr.unwrap();
    assert_eq!(mse.search, presets::scaled_mc_search());
    assert_eq!(mse.gn, presets::scaled_mc_gn());
    let hm = load_config(&configs().join("heatmap.toml")).unwrap();
    let mut want = presets::full_scale(presets::monostatic_ring(5));
    want.waveform.snr_db = 10.0;
    assert_eq!(hm.scenario, want);
}

#[test]
fn doubling_snr_halves_every_bound() {
    let sweep = CrlbSweepConfig {
        axis: SweepAxis::Joint,
        spans: vec![2e8, 1e9, 2e9],
        pulses: vec![8, 16],
        layouts: vec![],
    };
    let mut lo = presets::full_scale(presets::monostatic_ring(5));
    lo.waveform.amplitude = 1.0;
    let mut hi = lo.clone();
    hi.waveform.amplitude = 2f64.sqrt();
    hi.waveform.snr_db += 10.0 * 2f64.log10();
    // same |α| scaling in the SNR keeps σ² fixed
    let a = experiments::crlb_sweep(&lo, &sweep, WeightForm::Exact, 0).unwrap();
    let b = experiments::crlb_sweep(&hi, &sweep, WeightForm::Exact, 0).unwrap();
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        let (pa, pb) = (ra.crlb_pos.unwrap(), rb.crlb_pos.unwrap());
        let (va, vb) = (ra.crlb_vel.unwrap(), rb.crlb_vel.unwrap());
        assert!((pb / pa - 0.5).abs() < 1e-12, "{pa} {pb}");
        assert!((vb / va - 0.5).abs() < 1e-12, "{va} {vb}");
    }
}

#[test]
fn more_pulses_help_velocity_more_than_position() {
    let sweep = CrlbSweepConfig {
        axis: SweepAxis::Pulses,
        spans: vec![],
        pulses: vec![4, 64],
        layouts: vec![],
    };
    for layout in [presets::multistatic_3x3(), presets::monostatic_ring(5)] {
        let t = experiments::crlb_sweep(&presets::full_scale(layout), &sweep, WeightForm::Exact, 0).unwrap();
        let (r4, r64) = (&t.rows[0], &t.rows[1]);
        let pos_gain = r4.crlb_pos.unwrap() / r64.crlb_pos.unwrap();
        let vel_gain = r4.crlb_vel.unwrap() / r64.crlb_vel.unwrap();
        assert!(vel_gain > pos_gain, "pos x{pos_gain}, vel x{vel_gain}");
    }
}

#[test]
fn empty_sweep_axis_is_rejected() {
    let sweep = CrlbSweepConfig {
        axis: SweepAxis::Span,
        spans: vec![],
        pulses: vec![],
        layouts: vec![],
    };
    assert!(experiments::crlb_sweep(&presets::desk(), &sweep, WeightForm::Exact, 0).is_err());
}

fn ring_heatmap(phase_deg: f64, threshold: f64) -> f64 {
    let hm = HeatmapConfig {
        extent: 2000.0,
        points: 21,
        threshold,
        layouts: vec![NamedLayout {
            name: "ring".into(),
            layout: LayoutConfig::Ring {
                count: 4,
                radius: 1000.0,
                phase_deg,
            },
        }],
    };
    let mut sc = presets::full_scale(presets::monostatic_ring(4));
    sc.waveform.snr_db = 10.0;
    let (_, cov) = experiments::heatmap(&sc, &hm, WeightForm::Exact, 0).unwrap();
    cov[0].fraction
}

#[test]
fn coverage_is_unchanged_by_quarter_turn() {
    // a quarter turn maps the symmetric grid onto itself
    let a = ring_heatmap(10.0, 2e-5);
    let b = ring_heatmap(100.0, 2e-5);
    assert!((a - b).abs() <= 1e-9, "{a} {b}");
    assert!(a > 0.0 && a < 1.0);
}

#[test]
fn zero_threshold_covers_nothing() {
    assert_eq!(ring_heatmap(10.0, 0.0), 0.0);
}

#[test]
fn points_on_nodes_are_skipped() {
    let hm = HeatmapConfig {
        extent: 1000.0,
        points: 3,
        threshold: 1.0,
        layouts: vec![],
    };
    // ring node 0 sits at (1000, 0), a grid point
    let (table, cov) = experiments::heatmap(
        &presets::full_scale(presets::monostatic_ring(3)),
        &hm,
        WeightForm::Exact,
        0,
    )
    .unwrap();
    assert_eq!(cov[0].skipped, 1);
    assert_eq!(cov[0].evaluated, 8);
    let node = table.rows.iter().find(|r| r.sweep[3] == "node").unwrap();
    assert_eq!((node.sweep[1].as_str(), node.sweep[2].as_str()), ("1000", "0"));
    assert!(node.crlb_pos.is_none());
}

#[test]
fn monte_carlo_crlb_columns_do_not_depend_on_trials() {
    let mut sc = presets::scaled_mc();
    sc.waveform.snr_db = 20.0;
    let mse = MseConfig {
        snr_db: vec![20.0],
        estimators: vec![EstimatorKind::Tsif],
        gn: presets::scaled_mc_gn(),
        ..MseConfig::default()
    };
    let a = experiments::mse_vs_snr(&sc, &mse, 2, 3, WeightForm::Exact).unwrap();
    let b = experiments::mse_vs_snr(&sc, &mse, 5, 3, WeightForm::Exact).unwrap();
    assert_eq!(a.rows[0].crlb_pos, b.rows[0].crlb_pos);
    assert_eq!(a.rows[0].crlb_vel, b.rows[0].crlb_vel);
    assert_eq!(a.rows[0].trials, 2);
    let csv = a.to_csv_string().unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "experiment,estimator,snr_db,mse_pos,mse_vel,crlb_pos,crlb_vel,outage_rate,trials,seed"
    );
    assert!(csv.lines().nth(1).unwrap().starts_with("mse_vs_snr,tsif,20,"));
}

#[test]
fn zero_trials_is_rejected() {
    let mse = MseConfig::default();
    assert!(experiments::mse_vs_snr(&presets::scaled_mc(), &mse, 0, 1, WeightForm::Exact).is_err());
}

#[test]
fn fim_check_reports_every_path() {
    let report = experiments::fim_check(&presets::desk()).unwrap();
    assert_eq!(report.paths.len(), 9);
    assert!(report.max_error() < 1e-3);
    assert!(report.max_scaled_error() < 1e-3);
    assert!(report.paths.iter().all(|p| p.centering_map < 1e-9));
}
