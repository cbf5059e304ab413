use num_complex::Complex64;

use isac_lab::experiments::presets;
use isac_lab::fisher::oracle::{numerical_fim, path_mean, three_tone_spectrum};
use isac_lab::fisher::{chain_to_state, per_path_fim, Parameterization, WeightForm};
use isac_lab::geometry::{delay_jacobian, path_geometries, NetworkLayout, TargetState};
use isac_lab::linalg::{Matrix, Vec2};
use isac_lab::schedule::{HopPattern, HopSchedule};
use isac_lab::waveform::WaveformSpec;

#[test]
fn network_fim_from_joint_finite_differences() {
    // Two paths sharing v but with their own delays and gains: the joint FD
    // FIM is block-diagonal across paths apart from the shared velocity, and
    // eliminating the gains reproduces the assembled network FIM.
    let sc = presets::desk().build().unwrap();
    let c = sc.layout.c();
    let geoms = sc.geometries().unwrap();
    let wf = WaveformSpec::new(Complex64::from_polar(1.0, 0.4), 1.0, 5e4, 1.0).unwrap();
    let sched = &sc.schedules[0];
    let spectrum = three_tone_spectrum(wf.beta);
    let (a, b) = (geoms[0], geoms[4]);
    // η = (τ_a, τ_b, v_x, v_y, Re α_a, Im α_a, Re α_b, Im α_b)
    let eta = [
        a.tau,
        b.tau,
        20.0,
        15.0,
        wf.alpha.re,
        wf.alpha.im,
        wf.alpha.re,
        wf.alpha.im,
    ];
    let mu = |e: &[f64]| {
        let mut m = path_mean(sched, &spectrum, a.g, 1.0, c, &[e[0], e[2], e[3], e[4], e[5]]);
        m.extend(path_mean(
            sched,
            &spectrum,
            b.g,
            1.0,
            c,
            &[e[1], e[2], e[3], e[6], e[7]],
        ));
        m
    };
    let steps = [1e-9, 1e-9, 1.0, 1.0, 1e-3, 1e-3, 1e-3, 1e-3];
    let j = numerical_fim(mu, &eta, wf.sigma_w2, &steps).unwrap();
    // no information couples path a's (τ, α) with path b's (τ, α)
    for (ia, ib) in [(0, 1), (0, 6), (0, 7), (4, 1), (5, 6), (4, 7)] {
        let scale = (j[(ia, ia)] * j[(ib, ib)]).sqrt();
        assert!(j[(ia, ib)].abs() < 1e-9 * scale, "({ia},{ib})");
    }
    // analytic per-path blocks add up in the shared velocity block
    let fa = per_path_fim(&sched.moments(false), &a, &wf, c, Parameterization::Centered).unwrap();
    let fb = per_path_fim(&sched.moments(false), &b, &wf, c, Parameterization::Centered).unwrap();
    for r in 0..2 {
        for s in 0..2 {
            let want = fa.full[(1 + r, 1 + s)] + fb.full[(1 + r, 1 + s)];
            assert!((j[(2 + r, 2 + s)] - want).abs() < 1e-6 * want.abs().max(j[(2, 2)]));
        }
    }
}

#[test]
fn closed_form_state_fim_matches_explicit_chain_rule() {
    for form in [WeightForm::Exact, WeightForm::Literal] {
        let sc = presets::full_scale(presets::multistatic_3x3()).build().unwrap();
        let nf = sc.network_fim(form).unwrap();
        let dj = delay_jacobian(&sc.layout, &sc.target).unwrap();
        let chained = chain_to_state(&nf.eta_fim, &dj).unwrap();
        assert!(chained.scaled_relative_error(&nf.state_fim) < 1e-12);
    }
}

#[test]
fn monostatic_equals_multistatic_with_shared_nodes() {
    let nodes = vec![
        Vec2::new(1000.0, 0.0),
        Vec2::new(-500.0, 866.0),
        Vec2::new(-500.0, -866.0),
    ];
    let c = 299_792_458.0;
    let mono = NetworkLayout::monostatic(nodes.clone(), c).unwrap();
    let t = TargetState::new(Vec2::new(300.0, 200.0), Vec2::new(20.0, 15.0));
    let multi = NetworkLayout::multistatic(nodes.clone(), nodes, c).unwrap();
    let gm = path_geometries(&mono, &t).unwrap();
    let gx = path_geometries(&multi, &t).unwrap();
    for (k, g) in gm.iter().enumerate() {
        assert_eq!(*g, gx[k * 3 + k]);
    }
}

#[test]
fn literal_weights_give_an_indefinite_fim_for_linear_hops() {
    let mut cfg = presets::full_scale(presets::monostatic_ring(5));
    cfg.schedule.pattern = HopPattern::Linear;
    let sc = cfg.build().unwrap();
    let min_eig = |m: &Matrix<f64>| {
        let n = nalgebra::Matrix4::from_fn(|i, j| m[(i, j)]);
        let s = nalgebra::Matrix4::from_diagonal(&n.diagonal().map(|d| 1.0 / d.sqrt()));
        (s * n * s).symmetric_eigenvalues().min()
    };
    assert!(min_eig(&sc.network_fim(WeightForm::Literal).unwrap().state_fim) < 0.0);
    assert!(min_eig(&sc.network_fim(WeightForm::Exact).unwrap().state_fim) > 0.0);
}

#[test]
fn palindromic_hops_have_no_delay_velocity_coupling() {
    let s = HopSchedule::<f64>::new(&HopPattern::Palindromic, 12, 1e-3, 28e9, 2e9)
        .unwrap()
        .center()
        .0;
    let m = s.moments(false);
    assert!(m.cov_f_z.abs() < 1e-9 * (m.var_f * m.var_z).sqrt());
    let sc = presets::full_scale(presets::multistatic_3x3()).build().unwrap();
    let b = sc.crlb(WeightForm::Exact).unwrap();
    assert!((b.pos_block - b.pos_uncoupled).frobenius() < 1e-9 * b.pos_block.frobenius());
}
