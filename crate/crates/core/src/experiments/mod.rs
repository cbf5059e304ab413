//! Seeded experiment runners: CRLB sweeps, coverage heatmaps, Monte Carlo
//! MSE against SNR, data-averaged bounds and the finite-difference check.
//!
//! Work items run on the current rayon pool and are collected in index
//! order; every random draw comes from `stream_rng(seed, point, item)`, so
//! tables do not depend on the thread count.

pub mod config;
pub mod table;

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

pub use config::*;
pub use table::{ResultRow, ResultTable};

use crate::error::{Error, Result};
use crate::estimators::{mle_estimate, tsif_estimate, MleProblem, SearchBox, StateEstimate};
use crate::fisher::oracle::{numerical_fim, path_mean, three_tone_spectrum};
use crate::fisher::{centering_jacobian, data_averaged_crlb, per_path_fim, CrlbResult, Parameterization, WeightForm};
use crate::geometry::{path_geometries, TargetState};
use crate::linalg::{Matrix, Vec2};
use crate::rng::stream_rng;
use crate::scenario::Scenario;
use crate::signal::synthesize;
use crate::waveform::WaveformSpec;

fn num(x: f64) -> String {
    x.to_string()
}

fn layouts_or_default(named: &[NamedLayout], scenario: &ScenarioConfig) -> Vec<NamedLayout> {
    if named.is_empty() {
        vec![NamedLayout {
            name: "scenario".into(),
            layout: scenario.layout.clone(),
        }]
    } else {
        named.to_vec()
    }
}

/// `Ok(None)` when the state FIM is too ill-conditioned to invert.
fn bound_or_flag(result: Result<CrlbResult<f64>>) -> Result<Option<CrlbResult<f64>>> {
    match result {
        Ok(b) => Ok(Some(b)),
        Err(Error::SingularGeometry { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// CRLB traces over synthesized span and/or pulse count for every layout.
/// Sweep columns: `layout, span_hz, pulses, status`, where `status` is
/// `singular` for rows whose bound could not be formed.
pub fn crlb_sweep(
    scenario: &ScenarioConfig,
    sweep: &CrlbSweepConfig,
    form: WeightForm,
    seed: u64,
) -> Result<ResultTable> {
    let spans = match sweep.axis {
        SweepAxis::Pulses => vec![scenario.schedule.span],
        _ => sweep.spans.clone(),
    };
    let pulses = match sweep.axis {
        SweepAxis::Span => vec![scenario.schedule.pulses],
        _ => sweep.pulses.clone(),
    };
    if spans.is_empty() || pulses.is_empty() {
        return Err(Error::InvalidParameter("crlb sweep axes must be nonempty".into()));
    }
    let mut points = Vec::new();
    for nl in layouts_or_default(&sweep.layouts, scenario) {
        for &p in &pulses {
            for &s in &spans {
                points.push((nl.clone(), s, p));
            }
        }
    }
    let rows: Vec<ResultRow> = points
        .par_iter()
        .map(|(nl, span, pulses)| {
            let start = Instant::now();
            let mut cfg = scenario.with_layout(&nl.layout);
            cfg.schedule.span = *span;
            cfg.schedule.pulses = *pulses;
            let bound = bound_or_flag(cfg.build().and_then(|sc| sc.crlb(form)))?;
            let status = if bound.is_some() { "ok" } else { "singular" };
            let mut row = ResultRow::new(
                "crlb_sweep",
                "crlb",
                vec![nl.name.clone(), num(*span), pulses.to_string(), status.into()],
                0,
                seed,
            );
            row.crlb_pos = bound.as_ref().map(|b| b.pos_trace);
            row.crlb_vel = bound.as_ref().map(|b| b.vel_trace);
            row.wall_time = start.elapsed().as_secs_f64();
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut table = ResultTable::new(&["layout", "span_hz", "pulses", "status"]);
    for r in rows {
        table.push(r)?;
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coverage {
    pub layout: String,
    pub threshold: f64,
    /// Share of evaluated points with position trace below the threshold.
    pub fraction: f64,
    pub evaluated: usize,
    /// Points coincident with a node.
    pub skipped: usize,
}

impl Coverage {
    pub fn write_csv_file(items: &[Coverage], path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        w.write_record(["layout", "threshold", "coverage", "evaluated", "skipped"])?;
        for c in items {
            w.write_record([
                c.layout.clone(),
                num(c.threshold),
                num(c.fraction),
                c.evaluated.to_string(),
                c.skipped.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

pub fn grid_axis(extent: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| -extent + 2.0 * extent * i as f64 / (points - 1) as f64)
        .collect()
}

/// Position CRLB trace over a square grid for every layout. Sweep columns:
/// `layout, x, y, status` with status `ok`, `singular` or `node` (point on a
/// node, not evaluated).
pub fn heatmap(
    scenario: &ScenarioConfig,
    hm: &HeatmapConfig,
    form: WeightForm,
    seed: u64,
) -> Result<(ResultTable, Vec<Coverage>)> {
    if hm.points < 2 {
        return Err(Error::InvalidParameter(
            "heatmap needs at least 2 points per axis".into(),
        ));
    }
    if !(hm.extent > 0.0) || hm.threshold < 0.0 {
        return Err(Error::InvalidParameter(
            "heatmap extent must be positive and threshold nonnegative".into(),
        ));
    }
    let axis = grid_axis(hm.extent, hm.points);
    let mut table = ResultTable::new(&["layout", "x", "y", "status"]);
    let mut coverage = Vec::new();
    for nl in layouts_or_default(&hm.layouts, scenario) {
        let base = scenario.with_layout(&nl.layout).build()?;
        let cells: Vec<(f64, f64)> = axis.iter().flat_map(|&y| axis.iter().map(move |&x| (x, y))).collect();
        let rows: Vec<(ResultRow, Option<bool>)> = cells
            .par_iter()
            .map(|&(x, y)| {
                let target = TargetState::new(Vec2::new(x, y), base.target.velocity);
                let sc = base.with_target(target);
                let (status, bound) = match sc.crlb(form) {
                    Ok(b) => ("ok", Some(b)),
                    Err(Error::SingularGeometry { .. }) => ("singular", None),
                    Err(Error::DegenerateGeometry { .. }) => ("node", None),
                    Err(e) => return Err(e),
                };
                let mut row = ResultRow::new(
                    "heatmap",
                    "crlb",
                    vec![nl.name.clone(), num(x), num(y), status.into()],
                    0,
                    seed,
                );
                row.crlb_pos = bound.as_ref().map(|b| b.pos_trace);
                row.crlb_vel = bound.as_ref().map(|b| b.vel_trace);
                let covered = match status {
                    "node" => None,
                    _ => Some(bound.is_some_and(|b| b.pos_trace < hm.threshold)),
                };
                Ok((row, covered))
            })
            .collect::<Result<_>>()?;
        let evaluated = rows.iter().filter(|(_, c)| c.is_some()).count();
        let below = rows.iter().filter(|(_, c)| *c == Some(true)).count();
        coverage.push(Coverage {
            layout: nl.name.clone(),
            threshold: hm.threshold,
            fraction: if evaluated == 0 {
                0.0
            } else {
                below as f64 / evaluated as f64
            },
            evaluated,
            skipped: rows.len() - evaluated,
        });
        for (r, _) in rows {
            table.push(r)?;
        }
    }
    Ok((table, coverage))
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct TrialOutcome {
    /// Squared position and velocity errors, `None` on failure.
    mle: Option<(f64, f64)>,
    tsif: Option<(f64, f64)>,
    tsif_outages: usize,
}

fn squared_errors(e: &StateEstimate, truth: &TargetState<f64>) -> (f64, f64) {
    (
        (e.x_hat - truth.position).norm_squared(),
        (e.v_hat - truth.velocity).norm_squared(),
    )
}

fn run_trial(
    scenario: &ScenarioConfig,
    sc: &Scenario<f64>,
    mse: &MseConfig,
    prior: &TargetState<f64>,
    seed: u64,
    point: u32,
    trial: u32,
) -> Result<TrialOutcome> {
    let mut rng = stream_rng(seed, point, trial);
    let waveforms = (0..sc.path_count())
        .map(|_| scenario.waveform.build(rng.random_range(0.0..std::f64::consts::TAU)))
        .collect::<Result<Vec<_>>>()?;
    let obs = synthesize(&sc.layout, &sc.target, &sc.schedules, &waveforms, &mut rng)?;
    let l = sc.path_count();
    let mut out = TrialOutcome {
        mle: None,
        tsif: None,
        tsif_outages: 0,
    };
    if mse.estimators.contains(&EstimatorKind::Mle) {
        let problem = MleProblem::new(&sc.layout, &sc.schedules, &obs)?;
        let bx = SearchBox::around(prior, &mse.search)?;
        out.mle = mle_estimate(&problem, &bx).ok().map(|e| squared_errors(&e, &sc.target));
    }
    if mse.estimators.contains(&EstimatorKind::Tsif) {
        match tsif_estimate(
            &obs,
            &sc.schedules,
            &waveforms,
            &sc.layout,
            prior,
            &mse.stage_a,
            &mse.gn,
        ) {
            Ok(t) => {
                out.tsif_outages = t.outages;
                out.tsif = t.estimate.map(|e| squared_errors(&e, &sc.target));
            }
            Err(_) => out.tsif_outages = l,
        }
    }
    Ok(out)
}

fn mean_pair(v: &[(f64, f64)]) -> Option<(f64, f64)> {
    if v.is_empty() {
        return None;
    }
    let n = v.len() as f64;
    let (a, b) = v.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    Some((a / n, b / n))
}

/// Monte Carlo MSE of the selected estimators at each SNR, with the CRLB
/// traces alongside. Gains get independent uniform phases per trial.
/// Sweep column: `snr_db`.
///
/// `outage_rate` is failed trials over trials for the MLE and Stage A window
/// misses over `trials × paths` for TSIF. Failed estimates are excluded from
/// the MSE.
pub fn mse_vs_snr(
    scenario: &ScenarioConfig,
    mse: &MseConfig,
    trials: usize,
    seed: u64,
    form: WeightForm,
) -> Result<ResultTable> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    if mse.snr_db.is_empty() || mse.estimators.is_empty() {
        return Err(Error::InvalidParameter(
            "snr list and estimator set must be nonempty".into(),
        ));
    }
    let mut table = ResultTable::new(&["snr_db"]);
    for (i, &snr) in mse.snr_db.iter().enumerate() {
        let start = Instant::now();
        let mut cfg = scenario.clone();
        cfg.waveform.snr_db = snr;
        let sc = cfg.build()?;
        let bound = bound_or_flag(sc.crlb(form))?;
        let prior = mse.prior.map(|p| p.state()).unwrap_or(sc.target);
        let outcomes: Vec<TrialOutcome> = (0..trials)
            .into_par_iter()
            .map(|t| run_trial(&cfg, &sc, mse, &prior, seed, i as u32, t as u32))
            .collect::<Result<_>>()?;
        let elapsed = start.elapsed().as_secs_f64();
        for &kind in &mse.estimators {
            let (errors, outage_rate): (Vec<(f64, f64)>, f64) = match kind {
                EstimatorKind::Mle => {
                    let ok: Vec<_> = outcomes.iter().filter_map(|o| o.mle).collect();
                    let failed = trials - ok.len();
                    (ok, failed as f64 / trials as f64)
                }
                EstimatorKind::Tsif => {
                    let ok: Vec<_> = outcomes.iter().filter_map(|o| o.tsif).collect();
                    let misses: usize = outcomes.iter().map(|o| o.tsif_outages).sum();
                    (ok, misses as f64 / (trials * sc.path_count()) as f64)
                }
            };
            let mut row = ResultRow::new("mse_vs_snr", kind.id(), vec![num(snr)], trials, seed);
            if let Some((p, v)) = mean_pair(&errors) {
                row.mse_pos = Some(p);
                row.mse_vel = Some(v);
            }
            row.crlb_pos = bound.as_ref().map(|b| b.pos_trace);
            row.crlb_vel = bound.as_ref().map(|b| b.vel_trace);
            row.outage_rate = Some(outage_rate);
            row.wall_time = elapsed;
            table.push(row)?;
        }
    }
    Ok(table)
}

/// Data-averaged bound over random OFDM symbols next to the deterministic
/// bound at the mean effective bandwidth. Sweep columns: `draws,
/// mean_beta_hz`; estimators `data_averaged`, `deterministic` and
/// `mean_of_bounds`.
pub fn beta_ofdm(scenario: &ScenarioConfig, cfg: &BetaOfdmConfig, form: WeightForm, seed: u64) -> Result<ResultTable> {
    let start = Instant::now();
    let sc = scenario.build()?;
    let r = data_averaged_crlb(&cfg.ofdm, &sc, cfg.draws, seed, form)?;
    let elapsed = start.elapsed().as_secs_f64();
    let sweep = vec![cfg.draws.to_string(), num(r.mean_beta)];
    let mut table = ResultTable::new(&["draws", "mean_beta_hz"]);
    let mob = &r.mean_of_bounds;
    for (name, pos, vel) in [
        ("data_averaged", r.averaged.pos_trace, r.averaged.vel_trace),
        ("deterministic", r.deterministic.pos_trace, r.deterministic.vel_trace),
        ("mean_of_bounds", mob[(0, 0)] + mob[(1, 1)], mob[(2, 2)] + mob[(3, 3)]),
    ] {
        let mut row = ResultRow::new("beta_ofdm", name, sweep.clone(), cfg.draws, seed);
        row.crlb_pos = Some(pos);
        row.crlb_vel = Some(vel);
        row.wall_time = elapsed;
        table.push(row)?;
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathCheck {
    pub path: usize,
    /// Relative Frobenius error of the analytic 5×5 FIM, centered schedule.
    pub centered: f64,
    /// Same with the raw (uncentered) schedule.
    pub raw: f64,
    /// Error after scaling both matrices by the oracle's diagonal.
    pub centered_scaled: f64,
    pub raw_scaled: f64,
    /// Relative error of `Tᵀ J_centered T` against the raw reduced FIM,
    /// slow-time terms only (`β = 0`); the fast-time delay term does not move
    /// with the time origin.
    pub centering_map: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FimCheckReport {
    pub paths: Vec<PathCheck>,
}

impl FimCheckReport {
    /// Largest unscaled relative Frobenius error over paths and
    /// parameterizations.
    pub fn max_error(&self) -> f64 {
        self.paths.iter().map(|p| p.centered.max(p.raw)).fold(0.0, f64::max)
    }

    pub fn max_scaled_error(&self) -> f64 {
        self.paths
            .iter()
            .map(|p| p.centered_scaled.max(p.raw_scaled))
            .fold(0.0, f64::max)
    }
}

/// Steps giving about 1e-3 rad of phase change per parameter.
fn oracle_steps(sched: &crate::schedule::HopSchedule<f64>, beta: f64, g: Vec2<f64>, c: f64, alpha: f64) -> Vec<f64> {
    let max_fd = sched
        .delay_carriers()
        .iter()
        .fold(beta * 1.5f64.sqrt(), |m, f| m.max(f.abs()));
    let max_z = sched
        .times()
        .iter()
        .zip(sched.carriers())
        .fold(0.0f64, |m, (t, f)| m.max((t * f).abs()));
    let phase = 1e-3 / std::f64::consts::TAU;
    let h_tau = phase / max_fd;
    let h_v = phase * c / (max_z * g.norm()).max(f64::MIN_POSITIVE);
    let h_a = 1e-3 * alpha;
    vec![h_tau, h_v, h_v, h_a, h_a]
}

/// Analytic per-path FIM against central differences of the mean of a
/// three-tone pulse model with the scenario's effective bandwidth, in both
/// the centered and raw parameterizations.
pub fn fim_check(scenario: &ScenarioConfig) -> Result<FimCheckReport> {
    let layout = scenario.layout.build(scenario.c)?;
    let target = scenario.target.state();
    let raw = scenario.schedule.build()?;
    let (centered, mean_t, _) = raw.center();
    // a generic gain phase exercises the delay-amplitude coupling
    let wf = scenario.waveform.build(0.7)?;
    let c = scenario.c;
    let spectrum = three_tone_spectrum(wf.beta);
    let geoms = path_geometries(&layout, &target)?;
    let checks = geoms
        .par_iter()
        .enumerate()
        .map(|(path, pg)| {
            let eta = [pg.tau, target.velocity.x, target.velocity.y, wf.alpha.re, wf.alpha.im];
            let slow = WaveformSpec { beta: 0.0, ..wf };
            let mut errs = Vec::new();
            let mut reduced = Vec::new();
            for (sched, param) in [(&centered, Parameterization::Centered), (&raw, Parameterization::Raw)] {
                let analytic = per_path_fim(&sched.moments(false), pg, &wf, c, param)?;
                reduced.push(per_path_fim(&sched.moments(false), pg, &slow, c, param)?.reduced);
                let steps = oracle_steps(sched, wf.beta, pg.g, c, wf.alpha.norm());
                let mu = |e: &[f64]| path_mean(sched, &spectrum, pg.g, wf.es, c, e);
                let oracle = numerical_fim(mu, &eta, wf.sigma_w2, &steps)?;
                errs.push((
                    analytic.full.relative_frobenius_error(&oracle),
                    analytic.full.scaled_relative_error(&oracle),
                ));
            }
            let t = centering_jacobian(mean_t, pg.g, c);
            let mapped: Matrix<f64> = t.transpose().matmul(&reduced[0])?.matmul(&t)?;
            Ok(PathCheck {
                path,
                centered: errs[0].0,
                raw: errs[1].0,
                centered_scaled: errs[0].1,
                raw_scaled: errs[1].1,
                centering_map: mapped.scaled_relative_error(&reduced[1]),
            })
        })
        .collect::<Result<_>>()?;
    Ok(FimCheckReport { paths: checks })
}
