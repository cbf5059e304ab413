//! Concentrated maximum likelihood over (x, v) and the two-stage fusion
//! estimator (per-path GLRT, then weighted Gauss-Newton).

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::phase_information_scale;
use crate::geometry::{geometry_gradient_jacobian, path_geometries, NetworkLayout, TargetState};
use crate::linalg::{Mat2, Vec2, CONDITION_LIMIT};
use crate::schedule::HopSchedule;
use crate::signal::SlowTimeObservation;
use crate::waveform::WaveformSpec;

const TAU: f64 = std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateEstimate {
    pub x_hat: Vec2<f64>,
    pub v_hat: Vec2<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerPathEstimate {
    pub path: usize,
    pub tau_hat: f64,
    pub r_hat: f64,
    /// Inverse of `info`, over (τ [s], r [m/s]).
    pub cov: Mat2<f64>,
    pub info: Mat2<f64>,
    /// Peak GLRT value.
    pub peak: f64,
}

/// Grid search settings, independent of where the box is centered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchParams {
    /// Half width of the position box on each axis [m].
    pub pos_half_width: f64,
    /// Half width of the velocity box on each axis [m/s].
    pub vel_half_width: f64,
    #[serde(default = "SearchParams::default_coarse")]
    pub coarse_points: usize,
    #[serde(default = "SearchParams::default_keep")]
    pub keep: usize,
    #[serde(default = "SearchParams::default_refine")]
    pub refine_factor: usize,
    /// Final grid spacing in position [m].
    #[serde(default = "SearchParams::default_res")]
    pub pos_resolution: f64,
    /// Final grid spacing in velocity [m/s].
    #[serde(default = "SearchParams::default_res")]
    pub vel_resolution: f64,
}

impl SearchParams {
    fn default_coarse() -> usize {
        15
    }
    fn default_keep() -> usize {
        5
    }
    fn default_refine() -> usize {
        3
    }
    fn default_res() -> f64 {
        0.05
    }
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            pos_half_width: 500.0,
            vel_half_width: 50.0,
            coarse_points: 15,
            keep: 5,
            refine_factor: 3,
            pos_resolution: 0.05,
            vel_resolution: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBox {
    pub lo: [f64; 4],
    pub hi: [f64; 4],
    pub coarse_points: usize,
    pub keep: usize,
    pub refine_factor: usize,
    pub pos_resolution: f64,
    pub vel_resolution: f64,
}

impl SearchBox {
    pub fn around(center: &TargetState<f64>, params: &SearchParams) -> Result<Self> {
        let (x, v) = (center.position, center.velocity);
        let (hp, hv) = (params.pos_half_width, params.vel_half_width);
        let b = SearchBox {
            lo: [x.x - hp, x.y - hp, v.x - hv, v.y - hv],
            hi: [x.x + hp, x.y + hp, v.x + hv, v.y + hv],
            coarse_points: params.coarse_points,
            keep: params.keep,
            refine_factor: params.refine_factor,
            pos_resolution: params.pos_resolution,
            vel_resolution: params.vel_resolution,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::EmptyBox(m.into()));
        if self.coarse_points < 2 {
            return bad("need at least 2 coarse points per axis");
        }
        if self
            .lo
            .iter()
            .zip(&self.hi)
            .any(|(l, h)| !(h > l) || !l.is_finite() || !h.is_finite())
        {
            return bad("every axis needs finite bounds with hi > lo");
        }
        if self.refine_factor < 2 {
            return bad("refine factor must be at least 2");
        }
        if self.keep == 0 {
            return bad("must keep at least one cell");
        }
        if !(self.pos_resolution > 0.0) || !(self.vel_resolution > 0.0) {
            return bad("target resolutions must be positive");
        }
        Ok(())
    }

    fn coarse_step(&self) -> [f64; 4] {
        let n = (self.coarse_points - 1) as f64;
        std::array::from_fn(|i| (self.hi[i] - self.lo[i]) / n)
    }
}

struct PathData<'a> {
    tx: Vec2<f64>,
    rx: Vec2<f64>,
    /// Delay carriers [Hz].
    fd: Vec<f64>,
    /// `f_p t_p / c` [s²/m].
    a: Vec<f64>,
    y: &'a [Complex64],
}

impl PathData<'_> {
    /// `|φᴴ y|² / P` at (τ, r).
    fn glrt(&self, tau: f64, r: f64) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for ((&fd, &a), &y) in self.fd.iter().zip(&self.a).zip(self.y) {
            let cycles = fd * tau - a * r;
            acc += Complex64::cis(TAU * (cycles - cycles.round())) * y;
        }
        acc.norm_sqr() / self.fd.len() as f64
    }
}

/// Observations bound to their schedules and layout, ready for repeated
/// objective evaluations.
pub struct MleProblem<'a> {
    paths: Vec<PathData<'a>>,
    c: f64,
}

fn path_data<'a>(sched: &HopSchedule<f64>, c: f64, y: &'a [Complex64]) -> PathData<'a> {
    PathData {
        tx: Vec2::zero(),
        rx: Vec2::zero(),
        fd: sched.delay_carriers(),
        a: sched
            .times()
            .iter()
            .zip(sched.carriers())
            .map(|(&t, &f)| f * t / c)
            .collect(),
        y,
    }
}

impl<'a> MleProblem<'a> {
    pub fn new(
        layout: &NetworkLayout<f64>,
        schedules: &[HopSchedule<f64>],
        obs: &'a [SlowTimeObservation],
    ) -> Result<Self> {
        let l = layout.path_count();
        for (what, got) in [("schedules", schedules.len()), ("observations", obs.len())] {
            if got != l {
                return Err(Error::DimensionMismatch { what, expected: l, got });
            }
        }
        let c = layout.c();
        let paths = layout
            .path_pairs()
            .into_iter()
            .zip(schedules)
            .zip(obs)
            .map(|(((k, l), s), o)| {
                if o.samples.len() != s.pulses() {
                    return Err(Error::DimensionMismatch {
                        what: "observation length",
                        expected: s.pulses(),
                        got: o.samples.len(),
                    });
                }
                let mut d = path_data(s, c, &o.samples);
                d.tx = layout.tx_positions()[k];
                d.rx = layout.rx_positions()[l];
                Ok(d)
            })
            .collect::<Result<_>>()?;
        Ok(MleProblem { paths, c })
    }

    /// `Σ_paths |φ(x, v)ᴴ y|² / P`.
    pub fn objective(&self, x: Vec2<f64>, v: Vec2<f64>) -> f64 {
        self.paths
            .iter()
            .map(|p| {
                let dt = x - p.tx;
                let dr = x - p.rx;
                let (rt, rr) = (dt.norm(), dr.norm());
                let g = dt.scale(1.0 / rt) + dr.scale(1.0 / rr);
                p.glrt((rt + rr) / self.c, g.dot(v))
            })
            .sum()
    }

    fn objective4(&self, s: &[f64; 4]) -> f64 {
        self.objective(Vec2::new(s[0], s[1]), Vec2::new(s[2], s[3]))
    }
}

/// Concentrated log-likelihood (up to constants) at (x, v).
pub fn concentrated_objective(
    obs: &[SlowTimeObservation],
    schedules: &[HopSchedule<f64>],
    layout: &NetworkLayout<f64>,
    x: Vec2<f64>,
    v: Vec2<f64>,
) -> Result<f64> {
    Ok(MleProblem::new(layout, schedules, obs)?.objective(x, v))
}

/// `|φ(τ, r)ᴴ y|² / ‖φ‖²` for one path.
pub fn glrt_objective(y: &[Complex64], sched: &HopSchedule<f64>, tau: f64, r: f64, c: f64) -> f64 {
    path_data(sched, c, y).glrt(tau, r)
}

fn grid_index(mut flat: usize, n: usize) -> [usize; 4] {
    let mut idx = [0; 4];
    for slot in idx.iter_mut().rev() {
        *slot = flat % n;
        flat /= n;
    }
    idx
}

/// Indices of the `keep` best coarse cells that are local maxima over their
/// 3⁴ neighbourhood, topped up with the best remaining cells if needed.
fn coarse_candidates(values: &[f64], n: usize, keep: usize) -> Vec<usize> {
    let stride = [n * n * n, n * n, n, 1];
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let is_peak = |flat: usize| {
        let idx = grid_index(flat, n);
        for d in 0..81usize {
            let mut other = 0usize;
            let mut code = d;
            let mut centre = true;
            let mut inside = true;
            for axis in 0..4 {
                let off = (code % 3) as isize - 1;
                code /= 3;
                centre &= off == 0;
                let j = idx[axis] as isize + off;
                if j < 0 || j >= n as isize {
                    inside = false;
                    break;
                }
                other += j as usize * stride[axis];
            }
            if inside && !centre && values[other] > values[flat] {
                return false;
            }
        }
        true
    };
    let mut picked: Vec<usize> = order.iter().copied().filter(|&i| is_peak(i)).take(keep).collect();
    for &i in &order {
        if picked.len() >= keep {
            break;
        }
        if !picked.contains(&i) {
            picked.push(i);
        }
    }
    picked
}

/// Multiresolution grid search of the concentrated objective inside `bx`.
pub fn mle_estimate(problem: &MleProblem<'_>, bx: &SearchBox) -> Result<StateEstimate> {
    bx.validate()?;
    let n = bx.coarse_points;
    let step = bx.coarse_step();
    let point = |idx: [usize; 4]| -> [f64; 4] { std::array::from_fn(|i| bx.lo[i] + idx[i] as f64 * step[i]) };
    let values: Vec<f64> = (0..n.pow(4))
        .map(|flat| problem.objective4(&point(grid_index(flat, n))))
        .collect();
    let mut candidates: Vec<([f64; 4], f64)> = coarse_candidates(&values, n, bx.keep)
        .into_iter()
        .map(|flat| (point(grid_index(flat, n)), values[flat]))
        .collect();

    let f = bx.refine_factor as isize;
    let side = (2 * f + 1) as usize;
    let mut h = step;
    let mut levels = 0;
    let fine_enough = |h: &[f64; 4]| {
        h[0] <= bx.pos_resolution && h[1] <= bx.pos_resolution && h[2] <= bx.vel_resolution && h[3] <= bx.vel_resolution
    };
    while !fine_enough(&h) {
        for (i, hi) in h.iter_mut().enumerate() {
            let res = if i < 2 { bx.pos_resolution } else { bx.vel_resolution };
            if *hi > res {
                *hi /= f as f64;
            }
        }
        levels += 1;
        for cand in candidates.iter_mut() {
            // recentre at the same spacing while the best point sits on the patch edge
            for _ in 0..8 {
                let mut best = *cand;
                let mut best_idx = [0isize; 4];
                for flat in 0..side.pow(4) {
                    let idx = grid_index(flat, side);
                    let off: [isize; 4] = std::array::from_fn(|i| idx[i] as isize - f);
                    if off == [0; 4] {
                        continue;
                    }
                    let s: [f64; 4] = std::array::from_fn(|i| cand.0[i] + off[i] as f64 * h[i]);
                    let val = problem.objective4(&s);
                    if val > best.1 {
                        best = (s, val);
                        best_idx = off;
                    }
                }
                *cand = best;
                if best_idx.iter().all(|o| o.abs() < f) {
                    break;
                }
            }
        }
    }
    let best = candidates
        .iter()
        .copied()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one candidate");
    Ok(StateEstimate {
        x_hat: Vec2::new(best.0[0], best.0[1]),
        v_hat: Vec2::new(best.0[2], best.0[3]),
        objective: best.1,
        iterations: levels,
        converged: true,
    })
}

/// Stage A search window around a prior (τ, r).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageAWindow {
    pub tau_center: f64,
    pub r_center: f64,
    pub tau_half_width: f64,
    pub r_half_width: f64,
    pub tau_step: f64,
    pub r_step: f64,
}

/// Stage A window and grid scaling relative to the schedule's natural
/// ambiguity and resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StageAParams {
    /// Window half width as a fraction of the unambiguous delay/speed span.
    pub window_fraction: f64,
    /// Grid points per resolution cell.
    pub oversample: f64,
    /// Newton refinement passes after the grid search.
    pub refine_passes: usize,
}

impl Default for StageAParams {
    fn default() -> Self {
        StageAParams {
            window_fraction: 0.5,
            oversample: 8.0,
            refine_passes: 12,
        }
    }
}

impl StageAWindow {
    /// Window of `window_fraction` of the unambiguous spans on each side of
    /// (τ0, r0): delay span `1/Δf_min`, speed span `c/(f_max·PRI)`.
    /// Spacing is `1/(oversample·span)` in delay and
    /// `c/(oversample·f_max·T_syn)` in speed.
    pub fn for_schedule(sched: &HopSchedule<f64>, tau0: f64, r0: f64, c: f64, params: &StageAParams) -> Result<Self> {
        let mut fd = sched.delay_carriers();
        fd.sort_by(f64::total_cmp);
        let spread = fd[fd.len() - 1] - fd[0];
        if !(spread > 0.0) {
            return Err(Error::InvalidParameter(
                "stage A needs at least two distinct carriers".into(),
            ));
        }
        let min_gap = fd
            .windows(2)
            .map(|w| w[1] - w[0])
            .filter(|&d| d > 1e-9 * spread)
            .fold(f64::INFINITY, f64::min);
        let f_max = sched.max_carrier();
        Ok(StageAWindow {
            tau_center: tau0,
            r_center: r0,
            tau_half_width: params.window_fraction / min_gap,
            r_half_width: params.window_fraction * c / (f_max * sched.pri()),
            tau_step: 1.0 / (params.oversample * spread),
            r_step: c / (params.oversample * f_max * sched.duration()),
        })
    }
}

/// Per-path (τ, r) information `[[A, -B], [-B, D]]` for a centered schedule
/// at signal level `|α|² E_s` and noise `σ²`.
pub fn stage_a_information(sched: &HopSchedule<f64>, signal_power: f64, sigma_w2: f64, c: f64) -> Result<Mat2<f64>> {
    let m = sched.moments(false);
    if !m.is_centered() {
        return Err(Error::NotCentered {
            s1: m.s1.abs(),
            f1: m.f1.abs(),
        });
    }
    let wf = WaveformSpec::new(Complex64::new(signal_power.max(0.0).sqrt(), 0.0), 1.0, 0.0, sigma_w2)?;
    let k = phase_information_scale(&wf);
    let p = m.s0;
    let a = k * p * m.var_f;
    let b = k * p / c * m.cov_f_z;
    let d = k * p / (c * c) * m.var_z;
    Ok(Mat2::new(a, -b, -b, d))
}

/// Grid search of the per-path GLRT inside `window`, Newton refinement, and
/// the information matrix at the estimated signal level.
pub fn stage_a(
    path: usize,
    y: &[Complex64],
    sched: &HopSchedule<f64>,
    sigma_w2: f64,
    c: f64,
    window: &StageAWindow,
    params: &StageAParams,
) -> Result<PerPathEstimate> {
    let data = path_data(sched, c, y);
    let nt = (window.tau_half_width / window.tau_step).ceil().max(1.0) as isize;
    let nr = (window.r_half_width / window.r_step).ceil().max(1.0) as isize;
    let ht = window.tau_half_width / nt as f64;
    let hr = window.r_half_width / nr as f64;
    let mut best = (0isize, 0isize, f64::NEG_INFINITY);
    for i in -nt..=nt {
        let tau = window.tau_center + i as f64 * ht;
        for j in -nr..=nr {
            let val = data.glrt(tau, window.r_center + j as f64 * hr);
            if val > best.2 {
                best = (i, j, val);
            }
        }
    }
    if best.0.abs() == nt || best.1.abs() == nr {
        return Err(Error::WindowMiss { path });
    }
    let mut tau = window.tau_center + best.0 as f64 * ht;
    let mut r = window.r_center + best.1 as f64 * hr;
    let mut peak = best.2;
    let (mut st, mut sr) = (ht, hr);
    for _ in 0..params.refine_passes {
        let f = |a: isize, b: isize| data.glrt(tau + a as f64 * st, r + b as f64 * sr);
        let f0 = peak;
        let (fp0, fm0, f0p, f0m) = (f(1, 0), f(-1, 0), f(0, 1), f(0, -1));
        let fxy = (f(1, 1) - f(1, -1) - f(-1, 1) + f(-1, -1)) / 4.0;
        let gx = (fp0 - fm0) / 2.0;
        let gy = (f0p - f0m) / 2.0;
        let hxx = fp0 - 2.0 * f0 + fm0;
        let hyy = f0p - 2.0 * f0 + f0m;
        let det = hxx * hyy - fxy * fxy;
        let (dx, dy) = if hxx < 0.0 && det > 0.0 {
            (
                (-(hyy * gx - fxy * gy) / det).clamp(-1.0, 1.0),
                (-(hxx * gy - fxy * gx) / det).clamp(-1.0, 1.0),
            )
        } else {
            let moves = [(1.0, 0.0, fp0), (-1.0, 0.0, fm0), (0.0, 1.0, f0p), (0.0, -1.0, f0m)];
            let m = moves
                .iter()
                .copied()
                .max_by(|a, b| a.2.total_cmp(&b.2))
                .expect("nonempty");
            if m.2 > f0 {
                (m.0, m.1)
            } else {
                (0.0, 0.0)
            }
        };
        let (nt_, nr_) = (tau + dx * st, r + dy * sr);
        let val = data.glrt(nt_, nr_);
        if val > peak {
            tau = nt_;
            r = nr_;
            peak = val;
        }
        st /= 4.0;
        sr /= 4.0;
    }
    let p = sched.pulses() as f64;
    let info = stage_a_information(sched, peak / p, sigma_w2, c)?;
    // delay and speed differ in units, so conditioning is judged on the
    // correlation-normalized matrix
    let (a, d, b) = (info.m[0][0], info.m[1][1], info.m[0][1]);
    let rho = (b / (a * d).sqrt()).abs();
    let condition = (1.0 + rho) / (1.0 - rho);
    if !(a > 0.0 && d > 0.0 && condition >= 1.0 && condition < CONDITION_LIMIT) {
        return Err(Error::SingularGeometry {
            condition,
            limit: CONDITION_LIMIT,
        });
    }
    let cov = info.adjugate_inverse();
    Ok(PerPathEstimate {
        path,
        tau_hat: tau,
        r_hat: r,
        cov,
        info,
        peak,
    })
}

/// Gauss-Newton settings for Stage B.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GnParams {
    pub max_iterations: usize,
    /// Scaled step threshold; position steps are divided by `pos_scale`
    /// and velocity steps by `vel_scale`.
    pub step_tolerance: f64,
    pub cost_tolerance: f64,
    pub pos_scale: f64,
    pub vel_scale: f64,
    /// Condition number of the normal matrix above which damping is added.
    pub condition_limit: f64,
}

impl Default for GnParams {
    fn default() -> Self {
        GnParams {
            max_iterations: 50,
            step_tolerance: 1e-6,
            cost_tolerance: 1e-9,
            pos_scale: 0.05,
            vel_scale: 0.05,
            condition_limit: 1e10,
        }
    }
}

/// Weighted residual cost, normal matrix and gradient at (x, v). Delays are
/// handled as path lengths `cτ` [m].
fn normal_equations(
    estimates: &[PerPathEstimate],
    weights: &[Matrix2x2],
    layout: &NetworkLayout<f64>,
    x: Vec2<f64>,
    v: Vec2<f64>,
) -> Result<(f64, Matrix4<f64>, Vector4<f64>)> {
    let c = layout.c();
    let paths = path_geometries(layout, &TargetState::new(x, v))?;
    let mut cost = 0.0;
    let mut n = Matrix4::zeros();
    let mut b = Vector4::zeros();
    for (e, w) in estimates.iter().zip(weights) {
        let pg = &paths[e.path];
        let jg = geometry_gradient_jacobian(pg)?;
        let jgv = jg.transpose().mul_vec(v);
        let res = nalgebra::Vector2::new(c * e.tau_hat - (pg.range_t + pg.range_r), e.r_hat - pg.g.dot(v));
        let h = nalgebra::Matrix2x4::new(pg.g.x, pg.g.y, 0.0, 0.0, jgv.x, jgv.y, pg.g.x, pg.g.y);
        cost += (res.transpose() * w * res)[(0, 0)];
        n += h.transpose() * w * h;
        b += h.transpose() * w * res;
    }
    Ok((cost, n, b))
}

type Matrix2x2 = nalgebra::Matrix2<f64>;

fn condition(n: &Matrix4<f64>) -> f64 {
    let ev = n.symmetric_eigenvalues();
    let (lo, hi) = ev.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| {
        (lo.min(e.abs()), hi.max(e.abs()))
    });
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Information-weighted Gauss-Newton fusion of per-path (τ, r) estimates.
/// Returns the best iterate; `converged` is false if the iteration cap was
/// reached first.
pub fn stage_b(
    estimates: &[PerPathEstimate],
    layout: &NetworkLayout<f64>,
    prior: &TargetState<f64>,
    params: &GnParams,
) -> Result<StateEstimate> {
    if estimates.len() < 2 {
        return Err(Error::InsufficientPaths {
            needed: 2,
            got: estimates.len(),
        });
    }
    let c = layout.c();
    // weights for (cτ, r)
    let weights: Vec<Matrix2x2> = estimates
        .iter()
        .map(|e| {
            let w = e.info;
            Matrix2x2::new(w.m[0][0] / (c * c), w.m[0][1] / c, w.m[1][0] / c, w.m[1][1])
        })
        .collect();
    let mut x = prior.position;
    let mut v = prior.velocity;
    let (mut cost, mut n, mut b) = normal_equations(estimates, &weights, layout, x, v)?;
    let mut lambda = 0.0f64;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iterations {
        iterations += 1;
        if condition(&n) > params.condition_limit && lambda == 0.0 {
            lambda = 1e-6;
        }
        let mut accepted = None;
        for _ in 0..30 {
            let mut damped = n;
            for i in 0..4 {
                damped[(i, i)] += lambda * n[(i, i)].max(f64::MIN_POSITIVE);
            }
            let Some(step) = damped.lu().solve(&b) else {
                lambda = (lambda * 10.0).max(1e-6);
                continue;
            };
            let nx = x + Vec2::new(step[0], step[1]);
            let nv = v + Vec2::new(step[2], step[3]);
            match normal_equations(estimates, &weights, layout, nx, nv) {
                Ok((new_cost, new_n, new_b)) if new_cost <= cost => {
                    accepted = Some((step, nx, nv, new_cost, new_n, new_b));
                    break;
                }
                _ => lambda = (lambda * 10.0).max(1e-6),
            }
        }
        let Some((step, nx, nv, new_cost, new_n, new_b)) = accepted else {
            break;
        };
        let scaled = ((step[0] / params.pos_scale).powi(2)
            + (step[1] / params.pos_scale).powi(2)
            + (step[2] / params.vel_scale).powi(2)
            + (step[3] / params.vel_scale).powi(2))
        .sqrt();
        let decrease = cost - new_cost;
        x = nx;
        v = nv;
        cost = new_cost;
        n = new_n;
        b = new_b;
        lambda /= 10.0;
        if lambda < 1e-12 {
            lambda = 0.0;
        }
        if scaled < params.step_tolerance && decrease <= params.cost_tolerance * cost.max(1e-12) + 1e-12 {
            converged = true;
            break;
        }
    }
    Ok(StateEstimate {
        x_hat: x,
        v_hat: v,
        objective: cost,
        iterations,
        converged,
    })
}

/// Result of one two-stage fusion run.
#[derive(Debug, Clone, PartialEq)]
pub struct TsifOutcome {
    /// `None` when fewer than two paths survived Stage A.
    pub estimate: Option<StateEstimate>,
    pub per_path: Vec<PerPathEstimate>,
    /// Paths whose Stage A peak hit the window boundary.
    pub outages: usize,
}

/// Stage A on every path with windows centred on the prior's (τ, r), then
/// Stage B from the prior.
pub fn tsif_estimate(
    obs: &[SlowTimeObservation],
    schedules: &[HopSchedule<f64>],
    waveforms: &[WaveformSpec<f64>],
    layout: &NetworkLayout<f64>,
    prior: &TargetState<f64>,
    stage_a_params: &StageAParams,
    gn: &GnParams,
) -> Result<TsifOutcome> {
    let c = layout.c();
    let paths = path_geometries(layout, prior)?;
    let l = paths.len();
    for (what, got) in [
        ("schedules", schedules.len()),
        ("waveforms", waveforms.len()),
        ("observations", obs.len()),
    ] {
        if got != l {
            return Err(Error::DimensionMismatch { what, expected: l, got });
        }
    }
    let mut per_path = Vec::with_capacity(l);
    let mut outages = 0;
    for (i, pg) in paths.iter().enumerate() {
        let window = StageAWindow::for_schedule(
            &schedules[i],
            pg.tau,
            pg.radial_speed(prior.velocity),
            c,
            stage_a_params,
        )?;
        match stage_a(
            i,
            &obs[i].samples,
            &schedules[i],
            waveforms[i].sigma_w2,
            c,
            &window,
            stage_a_params,
        ) {
            Ok(e) => per_path.push(e),
            Err(Error::WindowMiss { .. }) | Err(Error::SingularGeometry { .. }) => outages += 1,
            Err(e) => return Err(e),
        }
    }
    let estimate = match stage_b(&per_path, layout, prior, gn) {
        Ok(e) => Some(e),
        Err(Error::InsufficientPaths { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(TsifOutcome {
        estimate,
        per_path,
        outages,
    })
}
