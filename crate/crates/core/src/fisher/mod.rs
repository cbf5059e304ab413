//! Fisher information: per-path blocks, amplitude elimination, network
//! assembly, the chain rule to (x, v) and the closed-form bounds.

pub mod oracle;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PathGeometry;
use crate::linalg::{Mat2, Matrix, Vec2};
use crate::rng::stream_rng;
use crate::scalar::Scalar;
use crate::scenario::Scenario;
use crate::schedule::ScheduleMoments;
use crate::waveform::{draw_ofdm_beta, OfdmSpec, WaveformSpec};

/// How the per-path signal weights are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightForm {
    /// Weights from the Schur complement of the exact per-path FIM:
    /// `w_v ∝ Var(z)`, `w_cross ∝ -Cov(f, z)`.
    #[default]
    Exact,
    /// `w_v ∝ Σ z²` and `w_cross ∝ -Cov(t, f²)`. Not a valid information
    /// matrix in general; kept for comparison only.
    Literal,
}

/// Whether per-path blocks may be built from uncentered moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameterization {
    Centered,
    Raw,
}

/// Per-path information over (τ, v_x, v_y, Re α, Im α) and its amplitude-free
/// reduction over (τ, v_x, v_y).
#[derive(Debug, Clone, PartialEq)]
pub struct PerPathFim<T> {
    pub full: Matrix<T>,
    pub reduced: Matrix<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathWeights<T> {
    /// Delay information [1/s²].
    pub w_tau: T,
    /// Velocity information per unit of ggᵀ [s²/m²].
    pub w_v: T,
    /// Delay-velocity coupling per unit of g [1/m].
    pub w_cross: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkFim<T> {
    /// Over (τ_1..τ_L, v_x, v_y).
    pub eta_fim: Matrix<T>,
    /// Over (x, y, v_x, v_y).
    pub state_fim: Matrix<T>,
    pub g_x: Mat2<T>,
    pub g_v: Mat2<T>,
    pub g_cross: Mat2<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrlbResult<T> {
    pub cov_bound: Matrix<T>,
    pub pos_block: Mat2<T>,
    pub vel_block: Mat2<T>,
    pub pos_trace: T,
    pub vel_trace: T,
    /// Position bound with the delay-velocity coupling ignored.
    pub pos_uncoupled: Mat2<T>,
    /// Velocity bound with the delay-velocity coupling ignored.
    pub vel_uncoupled: Mat2<T>,
}

/// `8π² |α|² E_s / σ²`, the common factor of the phase-derivative blocks.
pub fn phase_information_scale<T: Scalar>(wf: &WaveformSpec<T>) -> T {
    let pi = T::PI();
    T::lit(8.0) * pi * pi * wf.snr()
}

fn check_centered<T: Scalar>(m: &ScheduleMoments<T>) -> Result<()> {
    if m.is_centered() {
        Ok(())
    } else {
        Err(Error::NotCentered {
            s1: m.s1.abs().to_f64().unwrap_or(f64::NAN),
            f1: m.f1.abs().to_f64().unwrap_or(f64::NAN),
        })
    }
}

/// Exact 5×5 per-path FIM for the pulse model
/// `α √E_s exp(-j2π f_p^d τ) exp(j2π f_p t_p gᵀv / c)`, including the
/// fast-time `β²` delay term. Valid in either parameterization; `Centered`
/// only adds a check that the moments have zero means.
pub fn per_path_fim<T: Scalar>(
    m: &ScheduleMoments<T>,
    pg: &PathGeometry<T>,
    wf: &WaveformSpec<T>,
    c: T,
    param: Parameterization,
) -> Result<PerPathFim<T>> {
    if param == Parameterization::Centered {
        check_centered(m)?;
    }
    let k = phase_information_scale(wf);
    let g = pg.g;
    let gv = [g.x, g.y];
    let amp = T::lit(4.0) * T::PI() * wf.es / wf.sigma_w2;
    let (re, im) = (wf.alpha.re, wf.alpha.im);

    let mut full = Matrix::zeros(5, 5);
    full[(0, 0)] = k * (wf.beta * wf.beta * m.s0 + m.f2);
    for i in 0..2 {
        let tv = -k / c * m.sum_fz * gv[i];
        full[(0, 1 + i)] = tv;
        full[(1 + i, 0)] = tv;
        for j in 0..2 {
            full[(1 + i, 1 + j)] = k / (c * c) * m.sum_z2 * gv[i] * gv[j];
        }
        // velocity-amplitude
        let va = [-amp * m.sum_z / c * im * gv[i], amp * m.sum_z / c * re * gv[i]];
        for (j, &x) in va.iter().enumerate() {
            full[(1 + i, 3 + j)] = x;
            full[(3 + j, 1 + i)] = x;
        }
    }
    let ta = [amp * m.f1 * im, -amp * m.f1 * re];
    for (j, &x) in ta.iter().enumerate() {
        full[(0, 3 + j)] = x;
        full[(3 + j, 0)] = x;
    }
    let aa = T::lit(2.0) * m.s0 * wf.es / wf.sigma_w2;
    full[(3, 3)] = aa;
    full[(4, 4)] = aa;

    let reduced = eliminate_amplitude(&full)?;
    Ok(PerPathFim { full, reduced })
}

/// Schur complement of the trailing 2×2 amplitude block of a 5×5 FIM.
pub fn eliminate_amplitude<T: Scalar>(full: &Matrix<T>) -> Result<Matrix<T>> {
    if full.rows() != 5 || full.cols() != 5 {
        return Err(Error::DimensionMismatch {
            what: "per-path FIM order",
            expected: 5,
            got: full.rows(),
        });
    }
    let inv = full.block2(3, 3).adjugate_inverse();
    Ok(Matrix::from_fn(3, 3, |i, j| {
        let mut s = full[(i, j)];
        for a in 0..2 {
            for b in 0..2 {
                s = s - full[(i, 3 + a)] * inv.m[a][b] * full[(3 + b, j)];
            }
        }
        s
    }))
}

/// Per-path weights from centered moments.
pub fn path_weights<T: Scalar>(
    m: &ScheduleMoments<T>,
    wf: &WaveformSpec<T>,
    c: T,
    form: WeightForm,
) -> Result<PathWeights<T>> {
    check_centered(m)?;
    let k = phase_information_scale(wf);
    let p = m.s0;
    let w_tau = k * p * (wf.beta * wf.beta + m.var_f);
    Ok(match form {
        WeightForm::Exact => PathWeights {
            w_tau,
            w_v: k * p * m.var_z / (c * c),
            w_cross: -k * p * m.cov_f_z / c,
        },
        WeightForm::Literal => PathWeights {
            w_tau,
            w_v: k * m.sum_z2 / (c * c),
            w_cross: -k * p * m.cov_t_fc2 / c,
        },
    })
}

fn check_lengths(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { what, expected, got })
    }
}

/// Network FIM over (τ_1..τ_L, v): diagonal delay block, summed velocity
/// block and per-path cross rows.
pub fn assemble_eta_fim<T: Scalar>(weights: &[PathWeights<T>], geometries: &[PathGeometry<T>]) -> Result<Matrix<T>> {
    check_lengths("path geometries", weights.len(), geometries.len())?;
    let l = weights.len();
    let mut j = Matrix::zeros(l + 2, l + 2);
    let mut vv = Mat2::zero();
    for (i, (w, pg)) in weights.iter().zip(geometries).enumerate() {
        j[(i, i)] = w.w_tau;
        for (a, ga) in [pg.g.x, pg.g.y].into_iter().enumerate() {
            j[(i, l + a)] = w.w_cross * ga;
            j[(l + a, i)] = w.w_cross * ga;
        }
        vv = vv + pg.g.outer(pg.g).scale(w.w_v);
    }
    j.set_block2(l, l, &vv);
    Ok(j)
}

/// `Gᵀ J G` with `G = [∂τ/∂x 0; 0 I]`, by explicit products.
pub fn chain_to_state<T: Scalar>(eta_fim: &Matrix<T>, delay_jacobian: &Matrix<T>) -> Result<Matrix<T>> {
    let l = delay_jacobian.rows();
    check_lengths("eta FIM order", l + 2, eta_fim.rows())?;
    let mut g = Matrix::zeros(l + 2, 4);
    for i in 0..l {
        g[(i, 0)] = delay_jacobian[(i, 0)];
        g[(i, 1)] = delay_jacobian[(i, 1)];
    }
    g[(l, 2)] = T::one();
    g[(l + 1, 3)] = T::one();
    g.transpose().matmul(eta_fim)?.matmul(&g)
}

/// Geometry-weighted sums `(G_x, G_v, G_cross)`.
pub fn geometry_sums<T: Scalar>(
    weights: &[PathWeights<T>],
    geometries: &[PathGeometry<T>],
) -> Result<(Mat2<T>, Mat2<T>, Mat2<T>)> {
    check_lengths("path geometries", weights.len(), geometries.len())?;
    let mut sums = (Mat2::zero(), Mat2::zero(), Mat2::zero());
    for (w, pg) in weights.iter().zip(geometries) {
        let ggt = pg.g.outer(pg.g);
        sums.0 = sums.0 + ggt.scale(w.w_tau);
        sums.1 = sums.1 + ggt.scale(w.w_v);
        sums.2 = sums.2 + ggt.scale(w.w_cross);
    }
    Ok(sums)
}

/// Eta FIM, state FIM `[G_x/c², G_cross/c; G_cross/c, G_v]` and the sums.
pub fn network_fim<T: Scalar>(
    weights: &[PathWeights<T>],
    geometries: &[PathGeometry<T>],
    c: T,
) -> Result<NetworkFim<T>> {
    let eta_fim = assemble_eta_fim(weights, geometries)?;
    let (g_x, g_v, g_cross) = geometry_sums(weights, geometries)?;
    let mut state_fim = Matrix::zeros(4, 4);
    state_fim.set_block2(0, 0, &g_x.scale((c * c).recip()));
    state_fim.set_block2(0, 2, &g_cross.scale(c.recip()));
    state_fim.set_block2(2, 0, &g_cross.scale(c.recip()));
    state_fim.set_block2(2, 2, &g_v);
    Ok(NetworkFim {
        eta_fim,
        state_fim,
        g_x,
        g_v,
        g_cross,
    })
}

/// Position and velocity bounds of a 4×4 state FIM through 2×2 Schur
/// complements.
pub fn crlb<T: Scalar>(state_fim: &Matrix<T>) -> Result<CrlbResult<T>> {
    check_lengths("state FIM order", 4, state_fim.rows())?;
    let a = state_fim.block2(0, 0).symmetrized();
    let b = state_fim.block2(0, 2);
    let d = state_fim.block2(2, 2).symmetrized();
    let a_inv = a.inverse_guarded()?;
    let d_inv = d.inverse_guarded()?;
    let bt = b.transpose();
    let pos_block = (a - b * d_inv * bt).symmetrized().inverse_guarded()?;
    let vel_block = (d - bt * a_inv * b).symmetrized().inverse_guarded()?;
    let off = (pos_block * b * d_inv).scale(-T::one());
    let mut cov_bound = Matrix::zeros(4, 4);
    cov_bound.set_block2(0, 0, &pos_block);
    cov_bound.set_block2(0, 2, &off);
    cov_bound.set_block2(2, 0, &off.transpose());
    cov_bound.set_block2(2, 2, &vel_block);
    Ok(CrlbResult {
        cov_bound,
        pos_trace: pos_block.trace(),
        vel_trace: vel_block.trace(),
        pos_block,
        vel_block,
        pos_uncoupled: a_inv,
        vel_uncoupled: d_inv,
    })
}

/// Jacobian of the centered parameters (τ', v) with respect to the raw
/// (τ, v) when the time origin moves by `mean_t`: `τ' = τ - mean_t gᵀv / c`.
/// Raw and centered reduced FIMs relate by `J_raw = Tᵀ J_centered T`.
pub fn centering_jacobian<T: Scalar>(mean_t: T, g: Vec2<T>, c: T) -> Matrix<T> {
    let mut t = Matrix::identity(3);
    t[(0, 1)] = -mean_t * g.x / c;
    t[(0, 2)] = -mean_t * g.y / c;
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataAveragedCrlb {
    /// Inverse of the draw-averaged state FIM.
    pub averaged: CrlbResult<f64>,
    /// Bound with every path at `mean_beta`.
    pub deterministic: CrlbResult<f64>,
    /// Draw average of the per-draw 4×4 bounds.
    pub mean_of_bounds: Matrix<f64>,
    pub mean_beta: f64,
    pub draws: usize,
}

/// Averages the state FIM over `n_draws` OFDM symbol realizations (one β
/// draw per path per realization) and inverts. Draw `i` uses stream `i` of
/// `seed`, so the result does not depend on the thread count.
pub fn data_averaged_crlb(
    ofdm: &OfdmSpec,
    scenario: &Scenario<f64>,
    n_draws: usize,
    seed: u64,
    form: WeightForm,
) -> Result<DataAveragedCrlb> {
    if n_draws == 0 {
        return Err(Error::InvalidParameter("need at least one data draw".into()));
    }
    ofdm.validate()?;
    let l = scenario.path_count();
    let per_draw: Vec<(Matrix<f64>, f64, Option<Matrix<f64>>)> = (0..n_draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, 0, i as u32);
            let betas = (0..l)
                .map(|_| draw_ofdm_beta(ofdm, &mut rng))
                .collect::<Result<Vec<_>>>()?;
            let mut drawn = scenario.clone();
            for (wf, &b) in drawn.waveforms.iter_mut().zip(&betas) {
                wf.beta = b;
            }
            let fim = drawn.network_fim(form)?.state_fim;
            let bound = crlb(&fim).ok().map(|r| r.cov_bound);
            Ok((fim, betas.iter().sum::<f64>(), bound))
        })
        .collect::<Result<_>>()?;

    let n = n_draws as f64;
    let mut sum_fim = Matrix::zeros(4, 4);
    let mut sum_bounds = Matrix::zeros(4, 4);
    let mut beta_sum = 0.0;
    for (fim, b, bound) in &per_draw {
        sum_fim = Matrix::from_fn(4, 4, |i, j| sum_fim[(i, j)] + fim[(i, j)]);
        if let Some(bound) = bound {
            sum_bounds = Matrix::from_fn(4, 4, |i, j| sum_bounds[(i, j)] + bound[(i, j)]);
        }
        beta_sum += b;
    }
    let mean_beta = beta_sum / (n * l as f64);
    let averaged = crlb(&sum_fim.scale(1.0 / n))?;
    let deterministic = scenario
        .map_waveforms(|wf| WaveformSpec { beta: mean_beta, ..*wf })
        .crlb(form)?;
    Ok(DataAveragedCrlb {
        averaged,
        deterministic,
        mean_of_bounds: sum_bounds.scale(1.0 / n),
        mean_beta,
        draws: n_draws,
    })
}
