//! Finite-difference FIM of a complex Gaussian mean model, used to check the
//! analytic blocks.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vec2};
use crate::schedule::HopSchedule;

/// Relative change (normalized by `sqrt(J_ii J_jj)`) allowed between the
/// step-`h` and step-`h/2` estimates.
pub const STEP_CHANGE_LIMIT: f64 = 0.05;

fn central_jacobian<F>(mu: &F, eta: &[f64], steps: &[f64]) -> Vec<Vec<Complex64>>
where
    F: Fn(&[f64]) -> Vec<Complex64>,
{
    (0..eta.len())
        .map(|i| {
            let mut plus = eta.to_vec();
            let mut minus = eta.to_vec();
            plus[i] += steps[i];
            minus[i] -= steps[i];
            let (a, b) = (mu(&plus), mu(&minus));
            let inv = 1.0 / (2.0 * steps[i]);
            a.iter().zip(&b).map(|(a, b)| (a - b) * inv).collect()
        })
        .collect()
}

fn gram(d: &[Vec<Complex64>], sigma_w2: f64) -> Matrix<f64> {
    let n = d.len();
    let mut j = Matrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let s: f64 = d[a].iter().zip(&d[b]).map(|(x, y)| (x.conj() * y).re).sum();
            j[(a, b)] = 2.0 / sigma_w2 * s;
            j[(b, a)] = j[(a, b)];
        }
    }
    j
}

/// `J_ij = (2/σ²) Re{∂_i μᴴ ∂_j μ}` from central differences with per-parameter
/// `steps`. The estimate at `steps/2` is returned after checking it against
/// the one at `steps`.
pub fn numerical_fim<F>(mu: F, eta: &[f64], sigma_w2: f64, steps: &[f64]) -> Result<Matrix<f64>>
where
    F: Fn(&[f64]) -> Vec<Complex64>,
{
    if steps.len() != eta.len() {
        return Err(Error::DimensionMismatch {
            what: "finite-difference steps",
            expected: eta.len(),
            got: steps.len(),
        });
    }
    let coarse = gram(&central_jacobian(&mu, eta, steps), sigma_w2);
    let half: Vec<f64> = steps.iter().map(|h| h / 2.0).collect();
    let fine = gram(&central_jacobian(&mu, eta, &half), sigma_w2);
    let n = eta.len();
    for i in 0..n {
        for j in 0..n {
            let scale = (fine[(i, i)] * fine[(j, j)]).sqrt();
            if scale == 0.0 {
                continue;
            }
            let change = (fine[(i, j)] - coarse[(i, j)]).abs() / scale;
            if change > STEP_CHANGE_LIMIT {
                return Err(Error::StepTooLarge { row: i, col: j, change });
            }
        }
    }
    Ok(fine)
}

/// Three equal-power fast-time tones with zero centroid and rms bandwidth
/// `beta`, as (frequency, amplitude) pairs.
pub fn three_tone_spectrum(beta: f64) -> Vec<(f64, f64)> {
    let f = beta * 1.5f64.sqrt();
    let a = (1.0 / 3.0f64).sqrt();
    vec![(-f, a), (0.0, a), (f, a)]
}

/// Mean of one path over (pulse, tone) with parameters
/// `eta = (τ, v_x, v_y, Re α, Im α)` and a fixed geometry vector `g`.
pub fn path_mean(
    sched: &HopSchedule<f64>,
    spectrum: &[(f64, f64)],
    g: Vec2<f64>,
    es: f64,
    c: f64,
    eta: &[f64],
) -> Vec<Complex64> {
    let tau = eta[0];
    let r = g.dot(Vec2::new(eta[1], eta[2]));
    let alpha = Complex64::new(eta[3], eta[4]) * es.sqrt();
    let f_ref = sched.carrier_ref();
    let tau_ = std::f64::consts::TAU;
    let mut out = Vec::with_capacity(sched.pulses() * spectrum.len());
    for (&t, &f) in sched.times().iter().zip(sched.carriers()) {
        let slow = Complex64::cis(tau_ * (-(f - f_ref) * tau + f / c * r * t));
        for &(fk, sk) in spectrum {
            out.push(alpha * slow * sk * Complex64::cis(-tau_ * fk * tau));
        }
    }
    out
}
