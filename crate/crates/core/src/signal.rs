//! Post-matched-filter slow-time observations.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{path_geometries, NetworkLayout, TargetState};
use crate::schedule::HopSchedule;
use crate::waveform::WaveformSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct SlowTimeObservation {
    pub path: usize,
    pub samples: Vec<Complex64>,
}

/// Unit-modulus slow-time steering vector: pulse `p` carries
/// `exp(-j2π (f_p - f_ref) τ) · exp(+j2π (f_p / c) r t_p)`.
pub fn steering_vector(sched: &HopSchedule<f64>, tau: f64, r: f64, c: f64) -> Vec<Complex64> {
    let f_ref = sched.carrier_ref();
    sched
        .times()
        .iter()
        .zip(sched.carriers())
        .map(|(&t, &f)| {
            let cycles = -(f - f_ref) * tau + f / c * r * t;
            Complex64::cis(std::f64::consts::TAU * (cycles - cycles.round()))
        })
        .collect()
}

/// Circularly symmetric complex Gaussian draw with total variance `var`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Noiseless per-path means `alpha · φ(τ(x), gᵀv)`.
pub fn mean_observations(
    layout: &NetworkLayout<f64>,
    target: &TargetState<f64>,
    schedules: &[HopSchedule<f64>],
    wfs: &[WaveformSpec<f64>],
) -> Result<Vec<Vec<Complex64>>> {
    let paths = path_geometries(layout, target)?;
    for (what, got) in [("schedules", schedules.len()), ("waveforms", wfs.len())] {
        if got != paths.len() {
            return Err(Error::DimensionMismatch {
                what,
                expected: paths.len(),
                got,
            });
        }
    }
    Ok(paths
        .iter()
        .zip(schedules)
        .zip(wfs)
        .map(|((pg, sched), wf)| {
            let scale = wf.alpha * wf.es.sqrt();
            steering_vector(sched, pg.tau, pg.radial_speed(target.velocity), layout.c())
                .into_iter()
                .map(|s| scale * s)
                .collect()
        })
        .collect())
}

/// Noisy observations for every path; noise is drawn path by path, pulse by
/// pulse from `rng`.
pub fn synthesize<R: Rng + ?Sized>(
    layout: &NetworkLayout<f64>,
    target: &TargetState<f64>,
    schedules: &[HopSchedule<f64>],
    wfs: &[WaveformSpec<f64>],
    rng: &mut R,
) -> Result<Vec<SlowTimeObservation>> {
    let means = mean_observations(layout, target, schedules, wfs)?;
    Ok(means
        .into_iter()
        .zip(wfs)
        .enumerate()
        .map(|(path, (mean, wf))| SlowTimeObservation {
            path,
            samples: mean.into_iter().map(|m| m + complex_normal(rng, wf.sigma_w2)).collect(),
        })
        .collect())
}
