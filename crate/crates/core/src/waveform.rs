//! Per-path signal strength, the SNR convention and OFDM effective-bandwidth
//! draws.

use num_complex::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Signal parameters of one path. SNR is `|alpha|² E_s / sigma_w2` per pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveformSpec<T> {
    pub alpha: Complex<T>,
    pub es: T,
    /// Effective (rms) bandwidth about the spectrum centroid [Hz].
    pub beta: T,
    /// Total complex noise variance per sample.
    pub sigma_w2: T,
}

impl<T: Scalar> WaveformSpec<T> {
    pub fn new(alpha: Complex<T>, es: T, beta: T, sigma_w2: T) -> Result<Self> {
        let ok = es > T::zero() && beta >= T::zero() && sigma_w2 > T::zero();
        if !ok || !es.is_finite() || !beta.is_finite() || !sigma_w2.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "waveform needs E_s > 0, beta >= 0, sigma_w2 > 0 (got {es}, {beta}, {sigma_w2})"
            )));
        }
        Ok(WaveformSpec {
            alpha,
            es,
            beta,
            sigma_w2,
        })
    }

    /// Unit-modulus gain with phase `phase` and noise set from `snr_db`.
    pub fn at_snr(phase: T, es: T, beta: T, snr_db: T) -> Result<Self> {
        let alpha = Complex::from_polar(T::one(), phase);
        Self::new(alpha, es, beta, sigma_from_snr(snr_db, alpha, es))
    }

    /// Linear per-pulse SNR.
    pub fn snr(&self) -> T {
        self.alpha.norm_sqr() * self.es / self.sigma_w2
    }
}

/// `sigma_w2 = |alpha|² E_s 10^(-snr_db/10)`.
pub fn sigma_from_snr<T: Scalar>(snr_db: T, alpha: Complex<T>, es: T) -> T {
    alpha.norm_sqr() * es * T::lit(10.0).powf(-snr_db / T::lit(10.0))
}

/// rms bandwidth of a sampled power spectrum, taken about its centroid.
pub fn effective_bandwidth<T: Scalar>(psd: &[(T, T)]) -> Result<T> {
    if psd
        .iter()
        .any(|&(f, p)| !(p >= T::zero()) || !f.is_finite() || !p.is_finite())
    {
        return Err(Error::InvalidParameter(
            "power densities must be finite and nonnegative".into(),
        ));
    }
    let total = psd.iter().fold(T::zero(), |a, &(_, p)| a + p);
    if !(total > T::zero()) {
        return Err(Error::EmptySpectrum);
    }
    let centroid = psd.iter().fold(T::zero(), |a, &(f, p)| a + f * p) / total;
    let second = psd.iter().fold(T::zero(), |a, &(f, p)| {
        let d = f - centroid;
        a + d * d * p
    }) / total;
    Ok(second.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constellation {
    Qpsk,
    Qam16,
    Qam64,
}

impl Constellation {
    /// Symbol with unit average power over the constellation.
    pub fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> Complex<f64> {
        let (levels, norm) = match self {
            Constellation::Qpsk => (2u32, 2.0f64),
            Constellation::Qam16 => (4, 10.0),
            Constellation::Qam64 => (8, 42.0),
        };
        let level = |i: u32| f64::from(2 * i) - f64::from(levels - 1);
        let re = level(rng.random_range(0..levels));
        let im = level(rng.random_range(0..levels));
        Complex::new(re, im) / norm.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfdmSpec {
    pub n_sub: usize,
    /// Subcarrier spacing [Hz].
    pub spacing: f64,
    pub constellation: Constellation,
    /// Indices of active subcarriers; all are active when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active: Option<Vec<usize>>,
}

impl OfdmSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_sub == 0 || !(self.spacing > 0.0) || !self.spacing.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "ofdm needs n_sub >= 1 and spacing > 0 (got {}, {})",
                self.n_sub, self.spacing
            )));
        }
        if let Some(active) = &self.active {
            if active.is_empty() || active.iter().any(|&k| k >= self.n_sub) {
                return Err(Error::InvalidParameter(
                    "active subcarrier indices must be nonempty and below n_sub".into(),
                ));
            }
        }
        Ok(())
    }

    fn active_indices(&self) -> Vec<usize> {
        match &self.active {
            Some(a) => a.clone(),
            None => (0..self.n_sub).collect(),
        }
    }

    /// rms bandwidth of an evenly loaded comb of `n_sub` subcarriers.
    pub fn flat_comb_beta(&self) -> f64 {
        let n = self.n_sub as f64;
        self.spacing * ((n * n - 1.0) / 12.0).sqrt()
    }
}

/// Effective bandwidth of one random symbol realization.
pub fn draw_ofdm_beta<R: Rng + ?Sized>(spec: &OfdmSpec, rng: &mut R) -> Result<f64> {
    spec.validate()?;
    let psd: Vec<(f64, f64)> = spec
        .active_indices()
        .into_iter()
        .map(|k| (k as f64 * spec.spacing, spec.constellation.draw(rng).norm_sqr()))
        .collect();
    effective_bandwidth(&psd)
}
