//! Slow-time/carrier hop schedules and the moments the Fisher analysis uses.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Carrier ordering across the pulses of one CPI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HopPattern {
    /// Evenly spaced carriers in increasing order.
    Linear,
    /// The linear carrier set in a seeded random order.
    Permuted { seed: u64 },
    /// V-shaped hop: `f[p] == f[P-1-p]`, highest carriers at both ends.
    Palindromic,
    /// Caller-supplied carriers [Hz], one per pulse.
    Custom { carriers: Vec<f64> },
}

/// Pulse instants and carriers of one path.
///
/// Carriers are stored absolute. `carrier_ref` is the frequency removed from
/// the delay phase, so the delay term of pulse `p` rotates with
/// `carriers[p] - carrier_ref` while the Doppler term keeps the absolute
/// carrier. A raw schedule has `carrier_ref == 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct HopSchedule<T> {
    times: Vec<T>,
    carriers: Vec<T>,
    carrier_ref: T,
    pri: T,
    f0: T,
    span: T,
}

/// Sums and moments of a schedule. Sums run over pulses; `var_*` and `cov_*`
/// are per-pulse averages except `var_t`, which is the centered sum
/// `S2 - S1²/S0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleMoments<T> {
    pub s0: T,
    pub s1: T,
    pub s2: T,
    /// Sum of delay carriers `f_p - carrier_ref`.
    pub f1: T,
    pub f2: T,
    pub var_t: T,
    pub var_f: T,
    /// Mean of `z_p = f_p t_p` (absolute carriers).
    pub mean_z: T,
    pub sum_z: T,
    pub sum_z2: T,
    pub var_z: T,
    /// `(1/P) Σ (t_p - t̄) f_p²`.
    pub cov_t_fc2: T,
    /// Σ of delay carrier times `z_p`.
    pub sum_fz: T,
    /// Per-pulse covariance of delay carriers and `z_p`.
    pub cov_f_z: T,
    /// rms of the absolute carriers, a magnitude scale for `f1`.
    pub carrier_rms: T,
}

impl<T: Scalar> ScheduleMoments<T> {
    /// True when pulse times and delay carriers have zero mean up to rounding.
    pub fn is_centered(&self) -> bool {
        let tol = T::lit(1e-9);
        self.s1.abs() <= tol * (self.s0 * self.s2).sqrt() && self.f1.abs() <= tol * self.s0 * self.carrier_rms
    }
}

fn mean<T: Scalar>(xs: &[T]) -> T {
    xs.iter().fold(T::zero(), |a, &x| a + x) / T::count(xs.len())
}

fn sum<T: Scalar>(xs: impl Iterator<Item = T>) -> T {
    xs.fold(T::zero(), |a, x| a + x)
}

impl<T: Scalar> HopSchedule<T> {
    /// Pulses at `t_p = p·pri` with carriers from `pattern` around `f0`.
    pub fn new(pattern: &HopPattern, pulses: usize, pri: T, f0: T, span: T) -> Result<Self> {
        if pulses < 2 {
            return Err(Error::BadSchedule(format!("need at least 2 pulses, got {pulses}")));
        }
        if !(pri > T::zero()) || !pri.is_finite() {
            return Err(Error::BadSchedule(format!("pri must be positive, got {pri}")));
        }
        if !(span >= T::zero()) || !span.is_finite() {
            return Err(Error::BadSchedule(format!("span must be nonnegative, got {span}")));
        }
        let last = T::count(pulses - 1);
        let half = T::lit(0.5);
        let linear: Vec<T> = (0..pulses).map(|p| f0 + span * (T::count(p) / last - half)).collect();
        let carriers = match pattern {
            HopPattern::Linear => linear,
            HopPattern::Permuted { seed } => {
                let mut c = linear;
                c.shuffle(&mut ChaCha8Rng::seed_from_u64(*seed));
                c
            }
            HopPattern::Palindromic => (0..pulses)
                .map(|p| {
                    let fold = (T::count(2 * p) - last).abs() / last;
                    f0 + span * (fold - half)
                })
                .collect(),
            HopPattern::Custom { carriers } => {
                if carriers.len() != pulses {
                    return Err(Error::BadSchedule(format!(
                        "custom carrier list has {} entries for {pulses} pulses",
                        carriers.len()
                    )));
                }
                carriers.iter().map(|&f| T::lit(f)).collect()
            }
        };
        let times = (0..pulses).map(|p| T::count(p) * pri).collect();
        Self::from_parts(times, carriers, pri, f0, span)
    }

    /// Arbitrary strictly increasing pulse times with absolute carriers.
    pub fn from_parts(times: Vec<T>, carriers: Vec<T>, pri: T, f0: T, span: T) -> Result<Self> {
        if times.len() != carriers.len() {
            return Err(Error::BadSchedule(format!(
                "{} pulse times but {} carriers",
                times.len(),
                carriers.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::BadSchedule("need at least 2 pulses".into()));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::BadSchedule(
                "pulse times must be finite and strictly increasing".into(),
            ));
        }
        if carriers.iter().any(|&f| !(f > T::zero()) || !f.is_finite()) {
            return Err(Error::BadSchedule("carriers must be positive and finite".into()));
        }
        Ok(HopSchedule {
            times,
            carriers,
            carrier_ref: T::zero(),
            pri,
            f0,
            span,
        })
    }

    pub fn pulses(&self) -> usize {
        self.times.len()
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    /// Absolute carriers [Hz].
    pub fn carriers(&self) -> &[T] {
        &self.carriers
    }

    pub fn carrier_ref(&self) -> T {
        self.carrier_ref
    }

    /// Carriers seen by the delay phase, `f_p - carrier_ref`.
    pub fn delay_carriers(&self) -> Vec<T> {
        self.carriers.iter().map(|&f| f - self.carrier_ref).collect()
    }

    pub fn pri(&self) -> T {
        self.pri
    }

    pub fn f0(&self) -> T {
        self.f0
    }

    pub fn span(&self) -> T {
        self.span
    }

    /// Synthesized aperture `t_{P-1} - t_0`.
    pub fn duration(&self) -> T {
        self.times[self.times.len() - 1] - self.times[0]
    }

    pub fn max_carrier(&self) -> T {
        self.carriers.iter().fold(T::zero(), |a, &f| a.max(f))
    }

    /// Shifts times to zero mean and moves the mean delay carrier into
    /// `carrier_ref`. Returns the centered schedule and the removed means.
    pub fn center(&self) -> (Self, T, T) {
        let mean_t = mean(&self.times);
        let mean_f = mean(&self.delay_carriers());
        let centered = HopSchedule {
            times: self.times.iter().map(|&t| t - mean_t).collect(),
            carriers: self.carriers.clone(),
            carrier_ref: self.carrier_ref + mean_f,
            pri: self.pri,
            f0: self.f0,
            span: self.span,
        };
        (centered, mean_t, mean_f)
    }

    /// Moments of this schedule, or of its centered version when `centered`.
    pub fn moments(&self, centered: bool) -> ScheduleMoments<T> {
        if centered {
            return self.center().0.moments(false);
        }
        let p = T::count(self.pulses());
        let t = &self.times;
        let fd = self.delay_carriers();
        let z: Vec<T> = t.iter().zip(&self.carriers).map(|(&t, &f)| t * f).collect();

        let s1 = sum(t.iter().copied());
        let s2 = sum(t.iter().map(|&x| x * x));
        let mean_t = s1 / p;
        let f1 = sum(fd.iter().copied());
        let f2 = sum(fd.iter().map(|&x| x * x));
        let mean_f = f1 / p;
        let sum_z = sum(z.iter().copied());
        let sum_z2 = sum(z.iter().map(|&x| x * x));
        let mean_z = sum_z / p;

        ScheduleMoments {
            s0: p,
            s1,
            s2,
            f1,
            f2,
            var_t: sum(t.iter().map(|&x| (x - mean_t) * (x - mean_t))),
            var_f: sum(fd.iter().map(|&x| (x - mean_f) * (x - mean_f))) / p,
            mean_z,
            sum_z,
            sum_z2,
            var_z: sum(z.iter().map(|&x| (x - mean_z) * (x - mean_z))) / p,
            cov_t_fc2: sum(t.iter().zip(&self.carriers).map(|(&t, &f)| (t - mean_t) * f * f)) / p,
            sum_fz: sum(fd.iter().zip(&z).map(|(&f, &z)| f * z)),
            cov_f_z: sum(fd.iter().zip(&z).map(|(&f, &z)| (f - mean_f) * (z - mean_z))) / p,
            carrier_rms: (sum(self.carriers.iter().map(|&f| f * f)) / p).sqrt(),
        }
    }
}
