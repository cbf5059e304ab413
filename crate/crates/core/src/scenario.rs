//! A layout, a target and per-path schedules and waveforms, with the bounds
//! they imply.

use crate::error::{Error, Result};
use crate::fisher::{self, CrlbResult, NetworkFim, PathWeights, WeightForm};
use crate::geometry::{path_geometries, NetworkLayout, PathGeometry, TargetState};
use crate::scalar::Scalar;
use crate::schedule::HopSchedule;
use crate::waveform::WaveformSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    pub layout: NetworkLayout<T>,
    pub target: TargetState<T>,
    /// One per path, in path order.
    pub schedules: Vec<HopSchedule<T>>,
    /// One per path, in path order.
    pub waveforms: Vec<WaveformSpec<T>>,
}

impl<T: Scalar> Scenario<T> {
    pub fn new(
        layout: NetworkLayout<T>,
        target: TargetState<T>,
        schedules: Vec<HopSchedule<T>>,
        waveforms: Vec<WaveformSpec<T>>,
    ) -> Result<Self> {
        let l = layout.path_count();
        for (what, got) in [("schedules", schedules.len()), ("waveforms", waveforms.len())] {
            if got != l {
                return Err(Error::DimensionMismatch { what, expected: l, got });
            }
        }
        Ok(Scenario {
            layout,
            target,
            schedules,
            waveforms,
        })
    }

    /// Every path shares `schedule` and `waveform`.
    pub fn uniform(
        layout: NetworkLayout<T>,
        target: TargetState<T>,
        schedule: HopSchedule<T>,
        waveform: WaveformSpec<T>,
    ) -> Self {
        let l = layout.path_count();
        Scenario {
            layout,
            target,
            schedules: vec![schedule; l],
            waveforms: vec![waveform; l],
        }
    }

    pub fn path_count(&self) -> usize {
        self.layout.path_count()
    }

    pub fn geometries(&self) -> Result<Vec<PathGeometry<T>>> {
        path_geometries(&self.layout, &self.target)
    }

    /// The same scenario with every schedule centered.
    pub fn centered(&self) -> Self {
        Scenario {
            schedules: self.schedules.iter().map(|s| s.center().0).collect(),
            ..self.clone()
        }
    }

    pub fn weights(&self, form: WeightForm) -> Result<Vec<PathWeights<T>>> {
        let c = self.layout.c();
        self.schedules
            .iter()
            .zip(&self.waveforms)
            .map(|(s, wf)| fisher::path_weights(&s.moments(true), wf, c, form))
            .collect()
    }

    pub fn network_fim(&self, form: WeightForm) -> Result<NetworkFim<T>> {
        fisher::network_fim(&self.weights(form)?, &self.geometries()?, self.layout.c())
    }

    pub fn crlb(&self, form: WeightForm) -> Result<CrlbResult<T>> {
        fisher::crlb(&self.network_fim(form)?.state_fim)
    }

    /// The same scenario with `f` applied to every waveform.
    pub fn map_waveforms(&self, f: impl Fn(&WaveformSpec<T>) -> WaveformSpec<T>) -> Self {
        Scenario {
            waveforms: self.waveforms.iter().map(f).collect(),
            ..self.clone()
        }
    }

    /// The same scenario moved to another target position.
    pub fn with_target(&self, target: TargetState<T>) -> Self {
        Scenario { target, ..self.clone() }
    }
}
