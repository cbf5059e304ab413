//! Serializable run configuration and the scenario presets.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::estimators::{GnParams, SearchParams, StageAParams};
use crate::fisher::WeightForm;
use crate::geometry::{ring_points, NetworkLayout, TargetState, SPEED_OF_LIGHT};
use crate::linalg::Vec2;
use crate::scenario::Scenario;
use crate::schedule::{HopPattern, HopSchedule};
use crate::waveform::{Constellation, OfdmSpec, WaveformSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayoutConfig {
    Multistatic {
        tx: Vec<[f64; 2]>,
        rx: Vec<[f64; 2]>,
    },
    Monostatic {
        nodes: Vec<[f64; 2]>,
    },
    /// Monostatic nodes evenly spaced on a circle about the origin.
    Ring {
        count: usize,
        radius: f64,
        #[serde(default)]
        phase_deg: f64,
    },
    /// Transmitters and receivers on one circle at the given azimuths.
    MultistaticRing {
        radius: f64,
        tx_deg: Vec<f64>,
        rx_deg: Vec<f64>,
    },
}

fn on_circle(radius: f64, degrees: &[f64]) -> Vec<Vec2<f64>> {
    degrees
        .iter()
        .map(|d| {
            let a = d.to_radians();
            Vec2::new(radius * a.cos(), radius * a.sin())
        })
        .collect()
}

fn points(p: &[[f64; 2]]) -> Vec<Vec2<f64>> {
    p.iter().map(|&[x, y]| Vec2::new(x, y)).collect()
}

impl LayoutConfig {
    pub fn build(&self, c: f64) -> Result<NetworkLayout<f64>> {
        match self {
            LayoutConfig::Multistatic { tx, rx } => NetworkLayout::multistatic(points(tx), points(rx), c),
            LayoutConfig::Monostatic { nodes } => NetworkLayout::monostatic(points(nodes), c),
            LayoutConfig::Ring {
                count,
                radius,
                phase_deg,
            } => NetworkLayout::monostatic(ring_points(*count, *radius, phase_deg.to_radians()), c),
            LayoutConfig::MultistaticRing { radius, tx_deg, rx_deg } => {
                NetworkLayout::multistatic(on_circle(*radius, tx_deg), on_circle(*radius, rx_deg), c)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedLayout {
    pub name: String,
    pub layout: LayoutConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    /// [m]
    pub position: [f64; 2],
    /// [m/s]
    pub velocity: [f64; 2],
}

impl TargetConfig {
    pub fn state(&self) -> TargetState<f64> {
        TargetState::new(
            Vec2::new(self.position[0], self.position[1]),
            Vec2::new(self.velocity[0], self.velocity[1]),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default = "ScheduleConfig::default_pattern")]
    pub pattern: HopPattern,
    pub pulses: usize,
    /// [s]
    pub pri: f64,
    /// [Hz]
    pub f0: f64,
    /// [Hz]
    pub span: f64,
}

impl ScheduleConfig {
    fn default_pattern() -> HopPattern {
        HopPattern::Linear
    }

    pub fn build(&self) -> Result<HopSchedule<f64>> {
        HopSchedule::new(&self.pattern, self.pulses, self.pri, self.f0, self.span)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformConfig {
    /// |α|
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default = "one")]
    pub es: f64,
    /// Effective bandwidth [Hz].
    pub beta: f64,
    /// Per-pulse SNR `|α|² E_s / σ²` [dB].
    pub snr_db: f64,
}

fn one() -> f64 {
    1.0
}

fn light() -> f64 {
    SPEED_OF_LIGHT
}

impl WaveformConfig {
    pub fn build(&self, phase: f64) -> Result<WaveformSpec<f64>> {
        let alpha = Complex64::from_polar(self.amplitude, phase);
        let sigma = crate::waveform::sigma_from_snr(self.snr_db, alpha, self.es);
        WaveformSpec::new(alpha, self.es, self.beta, sigma)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub layout: LayoutConfig,
    /// Propagation speed [m/s].
    #[serde(default = "light")]
    pub c: f64,
    pub target: TargetConfig,
    pub schedule: ScheduleConfig,
    pub waveform: WaveformConfig,
}

impl ScenarioConfig {
    /// Scenario with centered schedules and zero-phase gains on every path.
    pub fn build(&self) -> Result<Scenario<f64>> {
        let layout = self.layout.build(self.c)?;
        let schedule = self.schedule.build()?.center().0;
        let waveform = self.waveform.build(0.0)?;
        Ok(Scenario::uniform(layout, self.target.state(), schedule, waveform))
    }

    pub fn with_layout(&self, layout: &LayoutConfig) -> Self {
        ScenarioConfig {
            layout: layout.clone(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Synthesized span at the scenario's pulse count.
    Span,
    /// Pulse count at the scenario's span.
    Pulses,
    /// Every (span, pulses) pair.
    Joint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrlbSweepConfig {
    pub axis: SweepAxis,
    /// [Hz]
    #[serde(default)]
    pub spans: Vec<f64>,
    #[serde(default)]
    pub pulses: Vec<usize>,
    /// Layouts to evaluate; the scenario layout when empty.
    #[serde(default)]
    pub layouts: Vec<NamedLayout>,
}

impl Default for CrlbSweepConfig {
    fn default() -> Self {
        CrlbSweepConfig {
            axis: SweepAxis::Span,
            spans: (1..=40).map(|i| 50e6 * i as f64).collect(),
            pulses: vec![4, 8, 12, 16, 24, 32, 48, 64],
            layouts: vec![],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Mle,
    Tsif,
}

impl EstimatorKind {
    pub fn id(self) -> &'static str {
        match self {
            EstimatorKind::Mle => "mle",
            EstimatorKind::Tsif => "tsif",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MseConfig {
    pub snr_db: Vec<f64>,
    #[serde(default = "MseConfig::default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub search: SearchParams,
    #[serde(default)]
    pub stage_a: StageAParams,
    #[serde(default)]
    pub gn: GnParams,
    /// Center of the MLE box and TSIF windows; the truth when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<TargetConfig>,
}

impl MseConfig {
    fn default_estimators() -> Vec<EstimatorKind> {
        vec![EstimatorKind::Mle, EstimatorKind::Tsif]
    }
}

impl Default for MseConfig {
    fn default() -> Self {
        MseConfig {
            snr_db: vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            estimators: Self::default_estimators(),
            search: SearchParams::default(),
            stage_a: StageAParams::default(),
            gn: GnParams::default(),
            prior: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatmapConfig {
    /// Grid covers `[-extent, extent]²` [m].
    pub extent: f64,
    pub points: usize,
    /// Position CRLB trace threshold [m²].
    pub threshold: f64,
    #[serde(default)]
    pub layouts: Vec<NamedLayout>,
}

impl Default for HeatmapConfig {
    fn default() -> Self {
        HeatmapConfig {
            extent: 2000.0,
            points: 41,
            threshold: 2e-5,
            layouts: vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaOfdmConfig {
    pub ofdm: OfdmSpec,
    pub draws: usize,
}

impl Default for BetaOfdmConfig {
    fn default() -> Self {
        BetaOfdmConfig {
            ofdm: OfdmSpec {
                n_sub: 1024,
                spacing: 1.62e3,
                constellation: Constellation::Qam16,
                active: None,
            },
            draws: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// Master seed; the CLI falls back to `ISAC_LAB_SEED`, then to 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "ExperimentSection::default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub weight_form: WeightForm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crlb_sweep: Option<CrlbSweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mse_vs_snr: Option<MseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heatmap: Option<HeatmapConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_ofdm: Option<BetaOfdmConfig>,
}

impl ExperimentSection {
    fn default_trials() -> usize {
        200
    }
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            seed: None,
            trials: Self::default_trials(),
            weight_form: WeightForm::Exact,
            crlb_sweep: None,
            mse_vs_snr: None,
            heatmap: None,
            beta_ofdm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "OutputSection::default_dir")]
    pub dir: String,
    #[serde(default)]
    pub prefix: String,
}

impl OutputSection {
    fn default_dir() -> String {
        "out".into()
    }
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: Self::default_dir(),
            prefix: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Scenario presets for the evaluation settings: 28 GHz nominal carrier,
/// 2 GHz span, 12 pulses at 1 ms, 48 MHz effective bandwidth.
pub mod presets {
    use super::*;

    pub fn multistatic_3x3() -> LayoutConfig {
        LayoutConfig::MultistaticRing {
            radius: 1000.0,
            tx_deg: vec![0.0, 120.0, 240.0],
            rx_deg: vec![60.0, 180.0, 300.0],
        }
    }

    pub fn monostatic_ring(count: usize) -> LayoutConfig {
        LayoutConfig::Ring {
            count,
            radius: 1000.0,
            phase_deg: 0.0,
        }
    }

    pub fn target() -> TargetConfig {
        TargetConfig {
            position: [300.0, 200.0],
            velocity: [20.0, 15.0],
        }
    }

    /// Palindromic hops so the delay-velocity coupling vanishes.
    pub fn full_scale(layout: LayoutConfig) -> ScenarioConfig {
        ScenarioConfig {
            layout,
            c: SPEED_OF_LIGHT,
            target: target(),
            schedule: ScheduleConfig {
                pattern: HopPattern::Palindromic,
                pulses: 12,
                pri: 1e-3,
                f0: 28e9,
                span: 2e9,
            },
            waveform: WaveformConfig {
                amplitude: 1.0,
                es: 1.0,
                beta: 48e6,
                snr_db: 0.0,
            },
        }
    }

    /// Low-carrier configuration where finite differences are well
    /// conditioned.
    pub fn desk() -> ScenarioConfig {
        ScenarioConfig {
            layout: multistatic_3x3(),
            c: SPEED_OF_LIGHT,
            target: target(),
            schedule: ScheduleConfig {
                pattern: HopPattern::Linear,
                pulses: 8,
                pri: 1e-3,
                f0: 1e6,
                span: 2e5,
            },
            waveform: WaveformConfig {
                amplitude: 1.0,
                es: 1.0,
                beta: 5e4,
                snr_db: 0.0,
            },
        }
    }

    /// 5-BS monostatic ring scaled down in carrier and span so the
    /// likelihood is resolvable by grid search at desk cost. The slow-time
    /// samples carry no fast-time bandwidth, so `beta` is 0.
    pub fn scaled_mc() -> ScenarioConfig {
        ScenarioConfig {
            layout: monostatic_ring(5),
            c: SPEED_OF_LIGHT,
            target: target(),
            schedule: ScheduleConfig {
                pattern: HopPattern::Palindromic,
                pulses: 12,
                pri: 1e-3,
                f0: 1e9,
                span: 1e6,
            },
            waveform: WaveformConfig {
                amplitude: 1.0,
                es: 1.0,
                beta: 0.0,
                snr_db: 30.0,
            },
        }
    }

    /// Search box and resolutions matched to [`scaled_mc`].
    pub fn scaled_mc_search() -> SearchParams {
        SearchParams {
            pos_half_width: 500.0,
            vel_half_width: 50.0,
            coarse_points: 15,
            keep: 5,
            refine_factor: 3,
            pos_resolution: 0.005,
            vel_resolution: 0.0005,
        }
    }

    pub fn scaled_mc_gn() -> GnParams {
        GnParams {
            pos_scale: 0.005,
            vel_scale: 0.0005,
            ..GnParams::default()
        }
    }
}
