//! Run configuration: a human-readable TOML file defining the wrist, the
//! scenario, training, and tuning parameters. Unknown keys are rejected.
//! All angles in the file are degrees; everything else is SI.

use std::path::{Path, PathBuf};

use nalgebra::Vector2;

use crate::control::{PidGains, SmcGains, SwitchingShape};
use crate::dynamics::{antagonistic_pair, BendingMode, TendonRoute, WristModel};
use crate::error::{Error, Result};
use crate::kinematics::SegmentGeometry;
use crate::neural::{Activation, TrainingConfig};
use crate::sim::{
    ControllerKind, Direction, DisturbancePulse, ReferenceShape, ReferenceSource, Scenario,
};
use crate::tuning::PsoConfig;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WristSection {
    pub segments: usize,
    /// Arc length per segment (m).
    pub segment_length: f64,
    /// Chord point mass per segment (kg).
    pub chord_mass: f64,
    /// Stiffness per generalized coordinate (N·m/rad).
    pub stiffness: f64,
    /// Damping per generalized coordinate (N·m·s/rad).
    pub damping: f64,
    /// Damping on the augmented joint rates (N·m·s per unit rate).
    pub augmented_damping: f64,
    /// In-plane gravity (m/s^2).
    pub gravity: [f64; 2],
    /// Tendon moment arm (m).
    pub tendon_radius: f64,
    /// Motion-range bound per coordinate (deg).
    pub theta_max_deg: f64,
}

impl Default for WristSection {
    fn default() -> Self {
        let model = WristModel::default();
        WristSection {
            segments: model.n(),
            segment_length: model.geometry[0].length,
            chord_mass: model.chord_mass,
            stiffness: model.stiffness,
            damping: model.damping,
            augmented_damping: model.augmented_damping,
            gravity: [model.gravity.x, model.gravity.y],
            tendon_radius: model.tendon_radius,
            theta_max_deg: model.theta_max.to_degrees(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmcSection {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    #[serde(default)]
    pub switching: SwitchingShape,
}

impl Default for SmcSection {
    /// Bundled gains reproducing the reference step-response study.
    fn default() -> Self {
        SmcSection {
            p1: 1000.0,
            p2: 1e-3,
            p3: 1000.0,
            switching: SwitchingShape::Tanh,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidSection {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl Default for PidSection {
    fn default() -> Self {
        PidSection {
            kp: 1e4,
            ki: 5e3,
            kd: 2e3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSpec {
    pub start: f64,
    pub end: f64,
    /// Tip force (N).
    pub force: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub mode: BendingMode,
    pub controller: ControllerKind,
    pub direction: Direction,
    pub target_deg: f64,
    pub duration: f64,
    pub control_period: f64,
    pub substeps: u32,
    /// "step" or "ramp".
    pub reference: String,
    pub ramp_duration: f64,
    /// "direct" or "network".
    pub source: String,
    /// Network file used when `source = "network"`.
    pub network: PathBuf,
    pub seed: u64,
    pub known_tip_force: [f64; 2],
    pub initial_angle: f64,
    pub initial_rate: f64,
    pub smc: SmcSection,
    pub pid: PidSection,
    /// Explicit schedule; when absent, radial and flexion scenarios default
    /// to one 1 N, 0.5 s pulse mid-episode.
    pub disturbance: Option<Vec<PulseSpec>>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            mode: BendingMode::Uniform,
            controller: ControllerKind::Smc,
            direction: Direction::Ulnar,
            target_deg: 30.0,
            duration: 6.0,
            control_period: 1e-3,
            substeps: 1000,
            reference: "ramp".into(),
            ramp_duration: 1.2,
            source: "network".into(),
            network: PathBuf::from("models/ik.json"),
            seed: 42,
            known_tip_force: [0.0, 0.0],
            initial_angle: 0.0,
            initial_rate: 0.0,
            smc: SmcSection::default(),
            pid: PidSection::default(),
            disturbance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub samples: usize,
    pub train_fraction: f64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let cfg = TrainingConfig::default();
        TrainingSection {
            samples: 1000,
            train_fraction: 0.75,
            hidden: cfg.hidden,
            activation: cfg.activation,
            batch_size: cfg.batch_size,
            epochs: cfg.epochs,
            lr_initial: cfg.lr_initial,
            lr_final: cfg.lr_final,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            weight_decay: cfg.weight_decay,
            seed: cfg.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuningSection {
    pub swarm: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub bounds_low: f64,
    pub bounds_high: f64,
    pub seed: u64,
    pub weight_error: f64,
    pub weight_chatter: f64,
    pub initial: Option<[f64; 3]>,
    /// Shortened episode evaluated by the objective.
    pub episode_duration: f64,
    pub episode_ramp: f64,
    pub episode_substeps: u32,
}

impl Default for TuningSection {
    fn default() -> Self {
        let cfg = PsoConfig::default();
        TuningSection {
            swarm: cfg.swarm,
            iterations: cfg.iterations,
            inertia: cfg.inertia,
            cognitive: cfg.cognitive,
            social: cfg.social,
            bounds_low: cfg.bounds_low,
            bounds_high: cfg.bounds_high,
            seed: cfg.seed,
            weight_error: cfg.weight_error,
            weight_chatter: cfg.weight_chatter,
            initial: cfg.initial,
            episode_duration: 1.2,
            episode_ramp: 0.5,
            episode_substeps: 667,
        }
    }
}

/// The whole run configuration.
#[derive(Debug, Clone, PartialEq, Default, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub wrist: WristSection,
    pub scenario: ScenarioSection,
    pub training: TrainingSection,
    pub tuning: TuningSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact {
                path: path.display().to_string(),
            });
        }
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn wrist_model(&self) -> Result<WristModel> {
        let w = &self.wrist;
        let model = WristModel {
            geometry: SegmentGeometry::uniform(w.segments, w.segment_length)?,
            chord_mass: w.chord_mass,
            stiffness: w.stiffness,
            damping: w.damping,
            augmented_damping: w.augmented_damping,
            gravity: Vector2::new(w.gravity[0], w.gravity[1]),
            tendon_radius: w.tendon_radius,
            tendons: antagonistic_pair(w.segments, w.tendon_radius),
            theta_max: w.theta_max_deg.to_radians(),
        };
        model.validate()?;
        Ok(model)
    }

    /// Tendon routing derived from the section (one antagonistic pair).
    pub fn tendon_routes(&self) -> Vec<TendonRoute> {
        antagonistic_pair(self.wrist.segments, self.wrist.tendon_radius)
    }

    /// Build the scenario; `source` resolves "network" against the given
    /// base directory unless the configured path is absolute.
    pub fn scenario(&self, base_dir: &Path) -> Result<Scenario> {
        let s = &self.scenario;
        let shape = match s.reference.as_str() {
            "step" => ReferenceShape::Step,
            "ramp" => ReferenceShape::Ramp {
                duration: s.ramp_duration,
            },
            other => {
                return Err(Error::Config(format!(
                    "reference must be \"step\" or \"ramp\", got {other:?}"
                )))
            }
        };
        let source = match s.source.as_str() {
            "direct" => ReferenceSource::Direct,
            "network" => {
                let path = if s.network.is_absolute() {
                    s.network.clone()
                } else {
                    base_dir.join(&s.network)
                };
                ReferenceSource::File(path)
            }
            other => {
                return Err(Error::Config(format!(
                    "source must be \"direct\" or \"network\", got {other:?}"
                )))
            }
        };
        let disturbances = match &s.disturbance {
            Some(pulses) => pulses
                .iter()
                .map(|p| DisturbancePulse {
                    start: p.start,
                    end: p.end,
                    force: p.force,
                })
                .collect(),
            None => match s.direction {
                // The disturbance study covers the radial and flexion
                // scenarios: one 1 N tip pulse for 0.5 s mid-episode.
                Direction::Radial | Direction::Flexion => vec![DisturbancePulse {
                    start: 0.5 * s.duration,
                    end: 0.5 * s.duration + 0.5,
                    force: [0.0, 1.0],
                }],
                _ => Vec::new(),
            },
        };

        let scenario = Scenario {
            model: self.wrist_model()?,
            mode: s.mode,
            controller: s.controller,
            smc_gains: SmcGains {
                p1: s.smc.p1,
                p2: s.smc.p2,
                p3: s.smc.p3,
                switching: s.smc.switching,
            },
            pid_gains: PidGains {
                kp: s.pid.kp,
                ki: s.pid.ki,
                kd: s.pid.kd,
            },
            direction: s.direction,
            target: s.target_deg.to_radians(),
            duration: s.duration,
            control_period: s.control_period,
            substeps: s.substeps,
            shape,
            source,
            disturbances,
            known_tip_force: Vector2::new(s.known_tip_force[0], s.known_tip_force[1]),
            initial_angle: s.initial_angle,
            initial_rate: s.initial_rate,
            seed: s.seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn training_config(&self) -> TrainingConfig {
        let t = &self.training;
        TrainingConfig {
            hidden: t.hidden.clone(),
            activation: t.activation,
            batch_size: t.batch_size,
            epochs: t.epochs,
            lr_initial: t.lr_initial,
            lr_final: t.lr_final,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
            weight_decay: t.weight_decay,
            seed: t.seed,
        }
    }

    pub fn pso_config(&self) -> PsoConfig {
        let t = &self.tuning;
        PsoConfig {
            swarm: t.swarm,
            iterations: t.iterations,
            inertia: t.inertia,
            cognitive: t.cognitive,
            social: t.social,
            bounds_low: t.bounds_low,
            bounds_high: t.bounds_high,
            seed: t.seed,
            weight_error: t.weight_error,
            weight_chatter: t.weight_chatter,
            initial: t.initial,
        }
    }

    /// The shortened, network-free episode the tuning objective evaluates.
    pub fn tuning_scenario(&self) -> Result<Scenario> {
        let mut scenario = self.scenario(Path::new("."))?;
        scenario.controller = ControllerKind::Smc;
        scenario.source = ReferenceSource::Direct;
        scenario.duration = self.tuning.episode_duration;
        scenario.shape = ReferenceShape::Ramp {
            duration: self.tuning.episode_ramp,
        };
        scenario.substeps = self.tuning.episode_substeps;
        scenario.disturbances = Vec::new();
        scenario.validate()?;
        Ok(scenario)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let config = RunConfig::default();
        let text = config.to_toml().unwrap();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml("[wrist]\nsegments = 4\nbogus_key = 1\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let err = RunConfig::from_toml("[nonsense]\nx = 1\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn partial_files_fill_with_defaults() {
        let config = RunConfig::from_toml("[scenario]\ntarget_deg = 20.0\n").unwrap();
        assert_eq!(config.scenario.target_deg, 20.0);
        assert_eq!(config.wrist.segments, 4);
        assert_eq!(config.training.epochs, 100);
    }

    #[test]
    fn scenario_builds_with_direct_source() {
        let mut config = RunConfig::default();
        config.scenario.source = "direct".into();
        let scenario = config.scenario(Path::new(".")).unwrap();
        assert!(matches!(scenario.source, ReferenceSource::Direct));
        assert!((scenario.target - 30f64.to_radians()).abs() < 1e-15);
        assert!(scenario.disturbances.is_empty()); // ulnar default
    }

    #[test]
    fn radial_and_flexion_default_to_one_pulse() {
        let mut config = RunConfig::default();
        config.scenario.source = "direct".into();
        config.scenario.direction = Direction::Radial;
        let scenario = config.scenario(Path::new(".")).unwrap();
        assert_eq!(scenario.disturbances.len(), 1);
        assert_eq!(scenario.disturbances[0].force, [0.0, 1.0]);
        assert!((scenario.disturbances[0].end - scenario.disturbances[0].start - 0.5).abs() < 1e-12);

        config.scenario.disturbance = Some(vec![]);
        let scenario = config.scenario(Path::new(".")).unwrap();
        assert!(scenario.disturbances.is_empty()); // explicit empty wins
    }

    #[test]
    fn bad_reference_and_source_strings_error() {
        let mut config = RunConfig::default();
        config.scenario.reference = "triangle".into();
        assert!(config.scenario(Path::new(".")).is_err());
        let mut config = RunConfig::default();
        config.scenario.source = "telepathy".into();
        assert!(config.scenario(Path::new(".")).is_err());
    }
}
