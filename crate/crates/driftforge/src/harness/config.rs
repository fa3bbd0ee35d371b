//! Declarative experiment configuration: versioned JSON wrapping a
//! dataset source, a timeline, and optional sweep axes. Configs
//! round-trip exactly through serde so re-running a file reproduces the
//! original experiment.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::data::DatasetSource;
use crate::optim::ScheduleSpec;
use crate::timeline::TimelineConfig;
use crate::triggers::TriggerSpec;

pub const CONFIG_VERSION: u32 = 1;

/// Grid axes for [`crate::harness::run_sweep`]. An omitted axis keeps the
/// base value from the timeline config; a declared axis must be nonempty.
/// Cell ordering is the Cartesian product in field order (poison ratio
/// outermost, poisoned-update count innermost).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepAxes {
    /// Child run seeds derive from this and the (cell, instance) index,
    /// so parallel execution cannot change any result.
    #[serde(default)]
    pub master_seed: u64,
    /// Runs per cell; defaults to the timeline seed count.
    #[serde(default)]
    pub instances_per_cell: Option<usize>,
    #[serde(default)]
    pub poison_ratios: Option<Vec<f64>>,
    #[serde(default)]
    pub triggers: Option<Vec<TriggerSpec>>,
    #[serde(default)]
    pub drift_steps: Option<Vec<f64>>,
    #[serde(default)]
    pub learning_rates: Option<Vec<f64>>,
    #[serde(default)]
    pub epochs: Option<Vec<usize>>,
    #[serde(default)]
    pub poisoned_update_counts: Option<Vec<usize>>,
}

impl SweepAxes {
    fn validate(&self, timeline: &TimelineConfig) -> Result<()> {
        fn nonempty<T>(axis: &Option<Vec<T>>, name: &str) -> Result<()> {
            if let Some(v) = axis {
                if v.is_empty() {
                    return Err(Error::Config(format!("sweep axis {name} is empty")));
                }
            }
            Ok(())
        }
        nonempty(&self.poison_ratios, "poison_ratios")?;
        nonempty(&self.triggers, "triggers")?;
        nonempty(&self.drift_steps, "drift_steps")?;
        nonempty(&self.learning_rates, "learning_rates")?;
        nonempty(&self.epochs, "epochs")?;
        nonempty(&self.poisoned_update_counts, "poisoned_update_counts")?;
        if self.instances_per_cell == Some(0) {
            return Err(Error::Config("instances_per_cell must be >= 1".into()));
        }
        let poison_axes = self.poison_ratios.is_some()
            || self.triggers.is_some()
            || self.poisoned_update_counts.is_some();
        if poison_axes && timeline.poison.is_none() {
            return Err(Error::Config(
                "poison sweep axes need a poison plan in the timeline config".into(),
            ));
        }
        if self.learning_rates.is_some() {
            if let ScheduleSpec::InverseTime { .. } = timeline.update_train.schedule {
                return Err(Error::Config(
                    "learning_rates axis does not apply to an inverse-time schedule".into(),
                ));
            }
        }
        Ok(())
    }

    /// Number of grid cells (product of declared axis lengths).
    pub fn num_cells(&self) -> usize {
        fn len<T>(axis: &Option<Vec<T>>) -> usize {
            axis.as_ref().map_or(1, Vec::len)
        }
        len(&self.poison_ratios)
            * len(&self.triggers)
            * len(&self.drift_steps)
            * len(&self.learning_rates)
            * len(&self.epochs)
            * len(&self.poisoned_update_counts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub version: u32,
    pub name: String,
    pub dataset: DatasetSource,
    pub timeline: TimelineConfig,
    /// Seeds the D0/pool halving (independent of the run seeds).
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default)]
    pub sweep: Option<SweepAxes>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {}, this build reads version {CONFIG_VERSION}",
                self.version
            )));
        }
        if self.name.is_empty() {
            return Err(Error::Config("experiment name is empty".into()));
        }
        self.dataset.validate()?;
        self.timeline.validate()?;
        if let Some(sweep) = &self.sweep {
            sweep.validate(&self.timeline)?;
        }
        Ok(())
    }

    pub fn from_json(json: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = serde_json::from_str(json)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::drift::{DriftKind, DriftSpec};
    use crate::nn::{Architecture, InputShape, ModelSpec};
    use crate::optim::OptimizerConfig;
    use crate::timeline::{EvalMode, TimelineConfig};
    use crate::triggers::{PoisonPlan, TriggerSpec};

    pub(crate) fn small_config() -> ExperimentConfig {
        let model = ModelSpec {
            architecture: Architecture::Linear,
            input: InputShape {
                channels: 1,
                height: 8,
                width: 8,
            },
            num_classes: 3,
        };
        let mut train = OptimizerConfig::fine_tune_default();
        train.epochs = 2;
        train.batch_size = 16;
        ExperimentConfig {
            version: CONFIG_VERSION,
            name: "unit".into(),
            dataset: DatasetSource::Synthetic {
                num_classes: 3,
                samples_per_class: 20,
                image_size: 8,
                channels: 1,
                noise_std: 0.05,
                seed: 7,
                test_per_class: 8,
            },
            timeline: TimelineConfig {
                model,
                initial_train: train.clone(),
                update_train: train,
                drift: DriftSpec::new(DriftKind::Angle, 4.0).unwrap(),
                num_updates: 2,
                poison: Some(PoisonPlan::one_shot(
                    TriggerSpec::badnets_default(1),
                    0,
                    0.1,
                    0,
                )),
                probe: None,
                eval_mode: EvalMode::DriftedTest,
                seeds: vec![11, 12],
                gamma: 0.5,
                horizon: 14,
            },
            split_seed: 5,
            sweep: None,
            output_dir: None,
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let cfg = small_config();
        let json = cfg.to_json().unwrap();
        let back = ExperimentConfig::from_json(&json).unwrap();
        assert_eq!(back, cfg);
        // And a second serialization is byte-identical.
        assert_eq!(back.to_json().unwrap(), json);
    }

    #[test]
    fn version_mismatch_rejected() {
        let mut cfg = small_config();
        cfg.version = 99;
        let err = cfg.validate().unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn sweep_axis_rules() {
        let mut cfg = small_config();
        cfg.sweep = Some(SweepAxes {
            poison_ratios: Some(vec![]),
            ..SweepAxes::default()
        });
        assert!(cfg.validate().is_err());

        cfg.sweep = Some(SweepAxes {
            poison_ratios: Some(vec![0.05, 0.1]),
            drift_steps: Some(vec![2.0, 4.0, 8.0]),
            ..SweepAxes::default()
        });
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.sweep.as_ref().unwrap().num_cells(), 6);

        // Poison axes without a poison plan are rejected.
        cfg.timeline.poison = None;
        cfg.timeline.probe = Some(crate::timeline::AsrProbe {
            trigger: TriggerSpec::badnets_default(1),
            target_label: 0,
        });
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn lr_axis_incompatible_with_inverse_time() {
        let mut cfg = small_config();
        cfg.timeline.update_train.schedule = ScheduleSpec::InverseTime { sigma: 1.0 };
        cfg.sweep = Some(SweepAxes {
            learning_rates: Some(vec![0.01, 0.1]),
            ..SweepAxes::default()
        });
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn missing_dataset_file_fails_validation() {
        let mut cfg = small_config();
        cfg.dataset = DatasetSource::IdxFiles {
            image_path: "/nonexistent/images.idx".into(),
            label_path: "/nonexistent/labels.idx".into(),
            test_image_path: None,
            test_label_path: None,
            subset_size: 10,
            test_subset_size: None,
        };
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("not found"), "{err}");
    }
}
