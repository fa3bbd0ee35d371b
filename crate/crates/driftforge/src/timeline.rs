//! The update-loop protocol: train an initial model on the first data half,
//! then fine-tune it through a sequence of drifted (and possibly poisoned)
//! updates drawn from the second half, recording normal accuracy and attack
//! success rate at every step, and reducing the ASR series to a
//! gamma-survivability integer per seed.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::drift::{apply_drift, Dataset, DriftSpec};
use crate::error::{Error, Result};
use crate::nn::{attack_success_rate, evaluate, init, ModelSpec, ModelState};
use crate::optim::{train, OptimizerConfig};
use crate::numcore::Rng;
use crate::stats::mean;
use crate::triggers::{poison_dataset, PoisonPlan, TriggerSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// Evaluate on the test pool drifted to the current update index
    /// (accuracy and ASR both see the current distribution; triggers are
    /// stamped after drifting).
    DriftedTest,
    /// Evaluate on the undrifted test pool throughout.
    CleanTest,
}

/// The trigger/target pair used for ASR measurement. Runs with a poison
/// plan probe with that plan's trigger; clean baseline runs still need an
/// explicit probe so their chance-level ASR is measured against something.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsrProbe {
    pub trigger: TriggerSpec,
    pub target_label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineConfig {
    pub model: ModelSpec,
    pub initial_train: OptimizerConfig,
    pub update_train: OptimizerConfig,
    pub drift: DriftSpec,
    /// Number of fine-tuning updates H; records cover 0..=H.
    pub num_updates: usize,
    pub poison: Option<PoisonPlan>,
    /// ASR probe override; defaults to the poison plan's trigger/target.
    pub probe: Option<AsrProbe>,
    pub eval_mode: EvalMode,
    pub seeds: Vec<u64>,
    pub gamma: f64,
    pub horizon: usize,
}

impl TimelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.initial_train.validate()?;
        self.update_train.validate()?;
        self.drift.validate()?;
        if self.num_updates == 0 {
            return Err(Error::Config("num_updates must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed required".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be >= 1".into()));
        }
        if let Some(plan) = &self.poison {
            plan.validate(self.model.num_classes)?;
            if let Some(&bad) = plan
                .poisoned_updates
                .iter()
                .find(|&&u| u > self.num_updates)
            {
                return Err(Error::Config(format!(
                    "poisoned update {bad} beyond num_updates {}",
                    self.num_updates
                )));
            }
        }
        if self.poison.is_none() && self.probe.is_none() {
            return Err(Error::Config(
                "clean runs need an asr probe (none can be derived without a poison plan)".into(),
            ));
        }
        if let Some(probe) = &self.probe {
            if probe.target_label >= self.model.num_classes {
                return Err(Error::LabelOutOfRange {
                    label: probe.target_label,
                    num_classes: self.model.num_classes,
                });
            }
        }
        Ok(())
    }

    /// The trigger/target the ASR series is measured against.
    pub fn resolve_probe(&self) -> Result<AsrProbe> {
        if let Some(p) = &self.probe {
            return Ok(p.clone());
        }
        if let Some(plan) = &self.poison {
            return Ok(AsrProbe {
                trigger: plan.trigger.clone(),
                target_label: plan.target_label,
            });
        }
        Err(Error::Config("no asr probe available".into()))
    }

    /// Last poisoned update index; 0 for clean runs (the whole post-initial
    /// series is then the measurement window).
    pub fn stop_index(&self) -> usize {
        self.poison.as_ref().map_or(0, |p| p.stop_index())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub update_index: usize,
    pub normal_accuracy: f64,
    pub asr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineReport {
    pub seeds: Vec<u64>,
    /// records[s][i] is seed s at update i, i = 0..=num_updates.
    pub records: Vec<Vec<UpdateRecord>>,
    pub survivability: Vec<usize>,
    pub mean_survivability: f64,
    pub gamma: f64,
    pub horizon: usize,
}

impl TimelineReport {
    /// Mean over seeds of the named metric at each update index.
    pub fn mean_curve(&self, metric: impl Fn(&UpdateRecord) -> f64) -> Vec<f64> {
        if self.records.is_empty() {
            return Vec::new();
        }
        let len = self.records[0].len();
        (0..len)
            .map(|i| mean(&self.records.iter().map(|r| metric(&r[i])).collect::<Vec<_>>()))
            .collect()
    }
}

/// Length of the maximal prefix of post-stop ASR values strictly above
/// gamma, capped at `horizon`.
pub fn gamma_survivability(asr_after_stop: &[f64], gamma: f64, horizon: usize) -> Result<usize> {
    if asr_after_stop.is_empty() {
        return Err(Error::EmptyInput("post-stop asr series".into()));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid(format!(
            "gamma must lie in (0, 1), got {gamma}"
        )));
    }
    let mut n = 0usize;
    for &a in asr_after_stop {
        if a > gamma {
            n += 1;
        } else {
            break;
        }
    }
    Ok(n.min(horizon))
}

/// ASR values of the updates strictly after the last poisoned one.
pub(crate) fn post_stop_series(records: &[UpdateRecord], stop: usize) -> Vec<f64> {
    records
        .iter()
        .filter(|r| r.update_index > stop)
        .map(|r| r.asr)
        .collect()
}

fn eval_sets(
    test: &Dataset,
    drift: &DriftSpec,
    mode: EvalMode,
    i: usize,
) -> Result<Dataset> {
    match mode {
        EvalMode::DriftedTest => apply_drift(test, drift, i),
        EvalMode::CleanTest => Ok(test.clone()),
    }
}

fn check_data_compat(cfg: &TimelineConfig, data: &Dataset, what: &str) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyInput(format!("{what} dataset")));
    }
    if data.num_classes() != cfg.model.num_classes {
        return Err(Error::Config(format!(
            "{what}: dataset has {} classes, model expects {}",
            data.num_classes(),
            cfg.model.num_classes
        )));
    }
    let (c, h, w) = data.image_dims().expect("nonempty");
    let input = cfg.model.input;
    if (c, h, w) != (input.channels, input.height, input.width) {
        return Err(Error::Config(format!(
            "{what}: images are ({c},{h},{w}), model expects ({},{},{})",
            input.channels, input.height, input.width
        )));
    }
    Ok(())
}

/// Runs the full protocol for every seed.
///
/// Per seed: initialize, optionally poison D0, train F0 on it; then for
/// i = 1..=H drift the pool to index i, poison if the plan says so, and
/// fine-tune F_{i-1} into F_i. After every stage the current model is
/// scored on the eval-mode test set (accuracy) and the probe trigger (ASR,
/// stamped after any drift). The per-seed ASR series after the last
/// poisoned update reduces to gamma-survivability.
pub fn run_timeline(
    cfg: &TimelineConfig,
    d0: &Dataset,
    pool: &Dataset,
    test: &Dataset,
) -> Result<TimelineReport> {
    cfg.validate()?;
    check_data_compat(cfg, d0, "d0")?;
    check_data_compat(cfg, pool, "pool")?;
    check_data_compat(cfg, test, "test")?;
    let probe = cfg.resolve_probe()?;
    let h = cfg.num_updates;
    let stop = cfg.stop_index();

    let mut all_records = Vec::with_capacity(cfg.seeds.len());
    let mut survivability = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let mut records = Vec::with_capacity(h + 1);
        let mut init_rng = Rng::derive(seed, &[1]);
        let mut model = init(&cfg.model, &mut init_rng)?;

        let d0_used = match &cfg.poison {
            Some(plan) if plan.poisons_update(0) => {
                let mut prng = Rng::derive(seed, &[2, 0]);
                poison_dataset(d0, plan, &mut prng)?.0
            }
            _ => d0.clone(),
        };
        let mut train_rng = Rng::derive(seed, &[3, 0]);
        model = train(model, &d0_used, &cfg.initial_train, &mut train_rng)?;
        records.push(score(&model, cfg, test, &probe, 0)?);

        for i in 1..=h {
            let mut di = apply_drift(pool, &cfg.drift, i)?;
            if let Some(plan) = &cfg.poison {
                if plan.poisons_update(i) {
                    let mut prng = Rng::derive(seed, &[2, i as u64]);
                    di = poison_dataset(&di, plan, &mut prng)?.0;
                }
            }
            let mut train_rng = Rng::derive(seed, &[3, i as u64]);
            model = train(model, &di, &cfg.update_train, &mut train_rng)?;
            records.push(score(&model, cfg, test, &probe, i)?);
        }

        let series = post_stop_series(&records, stop);
        let surv = if series.is_empty() {
            0
        } else {
            gamma_survivability(&series, cfg.gamma, cfg.horizon)?
        };
        survivability.push(surv);
        all_records.push(records);
    }
    let mean_survivability = mean(&survivability.iter().map(|&s| s as f64).collect::<Vec<_>>());
    Ok(TimelineReport {
        seeds: cfg.seeds.clone(),
        records: all_records,
        survivability,
        mean_survivability,
        gamma: cfg.gamma,
        horizon: cfg.horizon,
    })
}

fn score(
    model: &ModelState,
    cfg: &TimelineConfig,
    test: &Dataset,
    probe: &AsrProbe,
    i: usize,
) -> Result<UpdateRecord> {
    let eval_set = eval_sets(test, &cfg.drift, cfg.eval_mode, i)?;
    let normal_accuracy = evaluate(model, &eval_set)?;
    let asr = attack_success_rate(model, &eval_set, &probe.trigger, probe.target_label)?;
    Ok(UpdateRecord {
        update_index: i,
        normal_accuracy,
        asr,
    })
}

/// Accuracy of a FROZEN model on the test pool drifted to i = 0..=h.
pub fn static_decay_curve(
    model: &ModelState,
    drift: &DriftSpec,
    test_pool: &Dataset,
    h: usize,
) -> Result<Vec<f64>> {
    if h == 0 {
        return Err(Error::invalid("decay horizon must be >= 1"));
    }
    let mut curve = Vec::with_capacity(h + 1);
    for i in 0..=h {
        let drifted = apply_drift(test_pool, drift, i)?;
        curve.push(evaluate(model, &drifted)?);
    }
    Ok(curve)
}

/// One CSV per run, columns `seed,update_index,normal_accuracy,asr`, rows
/// ordered by (seed position, update index). Written with plain `Display`
/// formatting so identical reports serialize byte-identically.
pub fn write_run_csv(report: &TimelineReport, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "seed,update_index,normal_accuracy,asr")?;
    for (seed, records) in report.seeds.iter().zip(report.records.iter()) {
        for r in records {
            writeln!(w, "{},{},{},{}", seed, r.update_index, r.normal_accuracy, r.asr)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// JSON summary companion to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub gamma: f64,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub survivability_per_seed: Vec<usize>,
    pub mean_survivability: f64,
    pub mean_accuracy_per_update: Vec<f64>,
    pub mean_asr_per_update: Vec<f64>,
}

impl RunSummary {
    pub fn from_report(report: &TimelineReport) -> RunSummary {
        RunSummary {
            gamma: report.gamma,
            horizon: report.horizon,
            seeds: report.seeds.clone(),
            survivability_per_seed: report.survivability.clone(),
            mean_survivability: report.mean_survivability,
            mean_accuracy_per_update: report.mean_curve(|r| r.normal_accuracy),
            mean_asr_per_update: report.mean_curve(|r| r.asr),
        }
    }
}

pub fn write_summary_json(report: &TimelineReport, path: &Path) -> Result<()> {
    let summary = RunSummary::from_report(report);
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &summary)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}
