//! Experiment execution: single runs and Cartesian sweeps. Cells run
//! independently (optionally in parallel); child seeds derive from
//! (master_seed, cell, instance) so the schedule of workers never changes
//! a result. A cell failure is recorded and the sweep continues.

use std::collections::VecDeque;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::drift::{Dataset, DriftSpec};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, SweepAxes};
use crate::harness::data::split_halves;
use crate::numcore::Rng;
use crate::optim::ScheduleSpec;
use crate::stats::{mean, sample_std};
use crate::timeline::{run_timeline, write_run_csv, write_summary_json, TimelineConfig, TimelineReport};
use crate::triggers::TriggerSpec;

const STREAM_LOAD: u64 = 0x4441_5441;
const STREAM_SPLIT: u64 = 0x5350_4c49;

/// One grid point. `None` means the axis is not swept and the base config
/// value applies.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSpec {
    pub index: usize,
    pub poison_ratio: Option<f64>,
    pub trigger: Option<TriggerSpec>,
    pub drift_step: Option<f64>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub poisoned_updates: Option<usize>,
}

/// Cartesian product of the declared axes, poison ratio outermost.
pub fn expand_cells(axes: &SweepAxes) -> Vec<CellSpec> {
    fn opts<T: Clone>(axis: &Option<Vec<T>>) -> Vec<Option<T>> {
        match axis {
            None => vec![None],
            Some(v) => v.iter().cloned().map(Some).collect(),
        }
    }
    let mut cells = Vec::with_capacity(axes.num_cells());
    for ratio in opts(&axes.poison_ratios) {
        for trigger in opts(&axes.triggers) {
            for step in opts(&axes.drift_steps) {
                for lr in opts(&axes.learning_rates) {
                    for ep in opts(&axes.epochs) {
                        for pu in opts(&axes.poisoned_update_counts) {
                            cells.push(CellSpec {
                                index: cells.len(),
                                poison_ratio: ratio,
                                trigger: trigger.clone(),
                                drift_step: step,
                                learning_rate: lr,
                                epochs: ep,
                                poisoned_updates: pu,
                            });
                        }
                    }
                }
            }
        }
    }
    cells
}

fn with_lr(schedule: ScheduleSpec, lr: f64) -> Result<ScheduleSpec> {
    match schedule {
        ScheduleSpec::Constant { .. } => Ok(ScheduleSpec::Constant { lr }),
        ScheduleSpec::Stlr { cut_frac, .. } => Ok(ScheduleSpec::Stlr {
            max_lr: lr,
            cut_frac,
        }),
        ScheduleSpec::InverseTime { .. } => Err(Error::Config(
            "learning rate override does not apply to an inverse-time schedule".into(),
        )),
    }
}

/// Peak learning rate of a schedule, for result attribution.
fn schedule_scale(schedule: &ScheduleSpec) -> f64 {
    match schedule {
        ScheduleSpec::Constant { lr } => *lr,
        ScheduleSpec::Stlr { max_lr, .. } => *max_lr,
        ScheduleSpec::InverseTime { sigma } => 1.0 / sigma,
    }
}

fn trigger_name(t: &TriggerSpec) -> &'static str {
    match t {
        TriggerSpec::Badnets { .. } => "badnets",
        TriggerSpec::Blend { .. } => "blend",
        TriggerSpec::Warp { .. } => "warp",
    }
}

/// Materializes the timeline config for a cell (seeds are filled by the
/// sweep driver).
pub fn apply_cell(base: &TimelineConfig, cell: &CellSpec) -> Result<TimelineConfig> {
    let mut cfg = base.clone();
    if let Some(r) = cell.poison_ratio {
        let plan = cfg
            .poison
            .as_mut()
            .ok_or_else(|| Error::Config("poison ratio axis without a poison plan".into()))?;
        plan.ratio = r;
    }
    if let Some(t) = &cell.trigger {
        let plan = cfg
            .poison
            .as_mut()
            .ok_or_else(|| Error::Config("trigger axis without a poison plan".into()))?;
        plan.trigger = t.clone();
    }
    if let Some(s) = cell.drift_step {
        cfg.drift = DriftSpec::new(cfg.drift.kind, s)?;
    }
    if let Some(lr) = cell.learning_rate {
        cfg.update_train.schedule = with_lr(cfg.update_train.schedule, lr)?;
    }
    if let Some(e) = cell.epochs {
        cfg.update_train.epochs = e;
    }
    if let Some(k) = cell.poisoned_updates {
        let plan = cfg
            .poison
            .as_mut()
            .ok_or_else(|| Error::Config("poisoned-update axis without a poison plan".into()))?;
        let start = plan
            .poisoned_updates
            .iter()
            .copied()
            .min()
            .ok_or_else(|| Error::Config("base poison plan poisons no updates".into()))?;
        plan.poisoned_updates = (start..start + k).collect();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Child run seed for (cell, instance) under a master seed.
pub fn cell_seed(master: u64, cell: usize, instance: usize) -> u64 {
    Rng::derive(master, &[cell as u64, instance as u64]).next_u64()
}

/// Queue-based worker pool; `jobs <= 1` runs inline. Results keep the
/// input order regardless of scheduling.
pub(crate) fn parallel_map<T, R, F>(items: Vec<T>, jobs: usize, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync,
{
    let n = items.len();
    if jobs <= 1 || n <= 1 {
        return items.into_iter().map(f).collect();
    }
    let queue: Mutex<VecDeque<(usize, T)>> = Mutex::new(items.into_iter().enumerate().collect());
    let results: Mutex<Vec<Option<R>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(n) {
            scope.spawn(|| loop {
                let job = queue.lock().expect("queue lock").pop_front();
                let Some((i, item)) = job else { break };
                let out = f(item);
                results.lock().expect("results lock")[i] = Some(out);
            });
        }
    });
    results
        .into_inner()
        .expect("pool finished")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

/// Concatenates single-seed reports (instance order) into one report,
/// identical to running the seeds in one config.
fn merge_reports(parts: Vec<TimelineReport>) -> Option<TimelineReport> {
    let mut iter = parts.into_iter();
    let mut merged = iter.next()?;
    for part in iter {
        merged.seeds.extend(part.seeds);
        merged.records.extend(part.records);
        merged.survivability.extend(part.survivability);
    }
    let surv: Vec<f64> = merged.survivability.iter().map(|&s| s as f64).collect();
    merged.mean_survivability = mean(&surv);
    Some(merged)
}

/// Loads the configured dataset and splits the training half into
/// (d0, pool) with the config's split seed.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset, Dataset)> {
    let mut load_rng = Rng::derive(cfg.split_seed, &[STREAM_LOAD]);
    let (train, test) = cfg.dataset.load(&mut load_rng)?;
    let mut split_rng = Rng::derive(cfg.split_seed, &[STREAM_SPLIT]);
    let (d0, pool) = split_halves(&train, &mut split_rng)?;
    Ok((d0, pool, test))
}

/// Runs the config's timeline over its seed list, writing `runs.csv` and
/// `summary.json` into `out_dir`. With `jobs > 1` the seeds run in
/// parallel; the output is identical to the serial run.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    jobs: usize,
) -> Result<TimelineReport> {
    cfg.validate()?;
    let (d0, pool, test) = prepare_data(cfg)?;
    let report = if jobs <= 1 || cfg.timeline.seeds.len() <= 1 {
        run_timeline(&cfg.timeline, &d0, &pool, &test)?
    } else {
        let parts = parallel_map(cfg.timeline.seeds.clone(), jobs, |seed| {
            let mut single = cfg.timeline.clone();
            single.seeds = vec![seed];
            run_timeline(&single, &d0, &pool, &test)
        });
        let parts: Vec<TimelineReport> = parts.into_iter().collect::<Result<_>>()?;
        merge_reports(parts).ok_or_else(|| Error::EmptyInput("timeline seeds".into()))?
    };
    fs::create_dir_all(out_dir)?;
    write_run_csv(&report, &out_dir.join("runs.csv"))?;
    write_summary_json(&report, &out_dir.join("summary.json"))?;
    Ok(report)
}

/// Outcome of one sweep cell: the merged report over its instances (when
/// at least one succeeded) plus any per-instance failures.
#[derive(Debug)]
pub struct CellOutcome {
    pub cell: CellSpec,
    pub report: Option<TimelineReport>,
    /// (seed, error) for failed instances; config-level cell failures use
    /// seed 0 for every instance.
    pub failures: Vec<(u64, String)>,
}

#[derive(Debug)]
pub struct SweepSummary {
    pub cells: Vec<CellOutcome>,
    pub out_dir: PathBuf,
}

impl SweepSummary {
    pub fn total_failures(&self) -> usize {
        self.cells.iter().map(|c| c.failures.len()).sum()
    }
}

struct EffectiveCell {
    poison_ratio: String,
    trigger: String,
    drift_step: f64,
    learning_rate: f64,
    epochs: usize,
    poisoned_updates: usize,
}

fn effective(cfg: &TimelineConfig) -> EffectiveCell {
    EffectiveCell {
        poison_ratio: cfg
            .poison
            .as_ref()
            .map(|p| p.ratio.to_string())
            .unwrap_or_default(),
        trigger: cfg
            .poison
            .as_ref()
            .map(|p| trigger_name(&p.trigger).to_string())
            .unwrap_or_else(|| "none".into()),
        drift_step: cfg.drift.step,
        learning_rate: schedule_scale(&cfg.update_train.schedule),
        epochs: cfg.update_train.epochs,
        poisoned_updates: cfg.poison.as_ref().map_or(0, |p| p.poisoned_updates.len()),
    }
}

/// Runs the full Cartesian sweep. Outputs under `out_dir`:
/// `config.json` (the exact input), `cell_NNN.csv` per surviving cell,
/// `results.csv` (one row per cell x seed), `summary.csv` (per-cell mean
/// and std survivability), and `failures.csv` when anything failed.
pub fn run_sweep(cfg: &ExperimentConfig, out_dir: &Path, jobs: usize) -> Result<SweepSummary> {
    cfg.validate()?;
    let axes = cfg
        .sweep
        .clone()
        .ok_or_else(|| Error::Config("config declares no sweep axes".into()))?;
    let (d0, pool, test) = prepare_data(cfg)?;
    let cells = expand_cells(&axes);
    let instances = axes
        .instances_per_cell
        .unwrap_or_else(|| cfg.timeline.seeds.len().max(1));

    // Materialize cell configs up front; a config-level error fails the
    // whole cell but never the sweep.
    let mut cell_cfgs: Vec<std::result::Result<TimelineConfig, String>> = Vec::new();
    for cell in &cells {
        cell_cfgs.push(apply_cell(&cfg.timeline, cell).map_err(|e| e.to_string()));
    }

    let mut job_list: Vec<(usize, usize, u64)> = Vec::new();
    for (ci, cc) in cell_cfgs.iter().enumerate() {
        if cc.is_ok() {
            for j in 0..instances {
                job_list.push((ci, j, cell_seed(axes.master_seed, ci, j)));
            }
        }
    }
    let outputs = parallel_map(job_list, jobs, |(ci, _, seed)| {
        let mut single = cell_cfgs[ci].as_ref().expect("scheduled cells are valid").clone();
        single.seeds = vec![seed];
        (ci, seed, run_timeline(&single, &d0, &pool, &test))
    });

    let mut per_cell: Vec<Vec<TimelineReport>> = (0..cells.len()).map(|_| Vec::new()).collect();
    let mut failures: Vec<Vec<(u64, String)>> = (0..cells.len()).map(|_| Vec::new()).collect();
    for (ci, cc) in cell_cfgs.iter().enumerate() {
        if let Err(e) = cc {
            for _ in 0..instances {
                failures[ci].push((0, e.clone()));
            }
        }
    }
    for (ci, seed, out) in outputs {
        match out {
            Ok(report) => per_cell[ci].push(report),
            Err(e) => failures[ci].push((seed, e.to_string())),
        }
    }

    fs::create_dir_all(out_dir)?;
    cfg.save(&out_dir.join("config.json"))?;

    let mut results = BufWriter::new(File::create(out_dir.join("results.csv"))?);
    writeln!(
        results,
        "cell,poison_ratio,trigger,drift_step,learning_rate,epochs,\
         poisoned_updates,seed,survivability,final_accuracy,final_asr,peak_asr"
    )?;
    let mut summary = BufWriter::new(File::create(out_dir.join("summary.csv"))?);
    writeln!(
        summary,
        "cell,poison_ratio,trigger,drift_step,learning_rate,epochs,\
         poisoned_updates,n_runs,mean_survivability,std_survivability,n_failed"
    )?;

    let mut outcomes = Vec::with_capacity(cells.len());
    for (ci, cell) in cells.iter().enumerate() {
        let report = merge_reports(std::mem::take(&mut per_cell[ci]));
        let eff = cell_cfgs[ci].as_ref().ok().map(effective);
        if let (Some(report), Some(eff)) = (&report, &eff) {
            write_run_csv(report, &out_dir.join(format!("cell_{ci:03}.csv")))?;
            for (si, seed) in report.seeds.iter().enumerate() {
                let records = &report.records[si];
                let last = records.last().expect("timeline records nonempty");
                let peak = records.iter().map(|r| r.asr).fold(f64::NEG_INFINITY, f64::max);
                writeln!(
                    results,
                    "{ci},{},{},{},{},{},{},{seed},{},{},{},{}",
                    eff.poison_ratio,
                    eff.trigger,
                    eff.drift_step,
                    eff.learning_rate,
                    eff.epochs,
                    eff.poisoned_updates,
                    report.survivability[si],
                    last.normal_accuracy,
                    last.asr,
                    peak
                )?;
            }
            let surv: Vec<f64> = report.survivability.iter().map(|&s| s as f64).collect();
            writeln!(
                summary,
                "{ci},{},{},{},{},{},{},{},{},{},{}",
                eff.poison_ratio,
                eff.trigger,
                eff.drift_step,
                eff.learning_rate,
                eff.epochs,
                eff.poisoned_updates,
                surv.len(),
                mean(&surv),
                sample_std(&surv),
                failures[ci].len()
            )?;
        } else {
            // Whole cell failed; emit a summary row with zero runs so the
            // cell stays visible in the output.
            writeln!(summary, "{ci},,,,,,,0,,,{}", failures[ci].len())?;
        }
        outcomes.push(CellOutcome {
            cell: cell.clone(),
            report,
            failures: std::mem::take(&mut failures[ci]),
        });
    }
    results.flush()?;
    summary.flush()?;

    if outcomes.iter().any(|c| !c.failures.is_empty()) {
        let mut fail = BufWriter::new(File::create(out_dir.join("failures.csv"))?);
        writeln!(fail, "cell,seed,error")?;
        for c in &outcomes {
            for (seed, err) in &c.failures {
                writeln!(fail, "{},{seed},{}", c.cell.index, err.replace(',', ";"))?;
            }
        }
        fail.flush()?;
    }

    Ok(SweepSummary {
        cells: outcomes,
        out_dir: out_dir.to_path_buf(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::tests::small_config;
    use tempfile::tempdir;

    #[test]
    fn expand_cells_cardinality_and_order() {
        let axes = SweepAxes {
            poison_ratios: Some(vec![0.05, 0.1, 0.25]),
            drift_steps: Some(vec![2.0, 4.0]),
            ..SweepAxes::default()
        };
        let cells = expand_cells(&axes);
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[0].poison_ratio, Some(0.05));
        assert_eq!(cells[0].drift_step, Some(2.0));
        assert_eq!(cells[1].drift_step, Some(4.0));
        assert_eq!(cells[5].poison_ratio, Some(0.25));
        for (i, c) in cells.iter().enumerate() {
            assert_eq!(c.index, i);
            assert!(c.trigger.is_none() && c.learning_rate.is_none());
        }
    }

    #[test]
    fn apply_cell_overrides_fields() {
        let cfg = small_config();
        let cell = CellSpec {
            index: 0,
            poison_ratio: Some(0.25),
            trigger: None,
            drift_step: Some(8.0),
            learning_rate: Some(0.05),
            epochs: Some(3),
            poisoned_updates: Some(2),
        };
        let tl = apply_cell(&cfg.timeline, &cell).unwrap();
        let plan = tl.poison.as_ref().unwrap();
        assert_eq!(plan.ratio, 0.25);
        assert_eq!(plan.poisoned_updates, vec![0, 1]);
        assert_eq!(tl.drift.step, 8.0);
        assert_eq!(tl.update_train.epochs, 3);
        match tl.update_train.schedule {
            ScheduleSpec::Constant { lr } => assert_eq!(lr, 0.05),
            ref s => panic!("unexpected schedule {s:?}"),
        }
        // Base config is untouched.
        assert_eq!(cfg.timeline.poison.as_ref().unwrap().ratio, 0.1);
    }

    #[test]
    fn cell_seeds_are_distinct_and_deterministic() {
        let a = cell_seed(9, 0, 0);
        assert_eq!(a, cell_seed(9, 0, 0));
        assert_ne!(a, cell_seed(9, 0, 1));
        assert_ne!(a, cell_seed(9, 1, 0));
        assert_ne!(a, cell_seed(10, 0, 0));
    }

    #[test]
    fn parallel_map_matches_serial_in_order() {
        let items: Vec<u64> = (0..37).collect();
        let serial = parallel_map(items.clone(), 1, |x| x * x + 1);
        let parallel = parallel_map(items, 4, |x| x * x + 1);
        assert_eq!(serial, parallel);
    }

    #[test]
    fn run_experiment_outputs_and_parallel_determinism() {
        let cfg = small_config();
        let d1 = tempdir().unwrap();
        let d2 = tempdir().unwrap();
        let r1 = run_experiment(&cfg, d1.path(), 1).unwrap();
        let r2 = run_experiment(&cfg, d2.path(), 2).unwrap();
        assert_eq!(r1, r2);
        let c1 = fs::read(d1.path().join("runs.csv")).unwrap();
        let c2 = fs::read(d2.path().join("runs.csv")).unwrap();
        assert_eq!(c1, c2);
        assert!(d1.path().join("summary.json").is_file());
    }

    #[test]
    fn single_cell_sweep_equals_direct_timeline() {
        let mut cfg = small_config();
        cfg.sweep = Some(SweepAxes {
            master_seed: 42,
            instances_per_cell: Some(2),
            ..SweepAxes::default()
        });
        let dir = tempdir().unwrap();
        let sweep = run_sweep(&cfg, dir.path(), 1).unwrap();
        assert_eq!(sweep.cells.len(), 1);
        let from_sweep = sweep.cells[0].report.as_ref().unwrap();

        // Same cell run directly through run_timeline with the derived seeds.
        let mut direct_cfg = cfg.timeline.clone();
        direct_cfg.seeds = vec![cell_seed(42, 0, 0), cell_seed(42, 0, 1)];
        let (d0, pool, test) = prepare_data(&cfg).unwrap();
        let direct = run_timeline(&direct_cfg, &d0, &pool, &test).unwrap();
        assert_eq!(*from_sweep, direct);
    }

    #[test]
    fn sweep_records_cell_failure_and_continues() {
        let mut cfg = small_config();
        cfg.sweep = Some(SweepAxes {
            master_seed: 1,
            instances_per_cell: Some(1),
            poison_ratios: Some(vec![0.1, 2.0]),
            ..SweepAxes::default()
        });
        let dir = tempdir().unwrap();
        let sweep = run_sweep(&cfg, dir.path(), 1).unwrap();
        assert_eq!(sweep.cells.len(), 2);
        assert!(sweep.cells[0].report.is_some());
        assert!(sweep.cells[0].failures.is_empty());
        assert!(sweep.cells[1].report.is_none());
        assert_eq!(sweep.cells[1].failures.len(), 1);
        assert!(dir.path().join("failures.csv").is_file());
        assert!(dir.path().join("cell_000.csv").is_file());
        assert!(!dir.path().join("cell_001.csv").exists());
    }

    #[test]
    fn sweep_reruns_byte_identically_and_parallel_invariant() {
        let mut cfg = small_config();
        cfg.sweep = Some(SweepAxes {
            master_seed: 3,
            instances_per_cell: Some(2),
            drift_steps: Some(vec![2.0, 4.0]),
            ..SweepAxes::default()
        });
        let d1 = tempdir().unwrap();
        let d2 = tempdir().unwrap();
        run_sweep(&cfg, d1.path(), 1).unwrap();
        run_sweep(&cfg, d2.path(), 3).unwrap();
        for name in ["results.csv", "summary.csv", "cell_000.csv", "cell_001.csv"] {
            let a = fs::read(d1.path().join(name)).unwrap();
            let b = fs::read(d2.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between jobs=1 and jobs=3");
        }
    }
}
