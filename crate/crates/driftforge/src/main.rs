use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use driftforge::harness::{
    gen_synthetic_pair, report as build_report, resolve_data_path, run_experiment, run_sweep,
    write_idx, DatasetSource, ExperimentConfig,
};
use driftforge::stats::{mean, sample_std};
use driftforge::theory::verification_report;
use driftforge::timeline::TimelineReport;
use driftforge::{Error, Result};

#[derive(Parser)]
#[command(
    name = "driftforge",
    version,
    about = "Simulation laboratory for backdoor survivability under distribution drift"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the timeline experiment described by a config file or preset.
    Run {
        /// Experiment config JSON path (or use --preset).
        config: Option<PathBuf>,
        /// Built-in config name: mnist-constant or mnist-stlr.
        #[arg(long)]
        preset: Option<String>,
        /// Replace the config's seed list with this single seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; defaults to the config's output_dir or
        /// results/<name>.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (seeds run in parallel; results are identical).
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run the Cartesian sweep declared in the config.
    Sweep {
        /// Experiment config JSON path (or use --preset).
        config: Option<PathBuf>,
        /// Built-in config name: mnist-constant or mnist-stlr.
        #[arg(long)]
        preset: Option<String>,
        /// Override the sweep master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; defaults to the config's output_dir or
        /// results/<name>.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (cells run in parallel; results are identical).
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Numerically verify the convex-theory statements.
    Theory {
        /// Also write the full JSON verification report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Aggregate a directory of run CSVs into plot data and a summary.
    Report {
        /// Directory containing per-run CSV files.
        dir: PathBuf,
        /// Directory for plot-data files; defaults to the input dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic dataset and write it as IDX files.
    GenData {
        /// JSON file holding a synthetic dataset source.
        spec: PathBuf,
        /// Output directory for the IDX files (default: current dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the generation seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

const PRESET_MNIST: &str = include_str!(concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/../../configs/mnist-constant.json"
));
const PRESET_STLR: &str = include_str!(concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/../../configs/mnist-stlr.json"
));

/// Loads a preset by name. Presets reference MNIST IDX files; when those
/// are absent the dataset is swapped for an equivalent synthetic source so
/// the run works offline.
fn preset_config(name: &str) -> Result<ExperimentConfig> {
    let text = match name {
        "mnist-constant" => PRESET_MNIST,
        "mnist-stlr" => PRESET_STLR,
        other => {
            return Err(Error::Config(format!(
                "unknown preset {other}; available: mnist-constant, mnist-stlr"
            )))
        }
    };
    let mut cfg: ExperimentConfig = serde_json::from_str(text)?;
    if let DatasetSource::IdxFiles {
        image_path,
        label_path,
        ..
    } = &cfg.dataset
    {
        let missing = !resolve_data_path(image_path).is_file()
            || !resolve_data_path(label_path).is_file();
        if missing {
            eprintln!(
                "note: MNIST IDX files not found (set DRIFTFORGE_DATA_DIR to use them); \
                 falling back to the synthetic stand-in dataset"
            );
            cfg.dataset = synthetic_stand_in();
        }
    }
    Ok(cfg)
}

/// MNIST-shaped synthetic source used when the preset's IDX files are
/// not on disk.
fn synthetic_stand_in() -> DatasetSource {
    DatasetSource::Synthetic {
        num_classes: 10,
        samples_per_class: 1000,
        image_size: 28,
        channels: 1,
        noise_std: 0.08,
        seed: 29,
        test_per_class: 200,
    }
}

fn load_config(config: Option<&Path>, preset: Option<&str>) -> Result<ExperimentConfig> {
    match (config, preset) {
        (Some(_), Some(_)) => Err(Error::Config(
            "pass either a config path or --preset, not both".into(),
        )),
        (Some(path), None) => ExperimentConfig::load(path),
        (None, Some(name)) => preset_config(name),
        (None, None) => Err(Error::Config(
            "a config path or --preset is required".into(),
        )),
    }
}

fn output_dir(cfg: &ExperimentConfig, out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("results").join(&cfg.name))
}

fn print_report(report: &TimelineReport) {
    let finals: Vec<f64> = report
        .records
        .iter()
        .map(|r| r.last().map_or(0.0, |x| x.normal_accuracy))
        .collect();
    let final_asr: Vec<f64> = report
        .records
        .iter()
        .map(|r| r.last().map_or(0.0, |x| x.asr))
        .collect();
    println!(
        "seeds: {}, updates: 0..={}",
        report.seeds.len(),
        report.records.first().map_or(0, |r| r.len().saturating_sub(1))
    );
    println!(
        "mean survivability (gamma {}): {}",
        report.gamma, report.mean_survivability
    );
    println!(
        "final accuracy: {:.4} +/- {:.4}",
        mean(&finals),
        sample_std(&finals)
    );
    println!(
        "final asr: {:.4} +/- {:.4}",
        mean(&final_asr),
        sample_std(&final_asr)
    );
}

fn run() -> Result<bool> {
    match Cli::parse().command {
        Command::Run {
            config,
            preset,
            seed,
            out,
            jobs,
        } => {
            let mut cfg = load_config(config.as_deref(), preset.as_deref())?;
            if let Some(s) = seed {
                cfg.timeline.seeds = vec![s];
            }
            let dir = output_dir(&cfg, out);
            println!("experiment: {}", cfg.name);
            let report = run_experiment(&cfg, &dir, jobs)?;
            print_report(&report);
            println!("wrote {}", dir.join("runs.csv").display());
            println!("wrote {}", dir.join("summary.json").display());
            Ok(true)
        }
        Command::Sweep {
            config,
            preset,
            seed,
            out,
            jobs,
        } => {
            let mut cfg = load_config(config.as_deref(), preset.as_deref())?;
            if let Some(s) = seed {
                let axes = cfg
                    .sweep
                    .as_mut()
                    .ok_or_else(|| Error::Config("config declares no sweep axes".into()))?;
                axes.master_seed = s;
            }
            let dir = output_dir(&cfg, out);
            println!("sweep: {}", cfg.name);
            let summary = run_sweep(&cfg, &dir, jobs)?;
            let ok_cells = summary.cells.iter().filter(|c| c.report.is_some()).count();
            println!(
                "{} cells ({} with results), {} failed runs",
                summary.cells.len(),
                ok_cells,
                summary.total_failures()
            );
            for c in &summary.cells {
                if let Some(r) = &c.report {
                    println!(
                        "cell {:03}: mean survivability {}",
                        c.cell.index, r.mean_survivability
                    );
                }
            }
            println!("wrote {}", dir.join("results.csv").display());
            println!("wrote {}", dir.join("summary.csv").display());
            Ok(summary.total_failures() == 0)
        }
        Command::Theory { report } => {
            let vr = verification_report()?;
            for check in &vr.checks {
                let status = if check.passed { "PASS" } else { "FAIL" };
                let vals: Vec<String> = check
                    .observed
                    .iter()
                    .map(|(k, v)| format!("{k}={v:.6e}"))
                    .collect();
                println!("{status} {} (tol {:e}) {}", check.name, check.tolerance, vals.join(" "));
            }
            if let Some(path) = report {
                let mut json = serde_json::to_string_pretty(&vr)?;
                json.push('\n');
                fs::write(&path, json)?;
                println!("wrote {}", path.display());
            }
            println!(
                "theory verification: {}",
                if vr.all_passed { "all checks passed" } else { "FAILURES present" }
            );
            Ok(vr.all_passed)
        }
        Command::Report { dir, out } => {
            let target = out.unwrap_or_else(|| dir.clone());
            let output = build_report(&dir, &target)?;
            print!("{}", output.summary_text);
            Ok(true)
        }
        Command::GenData { spec, out, seed } => {
            let text = fs::read_to_string(&spec)
                .map_err(|e| Error::Config(format!("{}: {e}", spec.display())))?;
            let mut source: DatasetSource = serde_json::from_str(&text)?;
            match &mut source {
                DatasetSource::Synthetic { seed: s, .. } => {
                    if let Some(over) = seed {
                        *s = over;
                    }
                }
                DatasetSource::IdxFiles { .. } => {
                    return Err(Error::Config(
                        "gen-data needs a synthetic dataset spec".into(),
                    ))
                }
            }
            source.validate()?;
            let (train, test) = gen_synthetic_pair(&source)?;
            let dir = out.unwrap_or_else(|| PathBuf::from("."));
            fs::create_dir_all(&dir)?;
            let files = [
                ("train-images-idx3-ubyte", "train-labels-idx1-ubyte", &train),
                ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte", &test),
            ];
            for (img, lbl, data) in files {
                let (ip, lp) = (dir.join(img), dir.join(lbl));
                write_idx(data, &ip, &lp)?;
                println!("wrote {} ({} samples)", ip.display(), data.len());
                println!("wrote {}", lp.display());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
