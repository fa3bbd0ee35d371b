//! Reporting: reads run CSVs from a results directory, aggregates curves
//! across seeds, and emits plot-data files plus a human-readable summary.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::stats::{mean, sample_std};

pub const RUN_CSV_HEADER: &str = "seed,update_index,normal_accuracy,asr";

/// One parsed run (a single seed of one series) and its curve.
#[derive(Debug, Clone)]
struct RunSeries {
    series: String,
    /// (update_index, normal_accuracy, asr), sorted by update index.
    points: Vec<(usize, f64, f64)>,
}

#[derive(Debug)]
pub struct ReportOutput {
    pub summary_text: String,
    pub plot_files: Vec<PathBuf>,
    pub num_runs: usize,
}

fn parse_run_csv(path: &Path, text: &str) -> Result<Vec<RunSeries>> {
    let series = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    let mut by_seed: BTreeMap<u64, Vec<(usize, f64, f64)>> = BTreeMap::new();
    for (ln, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(Error::Config(format!(
                "{}: line {}: expected 4 columns, got {}",
                path.display(),
                ln + 1,
                cols.len()
            )));
        }
        let bad = |what: &str| {
            Error::Config(format!("{}: line {}: bad {what}", path.display(), ln + 1))
        };
        let seed: u64 = cols[0].parse().map_err(|_| bad("seed"))?;
        let update: usize = cols[1].parse().map_err(|_| bad("update_index"))?;
        let acc: f64 = cols[2].parse().map_err(|_| bad("normal_accuracy"))?;
        let asr: f64 = cols[3].parse().map_err(|_| bad("asr"))?;
        by_seed.entry(seed).or_default().push((update, acc, asr));
    }
    Ok(by_seed
        .into_iter()
        .map(|(_, mut points)| {
            points.sort_by_key(|p| p.0);
            RunSeries {
                series: series.clone(),
                points,
            }
        })
        .collect())
}

/// Scans `results_dir` for run CSVs (files whose header matches
/// [`RUN_CSV_HEADER`]), writes `plot_curves.csv` into `out_dir`, and
/// returns the summary. Non-run CSVs (sweep results/summaries) are
/// skipped; malformed run CSVs are errors.
pub fn report(results_dir: &Path, out_dir: &Path) -> Result<ReportOutput> {
    if !results_dir.is_dir() {
        return Err(Error::Config(format!(
            "results directory not found: {}",
            results_dir.display()
        )));
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(results_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();

    let mut runs: Vec<RunSeries> = Vec::new();
    for path in &paths {
        let text = fs::read_to_string(path)?;
        if text.lines().next() == Some(RUN_CSV_HEADER) {
            runs.extend(parse_run_csv(path, &text)?);
        }
    }
    if runs.is_empty() {
        return Err(Error::Config(format!(
            "no runs found in {}",
            results_dir.display()
        )));
    }

    // Per (series, update index): mean and std across seeds.
    fs::create_dir_all(out_dir)?;
    let plot_path = out_dir.join("plot_curves.csv");
    let mut plot = BufWriter::new(File::create(&plot_path)?);
    writeln!(
        plot,
        "series,update_index,mean_accuracy,std_accuracy,mean_asr,std_asr,n"
    )?;
    let mut series_names: Vec<String> = runs.iter().map(|r| r.series.clone()).collect();
    series_names.dedup();
    for name in &series_names {
        let members: Vec<&RunSeries> = runs.iter().filter(|r| &r.series == name).collect();
        let mut updates: Vec<usize> = members
            .iter()
            .flat_map(|r| r.points.iter().map(|p| p.0))
            .collect();
        updates.sort_unstable();
        updates.dedup();
        for u in updates {
            let accs: Vec<f64> = members
                .iter()
                .filter_map(|r| r.points.iter().find(|p| p.0 == u).map(|p| p.1))
                .collect();
            let asrs: Vec<f64> = members
                .iter()
                .filter_map(|r| r.points.iter().find(|p| p.0 == u).map(|p| p.2))
                .collect();
            writeln!(
                plot,
                "{name},{u},{},{},{},{},{}",
                mean(&accs),
                sample_std(&accs),
                mean(&asrs),
                sample_std(&asrs),
                accs.len()
            )?;
        }
    }
    plot.flush()?;

    let final_accs: Vec<f64> = runs.iter().map(|r| r.points.last().unwrap().1).collect();
    let final_asrs: Vec<f64> = runs.iter().map(|r| r.points.last().unwrap().2).collect();
    let peak_asrs: Vec<f64> = runs
        .iter()
        .map(|r| r.points.iter().map(|p| p.2).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let mut text = String::new();
    text.push_str(&format!(
        "{} runs across {} series\n",
        runs.len(),
        series_names.len()
    ));
    text.push_str(&format!(
        "final normal accuracy: {:.4} ± {:.4}\n",
        mean(&final_accs),
        sample_std(&final_accs)
    ));
    text.push_str(&format!(
        "final asr: {:.4} ± {:.4}\n",
        mean(&final_asrs),
        sample_std(&final_asrs)
    ));
    text.push_str(&format!(
        "peak asr: {:.4} ± {:.4}\n",
        mean(&peak_asrs),
        sample_std(&peak_asrs)
    ));
    text.push_str(&format!("plot data: {}\n", plot_path.display()));

    Ok(ReportOutput {
        summary_text: text,
        plot_files: vec![plot_path],
        num_runs: runs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, content).unwrap();
        p
    }

    #[test]
    fn empty_dir_is_no_runs_found() {
        let dir = tempdir().unwrap();
        let err = report(dir.path(), dir.path()).unwrap_err();
        assert!(err.to_string().contains("no runs found"), "{err}");
    }

    #[test]
    fn single_run_summary_matches_run_values() {
        let dir = tempdir().unwrap();
        write(
            dir.path(),
            "runs.csv",
            "seed,update_index,normal_accuracy,asr\n7,0,0.9,0.8\n7,1,0.7,0.2\n",
        );
        let out = report(dir.path(), dir.path()).unwrap();
        assert_eq!(out.num_runs, 1);
        assert!(out.summary_text.contains("final normal accuracy: 0.7000 ± 0.0000"));
        assert!(out.summary_text.contains("final asr: 0.2000 ± 0.0000"));
        assert!(out.summary_text.contains("peak asr: 0.8000 ± 0.0000"));
        let plot = fs::read_to_string(dir.path().join("plot_curves.csv")).unwrap();
        let lines: Vec<&str> = plot.lines().collect();
        assert_eq!(lines[0], "series,update_index,mean_accuracy,std_accuracy,mean_asr,std_asr,n");
        assert_eq!(lines[1], "runs,0,0.9,0,0.8,0,1");
        assert_eq!(lines[2], "runs,1,0.7,0,0.2,0,1");
    }

    #[test]
    fn multi_seed_mean_std_match_hand_computation() {
        let dir = tempdir().unwrap();
        // Five seeds, single update point each, accuracies 0.5..0.9.
        let mut csv = String::from("seed,update_index,normal_accuracy,asr\n");
        for (i, acc) in [0.5, 0.6, 0.7, 0.8, 0.9].iter().enumerate() {
            csv.push_str(&format!("{i},0,{acc},0.1\n"));
        }
        write(dir.path(), "five.csv", &csv);
        let out = report(dir.path(), dir.path()).unwrap();
        assert_eq!(out.num_runs, 5);
        // mean 0.7, sample std sqrt(0.025) = 0.15811...
        assert!(out.summary_text.contains("final normal accuracy: 0.7000 ± 0.1581"));
        let plot = fs::read_to_string(dir.path().join("plot_curves.csv")).unwrap();
        assert!(plot.contains("five,0,0.7"), "{plot}");
        assert!(plot.contains(",5\n"), "{plot}");
    }

    #[test]
    fn malformed_run_csv_is_an_error() {
        let dir = tempdir().unwrap();
        write(
            dir.path(),
            "runs.csv",
            "seed,update_index,normal_accuracy,asr\n7,0,not_a_number,0.8\n",
        );
        let err = report(dir.path(), dir.path()).unwrap_err();
        assert!(err.to_string().contains("bad normal_accuracy"), "{err}");
    }

    #[test]
    fn non_run_csvs_are_skipped() {
        let dir = tempdir().unwrap();
        write(dir.path(), "summary.csv", "cell,whatever\n0,1\n");
        write(
            dir.path(),
            "runs.csv",
            "seed,update_index,normal_accuracy,asr\n1,0,0.5,0.5\n",
        );
        let out = report(dir.path(), dir.path()).unwrap();
        assert_eq!(out.num_runs, 1);
    }
}
