//! Ablation sweeps: a cartesian grid over `TrainConfig` fields, each cell
//! repeated over a fixed seed list, aggregated into one table.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::config::{apply_axis, ExperimentConfig};
use crate::runner::{run_experiment, RunSummary};
use crate::CliError;

type Assignment = Vec<(String, serde_json::Value)>;

fn cartesian(exp: &ExperimentConfig) -> Vec<Assignment> {
    let axes = &exp.sweep.as_ref().expect("validated").axes;
    let mut grid: Vec<Assignment> = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(grid.len() * axis.values.len());
        for prefix in &grid {
            for value in &axis.values {
                let mut row = prefix.clone();
                row.push((axis.field.clone(), value.clone()));
                next.push(row);
            }
        }
        grid = next;
    }
    grid
}

fn cell_name(assignment: &Assignment, seed: u64) -> String {
    let mut parts: Vec<String> = assignment
        .iter()
        .map(|(field, value)| format!("{field}={value}"))
        .collect();
    parts.push(format!("seed={seed}"));
    parts.join("__")
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// The validation metrics a sweep aggregates: the final-epoch ensemble.
/// Max-over-epochs (best-checkpoint) selection systematically favors the
/// arm with the noisier trajectory at desk-scale validation sizes, which
/// would distort cross-cell comparisons; the best checkpoint is still
/// saved per cell.
fn cell_metrics(summary: &RunSummary) -> Option<(f64, f64, f64)> {
    summary
        .final_val
        .as_ref()
        .or(summary.best_val.as_ref())
        .map(|r| (r.f1_macro, r.accuracy, r.overall))
}

/// Runs the whole grid and writes `sweep.csv` (one row per grid point:
/// axis values, then mean/std of F1, accuracy, and overall score over the
/// seed list). A failing cell marks its row `failed`; the sweep continues.
pub fn run_sweep(exp: &ExperimentConfig, out_dir: &Path, workers: Option<usize>) -> Result<(), CliError> {
    let sweep = exp
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::config("config has no sweep section"))?;
    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", out_dir.display())))?;

    let mut resolved = exp.clone();
    resolved.out_dir = Some(out_dir.to_path_buf());
    fs::write(
        out_dir.join("config_resolved.json"),
        serde_json::to_string_pretty(&resolved).map_err(cct::Error::from)?,
    )
    .map_err(cct::Error::from)?;

    let grid = cartesian(exp);
    let cells: Vec<(usize, &Assignment, u64)> = grid
        .iter()
        .enumerate()
        .flat_map(|(gi, a)| sweep.seeds.iter().map(move |&s| (gi, a, s)))
        .collect();

    let run_cell = |&(gi, assignment, seed): &(usize, &Assignment, u64)| -> (usize, u64, Result<RunSummary, CliError>) {
        let result = (|| {
            let mut cell_exp = exp.clone();
            cell_exp.sweep = None;
            for (field, value) in assignment {
                apply_axis(&mut cell_exp.train, field, value)?;
            }
            cell_exp.train.seed = seed;
            // Repeats draw their own corruption pattern; cells within one
            // repeat share it, so ablation axes see paired data.
            cell_exp.train.noise.seed = exp.train.noise.seed ^ seed;
            let cell_dir = out_dir.join("cells").join(cell_name(assignment, seed));
            run_experiment(&cell_exp, &cell_dir)
        })();
        (gi, seed, result)
    };

    let results: Vec<(usize, u64, Result<RunSummary, CliError>)> = match workers {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|e| CliError::config(format!("cannot build worker pool: {e}")))?;
            pool.install(|| cells.par_iter().map(run_cell).collect())
        }
        None => cells.par_iter().map(run_cell).collect(),
    };

    // Merge single-threaded, in grid order.
    let axis_fields: Vec<&str> = sweep.axes.iter().map(|a| a.field.as_str()).collect();
    let mut header: Vec<String> = axis_fields.iter().map(|f| f.to_string()).collect();
    header.extend(
        ["seeds", "f1_mean", "f1_std", "acc_mean", "acc_std", "overall_mean", "overall_std", "status"]
            .map(str::to_string),
    );

    let mut csv = fs::File::create(out_dir.join("sweep.csv")).map_err(cct::Error::from)?;
    writeln!(csv, "{}", header.join(",")).map_err(cct::Error::from)?;

    let mut any_failure = false;
    for (gi, assignment) in grid.iter().enumerate() {
        let mut f1s = Vec::new();
        let mut accs = Vec::new();
        let mut overalls = Vec::new();
        let mut failed = false;
        for &(rgi, seed, ref result) in &results {
            if rgi != gi {
                continue;
            }
            match result {
                Ok(summary) => match cell_metrics(summary) {
                    Some((f1, acc, overall)) => {
                        f1s.push(f1);
                        accs.push(acc);
                        overalls.push(overall);
                    }
                    None => failed = true,
                },
                Err(e) => {
                    eprintln!("cell {} failed: {}", cell_name(assignment, seed), e.message());
                    failed = true;
                }
            }
        }

        let mut row: Vec<String> = assignment.iter().map(|(_, v)| v.to_string()).collect();
        if failed || f1s.is_empty() {
            any_failure = true;
            row.push(format!("{}", f1s.len()));
            row.extend(std::iter::repeat_n(String::new(), 6));
            row.push("failed".into());
        } else {
            let (f1_m, f1_s) = mean_std(&f1s);
            let (acc_m, acc_s) = mean_std(&accs);
            let (ov_m, ov_s) = mean_std(&overalls);
            row.push(format!("{}", f1s.len()));
            for v in [f1_m, f1_s, acc_m, acc_s, ov_m, ov_s] {
                row.push(format!("{v}"));
            }
            row.push("ok".into());
        }
        writeln!(csv, "{}", row.join(",")).map_err(cct::Error::from)?;
    }
    csv.flush().map_err(cct::Error::from)?;

    if any_failure {
        eprintln!("sweep finished with failed rows; see {}", out_dir.join("sweep.csv").display());
    }
    Ok(())
}
