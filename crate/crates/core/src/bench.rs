//! Benchmark harness: run the hybrid pipeline and the unseeded baseline over
//! a directory of DIMACS files with an identical timeout, then score both
//! with PAR2 and cumulative solved-versus-time-limit curves.

use crate::cdcl::SolveStatus;
use crate::cnf::parse_dimacs;
use crate::hybrid::{solve_baseline, solve_hybrid, HybridConfig};
use serde::Serialize;
use std::io::Write;
use std::path::Path;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("no .cnf files found in {0}")]
    EmptySuite(String),
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub instance: String,
    pub solver: String,
    pub status: SolveStatus,
    pub seconds: f64,
    pub timeout_seconds: f64,
    pub gradient_seconds: f64,
    pub refinement_seconds: f64,
}

impl RunRecord {
    pub fn solved(&self) -> bool {
        self.status != SolveStatus::Unknown
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkReport {
    pub schema: u32,
    pub timeout_seconds: f64,
    pub records: Vec<RunRecord>,
    pub par2_hybrid: f64,
    pub par2_baseline: f64,
    pub curve_grid: Vec<f64>,
    pub curve_hybrid: Vec<usize>,
    pub curve_baseline: Vec<usize>,
}

impl BenchmarkReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    /// CSV of both cumulative curves: `limit,solved_hybrid,solved_baseline`.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("limit,solved_hybrid,solved_baseline\n");
        for (i, limit) in self.curve_grid.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{}\n",
                limit, self.curve_hybrid[i], self.curve_baseline[i]
            ));
        }
        out
    }
}

/// Penalized average runtime: solved instances contribute their wall time,
/// unsolved ones 2x the timeout; mean over all records.
pub fn compute_par2(records: &[RunRecord], timeout: f64) -> f64 {
    assert!(!records.is_empty(), "PAR2 of an empty record list");
    let total: f64 = records
        .iter()
        .map(|r| if r.solved() { r.seconds } else { 2.0 * timeout })
        .sum();
    total / records.len() as f64
}

/// For each time limit in the ascending `grid`, how many records were solved
/// within that limit.
pub fn cumulative_curve(records: &[RunRecord], grid: &[f64]) -> Vec<(f64, usize)> {
    debug_assert!(grid.windows(2).all(|w| w[0] <= w[1]));
    grid.iter()
        .map(|&limit| {
            let count = records
                .iter()
                .filter(|r| r.solved() && r.seconds <= limit)
                .count();
            (limit, count)
        })
        .collect()
}

fn default_grid(timeout: f64) -> Vec<f64> {
    let steps = 20;
    (1..=steps)
        .map(|i| timeout * i as f64 / steps as f64)
        .collect()
}

/// Run every `.cnf` file in `directory` through the hybrid pipeline and the
/// unseeded baseline with the same timeout. A file that fails to parse or a
/// run that errors is recorded as UNKNOWN and the suite continues.
pub fn run_suite(
    directory: &Path,
    config: &HybridConfig,
    timeout: Duration,
) -> Result<BenchmarkReport, BenchError> {
    let mut paths: Vec<_> = std::fs::read_dir(directory)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "cnf"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(BenchError::EmptySuite(directory.display().to_string()));
    }

    let timeout_seconds = timeout.as_secs_f64();
    let mut config = config.clone();
    config.global_timeout = Some(timeout);
    let mut records = Vec::new();
    for path in &paths {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let formula = std::fs::read_to_string(path)
            .ok()
            .and_then(|text| parse_dimacs(&text, &name).ok());
        let Some(formula) = formula else {
            for solver in ["hybrid", "baseline"] {
                records.push(RunRecord {
                    instance: name.clone(),
                    solver: solver.into(),
                    status: SolveStatus::Unknown,
                    seconds: timeout_seconds,
                    timeout_seconds,
                    gradient_seconds: 0.0,
                    refinement_seconds: 0.0,
                });
            }
            continue;
        };

        match solve_hybrid(&formula, &config) {
            Ok(res) => records.push(RunRecord {
                instance: name.clone(),
                solver: "hybrid".into(),
                status: res.outcome.status,
                seconds: res.total_seconds,
                timeout_seconds,
                gradient_seconds: res.gradient_seconds,
                refinement_seconds: res.refinement_seconds,
            }),
            Err(_) => records.push(RunRecord {
                instance: name.clone(),
                solver: "hybrid".into(),
                status: SolveStatus::Unknown,
                seconds: timeout_seconds,
                timeout_seconds,
                gradient_seconds: 0.0,
                refinement_seconds: 0.0,
            }),
        }

        let base = solve_baseline(&formula, Some(timeout));
        records.push(RunRecord {
            instance: name.clone(),
            solver: "baseline".into(),
            status: base.status,
            seconds: base.stats.wall_seconds,
            timeout_seconds,
            gradient_seconds: 0.0,
            refinement_seconds: base.stats.wall_seconds,
        });
    }

    let hybrid: Vec<RunRecord> = records
        .iter()
        .filter(|r| r.solver == "hybrid")
        .cloned()
        .collect();
    let baseline: Vec<RunRecord> = records
        .iter()
        .filter(|r| r.solver == "baseline")
        .cloned()
        .collect();
    let grid = default_grid(timeout_seconds);
    let curve_hybrid = cumulative_curve(&hybrid, &grid);
    let curve_baseline = cumulative_curve(&baseline, &grid);
    Ok(BenchmarkReport {
        schema: 1,
        timeout_seconds,
        par2_hybrid: compute_par2(&hybrid, timeout_seconds),
        par2_baseline: compute_par2(&baseline, timeout_seconds),
        records,
        curve_grid: grid,
        curve_hybrid: curve_hybrid.into_iter().map(|(_, c)| c).collect(),
        curve_baseline: curve_baseline.into_iter().map(|(_, c)| c).collect(),
    })
}

pub fn write_artifacts(report: &BenchmarkReport, out_dir: &Path) -> Result<(), BenchError> {
    std::fs::create_dir_all(out_dir)?;
    let mut json = std::fs::File::create(out_dir.join("report.json"))?;
    json.write_all(report.to_json().as_bytes())?;
    let mut csv = std::fs::File::create(out_dir.join("curves.csv"))?;
    csv.write_all(report.curves_csv().as_bytes())?;
    Ok(())
}
