//! Side-by-side table of finished runs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::artifacts::{read_summary, Summary, HISTORY_FILE};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub run: String,
    pub mode: String,
    pub dofs: usize,
    /// Work units against the first run's reference DOFs.
    pub work_units: f64,
    /// Informative only.
    pub wall_time: f64,
    pub l2_error: f64,
    pub speed_up: f64,
}

pub fn load(dirs: &[PathBuf]) -> CliResult<Vec<(PathBuf, Summary, f64)>> {
    dirs.iter()
        .map(|d| Ok((d.clone(), read_summary(d)?, last_wall_time(d))))
        .collect()
}

/// Last wall-time entry of the residual history, 0 when unreadable.
fn last_wall_time(dir: &Path) -> f64 {
    std::fs::read_to_string(dir.join(HISTORY_FILE))
        .ok()
        .and_then(|text| {
            text.lines()
                .rfind(|l| !l.starts_with('#'))
                .and_then(|l| l.rsplit(',').next().and_then(|v| v.parse().ok()))
        })
        .unwrap_or(0.0)
}

/// Rows relative to the first run. Work units of every run are rescaled
/// to the first run's reference DOFs, so the speed-up is the work-unit
/// ratio.
pub fn table(runs: &[(PathBuf, Summary, f64)]) -> CliResult<Vec<Row>> {
    if runs.len() < 2 {
        return Err(CliError::Compare(format!("need at least two runs, got {}", runs.len())));
    }
    let first = &runs[0].1;
    if let Some((d, s, _)) = runs.iter().find(|(_, s, _)| s.case != first.case) {
        return Err(CliError::Compare(format!(
            "{} is case '{}', expected '{}'",
            d.display(),
            s.case,
            first.case
        )));
    }
    let scale = 3.0 * first.reference_dofs as f64;
    let base = first.node_evaluations as f64 / scale;
    Ok(runs
        .iter()
        .map(|(d, s, wall)| {
            let wu = s.node_evaluations as f64 / scale;
            Row {
                run: d.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
                mode: s.mode.clone(),
                dofs: s.dofs_final,
                work_units: wu,
                wall_time: *wall,
                l2_error: s.l2_error,
                speed_up: base / wu,
            }
        })
        .collect())
}

pub fn markdown(rows: &[Row]) -> String {
    let mut s = String::from("| run | mode | DOF | work units | wall time (s) | L2 error | speed-up |\n");
    s.push_str("|---|---|---:|---:|---:|---:|---:|\n");
    for r in rows {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {:.1} | {:.2} | {:.3e} | {:.2} |",
            r.run, r.mode, r.dofs, r.work_units, r.wall_time, r.l2_error, r.speed_up
        );
    }
    s
}

pub fn csv(rows: &[Row]) -> String {
    let mut s = String::from("run,mode,dofs,work_units,wall_time,l2_error,speed_up\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:e},{}",
            r.run, r.mode, r.dofs, r.work_units, r.wall_time, r.l2_error, r.speed_up
        );
    }
    s
}
