//! Run directory contents.
//!
//! Every file names the hash of the configuration that produced it: CSV
//! and text files on a `# config_hash <hex>` line, JSON files in a top
//! level `config_hash` field. Files are written to a temporary in the run
//! directory and renamed into place.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use dgtau_core::dg::{NodalField, OrderField};
use dgtau_core::multigrid::HistoryEntry;
use dgtau_core::tau::TauMap;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const SOLUTION_HEADER: &str = "# dgtau solution v1";
pub const SUMMARY_FILE: &str = "summary.json";
pub const FAILURE_FILE: &str = "failure.json";
pub const HISTORY_FILE: &str = "residual_history.csv";

pub fn config_hash(cfg: &RunConfig) -> String {
    hex::encode(Sha256::digest(cfg.canonical_json().as_bytes()))
}

#[derive(Debug, Clone)]
pub struct ArtifactWriter {
    dir: PathBuf,
    hash: String,
}

impl ArtifactWriter {
    pub fn create(dir: &Path, hash: String) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            hash,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn write(&self, name: &str, contents: &str) -> CliResult<PathBuf> {
        let target = self.dir.join(name);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(contents.as_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(&target).map_err(|e| CliError::Io(format!("{}: {e}", target.display())))?;
        Ok(target)
    }

    /// Writes `value` with a top level `config_hash` field added.
    pub fn write_json(&self, name: &str, value: &impl Serialize) -> CliResult<PathBuf> {
        let body = serde_json::to_value(value).map_err(|e| CliError::Io(e.to_string()))?;
        let mut out = serde_json::Map::new();
        out.insert("config_hash".into(), self.hash.clone().into());
        match body {
            serde_json::Value::Object(m) => out.extend(m),
            other => {
                out.insert("data".into(), other);
            }
        }
        let mut text = serde_json::to_string_pretty(&out).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }

    fn csv_header(&self) -> String {
        format!("# config_hash {}\n", self.hash)
    }

    pub fn write_history(&self, entries: &[HistoryEntry]) -> CliResult<PathBuf> {
        let mut s = self.csv_header();
        s.push_str("cycle,level,phase,sweeps,residual,work_units,wall_time\n");
        for h in entries {
            let _ = writeln!(
                s,
                "{},{},{},{},{:e},{},{}",
                h.cycle,
                h.level,
                h.phase.name(),
                h.sweeps,
                h.residual,
                h.work_units,
                h.wall_time
            );
        }
        self.write(HISTORY_FILE, &s)
    }

    pub fn write_orders(&self, name: &str, orders: &OrderField) -> CliResult<PathBuf> {
        let mut s = self.csv_header();
        s.push_str("element,n1,n2\n");
        for (e, o) in orders.as_slice().iter().enumerate() {
            let _ = writeln!(s, "{e},{},{}", o[0], o[1]);
        }
        self.write(name, &s)
    }

    /// Long-format directional estimates: one row per element, direction
    /// and order.
    pub fn write_tau_csv(&self, name: &str, map: &TauMap) -> CliResult<PathBuf> {
        let mut s = self.csv_header();
        s.push_str("element,direction,n,tau\n");
        for t in &map.elements {
            for (d, values) in t.directional.iter().enumerate() {
                for (k, v) in values.iter().enumerate() {
                    let _ = writeln!(s, "{},{},{},{:e}", t.element, d + 1, k + 1, v);
                }
            }
        }
        self.write(name, &s)
    }

    pub fn write_solution(&self, name: &str, q: &NodalField) -> CliResult<PathBuf> {
        self.write(name, &format_solution(&self.hash, q))
    }
}

/// Text dump: a header, the hash, the element count, then per element an
/// `element <id> <n1> <n2>` line followed by one line of values per row of
/// nodes (first index fastest).
pub fn format_solution(hash: &str, q: &NodalField) -> String {
    let mut s = format!("{SOLUTION_HEADER}\n# config_hash {hash}\nelements {}\n", q.n_elements());
    for e in 0..q.n_elements() {
        let o = q.order(e);
        let _ = writeln!(s, "element {e} {} {}", o[0], o[1]);
        for row in q.element(e).chunks(o[0] + 1) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
    }
    s
}

pub fn parse_solution(text: &str) -> CliResult<NodalField> {
    let bad = |m: String| CliError::Io(format!("solution file: {m}"));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next() != Some(SOLUTION_HEADER) {
        return Err(bad("missing version header".into()));
    }
    let mut lines = lines.filter(|l| !l.starts_with('#'));
    let count: usize = lines
        .next()
        .and_then(|l| l.strip_prefix("elements "))
        .and_then(|n| n.trim().parse().ok())
        .ok_or_else(|| bad("missing element count".into()))?;
    let mut orders = Vec::with_capacity(count);
    let mut values = Vec::with_capacity(count);
    for e in 0..count {
        let head: Vec<&str> = lines
            .next()
            .ok_or_else(|| bad(format!("element {e} missing")))?
            .split_whitespace()
            .collect();
        let parsed: Option<Vec<usize>> = head.get(1..4).map(|t| t.iter().filter_map(|x| x.parse().ok()).collect());
        let o = match (head.first(), parsed) {
            (Some(&"element"), Some(v)) if v.len() == 3 && v[0] == e => [v[1], v[2]],
            _ => return Err(bad(format!("bad element line for element {e}"))),
        };
        let mut vals = Vec::with_capacity((o[0] + 1) * (o[1] + 1));
        for _ in 0..=o[1] {
            let row = lines.next().ok_or_else(|| bad(format!("element {e} truncated")))?;
            let before = vals.len();
            for tok in row.split_whitespace() {
                vals.push(tok.parse::<f64>().map_err(|_| bad(format!("bad value '{tok}'")))?);
            }
            if vals.len() - before != o[0] + 1 {
                return Err(bad(format!("element {e}: row of {} values, expected {}", vals.len() - before, o[0] + 1)));
            }
        }
        orders.push(o);
        values.push(vals);
    }
    NodalField::from_elements(&OrderField::new(orders), values).map_err(|e| bad(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: usize,
    pub reference: usize,
    pub cap: usize,
    pub dofs_before: usize,
    pub dofs_after: usize,
    pub max_orders: [usize; 2],
}

/// Deterministic run summary; no wall time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    pub case: String,
    pub mode: String,
    pub converged: bool,
    pub residual: f64,
    /// Multigrid cycles, or RK3 sweeps in rk3 mode.
    pub iterations: usize,
    pub work_units: f64,
    pub reference_dofs: usize,
    pub node_evaluations: u64,
    pub dofs_initial: usize,
    pub dofs_final: usize,
    pub l2_error: f64,
    pub decisions: BTreeMap<String, usize>,
    pub stages: Vec<StageSummary>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub case: String,
    pub mode: String,
    pub error: String,
    pub work_units: f64,
    pub history_entries: usize,
}

pub fn read_summary(dir: &Path) -> CliResult<Summary> {
    let path = dir.join(SUMMARY_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solution_round_trips() {
        let o = OrderField::new(vec![[1, 2], [3, 1]]);
        let vals = vec![(0..6).map(|k| k as f64 * 0.1 - 1e-17).collect(), (0..8).map(|k| (k as f64).sqrt()).collect()];
        let q = NodalField::from_elements(&o, vals).unwrap();
        let text = format_solution("abc", &q);
        assert!(text.starts_with(SOLUTION_HEADER));
        let back = parse_solution(&text).unwrap();
        assert_eq!(back, q);
        assert!(parse_solution(&text.replace("v1", "v2")).is_err());
        let lines: Vec<&str> = text.lines().collect();
        assert!(parse_solution(&lines[..lines.len() - 1].join("\n")).is_err());
        let mut short: Vec<String> = lines.iter().map(|l| l.to_string()).collect();
        let cut = short[4].rfind(' ').unwrap();
        short[4].truncate(cut);
        assert!(parse_solution(&short.join("\n")).is_err());
    }

    #[test]
    fn writes_are_atomic_and_hashed() {
        let dir = tempfile::tempdir().unwrap();
        let w = ArtifactWriter::create(dir.path(), "feed".into()).unwrap();
        w.write_json("a.json", &serde_json::json!({"x": 1})).unwrap();
        w.write_json("a.json", &serde_json::json!({"x": 2})).unwrap();
        let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 1, "{names:?}");
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.json")).unwrap()).unwrap();
        assert_eq!(v["config_hash"], "feed");
        assert_eq!(v["x"], 2);
        w.write_orders("o.csv", &OrderField::uniform(2, [3, 4])).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("o.csv")).unwrap();
        assert_eq!(csv, "# config_hash feed\nelement,n1,n2\n0,3,4\n1,3,4\n");
    }
}
