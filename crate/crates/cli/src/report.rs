//! Experiment reports: raw per-run records, aggregate statistics and the
//! summary file with PASS/FAIL lines.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use deepc::controllers::write_diagnostics_csv;
use deepc::StepRecord;

/// One closed-loop run (or one system, for the equivalence experiment).
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub method: String,
    /// Grid point label, empty when there is no grid.
    pub point: String,
    pub rep: usize,
    pub data_seed: u64,
    pub noise_seed: u64,
    /// Realized cost; `None` for failed runs.
    pub cost: Option<f64>,
    /// Seconds with at least one output outside its box.
    pub violation_s: Option<f64>,
    pub duration_s: f64,
    pub status: String,
    /// Experiment-specific numbers, written as extra columns.
    pub extra: Vec<(String, String)>,
}

impl RunRecord {
    pub fn failed(&self) -> bool {
        self.cost.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Median and quartiles by linear interpolation between order statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quartiles(values: &[f64]) -> Option<Quartiles> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(Quartiles {
        q1: quantile(&v, 0.25),
        median: quantile(&v, 0.5),
        q3: quantile(&v, 0.75),
    })
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentReport {
    pub experiment: String,
    pub runs: Vec<RunRecord>,
    pub checks: Vec<Check>,
    /// Free-form `key = value` lines for the summary.
    pub notes: Vec<String>,
    /// Wall-clock solve times in milliseconds, pooled over all runs.
    pub solve_ms: Vec<f64>,
    /// Per-run step diagnostics, written to `diagnostics/<name>.csv`.
    pub diagnostics: Vec<(String, Vec<StepRecord>)>,
    /// Further CSV files `(name, contents)`.
    pub tables: Vec<(String, String)>,
}

impl ExperimentReport {
    pub fn new(experiment: &str) -> Self {
        Self {
            experiment: experiment.to_string(),
            ..Self::default()
        }
    }

    pub fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.to_string(),
            pass,
            detail: detail.into(),
        });
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.notes.push(line.into());
    }

    /// True when every check passed. Experiments without checks pass.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Successful runs of `method` at `point`.
    pub fn completed<'a>(&'a self, method: &'a str, point: &'a str) -> impl Iterator<Item = &'a RunRecord> + 'a {
        self.runs
            .iter()
            .filter(move |r| r.method == method && r.point == point && !r.failed())
    }

    pub fn runs_csv(&self) -> Result<String> {
        let mut extra_keys: Vec<&str> = Vec::new();
        for r in &self.runs {
            for (k, _) in &r.extra {
                if !extra_keys.contains(&k.as_str()) {
                    extra_keys.push(k);
                }
            }
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![
            "method",
            "point",
            "rep",
            "data_seed",
            "noise_seed",
            "cost",
            "violation_s",
            "duration_s",
            "status",
        ];
        header.extend(&extra_keys);
        w.write_record(&header)?;
        for r in &self.runs {
            let opt = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:e}"));
            let mut row = vec![
                r.method.clone(),
                r.point.clone(),
                r.rep.to_string(),
                r.data_seed.to_string(),
                r.noise_seed.to_string(),
                opt(r.cost),
                opt(r.violation_s),
                format!("{}", r.duration_s),
                r.status.clone(),
            ];
            for key in &extra_keys {
                row.push(
                    r.extra
                        .iter()
                        .find(|(k, _)| k == key)
                        .map_or_else(String::new, |(_, v)| v.clone()),
                );
            }
            w.write_record(&row)?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }

    /// Summary text: one `PASS name: detail` / `FAIL name: detail` line per
    /// check, then aggregates per (method, point), then notes.
    pub fn summary(&self) -> String {
        let mut s = format!("experiment = {}\n", self.experiment);
        for c in &self.checks {
            let _ = writeln!(s, "{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        let _ = writeln!(s, "overall = {}", if self.passed() { "PASS" } else { "FAIL" });
        let mut groups: Vec<(&str, &str)> = Vec::new();
        for r in &self.runs {
            if !groups.contains(&(r.method.as_str(), r.point.as_str())) {
                groups.push((&r.method, &r.point));
            }
        }
        for (method, point) in groups {
            let all = self
                .runs
                .iter()
                .filter(|r| r.method == method && r.point == point)
                .count();
            let costs: Vec<f64> = self.completed(method, point).filter_map(|r| r.cost).collect();
            let viol: Vec<f64> = self.completed(method, point).filter_map(|r| r.violation_s).collect();
            let label = if point.is_empty() {
                method.to_string()
            } else {
                format!("{method} {point}")
            };
            let _ = write!(s, "stats {label}: runs={all} failed={}", all - costs.len());
            if let (Some(c), Some(v)) = (quartiles(&costs), quartiles(&viol)) {
                let _ = write!(
                    s,
                    " cost_mean={:.6e} cost_q1={:.6e} cost_median={:.6e} cost_q3={:.6e} violation_mean_s={:.4} violation_median_s={:.4}",
                    mean(&costs).unwrap_or(f64::NAN),
                    c.q1,
                    c.median,
                    c.q3,
                    mean(&viol).unwrap_or(f64::NAN),
                    v.median
                );
            }
            s.push('\n');
        }
        for n in &self.notes {
            let _ = writeln!(s, "{n}");
        }
        s
    }

    /// Solve-time statistics. Kept out of the summary and the CSVs because
    /// wall-clock times differ between invocations.
    pub fn timing(&self) -> String {
        match quartiles(&self.solve_ms) {
            Some(q) => format!(
                "solves = {}\nsolve_ms_mean = {:.3}\nsolve_ms_q1 = {:.3}\nsolve_ms_median = {:.3}\nsolve_ms_q3 = {:.3}\nsolve_ms_max = {:.3}\n",
                self.solve_ms.len(),
                mean(&self.solve_ms).unwrap_or(f64::NAN),
                q.q1,
                q.median,
                q.q3,
                self.solve_ms.iter().copied().fold(0.0, f64::max)
            ),
            None => "solves = 0\n".to_string(),
        }
    }

    /// Writes `runs.csv`, `summary.txt`, `timing.txt`, the diagnostics and
    /// the extra tables under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        if !self.runs.is_empty() {
            fs::write(dir.join("runs.csv"), self.runs_csv()?)?;
        }
        fs::write(dir.join("summary.txt"), self.summary())?;
        fs::write(dir.join("timing.txt"), self.timing())?;
        if !self.diagnostics.is_empty() {
            let diag = dir.join("diagnostics");
            fs::create_dir_all(&diag)?;
            for (name, records) in &self.diagnostics {
                let file = fs::File::create(diag.join(format!("{name}.csv")))?;
                write_diagnostics_csv(records, std::io::BufWriter::new(file))?;
            }
        }
        for (name, contents) in &self.tables {
            fs::write(dir.join(name), contents)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(method: &str, cost: Option<f64>) -> RunRecord {
        RunRecord {
            method: method.into(),
            point: String::new(),
            rep: 0,
            data_seed: 1,
            noise_seed: 2,
            cost,
            violation_s: cost.map(|_| 0.0),
            duration_s: 6.0,
            status: if cost.is_some() { "ok" } else { "failed" }.into(),
            extra: vec![("max_du".into(), "1e-9".into())],
        }
    }

    #[test]
    fn quartiles_interpolate() {
        let q = quartiles(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((q.q1, q.median, q.q3), (1.75, 2.5, 3.25));
        assert_eq!(quartiles(&[5.0]).unwrap().median, 5.0);
        assert!(quartiles(&[]).is_none());
    }

    #[test]
    fn summary_lists_checks_and_failures() {
        let mut rep = ExperimentReport::new("step-stats");
        rep.runs = vec![run("deepc", Some(1.0)), run("deepc", None), run("deepc", Some(3.0))];
        rep.check("median_cost", true, "1 <= 2");
        rep.check("violations", false, "2 of 10");
        let s = rep.summary();
        assert!(s.contains("PASS median_cost: 1 <= 2\n"));
        assert!(s.contains("FAIL violations: 2 of 10\n"));
        assert!(s.contains("overall = FAIL"));
        assert!(s.contains("runs=3 failed=1"));
        assert!(s.contains("cost_median=2.000000e0"));
        assert!(!rep.passed());
    }

    #[test]
    fn runs_csv_has_one_row_per_run() {
        let mut rep = ExperimentReport::new("x");
        rep.runs = vec![run("a", Some(1.5)), run("b", None)];
        let csv = rep.runs_csv().unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].ends_with("status,max_du"));
        assert!(lines[1].starts_with("a,,0,1,2,1.5e0,0e0,6,ok"));
        assert!(lines[2].starts_with("b,,0,1,2,,,6,failed"));
    }
}
