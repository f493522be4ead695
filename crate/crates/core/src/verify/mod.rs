//! Desk-scale experiments: Poincaré constants, the punctured-disk flux
//! defect, Hölder exponent estimates and convergence studies.
//!
//! Every experiment produces a [`Report`]: one CSV row per level plus a
//! JSON summary of the fitted value and the checks it was held to.

mod convergence;
mod holder;
mod poincare;
mod punctured;
mod studies;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use convergence::{convergence_study, ConvergenceProblem};
pub use holder::{holder_exponent, HolderFit, HOLDER_BINS};
pub use poincare::{
    poincare_constant_2, poincare_lower_bound_nested, poincare_lower_bound_p, poincare_quotient, PoincareBound,
    PoincareMode,
};
pub use punctured::{counterexample_punctured, PuncturedSetup};
pub use studies::{holder_study, poincare_lower_bound_study, poincare_wirtinger_study, HOLDER_CASES};

/// A named comparison against a target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// `|value − target| ≤ tolerance · |target|`.
    pub fn relative(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            target,
            tolerance,
            pass: (value - target).abs() <= tolerance * target.abs(),
        }
    }

    /// `|value − target| ≤ tolerance`.
    pub fn absolute(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            target,
            tolerance,
            pass: (value - target).abs() <= tolerance,
        }
    }

    /// `value ≤ bound`.
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            target: bound,
            tolerance: 0.0,
            pass: value <= bound,
        }
    }

    /// `value ≥ bound`.
    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            target: bound,
            tolerance: 0.0,
            pass: value >= bound,
        }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self {
            name: name.into(),
            value: f64::from(u8::from(ok)),
            target: 1.0,
            tolerance: 0.0,
            pass: ok,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub level: usize,
    pub h: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub parameters: BTreeMap<String, serde_json::Value>,
    /// Names of the measurement columns following `level` and `h`.
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
    /// `None` when the quantity is exact (no rate to fit) or undefined.
    pub fitted_value: Option<f64>,
    pub tolerance: f64,
    pub checks: Vec<Check>,
}

/// The JSON summary written next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub experiment: String,
    pub fitted_value: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config_hash: Option<String>,
}

impl Report {
    pub fn new(experiment: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            experiment: experiment.into(),
            parameters: BTreeMap::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            fitted_value: None,
            tolerance: 0.0,
            checks: Vec::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Serialize) -> Self {
        self.parameters
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(serde_json::Value::Null));
        self
    }

    pub fn push_row(&mut self, level: usize, h: f64, values: Vec<f64>) {
        assert_eq!(values.len(), self.columns.len(), "row width differs from the column list");
        self.rows.push(Row { level, h, values });
    }

    /// Values of one measurement column, in row order.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r.values[idx]).collect())
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn summary(&self, config_hash: Option<&str>) -> Summary {
        Summary {
            experiment: self.experiment.clone(),
            fitted_value: self.fitted_value,
            tolerance: self.tolerance,
            pass: self.pass(),
            checks: self.checks.clone(),
            config_hash: config_hash.map(str::to_string),
        }
    }

    /// CSV with header `level,h,<columns>` and, when given, a trailing
    /// `config_hash` column.
    pub fn to_csv(&self, config_hash: Option<&str>) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["level".to_string(), "h".to_string()];
        header.extend(self.columns.iter().cloned());
        if config_hash.is_some() {
            header.push("config_hash".into());
        }
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.level.to_string(), fmt_f64(row.h)];
            rec.extend(row.values.iter().map(|&v| fmt_f64(v)));
            if let Some(hash) = config_hash {
                rec.push(hash.to_string());
            }
            w.write_record(&rec)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, config_hash: Option<&str>) -> Result<()> {
        File::create(path)?.write_all(&self.to_csv(config_hash)?)?;
        Ok(())
    }

    pub fn write_summary(&self, path: impl AsRef<Path>, config_hash: Option<&str>) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.summary(config_hash))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// Shortest representation that parses back to the same bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Least-squares slope of `log err` against `log h`.
///
/// Returns `None` with fewer than two usable points (nonpositive entries
/// are skipped).
pub fn fit_rate(h: &[f64], err: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = h
        .iter()
        .zip(err)
        .filter(|(h, e)| **h > 0.0 && **e > 0.0)
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    linear_fit(&pts).map(|(slope, _)| slope)
}

/// Ordinary least squares `y = a x + b`; returns `(a, r²)`.
pub(crate) fn linear_fit(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Some((slope, r2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_of_power_law() {
        let h = [0.5, 0.25, 0.125];
        let e: Vec<f64> = h.iter().map(|h: &f64| 3.0 * h.powi(2)).collect();
        assert!((fit_rate(&h, &e).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(fit_rate(&[1.0], &[1.0]), None);
        let (_, r2) = linear_fit(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]).unwrap();
        assert!((r2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn csv_layout() {
        let mut r = Report::new("demo", &["err"]);
        r.push_row(0, 0.5, vec![0.1]);
        r.push_row(1, 0.25, vec![1.0 / 3.0]);
        let text = String::from_utf8(r.to_csv(Some("abc")).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "level,h,err,config_hash");
        assert_eq!(lines[2], "1,0.25,0.3333333333333333,abc");
        assert!(r.pass());
        r.checks.push(Check::at_most("small", 2.0, 1.0));
        assert!(!r.pass());
        let s = serde_json::to_value(r.summary(None)).unwrap();
        assert_eq!(s["experiment"], "demo");
        assert_eq!(s["pass"], false);
        assert!(s.get("config_hash").is_none());
    }

    #[test]
    fn check_kinds() {
        assert!(Check::relative("a", 1.04, 1.0, 0.05).pass);
        assert!(!Check::relative("a", 1.06, 1.0, 0.05).pass);
        assert!(Check::absolute("b", 1e-11, 0.0, 1e-10).pass);
        assert!(Check::at_least("c", 1.0, 1.0).pass);
        assert!(!Check::flag("d", false).pass);
    }
}
