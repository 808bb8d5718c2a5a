use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Wls,
    Gbp,
    Gnn,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Wls => "wls",
            Method::Gbp => "gbp",
            Method::Gnn => "gnn",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wls" => Ok(Method::Wls),
            "gbp" => Ok(Method::Gbp),
            "gnn" => Ok(Method::Gnn),
            other => Err(Error::Config(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrssRow {
    pub tau: usize,
    pub method: Method,
    /// GBP sweep count; 0 for single-shot methods.
    pub iteration: usize,
    pub wrss: f64,
    pub normalized_wrss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileRow {
    pub method: Method,
    pub iteration: usize,
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Per-instance WRSS of every method, with ratios against WLS.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WrssReport {
    pub rows: Vec<WrssRow>,
}

impl WrssReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, tau: usize, method: Method, iteration: usize, wrss: f64, normalized_wrss: f64) {
        self.rows.push(WrssRow {
            tau,
            method,
            iteration,
            wrss,
            normalized_wrss,
        });
    }

    /// Normalized values of one method/iteration series, in row order.
    pub fn series(&self, method: Method, iteration: usize) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.method == method && r.iteration == iteration)
            .map(|r| r.normalized_wrss)
            .collect()
    }

    /// Box-plot summary of the normalized ratio per (method, iteration).
    pub fn quantiles(&self) -> Vec<QuantileRow> {
        let mut groups: BTreeMap<(Method, usize), Vec<f64>> = BTreeMap::new();
        for r in &self.rows {
            groups.entry((r.method, r.iteration)).or_default().push(r.normalized_wrss);
        }
        groups
            .into_iter()
            .map(|((method, iteration), mut values)| {
                values.sort_by(f64::total_cmp);
                QuantileRow {
                    method,
                    iteration,
                    count: values.len(),
                    min: values[0],
                    q1: quantile_sorted(&values, 0.25),
                    median: quantile_sorted(&values, 0.5),
                    q3: quantile_sorted(&values, 0.75),
                    max: values[values.len() - 1],
                }
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau,method,iteration,wrss,normalized_wrss\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{:e},{:e}", r.tau, r.method, r.iteration, r.wrss, r.normalized_wrss);
        }
        out
    }

    /// Parses the table written by [`WrssReport::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("tau,method,iteration,wrss,normalized_wrss") {
            return Err(Error::Config("WRSS table header missing".into()));
        }
        let mut report = Self::new();
        for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = || Error::Config(format!("WRSS table line {}: `{line}`", k + 2));
            let cols: Vec<&str> = line.trim().split(',').collect();
            if cols.len() != 5 {
                return Err(bad());
            }
            report.push(
                cols[0].parse().map_err(|_| bad())?,
                cols[1].parse().map_err(|_| bad())?,
                cols[2].parse().map_err(|_| bad())?,
                cols[3].parse().map_err(|_| bad())?,
                cols[4].parse().map_err(|_| bad())?,
            );
        }
        Ok(report)
    }
}

pub fn quantiles_to_csv(rows: &[QuantileRow]) -> String {
    let mut out = String::from("method,iteration,count,min,q1,median,q3,max\n");
    for q in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:e},{:e},{:e},{:e},{:e}",
            q.method, q.iteration, q.count, q.min, q.q1, q.median, q.q3, q.max
        );
    }
    out
}

/// Linear-interpolation quantile of sorted data (`h = (n-1)·p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}
