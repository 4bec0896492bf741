//! Long-format metric rows, their aggregates and threshold checks.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

pub const SCHEMA_LINE: &str = "# schema=v1";

/// One measurement. `key` is the swept quantity (width, step index,
/// sample count, degree); `seed` is the seed label of the run, or the pair
/// index for per-pair rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub section: String,
    pub key: u64,
    pub seed: u64,
    pub value: f64,
}

impl MetricRow {
    pub fn new(section: impl Into<String>, key: u64, seed: u64, value: f64) -> Self {
        MetricRow { section: section.into(), key, seed, value }
    }
}

fn render_rows(rows: &[MetricRow]) -> String {
    let mut out = String::new();
    out.push_str(SCHEMA_LINE);
    out.push('\n');
    out.push_str("section,key,seed,value\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{:e}", r.section, r.key, r.seed, r.value);
    }
    out
}

pub fn write_metrics(path: &Path, rows: &[MetricRow]) -> Result<()> {
    std::fs::write(path, render_rows(rows))?;
    Ok(())
}

fn bad(path: &Path, line: usize, msg: &str) -> LabError {
    LabError::Format(format!("{}:{line}: {msg}", path.display()))
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricRow>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        match lineno {
            1 if line != SCHEMA_LINE => return Err(bad(path, lineno, "missing schema line")),
            1 => continue,
            2 if line != "section,key,seed,value" => return Err(bad(path, lineno, "unexpected header")),
            2 => continue,
            _ => {}
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(bad(path, lineno, "expected 4 fields"));
        }
        let key = fields[1].parse().map_err(|_| bad(path, lineno, "bad key"))?;
        let seed = fields[2].parse().map_err(|_| bad(path, lineno, "bad seed"))?;
        let value = fields[3].parse().map_err(|_| bad(path, lineno, "bad value"))?;
        rows.push(MetricRow { section: fields[0].to_string(), key, seed, value });
    }
    Ok(rows)
}

/// Summary of one `(section, key)` group over its finite values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub section: String,
    pub key: u64,
    pub count: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

impl Aggregate {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

pub fn aggregate(rows: &[MetricRow]) -> Vec<Aggregate> {
    let mut groups: BTreeMap<(&str, u64), Vec<f64>> = BTreeMap::new();
    for r in rows {
        let g = groups.entry((r.section.as_str(), r.key)).or_default();
        if r.value.is_finite() {
            g.push(r.value);
        }
    }
    groups
        .into_iter()
        .map(|((section, key), mut v)| {
            v.sort_by(f64::total_cmp);
            Aggregate {
                section: section.to_string(),
                key,
                count: v.len(),
                median: quantile(&v, 0.5),
                q1: quantile(&v, 0.25),
                q3: quantile(&v, 0.75),
                min: v.first().copied().unwrap_or(f64::NAN),
                max: v.last().copied().unwrap_or(f64::NAN),
            }
        })
        .collect()
}

/// Medians of a section keyed by `key`, ascending.
pub fn medians(aggregates: &[Aggregate], section: &str) -> Vec<(u64, f64)> {
    aggregates.iter().filter(|a| a.section == section).map(|a| (a.key, a.median)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Lt => "<",
            Relation::Le => "<=",
            Relation::Ge => ">=",
        }
    }

    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Relation::Lt => value < threshold,
            Relation::Le => value <= threshold,
            Relation::Ge => value >= threshold,
        }
    }
}

/// `value relation threshold`; a NaN value never passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: &str, value: f64, relation: Relation, threshold: f64) -> Self {
        Check { name: name.to_string(), value, relation, threshold, passed: relation.holds(value, threshold) }
    }
}

pub fn write_checks(path: &Path, checks: &[Check]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{SCHEMA_LINE}")?;
    writeln!(f, "name,value,relation,threshold,passed")?;
    for c in checks {
        writeln!(f, "{},{:e},{},{:e},{}", c.name, c.value, c.relation.symbol(), c.threshold, c.passed)?;
    }
    f.flush()?;
    Ok(())
}
