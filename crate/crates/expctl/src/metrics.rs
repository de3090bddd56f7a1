//! Metric records, CSV and JSON emission, and run summaries.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ExpError;

pub const CSV_HEADER: [&str; 6] = ["run_id", "seed", "step", "metric", "value", "units"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub run_id: String,
    pub seed: u64,
    /// Episode or slot index, depending on the metric.
    pub step: u64,
    pub metric: String,
    pub value: f64,
    pub units: String,
}

impl MetricsRecord {
    pub fn new(run_id: &str, seed: u64, step: u64, metric: &str, value: f64, units: &str) -> Self {
        Self { run_id: run_id.into(), seed, step, metric: metric.into(), value, units: units.into() }
    }

    fn check(&self, index: usize) -> Result<(), ExpError> {
        if !self.value.is_finite() {
            return Err(ExpError::Metrics(format!(
                "record {index} ({} seed {} step {} {}) has non-finite value {}",
                self.run_id, self.seed, self.step, self.metric, self.value
            )));
        }
        for text in [&self.run_id, &self.metric, &self.units] {
            if !text.is_ascii() {
                return Err(ExpError::Metrics(format!("record {index} has non-ASCII text {text:?}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricsFormat {
    Csv,
    Json,
}

/// Header plus one row per record, comma separated, `\n` line endings.
pub fn to_csv(records: &[MetricsRecord]) -> Result<String, ExpError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(|e| ExpError::Metrics(e.to_string()))?;
    for (i, r) in records.iter().enumerate() {
        r.check(i)?;
        w.write_record([
            r.run_id.as_str(),
            &r.seed.to_string(),
            &r.step.to_string(),
            r.metric.as_str(),
            &format_value(r.value),
            r.units.as_str(),
        ])
        .map_err(|e| ExpError::Metrics(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| ExpError::Metrics(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| ExpError::Metrics(e.to_string()))
}

/// Shortest round-trip decimal; never uses exponent notation.
pub fn format_value(v: f64) -> String {
    let s = format!("{v}");
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

pub fn parse_csv(text: &str) -> Result<Vec<MetricsRecord>, ExpError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> =
        r.headers().map_err(|e| ExpError::Metrics(e.to_string()))?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(ExpError::Metrics(format!("unexpected header {header:?}")));
    }
    r.records()
        .map(|row| {
            let row = row.map_err(|e| ExpError::Metrics(e.to_string()))?;
            let num = |i: usize| row[i].parse::<f64>().map_err(|e| ExpError::Metrics(format!("{}: {e}", &row[i])));
            let int = |i: usize| row[i].parse::<u64>().map_err(|e| ExpError::Metrics(format!("{}: {e}", &row[i])));
            Ok(MetricsRecord {
                run_id: row[0].to_string(),
                seed: int(1)?,
                step: int(2)?,
                metric: row[3].to_string(),
                value: num(4)?,
                units: row[5].to_string(),
            })
        })
        .collect()
}

pub fn emit_metrics(records: &[MetricsRecord], format: MetricsFormat, path: &Path) -> Result<(), ExpError> {
    let text = match format {
        MetricsFormat::Csv => to_csv(records)?,
        MetricsFormat::Json => {
            for (i, r) in records.iter().enumerate() {
                r.check(i)?;
            }
            to_json(records)?
        }
    };
    write_file(path, &text)
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String, ExpError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| ExpError::Metrics(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_file(path: &Path, text: &str) -> Result<(), ExpError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| ExpError::Io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| ExpError::Io(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub stddev: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { count: 0, mean: 0.0, stddev: 0.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self { count: values.len(), mean, stddev: var.sqrt() }
    }
}

/// Aggregates of every metric for one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedAggregate {
    pub seed: u64,
    pub metrics: BTreeMap<String, Stat>,
}

/// Per-seed aggregates in seed order, computed from the records in file order.
pub fn aggregate(records: &[MetricsRecord]) -> Vec<SeedAggregate> {
    let mut by_seed: BTreeMap<u64, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for r in records {
        by_seed.entry(r.seed).or_default().entry(r.metric.clone()).or_default().push(r.value);
    }
    by_seed
        .into_iter()
        .map(|(seed, m)| SeedAggregate { seed, metrics: m.into_iter().map(|(k, v)| (k, Stat::of(&v))).collect() })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub mode: String,
    /// SHA-256 of the effective configuration in canonical TOML.
    pub config_hash: String,
    pub seeds: Vec<SeedAggregate>,
    /// Named result tables, e.g. latency versus compute.
    pub tables: BTreeMap<String, Vec<BTreeMap<String, f64>>>,
    /// Files written by the run, relative to the output directory.
    pub artifacts: Vec<String>,
    /// Kept out of `summary.json` so reruns stay byte-identical; written to
    /// `timing.json` instead.
    #[serde(skip)]
    pub wall_clock_seconds: f64,
}

pub fn config_hash(canonical: &str) -> String {
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_set_is_header_only() {
        assert_eq!(to_csv(&[]).unwrap(), "run_id,seed,step,metric,value,units\n");
    }

    #[test]
    fn rows_round_trip() {
        let recs = vec![
            MetricsRecord::new("r", 1, 0, "latency", 1.0753433114137751, "s"),
            MetricsRecord::new("r", 1, 1, "workload", 6e10, "cycles"),
            MetricsRecord::new("r", 2, 0, "tiny", 1e-13, "W"),
        ];
        let text = to_csv(&recs).unwrap();
        assert!(text.is_ascii());
        assert!(!text.contains('E') && text.contains("60000000000"));
        assert_eq!(parse_csv(&text).unwrap(), recs);
        assert_eq!(to_csv(&recs).unwrap(), text);
    }

    #[test]
    fn non_finite_values_are_named() {
        let recs = vec![MetricsRecord::new("r", 3, 7, "loss", f64::NAN, "")];
        let err = to_csv(&recs).unwrap_err().to_string();
        assert!(err.contains("loss") && err.contains("step 7"), "{err}");
        assert!(to_csv(&[MetricsRecord::new("r", 0, 0, "caf\u{e9}", 1.0, "")]).is_err());
    }

    #[test]
    fn aggregates_match_direct_computation() {
        let recs = vec![
            MetricsRecord::new("r", 1, 0, "a", 1.0, ""),
            MetricsRecord::new("r", 1, 1, "a", 3.0, ""),
            MetricsRecord::new("r", 0, 0, "a", 5.0, ""),
        ];
        let agg = aggregate(&recs);
        assert_eq!(agg[0].seed, 0);
        assert_eq!(agg[1].metrics["a"], Stat { count: 2, mean: 2.0, stddev: 1.0 });
    }
}
