//! Long-format metric tables, sample dumps and metadata files.
//!
//! `metrics.csv` has the header `preset,sampler,run,iter,metric,value`, LF line
//! endings and values printed with 17 significant digits (`inf` for `+∞`).
//! Rows aggregated over runs carry `run = -1`.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Metric names that may appear in `metrics.csv`. `time` accompanies the
/// divergence rows of the Fokker–Planck presets.
pub const METRICS: [&str; 9] = [
    "mean_sq_error",
    "scatter_rel_sq_error",
    "sinkhorn_w2",
    "exact_w2",
    "chi2",
    "kl",
    "tv",
    "hellinger2",
    "time",
];

/// `run` value of rows aggregated over runs.
pub const AGGREGATE_RUN: i64 = -1;

pub const METRICS_HEADER: &str = "preset,sampler,run,iter,metric,value";

#[derive(Clone, Debug, PartialEq)]
pub struct MetricRecord {
    pub sampler: String,
    pub run: i64,
    pub iter: usize,
    pub metric: &'static str,
    pub value: f64,
}

/// `{:.16e}` for finite values, `inf` for `+∞`.
pub fn format_value(v: f64) -> Result<String> {
    if v == f64::INFINITY {
        Ok("inf".into())
    } else if v.is_finite() {
        Ok(format!("{v:.16e}"))
    } else {
        Err(Error::Precondition(format!("metric value {v} is neither finite nor +inf")))
    }
}

/// Rows of one preset. Writing sorts them by `(sampler, run, iter, metric)`
/// so the file does not depend on the order rows were produced in.
#[derive(Clone, Debug, Default)]
pub struct MetricTable {
    pub preset: String,
    pub rows: Vec<MetricRecord>,
}

impl MetricTable {
    pub fn new(preset: &str) -> Self {
        Self {
            preset: preset.to_string(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, sampler: &str, run: i64, iter: usize, metric: &str, value: f64) -> Result<()> {
        let Some(&name) = METRICS.iter().find(|m| **m == metric) else {
            return Err(Error::UndeclaredMetric(metric.to_string()));
        };
        if sampler.contains([',', '"', '\n', '\r']) {
            return Err(Error::Precondition(format!("sampler tag `{sampler}` is not CSV-safe")));
        }
        format_value(value)?;
        self.rows.push(MetricRecord {
            sampler: sampler.to_string(),
            run,
            iter,
            metric: name,
            value,
        });
        Ok(())
    }

    pub fn sorted(&self) -> Vec<&MetricRecord> {
        let mut rows: Vec<&MetricRecord> = self.rows.iter().collect();
        rows.sort_by(|a, b| (&a.sampler, a.run, a.iter, a.metric).cmp(&(&b.sampler, b.run, b.iter, b.metric)));
        rows
    }

    /// Values of `(sampler, run, metric)` in iteration order.
    pub fn series(&self, sampler: &str, run: i64, metric: &str) -> Vec<(usize, f64)> {
        self.sorted()
            .into_iter()
            .filter(|r| r.sampler == sampler && r.run == run && r.metric == metric)
            .map(|r| (r.iter, r.value))
            .collect()
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(METRICS_HEADER);
        out.push('\n');
        for r in self.sorted() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.preset,
                r.sampler,
                r.run,
                r.iter,
                r.metric,
                format_value(r.value)?
            ));
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()?)?;
        Ok(())
    }
}

/// Sample coordinates: one row per point, header
/// `sampler,run,index,x1,...,xk`.
#[derive(Clone, Debug, Default)]
pub struct SampleTable {
    pub width: usize,
    pub rows: Vec<(String, u32, usize, Vec<f64>)>,
}

impl SampleTable {
    pub fn new(width: usize) -> Self {
        Self {
            width,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, sampler: &str, run: u32, index: usize, coords: Vec<f64>) {
        debug_assert_eq!(coords.len(), self.width);
        self.rows.push((sampler.to_string(), run, index, coords));
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(std::fs::File::create(path)?);
        let mut header = vec!["sampler".to_string(), "run".into(), "index".into()];
        header.extend((1..=self.width).map(|k| format!("x{k}")));
        w.write_record(&header).map_err(csv_error)?;
        for (sampler, run, index, coords) in &self.rows {
            let mut rec = vec![sampler.clone(), run.to_string(), index.to_string()];
            for c in coords {
                rec.push(format_value(*c).unwrap_or_else(|_| c.to_string()));
            }
            w.write_record(&rec).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One line of `checks.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckRecord {
    pub check: String,
    pub instance: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn write_checks(path: &Path, checks: &[CheckRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(std::fs::File::create(path)?);
    w.write_record(["check", "instance", "lhs", "rhs", "holds"]).map_err(csv_error)?;
    for c in checks {
        w.write_record([
            c.check.clone(),
            c.instance.clone(),
            format_value(c.lhs).unwrap_or_else(|_| c.lhs.to_string()),
            format_value(c.rhs).unwrap_or_else(|_| c.rhs.to_string()),
            c.holds.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Writes pretty JSON with a trailing newline.
pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    f.write_all(b"\n")?;
    Ok(())
}
