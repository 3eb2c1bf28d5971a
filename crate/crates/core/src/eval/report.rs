//! Metric records.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// MMD values are printed in units of `1e-4` next to the raw value.
pub const MMD_REPORT_SCALE: f64 = 1e4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: String,
    pub value: f64,
    pub std_error: Option<f64>,
    /// Settings that produced the value.
    pub config: serde_json::Value,
}

impl EvalReport {
    pub fn new(metric: impl Into<String>, value: f64, std_error: Option<f64>, config: serde_json::Value) -> Result<Self> {
        let metric = metric.into();
        if !value.is_finite() || std_error.is_some_and(|s| !s.is_finite()) {
            return Err(Error::NonFinite(format!("metric {metric}")));
        }
        Ok(Self {
            metric,
            value,
            std_error,
            config,
        })
    }

    pub fn summary(&self) -> String {
        let mut s = format!("{} = {}", self.metric, self.value);
        if let Some(se) = self.std_error {
            s.push_str(&format!(" ± {se}"));
        }
        if self.metric.starts_with("mmd") {
            s.push_str(&format!(" ({} × 1e-4)", self.value * MMD_REPORT_SCALE));
        }
        s
    }
}

/// CSV with columns `metric,value,std_error,config`.
pub fn write_reports_csv<W: Write>(w: W, reports: &[EvalReport]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["metric", "value", "std_error", "config"])?;
    for r in reports {
        out.write_record([
            r.metric.clone(),
            r.value.to_string(),
            r.std_error.map(|s| s.to_string()).unwrap_or_default(),
            r.config.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
