//! Coupling-matrix recovery error.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Value reported when the estimate matches exactly.
pub const NEG_LOG_RMSE_CAP: f64 = 20.0;

/// Root mean squared difference over all entries.
pub fn rmse(estimate: &Array2<f64>, truth: &Array2<f64>) -> Result<f64> {
    if estimate.dim() != truth.dim() {
        return Err(Error::SchemaMismatch(format!(
            "matrix shapes {:?} and {:?} differ",
            estimate.dim(),
            truth.dim()
        )));
    }
    if truth.is_empty() {
        return Err(Error::InvalidConfig("empty matrices".into()));
    }
    let sq: f64 = estimate.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sq / truth.len() as f64).sqrt())
}

/// `−ln RMSE`, capped at [`NEG_LOG_RMSE_CAP`].
pub fn neg_log_rmse(estimate: &Array2<f64>, truth: &Array2<f64>) -> Result<f64> {
    let r = rmse(estimate, truth)?;
    Ok((-r.ln()).min(NEG_LOG_RMSE_CAP))
}
