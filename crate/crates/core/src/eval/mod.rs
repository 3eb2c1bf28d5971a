//! Evaluation metrics and artifact export.

mod heatmap;
mod mmd;
mod nll;
mod report;
mod rmse;

pub use heatmap::{energy_heatmap, export_energy_heatmap, support_contrast, Heatmap};
pub use mmd::{mmd_hamming, MmdConfig, MmdEstimator};
pub use nll::{draw_proposals, exact_nll, nll_importance, nll_with_proposals, NllEstimate, PROPOSAL_CHUNK};
pub use report::{write_reports_csv, EvalReport, MMD_REPORT_SCALE};
pub use rmse::{neg_log_rmse, rmse, NEG_LOG_RMSE_CAP};
