//! Estimators and experiment metrics built on simulator and oracle output.

mod averaging;
mod correlation;
mod extinction;

pub use averaging::{averaging_error, AveragingCurve, AveragingMode, AveragingReport, AveragingRow, Observable};
pub use correlation::{estimate_correlations, PairCorrelationEstimate};
pub use extinction::{extinction_diagnostics, ExtinctionReport, ExtinctionRow};
