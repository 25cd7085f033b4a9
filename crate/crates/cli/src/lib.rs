//! Experiment runner: JSON configs in, CSV/JSON artifacts plus a manifest out.

pub mod artifacts;
pub mod config;
pub mod experiments;

pub use artifacts::Manifest;
pub use config::ExperimentConfig;
pub use experiments::{run, AcceptanceFailure, RunSettings};

/// Exit status for a failed run: 3 for failed acceptance checks, 4 for I/O
/// failures, 2 for everything else (invalid configs and parameters).
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<AcceptanceFailure>().is_some() {
        return 3;
    }
    for cause in err.chain() {
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 4;
        }
        if let Some(e) = cause.downcast_ref::<bdlp_core::Error>() {
            if matches!(e, bdlp_core::Error::Io(_) | bdlp_core::Error::Csv(_)) {
                return 4;
            }
        }
    }
    2
}
