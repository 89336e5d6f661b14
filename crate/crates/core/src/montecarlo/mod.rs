//! Coupled Monte Carlo studies: strong error across step sizes, the log-log
//! order fit, positivity violations and moment stability.
//!
//! Every path's noise derives only from `(seed, path_index)`. Paths run in
//! parallel and are aggregated in ascending index order, so results do not
//! depend on the worker count.

mod config;
mod executor;
mod experiment;
mod moments;
mod order;
mod positivity;
mod stats;
mod strong;

pub use config::{builtin_system, ConfigError, ExperimentConfig, BUILTIN_SYSTEMS};
pub use executor::Executor;
pub use experiment::{
    moments_csv, positivity_csv, run_experiment, strong_error_csv, version_string, write_artifacts, ExperimentResult,
    OrderSummary, ARTIFACT_FILES,
};
pub use moments::{run_moment_study, summarize_moments, MomentReport, MomentRow};
pub use order::{estimate_order, OrderError, OrderEstimate};
pub use positivity::{run_positivity_study, summarize_positivity, PositivityReport};
pub use stats::Accumulator;
pub use strong::{non_monotone_pairs, run_strong_error_study, StrongErrorRow, StrongErrorStudy};

use thiserror::Error;

use crate::error::SdeError;
use crate::grid::GridSpec;
use crate::wiener::{generate_path, PathProvenance, WienerError, WienerPath};

#[derive(Debug, Error)]
pub enum StudyError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sde(#[from] SdeError),
    #[error(transparent)]
    Wiener(#[from] WienerError),
    #[error("reference trajectory diverged on path {path_index} at step {step}")]
    ReferenceDiverged { path_index: u64, step: usize },
}

fn driving_path(cfg: &ExperimentConfig, grid: GridSpec, noise_dim: usize, path_index: u64) -> Result<WienerPath, WienerError> {
    if cfg.zero_noise {
        WienerPath::zero(
            grid,
            noise_dim,
            PathProvenance {
                master_seed: cfg.seed,
                path_index,
                coarsening: 1,
            },
        )
    } else {
        generate_path(grid, noise_dim, cfg.seed, path_index)
    }
}

/// Coarsens `fine` to every factor in `factors` (ascending powers of two),
/// checking the coupling identity for each level.
fn coupled_levels(fine: &WienerPath, factors: &[usize]) -> Result<Vec<WienerPath>, WienerError> {
    let mut out: Vec<WienerPath> = Vec::with_capacity(factors.len());
    let mut current = fine.clone();
    let mut current_factor = 1;
    for &factor in factors {
        if factor != current_factor {
            current = crate::wiener::coarsen_path(&current, factor / current_factor)?;
            current_factor = factor;
        }
        crate::wiener::verify_coupling(fine, &current)?;
        out.push(current.clone());
    }
    Ok(out)
}
