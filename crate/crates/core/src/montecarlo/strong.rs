use serde::Serialize;

use super::{builtin_system, coupled_levels, driving_path, Accumulator, Executor, ExperimentConfig, StudyError};
use crate::grid::GridSpec;
use crate::schemes::{make_stepper, simulate, SchemeKind, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrongErrorRow {
    pub delta: f64,
    /// Coarsening factor relative to the reference grid.
    pub level: usize,
    /// Sample mean over non-diverged paths of `max_k ‖y(t_k) − y_ref(t_k)‖₂²`.
    pub mse: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub n_diverged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrongErrorStudy {
    pub scheme: SchemeKind,
    pub reference_steps: usize,
    /// Ordered by decreasing `delta`.
    pub rows: Vec<StrongErrorRow>,
    /// Consecutive pairs whose error grows by more than twice the combined
    /// standard errors when the step halves.
    pub non_monotone: Vec<String>,
}

/// Squared-norm error maximised over the coarse nodes shared by both paths.
fn max_sq_error(coarse: &Trajectory, reference: &Trajectory, factor: usize) -> f64 {
    (0..coarse.len())
        .map(|k| {
            coarse
                .state(k)
                .iter()
                .zip(reference.state(k * factor))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

pub fn run_strong_error_study(cfg: &ExperimentConfig, exec: &Executor) -> Result<StrongErrorStudy, StudyError> {
    cfg.validate()?;
    let (system, split) = builtin_system(&cfg.system, cfg.dim)?;
    let reference_stepper = make_stepper(SchemeKind::SemiDiscrete, &system, &split);
    let stepper = make_stepper(cfg.convergence_scheme, &system, &split);
    let fine_grid = GridSpec::new(cfg.t_final, cfg.fine_steps)?;
    let noise_dim = system.noise_dim();

    let mut factors = cfg.levels.clone();
    factors.sort_unstable();

    let per_path = exec.map_paths(cfg.paths, |index| -> Result<Vec<Option<f64>>, StudyError> {
        let fine = driving_path(cfg, fine_grid, noise_dim, index)?;
        let reference = simulate(reference_stepper.as_ref(), &cfg.x0, &fine)?;
        if let Some(step) = reference.diverged_at {
            return Err(StudyError::ReferenceDiverged { path_index: index, step });
        }
        let levels = coupled_levels(&fine, &factors)?;
        let mut errors = Vec::with_capacity(factors.len());
        for (path, &factor) in levels.iter().zip(&factors) {
            let traj = simulate(stepper.as_ref(), &cfg.x0, path)?;
            errors.push((!traj.is_diverged()).then(|| max_sq_error(&traj, &reference, factor)));
        }
        Ok(errors)
    });

    let mut accs = vec![Accumulator::default(); factors.len()];
    let mut diverged = vec![0usize; factors.len()];
    for result in per_path {
        for (i, err) in result?.into_iter().enumerate() {
            match err {
                Some(e) => accs[i].push(e),
                None => diverged[i] += 1,
            }
        }
    }

    let mut rows: Vec<StrongErrorRow> = factors
        .iter()
        .enumerate()
        .map(|(i, &factor)| StrongErrorRow {
            delta: cfg.delta_for(factor),
            level: factor,
            mse: if accs[i].count() == 0 { f64::NAN } else { accs[i].mean() },
            std_error: accs[i].std_error(),
            n_paths: cfg.paths,
            n_diverged: diverged[i],
        })
        .collect();
    rows.reverse();
    let non_monotone = non_monotone_pairs(&rows);

    Ok(StrongErrorStudy {
        scheme: cfg.convergence_scheme,
        reference_steps: cfg.fine_steps,
        rows,
        non_monotone,
    })
}

/// Describes every consecutive pair (rows ordered by decreasing `delta`)
/// where the finer level's error exceeds the coarser one's by more than
/// `2 · (se₁ + se₂)`.
pub fn non_monotone_pairs(rows: &[StrongErrorRow]) -> Vec<String> {
    rows.windows(2)
        .filter_map(|pair| {
            let (coarse, fine) = (&pair[0], &pair[1]);
            let noise = 2.0 * (coarse.std_error + fine.std_error);
            (fine.mse - coarse.mse > noise).then(|| {
                format!(
                    "mse rose from {:e} at delta {:e} to {:e} at delta {:e} (noise band {:e})",
                    coarse.mse, coarse.delta, fine.mse, fine.delta, noise
                )
            })
        })
        .collect()
}
