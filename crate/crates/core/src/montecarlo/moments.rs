use serde::Serialize;

use super::{builtin_system, coupled_levels, driving_path, Accumulator, Executor, ExperimentConfig, StudyError};
use crate::grid::GridSpec;
use crate::schemes::{make_stepper, simulate, SchemeKind, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentRow {
    pub delta: f64,
    pub level: usize,
    /// Mean of `max_k ‖y(t_k)‖₂^p` over non-diverged paths.
    pub estimate: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub n_diverged: usize,
    /// Set when any path diverged; the estimate then covers finite paths only.
    pub unbounded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub scheme: SchemeKind,
    pub p: f64,
    /// Ordered by decreasing `delta`.
    pub rows: Vec<MomentRow>,
    pub unbounded: bool,
}

impl MomentReport {
    /// Largest over smallest estimate across step sizes.
    pub fn spread_ratio(&self) -> f64 {
        let (lo, hi) = self
            .rows
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r.estimate), hi.max(r.estimate)));
        hi / lo
    }
}

fn sup_norm_power(traj: &Trajectory, p: f64) -> Option<f64> {
    if traj.is_diverged() {
        return None;
    }
    Some(
        traj.states()
            .map(|s| s.iter().map(|v| v * v).sum::<f64>().sqrt().powf(p))
            .fold(0.0, f64::max),
    )
}

/// One row from trajectories simulated on a common grid.
pub fn summarize_moments(trajectories: &[Trajectory], p: f64, level: usize) -> MomentRow {
    let delta = trajectories.first().map_or(f64::NAN, |t| t.grid.step());
    fold(trajectories.iter().map(|t| sup_norm_power(t, p)), delta, level)
}

fn fold(values: impl Iterator<Item = Option<f64>>, delta: f64, level: usize) -> MomentRow {
    let mut acc = Accumulator::default();
    let mut n_paths = 0;
    let mut n_diverged = 0;
    for v in values {
        n_paths += 1;
        match v {
            Some(x) if x.is_finite() => acc.push(x),
            _ => n_diverged += 1,
        }
    }
    MomentRow {
        delta,
        level,
        estimate: if acc.count() == 0 { f64::NAN } else { acc.mean() },
        std_error: acc.std_error(),
        n_paths,
        n_diverged,
        unbounded: n_diverged > 0,
    }
}

/// `E max_k ‖y(t_k)‖₂^p` per scheme and level, with every level driven by
/// the same coarsened Brownian path.
pub fn run_moment_study(cfg: &ExperimentConfig, exec: &Executor) -> Result<Vec<MomentReport>, StudyError> {
    cfg.validate()?;
    let (system, split) = builtin_system(&cfg.system, cfg.dim)?;
    let steppers: Vec<_> = cfg
        .schemes
        .iter()
        .map(|&kind| make_stepper(kind, &system, &split))
        .collect();
    let fine_grid = GridSpec::new(cfg.t_final, cfg.fine_steps)?;
    let noise_dim = system.noise_dim();
    let mut factors = cfg.levels.clone();
    factors.sort_unstable_by(|a, b| b.cmp(a));
    let mut ascending = factors.clone();
    ascending.reverse();

    // per path: [scheme][level, coarsest first]
    let per_path = exec.map_paths(cfg.paths, |index| -> Result<Vec<Vec<Option<f64>>>, StudyError> {
        let fine = driving_path(cfg, fine_grid, noise_dim, index)?;
        let mut levels = coupled_levels(&fine, &ascending)?;
        levels.reverse();
        steppers
            .iter()
            .map(|s| {
                levels
                    .iter()
                    .map(|path| Ok(sup_norm_power(&simulate(s.as_ref(), &cfg.x0, path)?, cfg.moment_p)))
                    .collect()
            })
            .collect()
    });
    let per_path = per_path.into_iter().collect::<Result<Vec<_>, _>>()?;

    Ok(cfg
        .schemes
        .iter()
        .enumerate()
        .map(|(s, &scheme)| {
            let rows: Vec<MomentRow> = factors
                .iter()
                .enumerate()
                .map(|(l, &factor)| fold(per_path.iter().map(|p| p[s][l]), cfg.delta_for(factor), factor))
                .collect();
            MomentReport {
                scheme,
                p: cfg.moment_p,
                unbounded: rows.iter().any(|r| r.unbounded),
                rows,
            }
        })
        .collect())
}
