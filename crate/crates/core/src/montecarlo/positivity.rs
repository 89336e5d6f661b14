use serde::Serialize;

use super::{builtin_system, driving_path, Executor, ExperimentConfig, StudyError};
use crate::grid::GridSpec;
use crate::schemes::{make_stepper, simulate, SchemeKind, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivityReport {
    pub scheme: SchemeKind,
    pub delta: f64,
    pub n_paths: usize,
    /// Paths with a coordinate `<= 0` at some node, diverged paths included.
    pub n_paths_with_violation: usize,
    /// Paths that hit NaN or ±∞; a subset of the violating paths.
    pub n_diverged: usize,
    /// Entry `k` counts paths whose first violation is at node `k + 1`.
    pub first_violation_histogram: Vec<usize>,
    /// Smallest coordinate over all finite states of all paths.
    pub min_coordinate: f64,
}

#[derive(Debug, Clone, Copy)]
struct PathOutcome {
    first_violation: Option<usize>,
    diverged: bool,
    min_coordinate: f64,
}

fn outcome(traj: &Trajectory) -> PathOutcome {
    let first_violation = match (traj.first_nonpositive(), traj.diverged_at) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    PathOutcome {
        first_violation,
        diverged: traj.is_diverged(),
        min_coordinate: traj.min_coordinate(),
    }
}

/// Builds per-scheme reports from trajectories grouped by scheme. Every
/// trajectory must share the grid of the first one.
pub fn summarize_positivity(scheme: SchemeKind, trajectories: &[Trajectory]) -> PositivityReport {
    let n_steps = trajectories.first().map_or(0, |t| t.grid.n_steps());
    let delta = trajectories.first().map_or(f64::NAN, |t| t.grid.step());
    let outcomes: Vec<PathOutcome> = trajectories.iter().map(outcome).collect();
    fold(scheme, delta, n_steps, &outcomes)
}

fn fold(scheme: SchemeKind, delta: f64, n_steps: usize, outcomes: &[PathOutcome]) -> PositivityReport {
    let mut report = PositivityReport {
        scheme,
        delta,
        n_paths: outcomes.len(),
        n_paths_with_violation: 0,
        n_diverged: 0,
        first_violation_histogram: vec![0; n_steps],
        min_coordinate: f64::INFINITY,
    };
    for o in outcomes {
        report.min_coordinate = report.min_coordinate.min(o.min_coordinate);
        if o.diverged {
            report.n_diverged += 1;
        }
        if let Some(k) = o.first_violation {
            report.n_paths_with_violation += 1;
            // x0 > 0 is validated, so k >= 1
            report.first_violation_histogram[k.saturating_sub(1).min(n_steps.saturating_sub(1))] += 1;
        }
    }
    report
}

/// Simulates every scheme on the same `paths` Wiener paths with
/// `positivity_steps` steps and counts paths leaving the positive orthant.
pub fn run_positivity_study(cfg: &ExperimentConfig, exec: &Executor) -> Result<Vec<PositivityReport>, StudyError> {
    cfg.validate()?;
    let (system, split) = builtin_system(&cfg.system, cfg.dim)?;
    let steppers: Vec<_> = cfg
        .schemes
        .iter()
        .map(|&kind| make_stepper(kind, &system, &split))
        .collect();
    let grid = GridSpec::new(cfg.t_final, cfg.positivity_steps)?;
    let noise_dim = system.noise_dim();

    let per_path = exec.map_paths(cfg.paths, |index| -> Result<Vec<PathOutcome>, StudyError> {
        let path = driving_path(cfg, grid, noise_dim, index)?;
        steppers
            .iter()
            .map(|s| Ok(outcome(&simulate(s.as_ref(), &cfg.x0, &path)?)))
            .collect()
    });

    let mut by_scheme: Vec<Vec<PathOutcome>> = vec![Vec::with_capacity(cfg.paths); steppers.len()];
    for result in per_path {
        for (slot, o) in by_scheme.iter_mut().zip(result?) {
            slot.push(o);
        }
    }
    Ok(cfg
        .schemes
        .iter()
        .zip(&by_scheme)
        .map(|(&kind, outcomes)| fold(kind, grid.step(), grid.n_steps(), outcomes))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wiener::PathProvenance;

    fn traj(values: &[f64], diverged_at: Option<usize>) -> Trajectory {
        Trajectory {
            grid: GridSpec::new(1.0, values.len() - 1).unwrap(),
            dim: 1,
            states: values.to_vec(),
            label: "test".into(),
            provenance: PathProvenance { master_seed: 0, path_index: 0, coarsening: 1 },
            diverged_at,
        }
    }

    #[test]
    fn counts_a_single_violating_path() {
        let set = vec![
            traj(&[1.0, 0.5, 0.7, 0.2], None),
            traj(&[1.0, 0.5, -0.1, 0.2], None),
            traj(&[1.0, 2.0, 3.0, 4.0], None),
        ];
        let rep = summarize_positivity(SchemeKind::Euler, &set);
        assert_eq!(rep.n_paths, 3);
        assert_eq!(rep.n_paths_with_violation, 1);
        assert_eq!(rep.n_diverged, 0);
        assert_eq!(rep.first_violation_histogram, vec![0, 1, 0]);
        assert_eq!(rep.min_coordinate, -0.1);
    }

    #[test]
    fn zero_counts_as_violation_and_nan_separately() {
        let set = vec![
            traj(&[1.0, 0.0, 1.0], None),
            traj(&[1.0, 3.0, f64::NAN], Some(2)),
        ];
        let rep = summarize_positivity(SchemeKind::Euler, &set);
        assert_eq!(rep.n_paths_with_violation, 2);
        assert_eq!(rep.n_diverged, 1);
        assert_eq!(rep.first_violation_histogram, vec![1, 1]);
        assert_eq!(rep.min_coordinate, 0.0);
    }

    #[test]
    fn semidiscrete_never_violates_while_euler_does() {
        let cfg = ExperimentConfig {
            dim: 1,
            x0: vec![0.1],
            positivity_steps: 16,
            paths: 10_000,
            seed: 7,
            schemes: vec![SchemeKind::Euler, SchemeKind::SemiDiscrete],
            positivity: true,
            ..Default::default()
        };
        let reports = run_positivity_study(&cfg, &Executor::new(4).unwrap()).unwrap();
        assert_eq!(reports[1].scheme, SchemeKind::SemiDiscrete);
        assert_eq!(reports[1].n_paths_with_violation, 0);
        assert!(reports[1].min_coordinate > 0.0);
        assert!(reports[0].n_paths_with_violation > 0, "{:?}", reports[0]);
        assert_eq!(reports[0].delta, 1.0 / 16.0);
        let hist_total: usize = reports[0].first_violation_histogram.iter().sum();
        assert_eq!(hist_total, reports[0].n_paths_with_violation);
    }

    #[test]
    fn rejects_nonpositive_start() {
        let cfg = ExperimentConfig {
            dim: 1,
            x0: vec![0.0],
            positivity: true,
            ..Default::default()
        };
        assert!(matches!(
            run_positivity_study(&cfg, &Executor::new(1).unwrap()),
            Err(StudyError::Config(_))
        ));
    }
}
