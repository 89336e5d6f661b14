//! Pointwise diagnostics for the structural assumptions on a split: diagonal
//! consistency with the original coefficients, and a sampled local Lipschitz
//! constant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{check_len, SdeError};
use crate::system::{SdeSystem, SemiDiscreteSplit};

/// Absolute tolerance for diagonal consistency of formula-identity splits.
pub const DEFAULT_CONSISTENCY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub max_abs_deviation: f64,
    pub n_points: usize,
    /// The point (or concatenated pair) attaining the maximum.
    pub worst_point: Option<Vec<f64>>,
    pub estimated_lipschitz: Option<f64>,
    pub within_tol: bool,
}

/// Max over `points` and coordinates of `|f(x,x) − a(x)|` and
/// `|g_j(x,x) − b_j(x)|`.
pub fn check_split_consistency(
    split: &SemiDiscreteSplit,
    sys: &SdeSystem,
    points: &[Vec<f64>],
    tol: f64,
) -> Result<ProbeReport, SdeError> {
    check_len("split dimension", sys.dim(), split.dim())?;
    check_len("split noise dimension", sys.noise_dim(), split.noise_dim())?;
    if tol.is_nan() || tol < 0.0 {
        return Err(SdeError::invalid("tol", format!("must be >= 0, got {tol}")));
    }
    let d = sys.dim();
    let mut lhs = vec![0.0; d];
    let mut rhs = vec![0.0; d];
    let mut worst = 0.0f64;
    let mut worst_point: Option<Vec<f64>> = None;

    for x in points {
        let mut dev = 0.0f64;
        split.f_into(x, x, &mut lhs)?;
        sys.drift_into(x, &mut rhs)?;
        dev = dev.max(max_abs_diff(&lhs, &rhs));
        for j in 0..sys.noise_dim() {
            split.g_into(x, x, j, &mut lhs)?;
            sys.diffusion_into(x, j, &mut rhs)?;
            dev = dev.max(max_abs_diff(&lhs, &rhs));
        }
        // NaN deviations count as worst
        if worst_point.is_none() || dev > worst || dev.is_nan() {
            worst = if dev.is_nan() { f64::INFINITY } else { dev };
            worst_point = Some(x.clone());
        }
    }

    Ok(ProbeReport {
        max_abs_deviation: worst,
        n_points: points.len(),
        worst_point,
        estimated_lipschitz: None,
        within_tol: worst <= tol,
    })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y).abs();
            if d.is_nan() {
                f64::INFINITY
            } else {
                d
            }
        })
        .fold(0.0, f64::max)
}

/// Uniform sample from the closed ball `‖x‖₂ ≤ radius` in `R^dim`.
pub fn sample_in_ball<R: Rng>(rng: &mut R, dim: usize, radius: f64) -> Vec<f64> {
    loop {
        let dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let u: f64 = rng.random();
        let r = radius * u.powf(1.0 / dim as f64);
        return dir.into_iter().map(|v| v * r / norm).collect();
    }
}

/// Largest observed ratio `|F(x₁,y₁) − F(x₂,y₂)|_∞ / (‖x₁−x₂‖₂ + ‖y₁−y₂‖₂)`
/// over `n_pairs` random pairs with every point in the ball of radius `radius`.
///
/// This is a lower bound on the local constant `C_R`, for diagnostics.
pub fn probe_local_lipschitz<F>(
    func: F,
    dim: usize,
    radius: f64,
    n_pairs: usize,
    seed: u64,
) -> Result<ProbeReport, SdeError>
where
    F: Fn(&[f64], &[f64], &mut [f64]),
{
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(SdeError::invalid("radius", format!("must be finite and > 0, got {radius}")));
    }
    if n_pairs == 0 {
        return Err(SdeError::invalid("n_pairs", "must be >= 1"));
    }
    if dim == 0 {
        return Err(SdeError::invalid("dim", "must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out1 = vec![0.0; dim];
    let mut out2 = vec![0.0; dim];
    let mut best = 0.0f64;
    let mut worst_point = None;

    for _ in 0..n_pairs {
        let x1 = sample_in_ball(&mut rng, dim, radius);
        let y1 = sample_in_ball(&mut rng, dim, radius);
        let x2 = sample_in_ball(&mut rng, dim, radius);
        let y2 = sample_in_ball(&mut rng, dim, radius);
        let denom = dist2(&x1, &x2) + dist2(&y1, &y2);
        if denom == 0.0 {
            continue;
        }
        func(&x1, &y1, &mut out1);
        func(&x2, &y2, &mut out2);
        let ratio = max_abs_diff(&out1, &out2) / denom;
        if worst_point.is_none() || ratio > best {
            best = ratio;
            worst_point = Some([x1, y1, x2, y2].concat());
        }
    }

    Ok(ProbeReport {
        max_abs_deviation: 0.0,
        n_points: n_pairs,
        worst_point,
        estimated_lipschitz: Some(best),
        within_tol: true,
    })
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::system::{make_example_system, Flow, SplitDiffusion, SplitDrift};

    fn random_points(dim: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect()
    }

    #[test]
    fn example_split_is_exactly_consistent() {
        for d in [1, 2, 3, 10] {
            let (sys, split) = make_example_system(d).unwrap();
            let rep = check_split_consistency(&split, &sys, &random_points(d, 1000, d as u64), 0.0).unwrap();
            assert_eq!(rep.max_abs_deviation, 0.0);
            assert_eq!(rep.n_points, 1000);
            assert!(rep.worst_point.is_some());
            assert!(rep.within_tol);
        }
    }

    #[test]
    fn broken_split_reports_offset() {
        let (sys, good) = make_example_system(1).unwrap();
        let f: SplitDrift = Arc::new(|x: &[f64], y: &[f64], out: &mut [f64]| {
            let n2: f64 = y.iter().map(|v| v * v).sum();
            for (o, &xi) in out.iter_mut().zip(x) {
                *o = xi - n2 * xi + 1.0;
            }
        });
        let g: SplitDiffusion = Arc::new(|x: &[f64], _: &[f64], _: usize, out: &mut [f64]| out.copy_from_slice(x));
        let broken = SemiDiscreteSplit::new(1, 1, f, g, Flow::NestedEuler { n_inner: 4 }).unwrap();
        let rep = check_split_consistency(&broken, &sys, &[vec![1.0]], DEFAULT_CONSISTENCY_TOL).unwrap();
        assert_eq!(rep.max_abs_deviation, 1.0);
        assert_eq!(rep.worst_point, Some(vec![1.0]));
        assert!(!rep.within_tol);
        assert!(check_split_consistency(&good, &sys, &[vec![1.0]], -1.0).is_err());
    }

    #[test]
    fn empty_point_set_is_vacuous() {
        let (sys, split) = make_example_system(2).unwrap();
        let rep = check_split_consistency(&split, &sys, &[], DEFAULT_CONSISTENCY_TOL).unwrap();
        assert_eq!(rep.max_abs_deviation, 0.0);
        assert_eq!(rep.n_points, 0);
        assert_eq!(rep.worst_point, None);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let (sys, _) = make_example_system(2).unwrap();
        let (_, split3) = make_example_system(3).unwrap();
        assert!(matches!(
            check_split_consistency(&split3, &sys, &[], 0.0),
            Err(SdeError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn identity_map_has_unit_lipschitz_bound() {
        for d in [1, 3, 7] {
            let rep = probe_local_lipschitz(|x, _y, out| out.copy_from_slice(x), d, 5.0, 2000, 3).unwrap();
            let est = rep.estimated_lipschitz.unwrap();
            assert!(est <= 1.0 + 1e-12, "{est}");
            assert!(est > 0.0);
        }
    }

    #[test]
    fn constant_map_has_zero_lipschitz() {
        let rep = probe_local_lipschitz(|_x, _y, out| out.fill(2.5), 3, 1.0, 500, 9).unwrap();
        assert_eq!(rep.estimated_lipschitz, Some(0.0));
    }

    #[test]
    fn example_drift_lipschitz_matches_dense_grid_oracle() {
        let (_, split) = make_example_system(1).unwrap();
        let f = |x: &[f64], y: &[f64], out: &mut [f64]| split.f_into(x, y, out).unwrap();
        let rep = probe_local_lipschitz(f, 1, 2.0, 5000, 21).unwrap();
        let est = rep.estimated_lipschitz.unwrap();

        // dense grid over [-2,2]^2 for (x, y); difference quotients between
        // neighbouring grid points bound the sampled ratio from above
        let n = 400;
        let pts: Vec<f64> = (0..=n).map(|i| -2.0 + 4.0 * i as f64 / n as f64).collect();
        let fv = |x: f64, y: f64| x - y * y * x;
        let mut grid_sup = 0.0f64;
        for &x in &pts {
            for &y in &pts {
                let h = 4.0 / n as f64;
                if x + h <= 2.0 {
                    grid_sup = grid_sup.max((fv(x + h, y) - fv(x, y)).abs() / h);
                }
                if y + h <= 2.0 {
                    grid_sup = grid_sup.max((fv(x, y + h) - fv(x, y)).abs() / h);
                }
            }
        }
        assert!(est >= 1.0, "{est}");
        assert!(est <= grid_sup * 1.01, "{est} vs {grid_sup}");
        assert!(grid_sup > 7.5 && grid_sup < 8.5, "{grid_sup}");
    }

    #[test]
    fn lipschitz_probe_validates_arguments() {
        let id = |x: &[f64], _y: &[f64], out: &mut [f64]| out.copy_from_slice(x);
        assert!(probe_local_lipschitz(id, 2, 0.0, 10, 0).is_err());
        assert!(probe_local_lipschitz(id, 2, -1.0, 10, 0).is_err());
        assert!(probe_local_lipschitz(id, 2, 1.0, 0, 0).is_err());
    }

    #[test]
    fn ball_samples_stay_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let p = sample_in_ball(&mut rng, 4, 2.0);
            assert!(dist2(&p, &[0.0; 4]) <= 2.0 + 1e-12);
        }
    }
}
