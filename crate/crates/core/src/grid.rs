use serde::{Deserialize, Serialize};

use crate::error::SdeError;

/// Equidistant partition `0 = t_0 < t_1 < ... < t_N = T` with step `T / N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    t_final: f64,
    n_steps: usize,
}

impl GridSpec {
    pub fn new(t_final: f64, n_steps: usize) -> Result<Self, SdeError> {
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(SdeError::invalid("t_final", format!("must be finite and > 0, got {t_final}")));
        }
        if n_steps == 0 {
            return Err(SdeError::invalid("n_steps", "must be >= 1"));
        }
        Ok(Self { t_final, n_steps })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn step(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    /// Node `t_k`. The last node is `T` exactly.
    pub fn node(&self, k: usize) -> f64 {
        assert!(k <= self.n_steps, "node index {k} beyond N = {}", self.n_steps);
        if k == self.n_steps {
            self.t_final
        } else {
            k as f64 * self.t_final / self.n_steps as f64
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(move |k| self.node(k))
    }

    /// Index `k` of the node that `s` is frozen to, i.e. `s` in `[t_k, t_{k+1})`.
    /// `s = T` maps to the last subinterval.
    pub fn freeze_index(&self, s: f64) -> usize {
        if s <= 0.0 {
            return 0;
        }
        let k = (s / self.step()).floor() as usize;
        let k = k.min(self.n_steps - 1);
        // floor can land one cell off when s sits on a node
        if k + 1 < self.n_steps && self.node(k + 1) <= s {
            k + 1
        } else if self.node(k) > s {
            k - 1
        } else {
            k
        }
    }

    /// Grid with `n_steps / factor` steps over the same horizon.
    pub fn coarsen(&self, factor: usize) -> Result<Self, SdeError> {
        if factor == 0 || !self.n_steps.is_multiple_of(factor) {
            return Err(SdeError::invalid(
                "factor",
                format!("{factor} does not divide n_steps = {}", self.n_steps),
            ));
        }
        Self::new(self.t_final, self.n_steps / factor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_monotone_and_hit_endpoints() {
        let g = GridSpec::new(0.7, 13).unwrap();
        let nodes: Vec<f64> = g.nodes().collect();
        assert_eq!(nodes.len(), 14);
        assert_eq!(nodes[0], 0.0);
        assert_eq!(nodes[13], 0.7);
        assert!(nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn freeze_index_maps_to_left_node() {
        let g = GridSpec::new(1.0, 8).unwrap();
        assert_eq!(g.freeze_index(0.0), 0);
        assert_eq!(g.freeze_index(0.124), 0);
        assert_eq!(g.freeze_index(0.125), 1);
        assert_eq!(g.freeze_index(0.99), 7);
        assert_eq!(g.freeze_index(1.0), 7);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(0.0, 4).is_err());
        assert!(GridSpec::new(f64::NAN, 4).is_err());
        assert!(GridSpec::new(1.0, 0).is_err());
        assert!(GridSpec::new(1.0, 12).unwrap().coarsen(5).is_err());
        assert_eq!(GridSpec::new(1.0, 12).unwrap().coarsen(4).unwrap().n_steps(), 3);
    }
}
