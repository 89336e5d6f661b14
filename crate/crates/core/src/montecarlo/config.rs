use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::SdeError;
use crate::schemes::SchemeKind;
use crate::system::{make_example_system, SdeSystem, SemiDiscreteSplit};

/// Names accepted by [`builtin_system`].
pub const BUILTIN_SYSTEMS: &[&str] = &["example"];

/// Looks up a built-in system and its split by name.
pub fn builtin_system(name: &str, dim: usize) -> Result<(SdeSystem, SemiDiscreteSplit), SdeError> {
    match name {
        "example" => make_example_system(dim),
        other => Err(SdeError::invalid(
            "system",
            format!("unknown system `{other}` (built-in: {})", BUILTIN_SYSTEMS.join(", ")),
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub system: String,
    pub dim: usize,
    pub x0: Vec<f64>,
    pub t_final: f64,
    /// Step count of the finest (reference) grid.
    pub fine_steps: usize,
    /// Coarsening factors relative to the finest grid.
    pub levels: Vec<usize>,
    pub paths: usize,
    pub seed: u64,
    /// Moment exponent, declared `> 2`.
    pub moment_p: f64,
    /// Schemes compared in the positivity and moment studies.
    pub schemes: Vec<SchemeKind>,
    /// Scheme whose strong error is measured against the reference.
    pub convergence_scheme: SchemeKind,
    /// Step count for the positivity study.
    pub positivity_steps: usize,
    pub convergence: bool,
    pub positivity: bool,
    pub moments: bool,
    /// Drive every path with zero increments.
    #[serde(default)]
    pub zero_noise: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            system: "example".to_string(),
            dim: 3,
            x0: vec![0.5; 3],
            t_final: 1.0,
            fine_steps: 1 << 13,
            levels: vec![16, 32, 64, 128, 256, 512],
            paths: 1000,
            seed: 0,
            moment_p: 3.0,
            schemes: SchemeKind::ALL.to_vec(),
            convergence_scheme: SchemeKind::SemiDiscrete,
            positivity_steps: 64,
            convergence: false,
            positivity: false,
            moments: false,
            zero_noise: false,
        }
    }
}

/// A rejected configuration field and the constraint it broke.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid `{field}`: {constraint}")]
pub struct ConfigError {
    pub field: &'static str,
    pub constraint: String,
}

fn reject(field: &'static str, constraint: impl Into<String>) -> ConfigError {
    ConfigError {
        field,
        constraint: constraint.into(),
    }
}

impl ExperimentConfig {
    pub fn delta_fine(&self) -> f64 {
        self.t_final / self.fine_steps as f64
    }

    /// Step length of a level given as a coarsening factor.
    pub fn delta_for(&self, factor: usize) -> f64 {
        self.t_final / (self.fine_steps / factor) as f64
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !BUILTIN_SYSTEMS.contains(&self.system.as_str()) {
            return Err(reject(
                "system",
                format!("unknown system `{}` (built-in: {})", self.system, BUILTIN_SYSTEMS.join(", ")),
            ));
        }
        if self.dim == 0 {
            return Err(reject("dim", "must be >= 1"));
        }
        if self.x0.len() != self.dim {
            return Err(reject(
                "x0",
                format!("has {} entries but dim = {}", self.x0.len(), self.dim),
            ));
        }
        if let Some(v) = self.x0.iter().find(|v| !v.is_finite()) {
            return Err(reject("x0", format!("entries must be finite, got {v}")));
        }
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(reject("t_final", format!("must be finite and > 0, got {}", self.t_final)));
        }
        if self.fine_steps == 0 {
            return Err(reject("fine_steps", "must be >= 1"));
        }
        if self.paths == 0 {
            return Err(reject("paths", "must be >= 1"));
        }
        if self.convergence || self.moments {
            if self.levels.is_empty() {
                return Err(reject("levels", "at least one level is required"));
            }
            for &level in &self.levels {
                if level == 0 || !self.fine_steps.is_multiple_of(level) {
                    return Err(reject(
                        "levels",
                        format!("{level} does not divide fine_steps = {}", self.fine_steps),
                    ));
                }
                if !level.is_power_of_two() {
                    return Err(reject("levels", format!("{level} is not a power of two")));
                }
            }
            let mut sorted = self.levels.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != self.levels.len() {
                return Err(reject("levels", "contains duplicates"));
            }
        }
        if self.moments && !(self.moment_p > 2.0 && self.moment_p.is_finite()) {
            return Err(reject("moment_p", format!("must be > 2, got {}", self.moment_p)));
        }
        if self.positivity {
            if let Some(v) = self.x0.iter().find(|&&v| v.is_nan() || v <= 0.0) {
                return Err(reject("x0", format!("must be strictly positive for positivity studies, got {v}")));
            }
            if self.positivity_steps == 0 {
                return Err(reject("positivity_steps", "must be >= 1"));
            }
        }
        if (self.positivity || self.moments) && self.schemes.is_empty() {
            return Err(reject("schemes", "at least one scheme is required"));
        }
        Ok(())
    }

    /// Hex SHA-256 of the serialized config.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enabled() -> ExperimentConfig {
        ExperimentConfig {
            convergence: true,
            positivity: true,
            moments: true,
            ..Default::default()
        }
    }

    #[test]
    fn defaults_are_valid() {
        let cfg = enabled();
        cfg.validate().unwrap();
        assert_eq!(cfg.delta_fine(), 2f64.powi(-13));
        assert_eq!(cfg.delta_for(512), 2f64.powi(-4));
    }

    #[test]
    fn level_must_divide_fine_grid() {
        let cfg = ExperimentConfig {
            fine_steps: 1000,
            levels: vec![3],
            ..enabled()
        };
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.field, "levels");
        assert!(err.to_string().contains("3 does not divide fine_steps = 1000"));
    }

    #[test]
    fn field_constraints() {
        let bad = [
            ExperimentConfig { dim: 2, ..enabled() },
            ExperimentConfig { x0: vec![0.5, -0.1, 0.5], ..enabled() },
            ExperimentConfig { moment_p: 2.0, ..enabled() },
            ExperimentConfig { paths: 0, ..enabled() },
            ExperimentConfig { system: "lorenz".into(), ..enabled() },
            ExperimentConfig { levels: vec![16, 16], ..enabled() },
            ExperimentConfig { t_final: 0.0, ..enabled() },
            ExperimentConfig { fine_steps: 768, levels: vec![3], ..enabled() },
        ];
        let fields: Vec<&str> = bad.iter().map(|c| c.validate().unwrap_err().field).collect();
        assert_eq!(fields, ["x0", "x0", "moment_p", "paths", "system", "levels", "t_final", "levels"]);
        // nonpositive x0 is fine when positivity is off
        ExperimentConfig { x0: vec![0.5, -0.1, 0.5], positivity: false, ..enabled() }
            .validate()
            .unwrap();
    }

    #[test]
    fn hash_tracks_content() {
        let a = enabled();
        let b = ExperimentConfig { seed: 1, ..enabled() };
        assert_eq!(a.hash(), enabled().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
