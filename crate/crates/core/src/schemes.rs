//! One-step maps and the path simulator.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{check_len, SdeError};
use crate::grid::GridSpec;
use crate::system::{SdeSystem, SemiDiscreteSplit};
use crate::wiener::{PathProvenance, WienerPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SchemeKind {
    #[serde(rename = "semidiscrete")]
    SemiDiscrete,
    #[serde(rename = "euler")]
    Euler,
    #[serde(rename = "tamed-euler")]
    TamedEuler,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [SchemeKind::SemiDiscrete, SchemeKind::Euler, SchemeKind::TamedEuler];

    pub fn label(self) -> &'static str {
        match self {
            SchemeKind::SemiDiscrete => "semidiscrete",
            SchemeKind::Euler => "euler",
            SchemeKind::TamedEuler => "tamed-euler",
        }
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "semidiscrete" | "semi-discrete" => Ok(SchemeKind::SemiDiscrete),
            "euler" | "euler-maruyama" => Ok(SchemeKind::Euler),
            "tamed-euler" | "tamed" => Ok(SchemeKind::TamedEuler),
            other => Err(format!(
                "unknown scheme `{other}` (expected semidiscrete, euler or tamed-euler)"
            )),
        }
    }
}

/// A one-step transition `(x, h, dW) ↦ x'`.
pub trait Stepper: Send + Sync {
    fn label(&self) -> &str;
    fn dim(&self) -> usize;
    fn noise_dim(&self) -> usize;
    fn step_into(&self, x: &[f64], h: f64, dw: &[f64], out: &mut [f64]) -> Result<(), SdeError>;

    fn step(&self, x: &[f64], h: f64, dw: &[f64]) -> Result<Vec<f64>, SdeError> {
        let mut out = vec![0.0; self.dim()];
        self.step_into(x, h, dw, &mut out)?;
        Ok(out)
    }
}

fn check_step_args(dim: usize, noise_dim: usize, x: &[f64], h: f64, dw: &[f64], out: &[f64]) -> Result<(), SdeError> {
    check_len("state", dim, x.len())?;
    check_len("Wiener increment", noise_dim, dw.len())?;
    check_len("step output", dim, out.len())?;
    if !(h >= 0.0 && h.is_finite()) {
        return Err(SdeError::invalid("h", format!("step must be finite and >= 0, got {h}")));
    }
    Ok(())
}

fn add_noise(sys: &SdeSystem, x: &[f64], dw: &[f64], out: &mut [f64]) -> Result<(), SdeError> {
    let mut col = vec![0.0; sys.dim()];
    for (j, &dwj) in dw.iter().enumerate() {
        sys.diffusion_into(x, j, &mut col)?;
        for (o, c) in out.iter_mut().zip(&col) {
            *o += c * dwj;
        }
    }
    Ok(())
}

/// Explicit Euler–Maruyama: `x + a(x) h + Σ_j b_j(x) dW_j`.
#[derive(Debug, Clone)]
pub struct EulerMaruyama {
    pub system: SdeSystem,
}

impl Stepper for EulerMaruyama {
    fn label(&self) -> &str {
        SchemeKind::Euler.label()
    }

    fn dim(&self) -> usize {
        self.system.dim()
    }

    fn noise_dim(&self) -> usize {
        self.system.noise_dim()
    }

    fn step_into(&self, x: &[f64], h: f64, dw: &[f64], out: &mut [f64]) -> Result<(), SdeError> {
        check_step_args(self.dim(), self.noise_dim(), x, h, dw, out)?;
        self.system.drift_into(x, out)?;
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = xi + *o * h;
        }
        add_noise(&self.system, x, dw, out)
    }
}

/// Drift-tamed Euler: `x + a(x) h / (1 + h ‖a(x)‖₂) + Σ_j b_j(x) dW_j`.
#[derive(Debug, Clone)]
pub struct TamedEuler {
    pub system: SdeSystem,
}

impl Stepper for TamedEuler {
    fn label(&self) -> &str {
        SchemeKind::TamedEuler.label()
    }

    fn dim(&self) -> usize {
        self.system.dim()
    }

    fn noise_dim(&self) -> usize {
        self.system.noise_dim()
    }

    fn step_into(&self, x: &[f64], h: f64, dw: &[f64], out: &mut [f64]) -> Result<(), SdeError> {
        check_step_args(self.dim(), self.noise_dim(), x, h, dw, out)?;
        self.system.drift_into(x, out)?;
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = h / (1.0 + h * norm);
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = xi + *o * scale;
        }
        add_noise(&self.system, x, dw, out)
    }
}

/// The semi-discrete step: advance the frozen subsystem from the left node
/// `z` by its flow.
#[derive(Debug, Clone)]
pub struct SemiDiscrete {
    pub split: SemiDiscreteSplit,
}

impl Stepper for SemiDiscrete {
    fn label(&self) -> &str {
        SchemeKind::SemiDiscrete.label()
    }

    fn dim(&self) -> usize {
        self.split.dim()
    }

    fn noise_dim(&self) -> usize {
        self.split.noise_dim()
    }

    fn step_into(&self, z: &[f64], h: f64, dw: &[f64], out: &mut [f64]) -> Result<(), SdeError> {
        check_step_args(self.dim(), self.noise_dim(), z, h, dw, out)?;
        self.split.flow_into(z, h, dw, out)
    }
}

pub fn step_euler(sys: &SdeSystem, x: &[f64], h: f64, dw: &[f64]) -> Result<Vec<f64>, SdeError> {
    EulerMaruyama { system: sys.clone() }.step(x, h, dw)
}

pub fn step_tamed_euler(sys: &SdeSystem, x: &[f64], h: f64, dw: &[f64]) -> Result<Vec<f64>, SdeError> {
    TamedEuler { system: sys.clone() }.step(x, h, dw)
}

pub fn step_semidiscrete(split: &SemiDiscreteSplit, z: &[f64], h: f64, dw: &[f64]) -> Result<Vec<f64>, SdeError> {
    SemiDiscrete { split: split.clone() }.step(z, h, dw)
}

/// Builds the stepper for `kind` on a system and its split.
pub fn make_stepper(kind: SchemeKind, system: &SdeSystem, split: &SemiDiscreteSplit) -> Box<dyn Stepper> {
    match kind {
        SchemeKind::SemiDiscrete => Box::new(SemiDiscrete { split: split.clone() }),
        SchemeKind::Euler => Box::new(EulerMaruyama { system: system.clone() }),
        SchemeKind::TamedEuler => Box::new(TamedEuler { system: system.clone() }),
    }
}

/// Grid values of one simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: GridSpec,
    pub dim: usize,
    /// Row-major `[(N + 1) × dim]`.
    pub states: Vec<f64>,
    pub label: String,
    pub provenance: PathProvenance,
    /// Index of the first state holding NaN or ±∞. Every later state is NaN.
    pub diverged_at: Option<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.grid.n_steps() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.dim)
    }

    pub fn is_diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    /// Smallest coordinate over the finite states.
    pub fn min_coordinate(&self) -> f64 {
        let end = self.diverged_at.unwrap_or(self.len());
        self.states[..end * self.dim].iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Index of the first state with a coordinate `<= 0`, among finite states.
    pub fn first_nonpositive(&self) -> Option<usize> {
        let end = self.diverged_at.unwrap_or(self.len());
        (0..end).find(|&k| self.state(k).iter().any(|&v| v <= 0.0))
    }

    /// CSV with header `t,y_1,..,y_d` and one row per node, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = String::from("t");
        for i in 1..=self.dim {
            header.push_str(&format!(",y_{i}"));
        }
        writeln!(w, "{header}")?;
        for (k, state) in self.states().enumerate() {
            let mut line = format_sig17(self.grid.node(k));
            for v in state {
                line.push(',');
                line.push_str(&format_sig17(*v));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Scientific notation with 17 significant digits.
pub fn format_sig17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Applies `stepper` across every increment of `path`, starting from `x0`.
///
/// A non-finite state stops the recursion; the trajectory is marked diverged
/// at that index and the remaining states are NaN.
pub fn simulate(stepper: &dyn Stepper, x0: &[f64], path: &WienerPath) -> Result<Trajectory, SdeError> {
    let d = stepper.dim();
    check_len("initial state", d, x0.len())?;
    check_len("path noise dimension", stepper.noise_dim(), path.noise_dim())?;
    let grid = *path.grid();
    let n = grid.n_steps();
    let h = grid.step();
    let mut states = vec![f64::NAN; (n + 1) * d];
    states[..d].copy_from_slice(x0);
    let mut diverged_at = x0.iter().any(|v| !v.is_finite()).then_some(0);

    if diverged_at.is_none() {
        for k in 0..n {
            let (done, rest) = states.split_at_mut((k + 1) * d);
            let current = &done[k * d..];
            let next = &mut rest[..d];
            stepper.step_into(current, h, path.increment(k), next)?;
            if next.iter().any(|v| !v.is_finite()) {
                diverged_at = Some(k + 1);
                break;
            }
        }
    }

    Ok(Trajectory {
        grid,
        dim: d,
        states,
        label: stepper.label().to_string(),
        provenance: path.provenance(),
        diverged_at,
    })
}
