//! SDE systems `dx = a(x) dt + Σ_j b_j(x) dW_j` and their semi-discrete splits.
//!
//! A split supplies auxiliary coefficients `f(x, y)` and `g_j(x, y)` that agree
//! with the drift and diffusion on the diagonal `y = x`, together with the flow
//! of the frozen subsystem
//!
//! ```text
//! dY = f(Y, z) dt + Σ_j g_j(Y, z) dW_j,   Y(0) = z
//! ```
//!
//! over one subinterval. Freezing the second argument at the left grid node and
//! advancing by this flow is the semi-discrete scheme.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_len, SdeError};

/// `x ↦ a(x)`, written into the output slice.
pub type VectorField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// `(x, j) ↦ b_j(x)`, written into the output slice. `j` is zero-based.
pub type DiffusionField = Arc<dyn Fn(&[f64], usize, &mut [f64]) + Send + Sync>;
/// `(x, y) ↦ f(x, y)`.
pub type SplitDrift = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `(x, y, j) ↦ g_j(x, y)`.
pub type SplitDiffusion = Arc<dyn Fn(&[f64], &[f64], usize, &mut [f64]) + Send + Sync>;
/// `(z, h, dW) ↦ Y(h)`, the frozen-subsystem solution started at `z`.
pub type ExactFlow = Arc<dyn Fn(&[f64], f64, &[f64], &mut [f64]) + Send + Sync>;

/// Default number of substeps for the nested Euler fallback flow.
pub const DEFAULT_INNER_STEPS: usize = 64;

#[derive(Clone)]
pub struct SdeSystem {
    dim: usize,
    noise_dim: usize,
    drift: VectorField,
    diffusion: DiffusionField,
}

impl fmt::Debug for SdeSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeSystem")
            .field("dim", &self.dim)
            .field("noise_dim", &self.noise_dim)
            .finish_non_exhaustive()
    }
}

impl SdeSystem {
    pub fn new(
        dim: usize,
        noise_dim: usize,
        drift: VectorField,
        diffusion: DiffusionField,
    ) -> Result<Self, SdeError> {
        if dim == 0 {
            return Err(SdeError::invalid("dim", "must be >= 1"));
        }
        if noise_dim == 0 {
            return Err(SdeError::invalid("noise_dim", "must be >= 1"));
        }
        Ok(Self {
            dim,
            noise_dim,
            drift,
            diffusion,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn drift_into(&self, x: &[f64], out: &mut [f64]) -> Result<(), SdeError> {
        check_len("state", self.dim, x.len())?;
        check_len("drift output", self.dim, out.len())?;
        (self.drift)(x, out);
        Ok(())
    }

    pub fn diffusion_into(&self, x: &[f64], j: usize, out: &mut [f64]) -> Result<(), SdeError> {
        check_len("state", self.dim, x.len())?;
        check_len("diffusion output", self.dim, out.len())?;
        if j >= self.noise_dim {
            return Err(SdeError::invalid(
                "j",
                format!("noise index {j} out of range for m = {}", self.noise_dim),
            ));
        }
        (self.diffusion)(x, j, out);
        Ok(())
    }

    pub fn drift(&self, x: &[f64]) -> Result<Vec<f64>, SdeError> {
        let mut out = vec![0.0; self.dim];
        self.drift_into(x, &mut out)?;
        Ok(out)
    }

    pub fn diffusion_col(&self, x: &[f64], j: usize) -> Result<Vec<f64>, SdeError> {
        let mut out = vec![0.0; self.dim];
        self.diffusion_into(x, j, &mut out)?;
        Ok(out)
    }
}

/// How the frozen subsystem is advanced across one subinterval.
#[derive(Clone)]
pub enum Flow {
    /// Closed-form strong solution supplied by the user.
    Exact(ExactFlow),
    /// Approximation: `n_inner` explicit Euler substeps of the Wong–Zakai form
    /// of the frozen subsystem, driven by the piecewise-linear interpolant of
    /// the step increment. The Itô correction `-½ Σ_j (D_x g_j) g_j` is formed
    /// by central differences, so the limit as `n_inner → ∞` is the Itô flow.
    NestedEuler { n_inner: usize },
}

impl fmt::Debug for Flow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Flow::Exact(_) => f.write_str("Exact"),
            Flow::NestedEuler { n_inner } => write!(f, "NestedEuler {{ n_inner: {n_inner} }}"),
        }
    }
}

#[derive(Clone)]
pub struct SemiDiscreteSplit {
    dim: usize,
    noise_dim: usize,
    f: SplitDrift,
    g: SplitDiffusion,
    flow: Flow,
}

impl fmt::Debug for SemiDiscreteSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SemiDiscreteSplit")
            .field("dim", &self.dim)
            .field("noise_dim", &self.noise_dim)
            .field("flow", &self.flow)
            .finish_non_exhaustive()
    }
}

impl SemiDiscreteSplit {
    pub fn new(
        dim: usize,
        noise_dim: usize,
        f: SplitDrift,
        g: SplitDiffusion,
        flow: Flow,
    ) -> Result<Self, SdeError> {
        if dim == 0 {
            return Err(SdeError::invalid("dim", "must be >= 1"));
        }
        if noise_dim == 0 {
            return Err(SdeError::invalid("noise_dim", "must be >= 1"));
        }
        if let Flow::NestedEuler { n_inner: 0 } = flow {
            return Err(SdeError::invalid("n_inner", "must be >= 1"));
        }
        Ok(Self {
            dim,
            noise_dim,
            f,
            g,
            flow,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn flow_kind(&self) -> &Flow {
        &self.flow
    }

    /// Same coefficients, different flow.
    pub fn with_flow(&self, flow: Flow) -> Result<Self, SdeError> {
        Self::new(self.dim, self.noise_dim, self.f.clone(), self.g.clone(), flow)
    }

    pub fn f_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<(), SdeError> {
        check_len("x", self.dim, x.len())?;
        check_len("y", self.dim, y.len())?;
        check_len("f output", self.dim, out.len())?;
        (self.f)(x, y, out);
        Ok(())
    }

    pub fn g_into(&self, x: &[f64], y: &[f64], j: usize, out: &mut [f64]) -> Result<(), SdeError> {
        check_len("x", self.dim, x.len())?;
        check_len("y", self.dim, y.len())?;
        check_len("g output", self.dim, out.len())?;
        if j >= self.noise_dim {
            return Err(SdeError::invalid(
                "j",
                format!("noise index {j} out of range for m = {}", self.noise_dim),
            ));
        }
        (self.g)(x, y, j, out);
        Ok(())
    }

    pub fn f(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>, SdeError> {
        let mut out = vec![0.0; self.dim];
        self.f_into(x, y, &mut out)?;
        Ok(out)
    }

    pub fn g(&self, x: &[f64], y: &[f64], j: usize) -> Result<Vec<f64>, SdeError> {
        let mut out = vec![0.0; self.dim];
        self.g_into(x, y, j, &mut out)?;
        Ok(out)
    }

    /// Advances the frozen subsystem from `z` over a step of length `h`
    /// driven by the increment `dw`.
    pub fn flow_into(&self, z: &[f64], h: f64, dw: &[f64], out: &mut [f64]) -> Result<(), SdeError> {
        check_len("state", self.dim, z.len())?;
        check_len("Wiener increment", self.noise_dim, dw.len())?;
        check_len("flow output", self.dim, out.len())?;
        if !(h >= 0.0 && h.is_finite()) {
            return Err(SdeError::invalid("h", format!("step must be finite and >= 0, got {h}")));
        }
        match &self.flow {
            Flow::Exact(flow) => flow(z, h, dw, out),
            Flow::NestedEuler { n_inner } => self.nested_euler(z, h, dw, *n_inner, out),
        }
        Ok(())
    }

    pub fn flow(&self, z: &[f64], h: f64, dw: &[f64]) -> Result<Vec<f64>, SdeError> {
        let mut out = vec![0.0; self.dim];
        self.flow_into(z, h, dw, &mut out)?;
        Ok(out)
    }

    fn nested_euler(&self, z: &[f64], h: f64, dw: &[f64], n_inner: usize, out: &mut [f64]) {
        let d = self.dim;
        let dt = h / n_inner as f64;
        let mut drift = vec![0.0; d];
        let mut col = vec![0.0; d];
        let mut plus = vec![0.0; d];
        let mut minus = vec![0.0; d];
        let mut shifted = vec![0.0; d];

        out.copy_from_slice(z);
        for _ in 0..n_inner {
            (self.f)(out, z, &mut drift);
            let mut update: Vec<f64> = drift.iter().map(|a| a * dt).collect();
            for (j, &dwj) in dw.iter().enumerate() {
                (self.g)(out, z, j, &mut col);
                let scale = col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if scale > 0.0 {
                    let state_scale = out.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                    let eps = 6.0e-6 * state_scale / scale;
                    for i in 0..d {
                        shifted[i] = out[i] + eps * col[i];
                    }
                    (self.g)(&shifted, z, j, &mut plus);
                    for i in 0..d {
                        shifted[i] = out[i] - eps * col[i];
                    }
                    (self.g)(&shifted, z, j, &mut minus);
                    for i in 0..d {
                        let directional = (plus[i] - minus[i]) / (2.0 * eps);
                        update[i] -= 0.5 * directional * dt;
                    }
                }
                let sub_dw = dwj / n_inner as f64;
                for i in 0..d {
                    update[i] += col[i] * sub_dw;
                }
            }
            for i in 0..d {
                out[i] += update[i];
            }
        }
    }
}

pub(crate) fn norm2_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// The cubic-drift system `a(x) = x − ‖x‖₂² x`, `b(x) = x` with one
/// driving Wiener process, and its split `f(x, y) = x − ‖y‖₂² x`,
/// `g(x, y) = x`.
///
/// With the second argument frozen at `z`, every coordinate solves the same
/// scalar linear SDE `dY_i = (1 − ‖z‖₂²) Y_i dt + Y_i dW`, so the flow is
/// `z_i · exp((1 − ‖z‖₂² − ½) h + dW)`.
pub fn make_example_system(dim: usize) -> Result<(SdeSystem, SemiDiscreteSplit), SdeError> {
    if dim == 0 {
        return Err(SdeError::invalid("dim", "example system needs d >= 1"));
    }
    let drift: VectorField = Arc::new(|x: &[f64], out: &mut [f64]| {
        let n2 = norm2_sq(x);
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = xi - n2 * xi;
        }
    });
    let diffusion: DiffusionField = Arc::new(|x: &[f64], _j: usize, out: &mut [f64]| {
        out.copy_from_slice(x);
    });
    let f: SplitDrift = Arc::new(|x: &[f64], y: &[f64], out: &mut [f64]| {
        let n2 = norm2_sq(y);
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = xi - n2 * xi;
        }
    });
    let g: SplitDiffusion = Arc::new(|x: &[f64], _y: &[f64], _j: usize, out: &mut [f64]| {
        out.copy_from_slice(x);
    });
    let flow: ExactFlow = Arc::new(|z: &[f64], h: f64, dw: &[f64], out: &mut [f64]| {
        let factor = ((0.5 - norm2_sq(z)) * h + dw[0]).exp();
        for (o, &zi) in out.iter_mut().zip(z) {
            *o = zi * factor;
        }
    });
    let system = SdeSystem::new(dim, 1, drift, diffusion)?;
    let split = SemiDiscreteSplit::new(dim, 1, f, g, Flow::Exact(flow))?;
    Ok((system, split))
}
