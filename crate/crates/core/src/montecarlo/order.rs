use serde::Serialize;
use thiserror::Error;

use super::StrongErrorRow;

/// Unweighted least-squares fit of `ln mse = intercept + slope · ln Δ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderEstimate {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `slope / 2`: order of the root-mean-square error.
    pub strong_order: f64,
    pub n_used: usize,
    /// Step sizes dropped because their `mse` was zero or not finite.
    pub excluded_deltas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrderError {
    #[error("need at least 3 rows with positive finite mse, got {0}")]
    TooFewRows(usize),
    #[error("all usable rows share one step size")]
    DegenerateSteps,
}

pub fn estimate_order(rows: &[StrongErrorRow]) -> Result<OrderEstimate, OrderError> {
    let (usable, excluded): (Vec<&StrongErrorRow>, Vec<&StrongErrorRow>) = rows
        .iter()
        .partition(|r| r.mse > 0.0 && r.mse.is_finite() && r.delta > 0.0);
    if usable.len() < 3 {
        return Err(OrderError::TooFewRows(usable.len()));
    }
    let xs: Vec<f64> = usable.iter().map(|r| r.delta.ln()).collect();
    let ys: Vec<f64> = usable.iter().map(|r| r.mse.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(OrderError::DegenerateSteps);
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };

    Ok(OrderEstimate {
        slope,
        intercept,
        r_squared,
        strong_order: slope / 2.0,
        n_used: usable.len(),
        excluded_deltas: excluded.iter().map(|r| r.delta).collect(),
    })
}
