use std::collections::VecDeque;

use super::measure::{l1, normalize};
use super::{MeasureVector, UlamMatrix};
use crate::error::{Error, Result};

/// Growth factors averaged over this many trailing iterations.
const GROWTH_WINDOW: usize = 10;

/// One application `ρ ↦ ρ·L` of the discretized weighted transfer operator.
/// No normalization.
pub fn transfer_apply(u: &UlamMatrix, rho: &[f64]) -> Result<Vec<f64>> {
    if rho.len() != u.len() {
        return Err(Error::Dimension(format!("density length {} vs {} cells", rho.len(), u.len())));
    }
    if let Some(i) = rho.iter().position(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::Precondition(format!("density entry {i} is {}", rho[i])));
    }
    Ok(u.left_mul(rho))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferFixedPoint {
    pub density: MeasureVector,
    /// Log of the asymptotic growth factor of `L`.
    pub log_growth: f64,
    pub iterations: usize,
}

/// Iterates `ρ ← normalize₁(ρ·L)` from `start` (uniform when `None`) until
/// successive normalized iterates are within `tol` in L¹.
pub fn transfer_fixed_point(
    u: &UlamMatrix,
    tol: f64,
    max_iter: usize,
    start: Option<&[f64]>,
) -> Result<TransferFixedPoint> {
    if !(tol > 0.0) {
        return Err(Error::Precondition("tolerance must be positive".into()));
    }
    let n = u.len();
    let mut rho = match start {
        Some(s) => {
            // validates length and sign
            transfer_apply(u, s)?;
            let mut v = s.to_vec();
            if normalize(&mut v) <= 0.0 {
                return Err(Error::Precondition("start density has zero mass".into()));
            }
            v
        }
        None => vec![1.0 / n as f64; n],
    };
    let mut growth: VecDeque<f64> = VecDeque::with_capacity(GROWTH_WINDOW);
    let mut history: VecDeque<Vec<f64>> = VecDeque::with_capacity(2);
    let mut diff = f64::INFINITY;

    for it in 0..max_iter {
        let mut next = u.left_mul(&rho);
        let factor = normalize(&mut next);
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::Convergence {
                iterations: it + 1,
                residual: f64::NAN,
                diagnostics: format!("growth factor became {factor}"),
            });
        }
        if growth.len() == GROWTH_WINDOW {
            growth.pop_front();
        }
        growth.push_back(factor.ln());
        diff = l1(&next, &rho);
        if history.len() == 2 {
            history.pop_front();
        }
        history.push_back(std::mem::replace(&mut rho, next));
        if diff < tol {
            let log_growth = growth.iter().sum::<f64>() / growth.len() as f64;
            return Ok(TransferFixedPoint {
                density: MeasureVector::from_weights(rho)?,
                log_growth,
                iterations: it + 1,
            });
        }
    }

    let diagnostics = match history.front() {
        Some(two_back) if history.len() == 2 && l1(two_back, &rho) < tol => {
            "iterates oscillate with period 2".to_string()
        }
        _ => "transfer fixed point iteration".to_string(),
    };
    Err(Error::Convergence {
        iterations: max_iter,
        residual: diff,
        diagnostics,
    })
}
