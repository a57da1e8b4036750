//! Free energy and pressure of a time-τ map, by two routes:
//!
//! - variational: `h + ∫φ dπ`, with `π` the invariant measure of the one-step
//!   Ulam chain and `h` the Ulam entropy rate;
//! - spectral: `h + log r(L_φ)`, with `r(L_φ)` the growth factor of the
//!   weighted one-step operator. For maps with constant Jacobian the
//!   preimage-counting transfer operator is `e^{h_top}` times the weighted
//!   Perron–Frobenius operator, which is what `L_φ` discretizes.
//!
//! The entropy uses the Ulam chain of the `n`-fold iterate divided by `n`.
//! One-step chains overstate the entropy of hyperbolic maps on aligned grids
//! (the cat map gives `log 4` at every resolution), so `n` is chosen as the
//! largest iterate whose cell images still fit in the domain and can be
//! resolved by the per-cell sample count.

use serde::{Deserialize, Serialize};

use super::{
    entropy_rate, invariant_measure, potential_integral, transfer_fixed_point, ulam_matrix_steps, MeasureVector,
    Partition, Potential, UlamMatrix,
};
use crate::error::{Error, Result};
use crate::sysflow::FlowMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThermoConfig {
    pub samples_per_cell: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    /// Upper bound on the automatically chosen entropy iterate.
    pub max_entropy_steps: usize,
    /// Fixes the entropy iterate instead of choosing it.
    pub entropy_steps: Option<usize>,
}

impl Default for ThermoConfig {
    fn default() -> Self {
        ThermoConfig {
            samples_per_cell: 256,
            seed: 0,
            tol: 1e-11,
            max_iter: 200_000,
            max_entropy_steps: 64,
            entropy_steps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreeEnergyReport {
    /// Entropy rate, nats per map step.
    pub entropy: f64,
    pub phi_integral: f64,
    pub p_variational: f64,
    pub p_spectral: f64,
    /// `log r(L_φ)`; `p_spectral − entropy`.
    pub log_growth: f64,
    pub entropy_steps: usize,
    pub measure: MeasureVector,
    /// Normalized fixed point of `L_φ`, the discrete equilibrium-measure
    /// candidate.
    pub equilibrium_density: MeasureVector,
    pub non_unique: bool,
    pub entropy_method: &'static str,
    pub spectral_method: &'static str,
}

/// Largest `k ≤ max_steps` with `‖Φ^k‖₂ · (widest cell) ≤ (narrowest domain
/// side)` and `‖Φ^k‖₂ ≤ samples/4`; at least 1.
pub fn entropy_steps(map: &FlowMap, part: &Partition, samples_per_cell: usize, max_steps: usize) -> usize {
    let domain = part.domain();
    let min_side = (0..domain.dim()).map(|a| domain.width(a)).fold(f64::INFINITY, f64::min);
    let cell = part.max_cell_width();
    let sample_cap = samples_per_cell as f64 / 4.0;
    let d = map.dim();
    let mut power = nalgebra::DMatrix::<f64>::identity(d, d);
    let mut best = 1;
    for k in 1..=max_steps.max(1) {
        power = map.matrix() * power;
        let stretch = power.singular_values().max();
        if stretch * cell <= min_side && stretch <= sample_cap {
            best = k;
        } else if stretch > 1.0 {
            // the stretch of an expanding direction only grows from here
            break;
        }
    }
    best
}

pub fn free_energy(map: &FlowMap, part: &Partition, phi: &Potential, cfg: &ThermoConfig) -> Result<FreeEnergyReport> {
    if !map.wrap() {
        return Err(Error::Precondition("free energy needs a wrapped (toral) map".into()));
    }
    let one_step = ulam_matrix_steps(map, part, cfg.samples_per_cell, cfg.seed, 1)?;
    let steps = cfg
        .entropy_steps
        .unwrap_or_else(|| entropy_steps(map, part, cfg.samples_per_cell, cfg.max_entropy_steps));
    let multi_step = if steps == 1 {
        None
    } else {
        Some(ulam_matrix_steps(map, part, cfg.samples_per_cell, cfg.seed, steps)?)
    };
    free_energy_from(&one_step, multi_step.as_ref(), part, phi, cfg)
}

/// Free energy from prebuilt matrices; `multi_step` defaults to `one_step`.
pub fn free_energy_from(
    one_step: &UlamMatrix,
    multi_step: Option<&UlamMatrix>,
    part: &Partition,
    phi: &Potential,
    cfg: &ThermoConfig,
) -> Result<FreeEnergyReport> {
    let inv = invariant_measure(one_step, cfg.tol, cfg.max_iter)?;
    let (entropy, entropy_steps, non_unique) = match multi_step {
        Some(u) => {
            let inv_n = invariant_measure(u, cfg.tol, cfg.max_iter)?;
            (entropy_rate(u, &inv_n.measure)?, u.steps(), inv.non_unique || inv_n.non_unique)
        }
        None => (entropy_rate(one_step, &inv.measure)?, one_step.steps(), inv.non_unique),
    };
    let phi_integral = potential_integral(phi, part, &inv.measure)?;
    let weighted = one_step.weighted(phi, part)?;
    let fixed = transfer_fixed_point(&weighted, cfg.tol, cfg.max_iter, None)?;
    Ok(FreeEnergyReport {
        entropy,
        phi_integral,
        p_variational: entropy + phi_integral,
        p_spectral: entropy + fixed.log_growth,
        log_growth: fixed.log_growth,
        entropy_steps,
        measure: inv.measure,
        equilibrium_density: fixed.density,
        non_unique,
        entropy_method: "ulam-chain entropy rate of the n-step iterate / n",
        spectral_method: "entropy + log growth of weighted one-step ulam operator",
    })
}

/// `φ = 0` pressure by the spectral route.
pub fn topological_entropy(map: &FlowMap, part: &Partition, cfg: &ThermoConfig) -> Result<f64> {
    Ok(free_energy(map, part, &Potential::zero(), cfg)?.p_spectral)
}
