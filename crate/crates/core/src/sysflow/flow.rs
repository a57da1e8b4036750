use nalgebra::DMatrix;

use super::{transition_matrix, Domain, GainSet, SystemSpec};
use crate::error::{Error, Result};

/// The time-τ closed-loop map `x ↦ Φ_τ x`, optionally reduced onto the torus.
///
/// Evaluation is pure; a `FlowMap` can be shared across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMap {
    phi: DMatrix<f64>,
    // row-major copy of `phi` for the hot evaluation loop
    rows: Vec<f64>,
    tau: f64,
    domain: Domain,
}

impl FlowMap {
    /// Builds a map from an explicit matrix, e.g. a toral automorphism.
    pub fn direct(phi: DMatrix<f64>, domain: Domain, tau: f64) -> Result<Self> {
        if phi.nrows() != domain.dim() || phi.ncols() != domain.dim() {
            return Err(Error::Dimension(format!(
                "map matrix is {}x{}, domain has dimension {}",
                phi.nrows(),
                phi.ncols(),
                domain.dim()
            )));
        }
        let det = phi.determinant();
        if !(det.abs() > 0.0) || !det.is_finite() {
            return Err(Error::Precondition(format!("flow matrix must be invertible, det = {det}")));
        }
        let rows = phi.transpose().iter().copied().collect();
        Ok(FlowMap {
            phi,
            rows,
            tau,
            domain,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn wrap(&self) -> bool {
        self.domain.wrap()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Writes `Φ x` (wrapped when the map is toral) into `out`.
    pub fn evaluate_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for (r, o) in out.iter_mut().enumerate().take(d) {
            let row = &self.rows[r * d..(r + 1) * d];
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        if self.domain.wrap() {
            self.domain.reduce(out);
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.evaluate_into(x, &mut out);
        out
    }

    /// Applies the map `n` times in place.
    pub fn iterate_in_place(&self, x: &mut [f64], n: usize, scratch: &mut [f64]) {
        for _ in 0..n {
            self.evaluate_into(x, scratch);
            x.copy_from_slice(scratch);
        }
    }

    /// Spectral norm of `Φ^k`, the local stretch factor of the `k`-fold map.
    pub fn stretch(&self, k: u32) -> f64 {
        let mut p = DMatrix::identity(self.dim(), self.dim());
        for _ in 0..k {
            p = &self.phi * p;
        }
        p.singular_values().max()
    }
}

/// Precomputes the time-τ transition matrix of the closed loop. A system with a
/// direct map uses that matrix as-is.
pub fn flow_map(spec: &SystemSpec, gains: &GainSet, tau: f64, wrap: bool) -> Result<FlowMap> {
    if !(tau > 0.0) {
        return Err(Error::Precondition(format!("map time must be positive, got {tau}")));
    }
    let domain = spec.domain().with_wrap(wrap);
    let phi = match spec.direct_map() {
        Some(m) => m.clone(),
        None => transition_matrix(spec, gains, tau)?,
    };
    FlowMap::direct(phi, domain, tau)
}
