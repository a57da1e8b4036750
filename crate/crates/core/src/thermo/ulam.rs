//! Ulam discretization of the transfer operator: cell-to-cell transition
//! frequencies of a deterministic lattice point set pushed through the map.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Partition, Potential};
use crate::error::{Error, Result};
use crate::sysflow::FlowMap;

/// Sparse row-stochastic cell transition matrix in CSR layout, optionally
/// carrying a weight vector `w_j = exp(φ(center_j))` so that the weighted
/// operator is `L_ij = P_ij w_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct UlamMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    samples_per_cell: usize,
    seed: u64,
    steps: usize,
    weights: Option<Vec<f64>>,
}

/// One-step Ulam matrix of `map` on `part`.
pub fn ulam_matrix(map: &FlowMap, part: &Partition, samples_per_cell: usize, seed: u64) -> Result<UlamMatrix> {
    ulam_matrix_steps(map, part, samples_per_cell, seed, 1)
}

/// Ulam matrix of the `steps`-fold iterate of `map`.
pub fn ulam_matrix_steps(
    map: &FlowMap,
    part: &Partition,
    samples_per_cell: usize,
    seed: u64,
    steps: usize,
) -> Result<UlamMatrix> {
    if samples_per_cell == 0 {
        return Err(Error::Precondition("samples_per_cell must be >= 1".into()));
    }
    if steps == 0 {
        return Err(Error::Precondition("steps must be >= 1".into()));
    }
    if !map.domain().same_box(part.domain()) {
        return Err(Error::Precondition("map domain and partition domain differ".into()));
    }
    let d = part.dim();
    let alphas = kronecker_steps(d.saturating_sub(1));
    let inv_s = 1.0 / samples_per_cell as f64;

    let rows: Vec<Vec<(usize, f64)>> = (0..part.len())
        .into_par_iter()
        .map(|cell| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(cell as u64);
            let shift: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            let corner = part.corner(cell);
            let mut x = vec![0.0; d];
            let mut scratch = vec![0.0; d];
            let mut hits = Vec::with_capacity(samples_per_cell);
            for k in 0..samples_per_cell {
                let u0 = (k as f64 + shift[0]) * inv_s;
                x[0] = corner[0] + u0 * part.cell_width(0);
                for a in 1..d {
                    let u = (shift[a] + k as f64 * alphas[a - 1]).fract();
                    x[a] = corner[a] + u * part.cell_width(a);
                }
                map.iterate_in_place(&mut x, steps, &mut scratch);
                match part.locate(&x) {
                    Some(j) => hits.push(j),
                    None => {
                        return Err(Error::Domain(format!(
                            "sample from cell {cell} lands at {x:?} outside the box"
                        )))
                    }
                }
            }
            hits.sort_unstable();
            let mut row: Vec<(usize, f64)> = Vec::new();
            let mut i = 0;
            while i < hits.len() {
                let j = hits[i];
                let run = hits[i..].iter().take_while(|h| **h == j).count();
                row.push((j, run as f64 * inv_s));
                i += run;
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let mut row_ptr = Vec::with_capacity(part.len() + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    for row in rows {
        for (j, v) in row {
            cols.push(j);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    Ok(UlamMatrix {
        n: part.len(),
        row_ptr,
        cols,
        vals,
        samples_per_cell,
        seed,
        steps,
        weights: None,
    })
}

/// Additive recurrence steps `g^-1, g^-2, ..` where `g` is the generalized
/// golden ratio solving `g^(k+1) = g + 1`.
fn kronecker_steps(k: usize) -> Vec<f64> {
    if k == 0 {
        return Vec::new();
    }
    let mut g = 2.0f64;
    for _ in 0..64 {
        g = (1.0 + g).powf(1.0 / (k as f64 + 1.0));
    }
    (1..=k).map(|i| g.powi(-(i as i32))).collect()
}

impl UlamMatrix {
    /// Builds a matrix from dense rows; intended for small hand-made operators.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::Dimension(format!("row {i} has length {}, expected {n}", r.len())));
            }
            let sum: f64 = r.iter().sum();
            if r.iter().any(|v| !(*v >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
                return Err(Error::Precondition(format!("row {i} is not stochastic")));
            }
            for (j, v) in r.iter().enumerate() {
                if *v > 0.0 {
                    cols.push(j);
                    vals.push(*v);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(UlamMatrix {
            n,
            row_ptr,
            cols,
            vals,
            samples_per_cell: 0,
            seed: 0,
            steps: 1,
            weights: None,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn samples_per_cell(&self) -> usize {
        self.samples_per_cell
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of map iterations one transition of this matrix represents.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_weighted(&self) -> bool {
        self.weights.is_some()
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    /// Nonzero `(column, P_ij)` pairs of row `i` (unweighted values).
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|(c, _)| *c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| {
                let mut r = vec![0.0; self.n];
                for (j, v) in self.row(i) {
                    r[j] = v;
                }
                r
            })
            .collect()
    }

    /// Weighted copy with `w_j = exp(φ(center_j))`.
    pub fn weighted(&self, phi: &Potential, part: &Partition) -> Result<UlamMatrix> {
        if part.len() != self.n {
            return Err(Error::Dimension(format!(
                "partition has {} cells, matrix has {}",
                part.len(),
                self.n
            )));
        }
        let w = phi.on_centers(part)?.into_iter().map(f64::exp).collect();
        Ok(UlamMatrix {
            weights: Some(w),
            ..self.clone()
        })
    }

    pub fn unweighted(&self) -> UlamMatrix {
        UlamMatrix {
            weights: None,
            ..self.clone()
        }
    }

    /// `v · L` (or `v · P` when unweighted).
    pub fn left_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, vi) in v.iter().enumerate() {
            if *vi == 0.0 {
                continue;
            }
            for (j, p) in self.row(i) {
                out[j] += vi * p;
            }
        }
        if let Some(w) = &self.weights {
            for (o, wj) in out.iter_mut().zip(w) {
                *o *= wj;
            }
        }
        out
    }

    /// Sparse triplet text: a `#` header with dimensions and provenance, then
    /// one `i j value` line per nonzero.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# rows {} cols {} nnz {} seed {} samples_per_cell {} steps {}",
            self.n,
            self.n,
            self.nnz(),
            self.seed,
            self.samples_per_cell,
            self.steps
        )?;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                writeln!(w, "{i} {j} {v}")?;
            }
        }
        Ok(())
    }
}
