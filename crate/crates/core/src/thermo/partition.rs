use crate::error::{Error, Result};
use crate::sysflow::Domain;

/// Default upper bound on the number of cells `m^d`.
pub const DEFAULT_CELL_CAP: usize = 1 << 20;

/// Uniform grid of `m` cells per axis over a box, indexed row-major
/// (the first axis is the most significant digit).
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    domain: Domain,
    m: usize,
    cells: usize,
    widths: Vec<f64>,
}

pub fn build_partition(domain: &Domain, m: usize) -> Result<Partition> {
    Partition::with_cap(domain, m, DEFAULT_CELL_CAP)
}

impl Partition {
    pub fn with_cap(domain: &Domain, m: usize, cap: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::Precondition(format!("need at least 2 cells per axis, got {m}")));
        }
        let d = domain.dim();
        let cells = (0..d).try_fold(1usize, |acc, _| acc.checked_mul(m).filter(|c| *c <= cap));
        let Some(cells) = cells else {
            return Err(Error::Resource(format!(
                "{m}^{d} cells exceed the cap of {cap}; use a smaller m"
            )));
        };
        let widths = (0..d).map(|a| domain.width(a) / m as f64).collect();
        Ok(Partition {
            domain: domain.clone(),
            m,
            cells,
            widths,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn per_axis(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.cells
    }

    pub fn is_empty(&self) -> bool {
        self.cells == 0
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn cell_width(&self, axis: usize) -> f64 {
        self.widths[axis]
    }

    pub fn max_cell_width(&self) -> f64 {
        self.widths.iter().copied().fold(0.0, f64::max)
    }

    pub fn multi_index(&self, mut index: usize) -> Vec<usize> {
        let d = self.dim();
        let mut out = vec![0; d];
        for a in (0..d).rev() {
            out[a] = index % self.m;
            index /= self.m;
        }
        out
    }

    pub fn index_of(&self, multi: &[usize]) -> usize {
        multi.iter().fold(0, |acc, i| acc * self.m + i)
    }

    /// Cell containing `x`, or `None` outside the box.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let mut index = 0;
        for (a, v) in x.iter().enumerate() {
            let lo = self.domain.lo()[a];
            if !(*v >= lo && *v < self.domain.hi()[a]) {
                return None;
            }
            let k = (((v - lo) / self.widths[a]) as usize).min(self.m - 1);
            index = index * self.m + k;
        }
        Some(index)
    }

    pub fn center(&self, index: usize) -> Vec<f64> {
        self.multi_index(index)
            .iter()
            .enumerate()
            .map(|(a, k)| self.domain.lo()[a] + (*k as f64 + 0.5) * self.widths[a])
            .collect()
    }

    pub fn centers(&self) -> Vec<Vec<f64>> {
        (0..self.cells).map(|i| self.center(i)).collect()
    }

    /// Lower corner of a cell.
    pub fn corner(&self, index: usize) -> Vec<f64> {
        self.multi_index(index)
            .iter()
            .enumerate()
            .map(|(a, k)| self.domain.lo()[a] + *k as f64 * self.widths[a])
            .collect()
    }
}
