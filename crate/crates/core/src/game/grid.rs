use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sysflow::{GainSet, SystemSpec};

/// Candidate indices, one per channel.
pub type Profile = Vec<usize>;

/// Finite strategy space: a list of candidate gain matrices per channel,
/// each in lexicographic order of its row-major entries.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyGrid {
    candidates: Vec<Vec<DMatrix<f64>>>,
    bound: f64,
}

impl StrategyGrid {
    /// Every entry of every `K_j` ranges over `-bound, -bound + step, .., bound`.
    pub fn uniform(spec: &SystemSpec, bound: f64, step: f64) -> Result<Self> {
        if !(bound > 0.0) {
            return Err(Error::config("game.gain_bound", "gain bound must be positive"));
        }
        if !(step > 0.0) {
            return Err(Error::config("game.grid_step", "grid step must be positive"));
        }
        let levels = (2.0 * bound / step + 1e-9).floor() as usize + 1;
        let values: Vec<f64> = (0..levels)
            .map(|i| {
                let v = -bound + i as f64 * step;
                if (v - bound).abs() < 1e-9 {
                    bound
                } else {
                    v
                }
            })
            .collect();
        let candidates = (0..spec.channels())
            .map(|j| {
                let (r, d) = (spec.input_width(j), spec.dim());
                let entries = r * d;
                let count = values.len().checked_pow(entries as u32).filter(|c| *c <= 1 << 24).ok_or_else(|| {
                    Error::Resource(format!("channel {j} would have {}^{entries} candidates", values.len()))
                })?;
                Ok((0..count)
                    .map(|mut code| {
                        // first entry is the most significant digit
                        let mut digits = vec![0; entries];
                        for e in (0..entries).rev() {
                            digits[e] = code % values.len();
                            code /= values.len();
                        }
                        DMatrix::from_row_iterator(r, d, digits.iter().map(|k| values[*k]))
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        Self::from_candidates(candidates, bound)
    }

    pub fn from_candidates(candidates: Vec<Vec<DMatrix<f64>>>, bound: f64) -> Result<Self> {
        for (j, c) in candidates.iter().enumerate() {
            if c.is_empty() {
                return Err(Error::Game(format!("channel {j} has an empty strategy grid")));
            }
            if c.iter().flat_map(|k| k.iter()).any(|v| !(v.abs() <= bound)) {
                return Err(Error::Game(format!("channel {j} has a candidate outside the gain bound {bound}")));
            }
        }
        Ok(StrategyGrid { candidates, bound })
    }

    pub fn channels(&self) -> usize {
        self.candidates.len()
    }

    pub fn channel(&self, j: usize) -> &[DMatrix<f64>] {
        &self.candidates[j]
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Number of pure profiles, `None` on overflow.
    pub fn profile_count(&self) -> Option<usize> {
        self.candidates.iter().try_fold(1usize, |acc, c| acc.checked_mul(c.len()))
    }

    pub fn gains(&self, profile: &[usize]) -> GainSet {
        let gains = profile.iter().enumerate().map(|(j, k)| self.candidates[j][*k].clone()).collect();
        GainSet::new(gains, self.bound).expect("grid candidates respect the bound")
    }

    /// Grid indices of `gains`, if every channel's gain is a candidate.
    pub fn locate(&self, gains: &GainSet) -> Option<Profile> {
        if gains.len() != self.channels() {
            return None;
        }
        (0..self.channels())
            .map(|j| self.candidates[j].iter().position(|c| c == gains.gain(j)))
            .collect()
    }

    /// All profiles in lexicographic order (channel 0 most significant).
    pub fn profiles(&self) -> impl Iterator<Item = Profile> + '_ {
        let total = self.profile_count().unwrap_or(0);
        (0..total).map(move |mut code| {
            let mut p = vec![0; self.channels()];
            for j in (0..self.channels()).rev() {
                p[j] = code % self.candidates[j].len();
                code /= self.candidates[j].len();
            }
            p
        })
    }
}
