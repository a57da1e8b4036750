use crate::error::{Error, Result};
use crate::thermo::{MeasureVector, Partition};

/// Normalized cell histogram of a point sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    pub measure: MeasureVector,
    pub n_samples: usize,
}

/// Histogram of the flat row-major points over the partition cells.
pub fn empirical_measure(points: &[f64], part: &Partition) -> Result<EmpiricalMeasure> {
    let d = part.dim();
    if points.is_empty() || !points.len().is_multiple_of(d) {
        return Err(Error::Dimension(format!("{} coordinates do not form {d}-dimensional points", points.len())));
    }
    let mut counts = vec![0u64; part.len()];
    for x in points.chunks(d) {
        let cell = part
            .locate(x)
            .ok_or_else(|| Error::Domain(format!("sample {x:?} lies outside the partition box")))?;
        counts[cell] += 1;
    }
    let n = points.len() / d;
    let measure = MeasureVector::from_weights(counts.into_iter().map(|c| c as f64).collect())?;
    Ok(EmpiricalMeasure { measure, n_samples: n })
}

fn smoothed(v: &[f64], delta: f64) -> Vec<f64> {
    let total: f64 = v.iter().map(|x| x + delta).sum();
    v.iter().map(|x| (x + delta) / total).collect()
}

fn check_pair(p: &MeasureVector, q: &MeasureVector, delta: f64) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::Dimension(format!("measures have lengths {} and {}", p.len(), q.len())));
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::Precondition(format!("smoothing must be >= 0, got {delta}")));
    }
    Ok(())
}

/// `Σ p̃ log(p̃/q̃)` with `ṽ = (v + δ)/Σ(v + δ)`. With `δ = 0` the support of
/// `p` must lie in the support of `q`.
pub fn kl_divergence(p: &MeasureVector, q: &MeasureVector, delta: f64) -> Result<f64> {
    check_pair(p, q, delta)?;
    let (ps, qs) = (smoothed(p.as_slice(), delta), smoothed(q.as_slice(), delta));
    let mut kl = 0.0;
    for (i, (a, b)) in ps.iter().zip(&qs).enumerate() {
        if *a == 0.0 {
            continue;
        }
        if *b == 0.0 {
            return Err(Error::AbsoluteContinuity { index: i, p: *a });
        }
        kl += a * (a / b).ln();
    }
    Ok(kl)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinskerCheck {
    /// `½‖p̃ − q̃‖₁²`.
    pub lhs: f64,
    pub kl: f64,
    /// `kl − lhs`; Pinsker's inequality makes this nonnegative.
    pub slack: f64,
}

pub fn pinsker_check(p: &MeasureVector, q: &MeasureVector, delta: f64) -> Result<PinskerCheck> {
    let kl = kl_divergence(p, q, delta)?;
    let (ps, qs) = (smoothed(p.as_slice(), delta), smoothed(q.as_slice(), delta));
    let l1: f64 = ps.iter().zip(&qs).map(|(a, b)| (a - b).abs()).sum();
    let lhs = 0.5 * l1 * l1;
    Ok(PinskerCheck { lhs, kl, slack: kl - lhs })
}
