use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Partition, Potential, UlamMatrix};
use crate::error::{Error, Result};

/// Probability vector over partition cells.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureVector(Vec<f64>);

impl MeasureVector {
    /// Wraps `v` after checking nonnegativity and unit mass (within 1e-12).
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::Precondition("empty measure".into()));
        }
        if let Some(i) = v.iter().position(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err(Error::Precondition(format!("measure entry {i} is {}", v[i])));
        }
        let s: f64 = v.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::Precondition(format!("measure has mass {s}")));
        }
        Ok(MeasureVector(v))
    }

    /// Normalizes nonnegative weights to unit mass.
    pub fn from_weights(v: Vec<f64>) -> Result<Self> {
        if let Some(i) = v.iter().position(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err(Error::Precondition(format!("weight {i} is {}", v[i])));
        }
        let s: f64 = v.iter().sum();
        if !(s > 0.0) {
            return Err(Error::Precondition("weights have zero mass".into()));
        }
        Ok(MeasureVector(v.into_iter().map(|x| x / s).collect()))
    }

    pub fn uniform(n: usize) -> Self {
        MeasureVector(vec![1.0 / n as f64; n])
    }

    pub fn point_mass(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        MeasureVector(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn l1_distance(&self, other: &MeasureVector) -> f64 {
        l1(&self.0, &other.0)
    }
}

pub(crate) fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub(crate) fn normalize(v: &mut [f64]) -> f64 {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        for x in v.iter_mut() {
            *x /= s;
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantMeasure {
    pub measure: MeasureVector,
    pub iterations: usize,
    pub residual: f64,
    /// A second, randomized start converged elsewhere: the chain likely has
    /// several invariant measures and the uniform-start one was returned.
    pub non_unique: bool,
}

/// Power iteration `π ← πP` from the uniform vector until `‖πP − π‖₁ < tol`.
pub fn invariant_measure(u: &UlamMatrix, tol: f64, max_iter: usize) -> Result<InvariantMeasure> {
    if u.is_weighted() {
        return Err(Error::Precondition("invariant_measure needs an unweighted matrix".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Precondition("tolerance must be positive".into()));
    }
    let n = u.len();
    let (pi, iterations, residual) = power_iterate(u, vec![1.0 / n as f64; n], tol, max_iter)?;

    let mut rng = ChaCha8Rng::seed_from_u64(u.seed() ^ 0x005e_ed0f_1a57);
    let start: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = start.iter().sum();
    let start = start.into_iter().map(|x| x / total).collect();
    let non_unique = match power_iterate(u, start, tol, max_iter) {
        Ok((other, _, _)) => l1(&pi, &other) > 10.0 * tol,
        Err(_) => true,
    };

    Ok(InvariantMeasure {
        measure: MeasureVector(pi),
        iterations,
        residual,
        non_unique,
    })
}

fn power_iterate(u: &UlamMatrix, mut pi: Vec<f64>, tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize, f64)> {
    let mut residual = f64::INFINITY;
    for it in 0..max_iter {
        let mut next = u.left_mul(&pi);
        residual = l1(&next, &pi);
        if residual < tol {
            return Ok((pi, it + 1, residual));
        }
        normalize(&mut next);
        pi = next;
    }
    Err(Error::Convergence {
        iterations: max_iter,
        residual,
        diagnostics: String::from("invariant measure power iteration"),
    })
}

/// Entropy rate `−Σ_i π_i Σ_j P_ij log P_ij` of the Ulam chain, per map step
/// (divided by the matrix's step count). `0·log 0 = 0`.
pub fn entropy_rate(u: &UlamMatrix, pi: &MeasureVector) -> Result<f64> {
    if u.is_weighted() {
        return Err(Error::Precondition("entropy_rate needs an unweighted matrix".into()));
    }
    if pi.len() != u.len() {
        return Err(Error::Dimension(format!("measure length {} vs {} cells", pi.len(), u.len())));
    }
    let drift = l1(&u.left_mul(pi.as_slice()), pi.as_slice());
    if drift > 1e-6 {
        return Err(Error::Precondition(format!("measure is not invariant (‖πP − π‖₁ = {drift:.3e})")));
    }
    let mut h = 0.0;
    for (i, p_i) in pi.as_slice().iter().enumerate() {
        if *p_i == 0.0 {
            continue;
        }
        let row: f64 = u
            .row(i)
            .filter(|(_, p)| *p > 0.0)
            .map(|(_, p)| -p * p.max(1e-300).ln())
            .sum();
        h += p_i * row;
    }
    Ok(h / u.steps() as f64)
}

/// `Σ_i π_i φ(center_i)`.
pub fn potential_integral(phi: &Potential, part: &Partition, pi: &MeasureVector) -> Result<f64> {
    if pi.len() != part.len() {
        return Err(Error::Dimension(format!("measure length {} vs {} cells", pi.len(), part.len())));
    }
    let values = phi.on_centers(part)?;
    Ok(values.iter().zip(pi.as_slice()).map(|(v, p)| v * p).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysflow::{Domain, FlowMap};
    use crate::thermo::{build_partition, ulam_matrix};
    use nalgebra::dmatrix;

    fn doubling_u(m: usize) -> UlamMatrix {
        let map = FlowMap::direct(dmatrix![2.0], Domain::unit(1, true), 1.0).unwrap();
        ulam_matrix(&map, &build_partition(map.domain(), m).unwrap(), 256, 1).unwrap()
    }

    #[test]
    fn doubling_invariant_is_uniform() {
        let inv = invariant_measure(&doubling_u(2), 1e-12, 1000).unwrap();
        assert_eq!(inv.measure.as_slice(), &[0.5, 0.5]);
        assert!(!inv.non_unique);
    }

    #[test]
    fn identity_flags_non_uniqueness() {
        let u = UlamMatrix::from_dense(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]])
            .unwrap();
        let inv = invariant_measure(&u, 1e-10, 100).unwrap();
        assert_eq!(inv.measure, MeasureVector::uniform(3));
        assert!(inv.non_unique);
        assert_eq!(entropy_rate(&u, &inv.measure).unwrap(), 0.0);
    }

    #[test]
    fn periodic_chain_does_not_converge() {
        let u = UlamMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        // uniform start is already invariant
        assert!(invariant_measure(&u, 1e-12, 10).is_ok());
        let v = UlamMatrix::from_dense(&[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.5, 0.5, 0.0]]).unwrap();
        assert!(invariant_measure(&v, 1e-14, 3).unwrap_err().exit_code() == 3);
    }

    #[test]
    fn doubling_entropy_is_log2() {
        for m in [2, 3, 8, 50] {
            let u = doubling_u(m);
            let inv = invariant_measure(&u, 1e-12, 10_000).unwrap();
            let h = entropy_rate(&u, &inv.measure).unwrap();
            assert!((h - 2f64.ln()).abs() < 1e-12, "m={m}: {h}");
        }
    }

    #[test]
    fn entropy_rejects_non_invariant_measure() {
        let u = UlamMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(entropy_rate(&u, &MeasureVector::point_mass(2, 0)).is_err());
    }

    #[test]
    fn integral_of_constant_and_dirac() {
        let part = build_partition(&Domain::unit(1, true), 10).unwrap();
        let pi = MeasureVector::from_weights((0..10).map(|i| (i * i) as f64 + 1.0).collect()).unwrap();
        let c = potential_integral(&Potential::constant(2.5), &part, &pi).unwrap();
        assert!((c - 2.5).abs() < 1e-14);
        let phi = Potential::custom(|x| x[0] * x[0], 0.0, 1.0);
        let dirac = potential_integral(&phi, &part, &MeasureVector::point_mass(10, 3)).unwrap();
        let c3 = part.center(3)[0];
        assert_eq!(dirac, c3 * c3);
    }

    #[test]
    fn integral_of_identity_is_half() {
        let dom = Domain::unit(1, true);
        let part = build_partition(&dom, 100).unwrap();
        let phi = Potential::linear(vec![1.0], &dom).unwrap();
        let v = potential_integral(&phi, &part, &MeasureVector::uniform(100)).unwrap();
        assert!((v - 0.5).abs() < 1e-3);
    }

    #[test]
    fn measure_validation() {
        assert!(MeasureVector::new(vec![0.5, 0.6]).is_err());
        assert!(MeasureVector::new(vec![-0.1, 1.1]).is_err());
        assert!(MeasureVector::new(vec![0.25, 0.75]).is_ok());
    }
}
