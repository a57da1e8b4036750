use serde::{Deserialize, Serialize};

use super::{empirical_measure, euler_maruyama, pinsker_check, kl_divergence, PerturbSpec, X0Sampler};
use crate::error::{Error, Result};
use crate::sysflow::{flow_map, GainSet, SystemSpec};
use crate::thermo::{ulam_matrix, MeasureVector, Partition};

pub const DEFAULT_DELTA: f64 = 1e-9;
pub const DEFAULT_SWEEP_THRESHOLD: f64 = 0.1;

/// Everything about a resilience run except the noise model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResilienceSetup {
    /// Observation times; each must be a multiple of `map_tau`.
    pub times: Vec<f64>,
    /// Step time of the unperturbed Ulam chain.
    pub map_tau: f64,
    /// Histogram smoothing before KL.
    pub delta: f64,
    pub x0: X0Sampler,
    pub x0_seed: u64,
    pub samples_per_cell: usize,
    pub ulam_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResilienceRow {
    pub t: f64,
    /// Ulam steps matched to `t`.
    pub steps: usize,
    pub kl: f64,
    pub pinsker_lhs: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResilienceReport {
    pub epsilon: f64,
    pub delta: f64,
    pub n_paths: usize,
    pub rows: Vec<ResilienceRow>,
    /// Entropy gap: the largest KL over the sampled times.
    pub rho_hat: f64,
    /// Largest KL between the even- and odd-indexed halves of the paths.
    pub noise_floor: f64,
}

fn matched_steps(times: &[f64], tau: f64) -> Result<Vec<usize>> {
    if !(tau > 0.0) {
        return Err(Error::config("perturb.map_tau", "must be positive"));
    }
    if times.is_empty() {
        return Err(Error::config("perturb.times", "need at least one observation time"));
    }
    times
        .iter()
        .map(|t| {
            let n = (t / tau).round();
            if !(*t >= 0.0) || (n * tau - t).abs() > 1e-9 * t.max(1.0) {
                return Err(Error::config(
                    "perturb.times",
                    format!("time {t} is not a nonnegative multiple of map_tau = {tau}"),
                ));
            }
            Ok(n as usize)
        })
        .collect()
}

/// Compares the perturbed empirical measure at each sampled time with the
/// unperturbed Ulam chain run for the matched number of steps from the
/// histogram of the same initial states. The gains are used as given; the
/// caller decides whether they carry an equilibrium certificate.
pub fn resilience_run(
    spec: &SystemSpec,
    gains: &GainSet,
    p: &PerturbSpec,
    part: &Partition,
    setup: &ResilienceSetup,
) -> Result<ResilienceReport> {
    let steps = matched_steps(&setup.times, setup.map_tau)?;
    let domain = spec.domain();
    if !domain.same_box(part.domain()) {
        return Err(Error::Dimension("partition box differs from the system domain".into()));
    }
    let x0 = setup.x0.sample(domain, p.n_paths, setup.x0_seed)?;
    let mut x0_box = x0.clone();
    if domain.wrap() {
        for x in x0_box.chunks_mut(domain.dim()) {
            domain.reduce(x);
        }
    }
    let q0 = empirical_measure(&x0_box, part)?.measure;
    let map = flow_map(spec, gains, setup.map_tau, domain.wrap())?;
    let u = ulam_matrix(&map, part, setup.samples_per_cell, setup.ulam_seed)?;
    let ends = euler_maruyama(spec, gains, p, &x0, &setup.times)?;

    let d = domain.dim();
    let mut rows = Vec::with_capacity(steps.len());
    let mut noise_floor: f64 = 0.0;
    for (k, (t, n)) in setup.times.iter().zip(&steps).enumerate() {
        let mut q = q0.as_slice().to_vec();
        for _ in 0..*n {
            q = u.left_mul(&q);
        }
        let q = MeasureVector::from_weights(q)?;
        let pe = empirical_measure(&ends.states[k], part)?.measure;
        let check = pinsker_check(&pe, &q, setup.delta)?;
        rows.push(ResilienceRow {
            t: *t,
            steps: *n,
            kl: check.kl,
            pinsker_lhs: check.lhs,
            slack: check.slack,
        });
        if p.n_paths >= 2 {
            let (mut even, mut odd) = (Vec::new(), Vec::new());
            for (i, x) in ends.states[k].chunks(d).enumerate() {
                if i % 2 == 0 { &mut even } else { &mut odd }.extend_from_slice(x);
            }
            let a = empirical_measure(&even, part)?.measure;
            let b = empirical_measure(&odd, part)?.measure;
            noise_floor = noise_floor.max(kl_divergence(&a, &b, setup.delta)?);
        }
    }
    let rho_hat = rows.iter().map(|r| r.kl).fold(0.0, f64::max);
    Ok(ResilienceReport {
        epsilon: p.epsilon,
        delta: setup.delta,
        n_paths: p.n_paths,
        rows,
        rho_hat,
        noise_floor,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub runs: Vec<ResilienceReport>,
    /// Indices `i` with `ρ̂_i > ρ̂_{i−1}`.
    pub inversions: Vec<usize>,
    pub threshold: f64,
    pub pass: bool,
}

/// Runs [`resilience_run`] for each `ε` (strictly decreasing, all using the
/// same seeds). Passes when `ρ̂` decreases along the sweep, with at most one
/// inversion smaller than twice the split-half noise floor, and the last
/// `ρ̂` is below `threshold`.
pub fn convergence_sweep(
    spec: &SystemSpec,
    gains: &GainSet,
    p: &PerturbSpec,
    part: &Partition,
    setup: &ResilienceSetup,
    eps_list: &[f64],
    threshold: f64,
) -> Result<SweepReport> {
    if eps_list.is_empty() || eps_list.iter().any(|e| !(*e >= 0.0)) || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::config("perturb.eps_sweep", "must be non-empty, nonnegative and strictly decreasing"));
    }
    let runs = eps_list
        .iter()
        .map(|e| resilience_run(spec, gains, &p.with_epsilon(*e), part, setup))
        .collect::<Result<Vec<_>>>()?;
    let inversions: Vec<usize> = (1..runs.len()).filter(|i| runs[*i].rho_hat > runs[i - 1].rho_hat).collect();
    let tolerated = match inversions.as_slice() {
        [] => true,
        [i] => {
            let floor = runs[*i].noise_floor.max(runs[i - 1].noise_floor);
            runs[*i].rho_hat - runs[i - 1].rho_hat < 2.0 * floor
        }
        _ => false,
    };
    let last = runs.last().expect("non-empty sweep").rho_hat;
    Ok(SweepReport {
        pass: tolerated && last < threshold,
        runs,
        inversions,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysflow::Domain;
    use crate::thermo::build_partition;
    use nalgebra::{dmatrix, DMatrix};

    fn contracting() -> (SystemSpec, GainSet, Partition) {
        let dom = Domain::new(vec![-1.0, -1.0], vec![1.0, 1.0], true).unwrap();
        let spec = SystemSpec::time_invariant(
            dmatrix![-1.0, 0.5; -0.5, -1.0],
            vec![DMatrix::identity(2, 2)],
            dom.clone(),
            1e-3,
        )
        .unwrap();
        let gains = GainSet::new(vec![DMatrix::identity(2, 2) * -2.0], 2.0).unwrap();
        (spec, gains, build_partition(&dom, 5).unwrap())
    }

    fn setup() -> ResilienceSetup {
        ResilienceSetup {
            times: vec![2.0, 3.0],
            map_tau: 0.5,
            delta: DEFAULT_DELTA,
            x0: X0Sampler::UniformBox,
            x0_seed: 11,
            samples_per_cell: 64,
            ulam_seed: 5,
        }
    }

    fn pspec(epsilon: f64, n: usize) -> PerturbSpec {
        PerturbSpec {
            epsilon,
            sigma: DMatrix::identity(2, 2),
            dt_sde: 1e-2,
            n_paths: n,
            horizon: 3.0,
            seed: 3,
        }
    }

    #[test]
    fn noiseless_run_matches_chain() {
        let (spec, gains, part) = contracting();
        let r = resilience_run(&spec, &gains, &pspec(0.0, 20_000), &part, &setup()).unwrap();
        assert!(r.rows.iter().all(|row| row.kl < 0.05 && row.slack >= -1e-12), "{r:?}");
        assert_eq!(r.rows[0].steps, 4);
        let mut quiet = pspec(0.7, 20_000);
        quiet.sigma = DMatrix::zeros(2, 2);
        let r0 = resilience_run(&spec, &gains, &quiet, &part, &setup()).unwrap();
        assert_eq!(r0.rows, r.rows);
    }

    #[test]
    fn gap_grows_with_noise() {
        let (spec, gains, part) = contracting();
        let gaps: Vec<f64> = [0.01, 0.1, 1.0]
            .iter()
            .map(|e| resilience_run(&spec, &gains, &pspec(*e, 20_000), &part, &setup()).unwrap().rho_hat)
            .collect();
        assert!(gaps[0] < gaps[1] && gaps[1] < gaps[2], "{gaps:?}");
    }

    #[test]
    fn sweep_validation_and_trivial_pass() {
        let (spec, gains, part) = contracting();
        let p = pspec(0.0, 2_000);
        assert!(convergence_sweep(&spec, &gains, &p, &part, &setup(), &[0.1, 0.5], 0.1).is_err());
        let s = convergence_sweep(&spec, &gains, &p, &part, &setup(), &[0.0], 0.1).unwrap();
        assert!(s.pass);
    }

    #[test]
    fn times_must_match_map_steps() {
        let (spec, gains, part) = contracting();
        let bad = ResilienceSetup { times: vec![0.7], ..setup() };
        assert!(resilience_run(&spec, &gains, &pspec(0.1, 10), &part, &bad).is_err());
    }
}
