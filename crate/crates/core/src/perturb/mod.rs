//! Stochastically perturbed closed loop `dZ = A_cl Z dt + √ε σ dW`, and
//! relative-entropy checks of its empirical measures against the
//! unperturbed transfer operator.

mod divergence;
mod resilience;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use divergence::{empirical_measure, kl_divergence, pinsker_check, EmpiricalMeasure, PinskerCheck};
pub use resilience::{
    convergence_sweep, resilience_run, ResilienceReport, ResilienceRow, ResilienceSetup, SweepReport,
    DEFAULT_DELTA, DEFAULT_SWEEP_THRESHOLD,
};

use crate::error::{Error, Result};
use crate::sysflow::{closed_loop_matrix, Domain, GainSet, SystemSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbSpec {
    pub epsilon: f64,
    /// Constant `d×d` diffusion matrix.
    pub sigma: DMatrix<f64>,
    pub dt_sde: f64,
    pub n_paths: usize,
    pub horizon: f64,
    pub seed: u64,
}

impl PerturbSpec {
    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config("perturb.epsilon", "must be finite and >= 0"));
        }
        if self.sigma.shape() != (d, d) {
            return Err(Error::config(
                "perturb.sigma",
                format!("expected {d}x{d}, got {}x{}", self.sigma.nrows(), self.sigma.ncols()),
            ));
        }
        if !(self.dt_sde > 0.0) {
            return Err(Error::config("perturb.dt_sde", "must be positive"));
        }
        if self.n_paths == 0 {
            return Err(Error::config("perturb.n_paths", "must be at least 1"));
        }
        if !(self.horizon >= self.dt_sde) {
            return Err(Error::config("perturb.horizon", "must be at least dt_sde"));
        }
        Ok(())
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        PerturbSpec { epsilon, ..self.clone() }
    }
}

/// Initial-state distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum X0Sampler {
    Fixed(Vec<f64>),
    /// Uniform on the domain box.
    UniformBox,
    /// Independent normal coordinates.
    Gaussian { mean: Vec<f64>, std: Vec<f64> },
}

impl X0Sampler {
    /// `n` initial states as a flat row-major `n×d` array.
    pub fn sample(&self, domain: &Domain, n: usize, seed: u64) -> Result<Vec<f64>> {
        let d = domain.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n * d);
        match self {
            X0Sampler::Fixed(x) => {
                if x.len() != d {
                    return Err(Error::Dimension(format!("x0 has length {}, expected {d}", x.len())));
                }
                for _ in 0..n {
                    out.extend_from_slice(x);
                }
            }
            X0Sampler::UniformBox => {
                for _ in 0..n {
                    for a in 0..d {
                        out.push(domain.lo()[a] + rng.random::<f64>() * domain.width(a));
                    }
                }
            }
            X0Sampler::Gaussian { mean, std } => {
                if mean.len() != d || std.len() != d {
                    return Err(Error::Dimension(format!("gaussian x0 needs {d} means and deviations")));
                }
                if std.iter().any(|s| !(*s >= 0.0)) {
                    return Err(Error::Precondition("x0 deviations must be >= 0".into()));
                }
                for _ in 0..n {
                    for a in 0..d {
                        let z: f64 = rng.sample(StandardNormal);
                        out.push(mean[a] + std[a] * z);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Path states at the observation times: `states[k]` is the flat
/// row-major `n_paths × d` array at `times[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Endpoints {
    pub times: Vec<f64>,
    pub steps: Vec<usize>,
    pub d: usize,
    pub states: Vec<Vec<f64>>,
}

impl Endpoints {
    pub fn n_paths(&self) -> usize {
        self.states.first().map_or(0, |s| s.len() / self.d.max(1))
    }

    pub fn point(&self, k: usize, path: usize) -> &[f64] {
        &self.states[k][path * self.d..(path + 1) * self.d]
    }
}

/// Fixed-step Euler–Maruyama from the initial states `x0` (flat, one row per
/// path). Observation times are rounded to the step grid; with a wrapped
/// domain the observed states are reduced to the box while the paths
/// themselves evolve unwrapped. Path `i` draws from stream `i` of the seed.
pub fn euler_maruyama(
    spec: &SystemSpec,
    gains: &GainSet,
    p: &PerturbSpec,
    x0: &[f64],
    times: &[f64],
) -> Result<Endpoints> {
    let d = spec.dim();
    p.validate(d)?;
    if spec.direct_map().is_some() {
        return Err(Error::Precondition("a direct discrete map has no continuous drift to perturb".into()));
    }
    if x0.is_empty() || x0.len() != p.n_paths * d {
        return Err(Error::Dimension(format!(
            "x0 has {} values for {} paths of dimension {d}",
            x0.len(),
            p.n_paths
        )));
    }
    let mut steps = Vec::with_capacity(times.len());
    for t in times {
        if !(*t >= 0.0 && *t <= p.horizon + 1e-12) {
            return Err(Error::Precondition(format!("observation time {t} outside [0, {}]", p.horizon)));
        }
        steps.push((t / p.dt_sde).round() as usize);
    }
    let total = steps.iter().copied().max().unwrap_or(0);

    // closed-loop drift per schedule segment, row-major
    let seg_starts: Vec<f64> = spec.segments().iter().map(|s| s.start).collect();
    let drifts: Vec<Vec<f64>> = seg_starts
        .iter()
        .map(|s| closed_loop_matrix(spec, gains, *s).map(|m| m.transpose().as_slice().to_vec()))
        .collect::<Result<_>>()?;
    let step_segment: Vec<usize> = (0..total)
        .map(|n| {
            let t = n as f64 * p.dt_sde;
            seg_starts.iter().rposition(|s| *s <= t).unwrap_or(0)
        })
        .collect();
    let sigma: Vec<f64> = p.sigma.transpose().as_slice().to_vec();
    let scale = (p.epsilon * p.dt_sde).sqrt();
    let dt = p.dt_sde;

    let per_path: Vec<Result<Vec<f64>>> = (0..p.n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
            rng.set_stream(path as u64);
            let mut x = x0[path * d..(path + 1) * d].to_vec();
            let mut next = vec![0.0; d];
            let mut z = vec![0.0; d];
            let mut obs = vec![0.0; steps.len() * d];
            let record = |n: usize, x: &[f64], obs: &mut [f64]| {
                for (k, s) in steps.iter().enumerate() {
                    if *s == n {
                        obs[k * d..(k + 1) * d].copy_from_slice(x);
                    }
                }
            };
            record(0, &x, &mut obs);
            for n in 0..total {
                let a = &drifts[step_segment[n]];
                for v in z.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                for i in 0..d {
                    let mut drift = 0.0;
                    let mut noise = 0.0;
                    for k in 0..d {
                        drift += a[i * d + k] * x[k];
                        noise += sigma[i * d + k] * z[k];
                    }
                    next[i] = x[i] + dt * drift + scale * noise;
                }
                std::mem::swap(&mut x, &mut next);
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NumericRange {
                        time: (n + 1) as f64 * dt,
                        path: Some(path),
                    });
                }
                record(n + 1, &x, &mut obs);
            }
            Ok(obs)
        })
        .collect();
    // sequential so the reported failure is the lowest path id
    let per_path = per_path.into_iter().collect::<Result<Vec<_>>>()?;

    let domain = spec.domain();
    let mut states = vec![Vec::with_capacity(p.n_paths * d); steps.len()];
    for obs in &per_path {
        for (k, s) in states.iter_mut().enumerate() {
            let start = s.len();
            s.extend_from_slice(&obs[k * d..(k + 1) * d]);
            if domain.wrap() {
                domain.reduce(&mut s[start..]);
            }
        }
    }
    Ok(Endpoints {
        times: times.to_vec(),
        steps,
        d,
        states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysflow::integrate_flow;
    use nalgebra::dmatrix;

    fn scalar(a: f64, wrap: bool) -> (SystemSpec, GainSet) {
        let dom = Domain::new(vec![-10.0], vec![10.0], wrap).unwrap();
        let spec = SystemSpec::time_invariant(dmatrix![a], vec![dmatrix![1.0]], dom, 1e-3).unwrap();
        let gains = GainSet::zeros(&spec, 1.0).unwrap();
        (spec, gains)
    }

    fn pspec(epsilon: f64, n: usize, horizon: f64) -> PerturbSpec {
        PerturbSpec {
            epsilon,
            sigma: dmatrix![1.0],
            dt_sde: 1e-3,
            n_paths: n,
            horizon,
            seed: 7,
        }
    }

    #[test]
    fn noiseless_paths_follow_the_flow() {
        let (spec, gains) = scalar(-0.7, false);
        let p = pspec(0.0, 8, 2.0);
        let x0 = X0Sampler::UniformBox.sample(spec.domain(), 8, 3).unwrap();
        let e = euler_maruyama(&spec, &gains, &p, &x0, &[0.0, 1.0, 2.0]).unwrap();
        for path in 0..8 {
            assert_eq!(e.point(0, path), &x0[path..path + 1]);
            for k in 1..3 {
                let exact = integrate_flow(&spec, &gains, &x0[path..path + 1], e.times[k]).unwrap();
                // Euler step error, relative to the initial state
                assert!((e.point(k, path)[0] - exact[0]).abs() < 1e-3 * x0[path].abs().max(1.0));
            }
        }
    }

    #[test]
    fn zero_sigma_equals_zero_epsilon() {
        let (spec, gains) = scalar(-1.0, true);
        let x0 = X0Sampler::UniformBox.sample(spec.domain(), 50, 1).unwrap();
        let a = euler_maruyama(&spec, &gains, &pspec(0.0, 50, 1.0), &x0, &[0.5, 1.0]).unwrap();
        let mut p = pspec(0.3, 50, 1.0);
        p.sigma = dmatrix![0.0];
        let b = euler_maruyama(&spec, &gains, &p, &x0, &[0.5, 1.0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn brownian_variance_grows_linearly() {
        let (spec, gains) = scalar(0.0, false);
        let mut p = pspec(1.0, 10_000, 2.0);
        p.dt_sde = 1e-2;
        let x0 = vec![0.0; 10_000];
        let e = euler_maruyama(&spec, &gains, &p, &x0, &[2.0]).unwrap();
        let var = e.states[0].iter().map(|x| x * x).sum::<f64>() / 10_000.0;
        assert!((var - 2.0).abs() < 0.2, "{var}");
    }

    #[test]
    fn deterministic_per_seed() {
        let (spec, gains) = scalar(-1.0, true);
        let x0 = vec![0.5; 100];
        let run = |seed| {
            let mut p = pspec(0.5, 100, 0.5);
            p.seed = seed;
            euler_maruyama(&spec, &gains, &p, &x0, &[0.5]).unwrap()
        };
        assert_eq!(run(1), run(1));
        assert_ne!(run(1), run(2));
    }

    #[test]
    fn blow_up_reports_path() {
        let (spec, _) = scalar(1.0, false);
        let gains = GainSet::new(vec![dmatrix![1.0]], 1.0).unwrap();
        let p = PerturbSpec {
            dt_sde: 1.0,
            horizon: 2000.0,
            ..pspec(0.0, 3, 1.0)
        };
        let x0 = vec![1.0, 0.0, 1.0];
        match euler_maruyama(&spec, &gains, &p, &x0, &[2000.0]) {
            Err(Error::NumericRange { path: Some(0), time }) => assert!(time > 100.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrapped_observations_stay_in_box() {
        let (spec, gains) = scalar(0.0, true);
        let p = pspec(50.0, 200, 1.0);
        let e = euler_maruyama(&spec, &gains, &p, &vec![9.9; 200], &[1.0]).unwrap();
        assert!(e.states[0].iter().all(|x| spec.domain().contains(&[*x])));
    }

    #[test]
    fn sampler_validation() {
        let dom = Domain::unit(2, true);
        assert!(X0Sampler::Fixed(vec![0.1]).sample(&dom, 3, 0).is_err());
        let g = X0Sampler::Gaussian { mean: vec![0.5, 0.5], std: vec![0.0, 0.0] };
        assert_eq!(g.sample(&dom, 2, 0).unwrap(), vec![0.5; 4]);
        let u = X0Sampler::UniformBox.sample(&dom, 100, 0).unwrap();
        assert!(u.chunks(2).all(|x| dom.contains(x)));
    }
}
