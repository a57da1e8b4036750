//! Euler–Maruyama on dx = -x dt + sqrt(ε) dW: the empirical variance
//! settles at ε/2.

use nalgebra::dmatrix;
use thermogame::perturb::{euler_maruyama, PerturbSpec};
use thermogame::sysflow::{Domain, GainSet, SystemSpec};

fn main() -> thermogame::Result<()> {
    let spec = SystemSpec::time_invariant(
        dmatrix![-1.0],
        vec![dmatrix![1.0]],
        Domain::new(vec![-10.0], vec![10.0], false)?,
        1e-3,
    )?;
    let gains = GainSet::zeros(&spec, 1.0)?;
    let n = 20_000;
    for eps in [0.1, 1.0] {
        let p = PerturbSpec {
            epsilon: eps,
            sigma: dmatrix![1.0],
            dt_sde: 1e-2,
            n_paths: n,
            horizon: 10.0,
            seed: 7,
        };
        let end = euler_maruyama(&spec, &gains, &p, &vec![0.0; n], &[10.0])?;
        let xs = &end.states[0];
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        println!("eps {eps}: variance {var:.4}, expected {:.4}", eps / 2.0);
    }
    Ok(())
}
