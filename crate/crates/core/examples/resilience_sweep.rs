//! Entropy gap between the noisy and noiseless closed loop of a stable focus
//! on the torus, shrinking as the noise level drops.

use nalgebra::{dmatrix, DMatrix};
use thermogame::perturb::{convergence_sweep, PerturbSpec, ResilienceSetup, X0Sampler};
use thermogame::sysflow::{Domain, GainSet, SystemSpec};
use thermogame::thermo::build_partition;

fn main() -> thermogame::Result<()> {
    let spec = SystemSpec::time_invariant(
        dmatrix![-1.0, 0.5; -0.5, -1.0],
        vec![DMatrix::identity(2, 2)],
        Domain::new(vec![-1.0, -1.0], vec![1.0, 1.0], true)?,
        1e-3,
    )?;
    let gains = GainSet::new(vec![dmatrix![-2.0, 0.0; 0.0, -2.0]], 2.0)?;
    let part = build_partition(spec.domain(), 5)?;
    let p = PerturbSpec {
        epsilon: 0.0,
        sigma: DMatrix::identity(2, 2),
        dt_sde: 1e-2,
        n_paths: 20_000,
        horizon: 4.0,
        seed: 11,
    };
    let setup = ResilienceSetup {
        times: vec![2.0, 3.0, 4.0],
        map_tau: 0.5,
        delta: 1e-9,
        x0: X0Sampler::UniformBox,
        x0_seed: 12,
        samples_per_cell: 256,
        ulam_seed: 13,
    };
    let sweep = convergence_sweep(&spec, &gains, &p, &part, &setup, &[0.5, 0.1, 0.02], 0.1)?;
    for r in &sweep.runs {
        println!(
            "eps {:<5} rho_hat {:.5}  noise floor {:.1e}  min Pinsker slack {:.3e}",
            r.epsilon,
            r.rho_hat,
            r.noise_floor,
            r.rows.iter().map(|x| x.slack).fold(f64::INFINITY, f64::min)
        );
    }
    println!("inversions {:?}, pass {}", sweep.inversions, sweep.pass);
    Ok(())
}
