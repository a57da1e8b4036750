//! Closed-loop transition matrix of a two-channel plant and its split into
//! the channel-removed factor and the channel factor.

use nalgebra::dmatrix;
use thermogame::sysflow::{
    closed_loop_matrix, integrate_flow, transition_factors, transition_matrix, Domain, GainSet, SystemSpec,
};

fn main() -> thermogame::Result<()> {
    let spec = SystemSpec::time_invariant(
        dmatrix![0.0, 1.0; -1.0, -0.2],
        vec![dmatrix![1.0; 0.0], dmatrix![0.0; 1.0]],
        Domain::new(vec![-2.0, -2.0], vec![2.0, 2.0], false)?,
        1e-3,
    )?;
    let gains = GainSet::new(vec![dmatrix![-0.5, 0.0], dmatrix![0.0, -0.3]], 1.0)?;
    println!("A_cl =\n{}", closed_loop_matrix(&spec, &gains, 0.0)?);

    let phi = transition_matrix(&spec, &gains, 1.0)?;
    println!("Phi(1) =\n{phi}");
    for j in 0..spec.channels() {
        let f = transition_factors(&spec, &gains, j, 1.0)?;
        println!("channel {j}: |PhiNoJ PhiJ - Phi| = {:.3e}", (&f.product - &phi).norm());
    }

    let x = integrate_flow(&spec, &gains, &[1.0, 0.0], 1.0)?;
    println!("x(1) from (1, 0) = {x:?}");
    Ok(())
}
