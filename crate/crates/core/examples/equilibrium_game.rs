//! Best-response search on the scalar two-channel game, checked against
//! brute-force enumeration, followed by a matching-pennies game with no
//! pure equilibrium.

use nalgebra::dmatrix;
use thermogame::game::{
    br_iteration, brute_force_equilibria, BrOutcome, FnObjective, FreeEnergyObjective, GameContext, StrategyGrid,
    DEFAULT_EPS_EQ, DEFAULT_PROFILE_CAP,
};
use thermogame::sysflow::{Domain, GainSet, SystemSpec};
use thermogame::thermo::{build_partition, Potential, ThermoConfig};

fn main() -> thermogame::Result<()> {
    let spec = SystemSpec::time_invariant(
        dmatrix![0.2],
        vec![dmatrix![1.0], dmatrix![1.0]],
        Domain::unit(1, true),
        1e-3,
    )?;
    let grid = StrategyGrid::uniform(&spec, 1.0, 0.5)?;
    let objective = FreeEnergyObjective {
        partition: build_partition(spec.domain(), 32)?,
        phi: Potential::zero(),
        taus: vec![0.5, 1.0, 2.0],
        thermo: ThermoConfig {
            samples_per_cell: 64,
            ..ThermoConfig::default()
        },
        spec,
    };
    let ctx = GameContext::new(&objective);
    let outcome = br_iteration(&ctx, &grid, &[2, 2], 20, DEFAULT_EPS_EQ)?;
    let cert = outcome.certificate().expect("scalar game converges");
    println!(
        "best response: profile {:?}, objective {:.6}, max delta {:.1e}, valid {}",
        cert.profile,
        cert.value,
        cert.max_delta(),
        cert.valid
    );
    let all = brute_force_equilibria(&ctx, &grid, DEFAULT_EPS_EQ, DEFAULT_PROFILE_CAP)?;
    println!("brute force: {all:?} ({} objective evaluations)", ctx.evaluations());

    let pennies = FnObjective(|j, g: &GainSet| {
        let m = g.gain(0)[(0, 0)] * g.gain(1)[(0, 0)];
        if j == 0 {
            m
        } else {
            -m
        }
    });
    let ctx = GameContext::new(&pennies);
    let grid = StrategyGrid::from_candidates(vec![vec![dmatrix![-1.0], dmatrix![1.0]]; 2], 1.0)?;
    if let BrOutcome::Cycle { cycle, rounds } = br_iteration(&ctx, &grid, &[0, 0], 20, DEFAULT_EPS_EQ)? {
        println!("matching pennies: cycle {cycle:?} after {rounds} rounds");
    }
    println!(
        "matching pennies: {} pure equilibria",
        brute_force_equilibria(&ctx, &grid, DEFAULT_EPS_EQ, DEFAULT_PROFILE_CAP)?.len()
    );
    Ok(())
}
