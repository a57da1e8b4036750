//! Entropy of the doubling map and the cat map from Ulam chains, against
//! the exact values log 2 and log((3 + sqrt 5)/2).

use nalgebra::dmatrix;
use thermogame::sysflow::{flow_map, Domain, GainSet, SystemSpec};
use thermogame::thermo::{build_partition, free_energy, Potential, ThermoConfig};

fn main() -> thermogame::Result<()> {
    let cfg = ThermoConfig::default();

    // x' = (log 2) x over one time unit doubles x on the circle
    let doubling = SystemSpec::time_invariant(
        dmatrix![std::f64::consts::LN_2],
        vec![dmatrix![1.0]],
        Domain::unit(1, true),
        1e-3,
    )?;
    let gains = GainSet::zeros(&doubling, 1.0)?;
    let map = flow_map(&doubling, &gains, 1.0, true)?;
    for m in [2, 16, 128] {
        let part = build_partition(map.domain(), m)?;
        let r = free_energy(&map, &part, &Potential::zero(), &cfg)?;
        println!("doubling m={m:<4} entropy {:.6}  (log 2 = {:.6})", r.entropy, 2f64.ln());
    }

    let cat = SystemSpec::time_invariant(dmatrix![0.0, 0.0; 0.0, 0.0], vec![dmatrix![1.0; 0.0]], Domain::unit(2, true), 1e-3)?
        .with_direct_map(dmatrix![2.0, 1.0; 1.0, 1.0])?;
    let gains = GainSet::zeros(&cat, 1.0)?;
    let map = flow_map(&cat, &gains, 1.0, true)?;
    let exact = ((3.0 + 5f64.sqrt()) / 2.0).ln();
    for m in [16, 32, 64] {
        let part = build_partition(map.domain(), m)?;
        let r = free_energy(&map, &part, &Potential::zero(), &cfg)?;
        println!(
            "cat      m={m:<4} entropy {:.6}  (exact {exact:.6}, error {:.1}%, iterate {})",
            r.entropy,
            100.0 * (r.entropy - exact).abs() / exact,
            r.entropy_steps
        );
    }
    Ok(())
}
