//! Pressure of a circle map with a cosine potential by the variational and
//! spectral routes, and the exact shift under φ + c.

use nalgebra::dmatrix;
use thermogame::sysflow::{flow_map, Domain, GainSet, SystemSpec};
use thermogame::thermo::{build_partition, free_energy, Potential, ThermoConfig};

fn main() -> thermogame::Result<()> {
    let spec = SystemSpec::time_invariant(dmatrix![1.1], vec![dmatrix![1.0]], Domain::unit(1, true), 1e-3)?;
    let gains = GainSet::zeros(&spec, 1.0)?;
    let map = flow_map(&spec, &gains, 1.0, true)?;
    let part = build_partition(map.domain(), 64)?;
    let cfg = ThermoConfig::default();

    let phi = Potential::cosine(1);
    let base = free_energy(&map, &part, &phi, &cfg)?;
    println!(
        "entropy {:.6}  P_var {:.6}  P_spec {:.6}",
        base.entropy, base.p_variational, base.p_spectral
    );
    for c in [-1.0, 0.5, 2.0] {
        let r = free_energy(&map, &part, &phi.shifted(c), &cfg)?;
        println!(
            "c = {c:>4}: P_var shift {:+.12}  P_spec shift {:+.12}",
            r.p_variational - base.p_variational,
            r.p_spectral - base.p_spectral
        );
    }
    let top = free_energy(&map, &part, &Potential::zero(), &cfg)?;
    println!("topological entropy {:.6} (expansion rate 1.1)", top.p_spectral);
    Ok(())
}
