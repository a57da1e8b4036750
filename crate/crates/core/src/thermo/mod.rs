//! Measure machinery over a uniform partition of the (toral) state box:
//! Ulam transfer matrices, invariant measures, entropy rates, potential
//! integrals, pressure and transfer-operator fixed points.

mod measure;
mod partition;
mod potential;
mod pressure;
mod transfer;
mod ulam;

pub use measure::{entropy_rate, invariant_measure, potential_integral, InvariantMeasure, MeasureVector};
pub use partition::{build_partition, Partition, DEFAULT_CELL_CAP};
pub use potential::{Potential, PotentialSpec};
pub use pressure::{
    entropy_steps, free_energy, free_energy_from, topological_entropy, FreeEnergyReport, ThermoConfig,
};
pub use transfer::{transfer_apply, transfer_fixed_point, TransferFixedPoint};
pub use ulam::{ulam_matrix, ulam_matrix_steps, UlamMatrix};
