use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{num, RunDir};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::sysflow::flow_map;
use crate::thermo::{free_energy, ulam_matrix, FreeEnergyReport};

#[derive(Debug, Clone, PartialEq)]
pub struct ThermoRun {
    pub report: FreeEnergyReport,
    pub files: Vec<PathBuf>,
}

/// Free energy of the wrapped time-`thermo.tau` map. Writes
/// `thermo_report.toml` and `invariant_measure.csv`, plus
/// `ulam_matrix.txt` when requested.
pub fn cmd_thermo(cfg: &ExperimentConfig, out: &Path) -> Result<ThermoRun> {
    let mut run = RunDir::create(out, "thermo")?;
    let spec = cfg.system_spec()?;
    let gains = cfg.gains(&spec)?;
    let part = cfg.partition(&spec)?;
    let phi = cfg.potential(&spec)?;
    let tc = cfg.thermo_config();
    let map = flow_map(&spec, &gains, cfg.thermo.tau, true)?;
    let report = free_energy(&map, &part, &phi, &tc)?;

    let mut s = String::new();
    writeln!(s, "entropy = {:?}", report.entropy).ok();
    writeln!(s, "phi_integral = {:?}", report.phi_integral).ok();
    writeln!(s, "p_variational = {:?}", report.p_variational).ok();
    writeln!(s, "p_spectral = {:?}", report.p_spectral).ok();
    writeln!(s, "log_growth = {:?}", report.log_growth).ok();
    writeln!(s, "entropy_steps = {}", report.entropy_steps).ok();
    writeln!(s, "non_unique = {}", report.non_unique).ok();
    writeln!(s, "cells = {}", part.len()).ok();
    writeln!(s, "tau = {:?}", cfg.thermo.tau).ok();
    writeln!(s, "entropy_method = \"{}\"", report.entropy_method).ok();
    writeln!(s, "spectral_method = \"{}\"", report.spectral_method).ok();
    run.text("thermo_report.toml", &s)?;

    let mut w = run.csv("invariant_measure.csv")?;
    let mut header = vec!["cell".to_string()];
    header.extend((0..part.dim()).map(|a| format!("c{a}")));
    header.extend(["mass".to_string(), "equilibrium_density".to_string()]);
    w.write_record(&header)?;
    for (i, center) in part.centers().iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(center.iter().map(|c| num(*c)));
        row.push(num(report.measure.as_slice()[i]));
        row.push(num(report.equilibrium_density.as_slice()[i]));
        w.write_record(&row)?;
    }
    w.flush()?;
    drop(w);

    if cfg.output.ulam_triplets {
        let u = ulam_matrix(&map, &part, tc.samples_per_cell, tc.seed)?;
        let f = run.file("ulam_matrix.txt")?;
        u.write_triplets(std::io::BufWriter::new(f))?;
    }
    let files = run.finish(cfg)?;
    Ok(ThermoRun { report, files })
}
