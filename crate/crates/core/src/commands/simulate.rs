use std::path::{Path, PathBuf};

use nalgebra::DVector;

use super::{num, RunDir};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::sysflow::{transition_factor_path, transition_matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateRun {
    pub times: Vec<f64>,
    /// `states[i][k]` is trajectory `i` at `times[k]`.
    pub states: Vec<Vec<Vec<f64>>>,
    /// `decomposition_error[j][k] = ‖Φ_¬j Φ_j − Φ‖_F` at `times[k]`.
    pub decomposition_error: Vec<Vec<f64>>,
    pub files: Vec<PathBuf>,
}

/// Trajectories of the closed loop from each configured initial state,
/// written to `trajectory.csv` with one factorization-error column per
/// channel.
pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<SimulateRun> {
    let mut run = RunDir::create(out, "simulate")?;
    let spec = cfg.system_spec()?;
    if spec.direct_map().is_some() {
        return Err(Error::config("system.direct_map", "simulate needs a continuous-time system"));
    }
    let gains = cfg.gains(&spec)?;
    let sim = &cfg.simulate;
    let count = (sim.horizon / sim.sample_every + 1e-9).floor() as usize;
    let times: Vec<f64> = (0..=count).map(|k| k as f64 * sim.sample_every).collect();

    let phis = times
        .iter()
        .map(|t| transition_matrix(&spec, &gains, *t))
        .collect::<Result<Vec<_>>>()?;
    let mut decomposition_error: Vec<Vec<f64>> = Vec::with_capacity(spec.channels());
    for j in 0..spec.channels() {
        let path = transition_factor_path(&spec, &gains, j, &times)?;
        decomposition_error.push(path.iter().zip(&phis).map(|(f, phi)| (&f.product - phi).norm()).collect());
    }
    let states: Vec<Vec<Vec<f64>>> = sim
        .x0
        .iter()
        .map(|x0| {
            let x0 = DVector::from_column_slice(x0);
            phis.iter().map(|phi| (phi * &x0).iter().copied().collect()).collect()
        })
        .collect();

    let mut w = run.csv("trajectory.csv")?;
    let mut header = vec!["x0_id".to_string(), "t".to_string()];
    header.extend((0..spec.dim()).map(|a| format!("x{a}")));
    header.push("norm".into());
    header.extend((0..spec.channels()).map(|j| format!("decomp_err_{j}")));
    w.write_record(&header)?;
    for (i, traj) in states.iter().enumerate() {
        for (k, x) in traj.iter().enumerate() {
            let mut row = vec![i.to_string(), num(times[k])];
            row.extend(x.iter().map(|v| num(*v)));
            row.push(num(x.iter().map(|v| v * v).sum::<f64>().sqrt()));
            row.extend(decomposition_error.iter().map(|e| num(e[k])));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    drop(w);
    let files = run.finish(cfg)?;
    Ok(SimulateRun {
        times,
        states,
        decomposition_error,
        files,
    })
}
