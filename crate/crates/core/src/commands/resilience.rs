use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{fmt_list, num, RunDir};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::perturb::{convergence_sweep, SweepReport};

#[derive(Debug, Clone, PartialEq)]
pub struct ResilienceRun {
    pub sweep: SweepReport,
    pub verdict: String,
    pub files: Vec<PathBuf>,
}

/// Resilience of the configured gains under noise, at `perturb.epsilon` or
/// across `perturb.eps_sweep`. Writes `resilience.csv` and
/// `resilience_summary.toml`.
pub fn cmd_resilience(cfg: &ExperimentConfig, out: &Path) -> Result<ResilienceRun> {
    let mut run = RunDir::create(out, "resilience")?;
    let spec = cfg.system_spec()?;
    let gains = cfg.gains(&spec)?;
    let part = cfg.partition(&spec)?;
    let p = cfg.perturb_spec(spec.dim())?;
    let setup = cfg.resilience_setup();
    let eps = cfg.perturb.eps_sweep.clone().unwrap_or_else(|| vec![cfg.perturb.epsilon]);
    let sweep = convergence_sweep(&spec, &gains, &p, &part, &setup, &eps, cfg.perturb.threshold)?;

    let mut w = run.csv("resilience.csv")?;
    w.write_record(["epsilon", "t", "kl", "pinsker_lhs", "slack", "rho_hat"])?;
    for r in &sweep.runs {
        for row in &r.rows {
            w.write_record([
                num(r.epsilon),
                num(row.t),
                num(row.kl),
                num(row.pinsker_lhs),
                num(row.slack),
                num(r.rho_hat),
            ])?;
        }
    }
    w.flush()?;
    drop(w);

    let last = sweep.runs.last().expect("non-empty sweep");
    let verdict = format!(
        "{}: final rho_hat {:.4e} {} threshold {}, {} inversion(s)",
        if sweep.pass { "PASS" } else { "FAIL" },
        last.rho_hat,
        if last.rho_hat < sweep.threshold { "<" } else { ">=" },
        sweep.threshold,
        sweep.inversions.len()
    );
    let mut s = String::new();
    writeln!(s, "verdict = \"{verdict}\"\npass = {}", sweep.pass).ok();
    let eps: Vec<f64> = sweep.runs.iter().map(|r| r.epsilon).collect();
    let rho: Vec<f64> = sweep.runs.iter().map(|r| r.rho_hat).collect();
    let floor: Vec<f64> = sweep.runs.iter().map(|r| r.noise_floor).collect();
    writeln!(s, "epsilon = {}\nrho_hat = {}\nnoise_floor = {}", fmt_list(&eps), fmt_list(&rho), fmt_list(&floor)).ok();
    writeln!(s, "delta = {:?}\nn_paths = {}", last.delta, last.n_paths).ok();
    writeln!(s, "gains_source = \"config gains block\"").ok();
    run.text("resilience_summary.toml", &s)?;
    let files = run.finish(cfg)?;
    Ok(ResilienceRun { sweep, verdict, files })
}
