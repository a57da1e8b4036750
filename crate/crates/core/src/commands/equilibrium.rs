use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{fmt_list, num, RunDir};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::game::{
    br_iteration, brute_force_equilibria, BrOutcome, FreeEnergyObjective, GameContext, Profile, StrategyGrid,
};

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumRun {
    pub outcome: BrOutcome,
    /// Brute-force equilibria, when the oracle ran.
    pub oracle: Option<Vec<Profile>>,
    /// Disagreements between best response and the oracle; empty when they
    /// agree.
    pub oracle_diff: Vec<String>,
    pub files: Vec<PathBuf>,
}

/// Profile whose gains are closest to zero, lowest index first.
fn origin_profile(grid: &StrategyGrid) -> Profile {
    (0..grid.channels())
        .map(|j| {
            let c = grid.channel(j);
            (0..c.len())
                .min_by(|a, b| c[*a].norm().total_cmp(&c[*b].norm()))
                .expect("grid channels are non-empty")
        })
        .collect()
}

fn rank(grid: &StrategyGrid, p: &[usize]) -> usize {
    p.iter()
        .enumerate()
        .fold(0, |acc, (j, k)| acc * grid.channel(j).len() + k)
}

/// Best-response search for equilibrium gains on the configured grid.
/// Writes `certificate.toml` and `profiles.csv` (every evaluated profile).
pub fn cmd_equilibrium(cfg: &ExperimentConfig, out: &Path) -> Result<EquilibriumRun> {
    let mut run = RunDir::create(out, "equilibrium")?;
    let spec = cfg.system_spec()?;
    let grid = cfg.strategy_grid(&spec)?;
    let objective = FreeEnergyObjective {
        phi: cfg.potential(&spec)?,
        taus: cfg.game.taus.clone(),
        partition: cfg.partition(&spec)?,
        thermo: cfg.thermo_config(),
        spec,
    };
    let ctx = GameContext::new(&objective);
    let initial = match &cfg.game.initial {
        Some(p) => p.clone(),
        None => origin_profile(&grid),
    };
    if initial.len() != grid.channels() || initial.iter().enumerate().any(|(j, k)| *k >= grid.channel(j).len()) {
        return Err(Error::config("game.initial", "not a profile of the strategy grid"));
    }
    let eps = cfg.game.eps_eq;
    let outcome = br_iteration(&ctx, &grid, &initial, cfg.game.max_rounds, eps)?;

    let (oracle, oracle_diff) = if cfg.game.oracle {
        let all = brute_force_equilibria(&ctx, &grid, eps, cfg.game.profile_cap)?;
        let mut diff = Vec::new();
        match &outcome {
            BrOutcome::Converged { certificate, .. } => {
                if !all.contains(&certificate.profile) {
                    diff.push(format!("best response profile {:?} is not a brute-force equilibrium", certificate.profile));
                }
            }
            _ => {
                for p in &all {
                    diff.push(format!("brute-force equilibrium {p:?} not reached by best response"));
                }
            }
        }
        (Some(all), diff)
    } else {
        (None, Vec::new())
    };

    let mut s = String::new();
    match &outcome {
        BrOutcome::Converged { certificate: c, rounds } => {
            writeln!(s, "outcome = \"converged\"\nrounds = {rounds}").ok();
            writeln!(s, "valid = {}", c.valid).ok();
            writeln!(s, "profile = {:?}", c.profile).ok();
            let gains: Vec<String> = c.gains.gains().iter().map(|k| fmt_list(&row_major(k))).collect();
            writeln!(s, "gains = [{}]", gains.join(", ")).ok();
            writeln!(s, "deltas = {}", fmt_list(&c.deltas)).ok();
            writeln!(s, "max_delta = {:?}", c.max_delta()).ok();
            writeln!(s, "eps_eq = {:?}\nthreshold = {:?}", c.eps_eq, c.threshold).ok();
            writeln!(s, "taus = {}", fmt_list(&c.taus)).ok();
            writeln!(s, "objective = {:?}", c.value).ok();
            writeln!(s, "objective_per_tau = {}", fmt_list(&c.per_tau)).ok();
            let spread: Vec<String> = c
                .density_spread
                .iter()
                .map(|(a, b, d)| format!("[{:?}, {:?}, {d:?}]", c.taus[*a], c.taus[*b]))
                .collect();
            writeln!(s, "density_spread = [{}]", spread.join(", ")).ok();
            writeln!(s, "failed_deviations = {}", c.failed_deviations).ok();
        }
        BrOutcome::Cycle { cycle, rounds } => {
            writeln!(s, "outcome = \"cycle\"\nrounds = {rounds}\ncycle = {cycle:?}").ok();
        }
        BrOutcome::RoundLimit { last, rounds } => {
            writeln!(s, "outcome = \"round_limit\"\nrounds = {rounds}\nlast = {last:?}").ok();
        }
    }
    if let Some(all) = &oracle {
        writeln!(s, "\n[oracle]\nequilibria = {all:?}").ok();
        let quoted: Vec<String> = oracle_diff.iter().map(|d| format!("\"{d}\"")).collect();
        writeln!(s, "diff = [{}]", quoted.join(", ")).ok();
    }
    run.text("certificate.toml", &s)?;

    let mut w = run.csv("profiles.csv")?;
    let sample = grid.gains(&initial).flattened().len();
    let taus = &cfg.game.taus;
    let mut header = vec!["profile_id".to_string()];
    header.extend((0..sample).map(|i| format!("k{i}")));
    header.extend(taus.iter().map(|t| format!("p_tau_{t}")));
    header.push("objective".into());
    header.extend((0..grid.channels()).map(|j| format!("delta_{j}")));
    w.write_record(&header)?;
    for p in ctx.visited() {
        let gains = grid.gains(&p);
        let mut row = vec![rank(&grid, &p).to_string()];
        row.extend(gains.flattened().iter().map(|v| num(*v)));
        match ctx.cached(0, &gains) {
            Some(v) => {
                row.extend(v.per_tau.iter().map(|x| num(*x)));
                row.push(num(v.value));
            }
            None => row.extend(std::iter::repeat_n(String::new(), taus.len() + 1)),
        }
        for j in 0..grid.channels() {
            row.push(cached_delta(&ctx, &grid, &p, j).map(num).unwrap_or_default());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    drop(w);
    let files = run.finish(cfg)?;
    Ok(EquilibriumRun {
        outcome,
        oracle,
        oracle_diff,
        files,
    })
}

fn row_major(k: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    k.transpose().as_slice().to_vec()
}

/// `Δ_j` at `p` from cached values only; `None` unless every deviation of
/// channel `j` was evaluated.
fn cached_delta(ctx: &GameContext, grid: &StrategyGrid, p: &[usize], j: usize) -> Option<f64> {
    let base = ctx.cached(j, &grid.gains(p))?.value;
    let mut best = base;
    for k in 0..grid.channel(j).len() {
        let mut q = p.to_vec();
        q[j] = k;
        best = best.max(ctx.cached(j, &grid.gains(&q))?.value);
    }
    Some(best - base)
}
