//! Equilibrium feedback gains on a finite strategy grid.
//!
//! Channels take turns replacing their gain by a best response. A profile
//! from which no channel gains more than `eps_eq` by a unilateral grid
//! deviation is an equilibrium; [`verify_equilibrium`] certifies it and
//! [`brute_force_equilibria`] enumerates all of them on small grids.

mod grid;
mod objective;

use rayon::prelude::*;

pub use grid::{Profile, StrategyGrid};
pub use objective::{objective, FreeEnergyObjective, GameContext, GameObjective, ObjectiveValue};

use crate::error::{Error, Result};
use crate::sysflow::GainSet;
use crate::thermo::MeasureVector;

pub const DEFAULT_EPS_EQ: f64 = 1e-9;
pub const DEFAULT_PROFILE_CAP: usize = 10_000;
/// Candidates within this (relative) distance of the best are tied.
const TIE_TOL: f64 = 1e-12;

/// Objective given by a plain function, for synthetic games.
pub struct FnObjective<F>(pub F);

impl<F> GameObjective for FnObjective<F>
where
    F: Fn(usize, &GainSet) -> f64 + Sync,
{
    fn evaluate(&self, channel: usize, gains: &GainSet) -> Result<ObjectiveValue> {
        Ok(ObjectiveValue {
            value: (self.0)(channel, gains),
            per_tau: Vec::new(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumCertificate {
    pub gains: GainSet,
    pub profile: Profile,
    /// Largest unilateral improvement per channel (nats), never negative.
    pub deltas: Vec<f64>,
    pub taus: Vec<f64>,
    /// Objective of the certified profile, aggregated and per sampled time.
    pub value: f64,
    pub per_tau: Vec<f64>,
    pub eps_eq: f64,
    /// `eps_eq · max(1, |value|)`.
    pub threshold: f64,
    pub valid: bool,
    /// Equilibrium density per sampled time.
    pub densities: Vec<MeasureVector>,
    /// `(a, b, ‖μ_a − μ_b‖₁)` over pairs of sampled times; a diagnostic for
    /// whether the per-time equilibrium densities share a common limit.
    pub density_spread: Vec<(usize, usize, f64)>,
    /// Deviations that could not be evaluated and were skipped.
    pub failed_deviations: usize,
}

impl EquilibriumCertificate {
    pub fn max_delta(&self) -> f64 {
        self.deltas.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BrOutcome {
    Converged { certificate: Box<EquilibriumCertificate>, rounds: usize },
    /// Round-end profiles repeat; `cycle` lists one period.
    Cycle { cycle: Vec<Profile>, rounds: usize },
    RoundLimit { last: Profile, rounds: usize },
}

impl BrOutcome {
    pub fn certificate(&self) -> Option<&EquilibriumCertificate> {
        match self {
            BrOutcome::Converged { certificate, .. } => Some(certificate),
            _ => None,
        }
    }
}

fn threshold(eps_eq: f64, value: f64) -> f64 {
    eps_eq * value.abs().max(1.0)
}

/// Grid index of channel `j`'s best response to `profile`. Candidates are
/// evaluated in parallel; ties go to the smallest index, which is the
/// lexicographically smallest matrix.
pub fn best_response(ctx: &GameContext, grid: &StrategyGrid, j: usize, profile: &[usize]) -> Result<usize> {
    if j >= grid.channels() || profile.len() != grid.channels() {
        return Err(Error::Game(format!("channel {j} or profile length {} invalid", profile.len())));
    }
    let values: Vec<Option<f64>> = (0..grid.channel(j).len())
        .into_par_iter()
        .map(|k| {
            let mut p = profile.to_vec();
            p[j] = k;
            ctx.profile_value(grid, j, &p).ok().map(|v| v.value)
        })
        .collect();
    let best = values
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return Err(Error::Game(format!("every candidate of channel {j} failed to evaluate")));
    }
    let tol = TIE_TOL * best.abs().max(1.0);
    Ok(values
        .iter()
        .position(|v| v.is_some_and(|v| v >= best - tol))
        .expect("best is attained"))
}

/// Gauss–Seidel best-response iteration over channels `0..N`.
pub fn br_iteration(
    ctx: &GameContext,
    grid: &StrategyGrid,
    initial: &[usize],
    max_rounds: usize,
    eps_eq: f64,
) -> Result<BrOutcome> {
    let order: Vec<usize> = (0..grid.channels()).collect();
    br_iteration_ordered(ctx, grid, initial, max_rounds, eps_eq, &order)
}

/// Best-response iteration visiting channels in `order` each round.
pub fn br_iteration_ordered(
    ctx: &GameContext,
    grid: &StrategyGrid,
    initial: &[usize],
    max_rounds: usize,
    eps_eq: f64,
    order: &[usize],
) -> Result<BrOutcome> {
    if max_rounds == 0 {
        return Err(Error::Precondition("max_rounds must be at least 1".into()));
    }
    check_profile(grid, initial)?;
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if sorted != (0..grid.channels()).collect::<Vec<_>>() {
        return Err(Error::Game("channel order must be a permutation of all channels".into()));
    }

    let mut profile = initial.to_vec();
    let mut history = vec![profile.clone()];
    for round in 1..=max_rounds {
        let mut changed = false;
        for &j in order {
            let k = best_response(ctx, grid, j, &profile)?;
            if k != profile[j] {
                profile[j] = k;
                changed = true;
            }
        }
        if !changed {
            let certificate = verify_equilibrium(ctx, grid, &profile, eps_eq)?;
            return Ok(BrOutcome::Converged {
                certificate: Box::new(certificate),
                rounds: round,
            });
        }
        if let Some(start) = history.iter().position(|p| *p == profile) {
            return Ok(BrOutcome::Cycle {
                cycle: history[start..].to_vec(),
                rounds: round,
            });
        }
        history.push(profile.clone());
    }
    Ok(BrOutcome::RoundLimit {
        last: profile,
        rounds: max_rounds,
    })
}

fn check_profile(grid: &StrategyGrid, profile: &[usize]) -> Result<()> {
    if profile.len() != grid.channels() {
        return Err(Error::Game(format!(
            "profile has {} entries for {} channels",
            profile.len(),
            grid.channels()
        )));
    }
    for (j, k) in profile.iter().enumerate() {
        if *k >= grid.channel(j).len() {
            return Err(Error::Game(format!("channel {j} has no candidate {k}")));
        }
    }
    Ok(())
}

/// Largest unilateral improvement per channel, and the number of skipped
/// deviations. The current gain counts as a deviation, so `Δ_j ≥ 0`.
fn deltas(ctx: &GameContext, grid: &StrategyGrid, profile: &[usize]) -> Result<(Vec<f64>, usize)> {
    let mut out = Vec::with_capacity(grid.channels());
    let mut failed = 0;
    for j in 0..grid.channels() {
        let base = ctx.profile_value(grid, j, profile)?.value;
        let devs: Vec<Option<f64>> = (0..grid.channel(j).len())
            .into_par_iter()
            .map(|k| {
                let mut p = profile.to_vec();
                p[j] = k;
                ctx.profile_value(grid, j, &p).ok().map(|v| v.value)
            })
            .collect();
        failed += devs.iter().filter(|v| v.is_none()).count();
        let best = devs.iter().flatten().copied().fold(base, f64::max);
        out.push(best - base);
    }
    Ok((out, failed))
}

/// Checks the equilibrium inequality at `profile` against every grid
/// deviation and assembles the certificate.
pub fn verify_equilibrium(
    ctx: &GameContext,
    grid: &StrategyGrid,
    profile: &[usize],
    eps_eq: f64,
) -> Result<EquilibriumCertificate> {
    check_profile(grid, profile)?;
    let gains = grid.gains(profile);
    let (deltas, failed_deviations) = deltas(ctx, grid, profile)?;
    let base = ctx.profile_value(grid, 0, profile)?;
    let threshold = threshold(eps_eq, base.value);
    let valid = deltas.iter().all(|d| *d <= threshold);
    let densities = ctx.objective().equilibrium_densities(&gains)?;
    let mut density_spread = Vec::new();
    for a in 0..densities.len() {
        for b in a + 1..densities.len() {
            density_spread.push((a, b, densities[a].l1_distance(&densities[b])));
        }
    }
    Ok(EquilibriumCertificate {
        gains,
        profile: profile.to_vec(),
        deltas,
        taus: ctx.objective().sample_times(),
        value: base.value,
        per_tau: base.per_tau,
        eps_eq,
        threshold,
        valid,
        densities,
        density_spread,
        failed_deviations,
    })
}

/// Every grid profile satisfying the equilibrium inequality, in
/// lexicographic order.
pub fn brute_force_equilibria(ctx: &GameContext, grid: &StrategyGrid, eps_eq: f64, cap: usize) -> Result<Vec<Profile>> {
    let total = grid
        .profile_count()
        .filter(|n| *n <= cap)
        .ok_or_else(|| Error::Resource(format!("strategy grid has more than {cap} profiles")))?;
    let profiles: Vec<Profile> = grid.profiles().collect();
    debug_assert_eq!(profiles.len(), total);
    // fill the cache in parallel; failures surface in the sequential pass
    profiles.par_iter().for_each(|p| {
        for j in 0..grid.channels() {
            let _ = ctx.profile_value(grid, j, p);
        }
    });
    let mut out = Vec::new();
    for p in profiles {
        let base = match ctx.profile_value(grid, 0, &p) {
            Ok(v) => v.value,
            Err(_) => continue,
        };
        let (d, _) = deltas(ctx, grid, &p)?;
        if d.iter().all(|d| *d <= threshold(eps_eq, base)) {
            out.push(p);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysflow::{Domain, SystemSpec};
    use crate::thermo::{build_partition, Potential, ThermoConfig};
    use nalgebra::{dmatrix, DMatrix};

    fn scalar_grid(values: &[f64], channels: usize) -> StrategyGrid {
        let c: Vec<DMatrix<f64>> = values.iter().map(|v| dmatrix![*v]).collect();
        StrategyGrid::from_candidates(vec![c; channels], 1.0).unwrap()
    }

    fn k(g: &GainSet, j: usize) -> f64 {
        g.gain(j)[(0, 0)]
    }

    #[test]
    fn singleton_grid_is_trivially_certified() {
        let obj = FnObjective(|_, g: &GainSet| k(g, 0));
        let ctx = GameContext::new(&obj);
        let grid = scalar_grid(&[0.5], 2);
        assert_eq!(best_response(&ctx, &grid, 0, &[0, 0]).unwrap(), 0);
        let cert = verify_equilibrium(&ctx, &grid, &[0, 0], DEFAULT_EPS_EQ).unwrap();
        assert!(cert.valid);
        assert_eq!(cert.deltas, vec![0.0, 0.0]);
    }

    #[test]
    fn ties_go_to_smallest_candidate() {
        let obj = FnObjective(|_, g: &GainSet| if k(g, 0) > 0.0 { 1.0 } else { 1.0 - 1e-13 });
        let ctx = GameContext::new(&obj);
        let grid = scalar_grid(&[-1.0, 0.5, 1.0], 1);
        assert_eq!(best_response(&ctx, &grid, 0, &[2]).unwrap(), 0);
    }

    #[test]
    fn single_player_converges_in_one_round() {
        let obj = FnObjective(|_, g: &GainSet| -(k(g, 0) - 0.5).powi(2));
        let ctx = GameContext::new(&obj);
        let grid = scalar_grid(&[-1.0, -0.5, 0.0, 0.5, 1.0], 1);
        match br_iteration(&ctx, &grid, &[0], 10, DEFAULT_EPS_EQ).unwrap() {
            BrOutcome::Converged { certificate, rounds } => {
                assert_eq!(certificate.profile, vec![3]);
                assert!(rounds <= 2);
                assert!(certificate.valid);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn matching_pennies_cycles_and_has_no_pure_equilibrium() {
        // channel 0 wants to match, channel 1 to mismatch
        let obj = FnObjective(|j, g: &GainSet| {
            let m = k(g, 0) * k(g, 1);
            if j == 0 {
                m
            } else {
                -m
            }
        });
        let ctx = GameContext::new(&obj);
        let grid = scalar_grid(&[-1.0, 1.0], 2);
        match br_iteration(&ctx, &grid, &[0, 0], 20, DEFAULT_EPS_EQ).unwrap() {
            BrOutcome::Cycle { cycle, .. } => assert_eq!(cycle, vec![vec![0, 1], vec![1, 0]]),
            other => panic!("{other:?}"),
        }
        assert!(brute_force_equilibria(&ctx, &grid, DEFAULT_EPS_EQ, DEFAULT_PROFILE_CAP)
            .unwrap()
            .is_empty());
        assert!(!verify_equilibrium(&ctx, &grid, &[0, 1], DEFAULT_EPS_EQ).unwrap().valid);
    }

    #[test]
    fn profile_cap_enforced() {
        let obj = FnObjective(|_, _: &GainSet| 0.0);
        let ctx = GameContext::new(&obj);
        let grid = scalar_grid(&[-1.0, 0.0, 1.0], 3);
        assert!(matches!(brute_force_equilibria(&ctx, &grid, 1e-9, 26), Err(Error::Resource(_))));
        assert_eq!(brute_force_equilibria(&ctx, &grid, 1e-9, 27).unwrap().len(), 27);
    }

    #[test]
    fn failing_candidates_are_skipped_unless_all_fail() {
        struct Picky;
        impl GameObjective for Picky {
            fn evaluate(&self, _: usize, g: &GainSet) -> Result<ObjectiveValue> {
                if g.gain(0)[(0, 0)] > 0.0 {
                    Err(Error::Game("nope".into()))
                } else {
                    Ok(ObjectiveValue { value: g.gain(0)[(0, 0)], per_tau: vec![] })
                }
            }
        }
        let ctx = GameContext::new(&Picky);
        assert_eq!(best_response(&ctx, &scalar_grid(&[-1.0, 0.0, 1.0], 1), 0, &[0]).unwrap(), 1);
        assert!(best_response(&ctx, &scalar_grid(&[0.5, 1.0], 1), 0, &[0]).is_err());
    }

    fn scalar_game() -> FreeEnergyObjective {
        let spec = SystemSpec::time_invariant(
            dmatrix![0.2],
            vec![dmatrix![1.0], dmatrix![1.0]],
            Domain::unit(1, true),
            1e-3,
        )
        .unwrap();
        let partition = build_partition(spec.domain(), 32).unwrap();
        FreeEnergyObjective {
            spec,
            phi: Potential::zero(),
            taus: vec![0.5, 1.0, 2.0],
            partition,
            thermo: ThermoConfig {
                samples_per_cell: 64,
                ..ThermoConfig::default()
            },
        }
    }

    #[test]
    fn scalar_objective_tracks_expansion_rate() {
        let obj = scalar_game();
        for (k1, k2) in [(1.0, 1.0), (0.5, 0.0), (-1.0, 0.5)] {
            let g = GainSet::new(vec![dmatrix![k1], dmatrix![k2]], 1.0).unwrap();
            let v = obj.evaluate(0, &g).unwrap().value;
            // min over τ of τ·max(0, a + k₁ + k₂)
            let oracle = 0.5 * (0.2 + k1 + k2).max(0.0);
            assert!((v - oracle).abs() < 0.03, "({k1},{k2}): {v} vs {oracle}");
        }
    }

    #[test]
    fn scalar_game_equilibrium_at_upper_corner() {
        let obj = scalar_game();
        let ctx = GameContext::new(&obj);
        let grid = StrategyGrid::uniform(&obj.spec, 1.0, 0.5).unwrap();
        assert_eq!(best_response(&ctx, &grid, 0, &[2, 4]).unwrap(), 4);
        let outcome = br_iteration(&ctx, &grid, &[2, 2], 10, DEFAULT_EPS_EQ).unwrap();
        let cert = outcome.certificate().expect("converges");
        assert_eq!(cert.profile, vec![4, 4]);
        assert!(cert.valid && cert.max_delta() <= 1e-9);
        assert_eq!(cert.densities.len(), 3);
        assert_eq!(cert.density_spread.len(), 3);
        let all = brute_force_equilibria(&ctx, &grid, DEFAULT_EPS_EQ, DEFAULT_PROFILE_CAP).unwrap();
        assert_eq!(all, vec![vec![4, 4]]);
        let origin = verify_equilibrium(&ctx, &grid, &[2, 2], DEFAULT_EPS_EQ).unwrap();
        assert!(!origin.valid && origin.deltas[0] > 0.1);
    }
}
