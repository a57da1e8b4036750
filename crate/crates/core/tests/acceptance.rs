//! Acceptance checks with independent oracles. Prints one PASS/FAIL line per
//! criterion and exits nonzero if any fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{dmatrix, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermogame::commands::{cmd_equilibrium, cmd_resilience, cmd_simulate, cmd_thermo};
use thermogame::config::ExperimentConfig;
use thermogame::game::{
    brute_force_equilibria, verify_equilibrium, BrOutcome, FreeEnergyObjective, GameContext, DEFAULT_PROFILE_CAP,
};
use thermogame::perturb::{euler_maruyama, pinsker_check, PerturbSpec};
use thermogame::sysflow::{
    closed_loop_matrix, flow_map, transition_factors, transition_matrix, Domain, FlowMap, GainSet, SystemSpec,
};
use thermogame::thermo::{
    build_partition, free_energy, invariant_measure, topological_entropy, transfer_fixed_point, ulam_matrix,
    MeasureVector, Potential, ThermoConfig,
};
use thermogame::Result;

const LOG2: f64 = std::f64::consts::LN_2;

fn cat_entropy() -> f64 {
    ((3.0 + 5f64.sqrt()) / 2.0).ln()
}

fn config(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    let mut cfg = ExperimentConfig::load(&path).expect("bundled config loads");
    cfg.resolve(None);
    cfg
}

fn config_map(cfg: &ExperimentConfig) -> Result<FlowMap> {
    let spec = cfg.system_spec()?;
    let gains = cfg.gains(&spec)?;
    flow_map(&spec, &gains, cfg.thermo.tau, true)
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("thermogame-acceptance-{}", std::process::id())).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn decomposition() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let mut rand_mat = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
        let a = rand_mat(3, 3);
        let b = vec![rand_mat(3, 1), rand_mat(3, 2)];
        let k = vec![rand_mat(1, 3), rand_mat(2, 3)];
        let spec = SystemSpec::time_invariant(a.clone(), b.clone(), Domain::unit(3, false), 1e-3)?;
        let mut gains = GainSet::new(k.clone(), 1.0)?;
        // shrink the drift until the closed loop has norm at most 2
        let acl = closed_loop_matrix(&spec, &gains, 0.0)?.norm();
        let spec = if acl > 2.0 {
            let s = 2.0 / acl;
            gains = GainSet::new(k.iter().map(|m| m * s).collect(), 1.0)?;
            SystemSpec::time_invariant(a * s, b, Domain::unit(3, false), 1e-3)?
        } else {
            spec
        };
        assert!(closed_loop_matrix(&spec, &gains, 0.0)?.norm() <= 2.0 + 1e-12);
        let phi = transition_matrix(&spec, &gains, 1.0)?;
        for j in 0..2 {
            let f = transition_factors(&spec, &gains, j, 1.0)?;
            worst = worst.max((&f.phi_without * &f.phi_channel - &phi).norm());
        }
    }
    outcome(worst <= 1e-6, format!("20 specs x 2 channels, max |PhiNoJ PhiJ - Phi|_F = {worst:.2e} (tol 1e-6)"))
}

fn doubling_entropies(use_pressure: bool) -> Result<Vec<(usize, f64)>> {
    let cfg = config("doubling.toml");
    let map = config_map(&cfg)?;
    let tc = cfg.thermo_config();
    [2, 3, 8, 64, 256]
        .into_iter()
        .map(|m| {
            let part = build_partition(map.domain(), m)?;
            let h = if use_pressure {
                topological_entropy(&map, &part, &tc)?
            } else {
                free_energy(&map, &part, &Potential::zero(), &tc)?.entropy
            };
            Ok((m, h))
        })
        .collect()
}

fn cat_value(use_pressure: bool) -> Result<f64> {
    let cfg = config("cat.toml");
    assert_eq!((cfg.thermo.m, cfg.thermo.samples_per_cell), (64, 256));
    let map = config_map(&cfg)?;
    let part = cfg.partition(&cfg.system_spec()?)?;
    let tc = cfg.thermo_config();
    if use_pressure {
        topological_entropy(&map, &part, &tc)
    } else {
        Ok(free_energy(&map, &part, &Potential::zero(), &tc)?.entropy)
    }
}

fn entropy_oracle(use_pressure: bool) -> Result<Outcome> {
    let cat = cat_value(use_pressure)?;
    let cat_err = (cat - cat_entropy()).abs() / cat_entropy();
    let doubling = doubling_entropies(use_pressure)?;
    let dbl_err = doubling.iter().map(|(_, h)| (h - LOG2).abs()).fold(0.0, f64::max);
    let ms: Vec<usize> = doubling.iter().map(|(m, _)| *m).collect();
    outcome(
        cat_err <= 0.15 && dbl_err <= 1e-3,
        format!(
            "cat {cat:.5} vs {:.5} ({:.2}%, tol 15%); doubling m={ms:?} max |h - log 2| = {dbl_err:.1e} (tol 1e-3)",
            cat_entropy(),
            100.0 * cat_err
        ),
    )
}

fn pressure_shift() -> Result<Outcome> {
    let tc = ThermoConfig {
        samples_per_cell: 64,
        ..ThermoConfig::default()
    };
    let circle = |rate: f64| -> Result<FlowMap> {
        let spec = SystemSpec::time_invariant(dmatrix![rate], vec![dmatrix![1.0]], Domain::unit(1, true), 1e-3)?;
        flow_map(&spec, &GainSet::zeros(&spec, 1.0)?, 1.0, true)
    };
    let plane = |a: DMatrix<f64>| -> Result<FlowMap> {
        let spec = SystemSpec::time_invariant(a, vec![DMatrix::identity(2, 2)], Domain::unit(2, true), 1e-3)?;
        flow_map(&spec, &GainSet::zeros(&spec, 1.0)?, 1.0, true)
    };
    let maps: Vec<(&str, FlowMap, usize)> = vec![
        ("doubling", config_map(&config("doubling.toml"))?, 64),
        ("circle rate 1.1", circle(1.1)?, 64),
        ("circle rate -0.5", circle(-0.5)?, 64),
        ("cat", config_map(&config("cat.toml"))?, 24),
        ("planar focus", plane(dmatrix![0.3, 1.0; -1.0, 0.3])?, 24),
    ];
    let mut worst = 0.0f64;
    for (_, map, m) in &maps {
        let part = build_partition(map.domain(), *m)?;
        let phi = Potential::cosine(map.dim());
        let base = free_energy(map, &part, &phi, &tc)?;
        for c in [-1.0, 0.5, 2.0] {
            let r = free_energy(map, &part, &phi.shifted(c), &tc)?;
            worst = worst
                .max((r.p_variational - base.p_variational - c).abs())
                .max((r.p_spectral - base.p_spectral - c).abs());
        }
    }
    outcome(worst <= 1e-10, format!("5 maps x 3 constants, both routes, max shift error {worst:.1e} (tol 1e-10)"))
}

fn equilibrium_oracle() -> Result<Outcome> {
    let cfg = config("game_1d.toml");
    let out = scratch("c5");
    let run = cmd_equilibrium(&cfg, &out)?;
    let spec = cfg.system_spec()?;
    let grid = cfg.strategy_grid(&spec)?;
    let top = grid.channel(0).len() - 1;
    let target = vec![top; grid.channels()];
    let objective = FreeEnergyObjective {
        phi: cfg.potential(&spec)?,
        taus: cfg.game.taus.clone(),
        partition: cfg.partition(&spec)?,
        thermo: cfg.thermo_config(),
        spec,
    };
    let ctx = GameContext::new(&objective);
    let all = brute_force_equilibria(&ctx, &grid, cfg.game.eps_eq, DEFAULT_PROFILE_CAP)?;
    let cert = verify_equilibrium(&ctx, &grid, &target, cfg.game.eps_eq)?;
    let profile = match &run.outcome {
        BrOutcome::Converged { certificate, .. } => Some(certificate.profile.clone()),
        _ => None,
    };
    let pass = grid.profile_count() == Some(25)
        && profile.as_ref() == Some(&target)
        && all == vec![target.clone()]
        && cert.max_delta() <= 1e-9;
    outcome(
        pass,
        format!(
            "5x5 grid: best response {profile:?}, brute force {all:?}, expected {target:?}, max delta {:.1e} (tol 1e-9)",
            cert.max_delta()
        ),
    )
}

fn transfer_fixed_points() -> Result<Outcome> {
    let mut detail = Vec::new();
    let mut pass = true;
    for name in ["doubling.toml", "cat.toml"] {
        let cfg = config(name);
        let map = config_map(&cfg)?;
        let part = cfg.partition(&cfg.system_spec()?)?;
        let tc = cfg.thermo_config();
        let u = ulam_matrix(&map, &part, tc.samples_per_cell, tc.seed)?;
        let inv = invariant_measure(&u, tc.tol, tc.max_iter)?;
        let fp = transfer_fixed_point(&u, tc.tol, tc.max_iter, None)?;
        let d = fp.density.l1_distance(&inv.measure);
        pass &= d <= 10.0 * tc.tol;
        detail.push(format!("{} L1 {d:.1e}", name.trim_end_matches(".toml")));
    }

    // two cells, weighted: leading left eigenvector of L = P diag(w) in closed form
    let spec = SystemSpec::time_invariant(dmatrix![1.1], vec![dmatrix![1.0]], Domain::unit(1, true), 1e-3)?;
    let map = flow_map(&spec, &GainSet::zeros(&spec, 1.0)?, 1.0, true)?;
    let part = build_partition(map.domain(), 2)?;
    let phi = Potential::linear(vec![0.8], part.domain())?;
    let w = ulam_matrix(&map, &part, 4096, 9)?.weighted(&phi, &part)?;
    let wts = w.weights().expect("weighted");
    let l = |i: usize, j: usize| w.get(i, j) * wts[j];
    let (tr, det) = (l(0, 0) + l(1, 1), l(0, 0) * l(1, 1) - l(0, 1) * l(1, 0));
    let lambda = 0.5 * (tr + (tr * tr - 4.0 * det).sqrt());
    let v = [l(1, 0), lambda - l(0, 0)];
    let oracle = MeasureVector::from_weights(v.to_vec())?;
    let fp = transfer_fixed_point(&w, 1e-15, 1_000_000, None)?;
    let d = fp.density.l1_distance(&oracle);
    let g = (fp.log_growth - lambda.ln()).abs();
    pass &= d <= 1e-8;
    detail.push(format!("m=2 weighted L1 {d:.1e} (log growth error {g:.1e})"));
    outcome(pass, format!("{} (tol 10*tol, 1e-8)", detail.join(", ")))
}

fn pinsker() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        let n = rng.random_range(2..40);
        let mut draw = || MeasureVector::from_weights((0..n).map(|_| rng.random::<f64>()).collect());
        let (p, q) = (draw()?, draw()?);
        worst = worst.min(pinsker_check(&p, &q, 1e-9)?.slack);
    }
    let mut rows = 0;
    let mut cfg = config("contracting_2d.toml");
    cfg.perturb.n_paths = 20_000;
    let run = cmd_resilience(&cfg, &scratch("c7"))?;
    for r in run.sweep.runs.iter().flat_map(|r| &r.rows) {
        worst = worst.min(r.slack);
        rows += 1;
    }
    outcome(worst >= -1e-12, format!("1000 random pairs + {rows} resilience rows, min slack {worst:.3e} (tol -1e-12)"))
}

fn sde_oracle() -> Result<Outcome> {
    let spec = SystemSpec::time_invariant(
        dmatrix![-1.0],
        vec![dmatrix![1.0]],
        Domain::new(vec![-10.0], vec![10.0], false)?,
        1e-3,
    )?;
    let gains = GainSet::zeros(&spec, 1.0)?;
    let n = 100_000;
    let mut pass = true;
    let mut detail = Vec::new();
    for eps in [0.1, 1.0] {
        let p = PerturbSpec {
            epsilon: eps,
            sigma: dmatrix![1.0],
            dt_sde: 1e-2,
            n_paths: n,
            horizon: 10.0,
            seed: 303,
        };
        let end = euler_maruyama(&spec, &gains, &p, &vec![0.0; n], &[10.0])?;
        let xs = &end.states[0];
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let rel = (var - eps / 2.0).abs() / (eps / 2.0);
        pass &= rel <= 0.10;
        detail.push(format!("eps {eps}: var {var:.5} vs {:.3} ({:.2}%)", eps / 2.0, 100.0 * rel));
    }
    outcome(pass, format!("{} (tol 10%)", detail.join(", ")))
}

fn convergence() -> Result<Outcome> {
    let cfg = config("contracting_2d.toml");
    assert_eq!(cfg.perturb.n_paths, 100_000);
    let run = cmd_resilience(&cfg, &scratch("c9"))?;
    let s = &run.sweep;
    let rho: Vec<String> = s.runs.iter().map(|r| format!("{:.4}", r.rho_hat)).collect();
    let floor: Vec<String> = s.runs.iter().map(|r| format!("{:.1e}", r.noise_floor)).collect();
    outcome(
        s.pass,
        format!(
            "eps {:?}: rho_hat [{}], noise floor [{}], inversions {:?}, final < {}",
            s.runs.iter().map(|r| r.epsilon).collect::<Vec<_>>(),
            rho.join(", "),
            floor.join(", "),
            s.inversions,
            s.threshold
        ),
    )
}

type Command = fn(&ExperimentConfig, &Path) -> Result<()>;
type Check = fn() -> Result<Outcome>;

fn reproducibility() -> Result<Outcome> {
    let simulate: Command = |c, o| cmd_simulate(c, o).map(drop);
    let thermo: Command = |c, o| cmd_thermo(c, o).map(drop);
    let equilibrium: Command = |c, o| cmd_equilibrium(c, o).map(drop);
    let resilience: Command = |c, o| cmd_resilience(c, o).map(drop);
    let plan: [(&str, &str, Command); 10] = [
        ("doubling.toml", "simulate", simulate),
        ("doubling.toml", "thermo", thermo),
        ("cat.toml", "thermo", thermo),
        ("game_1d.toml", "equilibrium", equilibrium),
        ("game_1d.toml", "thermo", thermo),
        ("contracting_2d.toml", "resilience", resilience),
        ("contracting_2d.toml", "thermo", thermo),
        ("spiral.toml", "simulate", simulate),
        ("zero_drift.toml", "simulate", simulate),
        ("zero_drift.toml", "thermo", thermo),
    ];
    let mut files = 0;
    let mut mismatched = Vec::new();
    for (name, label, cmd) in plan {
        let cfg = config(name);
        let dirs = [scratch(&format!("c10/{name}/{label}/a")), scratch(&format!("c10/{name}/{label}/b"))];
        for d in &dirs {
            cmd(&cfg, d)?;
        }
        let read = |d: &Path| -> Vec<(String, Vec<u8>)> {
            let mut v: Vec<_> = std::fs::read_dir(d)
                .expect("run directory exists")
                .map(|e| e.expect("entry").path())
                .filter(|p| p.extension().is_some_and(|e| e == "csv"))
                .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).expect("csv")))
                .collect();
            v.sort();
            v
        };
        let (a, b) = (read(&dirs[0]), read(&dirs[1]));
        files += a.len();
        if a.is_empty() || a != b {
            mismatched.push(format!("{name}/{label}"));
        }
    }
    outcome(
        mismatched.is_empty(),
        format!("6 configs, 10 runs, {files} CSV files compared byte for byte; mismatches {mismatched:?}"),
    )
}

fn main() -> ExitCode {
    let checks: [(&str, Check, Option<u64>); 10] = [
        ("decomposition identity", decomposition, Some(10)),
        ("entropy oracle", || entropy_oracle(false), Some(60)),
        ("pressure shift", pressure_shift, Some(60)),
        ("topological entropy", || entropy_oracle(true), None),
        ("equilibrium oracle", equilibrium_oracle, Some(120)),
        ("transfer fixed point", transfer_fixed_points, None),
        ("pinsker bound", pinsker, Some(5)),
        ("sde variance oracle", sde_oracle, Some(60)),
        ("convergence sweep", convergence, Some(300)),
        ("reproducibility", reproducibility, None),
    ];
    let mut failed = 0;
    for (i, (name, check, limit)) in checks.into_iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|s| elapsed <= Duration::from_secs(s));
        let budget = limit.map(|s| format!(" / {s} s")).unwrap_or_default();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && in_time, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {detail} [{:.2} s{budget}]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64()
        );
    }
    let _ = std::fs::remove_dir_all(std::env::temp_dir().join(format!("thermogame-acceptance-{}", std::process::id())));
    println!("{} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
