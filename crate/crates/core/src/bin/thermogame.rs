use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thermogame::commands::{cmd_equilibrium, cmd_resilience, cmd_simulate, cmd_thermo};
use thermogame::config::ExperimentConfig;
use thermogame::thermo::PotentialSpec;
use thermogame::{Error, Result};

#[derive(Parser)]
#[command(version, about = "Free-energy equilibrium gains and stochastic resilience checks")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed; re-derives every substream seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-loop trajectories with transition-factor checks.
    Simulate,
    /// Entropy, free energy and invariant measure of the time-τ map.
    Thermo(ThermoArgs),
    /// Best-response search for equilibrium gains.
    Equilibrium(EquilibriumArgs),
    /// Relative-entropy resilience under noise.
    Resilience(ResilienceArgs),
}

#[derive(Args)]
struct ThermoArgs {
    /// Potential: zero, constant:c, linear:a1,a2,.. or builtin:name.
    #[arg(long)]
    phi: Option<PotentialSpec>,
}

#[derive(Args)]
struct EquilibriumArgs {
    /// Spacing of the gain levels.
    #[arg(long)]
    grid_step: Option<f64>,
    /// Entrywise gain bound.
    #[arg(long)]
    gain_bound: Option<f64>,
    /// Comma-separated map times.
    #[arg(long, value_delimiter = ',')]
    taus: Option<Vec<f64>>,
    /// Potential, as for `thermo`.
    #[arg(long)]
    phi: Option<PotentialSpec>,
    /// Best-response round cap.
    #[arg(long)]
    max_rounds: Option<usize>,
    /// Also enumerate all equilibria and compare.
    #[arg(long)]
    oracle: bool,
}

#[derive(Args)]
struct ResilienceArgs {
    /// Single noise level.
    #[arg(long, conflicts_with = "eps_sweep")]
    epsilon: Option<f64>,
    /// Comma-separated, strictly decreasing noise levels.
    #[arg(long, value_delimiter = ',')]
    eps_sweep: Option<Vec<f64>>,
    /// Diffusion `s·I`.
    #[arg(long)]
    sigma: Option<f64>,
    /// Number of sample paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Simulated time.
    #[arg(long)]
    horizon: Option<f64>,
    /// Euler–Maruyama step.
    #[arg(long)]
    dt_sde: Option<f64>,
    /// Comma-separated observation times.
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::config("--threads", e.to_string()))?;
    }
    let path = cli.config.ok_or_else(|| Error::config("--config", "a configuration file is required"))?;
    let mut cfg = ExperimentConfig::load(&path)?;
    if cli.seed.is_some_and(|s| s > i64::MAX as u64) {
        return Err(Error::config("--seed", "must be below 2^63"));
    }
    match &cli.command {
        Command::Simulate => {}
        Command::Thermo(a) => {
            if let Some(phi) = &a.phi {
                cfg.thermo.phi = phi.clone();
            }
        }
        Command::Equilibrium(a) => {
            if let Some(v) = a.grid_step {
                cfg.game.grid_step = v;
            }
            if let Some(v) = a.gain_bound {
                cfg.gains.bound = v;
            }
            if let Some(v) = &a.taus {
                cfg.game.taus = v.clone();
            }
            if let Some(v) = &a.phi {
                cfg.thermo.phi = v.clone();
            }
            if let Some(v) = a.max_rounds {
                cfg.game.max_rounds = v;
            }
            cfg.game.oracle |= a.oracle;
        }
        Command::Resilience(a) => {
            let p = &mut cfg.perturb;
            if let Some(v) = a.epsilon {
                p.epsilon = v;
                p.eps_sweep = None;
            }
            if let Some(v) = &a.eps_sweep {
                p.eps_sweep = Some(v.clone());
            }
            if let Some(s) = a.sigma {
                let d = cfg.system.d;
                p.sigma = Some((0..d).map(|i| (0..d).map(|k| if i == k { s } else { 0.0 }).collect()).collect());
            }
            if let Some(v) = a.paths {
                p.n_paths = v;
            }
            if let Some(v) = a.horizon {
                p.horizon = Some(v);
            }
            if let Some(v) = a.dt_sde {
                p.dt_sde = v;
            }
            if let Some(v) = &a.times {
                p.times = v.clone();
            }
        }
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.to_string_lossy().into_owned();
    }
    cfg.resolve(cli.seed);
    // overrides go through the same validation as the file
    let cfg = ExperimentConfig::parse(&cfg.to_toml())?;
    let out = PathBuf::from(&cfg.output.dir);

    match cli.command {
        Command::Simulate => {
            let r = cmd_simulate(&cfg, &out)?;
            let worst = r.decomposition_error.iter().flatten().copied().fold(0.0, f64::max);
            println!("{} trajectories, {} samples; max decomposition error {worst:.3e}", r.states.len(), r.times.len());
        }
        Command::Thermo(_) => {
            let r = cmd_thermo(&cfg, &out)?.report;
            println!("entropy        {:.6} (iterate {})", r.entropy, r.entropy_steps);
            println!("phi integral   {:.6}", r.phi_integral);
            println!("P variational  {:.6}", r.p_variational);
            println!("P spectral     {:.6}", r.p_spectral);
            if r.non_unique {
                println!("warning: the invariant measure looks non-unique");
            }
        }
        Command::Equilibrium(_) => {
            let r = cmd_equilibrium(&cfg, &out)?;
            match r.outcome.certificate() {
                Some(c) => println!(
                    "equilibrium profile {:?}, objective {:.6}, max delta {:.3e}, {}",
                    c.profile,
                    c.value,
                    c.max_delta(),
                    if c.valid { "valid" } else { "INVALID" }
                ),
                None => println!("no equilibrium reached: {:?}", r.outcome),
            }
            if let Some(all) = &r.oracle {
                println!("oracle: {} equilibria, {} disagreement(s)", all.len(), r.oracle_diff.len());
                for d in &r.oracle_diff {
                    println!("  {d}");
                }
            }
        }
        Command::Resilience(_) => {
            let r = cmd_resilience(&cfg, &out)?;
            println!("{}", r.verdict);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
