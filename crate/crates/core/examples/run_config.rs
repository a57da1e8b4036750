//! Runs the equilibrium search of a bundled configuration through the same
//! driver as the command-line tool and lists the files it wrote.

use std::path::Path;

use thermogame::commands::cmd_equilibrium;
use thermogame::config::ExperimentConfig;

fn main() -> thermogame::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/game_1d.toml");
    let mut cfg = ExperimentConfig::load(&path)?;
    cfg.resolve(None);
    let out = std::env::temp_dir().join("thermogame_run_config");
    let run = cmd_equilibrium(&cfg, &out)?;
    println!("{:?}", run.outcome.certificate().map(|c| &c.profile));
    for f in &run.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
