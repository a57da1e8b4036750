//! Drivers behind the command-line subcommands. Each takes a resolved
//! [`ExperimentConfig`], writes its artifacts to an output directory together
//! with the resolved config and a manifest, and returns its results.

mod equilibrium;
mod resilience;
mod simulate;
mod thermo;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub use equilibrium::{cmd_equilibrium, EquilibriumRun};
pub use resilience::{cmd_resilience, ResilienceRun};
pub use simulate::{cmd_simulate, SimulateRun};
pub use thermo::{cmd_thermo, ThermoRun};

use crate::config::ExperimentConfig;
use crate::error::Result;

pub const RESOLVED_CONFIG: &str = "config.resolved.toml";
pub const MANIFEST: &str = "manifest.toml";

/// Output directory of one command run.
pub(crate) struct RunDir {
    dir: PathBuf,
    command: &'static str,
    started: Instant,
    files: Vec<String>,
}

impl RunDir {
    pub(crate) fn create(dir: &Path, command: &'static str) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(RunDir {
            dir: dir.to_path_buf(),
            command,
            started: Instant::now(),
            files: Vec::new(),
        })
    }

    pub(crate) fn csv(&mut self, name: &str) -> Result<csv::Writer<fs::File>> {
        self.files.push(name.to_string());
        Ok(csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(self.dir.join(name))?)
    }

    pub(crate) fn text(&mut self, name: &str, contents: &str) -> Result<()> {
        self.files.push(name.to_string());
        fs::write(self.dir.join(name), contents)?;
        Ok(())
    }

    pub(crate) fn file(&mut self, name: &str) -> Result<fs::File> {
        self.files.push(name.to_string());
        Ok(fs::File::create(self.dir.join(name))?)
    }

    /// Writes the resolved config and the manifest; returns the file list.
    pub(crate) fn finish(mut self, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
        fs::write(self.dir.join(RESOLVED_CONFIG), cfg.to_toml())?;
        self.files.push(RESOLVED_CONFIG.into());
        let mut m = String::new();
        writeln!(m, "command = \"{}\"", self.command).ok();
        writeln!(m, "package = \"{} {}\"", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")).ok();
        writeln!(m, "seed = {}", cfg.seed).ok();
        writeln!(m, "threads = {}", rayon::current_num_threads()).ok();
        writeln!(m, "wall_time_s = {:.3}", self.started.elapsed().as_secs_f64()).ok();
        let quoted: Vec<String> = self.files.iter().map(|f| format!("\"{f}\"")).collect();
        writeln!(m, "files = [{}]", quoted.join(", ")).ok();
        fs::write(self.dir.join(MANIFEST), m)?;
        self.files.push(MANIFEST.into());
        Ok(self.files.iter().map(|f| self.dir.join(f)).collect())
    }
}

/// Shortest round-trip form, switching to exponent notation for very small
/// or large magnitudes.
pub(crate) fn num(v: f64) -> String {
    format!("{v:?}")
}

pub(crate) fn fmt_list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| num(*x)).collect();
    format!("[{}]", items.join(", "))
}
