//! TOML experiment configuration. See `configs/README.md` for the schema.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::StrategyGrid;
use crate::perturb::{PerturbSpec, ResilienceSetup, X0Sampler, DEFAULT_DELTA, DEFAULT_SWEEP_THRESHOLD};
use crate::sysflow::{Domain, GainSet, Segment, SystemSpec};
use crate::thermo::{build_partition, Partition, Potential, PotentialSpec, ThermoConfig};

pub type Matrix = Vec<Vec<f64>>;

pub fn matrix_from_rows(rows: &[Vec<f64>], path: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    if n == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(Error::config(path, "matrix rows must be non-empty and equal length"));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn rows_of(m: &DMatrix<f64>) -> Matrix {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Seed of the named substream of `master` (SplitMix64 finalizer over the
/// master seed mixed with an FNV-1a hash of the name). Kept below 2^63 so it
/// fits a TOML integer.
pub fn substream_seed(master: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = master ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    (z ^ (z >> 31)) >> 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub system: SystemBlock,
    #[serde(default)]
    pub gains: GainsBlock,
    #[serde(default)]
    pub thermo: ThermoBlock,
    #[serde(default)]
    pub game: GameBlock,
    #[serde(default)]
    pub perturb: PerturbBlock,
    #[serde(default)]
    pub simulate: SimulateBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemBlock {
    pub d: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(rename = "A")]
    pub a: DriftBlock,
    pub channels: Vec<ChannelBlock>,
    pub domain: DomainBlock,
    /// Uses this matrix as the time-τ map, bypassing integration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direct_map: Option<Matrix>,
}

fn default_dt() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftBlock {
    pub segments: Vec<SegmentBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentBlock {
    #[serde(default)]
    pub start: f64,
    pub matrix: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelBlock {
    #[serde(rename = "B")]
    pub b: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainBlock {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    #[serde(default = "yes")]
    pub wrap: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GainsBlock {
    pub bound: f64,
    /// One matrix per channel; zero gains when absent.
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<Matrix>>,
}

impl Default for GainsBlock {
    fn default() -> Self {
        GainsBlock { bound: 1.0, k: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThermoBlock {
    /// Cells per axis.
    pub m: usize,
    /// Map time of the `thermo` command.
    pub tau: f64,
    pub phi: PotentialSpec,
    pub samples_per_cell: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub tol: f64,
    pub max_iter: usize,
    pub max_entropy_steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entropy_steps: Option<usize>,
}

impl Default for ThermoBlock {
    fn default() -> Self {
        let t = ThermoConfig::default();
        ThermoBlock {
            m: 32,
            tau: 1.0,
            phi: PotentialSpec::Zero,
            samples_per_cell: t.samples_per_cell,
            seed: None,
            tol: t.tol,
            max_iter: t.max_iter,
            max_entropy_steps: t.max_entropy_steps,
            entropy_steps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GameBlock {
    pub taus: Vec<f64>,
    pub eps_eq: f64,
    pub max_rounds: usize,
    /// Spacing of the per-entry gain grid on `[-bound, bound]`.
    pub grid_step: f64,
    /// Starting profile as grid indices; the all-zero gain (or nearest
    /// level) when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<usize>>,
    pub profile_cap: usize,
    pub oracle: bool,
}

impl Default for GameBlock {
    fn default() -> Self {
        GameBlock {
            taus: vec![0.5, 1.0, 2.0],
            eps_eq: crate::game::DEFAULT_EPS_EQ,
            max_rounds: 50,
            grid_step: 0.5,
            initial: None,
            profile_cap: crate::game::DEFAULT_PROFILE_CAP,
            oracle: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbBlock {
    pub epsilon: f64,
    /// Strictly decreasing noise levels; runs a sweep instead of one `epsilon`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_sweep: Option<Vec<f64>>,
    /// Diffusion matrix; identity when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Matrix>,
    pub dt_sde: f64,
    pub n_paths: usize,
    /// Defaults to the last observation time.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    pub times: Vec<f64>,
    pub map_tau: f64,
    pub delta: f64,
    pub x0: X0Sampler,
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sde_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0_seed: Option<u64>,
}

impl Default for PerturbBlock {
    fn default() -> Self {
        PerturbBlock {
            epsilon: 0.1,
            eps_sweep: None,
            sigma: None,
            dt_sde: 1e-2,
            n_paths: 10_000,
            horizon: None,
            times: vec![1.0, 2.0],
            map_tau: 0.5,
            delta: DEFAULT_DELTA,
            x0: X0Sampler::UniformBox,
            threshold: DEFAULT_SWEEP_THRESHOLD,
            sde_seed: None,
            x0_seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateBlock {
    pub horizon: f64,
    /// Output row spacing.
    pub sample_every: f64,
    /// Initial conditions; the all-ones state when empty.
    pub x0: Vec<Vec<f64>>,
}

impl Default for SimulateBlock {
    fn default() -> Self {
        SimulateBlock {
            horizon: 5.0,
            sample_every: 0.1,
            x0: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub dir: String,
    /// Also write the Ulam matrix as sparse triplets.
    pub ulam_triplets: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            dir: "out".into(),
            ulam_triplets: false,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("<file>", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parses and validates; schema errors carry the offending key path.
    pub fn parse(text: &str) -> Result<Self> {
        let value: toml::Value = toml::from_str(text).map_err(|e| Error::config("<root>", e.message().to_string()))?;
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { "<root>".into() } else { path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let spec = self.system_spec()?;
        self.gains(&spec)?;
        if self.thermo.m < 2 {
            return Err(Error::config("thermo.m", "need at least 2 cells per axis"));
        }
        if self.thermo.samples_per_cell == 0 {
            return Err(Error::config("thermo.samples_per_cell", "must be at least 1"));
        }
        if !(self.thermo.tau > 0.0) {
            return Err(Error::config("thermo.tau", "must be positive"));
        }
        if !(self.thermo.tol > 0.0) {
            return Err(Error::config("thermo.tol", "must be positive"));
        }
        self.thermo.phi.build(spec.domain())?;
        if self.game.taus.is_empty() || self.game.taus.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::config("game.taus", "need positive sample times"));
        }
        if !(self.game.eps_eq >= 0.0) {
            return Err(Error::config("game.eps_eq", "must be >= 0"));
        }
        if self.game.max_rounds == 0 {
            return Err(Error::config("game.max_rounds", "must be at least 1"));
        }
        if !(self.game.grid_step > 0.0) {
            return Err(Error::config("game.grid_step", "must be positive"));
        }
        if self.perturb.times.is_empty() {
            return Err(Error::config("perturb.times", "need at least one observation time"));
        }
        if !(self.perturb.delta >= 0.0) {
            return Err(Error::config("perturb.delta", "must be >= 0"));
        }
        if let Some(sw) = &self.perturb.eps_sweep {
            if sw.is_empty() || sw.iter().any(|e| !(*e >= 0.0)) || sw.windows(2).any(|w| w[1] >= w[0]) {
                return Err(Error::config("perturb.eps_sweep", "must be non-empty, nonnegative and strictly decreasing"));
            }
        }
        self.perturb_spec(spec.dim())?.validate(spec.dim())?;
        if !(self.simulate.horizon >= 0.0) {
            return Err(Error::config("simulate.horizon", "must be >= 0"));
        }
        if !(self.simulate.sample_every > 0.0) {
            return Err(Error::config("simulate.sample_every", "must be positive"));
        }
        for (i, x) in self.simulate.x0.iter().enumerate() {
            if x.len() != spec.dim() {
                return Err(Error::config(format!("simulate.x0[{i}]"), format!("expected {} entries", spec.dim())));
            }
        }
        Ok(())
    }

    /// Applies a master-seed override and fills every derived default so the
    /// serialized form reproduces the run on its own.
    pub fn resolve(&mut self, seed: Option<u64>) {
        if let Some(s) = seed {
            self.seed = s;
            self.thermo.seed = None;
            self.perturb.sde_seed = None;
            self.perturb.x0_seed = None;
        }
        let master = self.seed;
        self.thermo.seed.get_or_insert_with(|| substream_seed(master, "ulam"));
        self.perturb.sde_seed.get_or_insert_with(|| substream_seed(master, "sde"));
        self.perturb.x0_seed.get_or_insert_with(|| substream_seed(master, "x0"));
        let last = self.perturb.times.iter().copied().fold(0.0, f64::max);
        self.perturb.horizon.get_or_insert(last.max(self.perturb.dt_sde));
        let d = self.system.d;
        self.perturb.sigma.get_or_insert_with(|| rows_of(&DMatrix::identity(d, d)));
        if self.simulate.x0.is_empty() {
            self.simulate.x0.push(vec![1.0; d]);
        }
        if self.gains.k.is_none() {
            let k = self
                .system
                .channels
                .iter()
                .map(|c| vec![vec![0.0; d]; c.b.first().map_or(0, |r| r.len())])
                .collect();
            self.gains.k = Some(k);
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn system_spec(&self) -> Result<SystemSpec> {
        let s = &self.system;
        if s.d == 0 {
            return Err(Error::config("system.d", "must be positive"));
        }
        if s.channels.is_empty() {
            return Err(Error::config("system.channels", "need at least one channel"));
        }
        if s.a.segments.is_empty() {
            return Err(Error::config("system.A.segments", "need at least one segment"));
        }
        let segments = s
            .a
            .segments
            .iter()
            .enumerate()
            .map(|(i, seg)| {
                Ok(Segment {
                    start: seg.start,
                    drift: matrix_from_rows(&seg.matrix, &format!("system.A.segments[{i}].matrix"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let inputs = s
            .channels
            .iter()
            .enumerate()
            .map(|(j, c)| matrix_from_rows(&c.b, &format!("system.channels[{j}].B")))
            .collect::<Result<Vec<_>>>()?;
        if s.domain.lo.len() != s.d || s.domain.hi.len() != s.d {
            return Err(Error::config("system.domain", format!("lo and hi need {} entries", s.d)));
        }
        let domain = Domain::new(s.domain.lo.clone(), s.domain.hi.clone(), s.domain.wrap)?;
        let spec = SystemSpec::new(segments, inputs, domain, s.dt)?;
        if spec.dim() != s.d {
            return Err(Error::config("system.d", format!("matrices are {}-dimensional", spec.dim())));
        }
        match &s.direct_map {
            Some(rows) => spec.with_direct_map(matrix_from_rows(rows, "system.direct_map")?),
            None => Ok(spec),
        }
    }

    pub fn gains(&self, spec: &SystemSpec) -> Result<GainSet> {
        let bound = self.gains.bound;
        if !(bound > 0.0) {
            return Err(Error::config("gains.bound", "must be positive"));
        }
        match &self.gains.k {
            None => GainSet::zeros(spec, bound),
            Some(ks) => {
                if ks.len() != spec.channels() {
                    return Err(Error::config("gains.K", format!("need {} matrices", spec.channels())));
                }
                let gains = ks
                    .iter()
                    .enumerate()
                    .map(|(j, k)| matrix_from_rows(k, &format!("gains.K[{j}]")))
                    .collect::<Result<Vec<_>>>()?;
                let g = GainSet::new(gains, bound).map_err(|e| Error::config("gains.K", e.to_string()))?;
                g.check_for(spec).map_err(|e| Error::config("gains.K", e.to_string()))?;
                Ok(g)
            }
        }
    }

    pub fn partition(&self, spec: &SystemSpec) -> Result<Partition> {
        build_partition(spec.domain(), self.thermo.m)
    }

    pub fn potential(&self, spec: &SystemSpec) -> Result<Potential> {
        self.thermo.phi.build(spec.domain())
    }

    pub fn thermo_config(&self) -> ThermoConfig {
        ThermoConfig {
            samples_per_cell: self.thermo.samples_per_cell,
            seed: self.thermo.seed.unwrap_or_else(|| substream_seed(self.seed, "ulam")),
            tol: self.thermo.tol,
            max_iter: self.thermo.max_iter,
            max_entropy_steps: self.thermo.max_entropy_steps,
            entropy_steps: self.thermo.entropy_steps,
        }
    }

    pub fn strategy_grid(&self, spec: &SystemSpec) -> Result<StrategyGrid> {
        StrategyGrid::uniform(spec, self.gains.bound, self.game.grid_step)
    }

    pub fn perturb_spec(&self, d: usize) -> Result<PerturbSpec> {
        let p = &self.perturb;
        let sigma = match &p.sigma {
            Some(rows) => matrix_from_rows(rows, "perturb.sigma")?,
            None => DMatrix::identity(d, d),
        };
        let last = p.times.iter().copied().fold(0.0, f64::max);
        Ok(PerturbSpec {
            epsilon: p.epsilon,
            sigma,
            dt_sde: p.dt_sde,
            n_paths: p.n_paths,
            horizon: p.horizon.unwrap_or(last.max(p.dt_sde)),
            seed: p.sde_seed.unwrap_or_else(|| substream_seed(self.seed, "sde")),
        })
    }

    pub fn resilience_setup(&self) -> ResilienceSetup {
        let p = &self.perturb;
        ResilienceSetup {
            times: p.times.clone(),
            map_tau: p.map_tau,
            delta: p.delta,
            x0: p.x0.clone(),
            x0_seed: p.x0_seed.unwrap_or_else(|| substream_seed(self.seed, "x0")),
            samples_per_cell: self.thermo.samples_per_cell,
            ulam_seed: self.thermo.seed.unwrap_or_else(|| substream_seed(self.seed, "ulam")),
        }
    }
}
