use std::collections::{BTreeSet, HashMap};
use std::sync::Mutex;

use super::{Profile, StrategyGrid};

use crate::error::{Error, Result};
use crate::sysflow::{flow_map, GainSet, SystemSpec};
use crate::thermo::{free_energy, MeasureVector, Partition, Potential, ThermoConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveValue {
    /// Aggregated value the channels maximize.
    pub value: f64,
    /// Per sampled time, when the objective is time-sampled.
    pub per_tau: Vec<f64>,
}

/// Payoff of a gain profile to one channel.
pub trait GameObjective: Sync {
    fn evaluate(&self, channel: usize, gains: &GainSet) -> Result<ObjectiveValue>;

    /// True when every channel receives the same payoff; evaluations are
    /// then shared between channels.
    fn common_payoff(&self) -> bool {
        false
    }

    fn sample_times(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Discrete equilibrium densities of `gains`, one per sampled time.
    fn equilibrium_densities(&self, _gains: &GainSet) -> Result<Vec<MeasureVector>> {
        Ok(Vec::new())
    }
}

/// `min_τ P_φ` over the sampled map times, each by the spectral route on the
/// wrapped time-τ closed-loop map.
pub fn objective(
    spec: &SystemSpec,
    gains: &GainSet,
    phi: &Potential,
    taus: &[f64],
    part: &Partition,
    cfg: &ThermoConfig,
) -> Result<ObjectiveValue> {
    if taus.is_empty() || taus.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Precondition("sampled times must be non-empty and positive".into()));
    }
    let per_tau = taus
        .iter()
        .map(|tau| {
            let map = flow_map(spec, gains, *tau, true)?;
            Ok(free_energy(&map, part, phi, cfg)?.p_spectral)
        })
        .collect::<Result<Vec<f64>>>()?;
    let value = per_tau.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ObjectiveValue { value, per_tau })
}

/// The free-energy game: every channel maximizes the same pressure.
#[derive(Debug, Clone)]
pub struct FreeEnergyObjective {
    pub spec: SystemSpec,
    pub phi: Potential,
    pub taus: Vec<f64>,
    pub partition: Partition,
    pub thermo: ThermoConfig,
}

impl GameObjective for FreeEnergyObjective {
    fn evaluate(&self, _channel: usize, gains: &GainSet) -> Result<ObjectiveValue> {
        objective(&self.spec, gains, &self.phi, &self.taus, &self.partition, &self.thermo)
    }

    fn common_payoff(&self) -> bool {
        true
    }

    fn sample_times(&self) -> Vec<f64> {
        self.taus.clone()
    }

    fn equilibrium_densities(&self, gains: &GainSet) -> Result<Vec<MeasureVector>> {
        self.taus
            .iter()
            .map(|tau| {
                let map = flow_map(&self.spec, gains, *tau, true)?;
                Ok(free_energy(&map, &self.partition, &self.phi, &self.thermo)?.equilibrium_density)
            })
            .collect()
    }
}

type CacheKey = (usize, Vec<u64>);

/// Memoizing wrapper around an objective. Evaluations are deterministic, so
/// cached and fresh values are bit-identical.
pub struct GameContext<'a> {
    objective: &'a dyn GameObjective,
    cache: Mutex<HashMap<CacheKey, ObjectiveValue>>,
    visited: Mutex<BTreeSet<Profile>>,
}

impl<'a> GameContext<'a> {
    pub fn new(objective: &'a dyn GameObjective) -> Self {
        GameContext {
            objective,
            cache: Mutex::new(HashMap::new()),
            visited: Mutex::new(BTreeSet::new()),
        }
    }

    pub fn objective(&self) -> &dyn GameObjective {
        self.objective
    }

    fn key(&self, channel: usize, gains: &GainSet) -> CacheKey {
        let c = if self.objective.common_payoff() { 0 } else { channel };
        (c, gains.flattened().into_iter().map(f64::to_bits).collect())
    }

    pub fn value(&self, channel: usize, gains: &GainSet) -> Result<ObjectiveValue> {
        let key = self.key(channel, gains);
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(v.clone());
        }
        let v = self.objective.evaluate(channel, gains)?;
        self.cache.lock().expect("cache lock").insert(key, v.clone());
        Ok(v)
    }

    /// Value of a grid profile to channel `channel`; the profile is recorded.
    pub fn profile_value(&self, grid: &StrategyGrid, channel: usize, profile: &[usize]) -> Result<ObjectiveValue> {
        let v = self.value(channel, &grid.gains(profile))?;
        self.visited.lock().expect("visited lock").insert(profile.to_vec());
        Ok(v)
    }

    /// Cached value, without evaluating.
    pub fn cached(&self, channel: usize, gains: &GainSet) -> Option<ObjectiveValue> {
        self.cache.lock().expect("cache lock").get(&self.key(channel, gains)).cloned()
    }

    /// Grid profiles evaluated so far, in lexicographic order.
    pub fn visited(&self) -> Vec<Profile> {
        self.visited.lock().expect("visited lock").iter().cloned().collect()
    }

    pub fn evaluations(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }
}
