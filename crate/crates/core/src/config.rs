//! TOML network and scenario files.
//!
//! A network file lists buses, lines, the area partition and optionally the
//! communication graph. Buses are identified by integer ids; areas are
//! numbered from 1. Internally generators come first, in file order, then
//! loads in file order.
//!
//! A scenario file points to a network file (relative to itself) and adds
//! gains, disturbance events, integration settings and check tolerances.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::controller::agc::{default_bias, default_reference_buses, normalize_participation, AgcConfig};
use crate::controller::cost::{CostModel, QuadraticCost};
use crate::controller::gains::{ControllerGains, GainBounds};
use crate::controller::law::ControlMode;
use crate::error::{Error, Result};
use crate::network::{default_designated, CommEdge, CommGraph, Line, PowerNetwork, Topology};
use crate::plant::BusParams;
use crate::simulator::integrate::{LoadEvent, StepControl};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKindConfig {
    Generator,
    Load,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusConfig {
    pub id: u32,
    pub kind: BusKindConfig,
    pub area: usize,
    pub damping: f64,
    /// `[c1, c2, c3]`
    pub cost: [f64; 3],
    #[serde(default)]
    pub inertia: Option<f64>,
    #[serde(default)]
    pub time_constant: Option<f64>,
    #[serde(default)]
    pub droop: Option<f64>,
    /// Uncontrollable load, load buses only.
    #[serde(default)]
    pub load: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineConfig {
    pub from: u32,
    pub to: u32,
    /// `T_pe` in p.u.; give either this or `reactance`.
    #[serde(default)]
    pub susceptance: Option<f64>,
    /// Series reactance, `T_pe = 1 / x`.
    #[serde(default)]
    pub reactance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommEdgeConfig {
    pub a: u32,
    pub b: u32,
    #[serde(default = "unit")]
    pub weight: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommConfig {
    /// Bus id per area that knows the scheduled export; defaults to the
    /// lowest id of each area.
    #[serde(default)]
    pub designated: Option<Vec<u32>>,
    /// Explicit links; when absent the transmission graph is mirrored with
    /// unit weights.
    #[serde(default)]
    pub edge: Option<Vec<CommEdgeConfig>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_hz")]
    pub nominal_hz: f64,
    #[serde(default = "default_mva")]
    pub base_mva: f64,
    /// Net export per area in p.u.
    pub scheduled_tie: Vec<f64>,
    pub bus: Vec<BusConfig>,
    pub line: Vec<LineConfig>,
    #[serde(default)]
    pub comm: CommConfig,
}

fn default_hz() -> f64 {
    60.0
}

fn default_mva() -> f64 {
    100.0
}

/// A network ready for simulation.
#[derive(Debug, Clone)]
pub struct NetworkModel {
    pub name: String,
    pub nominal_hz: f64,
    pub base_mva: f64,
    pub topo: Topology,
    pub params: BusParams,
    pub costs: CostModel,
}

impl NetworkModel {
    pub fn bus_index(&self, id: u32) -> Result<usize> {
        self.topo
            .network
            .bus_by_label(id)
            .ok_or_else(|| Error::Config(format!("unknown bus id {id}")))
    }
}

fn parse_toml<T: serde::de::DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

impl NetworkConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        parse_toml(text, "network config")
    }

    pub fn load(path: &Path) -> Result<Self> {
        parse_toml(&read(path)?, &path.display().to_string())
    }

    pub fn build(&self) -> Result<NetworkModel> {
        let gens: Vec<&BusConfig> = self.bus.iter().filter(|b| b.kind == BusKindConfig::Generator).collect();
        let loads: Vec<&BusConfig> = self.bus.iter().filter(|b| b.kind == BusKindConfig::Load).collect();
        let ordered: Vec<&BusConfig> = gens.iter().chain(loads.iter()).copied().collect();
        let mut index = HashMap::new();
        for (i, b) in ordered.iter().enumerate() {
            if index.insert(b.id, i).is_some() {
                return Err(Error::Config(format!("bus id {} appears twice", b.id)));
            }
        }
        let lookup = |id: u32| {
            index
                .get(&id)
                .copied()
                .ok_or_else(|| Error::Config(format!("unknown bus id {id}")))
        };
        let k = self.scheduled_tie.len();
        let mut areas = Vec::with_capacity(ordered.len());
        for b in &ordered {
            if b.area == 0 || b.area > k {
                return Err(Error::Config(format!(
                    "bus {} is in area {} but areas are numbered 1..={k}",
                    b.id, b.area
                )));
            }
            areas.push(b.area - 1);
        }

        let mut lines = Vec::with_capacity(self.line.len());
        for l in &self.line {
            let susceptance = match (l.susceptance, l.reactance) {
                (Some(t), None) => t,
                (None, Some(x)) => 1.0 / x,
                _ => {
                    return Err(Error::Config(format!(
                        "line {}-{} needs exactly one of susceptance or reactance",
                        l.from, l.to
                    )))
                }
            };
            lines.push(Line {
                from: lookup(l.from)?,
                to: lookup(l.to)?,
                susceptance,
            });
        }
        let network = PowerNetwork::new(ordered.len(), gens.len(), lines, areas, self.scheduled_tie.clone())?
            .with_labels(ordered.iter().map(|b| b.id).collect())?;

        let designated = match &self.comm.designated {
            Some(ids) => ids.iter().map(|&id| lookup(id)).collect::<Result<Vec<_>>>()?,
            None => default_designated(&network),
        };
        let comm = match &self.comm.edge {
            Some(edges) => CommGraph {
                edges: edges
                    .iter()
                    .map(|e| {
                        Ok(CommEdge {
                            a: lookup(e.a)?,
                            b: lookup(e.b)?,
                            weight: e.weight,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?,
                designated,
            },
            None => CommGraph {
                designated,
                ..CommGraph::mirror(&network)
            },
        };
        let topo = Topology::new(network, comm)?;

        let require = |b: &BusConfig, v: Option<f64>, what: &str| {
            v.ok_or_else(|| Error::Config(format!("generator bus {} is missing {what}", b.id)))
        };
        let mut params = BusParams {
            inertia: Vec::new(),
            damping: ordered.iter().map(|b| b.damping).collect(),
            time_constant: Vec::new(),
            droop: Vec::new(),
            base_load: Vec::new(),
        };
        for b in &gens {
            params.inertia.push(require(b, b.inertia, "inertia")?);
            params.time_constant.push(require(b, b.time_constant, "time_constant")?);
            params.droop.push(require(b, b.droop, "droop")?);
            if b.load.is_some() {
                return Err(Error::Config(format!(
                    "generator bus {} cannot carry an uncontrollable load",
                    b.id
                )));
            }
        }
        for b in &loads {
            if b.inertia.is_some() || b.time_constant.is_some() || b.droop.is_some() {
                return Err(Error::Config(format!(
                    "load bus {} has generator-only parameters",
                    b.id
                )));
            }
            params.base_load.push(b.load.unwrap_or(0.0));
        }
        params.validate(&topo)?;
        let costs = CostModel::new(
            ordered
                .iter()
                .map(|b| QuadraticCost::new(b.cost[0], b.cost[1], b.cost[2]))
                .collect(),
            &topo,
        )?;
        Ok(NetworkModel {
            name: self.name.clone().unwrap_or_else(|| "network".into()),
            nominal_hz: self.nominal_hz,
            base_mva: self.base_mva,
            topo,
            params,
            costs,
        })
    }
}

/// A scalar applied everywhere or one value per entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    fn expand(&self, len: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            OneOrMany::One(v) => Ok(vec![*v; len]),
            OneOrMany::Many(v) if v.len() == len => Ok(v.clone()),
            OneOrMany::Many(v) => Err(Error::Config(format!(
                "{what} lists {} values, expected 1 or {len}",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerSelection {
    #[default]
    Distributed,
    Agc,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsConfig {
    /// Per area (scalar or list of length k).
    pub alpha: OneOrMany,
    /// Per bus in internal order (scalar or list of length n).
    pub k: OneOrMany,
    /// Controller inertia estimate per generator; defaults to the true value.
    #[serde(default)]
    pub m_hat: Option<OneOrMany>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Known interval of every damping coefficient.
    pub damping_range: [f64; 2],
}

fn default_epsilon() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventConfig {
    pub time: f64,
    pub bus: u32,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateVariable {
    Lambda,
    Phi,
    Gamma,
    Z,
}

/// Offset added to one controller variable of the pre-disturbance state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffsetConfig {
    pub variable: StateVariable,
    pub bus: u32,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgcSection {
    #[serde(default)]
    pub integral_gain: Option<f64>,
    #[serde(default)]
    pub bias: Option<Vec<f64>>,
    /// Bus id per area whose frequency enters the area control error.
    #[serde(default)]
    pub reference_bus: Option<Vec<u32>>,
    /// Raw weight per generator; normalized per area.
    #[serde(default)]
    pub participation: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckSettings {
    pub frequency_tol: f64,
    pub tie_tol: f64,
    pub consensus_tol: f64,
    pub optimality_tol: f64,
    pub conservation_tol: f64,
    pub lyapunov: bool,
    pub lyapunov_allowance: f64,
    pub lyapunov_final: f64,
    pub steady_tol: f64,
    pub steady_window: f64,
}

impl Default for CheckSettings {
    fn default() -> Self {
        Self {
            frequency_tol: 1e-4,
            tie_tol: 1e-4,
            consensus_tol: 1e-4,
            optimality_tol: 1e-4,
            conservation_tol: 1e-7,
            lyapunov: true,
            lyapunov_allowance: 1e-8,
            lyapunov_final: 1e-8,
            steady_tol: 1e-6,
            steady_window: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelSet {
    /// Frequencies, unit outputs, prices and diagnostics.
    #[default]
    Standard,
    /// Everything in `Standard` plus every state block.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: Option<String>,
    /// Network file, relative to the scenario file.
    pub network: PathBuf,
    #[serde(default)]
    pub controller: ControllerSelection,
    #[serde(default)]
    pub mode: ControlMode,
    pub t_end: f64,
    #[serde(default = "default_sample")]
    pub sample_interval: f64,
    /// Bus id used for nadir and settling-time metrics.
    #[serde(default)]
    pub monitor_bus: Option<u32>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub channels: ChannelSet,
    pub gains: GainsConfig,
    #[serde(default)]
    pub integration: StepControl,
    #[serde(default)]
    pub event: Vec<EventConfig>,
    #[serde(default)]
    pub initial_offset: Vec<OffsetConfig>,
    #[serde(default)]
    pub agc: AgcSection,
    #[serde(default)]
    pub checks: CheckSettings,
}

fn default_sample() -> f64 {
    0.01
}

/// Per-variable offsets on top of the pre-disturbance state.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialOffset {
    pub variable: StateVariable,
    pub bus: usize,
    pub delta: f64,
}

/// Fully resolved scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub model: NetworkModel,
    pub controller: ControllerSelection,
    pub mode: ControlMode,
    pub gains: ControllerGains,
    pub bounds: GainBounds,
    pub agc: AgcConfig,
    pub events: Vec<LoadEvent>,
    pub offsets: Vec<InitialOffset>,
    pub integration: StepControl,
    pub t_end: f64,
    pub sample_interval: f64,
    pub monitor_bus: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub channels: ChannelSet,
    pub checks: CheckSettings,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        parse_toml(text, "scenario config")
    }

    pub fn load(path: &Path) -> Result<Self> {
        parse_toml(&read(path)?, &path.display().to_string())
    }

    /// Resolves the network path against `base_dir` and validates everything.
    pub fn build(&self, base_dir: &Path) -> Result<Scenario> {
        let net_path = base_dir.join(&self.network);
        let model = NetworkConfig::load(&net_path)?.build()?;
        self.build_with(model)
    }

    pub fn build_with(&self, model: NetworkModel) -> Result<Scenario> {
        let topo = &model.topo;
        let (n, ng) = (topo.n(), topo.ng());
        let area_alpha = self.gains.alpha.expand(topo.k(), "alpha")?;
        let alpha = (0..n).map(|i| area_alpha[topo.network.area_of(i)]).collect();
        let k = self.gains.k.expand(n, "K")?;
        let m_hat = match &self.gains.m_hat {
            Some(m) => m.expand(ng, "m_hat")?,
            None => model.params.inertia.clone(),
        };
        let gains = ControllerGains { alpha, k, m_hat };
        gains.validate(topo)?;
        let [d_min, d_max] = self.gains.damping_range;
        let bounds = GainBounds::uniform(n, d_min, d_max, self.gains.epsilon);

        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config("t_end must be positive".into()));
        }
        if !(self.sample_interval > 0.0) {
            return Err(Error::Config("sample_interval must be positive".into()));
        }
        let mut events = Vec::new();
        for e in &self.event {
            let bus = model.bus_index(e.bus)?;
            if topo.network.is_generator(bus) {
                return Err(Error::Config(format!("event at bus {} targets a generator bus", e.bus)));
            }
            if !(e.time >= 0.0) {
                return Err(Error::Config("event times must be non-negative".into()));
            }
            events.push(LoadEvent {
                time: e.time,
                load: bus - ng,
                delta: e.delta,
            });
        }
        let offsets = self
            .initial_offset
            .iter()
            .map(|o| {
                Ok(InitialOffset {
                    variable: o.variable,
                    bus: model.bus_index(o.bus)?,
                    delta: o.delta,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let monitor_bus = self.monitor_bus.map(|id| model.bus_index(id)).transpose()?;

        let mut agc = AgcConfig::standard(topo, &model.params, &model.costs)?;
        if let Some(g) = self.agc.integral_gain {
            agc.integral_gain = g;
        }
        agc.bias = self.agc.bias.clone().unwrap_or_else(|| default_bias(topo, &model.params));
        agc.reference_bus = match &self.agc.reference_bus {
            Some(ids) => ids.iter().map(|&id| model.bus_index(id)).collect::<Result<Vec<_>>>()?,
            None => default_reference_buses(topo),
        };
        if let Some(raw) = &self.agc.participation {
            agc.participation = normalize_participation(topo, raw)?;
        }
        agc.validate(topo)?;

        Ok(Scenario {
            name: self.name.clone().unwrap_or_else(|| model.name.clone()),
            controller: self.controller,
            mode: self.mode,
            gains,
            bounds,
            agc,
            events,
            offsets,
            integration: self.integration,
            t_end: self.t_end,
            sample_interval: self.sample_interval,
            monitor_bus,
            output_dir: self.output_dir.clone(),
            channels: self.channels,
            checks: self.checks.clone(),
            model,
        })
    }
}

/// Loads and resolves a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let cfg = ScenarioConfig::load(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    cfg.build(base)
}

/// Either kind of config file.
#[derive(Debug, Clone)]
pub enum ConfigFile {
    Scenario(Box<Scenario>),
    Network(NetworkModel),
}

/// Loads a scenario file, or a bare network file if it has no `network` key.
pub fn load_any(path: &Path) -> Result<ConfigFile> {
    let text = read(path)?;
    let value: toml::Table = parse_toml(&text, &path.display().to_string())?;
    if value.contains_key("network") {
        Ok(ConfigFile::Scenario(Box::new(load_scenario(path)?)))
    } else {
        Ok(ConfigFile::Network(NetworkConfig::from_toml(&text)?.build()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_BUS: &str = r#"
        scheduled_tie = [0.0]
        [[bus]]
        id = 1
        kind = "generator"
        area = 1
        damping = 1.0
        inertia = 10.0
        time_constant = 0.3
        droop = 0.05
        cost = [2.0, 1.0, 0.0]
        [[bus]]
        id = 2
        kind = "load"
        area = 1
        damping = 1.0
        load = 0.2
        cost = [-3.0, 9.0, 0.0]
        [[line]]
        from = 1
        to = 2
        reactance = 0.1
    "#;

    #[test]
    fn parses_minimal_network() {
        let model = NetworkConfig::from_toml(TWO_BUS).unwrap().build().unwrap();
        assert_eq!(model.topo.n(), 2);
        assert!((model.topo.network.lines()[0].susceptance - 10.0).abs() < 1e-12);
        assert_eq!(model.params.base_load, vec![0.2]);
    }

    #[test]
    fn rejects_unknown_bus_in_line() {
        let text = TWO_BUS.replace("to = 2", "to = 7");
        assert!(matches!(NetworkConfig::from_toml(&text).unwrap().build(), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_unbalanced_schedule() {
        let text = TWO_BUS.replace("scheduled_tie = [0.0]", "scheduled_tie = [0.3]");
        assert!(NetworkConfig::from_toml(&text).unwrap().build().is_err());
    }

    #[test]
    fn syntax_errors_are_config_errors() {
        assert!(matches!(NetworkConfig::from_toml("bus = ["), Err(Error::Config(_))));
    }
}
