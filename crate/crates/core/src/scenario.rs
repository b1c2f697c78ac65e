//! Scenario files and the seeded scenario generator.
//!
//! A scenario is JSON with top-level keys `horizon`, `clustering`, `mode`,
//! `seed` and either an explicit `agents` array or a `generator` object:
//!
//! ```json
//! {
//!   "horizon": { "num_slots": 4, "kappa": 2 },
//!   "clustering": { "k": 2, "max_iters": 100 },
//!   "mode": "mcafee",
//!   "seed": 42,
//!   "agents": [
//!     { "id": 0, "role": "executer", "valuation": "7/2", "arrival": 0, "departure": 2,
//!       "location": { "x": 0, "y": "1.5" } },
//!     { "id": 1, "role": "requester", "valuation": 9, "arrival": 1, "departure": 3,
//!       "reported_valuation": 8 }
//!   ]
//! }
//! ```
//!
//! Money and coordinates are exact: JSON integers or strings such as `"7"`,
//! `"7/2"` or `"3.5"`. Reported fields default to the true values.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::auction::PricingMode;
use crate::clustering::{Point2D, DEFAULT_MAX_ITERS};
use crate::model::{
    validate_scenario, Agent, AgentId, Horizon, Role, ScenarioWarning, Slot, ValidationErrors, Window,
};
use crate::money::Money;
use crate::online::{run_horizon, EngineConfig, LookbackAnchor, RunOutcome};
use crate::rng::{stream_rng, GENERATOR_STREAM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusteringConfig {
    pub k: usize,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
}

fn default_max_iters() -> usize {
    DEFAULT_MAX_ITERS
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig { k: 1, max_iters: DEFAULT_MAX_ITERS }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentRecord {
    pub id: u64,
    pub role: Role,
    pub valuation: Money,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reported_valuation: Option<Money>,
    pub arrival: Slot,
    pub departure: Slot,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reported_arrival: Option<Slot>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reported_departure: Option<Slot>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<Point2D>,
}

impl AgentRecord {
    pub fn to_agent(&self) -> Agent {
        let true_window = Window::new(self.arrival, self.departure);
        Agent {
            id: AgentId(self.id),
            role: self.role,
            true_valuation: self.valuation,
            reported_valuation: self.reported_valuation.unwrap_or(self.valuation),
            true_window,
            reported_window: Window::new(
                self.reported_arrival.unwrap_or(self.arrival),
                self.reported_departure.unwrap_or(self.departure),
            ),
            location: self.location,
        }
    }

    pub fn from_agent(agent: &Agent) -> Self {
        let differs = |a: Slot, b: Slot| (a != b).then_some(a);
        AgentRecord {
            id: agent.id.0,
            role: agent.role,
            valuation: agent.true_valuation,
            reported_valuation: (agent.reported_valuation != agent.true_valuation)
                .then_some(agent.reported_valuation),
            arrival: agent.true_window.arrival,
            departure: agent.true_window.departure,
            reported_arrival: differs(agent.reported_window.arrival, agent.true_window.arrival),
            reported_departure: differs(agent.reported_window.departure, agent.true_window.departure),
            location: agent.location,
        }
    }
}

/// Inclusive integer range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntRange {
    pub min: i64,
    pub max: i64,
}

impl IntRange {
    pub fn new(min: i64, max: i64) -> Self {
        IntRange { min, max }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        rng.random_range(self.min..=self.max)
    }
}

/// Rectangle `[0, width] x [0, height]` with `groups` location hot spots;
/// executers scatter up to `spread` around their group's center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocationField {
    pub width: i64,
    pub height: i64,
    pub groups: usize,
    #[serde(default)]
    pub spread: i64,
}

impl Default for LocationField {
    fn default() -> Self {
        LocationField { width: 100, height: 100, groups: 3, spread: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub n_executers: usize,
    pub m_requesters: usize,
    pub executer_valuation: IntRange,
    pub requester_valuation: IntRange,
    /// Longest window to draw; defaults to (and is capped at) kappa.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_window: Option<u32>,
    #[serde(default)]
    pub field: LocationField,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub horizon: Horizon,
    #[serde(default)]
    pub clustering: ClusteringConfig,
    #[serde(default)]
    pub mode: PricingMode,
    #[serde(default)]
    pub seed: u64,
    /// Start of a newcomer's price look-back; departure-anchored unless set.
    #[serde(default, skip_serializing_if = "is_departure")]
    pub lookback: LookbackAnchor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agents: Option<Vec<AgentRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
}

/// A loaded, validated scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub horizon: Horizon,
    pub config: EngineConfig,
    pub agents: Vec<Agent>,
    pub warnings: Vec<ScenarioWarning>,
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}, column {column}, field `{field}`: {message}")]
    Parse { line: usize, column: usize, field: String, message: String },
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error(transparent)]
    Validation(#[from] ValidationErrors),
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|err| {
            let field = err.path().to_string();
            let inner = err.into_inner();
            ScenarioError::Parse {
                line: inner.line(),
                column: inner.column(),
                field,
                message: inner.to_string(),
            }
        })
    }

    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            k: self.clustering.k,
            max_iters: self.clustering.max_iters,
            mode: self.mode,
            seed: self.seed,
            anchor: self.lookback,
        }
    }

    /// Builds the agent list (generating it if needed) and validates it.
    pub fn materialize(&self) -> Result<Scenario, ScenarioError> {
        if self.clustering.k == 0 {
            return Err(ScenarioError::Config("clustering.k must be at least 1".into()));
        }
        if self.clustering.max_iters == 0 {
            return Err(ScenarioError::Config("clustering.max_iters must be at least 1".into()));
        }
        let agents = match (&self.agents, &self.generator) {
            (Some(_), Some(_)) => {
                return Err(ScenarioError::Config(
                    "give either `agents` or `generator`, not both".into(),
                ))
            }
            (Some(records), None) => records.iter().map(AgentRecord::to_agent).collect(),
            (None, Some(spec)) => generate(spec, &self.horizon, self.seed)?,
            (None, None) => Vec::new(),
        };
        let warnings = validate_scenario(&agents, &self.horizon)?;
        Ok(Scenario { horizon: self.horizon, config: self.engine_config(), agents, warnings })
    }
}

fn is_departure(anchor: &LookbackAnchor) -> bool {
    *anchor == LookbackAnchor::Departure
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    load_config(path)?.materialize()
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    ScenarioConfig::parse(&text)
}

impl Scenario {
    pub fn new(horizon: Horizon, config: EngineConfig, agents: Vec<Agent>) -> Result<Self, ValidationErrors> {
        let warnings = validate_scenario(&agents, &horizon)?;
        Ok(Scenario { horizon, config, agents, warnings })
    }

    pub fn run(&self) -> RunOutcome {
        run_horizon(&self.agents, &self.horizon, &self.config)
    }

    /// The explicit-agent file form of this scenario.
    pub fn to_config(&self) -> ScenarioConfig {
        ScenarioConfig {
            horizon: self.horizon,
            clustering: ClusteringConfig { k: self.config.k, max_iters: self.config.max_iters },
            mode: self.config.mode,
            seed: self.config.seed,
            lookback: self.config.anchor,
            agents: Some(self.agents.iter().map(AgentRecord::from_agent).collect()),
            generator: None,
        }
    }

    pub fn agent(&self, id: AgentId) -> Option<&Agent> {
        self.agents.iter().find(|a| a.id == id)
    }

    /// Same scenario with one agent's report replaced.
    pub fn with_report(&self, id: AgentId, valuation: Money, window: Window) -> Scenario {
        let mut next = self.clone();
        if let Some(a) = next.agents.iter_mut().find(|a| a.id == id) {
            a.reported_valuation = valuation;
            a.reported_window = window;
        }
        next
    }
}

/// Draws truthful agents. Executers get ids `0..n`, requesters `n..n+m`.
pub fn generate(spec: &GeneratorSpec, horizon: &Horizon, seed: u64) -> Result<Vec<Agent>, ScenarioError> {
    let bad = |msg: &str| Err(ScenarioError::Config(format!("generator: {msg}")));
    for (name, r) in [("executer_valuation", spec.executer_valuation), ("requester_valuation", spec.requester_valuation)] {
        if r.min < 0 || r.min > r.max {
            return bad(&format!("{name} needs 0 <= min <= max"));
        }
    }
    let field = spec.field;
    if field.width < 0 || field.height < 0 || field.spread < 0 {
        return bad("field dimensions must be non-negative");
    }
    if field.groups == 0 && spec.n_executers > 0 {
        return bad("field.groups must be at least 1");
    }
    if horizon.num_slots == 0 || horizon.kappa == 0 {
        return bad("horizon must have at least one slot and kappa >= 1");
    }
    let max_window = spec.max_window.unwrap_or(horizon.kappa).min(horizon.kappa);
    if max_window == 0 {
        return bad("max_window must be at least 1");
    }

    let mut rng = stream_rng(seed, GENERATOR_STREAM);
    let centers: Vec<(i64, i64)> = (0..field.groups)
        .map(|_| (rng.random_range(0..=field.width), rng.random_range(0..=field.height)))
        .collect();

    let window = |rng: &mut crate::rng::StemRng| {
        let arrival = rng.random_range(0..horizon.num_slots);
        let longest = max_window.min(horizon.num_slots - arrival);
        let len = rng.random_range(1..=longest);
        Window::new(arrival, arrival + len)
    };

    let mut agents = Vec::with_capacity(spec.n_executers + spec.m_requesters);
    for i in 0..spec.n_executers {
        let (cx, cy) = centers[i % centers.len()];
        let x = (cx + rng.random_range(-field.spread..=field.spread)).clamp(0, field.width);
        let y = (cy + rng.random_range(-field.spread..=field.spread)).clamp(0, field.height);
        let cost = Money::from(spec.executer_valuation.sample(&mut rng));
        let w = window(&mut rng);
        agents.push(Agent::executer(i as u64, cost, w, Point2D::from_ints(x, y)));
    }
    for i in 0..spec.m_requesters {
        let value = Money::from(spec.requester_valuation.sample(&mut rng));
        let w = window(&mut rng);
        agents.push(Agent::requester((spec.n_executers + i) as u64, value, w));
    }
    Ok(agents)
}
