//! Unilateral misreport probes. One agent's report is replaced, everyone
//! else stays as given, the whole horizon is replayed and the agent's true
//! utility is compared with its truthful outcome.

use serde::Serialize;

use crate::model::{realized_utility, Agent, AgentId, Horizon, Trade, Window};
use crate::money::Money;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Bid,
    Arrival,
    Departure,
    ArrivalAndDeparture,
}

impl Dimension {
    pub const ALL: [Dimension; 4] =
        [Dimension::Bid, Dimension::Arrival, Dimension::Departure, Dimension::ArrivalAndDeparture];
}

/// A full report: valuation and window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Misreport {
    pub valuation: Money,
    pub window: Window,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeviationProbe {
    pub agent: AgentId,
    pub dimension: Dimension,
    pub grid: Vec<Misreport>,
}

/// A report the mechanism would accept from `agent`: a non-negative
/// valuation and a non-empty window inside the true one, no longer than
/// `kappa`.
pub fn is_feasible(agent: &Agent, report: &Misreport, horizon: &Horizon) -> bool {
    let (w, t) = (report.window, agent.true_window);
    !report.valuation.is_negative()
        && !w.is_empty()
        && w.arrival >= t.arrival
        && w.departure <= t.departure
        && w.len() <= horizon.kappa
}

impl DeviationProbe {
    /// Valuation misreports on the true window. The truthful value is
    /// dropped from the grid.
    pub fn bids(agent: &Agent, values: &[Money]) -> Self {
        let grid = values
            .iter()
            .filter(|&&v| v != agent.true_valuation && !v.is_negative())
            .map(|&valuation| Misreport { valuation, window: agent.true_window })
            .collect();
        DeviationProbe { agent: agent.id, dimension: Dimension::Bid, grid }
    }

    /// Every feasible later arrival with the true departure and valuation.
    pub fn arrivals(agent: &Agent) -> Self {
        let t = agent.true_window;
        let grid = (t.arrival + 1..t.departure)
            .map(|a| Misreport { valuation: agent.true_valuation, window: Window::new(a, t.departure) })
            .collect();
        DeviationProbe { agent: agent.id, dimension: Dimension::Arrival, grid }
    }

    /// Every feasible earlier departure with the true arrival and valuation.
    pub fn departures(agent: &Agent) -> Self {
        let t = agent.true_window;
        let grid = (t.arrival + 1..t.departure)
            .map(|d| Misreport { valuation: agent.true_valuation, window: Window::new(t.arrival, d) })
            .collect();
        DeviationProbe { agent: agent.id, dimension: Dimension::Departure, grid }
    }

    /// Every strictly smaller window, including the one-sided shrinks.
    pub fn windows(agent: &Agent) -> Self {
        let t = agent.true_window;
        let mut grid = Vec::new();
        for a in t.arrival..t.departure {
            for d in a + 1..=t.departure {
                let window = Window::new(a, d);
                if window != t {
                    grid.push(Misreport { valuation: agent.true_valuation, window });
                }
            }
        }
        DeviationProbe { agent: agent.id, dimension: Dimension::ArrivalAndDeparture, grid }
    }

    pub fn for_dimension(agent: &Agent, dimension: Dimension, values: &[Money]) -> Self {
        match dimension {
            Dimension::Bid => Self::bids(agent, values),
            Dimension::Arrival => Self::arrivals(agent),
            Dimension::Departure => Self::departures(agent),
            Dimension::ArrivalAndDeparture => Self::windows(agent),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeviationResult {
    pub agent: AgentId,
    pub dimension: Dimension,
    pub truthful_utility: Money,
    pub best_deviation_utility: Money,
    /// `None` when no candidate was evaluated.
    pub best_report: Option<Misreport>,
    pub gain: Money,
    /// Horizon replays spent, the truthful one excluded.
    pub runs: usize,
    /// Trades across the deviation replays.
    pub deviation_trades: usize,
}

/// Utility of the probed agent (by its true type) after replaying
/// `scenario` with its report replaced.
pub fn utility_under(scenario: &Scenario, agent: &Agent, report: &Misreport) -> (Money, usize) {
    let deviated = scenario.with_report(agent.id, report.valuation, report.window);
    let outcome = deviated.run();
    (realized_utility(agent, outcome.trades()), outcome.trades().len())
}

/// Like [`deviation_gain`] with the truthful trade list supplied, so one
/// truthful replay can serve many probes.
pub fn deviation_gain_against(scenario: &Scenario, probe: &DeviationProbe, truthful: &[Trade]) -> DeviationResult {
    let agent = scenario.agent(probe.agent).expect("probed agent belongs to the scenario");
    let truthful_utility = realized_utility(agent, truthful);
    let mut best: Option<(Money, Misreport)> = None;
    let mut runs = 0;
    let mut deviation_trades = 0;
    for report in probe.grid.iter().filter(|r| is_feasible(agent, r, &scenario.horizon)) {
        let (u, trades) = utility_under(scenario, agent, report);
        runs += 1;
        deviation_trades += trades;
        if best.is_none_or(|(b, _)| u > b) {
            best = Some((u, *report));
        }
    }
    let (best_deviation_utility, best_report) = match best {
        Some((u, r)) => (u, Some(r)),
        None => (truthful_utility, None),
    };
    DeviationResult {
        agent: probe.agent,
        dimension: probe.dimension,
        truthful_utility,
        best_deviation_utility,
        best_report,
        gain: best_deviation_utility - truthful_utility,
        runs,
        deviation_trades,
    }
}

/// Replays the horizon truthfully and once per feasible candidate and
/// returns the probed agent's best true utility. Infeasible candidates are
/// skipped.
pub fn deviation_gain(scenario: &Scenario, probe: &DeviationProbe) -> DeviationResult {
    let truthful = scenario.run();
    deviation_gain_against(scenario, probe, truthful.trades())
}
