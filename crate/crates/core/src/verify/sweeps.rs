//! Batch sweeps: bid truthfulness on single-slot markets, the literal-mode
//! degeneracy check, and window/bid misreports over multi-slot scenarios
//! with counterexample shrinking.

use rayon::prelude::*;
use serde::Serialize;

use crate::auction::PricingMode;
use crate::model::{realized_utility, Agent, AgentId, Role};
use crate::money::Money;
use crate::rng::{stream_rng, SAMPLER_STREAM};
use crate::scenario::{Scenario, ScenarioConfig, ScenarioError};

use super::deviation::{deviation_gain_against, utility_under, DeviationProbe, DeviationResult, Dimension, Misreport};
use super::sample::{bid_grid, random_market, MarketParams};

/// Largest grid used for valuation probes.
pub const MAX_GRID_POINTS: usize = 50;

/// One probe outcome together with the seed of its scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProbeRecord {
    pub seed: u64,
    pub result: DeviationResult,
}

fn max_valuation(agents: &[Agent]) -> Money {
    agents.iter().map(|a| a.true_valuation).max().unwrap_or(Money::ZERO)
}

fn keep_worst(worst: &mut Option<ProbeRecord>, candidate: ProbeRecord) {
    if worst.as_ref().is_none_or(|w| candidate.result.gain > w.result.gain) {
        *worst = Some(candidate);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TruthfulnessReport {
    pub mode: PricingMode,
    pub markets: usize,
    pub probes: usize,
    pub runs: usize,
    pub truthful_trades: usize,
    pub deviation_trades: usize,
    /// Zero when nothing was probed.
    pub max_gain: Money,
    pub worst: Option<ProbeRecord>,
    /// Probes with positive gain.
    pub violations: Vec<ProbeRecord>,
    /// No trade in any replay, truthful or not: the gain bound says nothing.
    pub vacuous: bool,
}

impl TruthfulnessReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.max_gain <= Money::ZERO
    }
}

/// Probes every agent of `markets` seeded single-slot markets with a bid
/// grid over `[0, 2 * max valuation]`. Market `i` uses seed `base_seed + i`.
pub fn bid_truthfulness_sweep(params: &MarketParams, mode: PricingMode, markets: usize, base_seed: u64) -> TruthfulnessReport {
    let per_market: Vec<(u64, usize, Vec<DeviationResult>)> = (0..markets as u64)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed.wrapping_add(i);
            let scenario = random_market(params, mode, seed);
            let truthful = scenario.run();
            let grid = bid_grid(max_valuation(&scenario.agents), MAX_GRID_POINTS);
            let results = scenario
                .agents
                .iter()
                .map(|a| deviation_gain_against(&scenario, &DeviationProbe::bids(a, &grid), truthful.trades()))
                .collect();
            (seed, truthful.trades().len(), results)
        })
        .collect();

    let mut report = TruthfulnessReport {
        mode,
        markets,
        probes: 0,
        runs: 0,
        truthful_trades: 0,
        deviation_trades: 0,
        max_gain: Money::ZERO,
        worst: None,
        violations: Vec::new(),
        vacuous: true,
    };
    for (seed, trades, results) in per_market {
        report.truthful_trades += trades;
        for result in results {
            report.probes += 1;
            report.runs += result.runs;
            report.deviation_trades += result.deviation_trades;
            let record = ProbeRecord { seed, result };
            if record.result.gain > Money::ZERO {
                report.violations.push(record.clone());
            }
            keep_worst(&mut report.worst, record);
        }
    }
    report.max_gain = report.worst.as_ref().map_or(Money::ZERO, |w| w.result.gain);
    report.vacuous = report.truthful_trades == 0 && report.deviation_trades == 0;
    report
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DegeneracyReport {
    pub markets: usize,
    /// Markets without a losing pair, where no price forms in either mode.
    pub boundary_markets: usize,
    pub literal_trades: usize,
    /// Seeds of markets where the literal rule traded.
    pub literal_trading_seeds: Vec<u64>,
    /// Markets with a profitable pair whose trade-reduction price is formable.
    pub formable_markets: usize,
    pub corrected_trades: usize,
    /// Seeds of formable markets where the corrected rule did not trade.
    pub unmet_formable_seeds: Vec<u64>,
}

impl DegeneracyReport {
    pub fn passed(&self) -> bool {
        self.literal_trading_seeds.is_empty() && self.unmet_formable_seeds.is_empty()
    }
}

/// Reads a market directly: `Some(true)` when a losing pair exists and the
/// corrected rule has at least one pair to trade, `Some(false)` when a
/// losing pair exists but none can trade, `None` for a boundary market.
fn formable(agents: &[Agent]) -> Option<bool> {
    let mut asks: Vec<Money> = agents.iter().filter(|a| a.role == Role::Executer).map(|a| a.reported_valuation).collect();
    let mut bids: Vec<Money> = agents.iter().filter(|a| a.role == Role::Requester).map(|a| a.reported_valuation).collect();
    asks.sort();
    bids.sort_by(|a, b| b.cmp(a));
    let losing = asks.iter().zip(&bids).position(|(a, b)| b < a)?;
    Some(match losing {
        0 => false,
        1 => {
            let price = Money::midpoint(asks[1], bids[1]);
            asks[0] <= price && price <= bids[0]
        }
        _ => true,
    })
}

/// Clears the same seeded single-slot markets under both pricing rules.
pub fn literal_degeneracy_sweep(params: &MarketParams, markets: usize, base_seed: u64) -> DegeneracyReport {
    let rows: Vec<(u64, Option<bool>, usize, usize)> = (0..markets as u64)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed.wrapping_add(i);
            let literal = random_market(params, PricingMode::Literal, seed);
            let corrected = random_market(params, PricingMode::McAfeeCorrected, seed);
            let form = formable(&literal.agents);
            (seed, form, literal.run().trades().len(), corrected.run().trades().len())
        })
        .collect();

    let mut report = DegeneracyReport {
        markets,
        boundary_markets: 0,
        literal_trades: 0,
        literal_trading_seeds: Vec::new(),
        formable_markets: 0,
        corrected_trades: 0,
        unmet_formable_seeds: Vec::new(),
    };
    for (seed, form, literal, corrected) in rows {
        report.literal_trades += literal;
        report.corrected_trades += corrected;
        if literal > 0 {
            report.literal_trading_seeds.push(seed);
        }
        match form {
            None => report.boundary_markets += 1,
            Some(true) => {
                report.formable_markets += 1;
                if corrected == 0 {
                    report.unmet_formable_seeds.push(seed);
                }
            }
            Some(false) => {}
        }
    }
    report
}

/// A profitable misreport reduced to a small scenario. `scenario` holds the
/// truthful reports; applying `report` to `agent` reproduces `gain`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub seed: u64,
    pub agent: AgentId,
    pub dimension: Dimension,
    pub report: Misreport,
    pub truthful_utility: Money,
    pub deviation_utility: Money,
    pub gain: Money,
    pub agents_before_shrinking: usize,
    pub scenario: ScenarioConfig,
}

/// The gain of `report` for `agent` in `scenario`, both replays included.
fn gain_of(scenario: &Scenario, agent: &Agent, report: &Misreport) -> (Money, Money) {
    let truthful = realized_utility(agent, scenario.run().trades());
    let (deviated, _) = utility_under(scenario, agent, report);
    (truthful, deviated)
}

/// Greedily drops other agents while the misreport stays profitable.
pub fn shrink(scenario: &Scenario, agent: AgentId, report: &Misreport) -> Scenario {
    let probed = scenario.agent(agent).expect("probed agent belongs to the scenario").clone();
    let mut current = scenario.clone();
    loop {
        let mut removed = false;
        let ids: Vec<AgentId> = current.agents.iter().map(|a| a.id).filter(|&id| id != agent).collect();
        for id in ids {
            let mut candidate = current.clone();
            candidate.agents.retain(|a| a.id != id);
            let (truthful, deviated) = gain_of(&candidate, &probed, report);
            if deviated > truthful {
                current = candidate;
                removed = true;
            }
        }
        if !removed {
            break;
        }
    }
    current.warnings.clear();
    current
}

/// Rebuilds a counterexample's scenario and recomputes its gain.
pub fn replay(counterexample: &Counterexample) -> Result<Money, ScenarioError> {
    let scenario = counterexample.scenario.materialize()?;
    let agent = scenario
        .agent(counterexample.agent)
        .ok_or_else(|| ScenarioError::Config(format!("agent {} missing", counterexample.agent.0)))?
        .clone();
    let (truthful, deviated) = gain_of(&scenario, &agent, &counterexample.report);
    Ok(deviated - truthful)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DimensionSummary {
    pub dimension: Dimension,
    pub probes: usize,
    pub runs: usize,
    pub positive: usize,
    /// Largest observed gain; zero when nothing was probed.
    pub max_gain: Money,
    pub worst: Option<ProbeRecord>,
    pub counterexample: Option<Counterexample>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeviationSummary {
    pub scenarios: usize,
    pub samples_per_scenario: usize,
    pub dimensions: Vec<DimensionSummary>,
}

impl DeviationSummary {
    pub fn dimension(&self, dimension: Dimension) -> Option<&DimensionSummary> {
        self.dimensions.iter().find(|d| d.dimension == dimension)
    }

    /// Every positive gain comes with a counterexample.
    pub fn is_documented(&self) -> bool {
        self.dimensions.iter().all(|d| d.positive == 0 || d.counterexample.is_some())
    }
}

/// Up to `samples` agents of `scenario`, drawn from the sampler stream of
/// its seed, in id order. `None` probes everyone.
pub fn sample_agents(scenario: &Scenario, samples: Option<usize>) -> Vec<&Agent> {
    let n = scenario.agents.len();
    let Some(samples) = samples.filter(|&s| s < n) else {
        return scenario.agents.iter().collect();
    };
    let mut rng = stream_rng(scenario.config.seed, SAMPLER_STREAM);
    let mut picked = rand::seq::index::sample(&mut rng, n, samples).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| &scenario.agents[i]).collect()
}

/// Probes sampled agents of every scenario along `dimensions`, keeps the
/// largest gain per dimension and shrinks the largest positive one.
pub fn online_deviation_sweep(batch: &[Scenario], samples: Option<usize>, dimensions: &[Dimension]) -> DeviationSummary {
    let per_scenario: Vec<Vec<ProbeRecord>> = batch
        .par_iter()
        .map(|scenario| {
            let truthful = scenario.run();
            let grid = bid_grid(max_valuation(&scenario.agents), MAX_GRID_POINTS);
            let mut out = Vec::new();
            for agent in sample_agents(scenario, samples) {
                for &d in dimensions {
                    let probe = DeviationProbe::for_dimension(agent, d, &grid);
                    let result = deviation_gain_against(scenario, &probe, truthful.trades());
                    out.push(ProbeRecord { seed: scenario.config.seed, result });
                }
            }
            out
        })
        .collect();

    let mut summaries: Vec<(DimensionSummary, Option<usize>)> = dimensions
        .iter()
        .map(|&dimension| {
            let s = DimensionSummary {
                dimension,
                probes: 0,
                runs: 0,
                positive: 0,
                max_gain: Money::ZERO,
                worst: None,
                counterexample: None,
            };
            (s, None)
        })
        .collect();
    for (index, records) in per_scenario.into_iter().enumerate() {
        for record in records {
            let (summary, worst_index) = summaries
                .iter_mut()
                .find(|(s, _)| s.dimension == record.result.dimension)
                .expect("dimension was requested");
            summary.probes += 1;
            summary.runs += record.result.runs;
            if record.result.gain > Money::ZERO {
                summary.positive += 1;
            }
            if summary.worst.as_ref().is_none_or(|w| record.result.gain > w.result.gain) {
                *worst_index = Some(index);
            }
            keep_worst(&mut summary.worst, record);
        }
    }

    let dimensions = summaries
        .into_par_iter()
        .map(|(mut summary, index)| {
            summary.max_gain = summary.worst.as_ref().map_or(Money::ZERO, |w| w.result.gain);
            if let (Some(worst), Some(index)) = (&summary.worst, index) {
                if let (true, Some(report)) = (worst.result.gain > Money::ZERO, worst.result.best_report) {
                    let scenario = &batch[index];
                    let small = shrink(scenario, worst.result.agent, &report);
                    let agent = small.agent(worst.result.agent).expect("probed agent is never removed").clone();
                    let (truthful, deviated) = gain_of(&small, &agent, &report);
                    summary.counterexample = Some(Counterexample {
                        seed: worst.seed,
                        agent: agent.id,
                        dimension: summary.dimension,
                        report,
                        truthful_utility: truthful,
                        deviation_utility: deviated,
                        gain: deviated - truthful,
                        agents_before_shrinking: scenario.agents.len(),
                        scenario: small.to_config(),
                    });
                }
            }
            summary
        })
        .collect();

    DeviationSummary { scenarios: batch.len(), samples_per_scenario: samples.unwrap_or(usize::MAX), dimensions }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::Point2D;
    use crate::model::{Horizon, Window};
    use crate::online::{EngineConfig, LookbackAnchor};
    use crate::verify::sample::{random_scenario, SweepParams};

    fn m(v: i64) -> Money {
        Money::from(v)
    }

    #[test]
    fn formability_reading() {
        let w = Window::new(0, 1);
        let at = Point2D::from_ints(0, 0);
        let build = |asks: &[i64], bids: &[i64]| -> Vec<Agent> {
            let mut v: Vec<Agent> = asks.iter().enumerate().map(|(i, &a)| Agent::executer(i as u64, m(a), w, at)).collect();
            v.extend(bids.iter().enumerate().map(|(j, &b)| Agent::requester(50 + j as u64, m(b), w)));
            v
        };
        assert_eq!(formable(&build(&[3, 6, 9], &[10, 8, 5])), Some(true));
        assert_eq!(formable(&build(&[3, 9], &[10, 5])), Some(true));
        assert_eq!(formable(&build(&[3, 20], &[4, 1])), Some(false));
        assert_eq!(formable(&build(&[9], &[5])), Some(false));
        assert_eq!(formable(&build(&[1, 2], &[10])), None);
    }

    #[test]
    fn small_bid_sweep_is_clean() {
        let r = bid_truthfulness_sweep(&MarketParams::default(), PricingMode::McAfeeCorrected, 20, 0);
        assert!(r.passed(), "{:?}", r.worst);
        assert!(!r.vacuous);
        assert!(r.probes > 20);
    }

    #[test]
    fn literal_bid_sweep_is_vacuous() {
        let r = bid_truthfulness_sweep(&MarketParams::default(), PricingMode::Literal, 10, 0);
        assert_eq!(r.truthful_trades, 0);
        assert!(r.vacuous);
    }

    #[test]
    fn degeneracy_on_a_few_markets() {
        let r = literal_degeneracy_sweep(&MarketParams::default(), 30, 5);
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.literal_trades, 0);
    }

    #[test]
    fn sampling_is_seeded() {
        let s = random_scenario(&SweepParams::default(), PricingMode::McAfeeCorrected, 9);
        let a: Vec<AgentId> = sample_agents(&s, Some(3)).iter().map(|a| a.id).collect();
        let b: Vec<AgentId> = sample_agents(&s, Some(3)).iter().map(|a| a.id).collect();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3.min(s.agents.len()));
        assert_eq!(sample_agents(&s, None).len(), s.agents.len());
    }

    #[test]
    fn single_slot_horizon_has_nothing_to_shrink() {
        let w = Window::new(0, 1);
        let agents = vec![
            Agent::executer(0, m(3), w, Point2D::from_ints(0, 0)),
            Agent::requester(1, m(10), w),
        ];
        let s = Scenario::new(Horizon::new(1, 1), EngineConfig::default(), agents).unwrap();
        let windows = [Dimension::Arrival, Dimension::Departure, Dimension::ArrivalAndDeparture];
        let r = online_deviation_sweep(&[s], None, &windows);
        for d in r.dimensions {
            assert_eq!((d.runs, d.max_gain, d.positive), (0, m(0), 0));
        }
    }

    #[test]
    fn counterexamples_replay() {
        for anchor in [LookbackAnchor::Departure, LookbackAnchor::Arrival] {
            let batch: Vec<Scenario> = (0..40)
                .map(|seed| {
                    let mut s = random_scenario(&SweepParams::default(), PricingMode::McAfeeCorrected, seed);
                    s.config.anchor = anchor;
                    s
                })
                .collect();
            let r = online_deviation_sweep(&batch, Some(4), &Dimension::ALL);
            assert!(r.is_documented());
            for d in &r.dimensions {
                if let Some(c) = &d.counterexample {
                    assert!(c.gain > Money::ZERO);
                    assert_eq!(c.scenario.lookback, anchor);
                    assert_eq!(replay(c).unwrap(), c.gain);
                    assert!(c.scenario.agents.as_ref().unwrap().len() <= c.agents_before_shrinking);
                }
            }
        }
    }
}
