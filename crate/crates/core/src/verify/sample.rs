//! Seeded random scenarios for the sweeps. Every scenario is a pure
//! function of its parameters, pricing mode and seed, so a violation is
//! reproduced by the seed alone.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::auction::PricingMode;
use crate::clustering::Point2D;
use crate::model::{Agent, Horizon, Window};
use crate::money::Money;
use crate::online::EngineConfig;
use crate::rng::{stream_rng, SHAPE_STREAM};
use crate::scenario::{generate, GeneratorSpec, IntRange, LocationField, Scenario};

/// Upper bounds for multi-slot random scenarios. Each bound is drawn
/// uniformly from `1..=max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepParams {
    pub max_executers: usize,
    pub max_requesters: usize,
    pub max_slots: u32,
    pub max_k: usize,
    pub max_kappa: u32,
    pub executer_valuation: IntRange,
    pub requester_valuation: IntRange,
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams {
            max_executers: 50,
            max_requesters: 10,
            max_slots: 20,
            max_k: 4,
            max_kappa: 5,
            executer_valuation: IntRange::new(0, 20),
            requester_valuation: IntRange::new(0, 25),
        }
    }
}

/// Single-slot markets: one cluster, every agent fresh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarketParams {
    pub max_sellers: usize,
    pub max_buyers: usize,
    pub max_value: i64,
}

impl Default for MarketParams {
    fn default() -> Self {
        MarketParams { max_sellers: 8, max_buyers: 8, max_value: 20 }
    }
}

pub fn random_scenario(params: &SweepParams, mode: PricingMode, seed: u64) -> Scenario {
    let mut rng = stream_rng(seed, SHAPE_STREAM);
    let num_slots = rng.random_range(1..=params.max_slots.max(1));
    let kappa = rng.random_range(1..=params.max_kappa.clamp(1, num_slots));
    let k = rng.random_range(1..=params.max_k.max(1));
    let spec = GeneratorSpec {
        n_executers: rng.random_range(1..=params.max_executers.max(1)),
        m_requesters: rng.random_range(1..=params.max_requesters.max(1)),
        executer_valuation: params.executer_valuation,
        requester_valuation: params.requester_valuation,
        max_window: None,
        field: LocationField { groups: rng.random_range(1..=4), ..LocationField::default() },
    };
    let horizon = Horizon::new(num_slots, kappa);
    let agents = generate(&spec, &horizon, seed).expect("sweep parameters are valid");
    let config = EngineConfig { k, mode, seed, ..EngineConfig::default() };
    Scenario::new(horizon, config, agents).expect("generated agents validate")
}

/// A one-slot market cleared as a single cluster.
pub fn random_market(params: &MarketParams, mode: PricingMode, seed: u64) -> Scenario {
    let mut rng = stream_rng(seed, SHAPE_STREAM);
    let sellers = rng.random_range(1..=params.max_sellers.max(1));
    let buyers = rng.random_range(1..=params.max_buyers.max(1));
    let window = Window::new(0, 1);
    let mut agents = Vec::with_capacity(sellers + buyers);
    for i in 0..sellers {
        let cost = Money::from(rng.random_range(0..=params.max_value));
        let at = Point2D::from_ints(rng.random_range(0..=100), rng.random_range(0..=100));
        agents.push(Agent::executer(i as u64, cost, window, at));
    }
    for j in 0..buyers {
        let value = Money::from(rng.random_range(0..=params.max_value));
        agents.push(Agent::requester((sellers + j) as u64, value, window));
    }
    let config = EngineConfig { k: 1, mode, seed, ..EngineConfig::default() };
    Scenario::new(Horizon::new(1, 1), config, agents).expect("market validates")
}

/// Evenly spaced values over `[0, 2 * max_valuation]`, at most `max_points`
/// of them, endpoints included. Integer steps when they fit.
pub fn bid_grid(max_valuation: Money, max_points: usize) -> Vec<Money> {
    let top = max_valuation + max_valuation;
    if top <= Money::ZERO || max_points < 2 {
        return vec![Money::ZERO];
    }
    let span = top.rational();
    let points = if span.is_integer() {
        let whole = usize::try_from(span.to_integer()).unwrap_or(usize::MAX).saturating_add(1);
        whole.min(max_points)
    } else {
        max_points
    };
    let last = (points - 1) as i128;
    (0..points)
        .map(|i| Money::from_rational(span * crate::exact::Rational::from_integer(i as i128) / last))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenarios_are_reproducible_from_seed() {
        let p = SweepParams::default();
        let a = random_scenario(&p, PricingMode::McAfeeCorrected, 17);
        let b = random_scenario(&p, PricingMode::McAfeeCorrected, 17);
        assert_eq!(a, b);
        assert_ne!(a, random_scenario(&p, PricingMode::McAfeeCorrected, 18));
    }

    #[test]
    fn scenarios_respect_bounds() {
        let p = SweepParams::default();
        for seed in 0..200 {
            let s = random_scenario(&p, PricingMode::McAfeeCorrected, seed);
            let sellers = s.agents.iter().filter(|a| a.is_executer()).count();
            assert!((1..=50).contains(&sellers));
            assert!((1..=10).contains(&(s.agents.len() - sellers)));
            assert!((1..=20).contains(&s.horizon.num_slots));
            assert!((1..=5.min(s.horizon.num_slots)).contains(&s.horizon.kappa));
            assert!((1..=4).contains(&s.config.k));
            assert_eq!(s.config.seed, seed);
        }
    }

    #[test]
    fn markets_are_single_slot() {
        let s = random_market(&MarketParams::default(), PricingMode::Literal, 3);
        assert_eq!(s.horizon, Horizon::new(1, 1));
        assert_eq!(s.config.k, 1);
        assert!(s.agents.iter().all(|a| a.true_window == Window::new(0, 1)));
    }

    #[test]
    fn grids() {
        let g = bid_grid(Money::from(10), 50);
        assert_eq!(g.len(), 21);
        assert_eq!(g[0], Money::ZERO);
        assert_eq!(g[20], Money::from(20));

        let g = bid_grid(Money::from(100), 50);
        assert_eq!(g.len(), 50);
        assert_eq!(*g.last().unwrap(), Money::from(200));

        assert_eq!(bid_grid(Money::ZERO, 50), vec![Money::ZERO]);
        let g = bid_grid("3/4".parse().unwrap(), 7);
        assert_eq!(g.len(), 7);
        assert_eq!(g[1], "1/4".parse().unwrap());
    }
}
