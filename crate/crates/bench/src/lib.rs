//! Scenario builders shared by the benchmarks.

use stem_core::auction::{build_sorted_market, Bid, SortedMarket};
use stem_core::clustering::Point2D;
use stem_core::model::{AgentId, Horizon};
use stem_core::scenario::{generate, GeneratorSpec, IntRange, LocationField};
use stem_core::{Agent, Money};

/// `n` executers and `n / 10` requesters (at least one) over `horizon`.
pub fn population(n: usize, horizon: &Horizon, seed: u64) -> Vec<Agent> {
    let spec = GeneratorSpec {
        n_executers: n,
        m_requesters: (n / 10).max(1),
        executer_valuation: IntRange::new(0, 20),
        requester_valuation: IntRange::new(0, 30),
        max_window: None,
        field: LocationField::default(),
    };
    generate(&spec, horizon, seed).expect("benchmark generator spec is valid")
}

/// Executer locations of a population.
pub fn locations(agents: &[Agent]) -> Vec<(AgentId, Point2D)> {
    agents.iter().filter_map(|a| Some((a.id, a.location?))).collect()
}

/// A one-cluster market with `n` sellers and `n` buyers on a value ladder.
pub fn ladder(n: usize) -> SortedMarket {
    let sellers = (0..n).map(|i| Bid::new(AgentId(i as u64), Money::from(i as i64))).collect();
    let buyers = (0..n).map(|j| Bid::new(AgentId((n + j) as u64), Money::from((n - j) as i64))).collect();
    build_sorted_market(sellers, buyers)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builders() {
        let h = Horizon::new(10, 3);
        let agents = population(40, &h, 1);
        assert_eq!(agents.len(), 44);
        assert_eq!(locations(&agents).len(), 40);
        let m = ladder(4);
        assert_eq!(m.ask(1), Some(Money::from(0)));
        assert_eq!(m.bid(1), Some(Money::from(4)));
    }
}
