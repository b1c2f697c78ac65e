//! McAfee's trade-reduction double auction as a static, unclustered
//! baseline, and a per-slot comparison against the online engine.
//!
//! This module deliberately does not reuse the pricing code in
//! [`crate::auction`]: it is the oracle that the corrected pricing mode is
//! checked against.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use crate::auction::Bid;
use crate::model::{is_active, Agent, AgentId, Horizon, Role, Slot, Trade};
use crate::money::Money;
use crate::online::RunOutcome;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct BaselineOutcome {
    pub trades: Vec<Trade>,
    pub price_buyer: Option<Money>,
    pub price_seller: Option<Money>,
    /// Buyer payments minus seller payments.
    pub surplus: Money,
}

/// McAfee (1992). Sort asks up and bids down, let `k` be the last position
/// with `bid >= ask` and `p` the midpoint of pair `k + 1`. If `p` lies in
/// `[ask_k, bid_k]` the first `k` pairs trade at `p`; otherwise the first
/// `k - 1` pairs trade, buyers paying `bid_k` and sellers receiving `ask_k`.
/// Without a pair `k + 1` on both sides nothing trades.
pub fn mcafee_clear(asks: &[Bid], bids: &[Bid], slot: Slot) -> BaselineOutcome {
    let mut asks = asks.to_vec();
    let mut bids = bids.to_vec();
    asks.sort_by_key(|b| (b.value, b.id));
    bids.sort_by_key(|b| (std::cmp::Reverse(b.value), b.id));

    let pairs = asks.len().min(bids.len());
    let k = (0..pairs).rev().find(|&i| bids[i].value >= asks[i].value).map(|i| i + 1);
    let Some(k) = k else {
        return BaselineOutcome::default();
    };
    if k >= pairs {
        return BaselineOutcome::default();
    }
    let p = Money::midpoint(bids[k].value, asks[k].value);
    let (ask_k, bid_k) = (asks[k - 1].value, bids[k - 1].value);
    let (count, seller_price, buyer_price) =
        if ask_k <= p && p <= bid_k { (k, p, p) } else { (k - 1, ask_k, bid_k) };

    let trades: Vec<Trade> = (0..count)
        .map(|i| Trade {
            executer: asks[i].id,
            requester: bids[i].id,
            slot,
            cluster: 0,
            seller_price,
            buyer_price,
        })
        .collect();
    if trades.is_empty() {
        return BaselineOutcome::default();
    }
    let surplus = trades.iter().map(Trade::budget_surplus).sum();
    BaselineOutcome {
        trades,
        price_buyer: Some(buyer_price),
        price_seller: Some(seller_price),
        surplus,
    }
}

/// The baseline run over a horizon: every slot, the reported-active agents
/// that the baseline has not matched yet are cleared by [`mcafee_clear`] as
/// one market, ignoring location.
pub fn run_baseline(agents: &[Agent], horizon: &Horizon) -> Vec<BaselineOutcome> {
    let mut matched = BTreeSet::new();
    horizon
        .slots()
        .map(|slot| {
            let mut asks = Vec::new();
            let mut bids = Vec::new();
            for a in agents.iter().filter(|a| is_active(a, slot) && !matched.contains(&a.id)) {
                let bid = Bid::new(a.id, a.reported_valuation);
                match a.role {
                    Role::Executer => asks.push(bid),
                    Role::Requester => bids.push(bid),
                }
            }
            let outcome = mcafee_clear(&asks, &bids, slot);
            for t in &outcome.trades {
                matched.insert(t.executer);
                matched.insert(t.requester);
            }
            outcome
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Metrics {
    pub trades: i64,
    /// True value minus true cost over all trades.
    pub total_surplus: Money,
    pub budget_surplus: Money,
    /// Mean true utility over trading agents; zero without trades.
    pub mean_winner_utility: Money,
}

impl Metrics {
    fn of(trades: &[Trade], agents: &HashMap<AgentId, &Agent>) -> Self {
        let mut m = Metrics { trades: trades.len() as i64, ..Default::default() };
        let mut utility = Money::ZERO;
        for t in trades {
            let value = agents[&t.requester].true_valuation;
            let cost = agents[&t.executer].true_valuation;
            m.total_surplus += value - cost;
            m.budget_surplus += t.budget_surplus();
            utility += (value - t.buyer_price) + (t.seller_price - cost);
        }
        if !trades.is_empty() {
            m.mean_winner_utility = Money::from_rational(utility.rational() / (2 * trades.len() as i128));
        }
        m
    }

    fn minus(&self, other: &Metrics) -> Metrics {
        Metrics {
            trades: self.trades - other.trades,
            total_surplus: self.total_surplus - other.total_surplus,
            budget_surplus: self.budget_surplus - other.budget_surplus,
            mean_winner_utility: self.mean_winner_utility - other.mean_winner_utility,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SlotComparison {
    pub slot: Slot,
    pub stem: Metrics,
    pub baseline: Metrics,
    /// `stem - baseline`.
    pub delta: Metrics,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComparisonReport {
    pub slots: Vec<SlotComparison>,
    pub stem: Metrics,
    pub baseline: Metrics,
    pub delta: Metrics,
}

pub fn compare(agents: &[Agent], stem: &RunOutcome, baseline: &[BaselineOutcome]) -> ComparisonReport {
    let by_id: HashMap<AgentId, &Agent> = agents.iter().map(|a| (a.id, a)).collect();
    let slots = stem
        .reports
        .iter()
        .zip(baseline)
        .map(|(report, base)| {
            let stem_trades: Vec<Trade> = report.trades().cloned().collect();
            let stem = Metrics::of(&stem_trades, &by_id);
            let baseline = Metrics::of(&base.trades, &by_id);
            SlotComparison { slot: report.slot, delta: stem.minus(&baseline), stem, baseline }
        })
        .collect();
    let all_base: Vec<Trade> = baseline.iter().flat_map(|b| b.trades.iter().cloned()).collect();
    let stem_total = Metrics::of(stem.trades(), &by_id);
    let base_total = Metrics::of(&all_base, &by_id);
    ComparisonReport { slots, delta: stem_total.minus(&base_total), stem: stem_total, baseline: base_total }
}
