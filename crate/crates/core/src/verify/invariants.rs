//! Per-run invariant checks: weak budget balance, individual rationality,
//! quote monotonicity, trades inside windows and one trade per agent.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::Serialize;

use crate::model::{realized_utility, Agent, AgentId, Role, Slot};
use crate::money::Money;
use crate::online::RunOutcome;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// A cluster or slot where buyers paid less than sellers received.
    BudgetBalance,
    /// A trade price on the wrong side of the agent's report.
    ReportRationality,
    /// A truthful winner with negative true utility.
    UtilityRationality,
    QuoteMonotonicity,
    OutsideWindow,
    RepeatedTrade,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Reproduces the scenario.
    pub seed: u64,
    pub kind: ViolationKind,
    pub slot: Option<Slot>,
    pub agent: Option<AgentId>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct InvariantReport {
    pub scenarios: usize,
    pub cluster_slots: usize,
    pub trades: usize,
    pub violations: Vec<Violation>,
}

impl InvariantReport {
    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn merge(mut self, other: InvariantReport) -> InvariantReport {
        self.scenarios += other.scenarios;
        self.cluster_slots += other.cluster_slots;
        self.trades += other.trades;
        self.violations.extend(other.violations);
        self
    }
}

/// Checks one finished run of `scenario`.
pub fn check_run(scenario: &Scenario, outcome: &RunOutcome) -> InvariantReport {
    let seed = scenario.config.seed;
    let by_id: HashMap<AgentId, &Agent> = scenario.agents.iter().map(|a| (a.id, a)).collect();
    let mut violations = Vec::new();
    let mut push = |kind, slot, agent, detail: String| violations.push(Violation { seed, kind, slot, agent, detail });
    let mut cluster_slots = 0;

    for report in &outcome.reports {
        let mut slot_surplus = Money::ZERO;
        for cluster in &report.clusters {
            cluster_slots += 1;
            let paid: Money = cluster.trades.iter().map(|t| t.buyer_price).sum();
            let received: Money = cluster.trades.iter().map(|t| t.seller_price).sum();
            let surplus = paid - received;
            slot_surplus += surplus;
            if surplus.is_negative() || surplus != cluster.budget_surplus {
                push(
                    ViolationKind::BudgetBalance,
                    Some(report.slot),
                    None,
                    format!("cluster {}: payments {paid} - {received}, reported {}", cluster.cluster, cluster.budget_surplus),
                );
            }
        }
        if slot_surplus.is_negative() || slot_surplus != report.totals.budget_surplus {
            push(
                ViolationKind::BudgetBalance,
                Some(report.slot),
                None,
                format!("slot surplus {slot_surplus}, reported {}", report.totals.budget_surplus),
            );
        }
    }

    let trades = outcome.trades();
    let mut seen: BTreeMap<AgentId, usize> = BTreeMap::new();
    for t in trades {
        if t.buyer_price < t.seller_price {
            push(
                ViolationKind::BudgetBalance,
                Some(t.slot),
                None,
                format!("trade {}-{} pays {} for {}", t.executer.0, t.requester.0, t.buyer_price, t.seller_price),
            );
        }
        for (id, price) in [(t.executer, t.seller_price), (t.requester, t.buyer_price)] {
            *seen.entry(id).or_default() += 1;
            let Some(agent) = by_id.get(&id) else {
                push(ViolationKind::RepeatedTrade, Some(t.slot), Some(id), "unknown agent traded".into());
                continue;
            };
            let rational = match agent.role {
                Role::Executer => price >= agent.reported_valuation,
                Role::Requester => price <= agent.reported_valuation,
            };
            if !rational {
                push(
                    ViolationKind::ReportRationality,
                    Some(t.slot),
                    Some(id),
                    format!("price {price} against report {}", agent.reported_valuation),
                );
            }
            if !agent.reported_window.contains(t.slot) {
                push(
                    ViolationKind::OutsideWindow,
                    Some(t.slot),
                    Some(id),
                    format!("window [{}, {})", agent.reported_window.arrival, agent.reported_window.departure),
                );
            }
        }
    }
    for (&id, &n) in &seen {
        if n > 1 {
            push(ViolationKind::RepeatedTrade, None, Some(id), format!("{n} trades"));
        }
    }
    for agent in scenario.agents.iter().filter(|a| a.is_truthful() && seen.contains_key(&a.id)) {
        let u = realized_utility(agent, trades);
        if u.is_negative() {
            push(ViolationKind::UtilityRationality, None, Some(agent.id), format!("true utility {u}"));
        }
    }

    for (&id, log) in &outcome.state.quote_log {
        let Some(agent) = by_id.get(&id) else { continue };
        for pair in log.windows(2) {
            let ((t0, q0), (t1, q1)) = (pair[0], pair[1]);
            let ordered = match agent.role {
                Role::Executer => q1 <= q0,
                Role::Requester => q1 >= q0,
            };
            if t1 <= t0 || !ordered {
                push(
                    ViolationKind::QuoteMonotonicity,
                    Some(t1),
                    Some(id),
                    format!("{q0} at slot {t0} then {q1} at slot {t1}"),
                );
            }
        }
    }

    InvariantReport { scenarios: 1, cluster_slots, trades: trades.len(), violations }
}

/// Runs and checks every scenario. Replays run in parallel; the report
/// keeps batch order.
pub fn sweep_invariants(batch: &[Scenario]) -> InvariantReport {
    batch
        .par_iter()
        .map(|s| check_run(s, &s.run()))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(InvariantReport::default(), InvariantReport::merge)
}
