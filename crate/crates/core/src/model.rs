//! Agents, the slotted time model, trades and utilities.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::clustering::Point2D;
use crate::money::Money;

/// Index of a discrete time slot, `0..num_slots`.
pub type Slot = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u64);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// Performs the sensing task for a payment (seller).
    #[serde(alias = "seller")]
    Executer,
    /// Pays for the completed task (buyer).
    #[serde(alias = "buyer")]
    Requester,
}

/// Half-open slot interval `[arrival, departure)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    pub arrival: Slot,
    pub departure: Slot,
}

impl Window {
    pub fn new(arrival: Slot, departure: Slot) -> Self {
        Window { arrival, departure }
    }

    pub fn contains(&self, slot: Slot) -> bool {
        self.arrival <= slot && slot < self.departure
    }

    pub fn len(&self) -> u32 {
        self.departure.saturating_sub(self.arrival)
    }

    pub fn is_empty(&self) -> bool {
        self.departure <= self.arrival
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Agent {
    pub id: AgentId,
    pub role: Role,
    /// Private cost (executer) or private value (requester).
    pub true_valuation: Money,
    pub reported_valuation: Money,
    pub true_window: Window,
    pub reported_window: Window,
    /// Present iff the agent is an executer.
    pub location: Option<Point2D>,
}

impl Agent {
    /// A truthful executer.
    pub fn executer(id: u64, cost: Money, window: Window, location: Point2D) -> Self {
        Agent {
            id: AgentId(id),
            role: Role::Executer,
            true_valuation: cost,
            reported_valuation: cost,
            true_window: window,
            reported_window: window,
            location: Some(location),
        }
    }

    /// A truthful requester.
    pub fn requester(id: u64, value: Money, window: Window) -> Self {
        Agent {
            id: AgentId(id),
            role: Role::Requester,
            true_valuation: value,
            reported_valuation: value,
            true_window: window,
            reported_window: window,
            location: None,
        }
    }

    pub fn with_report(mut self, valuation: Money, window: Window) -> Self {
        self.reported_valuation = valuation;
        self.reported_window = window;
        self
    }

    pub fn is_executer(&self) -> bool {
        self.role == Role::Executer
    }

    pub fn is_truthful(&self) -> bool {
        self.true_valuation == self.reported_valuation && self.true_window == self.reported_window
    }
}

/// Active iff `reported_arrival <= slot < reported_departure`.
pub fn is_active(agent: &Agent, slot: Slot) -> bool {
    agent.reported_window.contains(slot)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Horizon {
    pub num_slots: u32,
    /// Longest permitted `departure - arrival`.
    pub kappa: u32,
}

impl Horizon {
    pub fn new(num_slots: u32, kappa: u32) -> Self {
        Horizon { num_slots, kappa }
    }

    pub fn slots(&self) -> std::ops::Range<Slot> {
        0..self.num_slots
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trade {
    pub executer: AgentId,
    pub requester: AgentId,
    pub slot: Slot,
    pub cluster: usize,
    /// Received by the executer.
    pub seller_price: Money,
    /// Paid by the requester.
    pub buyer_price: Money,
}

impl Trade {
    pub fn budget_surplus(&self) -> Money {
        self.buyer_price - self.seller_price
    }
}

pub fn utility_executer(paid: Money, true_cost: Money, won: bool) -> Money {
    if won {
        paid - true_cost
    } else {
        Money::ZERO
    }
}

pub fn utility_requester(paid: Money, true_value: Money, won: bool) -> Money {
    if won {
        true_value - paid
    } else {
        Money::ZERO
    }
}

/// True utility of `agent` given the complete trade list of a run.
pub fn realized_utility(agent: &Agent, trades: &[Trade]) -> Money {
    let trade = trades.iter().find(|t| match agent.role {
        Role::Executer => t.executer == agent.id,
        Role::Requester => t.requester == agent.id,
    });
    match (agent.role, trade) {
        (Role::Executer, Some(t)) => utility_executer(t.seller_price, agent.true_valuation, true),
        (Role::Requester, Some(t)) => utility_requester(t.buyer_price, agent.true_valuation, true),
        (_, None) => Money::ZERO,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    True,
    Reported,
}

impl fmt::Display for WindowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WindowKind::True => f.write_str("true"),
            WindowKind::Reported => f.write_str("reported"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValidationError {
    #[error("horizon needs 1 <= kappa <= num_slots, got num_slots = {num_slots}, kappa = {kappa}")]
    Horizon { num_slots: u32, kappa: u32 },
    #[error("duplicate id {0}")]
    DuplicateId(AgentId),
    #[error("agent {id}: {kind} window [{arrival}, {departure}) is empty (arrival must precede departure)")]
    EmptyWindow { id: AgentId, kind: WindowKind, arrival: Slot, departure: Slot },
    #[error("agent {id}: {kind} window [{arrival}, {departure}) is longer than kappa = {kappa}")]
    WindowExceedsKappa { id: AgentId, kind: WindowKind, arrival: Slot, departure: Slot, kappa: u32 },
    #[error("agent {id}: {kind} window [{arrival}, {departure}) lies outside the horizon of {num_slots} slots")]
    OutsideHorizon { id: AgentId, kind: WindowKind, arrival: Slot, departure: Slot, num_slots: u32 },
    #[error("agent {id}: reported_arrival {reported} is earlier than true arrival {actual}")]
    EarlyArrival { id: AgentId, reported: Slot, actual: Slot },
    #[error("agent {id}: reported_departure {reported} is later than true departure {actual}")]
    LateDeparture { id: AgentId, reported: Slot, actual: Slot },
    #[error("agent {id}: {field} {value} is negative")]
    NegativeValuation { id: AgentId, field: &'static str, value: Money },
    #[error("agent {id}: executers need a location")]
    MissingLocation { id: AgentId },
    #[error("agent {id}: requesters do not carry a location")]
    UnexpectedLocation { id: AgentId },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioWarning {
    /// The model assumes far fewer requesters than executers.
    RequestersNotFewer { requesters: usize, executers: usize },
}

impl fmt::Display for ScenarioWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioWarning::RequestersNotFewer { requesters, executers } => write!(
                f,
                "{requesters} requesters vs {executers} executers: requesters are expected to be far fewer"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{} validation error(s): {}", .0.len(), join(.0))]
pub struct ValidationErrors(pub Vec<ValidationError>);

fn join(errors: &[ValidationError]) -> String {
    errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Checks every agent invariant against the horizon. Returns the non-fatal
/// warnings on success and every violation otherwise.
pub fn validate_scenario(
    agents: &[Agent],
    horizon: &Horizon,
) -> Result<Vec<ScenarioWarning>, ValidationErrors> {
    let mut errors = Vec::new();
    if horizon.kappa == 0 || horizon.kappa > horizon.num_slots {
        errors.push(ValidationError::Horizon {
            num_slots: horizon.num_slots,
            kappa: horizon.kappa,
        });
    }

    let mut seen = BTreeSet::new();
    for agent in agents {
        let id = agent.id;
        if !seen.insert(id) {
            errors.push(ValidationError::DuplicateId(id));
        }
        for (kind, w) in [
            (WindowKind::True, agent.true_window),
            (WindowKind::Reported, agent.reported_window),
        ] {
            let (arrival, departure) = (w.arrival, w.departure);
            if w.is_empty() {
                errors.push(ValidationError::EmptyWindow { id, kind, arrival, departure });
                continue;
            }
            if w.len() > horizon.kappa {
                errors.push(ValidationError::WindowExceedsKappa {
                    id,
                    kind,
                    arrival,
                    departure,
                    kappa: horizon.kappa,
                });
            }
            if departure > horizon.num_slots {
                errors.push(ValidationError::OutsideHorizon {
                    id,
                    kind,
                    arrival,
                    departure,
                    num_slots: horizon.num_slots,
                });
            }
        }
        if agent.reported_window.arrival < agent.true_window.arrival {
            errors.push(ValidationError::EarlyArrival {
                id,
                reported: agent.reported_window.arrival,
                actual: agent.true_window.arrival,
            });
        }
        if agent.reported_window.departure > agent.true_window.departure {
            errors.push(ValidationError::LateDeparture {
                id,
                reported: agent.reported_window.departure,
                actual: agent.true_window.departure,
            });
        }
        for (field, value) in [
            ("valuation", agent.true_valuation),
            ("reported_valuation", agent.reported_valuation),
        ] {
            if value.is_negative() {
                errors.push(ValidationError::NegativeValuation { id, field, value });
            }
        }
        match (agent.role, agent.location) {
            (Role::Executer, None) => errors.push(ValidationError::MissingLocation { id }),
            (Role::Requester, Some(_)) => errors.push(ValidationError::UnexpectedLocation { id }),
            _ => {}
        }
    }

    if !errors.is_empty() {
        return Err(ValidationErrors(errors));
    }

    let executers = agents.iter().filter(|a| a.is_executer()).count();
    let requesters = agents.len() - executers;
    let mut warnings = Vec::new();
    if requesters > 0 && requesters >= executers {
        warnings.push(ScenarioWarning::RequestersNotFewer { requesters, executers });
    }
    Ok(warnings)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seller(id: u64, window: Window) -> Agent {
        Agent::executer(id, Money::from_int(3), window, Point2D::from_ints(0, 0))
    }

    #[test]
    fn activity_window_boundaries() {
        let a = seller(1, Window::new(2, 5));
        assert!(is_active(&a, 2));
        assert!(!is_active(&a, 5));
        assert!(is_active(&a, 3));
        assert!(!is_active(&a, 1));
    }

    #[test]
    fn activity_matches_window_exhaustively() {
        for arrival in 0..6 {
            for departure in arrival + 1..8 {
                let a = seller(0, Window::new(arrival, departure));
                for slot in 0..10 {
                    assert_eq!(is_active(&a, slot), arrival <= slot && slot < departure);
                }
            }
        }
    }

    #[test]
    fn utilities() {
        let m = Money::from_int;
        assert_eq!(utility_executer(m(7), m(3), true), m(4));
        assert_eq!(utility_executer(m(5), m(5), true), m(0));
        assert_eq!(utility_executer(m(9), m(2), false), m(0));
        assert_eq!(utility_requester(m(7), m(10), true), m(3));
        assert_eq!(utility_requester(m(10), m(10), true), m(0));
        assert_eq!(utility_requester(m(1), m(10), false), m(0));
    }

    #[test]
    fn duplicate_ids_are_reported() {
        let h = Horizon::new(4, 2);
        let agents = vec![seller(4, Window::new(0, 1)), seller(4, Window::new(1, 2))];
        let err = validate_scenario(&agents, &h).unwrap_err();
        assert_eq!(err.0, vec![ValidationError::DuplicateId(AgentId(4))]);
        assert!(err.to_string().contains("duplicate id 4"));
    }

    #[test]
    fn window_longer_than_kappa_is_rejected() {
        let h = Horizon::new(10, 3);
        let err = validate_scenario(&[seller(1, Window::new(2, 6))], &h).unwrap_err();
        assert!(err.0.iter().any(|e| matches!(e, ValidationError::WindowExceedsKappa { .. })));
        assert!(err.to_string().contains("longer than kappa"));
    }

    #[test]
    fn empty_scenario_is_valid() {
        assert_eq!(validate_scenario(&[], &Horizon::new(3, 1)), Ok(vec![]));
    }

    #[test]
    fn enlarged_windows_and_negative_values_rejected() {
        let h = Horizon::new(10, 5);
        let early = seller(1, Window::new(2, 4)).with_report(Money::from_int(3), Window::new(1, 4));
        let late = seller(2, Window::new(2, 4)).with_report(Money::from_int(3), Window::new(2, 5));
        let negative = Agent::requester(3, Money::from_int(-1), Window::new(0, 1));
        let err = validate_scenario(&[early, late, negative], &h).unwrap_err();
        assert!(matches!(err.0[0], ValidationError::EarlyArrival { .. }));
        assert!(matches!(err.0[1], ValidationError::LateDeparture { .. }));
        assert!(err.0.iter().any(|e| matches!(e, ValidationError::NegativeValuation { .. })));
    }

    #[test]
    fn warns_when_requesters_are_not_fewer() {
        let h = Horizon::new(2, 1);
        let agents = vec![
            seller(0, Window::new(0, 1)),
            Agent::requester(1, Money::from_int(5), Window::new(0, 1)),
        ];
        let warnings = validate_scenario(&agents, &h).unwrap();
        assert_eq!(
            warnings,
            vec![ScenarioWarning::RequestersNotFewer { requesters: 1, executers: 1 }]
        );
    }

    #[test]
    fn horizon_bounds() {
        assert!(validate_scenario(&[], &Horizon::new(3, 4)).is_err());
        assert!(validate_scenario(&[], &Horizon::new(3, 0)).is_err());
        let err = validate_scenario(&[seller(1, Window::new(2, 4))], &Horizon::new(3, 3)).unwrap_err();
        assert!(matches!(err.0[0], ValidationError::OutsideHorizon { .. }));
    }

    proptest::proptest! {
        #[test]
        fn surplus_accounting_identity(
            p in 0i64..100, q in 0i64..100, c in 0i64..100, v in 0i64..100,
        ) {
            let (p, q, c, v) = (Money::from(p), Money::from(q), Money::from(c), Money::from(v));
            let total = utility_executer(p, c, true) + utility_requester(q, v, true);
            proptest::prop_assert_eq!(total, (v - c) - (q - p));
        }
    }
}
