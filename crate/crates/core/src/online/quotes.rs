//! Market price history and the running per-agent quotes.
//!
//! A seller's quote is the lowest price it has been offered while active and
//! a buyer's the highest it has been asked, so seller quotes only fall and
//! buyer quotes only rise. An agent arriving at slot `t` with reported
//! departure `d` starts from the market's extreme price over
//! `[max(0, d - kappa), t]`: the cheapest seller price per slot (across
//! clusters) for sellers and the dearest buyer price for buyers. The
//! [`LookbackAnchor::Arrival`] variant starts that window at the arrival
//! instead, so a newcomer sees only the current price.

use serde::{Deserialize, Serialize};

use crate::model::{Agent, Slot};
use crate::money::Money;

/// The uniform pair quoted in one cluster in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ClusterQuote {
    pub seller_price: Money,
    pub buyer_price: Money,
}

/// Append-only record of per-cluster quotes; `None` marks a cluster where no
/// price could be formed.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct PriceHistory {
    slots: Vec<Vec<Option<ClusterQuote>>>,
}

impl PriceHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records slot `slot`. Slots must be pushed in order, each once.
    ///
    /// # Panics
    /// If `slot` is not the next unwritten slot.
    pub fn push(&mut self, slot: Slot, quotes: Vec<Option<ClusterQuote>>) {
        assert_eq!(slot as usize, self.slots.len(), "price history is append-only and ordered");
        self.slots.push(quotes);
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slot(&self, slot: Slot) -> Option<&[Option<ClusterQuote>]> {
        self.slots.get(slot as usize).map(Vec::as_slice)
    }

    /// Lowest seller price quoted in any cluster at `slot`.
    pub fn seller_floor(&self, slot: Slot) -> Option<Money> {
        self.slot(slot)?.iter().flatten().map(|q| q.seller_price).min()
    }

    /// Highest buyer price quoted in any cluster at `slot`.
    pub fn buyer_ceiling(&self, slot: Slot) -> Option<Money> {
        self.slot(slot)?.iter().flatten().map(|q| q.buyer_price).max()
    }
}

/// An agent's running quote.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PriceQuote {
    pub agent: crate::model::AgentId,
    pub zeta: Money,
    pub last_updated: Slot,
    pub fresh: bool,
}

/// Where a newcomer's look back into the price history starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LookbackAnchor {
    /// `max(0, departure - kappa)`.
    #[default]
    Departure,
    /// The reported arrival: no history at all.
    Arrival,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lookback {
    pub kappa: u32,
    pub anchor: LookbackAnchor,
}

impl Lookback {
    pub fn new(kappa: u32, anchor: LookbackAnchor) -> Self {
        Lookback { kappa, anchor }
    }

    pub fn start(&self, agent: &Agent) -> Slot {
        match self.anchor {
            LookbackAnchor::Departure => agent.reported_window.departure.saturating_sub(self.kappa),
            LookbackAnchor::Arrival => agent.reported_window.arrival,
        }
    }
}

fn fold_opt(acc: Option<Money>, next: Option<Money>, pick: fn(Money, Money) -> Money) -> Option<Money> {
    match (acc, next) {
        (Some(a), Some(b)) => Some(pick(a, b)),
        (a, b) => a.or(b),
    }
}

/// Seller quote at `slot` given its previous quote and the price its
/// cluster forms now (`None` if no price formed).
pub fn quote_update_seller(
    agent: &Agent,
    slot: Slot,
    lookback: Lookback,
    history: &PriceHistory,
    previous: Option<Money>,
    current: Option<Money>,
) -> Option<Money> {
    if agent.reported_window.arrival == slot {
        (lookback.start(agent)..slot)
            .map(|t| history.seller_floor(t))
            .chain(std::iter::once(current))
            .fold(None, |acc, p| fold_opt(acc, p, Money::min))
    } else {
        fold_opt(previous, current, Money::min)
    }
}

/// Buyer quote at `slot`; mirror image of [`quote_update_seller`].
pub fn quote_update_buyer(
    agent: &Agent,
    slot: Slot,
    lookback: Lookback,
    history: &PriceHistory,
    previous: Option<Money>,
    current: Option<Money>,
) -> Option<Money> {
    if agent.reported_window.arrival == slot {
        (lookback.start(agent)..slot)
            .map(|t| history.buyer_ceiling(t))
            .chain(std::iter::once(current))
            .fold(None, |acc, p| fold_opt(acc, p, Money::max))
    } else {
        fold_opt(previous, current, Money::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::Point2D;
    use crate::model::Window;

    fn m(v: i64) -> Money {
        Money::from(v)
    }

    fn history(seller: &[Option<i64>], buyer: &[Option<i64>]) -> PriceHistory {
        let mut h = PriceHistory::new();
        for (t, (s, b)) in seller.iter().zip(buyer).enumerate() {
            let q = match (s, b) {
                (Some(s), Some(b)) => Some(ClusterQuote { seller_price: m(*s), buyer_price: m(*b) }),
                _ => None,
            };
            h.push(t as Slot, vec![q]);
        }
        h
    }

    fn dep(kappa: u32) -> Lookback {
        Lookback::new(kappa, LookbackAnchor::Departure)
    }

    fn seller(arrival: Slot, departure: Slot) -> Agent {
        Agent::executer(1, m(1), Window::new(arrival, departure), Point2D::from_ints(0, 0))
    }

    fn buyer(arrival: Slot, departure: Slot) -> Agent {
        Agent::requester(2, m(20), Window::new(arrival, departure))
    }

    #[test]
    fn fresh_seller_looks_back_from_departure_minus_kappa() {
        // slots 0..2 recorded; slot 3 is current with seller price 9
        let h = history(&[Some(7), Some(6), Some(8)], &[Some(4), Some(9), Some(5)]);
        let q = quote_update_seller(&seller(3, 5), 3, dep(4), &h, None, Some(m(9)));
        assert_eq!(q, Some(m(6)));
    }

    #[test]
    fn fresh_buyer_looks_back_from_departure_minus_kappa() {
        let h = history(&[Some(7), Some(6), Some(8)], &[Some(4), Some(9), Some(5)]);
        let q = quote_update_buyer(&buyer(3, 5), 3, dep(4), &h, None, Some(m(6)));
        assert_eq!(q, Some(m(9)));
    }

    #[test]
    fn arrival_anchor_ignores_history() {
        let h = history(&[Some(7), Some(6), Some(8)], &[Some(4), Some(9), Some(5)]);
        let at_arrival = Lookback::new(4, LookbackAnchor::Arrival);
        assert_eq!(quote_update_seller(&seller(3, 5), 3, at_arrival, &h, None, Some(m(9))), Some(m(9)));
        assert_eq!(quote_update_buyer(&buyer(3, 5), 3, at_arrival, &h, None, Some(m(6))), Some(m(6)));
    }

    #[test]
    fn still_active_recursions() {
        let h = PriceHistory::new();
        assert_eq!(quote_update_seller(&seller(0, 3), 1, dep(3), &h, Some(m(6)), Some(m(7))), Some(m(6)));
        assert_eq!(quote_update_buyer(&buyer(0, 3), 1, dep(3), &h, Some(m(9)), Some(m(8))), Some(m(9)));
        assert_eq!(quote_update_seller(&seller(0, 3), 1, dep(3), &h, None, Some(m(7))), Some(m(7)));
        assert_eq!(quote_update_seller(&seller(0, 3), 1, dep(3), &h, Some(m(5)), None), Some(m(5)));
    }

    #[test]
    fn no_quotes_anywhere_gives_none() {
        let h = history(&[None, None], &[None, None]);
        assert_eq!(quote_update_seller(&seller(2, 4), 2, dep(3), &h, None, None), None);
        assert_eq!(quote_update_buyer(&buyer(2, 4), 2, dep(3), &h, None, None), None);
    }

    #[test]
    fn cross_cluster_reduction() {
        let mut h = PriceHistory::new();
        h.push(
            0,
            vec![
                Some(ClusterQuote { seller_price: m(5), buyer_price: m(5) }),
                None,
                Some(ClusterQuote { seller_price: m(3), buyer_price: m(8) }),
            ],
        );
        assert_eq!(h.seller_floor(0), Some(m(3)));
        assert_eq!(h.buyer_ceiling(0), Some(m(8)));
        assert_eq!(h.seller_floor(1), None);
    }

    #[test]
    #[should_panic]
    fn history_rejects_out_of_order_slots() {
        let mut h = PriceHistory::new();
        h.push(1, vec![]);
    }
}
