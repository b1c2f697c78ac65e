//! Static double-auction clearing for one cluster in one slot.
//!
//! Asks are sorted ascending and bids descending, the first losing pair
//! fixes the candidate uniform price `eta` (the midpoint of that pair), and
//! one of two pricing rules turns it into a seller price and a buyer price:
//!
//! * [`PricingMode::Literal`] evaluates the per-side case split exactly as
//!   printed. Because the losing pair always straddles `eta`, the seller
//!   side always gets `eta` while the buyer side gets the losing bid, which
//!   is lower, so allocation clears nothing. Kept to document that.
//! * [`PricingMode::McAfeeCorrected`] applies McAfee's trade-reduction rule
//!   against the last profitable pair.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{AgentId, Slot, Trade};
use crate::money::Money;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum PricingMode {
    #[serde(rename = "literal")]
    Literal,
    #[default]
    #[serde(rename = "mcafee", alias = "mcafee_corrected")]
    McAfeeCorrected,
}

impl fmt::Display for PricingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PricingMode::Literal => "literal",
            PricingMode::McAfeeCorrected => "mcafee",
        })
    }
}

impl FromStr for PricingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "literal" => Ok(PricingMode::Literal),
            "mcafee" | "mcafee_corrected" => Ok(PricingMode::McAfeeCorrected),
            other => Err(format!("unknown pricing mode {other:?} (expected literal or mcafee)")),
        }
    }
}

/// A sealed report: an ask for sellers, a bid for buyers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Bid {
    pub id: AgentId,
    pub value: Money,
}

impl Bid {
    pub fn new(id: AgentId, value: Money) -> Self {
        Bid { id, value }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SortedMarket {
    /// Ascending by ask, ties by ascending id.
    pub sellers: Vec<Bid>,
    /// Descending by bid, ties by ascending id.
    pub buyers: Vec<Bid>,
}

impl SortedMarket {
    /// Ask at 1-based position `i`.
    pub fn ask(&self, i: usize) -> Option<Money> {
        i.checked_sub(1).and_then(|i| self.sellers.get(i)).map(|b| b.value)
    }

    /// Bid at 1-based position `i`.
    pub fn bid(&self, i: usize) -> Option<Money> {
        i.checked_sub(1).and_then(|i| self.buyers.get(i)).map(|b| b.value)
    }
}

pub fn build_sorted_market(mut sellers: Vec<Bid>, mut buyers: Vec<Bid>) -> SortedMarket {
    sellers.sort_by(|a, b| a.value.cmp(&b.value).then(a.id.cmp(&b.id)));
    buyers.sort_by(|a, b| b.value.cmp(&a.value).then(a.id.cmp(&b.id)));
    SortedMarket { sellers, buyers }
}

/// First (1-based) position whose pair loses money, `bid_i < ask_i`.
///
/// Differences are non-increasing after sorting, so the losing positions
/// form a suffix and this is its start. `None` when every pair within the
/// shorter side is profitable: position `min + 1` can never carry a value on
/// both sides, so no price is formable.
pub fn losing_index(market: &SortedMarket) -> Option<usize> {
    market
        .sellers
        .iter()
        .zip(&market.buyers)
        .position(|(s, b)| b.value < s.value)
        .map(|i| i + 1)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AuctionError {
    #[error("position {index} has no {side}")]
    MissingPosition { index: usize, side: &'static str },
}

/// Midpoint of the bid and the ask at 1-based position `losing`.
pub fn eta(market: &SortedMarket, losing: usize) -> Result<Money, AuctionError> {
    let ask = market
        .ask(losing)
        .ok_or(AuctionError::MissingPosition { index: losing, side: "seller" })?;
    let bid = market
        .bid(losing)
        .ok_or(AuctionError::MissingPosition { index: losing, side: "buyer" })?;
    Ok(Money::midpoint(bid, ask))
}

/// Uniform prices for one cluster-slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StaticPrice {
    pub losing_index: usize,
    pub eta: Money,
    pub seller_price: Money,
    pub buyer_price: Money,
    /// How many of the top-ranked sellers and buyers may trade. Zero means a
    /// quote exists but nobody clears.
    pub max_trades: usize,
}

/// Prices the market under `mode`. `None` when no price can be formed: no
/// losing pair, or (McAfee) no profitable pair ahead of it.
pub fn price_static(market: &SortedMarket, mode: PricingMode) -> Option<StaticPrice> {
    let losing = losing_index(market)?;
    let eta = eta(market, losing).ok()?;
    match mode {
        PricingMode::Literal => {
            let ask = market.ask(losing)?;
            let bid = market.bid(losing)?;
            let seller_price = if ask >= eta && bid <= eta { eta } else { ask };
            let buyer_price = if ask <= eta && bid >= eta { eta } else { bid };
            Some(StaticPrice {
                losing_index: losing,
                eta,
                seller_price,
                buyer_price,
                max_trades: losing - 1,
            })
        }
        PricingMode::McAfeeCorrected => {
            let last = losing - 1;
            let ask = market.ask(last)?;
            let bid = market.bid(last)?;
            let (seller_price, buyer_price, max_trades) = if ask <= eta && eta <= bid {
                (eta, eta, last)
            } else {
                (ask, bid, last - 1)
            };
            Some(StaticPrice { losing_index: losing, eta, seller_price, buyer_price, max_trades })
        }
    }
}

/// A candidate with the price it would trade at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Quoted {
    pub id: AgentId,
    pub report: Money,
    pub price: Money,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Eligibility {
    pub sellers: Vec<Quoted>,
    pub buyers: Vec<Quoted>,
    pub priced_out: Vec<AgentId>,
}

/// Individual-rationality screen: sellers need `price >= ask`, buyers need
/// `price <= bid`. Input order is preserved.
pub fn screen(sellers: &[Quoted], buyers: &[Quoted]) -> Eligibility {
    let mut out = Eligibility::default();
    for s in sellers {
        if s.price >= s.report {
            out.sellers.push(*s);
        } else {
            out.priced_out.push(s.id);
        }
    }
    for b in buyers {
        if b.price <= b.report {
            out.buyers.push(*b);
        } else {
            out.priced_out.push(b.id);
        }
    }
    out
}

/// Uniform-price IR filter over the first `max_trades` agents on each side.
pub fn ir_filter(
    market: &SortedMarket,
    seller_price: Money,
    buyer_price: Money,
    max_trades: usize,
) -> Eligibility {
    let quote = |bids: &[Bid], price: Money| -> Vec<Quoted> {
        bids.iter()
            .take(max_trades)
            .map(|b| Quoted { id: b.id, report: b.value, price })
            .collect()
    };
    screen(&quote(&market.sellers, seller_price), &quote(&market.buyers, buyer_price))
}

/// Pairs sellers (ascending by price) with buyers (descending by price) for
/// as long as the buyer's price covers the seller's. Equal prices keep the
/// input order, which is market order.
pub fn allocate(sellers: &[Quoted], buyers: &[Quoted], slot: Slot, cluster: usize) -> Vec<Trade> {
    let mut sellers = sellers.to_vec();
    let mut buyers = buyers.to_vec();
    sellers.sort_by_key(|q| q.price);
    buyers.sort_by_key(|q| std::cmp::Reverse(q.price));
    sellers
        .iter()
        .zip(&buyers)
        .take_while(|(s, b)| b.price >= s.price)
        .map(|(s, b)| Trade {
            executer: s.id,
            requester: b.id,
            slot,
            cluster,
            seller_price: s.price,
            buyer_price: b.price,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ClearingOutcome {
    pub losing_index: Option<usize>,
    pub eta: Option<Money>,
    pub seller_price: Option<Money>,
    pub buyer_price: Option<Money>,
    pub winners_sellers: Vec<AgentId>,
    pub winners_buyers: Vec<AgentId>,
    pub priced_out: Vec<AgentId>,
    pub trades: Vec<Trade>,
}

impl ClearingOutcome {
    pub fn trade_count(&self) -> usize {
        self.trades.len()
    }

    pub fn budget_surplus(&self) -> Money {
        self.trades.iter().map(Trade::budget_surplus).sum()
    }
}

/// One-shot static clearing: price, screen, allocate.
pub fn clear_static(
    market: &SortedMarket,
    mode: PricingMode,
    slot: Slot,
    cluster: usize,
) -> ClearingOutcome {
    let mut outcome = ClearingOutcome {
        losing_index: losing_index(market),
        ..Default::default()
    };
    outcome.eta = outcome.losing_index.and_then(|i| eta(market, i).ok());
    let Some(price) = price_static(market, mode) else {
        return outcome;
    };
    outcome.seller_price = Some(price.seller_price);
    outcome.buyer_price = Some(price.buyer_price);
    let eligible = ir_filter(market, price.seller_price, price.buyer_price, price.max_trades);
    let trades = allocate(&eligible.sellers, &eligible.buyers, slot, cluster);
    outcome.winners_sellers = trades.iter().map(|t| t.executer).collect();
    outcome.winners_buyers = trades.iter().map(|t| t.requester).collect();
    outcome.priced_out = eligible.priced_out;
    outcome.trades = trades;
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(v: i64) -> Money {
        Money::from(v)
    }

    /// Sellers get ids 0.., buyers ids 100...
    pub(crate) fn market(asks: &[i64], bids: &[i64]) -> SortedMarket {
        build_sorted_market(
            asks.iter().enumerate().map(|(i, &a)| Bid::new(AgentId(i as u64), m(a))).collect(),
            bids.iter()
                .enumerate()
                .map(|(i, &b)| Bid::new(AgentId(100 + i as u64), m(b)))
                .collect(),
        )
    }

    fn ids(bids: &[Bid]) -> Vec<u64> {
        bids.iter().map(|b| b.id.0).collect()
    }

    #[test]
    fn sorting_and_tie_break() {
        let mk = build_sorted_market(
            vec![Bid::new(AgentId(1), m(6)), Bid::new(AgentId(2), m(3)), Bid::new(AgentId(3), m(9))],
            vec![Bid::new(AgentId(4), m(8)), Bid::new(AgentId(5), m(10)), Bid::new(AgentId(6), m(5))],
        );
        assert_eq!(ids(&mk.sellers), vec![2, 1, 3]);
        assert_eq!(ids(&mk.buyers), vec![5, 4, 6]);

        let tie = build_sorted_market(
            vec![Bid::new(AgentId(7), m(4)), Bid::new(AgentId(2), m(4))],
            vec![],
        );
        assert_eq!(ids(&tie.sellers), vec![2, 7]);
    }

    #[test]
    fn losing_index_examples() {
        assert_eq!(losing_index(&market(&[3, 6, 9], &[10, 8, 5])), Some(3));
        assert_eq!(losing_index(&market(&[3], &[10])), None);
        assert_eq!(losing_index(&market(&[9], &[5])), Some(1));
        assert_eq!(losing_index(&market(&[], &[5])), None);
        // equal ask and bid is still a profitable pair
        assert_eq!(losing_index(&market(&[3, 6], &[6, 2])), Some(2));
    }

    #[test]
    fn eta_examples() {
        assert_eq!(eta(&market(&[3, 6, 9], &[10, 8, 5]), 3), Ok(m(7)));
        assert_eq!(eta(&market(&[3, 6], &[10, 6]), 2), Ok(m(6)));
        assert_eq!(eta(&market(&[3, 6, 20], &[10, 8, 5]), 3), Ok(Money::new(25, 2)));
        assert!(eta(&market(&[3, 6, 20], &[10, 8]), 3).is_err());
    }

    #[test]
    fn mcafee_prices() {
        let p = price_static(&market(&[3, 6, 9], &[10, 8, 5]), PricingMode::McAfeeCorrected).unwrap();
        assert_eq!((p.seller_price, p.buyer_price, p.max_trades), (m(7), m(7), 2));

        let p = price_static(&market(&[3, 6, 20], &[10, 8, 5]), PricingMode::McAfeeCorrected).unwrap();
        assert_eq!((p.seller_price, p.buyer_price, p.max_trades), (m(6), m(8), 1));

        assert_eq!(price_static(&market(&[9], &[5]), PricingMode::McAfeeCorrected), None);
        assert_eq!(price_static(&market(&[3], &[10]), PricingMode::McAfeeCorrected), None);
    }

    #[test]
    fn literal_prices_are_degenerate() {
        let mk = market(&[3, 6, 9], &[10, 8, 5]);
        let p = price_static(&mk, PricingMode::Literal).unwrap();
        assert_eq!((p.seller_price, p.buyer_price, p.max_trades), (m(7), m(5), 2));
        let out = clear_static(&mk, PricingMode::Literal, 0, 0);
        assert_eq!(out.trade_count(), 0);

        // first pair already losing: quote exists, nobody may trade
        let p = price_static(&market(&[9], &[5]), PricingMode::Literal).unwrap();
        assert_eq!(p.max_trades, 0);
    }

    #[test]
    fn ir_filter_examples() {
        let mk = market(&[3, 6], &[10, 8]);
        let e = ir_filter(&mk, m(7), m(7), 2);
        assert_eq!(e.sellers.len(), 2);
        assert_eq!(e.buyers.len(), 2);
        assert!(e.priced_out.is_empty());

        let e = ir_filter(&mk, m(5), m(7), 2);
        assert_eq!(e.sellers.iter().map(|q| q.id.0).collect::<Vec<_>>(), vec![0]);
        assert_eq!(e.priced_out, vec![AgentId(1)]);
    }

    #[test]
    fn allocate_examples() {
        let q = |id: u64, report: i64, price: i64| Quoted { id: AgentId(id), report: m(report), price: m(price) };
        let trades = allocate(&[q(0, 3, 7), q(1, 6, 7)], &[q(100, 10, 7), q(101, 8, 7)], 0, 0);
        assert_eq!(trades.len(), 2);
        assert!(trades.iter().all(|t| t.budget_surplus().is_zero()));

        assert!(allocate(&[q(0, 3, 7)], &[q(100, 10, 5)], 0, 0).is_empty());

        let trades = allocate(&[q(0, 1, 4), q(1, 2, 4), q(2, 3, 4)], &[q(100, 9, 4)], 0, 0);
        assert_eq!(trades.len(), 1);
    }

    #[test]
    fn mcafee_clearing_end_to_end() {
        let out = clear_static(&market(&[3, 6, 9], &[10, 8, 5]), PricingMode::McAfeeCorrected, 0, 0);
        assert_eq!(out.trade_count(), 2);
        assert_eq!(out.winners_sellers, vec![AgentId(0), AgentId(1)]);
        assert_eq!(out.winners_buyers, vec![AgentId(100), AgentId(101)]);
        assert_eq!(out.budget_surplus(), m(0));

        let out = clear_static(&market(&[3, 6, 20], &[10, 8, 5]), PricingMode::McAfeeCorrected, 0, 0);
        assert_eq!(out.trade_count(), 1);
        assert_eq!(out.budget_surplus(), m(2));
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("literal".parse::<PricingMode>(), Ok(PricingMode::Literal));
        assert_eq!("mcafee".parse::<PricingMode>(), Ok(PricingMode::McAfeeCorrected));
        assert!("vcg".parse::<PricingMode>().is_err());
    }
}
