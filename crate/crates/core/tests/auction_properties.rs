use proptest::prelude::*;

use stem_core::auction::{build_sorted_market, clear_static, losing_index, Bid, PricingMode, SortedMarket};
use stem_core::benchmark::mcafee_clear;
use stem_core::model::AgentId;
use stem_core::Money;

fn market(asks: &[i64], bids: &[i64]) -> SortedMarket {
    let (sellers, buyers) = sides(asks, bids);
    build_sorted_market(sellers, buyers)
}

fn sides(asks: &[i64], bids: &[i64]) -> (Vec<Bid>, Vec<Bid>) {
    (
        asks.iter().enumerate().map(|(i, &a)| Bid::new(AgentId(i as u64), Money::from(a))).collect(),
        bids.iter().enumerate().map(|(j, &b)| Bid::new(AgentId(1000 + j as u64), Money::from(b))).collect(),
    )
}

fn values() -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(0i64..40, 0..12)
}

fn with_ask(asks: &[i64], index: usize, value: i64) -> Vec<i64> {
    let mut v = asks.to_vec();
    v[index] = value;
    v
}

proptest! {
    #[test]
    fn clearing_is_weakly_budget_balanced(asks in values(), bids in values()) {
        for mode in [PricingMode::Literal, PricingMode::McAfeeCorrected] {
            let out = clear_static(&market(&asks, &bids), mode, 0, 0);
            prop_assert!(!out.budget_surplus().is_negative());
            for t in &out.trades {
                prop_assert!(t.buyer_price >= t.seller_price);
            }
        }
    }

    #[test]
    fn literal_rule_never_trades(asks in values(), bids in values()) {
        let mkt = market(&asks, &bids);
        let out = clear_static(&mkt, PricingMode::Literal, 0, 0);
        prop_assert_eq!(out.trade_count(), 0);
        if let (Some(s), Some(b)) = (out.seller_price, out.buyer_price) {
            prop_assert!(b < s);
        }
    }

    #[test]
    fn winners_clear_at_rational_prices(asks in values(), bids in values()) {
        let mkt = market(&asks, &bids);
        let out = clear_static(&mkt, PricingMode::McAfeeCorrected, 0, 0);
        for t in &out.trades {
            let ask = mkt.sellers.iter().find(|s| s.id == t.executer).unwrap().value;
            let bid = mkt.buyers.iter().find(|b| b.id == t.requester).unwrap().value;
            prop_assert!(t.seller_price >= ask);
            prop_assert!(t.buyer_price <= bid);
        }
    }

    #[test]
    fn winning_sellers_cannot_move_prices(asks in values(), bids in values(), pick in any::<prop::sample::Index>()) {
        let mkt = market(&asks, &bids);
        let out = clear_static(&mkt, PricingMode::McAfeeCorrected, 0, 0);
        prop_assume!(!out.winners_sellers.is_empty());
        let winner = *pick.get(&out.winners_sellers);
        let price = out.seller_price.unwrap();
        let top = price.rational().floor().to_integer() as i64;
        for v in 0..=top {
            let moved = clear_static(&market(&with_ask(&asks, winner.0 as usize, v), &bids), PricingMode::McAfeeCorrected, 0, 0);
            prop_assert_eq!((moved.seller_price, moved.buyer_price), (out.seller_price, out.buyer_price));
            if Money::from(v) < price {
                prop_assert_eq!(&moved.winners_sellers.iter().collect::<std::collections::BTreeSet<_>>(),
                    &out.winners_sellers.iter().collect::<std::collections::BTreeSet<_>>());
                prop_assert_eq!(&moved.winners_buyers, &out.winners_buyers);
            }
        }
    }

    #[test]
    fn winning_buyers_cannot_move_prices(asks in values(), bids in values(), pick in any::<prop::sample::Index>()) {
        let mkt = market(&asks, &bids);
        let out = clear_static(&mkt, PricingMode::McAfeeCorrected, 0, 0);
        prop_assume!(!out.winners_buyers.is_empty());
        let winner = *pick.get(&out.winners_buyers);
        let price = out.buyer_price.unwrap();
        let bottom = price.rational().ceil().to_integer() as i64;
        for v in bottom..=80 {
            let mut moved_bids = bids.clone();
            moved_bids[(winner.0 - 1000) as usize] = v;
            let moved = clear_static(&market(&asks, &moved_bids), PricingMode::McAfeeCorrected, 0, 0);
            prop_assert_eq!((moved.seller_price, moved.buyer_price), (out.seller_price, out.buyer_price));
            if Money::from(v) > price {
                prop_assert_eq!(&moved.winners_sellers, &out.winners_sellers);
                prop_assert_eq!(&moved.winners_buyers.iter().collect::<std::collections::BTreeSet<_>>(),
                    &out.winners_buyers.iter().collect::<std::collections::BTreeSet<_>>());
            }
        }
    }

    #[test]
    fn low_buyers_do_not_move_prices(asks in values(), bids in values(), extra in 0i64..40) {
        let mkt = market(&asks, &bids);
        let losing = losing_index(&mkt);
        prop_assume!(losing.is_some());
        let floor = mkt.bid(losing.unwrap()).unwrap();
        prop_assume!(Money::from(extra) < floor);
        let mut more = bids.clone();
        more.push(extra);
        let before = clear_static(&mkt, PricingMode::McAfeeCorrected, 0, 0);
        let after = clear_static(&market(&asks, &more), PricingMode::McAfeeCorrected, 0, 0);
        prop_assert_eq!((before.seller_price, before.buyer_price), (after.seller_price, after.buyer_price));
        prop_assert_eq!(before.trades, after.trades);
    }

    #[test]
    fn baseline_is_budget_balanced_and_rational(asks in values(), bids in values()) {
        let (a, b) = sides(&asks, &bids);
        let out = mcafee_clear(&a, &b, 0);
        prop_assert!(!out.surplus.is_negative());
        for t in &out.trades {
            let ask = a.iter().find(|s| s.id == t.executer).unwrap().value;
            let bid = b.iter().find(|s| s.id == t.requester).unwrap().value;
            prop_assert!(ask <= t.seller_price && t.seller_price <= t.buyer_price && t.buyer_price <= bid);
        }
    }
}

#[test]
fn corrected_rule_matches_the_baseline_on_a_small_grid() {
    // every sorted 3x3 market over 0..=6; the full 4x4 run is an acceptance check
    let multisets = |len: usize| -> Vec<Vec<i64>> {
        let mut out = vec![vec![]];
        for _ in 0..len {
            out = out
                .into_iter()
                .flat_map(|v: Vec<i64>| {
                    let start = v.last().copied().unwrap_or(0);
                    (start..=6).map(move |x| {
                        let mut w = v.clone();
                        w.push(x);
                        w
                    })
                })
                .collect();
        }
        out
    };
    let all: Vec<Vec<i64>> = (0..=3).flat_map(multisets).collect();
    for asks in &all {
        for bids in &all {
            let (a, b) = sides(asks, bids);
            let ours = clear_static(&build_sorted_market(a.clone(), b.clone()), PricingMode::McAfeeCorrected, 0, 0);
            let theirs = mcafee_clear(&a, &b, 0);
            assert_eq!(ours.trades, theirs.trades, "asks {asks:?} bids {bids:?}");
            if !theirs.trades.is_empty() {
                assert_eq!((ours.seller_price, ours.buyer_price), (theirs.price_seller, theirs.price_buyer));
            }
        }
    }
}
