//! The horizon engine.
//!
//! Each slot: collect the agents whose reported window covers the slot and
//! who have not traded yet, cluster the executers by location, then clear
//! the clusters in ascending index order against a shared pool of
//! requesters. Within a cluster the static auction fixes the slot's uniform
//! quote and the candidate winners; every candidate then trades at its own
//! running quote if that quote still satisfies its report. Requesters that
//! trade leave the pool before the next cluster clears.

mod engine;
mod quotes;

pub use engine::{
    collect_active, payment_phase, run_horizon, run_slot, ActiveSet, BuyerPool, ClusterReport,
    EngineConfig, MarketState, RunOutcome, SlotReport, SlotTotals,
};
pub use quotes::{
    quote_update_buyer, quote_update_seller, ClusterQuote, Lookback, LookbackAnchor, PriceHistory, PriceQuote,
};
