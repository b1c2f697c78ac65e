use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::quotes::{quote_update_buyer, quote_update_seller, ClusterQuote, Lookback, LookbackAnchor, PriceHistory, PriceQuote};
use crate::auction::{self, Bid, Eligibility, PricingMode, Quoted, SortedMarket, StaticPrice};
use crate::clustering::{self, Point2D, DEFAULT_MAX_ITERS};
use crate::model::{is_active, Agent, AgentId, Horizon, Role, Slot, Trade};
use crate::money::Money;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Requested number of location clusters per slot.
    pub k: usize,
    pub max_iters: usize,
    pub mode: PricingMode,
    pub seed: u64,
    #[serde(default)]
    pub anchor: LookbackAnchor,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            k: 1,
            max_iters: DEFAULT_MAX_ITERS,
            mode: PricingMode::McAfeeCorrected,
            seed: 0,
            anchor: LookbackAnchor::Departure,
        }
    }
}

/// Engine-owned state carried between slots.
#[derive(Debug, Clone, Default, Serialize)]
pub struct MarketState {
    /// Active, unmatched executers after the last cleared slot.
    pub standing_executers: BTreeSet<AgentId>,
    pub standing_requesters: BTreeSet<AgentId>,
    pub quotes: BTreeMap<AgentId, PriceQuote>,
    pub history: PriceHistory,
    pub completed: Vec<Trade>,
    /// Every quote each agent held, one entry per slot it was in the market.
    pub quote_log: BTreeMap<AgentId, Vec<(Slot, Money)>>,
    #[serde(skip)]
    matched: BTreeSet<AgentId>,
}

impl MarketState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_matched(&self, id: AgentId) -> bool {
        self.matched.contains(&id)
    }

    fn quote_of(&self, id: AgentId) -> Option<Money> {
        self.quotes.get(&id).map(|q| q.zeta)
    }

    fn set_quote(&mut self, id: AgentId, slot: Slot, fresh: bool, zeta: Option<Money>) {
        if let Some(zeta) = zeta {
            self.quotes.insert(id, PriceQuote { agent: id, zeta, last_updated: slot, fresh });
            self.quote_log.entry(id).or_default().push((slot, zeta));
        }
    }
}

/// Agents in the market at one slot, sorted by id.
#[derive(Debug, Clone, Default)]
pub struct ActiveSet<'a> {
    pub executers: Vec<&'a Agent>,
    pub requesters: Vec<&'a Agent>,
}

impl ActiveSet<'_> {
    pub fn is_fresh(agent: &Agent, slot: Slot) -> bool {
        agent.reported_window.arrival == slot
    }
}

/// Active agents at `slot` that have not traded yet. Departed agents drop
/// out because their reported window no longer covers the slot.
pub fn collect_active<'a>(agents: &'a [Agent], state: &MarketState, slot: Slot) -> ActiveSet<'a> {
    let mut set = ActiveSet::default();
    for agent in agents {
        if !is_active(agent, slot) || state.is_matched(agent.id) {
            continue;
        }
        match agent.role {
            Role::Executer => set.executers.push(agent),
            Role::Requester => set.requesters.push(agent),
        }
    }
    set.executers.sort_by_key(|a| a.id);
    set.requesters.sort_by_key(|a| a.id);
    set
}

/// Requesters shared by the clusters of one slot. Clusters see the pool in
/// ascending index order; a requester that trades is gone for the rest of
/// the slot, one that loses or is priced out stays visible.
#[derive(Debug, Clone)]
pub struct BuyerPool<'a> {
    buyers: Vec<&'a Agent>,
}

impl<'a> BuyerPool<'a> {
    pub fn new(requesters: Vec<&'a Agent>) -> Self {
        BuyerPool { buyers: requesters }
    }

    pub fn visible(&self) -> &[&'a Agent] {
        &self.buyers
    }

    pub fn remove_matched(&mut self, trades: &[Trade]) {
        let gone: BTreeSet<AgentId> = trades.iter().map(|t| t.requester).collect();
        self.buyers.retain(|b| !gone.contains(&b.id));
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClusterReport {
    pub cluster: usize,
    pub n_sellers: usize,
    pub n_buyers: usize,
    pub seller_price: Option<Money>,
    pub buyer_price: Option<Money>,
    pub trades: Vec<Trade>,
    pub priced_out: Vec<AgentId>,
    pub budget_surplus: Money,
    /// Sum of true value minus true cost over the cluster's trades.
    pub social_welfare: Money,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct SlotTotals {
    pub trades: usize,
    pub buyer_payments: Money,
    pub seller_payments: Money,
    pub budget_surplus: Money,
    pub social_welfare: Money,
    /// Sum of the traders' true utilities.
    pub utility_sum: Money,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SlotReport {
    pub slot: Slot,
    pub n_active_sellers: usize,
    pub n_active_buyers: usize,
    pub clusters: Vec<ClusterReport>,
    pub totals: SlotTotals,
}

impl SlotReport {
    pub fn trades(&self) -> impl Iterator<Item = &Trade> {
        self.clusters.iter().flat_map(|c| c.trades.iter())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub reports: Vec<SlotReport>,
    pub state: MarketState,
}

impl RunOutcome {
    pub fn trades(&self) -> &[Trade] {
        &self.state.completed
    }
}

struct Ctx<'a> {
    by_id: HashMap<AgentId, &'a Agent>,
    lookback: Lookback,
}

/// Quotes each candidate at its running price for this slot and screens it
/// against its report. Candidates are the top `max_trades` of each side of
/// the cluster's sorted market.
pub fn payment_phase(
    market: &SortedMarket,
    price: &StaticPrice,
    agents: &HashMap<AgentId, &Agent>,
    slot: Slot,
    lookback: Lookback,
    state: &MarketState,
) -> Eligibility {
    let quote_side = |bids: &[Bid], current: Money, seller: bool| -> Vec<Quoted> {
        bids.iter()
            .take(price.max_trades)
            .filter_map(|b| {
                let agent = agents[&b.id];
                let previous = state.quote_of(b.id);
                let zeta = if seller {
                    quote_update_seller(agent, slot, lookback, &state.history, previous, Some(current))
                } else {
                    quote_update_buyer(agent, slot, lookback, &state.history, previous, Some(current))
                };
                zeta.map(|price| Quoted { id: b.id, report: b.value, price })
            })
            .collect()
    };
    let sellers = quote_side(&market.sellers, price.seller_price, true);
    let buyers = quote_side(&market.buyers, price.buyer_price, false);
    auction::screen(&sellers, &buyers)
}

fn bids(agents: &[&Agent]) -> Vec<Bid> {
    agents.iter().map(|a| Bid::new(a.id, a.reported_valuation)).collect()
}

fn run_slot_inner(
    ctx: &Ctx<'_>,
    agents: &[Agent],
    state: &mut MarketState,
    slot: Slot,
    config: &EngineConfig,
) -> SlotReport {
    let active = collect_active(agents, state, slot);
    let located: Vec<(AgentId, Point2D)> = active
        .executers
        .iter()
        .map(|a| (a.id, a.location.expect("validated executers have a location")))
        .collect();
    let mut rng = rng::slot_rng(config.seed, slot);
    let clusters = clustering::cluster_formation(&located, config.k, &mut rng, config.max_iters);

    let mut pool = BuyerPool::new(active.requesters.clone());
    let mut reports = Vec::with_capacity(clusters.k());
    let mut slot_quotes = Vec::with_capacity(clusters.k());
    let mut cluster_of: HashMap<AgentId, usize> = HashMap::new();
    let mut paid: Vec<(AgentId, Money)> = Vec::new();

    for (j, members) in clusters.clusters.iter().enumerate() {
        let sellers: Vec<&Agent> = members.iter().map(|id| ctx.by_id[id]).collect();
        for id in members {
            cluster_of.insert(*id, j);
        }
        let market = auction::build_sorted_market(bids(&sellers), bids(pool.visible()));
        let price = auction::price_static(&market, config.mode);
        slot_quotes.push(price.map(|p| ClusterQuote {
            seller_price: p.seller_price,
            buyer_price: p.buyer_price,
        }));

        let (trades, priced_out) = match &price {
            Some(p) => {
                let eligible = payment_phase(&market, p, &ctx.by_id, slot, ctx.lookback, state);
                let trades = auction::allocate(&eligible.sellers, &eligible.buyers, slot, j);
                (trades, eligible.priced_out)
            }
            None => (Vec::new(), Vec::new()),
        };

        let budget_surplus = trades.iter().map(Trade::budget_surplus).sum();
        let social_welfare = trades
            .iter()
            .map(|t| ctx.by_id[&t.requester].true_valuation - ctx.by_id[&t.executer].true_valuation)
            .sum();
        for t in &trades {
            paid.push((t.executer, t.seller_price));
            paid.push((t.requester, t.buyer_price));
        }
        reports.push(ClusterReport {
            cluster: j,
            n_sellers: sellers.len(),
            n_buyers: pool.visible().len(),
            seller_price: price.map(|p| p.seller_price),
            buyer_price: price.map(|p| p.buyer_price),
            trades,
            priced_out,
            budget_surplus,
            social_welfare,
        });
        pool.remove_matched(&reports.last().expect("just pushed").trades);
    }

    // Roll every agent's quote forward. Traders keep the price they settled
    // at; the rest take this slot's price from their own cluster (sellers)
    // or the dearest cluster (buyers).
    let paid: HashMap<AgentId, Money> = paid.into_iter().collect();
    let buyer_ceiling = slot_quotes.iter().flatten().map(|q| q.buyer_price).max();
    for agent in active.executers.iter().chain(&active.requesters) {
        let fresh = ActiveSet::is_fresh(agent, slot);
        let zeta = if let Some(p) = paid.get(&agent.id) {
            Some(*p)
        } else {
            let previous = state.quote_of(agent.id);
            match agent.role {
                Role::Executer => {
                    let current = cluster_of
                        .get(&agent.id)
                        .and_then(|&j| slot_quotes[j])
                        .map(|q| q.seller_price);
                    quote_update_seller(agent, slot, ctx.lookback, &state.history, previous, current)
                }
                Role::Requester => {
                    quote_update_buyer(agent, slot, ctx.lookback, &state.history, previous, buyer_ceiling)
                }
            }
        };
        state.set_quote(agent.id, slot, fresh, zeta);
    }
    state.history.push(slot, slot_quotes);

    let trades: Vec<Trade> = reports.iter().flat_map(|r| r.trades.iter().cloned()).collect();
    for t in &trades {
        state.matched.insert(t.executer);
        state.matched.insert(t.requester);
    }
    state.standing_executers = active
        .executers
        .iter()
        .map(|a| a.id)
        .filter(|id| !state.matched.contains(id))
        .collect();
    state.standing_requesters = active
        .requesters
        .iter()
        .map(|a| a.id)
        .filter(|id| !state.matched.contains(id))
        .collect();

    let buyer_payments: Money = trades.iter().map(|t| t.buyer_price).sum();
    let seller_payments: Money = trades.iter().map(|t| t.seller_price).sum();
    let social_welfare: Money = reports.iter().map(|r| r.social_welfare).sum();
    let budget_surplus = buyer_payments - seller_payments;
    let totals = SlotTotals {
        trades: trades.len(),
        buyer_payments,
        seller_payments,
        budget_surplus,
        social_welfare,
        utility_sum: social_welfare - budget_surplus,
    };
    state.completed.extend(trades);

    SlotReport {
        slot,
        n_active_sellers: active.executers.len(),
        n_active_buyers: active.requesters.len(),
        clusters: reports,
        totals,
    }
}

fn context<'a>(agents: &'a [Agent], horizon: &Horizon, config: &EngineConfig) -> Ctx<'a> {
    Ctx {
        by_id: agents.iter().map(|a| (a.id, a)).collect(),
        lookback: Lookback::new(horizon.kappa, config.anchor),
    }
}

/// Clears one slot and advances `state`. Slots must be run in order
/// starting from 0. `agents` is the whole (validated) scenario.
pub fn run_slot(
    state: &mut MarketState,
    agents: &[Agent],
    horizon: &Horizon,
    slot: Slot,
    config: &EngineConfig,
) -> SlotReport {
    run_slot_inner(&context(agents, horizon, config), agents, state, slot, config)
}

/// Runs every slot of the horizon. The scenario must already be validated.
pub fn run_horizon(agents: &[Agent], horizon: &Horizon, config: &EngineConfig) -> RunOutcome {
    let ctx = context(agents, horizon, config);
    let mut state = MarketState::new();
    let reports = horizon
        .slots()
        .map(|slot| run_slot_inner(&ctx, agents, &mut state, slot, config))
        .collect();
    RunOutcome { reports, state }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Window;

    fn m(v: i64) -> Money {
        Money::from(v)
    }

    fn seller(id: u64, ask: i64, w: (Slot, Slot)) -> Agent {
        Agent::executer(id, m(ask), Window::new(w.0, w.1), Point2D::from_ints(0, 0))
    }

    fn buyer(id: u64, bid: i64, w: (Slot, Slot)) -> Agent {
        Agent::requester(id, m(bid), Window::new(w.0, w.1))
    }

    fn composed_market() -> Vec<Agent> {
        vec![
            seller(1, 3, (0, 1)),
            seller(2, 6, (0, 1)),
            seller(3, 9, (0, 1)),
            buyer(11, 10, (0, 1)),
            buyer(12, 8, (0, 1)),
            buyer(13, 5, (0, 1)),
        ]
    }

    fn config(mode: PricingMode) -> EngineConfig {
        EngineConfig { k: 1, mode, ..EngineConfig::default() }
    }

    #[test]
    fn single_slot_mcafee_clears_two_at_seven() {
        let out = run_horizon(&composed_market(), &Horizon::new(1, 1), &config(PricingMode::McAfeeCorrected));
        let report = &out.reports[0];
        assert_eq!(report.totals.trades, 2);
        assert_eq!(report.totals.budget_surplus, m(0));
        assert!(out.trades().iter().all(|t| t.seller_price == m(7) && t.buyer_price == m(7)));
    }

    #[test]
    fn single_slot_literal_clears_nothing() {
        let out = run_horizon(&composed_market(), &Horizon::new(1, 1), &config(PricingMode::Literal));
        assert_eq!(out.reports[0].totals.trades, 0);
        assert_eq!(out.reports[0].clusters[0].seller_price, Some(m(7)));
        assert_eq!(out.reports[0].clusters[0].buyer_price, Some(m(5)));
    }

    #[test]
    fn empty_market_records_no_quote() {
        let out = run_horizon(&[], &Horizon::new(3, 1), &config(PricingMode::McAfeeCorrected));
        assert_eq!(out.reports.len(), 3);
        assert!(out.reports.iter().all(|r| r.totals.trades == 0 && r.clusters.is_empty()));
        assert_eq!(out.state.history.len(), 3);
        assert_eq!(out.state.history.seller_floor(0), None);
    }

    #[test]
    fn departed_agents_are_dropped() {
        let agents = vec![seller(1, 3, (0, 3)), seller(2, 3, (3, 4))];
        let state = MarketState::new();
        let active = collect_active(&agents, &state, 3);
        assert_eq!(active.executers.iter().map(|a| a.id).collect::<Vec<_>>(), vec![AgentId(2)]);
        assert!(ActiveSet::is_fresh(active.executers[0], 3));
        assert!(collect_active(&[], &state, 0).executers.is_empty());
    }

    #[test]
    fn agent_trades_only_inside_window() {
        let agents = vec![
            seller(1, 1, (2, 4)),
            seller(2, 2, (0, 6)),
            seller(3, 30, (0, 6)),
            buyer(11, 20, (0, 6)),
            buyer(12, 20, (0, 6)),
            buyer(13, 0, (0, 6)),
        ];
        let out = run_horizon(&agents, &Horizon::new(6, 6), &config(PricingMode::McAfeeCorrected));
        for t in out.trades() {
            if t.executer == AgentId(1) {
                assert!((2..4).contains(&t.slot));
            }
        }
    }

    #[test]
    fn matched_buyer_is_invisible_to_later_clusters() {
        let agents = [buyer(1, 9, (0, 1)), buyer(2, 3, (0, 1))];
        let refs: Vec<&Agent> = agents.iter().collect();
        let mut pool = BuyerPool::new(refs);
        assert_eq!(pool.visible().len(), 2);
        pool.remove_matched(&[Trade {
            executer: AgentId(50),
            requester: AgentId(1),
            slot: 0,
            cluster: 0,
            seller_price: m(1),
            buyer_price: m(1),
        }]);
        assert_eq!(pool.visible().iter().map(|a| a.id).collect::<Vec<_>>(), vec![AgentId(2)]);
    }

    #[test]
    fn outranked_seller_carries_over() {
        // slot 0 forms seller price 7 and buyer price 7 from a one-slot
        // market; seller 4 (ask 8) arrives at 0 with a longer window and is
        // outranked, so it carries over.
        let agents = vec![
            seller(1, 3, (0, 1)),
            seller(2, 6, (0, 1)),
            seller(3, 9, (0, 1)),
            seller(4, 10, (0, 3)),
            buyer(11, 10, (0, 1)),
            buyer(12, 8, (0, 1)),
            buyer(13, 5, (0, 1)),
        ];
        let mut state = MarketState::new();
        let horizon = Horizon::new(3, 3);
        let cfg = config(PricingMode::McAfeeCorrected);
        let r0 = run_slot(&mut state, &agents, &horizon, 0, &cfg);
        assert_eq!(r0.totals.trades, 2);
        assert!(state.standing_executers.contains(&AgentId(4)));
        assert_eq!(state.quotes[&AgentId(4)].zeta, m(7));
        let r1 = run_slot(&mut state, &agents, &horizon, 1, &cfg);
        assert_eq!(r1.n_active_sellers, 1);
        assert_eq!(r1.n_active_buyers, 0);
    }

    #[test]
    fn identical_quiet_slots_keep_quotes() {
        // seller 9 vs buyer 5 never trades; the literal quote is formed both slots
        let agents = vec![seller(1, 9, (0, 2)), buyer(2, 5, (0, 2))];
        let out = run_horizon(&agents, &Horizon::new(2, 2), &config(PricingMode::Literal));
        assert_eq!(out.state.quote_log[&AgentId(1)], vec![(0, m(7)), (1, m(7))]);
        assert_eq!(out.state.quote_log[&AgentId(2)], vec![(0, m(5)), (1, m(5))]);
        assert!(out.trades().is_empty());
    }

    #[test]
    fn runs_are_deterministic() {
        let mut agents = Vec::new();
        for i in 0..20u64 {
            let loc = Point2D::from_ints((i % 4) as i64 * 10, (i / 4) as i64);
            let w = Window::new((i % 3) as Slot, (i % 3) as Slot + 2);
            agents.push(Agent::executer(i, m((i * 7 % 13) as i64), w, loc));
        }
        for i in 0..6u64 {
            agents.push(buyer(100 + i, (i * 5 % 17) as i64 + 3, ((i % 3) as Slot, (i % 3) as Slot + 2)));
        }
        let cfg = EngineConfig { k: 3, seed: 99, ..EngineConfig::default() };
        let a = run_horizon(&agents, &Horizon::new(5, 2), &cfg);
        let b = run_horizon(&agents, &Horizon::new(5, 2), &cfg);
        assert_eq!(a.reports, b.reports);
    }
}
