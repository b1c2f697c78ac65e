//! Online double auction for participatory sensing with location clusters.
//!
//! Executers (sellers) are clustered by location every slot and each
//! cluster runs a double auction against the shared pool of requesters
//! (buyers). Prices follow the agents across slots as running quotes, so an
//! agent that waits is never offered a worse price than it has already
//! seen. All arithmetic is exact.
//!
//! * [`model`]: agents, windows, trades, utilities, validation
//! * [`clustering`]: k-means over executer locations
//! * [`auction`]: static clearing of one cluster-slot
//! * [`online`]: the slot loop and running quotes
//! * [`benchmark`]: McAfee's rule as an unclustered baseline
//! * [`verify`]: brute-force checks of the economic properties
//! * [`scenario`]: scenario files and the seeded generator

pub mod auction;
pub mod benchmark;
pub mod clustering;
pub mod exact;
pub mod model;
pub mod money;
pub mod online;
pub mod rng;
pub mod scenario;
pub mod verify;

pub use auction::{ClearingOutcome, PricingMode, SortedMarket};
pub use clustering::{ClusterSet, Point2D};
pub use model::{Agent, AgentId, Horizon, Role, Slot, Trade, Window};
pub use money::Money;
pub use online::{EngineConfig, RunOutcome, SlotReport};
pub use scenario::{Scenario, ScenarioConfig, ScenarioError};
