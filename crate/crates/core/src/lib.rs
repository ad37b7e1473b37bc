//! Analytics for wind generation and the GB electricity balancing market.
//!
//! The crate ingests half-hourly generation, spot prices and balancing
//! actions, resolves transmission loss multipliers, and derives imbalance
//! cash flows, merit-order regressions, counterfactual wholesale costs and
//! subsidy totals. [`synthgen`] builds synthetic corpora with known answers.

pub mod counterfactual;
pub mod imbalance;
pub mod ingest;
pub mod moe;
pub mod money;
pub mod subsidy;
pub mod synthgen;
pub mod timebase;
pub mod tlm;

pub use money::Money;
pub use timebase::{ClockRule, SettlementKey};
