//! Balancing-mechanism analytics: action categories, cash flows, imbalance
//! volumes as a share of generation, negative-bid statistics and the
//! simplified system sell/buy prices.
//!
//! Cash flows are from the grid operator's side: money paid out is positive,
//! money received is negative. Each action contributes `V × P × TLM`; offers
//! keep that sign, bids are negated, so positive bids come out as income and
//! negative bids as payments.

use std::collections::BTreeMap;
use std::fmt;

use chrono::Datelike;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{ActionKind, BalancingAction, FuelClass, JoinedTable, Registry, UnitId};
use crate::timebase::SettlementKey;
use crate::tlm::{TlmError, TlmSources};

/// Volume at the expensive end of the stack that sets the system prices.
pub const PRICE_SETTING_VOLUME_MWH: f64 = 500.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImbalanceError {
    #[error("empty sample")]
    EmptySample,
    #[error("weights must be finite and non-negative with a positive sum")]
    BadWeights,
    #[error("stack holds {available} MWh but the imbalance needs {needed} MWh (short by {gap} MWh)")]
    Shortfall { needed: f64, available: f64, gap: f64 },
    #[error("action {kind:?} of {unit} at {key}: {source}")]
    Tlm {
        key: SettlementKey,
        unit: UnitId,
        kind: ActionKind,
        #[source]
        source: TlmError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActionCategory {
    Offer,
    PositiveBid,
    NegativeBid,
}

impl ActionCategory {
    pub const ALL: [ActionCategory; 3] =
        [ActionCategory::Offer, ActionCategory::PositiveBid, ActionCategory::NegativeBid];

    pub fn name(self) -> &'static str {
        match self {
            ActionCategory::Offer => "offers",
            ActionCategory::PositiveBid => "positive_bids",
            ActionCategory::NegativeBid => "negative_bids",
        }
    }
}

impl fmt::Display for ActionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A zero-priced bid counts as positive: only strictly negative prices cost
/// the system.
pub fn classify_action(action: &BalancingAction) -> ActionCategory {
    match action.kind {
        ActionKind::Offer => ActionCategory::Offer,
        ActionKind::Bid if action.price < 0.0 => ActionCategory::NegativeBid,
        ActionKind::Bid => ActionCategory::PositiveBid,
    }
}

/// Grid-operator sign for an action: +1 for offers, -1 for bids.
fn operator_sign(kind: ActionKind) -> f64 {
    match kind {
        ActionKind::Offer => 1.0,
        ActionKind::Bid => -1.0,
    }
}

/// Cash flow totals per (fuel, year, category).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CashFlowSummary {
    pub totals: BTreeMap<(FuelClass, i32, ActionCategory), f64>,
}

impl CashFlowSummary {
    pub fn get(&self, fuel: FuelClass, year: i32, category: ActionCategory) -> f64 {
        self.totals.get(&(fuel, year, category)).copied().unwrap_or(0.0)
    }

    pub fn category_total(&self, category: ActionCategory) -> f64 {
        self.totals.iter().filter(|((_, _, c), _)| *c == category).map(|(_, v)| v).sum::<f64>() + 0.0
    }

    /// Adds another summary cell by cell.
    pub fn merge(&mut self, other: &CashFlowSummary) {
        for (k, v) in &other.totals {
            *self.totals.entry(*k).or_insert(0.0) += v;
        }
    }
}

/// `Σ V × P × TLM` per category with the grid-operator sign.
pub fn cash_flow<'a>(
    actions: impl IntoIterator<Item = &'a BalancingAction>,
    registry: &Registry,
    sources: &TlmSources,
) -> Result<CashFlowSummary, ImbalanceError> {
    let mut summary = CashFlowSummary::default();
    for action in actions {
        let unit = registry.entry_or_default(&action.unit_id);
        let tlm = sources.resolve_action(&unit, action).map_err(|source| ImbalanceError::Tlm {
            key: action.key,
            unit: action.unit_id.clone(),
            kind: action.kind,
            source,
        })?;
        let flow = operator_sign(action.kind) * action.volume * action.price * tlm.value;
        let cell = (unit.fuel, action.key.date.year(), classify_action(action));
        // `+ 0.0` folds the -0.0 of zero-priced bids into +0.0.
        *summary.totals.entry(cell).or_insert(0.0) += flow + 0.0;
    }
    Ok(summary)
}

/// Table row label: one fuel class or an aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FuelGroup {
    Class(FuelClass),
    AllFuels,
    AllWind,
}

impl FuelGroup {
    pub fn contains(self, fuel: FuelClass) -> bool {
        match self {
            FuelGroup::Class(f) => f == fuel,
            FuelGroup::AllFuels => true,
            FuelGroup::AllWind => fuel.is_wind(),
        }
    }

    pub fn label(self) -> String {
        match self {
            FuelGroup::Class(f) => f.name().to_owned(),
            FuelGroup::AllFuels => "AllFuels".to_owned(),
            FuelGroup::AllWind => "AllWind".to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceRow {
    pub group: FuelGroup,
    pub year: i32,
    pub total_generation_mwh: f64,
    pub volumes_mwh: BTreeMap<ActionCategory, f64>,
    /// Signed percentage of total generation; `None` when that total is zero.
    pub percentages: BTreeMap<ActionCategory, Option<f64>>,
}

impl ImbalanceRow {
    pub fn percentage(&self, category: ActionCategory) -> Option<f64> {
        self.percentages.get(&category).copied().flatten()
    }
}

/// Balancing volume per category as a percentage of annual generation.
/// Offers are positive and both bid categories negative. Rows cover every
/// fuel class and year seen in the table, plus `AllFuels` and `AllWind`.
pub fn imbalance_percentages(table: &JoinedTable) -> Vec<ImbalanceRow> {
    let mut generation: BTreeMap<(FuelClass, i32), f64> = BTreeMap::new();
    let mut volumes: BTreeMap<(FuelClass, i32, ActionCategory), f64> = BTreeMap::new();
    for (key, period) in &table.periods {
        let year = key.date.year();
        for unit in period.units.values() {
            *generation.entry((unit.fuel, year)).or_insert(0.0) += unit.generated();
            for action in &unit.actions {
                *volumes.entry((unit.fuel, year, classify_action(action))).or_insert(0.0) += action.volume;
            }
        }
    }
    let years: std::collections::BTreeSet<i32> =
        generation.keys().map(|(_, y)| *y).chain(volumes.keys().map(|(_, y, _)| *y)).collect();
    let groups = FuelClass::ALL.into_iter().map(FuelGroup::Class).chain([FuelGroup::AllFuels, FuelGroup::AllWind]);

    let mut rows = Vec::new();
    for group in groups {
        for &year in &years {
            let total: f64 =
                generation.iter().filter(|((f, y), _)| *y == year && group.contains(*f)).map(|(_, v)| v).sum::<f64>()
                    + 0.0;
            let mut row = ImbalanceRow {
                group,
                year,
                total_generation_mwh: total,
                volumes_mwh: BTreeMap::new(),
                percentages: BTreeMap::new(),
            };
            for category in ActionCategory::ALL {
                let volume: f64 = volumes
                    .iter()
                    .filter(|((f, y, c), _)| *y == year && *c == category && group.contains(*f))
                    .map(|(_, v)| v)
                    .sum::<f64>()
                    + 0.0;
                let signed = match category {
                    ActionCategory::Offer => volume,
                    _ => 0.0 - volume,
                };
                row.volumes_mwh.insert(category, volume);
                let pct = (total > 0.0).then(|| 100.0 * signed / total);
                row.percentages.insert(category, pct);
            }
            rows.push(row);
        }
    }
    rows
}

/// One negative bid and its distance from its period's volume-weighted mean.
#[derive(Debug, Clone, PartialEq)]
pub struct BidDeviation {
    pub key: SettlementKey,
    pub unit_id: UnitId,
    pub price: f64,
    pub volume: f64,
    pub deviation: f64,
}

/// For every negative bid: price minus the volume-weighted mean negative-bid
/// price of its settlement period (own bid included). Other categories are
/// ignored. Output follows (key, input order).
pub fn negative_bid_deviation<'a>(actions: impl IntoIterator<Item = &'a BalancingAction>) -> Vec<BidDeviation> {
    let mut by_key: BTreeMap<SettlementKey, Vec<&BalancingAction>> = BTreeMap::new();
    for a in actions {
        if classify_action(a) == ActionCategory::NegativeBid {
            by_key.entry(a.key).or_default().push(a);
        }
    }
    let mut out = Vec::new();
    for (key, bids) in by_key {
        let mean = volume_weighted_mean(bids.iter().map(|b| (b.price, b.volume)))
            .expect("negative bids carry positive volumes");
        out.extend(bids.into_iter().map(|b| BidDeviation {
            key,
            unit_id: b.unit_id.clone(),
            price: b.price,
            volume: b.volume,
            deviation: b.price - mean,
        }));
    }
    out
}

/// Box-plot summary with whiskers one interquartile range beyond the box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub n: usize,
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Quartiles are medians of the lower and upper halves; for odd counts the
/// overall median belongs to neither half. A single value is its own quartile.
pub fn box_stats(values: &[f64]) -> Result<BoxStats, ImbalanceError> {
    if values.is_empty() {
        return Err(ImbalanceError::EmptySample);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = median_sorted(&v);
    let (q1, q3) = if n == 1 {
        (median, median)
    } else {
        let half = n / 2;
        (median_sorted(&v[..half]), median_sorted(&v[n - half..]))
    };
    let iqr = q3 - q1;
    Ok(BoxStats { median, q1, q3, whisker_low: q1 - iqr, whisker_high: q3 + iqr, n })
}

/// Σ v·w / Σ w over `(value, weight)` pairs.
pub fn volume_weighted_mean(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<f64, ImbalanceError> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (v, w) in pairs {
        if !(w.is_finite() && w >= 0.0) {
            return Err(ImbalanceError::BadWeights);
        }
        num += v * w;
        den += w;
    }
    if den > 0.0 {
        Ok(num / den)
    } else {
        Err(ImbalanceError::BadWeights)
    }
}

/// System sell and buy prices for one settlement period. Only the side the
/// imbalance exercises is priced.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SystemPrices {
    pub ssp: Option<f64>,
    pub sbp: Option<f64>,
}

/// Walks the stack until `need` MWh are accepted, then averages the
/// `PRICE_SETTING_VOLUME_MWH` MWh at the end ranked first by `costlier`.
fn stack_price(
    mut stack: Vec<(f64, f64)>,
    need: f64,
    acceptance_order: impl Fn(&(f64, f64), &(f64, f64)) -> std::cmp::Ordering,
    costlier_first: impl Fn(&(f64, f64), &(f64, f64)) -> std::cmp::Ordering,
) -> Result<f64, ImbalanceError> {
    let available: f64 = stack.iter().map(|(_, v)| v).sum();
    if available < need {
        return Err(ImbalanceError::Shortfall { needed: need, available, gap: need - available });
    }
    stack.sort_by(&acceptance_order);
    let mut accepted = Vec::new();
    let mut remaining = need;
    for (price, volume) in stack {
        if remaining <= 0.0 {
            break;
        }
        let take = volume.min(remaining);
        accepted.push((price, take));
        remaining -= take;
    }
    accepted.sort_by(&costlier_first);
    let mut window = Vec::new();
    let mut left = PRICE_SETTING_VOLUME_MWH;
    for (price, volume) in accepted {
        if left <= 0.0 {
            break;
        }
        let take = volume.min(left);
        window.push((price, take));
        left -= take;
    }
    volume_weighted_mean(window)
}

/// Simplified imbalance pricing: only the volume-weighted average over the
/// most expensive 500 MWh of accepted energy. NIV tagging, arbitrage and
/// de-minimis steps of the full settlement code are not applied.
///
/// A short system (`net_imbalance > 0`) accepts offers cheapest first and sets
/// SBP; a long system accepts bids from the highest price down and sets SSP
/// from the lowest-priced accepted bids, which may be negative.
pub fn system_prices(actions: &[BalancingAction], net_imbalance: f64) -> Result<SystemPrices, ImbalanceError> {
    let side = |kind: ActionKind| -> Vec<(f64, f64)> {
        actions.iter().filter(|a| a.kind == kind).map(|a| (a.price, a.volume)).collect()
    };
    let asc = |a: &(f64, f64), b: &(f64, f64)| a.0.total_cmp(&b.0);
    let desc = |a: &(f64, f64), b: &(f64, f64)| b.0.total_cmp(&a.0);
    if net_imbalance > 0.0 {
        let sbp = stack_price(side(ActionKind::Offer), net_imbalance, asc, desc)?;
        Ok(SystemPrices { ssp: None, sbp: Some(sbp) })
    } else if net_imbalance < 0.0 {
        let ssp = stack_price(side(ActionKind::Bid), -net_imbalance, desc, asc)?;
        Ok(SystemPrices { ssp: Some(ssp), sbp: None })
    } else {
        Ok(SystemPrices::default())
    }
}

/// Prices both sides of a period as if each whole stack had been needed:
/// SBP from all offers, SSP from all bids.
pub fn full_stack_prices(actions: &[BalancingAction]) -> SystemPrices {
    let volume = |kind| actions.iter().filter(|a| a.kind == kind).map(|a| a.volume).sum::<f64>();
    let offers = volume(ActionKind::Offer);
    let bids = volume(ActionKind::Bid);
    SystemPrices {
        sbp: system_prices(actions, offers).ok().and_then(|p| p.sbp),
        ssp: system_prices(actions, -bids).ok().and_then(|p| p.ssp),
    }
}
