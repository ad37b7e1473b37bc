//! Counterfactual wind scenarios.
//!
//! Historic spot prices are binned by settlement-period index and total wind
//! share (5% bins by default). A scenario price for a period is the binned
//! mean at the wind share the scenario implies:
//!
//! * `LowWind`: the `[0, 5)` bin,
//! * `NoOnshore`: the bin of the offshore share alone,
//! * `NoOffshore`: the bin of the onshore share alone.
//!
//! Missing or thin cells (fewer than `min_n` samples) fall back to the actual
//! spot price. Demand is held fixed: every period's generated MWh is costed at
//! the scenario price. Totals are exact integer micro-pounds.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imbalance::volume_weighted_mean;
use crate::ingest::JoinedTable;
use crate::moe::{wind_share, WindSharePoint};
use crate::money::Money;
use crate::timebase::SettlementKey;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CounterfactualError {
    #[error("bin width must be in (0, 100], got {0}")]
    BadBinWidth(f64),
    #[error("empty window {from}..{to}")]
    EmptyWindow { from: NaiveDate, to: NaiveDate },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scenario {
    Actual,
    LowWind,
    NoOnshore,
    NoOffshore,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::Actual, Scenario::NoOnshore, Scenario::NoOffshore, Scenario::LowWind];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Actual => "actual",
            Scenario::LowWind => "low_wind",
            Scenario::NoOnshore => "no_onshore",
            Scenario::NoOffshore => "no_offshore",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| format!("unknown scenario `{s}`"))
    }
}

/// Inclusive date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub from: NaiveDate,
    pub to: NaiveDate,
}

impl Window {
    pub fn new(from: NaiveDate, to: NaiveDate) -> Result<Self, CounterfactualError> {
        if from > to {
            return Err(CounterfactualError::EmptyWindow { from, to });
        }
        Ok(Self { from, to })
    }

    pub fn year(year: i32) -> Self {
        Self {
            from: NaiveDate::from_ymd_opt(year, 1, 1).expect("valid year"),
            to: NaiveDate::from_ymd_opt(year, 12, 31).expect("valid year"),
        }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        date >= self.from && date <= self.to
    }

    pub fn intersect(&self, other: &Window) -> Option<Window> {
        let from = self.from.max(other.from);
        let to = self.to.min(other.to);
        (from <= to).then_some(Window { from, to })
    }
}

impl FromStr for Window {
    type Err = String;

    /// `YYYY-MM-DD..YYYY-MM-DD`, both ends inclusive.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s.split_once("..").ok_or_else(|| format!("expected FROM..TO, got `{s}`"))?;
        let parse =
            |x: &str| NaiveDate::parse_from_str(x.trim(), "%Y-%m-%d").map_err(|e| format!("bad date `{x}`: {e}"));
        Window::new(parse(a)?, parse(b)?).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceCell {
    pub mean_price: f64,
    pub n: usize,
    pub volume: f64,
}

/// Volume-weighted mean spot price per (settlement-period index, wind bin).
/// Bin `b` covers `[b·w, (b+1)·w)`; a share of exactly 100% joins the top bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedPriceTable {
    pub bin_width: f64,
    pub cells: BTreeMap<(u32, u32), PriceCell>,
}

impl BinnedPriceTable {
    pub fn bin_of(&self, pct: f64) -> u32 {
        bin_index(pct, self.bin_width)
    }

    pub fn get(&self, sp: u32, bin: u32) -> Option<&PriceCell> {
        self.cells.get(&(sp, bin))
    }

    pub fn sample_count(&self) -> usize {
        self.cells.values().map(|c| c.n).sum()
    }
}

fn bin_index(pct: f64, width: f64) -> u32 {
    let top = ((100.0 / width).ceil() as u32).saturating_sub(1);
    let b = (pct.max(0.0) / width).floor();
    (b as u32).min(top)
}

pub const DEFAULT_BIN_WIDTH: f64 = 5.0;
pub const DEFAULT_MIN_N: usize = 5;

pub fn build_bins(points: &[WindSharePoint], bin_width: f64) -> Result<BinnedPriceTable, CounterfactualError> {
    if !(bin_width > 0.0 && bin_width <= 100.0) {
        return Err(CounterfactualError::BadBinWidth(bin_width));
    }
    let mut groups: BTreeMap<(u32, u32), Vec<&WindSharePoint>> = BTreeMap::new();
    for p in points {
        groups.entry((p.key.sp, bin_index(p.wind_pct, bin_width))).or_default().push(p);
    }
    let cells = groups
        .into_iter()
        .map(|(idx, pts)| {
            let volume: f64 = pts.iter().map(|p| p.volume).sum();
            let mean_price = volume_weighted_mean(pts.iter().map(|p| (p.price, p.volume)))
                .unwrap_or_else(|_| pts.iter().map(|p| p.price).sum::<f64>() / pts.len() as f64);
            (idx, PriceCell { mean_price, n: pts.len(), volume })
        })
        .collect();
    Ok(BinnedPriceTable { bin_width, cells })
}

/// Scenario price and whether it fell back to the actual price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceLookup {
    pub price: f64,
    pub fallback: bool,
}

pub fn lookup_scenario(
    point: &WindSharePoint,
    scenario: Scenario,
    table: &BinnedPriceTable,
    min_n: usize,
) -> PriceLookup {
    let share = match scenario {
        Scenario::Actual => return PriceLookup { price: point.price, fallback: false },
        Scenario::LowWind => 0.0,
        Scenario::NoOnshore => point.offshore_pct,
        Scenario::NoOffshore => point.onshore_pct,
    };
    match table.get(point.key.sp, table.bin_of(share)) {
        Some(cell) if cell.n >= min_n => PriceLookup { price: cell.mean_price, fallback: false },
        _ => PriceLookup { price: point.price, fallback: true },
    }
}

pub fn scenario_price(point: &WindSharePoint, scenario: Scenario, table: &BinnedPriceTable, min_n: usize) -> f64 {
    lookup_scenario(point, scenario, table, min_n).price
}

/// Priced periods plus the generation that could not be priced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CostInputs {
    /// One point per key with generation and a spot price; weight = total MWh.
    pub points: Vec<WindSharePoint>,
    /// Keys with generation but no spot price.
    pub unpriced: Vec<(SettlementKey, f64)>,
}

impl CostInputs {
    pub fn from_table(table: &JoinedTable) -> Self {
        let mut out = CostInputs::default();
        for (key, period) in &table.periods {
            let Ok(share) = wind_share(table, *key) else { continue };
            match &period.spot {
                Some(spot) => out.points.push(share.with_price(spot.price)),
                None => out.unpriced.push((*key, share.total_mwh)),
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScenarioCost {
    pub total: Money,
    pub keys: usize,
    pub fallback_keys: usize,
    pub skipped_keys: usize,
    pub skipped_mwh: f64,
}

impl ScenarioCost {
    pub fn fallback_fraction(&self) -> f64 {
        if self.keys == 0 {
            0.0
        } else {
            self.fallback_keys as f64 / self.keys as f64
        }
    }
}

/// Σ over keys in the window of generated MWh × scenario price.
pub fn scenario_cost(
    window: &Window,
    scenario: Scenario,
    inputs: &CostInputs,
    table: &BinnedPriceTable,
    min_n: usize,
) -> ScenarioCost {
    let mut out = ScenarioCost::default();
    for p in inputs.points.iter().filter(|p| window.contains(p.key.date)) {
        let lookup = lookup_scenario(p, scenario, table, min_n);
        out.total += Money::of_energy(p.volume, lookup.price);
        out.keys += 1;
        out.fallback_keys += lookup.fallback as usize;
    }
    for (_, mwh) in inputs.unpriced.iter().filter(|(k, _)| window.contains(k.date)) {
        out.skipped_keys += 1;
        out.skipped_mwh += mwh;
    }
    out
}

/// Calendar-month costs per scenario; months sum exactly to [`scenario_cost`].
pub fn monthly_series(
    window: &Window,
    scenarios: &[Scenario],
    inputs: &CostInputs,
    table: &BinnedPriceTable,
    min_n: usize,
) -> BTreeMap<((i32, u32), Scenario), Money> {
    let mut out = BTreeMap::new();
    for p in inputs.points.iter().filter(|p| window.contains(p.key.date)) {
        let month = (p.key.date.year(), p.key.date.month());
        for &s in scenarios {
            let price = scenario_price(p, s, table, min_n);
            *out.entry((month, s)).or_insert(Money::ZERO) += Money::of_energy(p.volume, price);
        }
    }
    out
}

/// One calendar year of scenario costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub year: i32,
    pub actual: Money,
    pub no_onshore: Money,
    pub no_offshore: Money,
    pub low_wind: Money,
    pub fallback_fraction: f64,
    pub skipped_mwh: f64,
}

impl CostRow {
    pub fn increase(&self) -> Money {
        self.low_wind - self.actual
    }

    pub fn increase_pct(&self) -> f64 {
        100.0 * self.increase().pounds() / self.actual.pounds()
    }

    /// Year, the four costs and the increase in £bn to two decimals, then
    /// the increase in percent to one decimal.
    pub fn display_cells(&self) -> [String; 7] {
        let bn = |m: Money| format!("{:.2}", m.billions());
        [
            self.year.to_string(),
            bn(self.actual),
            bn(self.no_onshore),
            bn(self.no_offshore),
            bn(self.low_wind),
            bn(self.increase()),
            format!("{:.1}", self.increase_pct()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CostReport {
    pub rows: Vec<CostRow>,
}

/// Annual rows for every calendar year intersecting `window` that has priced data.
pub fn cost_report(window: &Window, inputs: &CostInputs, table: &BinnedPriceTable, min_n: usize) -> CostReport {
    let years: std::collections::BTreeSet<i32> =
        inputs.points.iter().filter(|p| window.contains(p.key.date)).map(|p| p.key.date.year()).collect();
    let rows = years
        .into_iter()
        .filter_map(|year| {
            let w = Window::year(year).intersect(window)?;
            let cost = |s| scenario_cost(&w, s, inputs, table, min_n);
            let actual = cost(Scenario::Actual);
            let low = cost(Scenario::LowWind);
            Some(CostRow {
                year,
                actual: actual.total,
                no_onshore: cost(Scenario::NoOnshore).total,
                no_offshore: cost(Scenario::NoOffshore).total,
                low_wind: low.total,
                fallback_fraction: low.fallback_fraction(),
                skipped_mwh: actual.skipped_mwh,
            })
        })
        .collect();
    CostReport { rows }
}

/// Savings less subsidy and curtailment costs.
pub fn net_position(savings: Money, roc_cost: Money, curtailment_cost: Money, other_subsidy: Money) -> Money {
    savings - roc_cost - curtailment_cost - other_subsidy
}
