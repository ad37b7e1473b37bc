//! Merit Order Effect: wind share per settlement period, piecewise linear
//! price fits either side of a fixed knee, the relative price drop per point
//! of wind, and the onshore/offshore price grid.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imbalance::full_stack_prices;
use crate::ingest::{FuelClass, JoinedTable};
use crate::timebase::SettlementKey;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MoeError {
    #[error("no generation recorded at {0}")]
    NoGeneration(SettlementKey),
    #[error("settlement key {0} not in table")]
    UnknownKey(SettlementKey),
    #[error("{series} fit over [{lo}, {hi}]%: need two distinct wind shares with positive weight, found {distinct}")]
    RankDeficient { series: PriceSeries, lo: f64, hi: f64, distinct: usize },
    #[error("zero-wind intercept {0} is not positive")]
    NonPositiveIntercept(f64),
    #[error("cell width must be positive, got {0}")]
    BadCellWidth(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PriceSeries {
    #[serde(rename = "SSP")]
    Ssp,
    #[serde(rename = "SBP")]
    Sbp,
    Spot,
}

impl PriceSeries {
    pub const ALL: [PriceSeries; 3] = [PriceSeries::Ssp, PriceSeries::Sbp, PriceSeries::Spot];

    pub fn name(self) -> &'static str {
        match self {
            PriceSeries::Ssp => "SSP",
            PriceSeries::Sbp => "SBP",
            PriceSeries::Spot => "Spot",
        }
    }
}

impl fmt::Display for PriceSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PriceSeries {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PriceSeries::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown price series `{s}`"))
    }
}

/// Wind penetration in one settlement period, as percentages of total generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindShare {
    pub key: SettlementKey,
    pub wind_pct: f64,
    pub onshore_pct: f64,
    pub offshore_pct: f64,
    pub total_mwh: f64,
}

impl WindShare {
    pub fn with_price(self, price: f64) -> WindSharePoint {
        WindSharePoint {
            key: self.key,
            wind_pct: self.wind_pct,
            onshore_pct: self.onshore_pct,
            offshore_pct: self.offshore_pct,
            price,
            volume: self.total_mwh,
        }
    }
}

/// A wind share paired with a price; `volume` is the regression/binning weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindSharePoint {
    pub key: SettlementKey,
    pub wind_pct: f64,
    pub onshore_pct: f64,
    pub offshore_pct: f64,
    pub price: f64,
    pub volume: f64,
}

pub fn wind_share(table: &JoinedTable, key: SettlementKey) -> Result<WindShare, MoeError> {
    let period = table.periods.get(&key).ok_or(MoeError::UnknownKey(key))?;
    let mut total = 0.0;
    let mut onshore = 0.0;
    let mut offshore = 0.0;
    for unit in period.units.values() {
        let v = unit.generated();
        total += v;
        match unit.fuel {
            f if f.is_onshore() => onshore += v,
            f if f.is_offshore() => offshore += v,
            _ => {}
        }
    }
    if total <= 0.0 {
        return Err(MoeError::NoGeneration(key));
    }
    Ok(WindShare {
        key,
        wind_pct: 100.0 * (onshore + offshore) / total,
        onshore_pct: 100.0 * onshore / total,
        offshore_pct: 100.0 * offshore / total,
        total_mwh: total,
    })
}

/// Wind shares for every key with generation, in key order.
pub fn wind_shares(table: &JoinedTable) -> Vec<WindShare> {
    table.periods.keys().filter_map(|k| wind_share(table, *k).ok()).collect()
}

/// Points for one price series. Keys without generation or without a price
/// for the series are skipped.
pub fn wind_points(table: &JoinedTable, series: PriceSeries) -> Vec<WindSharePoint> {
    let mut out = Vec::new();
    for (key, period) in &table.periods {
        let Ok(share) = wind_share(table, *key) else { continue };
        let price = match series {
            PriceSeries::Spot => period.spot.as_ref().map(|s| s.price),
            PriceSeries::Ssp | PriceSeries::Sbp => {
                let actions: Vec<_> = period.units.values().flat_map(|u| u.actions.iter().cloned()).collect();
                let prices = full_stack_prices(&actions);
                if series == PriceSeries::Ssp {
                    prices.ssp
                } else {
                    prices.sbp
                }
            }
        };
        if let Some(price) = price {
            out.push(share.with_price(price));
        }
    }
    out
}

/// Sum of fuel-class generation in the table (diagnostic).
pub fn generation_by_fuel(table: &JoinedTable) -> BTreeMap<FuelClass, f64> {
    let mut out = BTreeMap::new();
    for row in table.rows() {
        *out.entry(row.unit.fuel).or_insert(0.0) += row.unit.generated();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Weighting {
    /// Weight each point by its volume.
    #[default]
    Volume,
    /// Ordinary least squares.
    Unweighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Wind share (%) separating the two regimes.
    pub knee: f64,
    /// Upper end of the below-knee regression window; clipped to `knee`.
    pub below_cap: f64,
    pub weighting: Weighting,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { knee: 30.0, below_cap: 25.0, weighting: Weighting::Volume }
    }
}

/// `price = y0 + m · wind_pct` over `range`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub series: PriceSeries,
    pub y0: f64,
    pub m: f64,
    /// Wind share where the line crosses zero; absent for a flat line.
    pub x0: Option<f64>,
    pub range: (f64, f64),
    pub n: usize,
}

/// Least-squares line over points with `lo <= wind_pct <= hi`.
pub fn fit_line(
    points: &[WindSharePoint],
    series: PriceSeries,
    lo: f64,
    hi: f64,
    weighting: Weighting,
) -> Result<FitResult, MoeError> {
    let selected: Vec<(f64, f64, f64)> = points
        .iter()
        .filter(|p| p.wind_pct >= lo && p.wind_pct <= hi)
        .map(|p| {
            let w = match weighting {
                Weighting::Volume => p.volume,
                Weighting::Unweighted => 1.0,
            };
            (p.wind_pct, p.price, w)
        })
        .filter(|(_, _, w)| *w > 0.0)
        .collect();
    let mut xs: Vec<f64> = selected.iter().map(|(x, _, _)| *x).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let deficient = MoeError::RankDeficient { series, lo, hi, distinct: xs.len() };
    if xs.len() < 2 {
        return Err(deficient);
    }

    let sw: f64 = selected.iter().map(|(_, _, w)| w).sum();
    let mx = selected.iter().map(|(x, _, w)| w * x).sum::<f64>() / sw;
    let my = selected.iter().map(|(_, y, w)| w * y).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y, w) in &selected {
        sxx += w * (x - mx) * (x - mx);
        sxy += w * (x - mx) * (y - my);
    }
    if sxx <= 0.0 {
        return Err(deficient);
    }
    let m = sxy / sxx;
    let y0 = my - m * mx;
    let x0 = (m != 0.0).then(|| -y0 / m);
    Ok(FitResult { series, y0, m, x0, range: (lo, hi), n: selected.len() })
}

/// Fits below and above the knee. The lower window is `[0, min(cap, knee)]`,
/// the upper one `[knee, 100]`.
pub fn fit_piecewise(
    points: &[WindSharePoint],
    series: PriceSeries,
    options: &FitOptions,
) -> Result<(FitResult, FitResult), MoeError> {
    let below = fit_line(points, series, 0.0, options.below_cap.min(options.knee), options.weighting)?;
    let above = fit_line(points, series, options.knee, 100.0, options.weighting)?;
    Ok((below, above))
}

/// Percentage price drop per percentage point of wind, relative to the
/// zero-wind price: `100 · |m| / y0`.
pub fn relative_moe(fit: &FitResult) -> Result<f64, MoeError> {
    if fit.y0 <= 0.0 {
        return Err(MoeError::NonPositiveIntercept(fit.y0));
    }
    Ok(100.0 * fit.m.abs() / fit.y0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourCell {
    pub mean_price: f64,
    pub n: usize,
    pub volume: f64,
}

/// Volume-weighted mean price over (onshore, offshore) cells. Cell `(i, j)`
/// covers onshore in `[i·w, (i+1)·w)` and offshore in `[j·w, (j+1)·w)`.
/// Cells without points are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourGrid {
    pub cell_width: f64,
    pub cells: BTreeMap<(i64, i64), ContourCell>,
}

impl ContourGrid {
    pub fn cell_of(&self, onshore_pct: f64, offshore_pct: f64) -> (i64, i64) {
        cell_index(onshore_pct, offshore_pct, self.cell_width)
    }

    pub fn get(&self, onshore_pct: f64, offshore_pct: f64) -> Option<&ContourCell> {
        self.cells.get(&self.cell_of(onshore_pct, offshore_pct))
    }
}

fn cell_index(onshore: f64, offshore: f64, width: f64) -> (i64, i64) {
    ((onshore / width).floor() as i64, (offshore / width).floor() as i64)
}

pub fn contour_grid(points: &[WindSharePoint], cell_width: f64) -> Result<ContourGrid, MoeError> {
    if !(cell_width > 0.0 && cell_width.is_finite()) {
        return Err(MoeError::BadCellWidth(cell_width));
    }
    // (Σ p·v, Σ v, Σ p, n)
    let mut acc: BTreeMap<(i64, i64), (f64, f64, f64, usize)> = BTreeMap::new();
    for p in points {
        let e = acc.entry(cell_index(p.onshore_pct, p.offshore_pct, cell_width)).or_default();
        e.0 += p.price * p.volume;
        e.1 += p.volume;
        e.2 += p.price;
        e.3 += 1;
    }
    let cells = acc
        .into_iter()
        .map(|(idx, (pv, v, p, n))| {
            let mean_price = if v > 0.0 { pv / v } else { p / n as f64 };
            (idx, ContourCell { mean_price, n, volume: v })
        })
        .collect();
    Ok(ContourGrid { cell_width, cells })
}
