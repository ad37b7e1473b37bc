//! Deterministic synthetic market with planted ground truth.
//!
//! Every settlement period gets a demand level, an integer wind share and a
//! split of that share between onshore and offshore wind. Generation is
//! allocated to units in whole MWh with each period's total a multiple of
//! 100 MWh, so the wind share the pipeline recomputes is exactly the planted
//! integer percentage. Spot prices follow
//!
//! ```text
//! price = y0 + m · wind                              (wind <= knee)
//! price = y0 + m · knee + m_above · (wind − knee)    (wind >  knee)
//! ```
//!
//! plus Gaussian noise, rounded to pence. Balancing actions are drawn per
//! (unit, period, category) with expected volume equal to the planted share
//! of the unit's generation. TLM tables cover every action under the
//! resolution procedure.
//!
//! The random stream is ChaCha8 seeded from `seed`; identical configurations
//! produce identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::imbalance::ActionCategory;
use crate::ingest::{
    write_dataset, ActionKind, BalancingAction, Dataset, DatasetKind, FuelClass, GenerationRecord, IngestError, Role,
    SpotRecord, TlmRecord, UnitId, UnitRegistryEntry,
};
use crate::timebase::{periods_in_day, ClockRule, SettlementKey, TimebaseError};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Timebase(#[from] TimebaseError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest: {0}")]
    Json(#[from] serde_json::Error),
}

/// One value per fuel class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerFuel<T> {
    pub ccgt: T,
    pub coal: T,
    pub wind_onshore_england: T,
    pub wind_onshore_scotland: T,
    pub wind_offshore_england: T,
    pub wind_offshore_scotland: T,
    pub other: T,
}

impl<T> PerFuel<T> {
    pub fn get(&self, fuel: FuelClass) -> &T {
        match fuel {
            FuelClass::Ccgt => &self.ccgt,
            FuelClass::Coal => &self.coal,
            FuelClass::WindOnshoreEngland => &self.wind_onshore_england,
            FuelClass::WindOnshoreScotland => &self.wind_onshore_scotland,
            FuelClass::WindOffshoreEngland => &self.wind_offshore_england,
            FuelClass::WindOffshoreScotland => &self.wind_offshore_scotland,
            FuelClass::Other => &self.other,
        }
    }
}

/// Balancing volume per category as a fraction of the unit's generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryRatios {
    pub offer: f64,
    pub positive_bid: f64,
    pub negative_bid: f64,
}

impl CategoryRatios {
    pub fn get(&self, c: ActionCategory) -> f64 {
        match c {
            ActionCategory::Offer => self.offer,
            ActionCategory::PositiveBid => self.positive_bid,
            ActionCategory::NegativeBid => self.negative_bid,
        }
    }
}

/// Mean and standard deviation of a price draw, £/MWh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceDist {
    pub mean: f64,
    pub spread: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BidDistributions {
    pub offer: PriceDist,
    pub positive_bid: PriceDist,
    pub negative_bid: PriceDist,
}

/// Wind share (% of generation) per period: a daily cycle peaking in the
/// first period of the day, a winter-high seasonal term and Gaussian noise,
/// clipped to `[0, max_pct]` and rounded to whole percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindShareProcess {
    pub mean_pct: f64,
    pub daily_amplitude_pct: f64,
    pub seasonal_amplitude_pct: f64,
    pub noise_pct: f64,
    pub max_pct: f64,
    /// Mean onshore fraction of wind generation.
    pub onshore_fraction: f64,
    pub onshore_fraction_spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub seed: u64,
    pub start: NaiveDate,
    /// Inclusive.
    pub end: NaiveDate,
    pub units: PerFuel<u32>,
    /// Every n-th unit has an unknown producer/consumer role (0 disables).
    pub unknown_role_every: u32,
    /// Demand-side consumer units (fuel `Other`, no generation).
    pub consumer_units: u32,
    pub consumer_action_mwh: f64,
    /// Mean demand per settlement period, MWh.
    pub base_demand_mwh: f64,
    pub daily_demand_swing: f64,
    pub seasonal_demand_swing: f64,
    pub moe_y0: f64,
    pub moe_m: f64,
    pub moe_m_above: f64,
    pub knee_pct: f64,
    pub noise_sigma: f64,
    pub wind_share_process: WindShareProcess,
    pub bid_distributions: PerFuel<BidDistributions>,
    pub imbalance_ratio: PerFuel<CategoryRatios>,
    /// Probability that a (unit, period, category) draw produces an action.
    pub action_probability: f64,
    /// Fraction of days covered by the Elexon TLM table.
    pub elexon_tlm_coverage: f64,
    /// Probability that an action from a unit with a known role carries a
    /// published multiplier (unknown-role units always do).
    pub published_tlm_probability: f64,
    pub producer_tlm: (f64, f64),
    pub consumer_tlm: (f64, f64),
}

fn dist(mean: f64, spread: f64) -> PriceDist {
    PriceDist { mean, spread }
}

fn ratios(offer_pct: f64, positive_pct: f64, negative_pct: f64) -> CategoryRatios {
    CategoryRatios { offer: offer_pct / 100.0, positive_bid: positive_pct / 100.0, negative_bid: negative_pct / 100.0 }
}

impl Default for SynthConfig {
    fn default() -> Self {
        let thermal = |offer: f64, pos: f64, neg: f64| BidDistributions {
            offer: dist(offer, 10.0),
            positive_bid: dist(pos, 8.0),
            negative_bid: dist(neg, 8.0),
        };
        let wind =
            BidDistributions { offer: dist(85.0, 15.0), positive_bid: dist(5.0, 3.0), negative_bid: dist(-75.0, 20.0) };
        Self {
            seed: 1,
            start: NaiveDate::from_ymd_opt(2013, 1, 1).expect("valid"),
            end: NaiveDate::from_ymd_opt(2013, 12, 31).expect("valid"),
            units: PerFuel {
                ccgt: 14,
                coal: 10,
                wind_onshore_england: 3,
                wind_onshore_scotland: 8,
                wind_offshore_england: 8,
                wind_offshore_scotland: 3,
                other: 3,
            },
            unknown_role_every: 4,
            consumer_units: 1,
            consumer_action_mwh: 20.0,
            base_demand_mwh: 16_000.0,
            daily_demand_swing: 0.2,
            seasonal_demand_swing: 0.12,
            moe_y0: 52.85,
            moe_m: -0.88,
            moe_m_above: 0.4,
            knee_pct: 30.0,
            noise_sigma: 5.0,
            wind_share_process: WindShareProcess {
                mean_pct: 11.0,
                daily_amplitude_pct: 5.0,
                seasonal_amplitude_pct: 4.0,
                noise_pct: 6.0,
                max_pct: 45.0,
                onshore_fraction: 0.42,
                onshore_fraction_spread: 0.08,
            },
            bid_distributions: PerFuel {
                ccgt: thermal(70.0, 30.0, -20.0),
                coal: thermal(60.0, 25.0, -15.0),
                wind_onshore_england: wind,
                wind_onshore_scotland: wind,
                wind_offshore_england: wind,
                wind_offshore_scotland: wind,
                other: thermal(90.0, 20.0, -30.0),
            },
            // Shares planted after the 2013 balancing table.
            imbalance_ratio: PerFuel {
                ccgt: ratios(3.047, 2.004, 0.002),
                coal: ratios(0.361, 1.311, 0.051),
                wind_onshore_england: ratios(0.0, 0.0, 0.0),
                wind_onshore_scotland: ratios(2.911, 0.960, 0.001),
                wind_offshore_england: ratios(0.001, 0.0, 3.823),
                wind_offshore_scotland: ratios(0.0, 0.0, 0.0),
                other: ratios(1.0, 1.0, 0.0),
            },
            action_probability: 0.25,
            elexon_tlm_coverage: 0.9,
            published_tlm_probability: 0.5,
            producer_tlm: (0.975, 0.995),
            consumer_tlm: (1.005, 1.025),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self, rule: &ClockRule) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Invalid(m));
        if self.start > self.end {
            return bad(format!("window {}..{} is empty", self.start, self.end));
        }
        for year in self.start.year()..=self.end.year() {
            if !rule.covers_year(year) {
                return bad(format!("year {year} not covered by the clock rule"));
            }
        }
        let producers: u32 = FuelClass::ALL.iter().map(|f| *self.units.get(*f)).sum();
        let thermal = self.units.ccgt + self.units.coal + self.units.other;
        if producers == 0 || thermal == 0 {
            return bad("need at least one non-wind producing unit".into());
        }
        if self.base_demand_mwh.is_nan() || self.base_demand_mwh < 100.0 {
            return bad("base_demand_mwh must be at least 100".into());
        }
        if !(0.0..1.0).contains(&self.daily_demand_swing) || !(0.0..1.0).contains(&self.seasonal_demand_swing) {
            return bad("demand swings must lie in [0, 1)".into());
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return bad("noise_sigma must be non-negative".into());
        }
        if !(self.action_probability > 0.0 && self.action_probability <= 1.0) {
            return bad("action_probability must lie in (0, 1]".into());
        }
        for p in [self.elexon_tlm_coverage, self.published_tlm_probability] {
            if !(0.0..=1.0).contains(&p) {
                return bad("probabilities must lie in [0, 1]".into());
            }
        }
        let w = &self.wind_share_process;
        if !(0.0..=100.0).contains(&w.max_pct) || !(0.0..=1.0).contains(&w.onshore_fraction) {
            return bad("wind share process out of range".into());
        }
        if w.noise_pct < 0.0 || w.onshore_fraction_spread < 0.0 {
            return bad("wind share noise must be non-negative".into());
        }
        for fuel in FuelClass::ALL {
            let r = self.imbalance_ratio.get(fuel);
            for c in ActionCategory::ALL {
                if !(r.get(c) >= 0.0 && r.get(c) < 1.0) {
                    return bad(format!("imbalance ratio for {fuel} {c} must lie in [0, 1)"));
                }
            }
            let d = self.bid_distributions.get(fuel);
            if d.offer.spread < 0.0 || d.positive_bid.spread < 0.0 || d.negative_bid.spread < 0.0 {
                return bad(format!("negative price spread for {fuel}"));
            }
        }
        let (pl, ph) = self.producer_tlm;
        let (cl, ch) = self.consumer_tlm;
        if !(0.5 < pl && pl <= ph && ph < 1.0 && 1.0 < cl && cl <= ch && ch < 1.5) {
            return bad("TLM ranges must satisfy 0.5 < producer < 1 < consumer < 1.5".into());
        }
        Ok(())
    }

    /// Planted spot price before noise.
    pub fn planted_price(&self, wind_pct: f64) -> f64 {
        if wind_pct <= self.knee_pct {
            self.moe_y0 + self.moe_m * wind_pct
        } else {
            self.moe_y0 + self.moe_m * self.knee_pct + self.moe_m_above * (wind_pct - self.knee_pct)
        }
    }
}

/// Emitted datasets plus the flat ground-truth manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub registry: Vec<UnitRegistryEntry>,
    pub generation: Vec<GenerationRecord>,
    pub spot: Vec<SpotRecord>,
    pub actions: Vec<BalancingAction>,
    pub tlm_elexon: Vec<TlmRecord>,
    pub tlm_bmr: Vec<TlmRecord>,
    pub manifest: BTreeMap<String, Value>,
}

impl SynthOutput {
    pub fn datasets(&self) -> Vec<(DatasetKind, Dataset)> {
        vec![
            (DatasetKind::Registry, Dataset::Registry(self.registry.clone())),
            (DatasetKind::Generation, Dataset::Generation(self.generation.clone())),
            (DatasetKind::Spot, Dataset::Spot(self.spot.clone())),
            (DatasetKind::Actions, Dataset::Actions(self.actions.clone())),
            (DatasetKind::TlmElexon, Dataset::TlmElexon(self.tlm_elexon.clone())),
            (DatasetKind::TlmBmr, Dataset::TlmBmr(self.tlm_bmr.clone())),
        ]
    }

    /// Canonical CSV bytes per file name, manifest included.
    pub fn to_files(&self) -> Result<BTreeMap<String, Vec<u8>>, SynthError> {
        let mut files = BTreeMap::new();
        for (kind, data) in self.datasets() {
            let mut buf = Vec::new();
            write_dataset(&mut buf, &data)?;
            files.insert(kind.file_name(), buf);
        }
        let mut manifest = serde_json::to_vec_pretty(&self.manifest)?;
        manifest.push(b'\n');
        files.insert(MANIFEST_FILE.to_owned(), manifest);
        Ok(files)
    }

    pub fn write_to_dir(&self, dir: &Path) -> Result<(), SynthError> {
        fs::create_dir_all(dir)?;
        for (name, bytes) in self.to_files()? {
            fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn unit_prefix(fuel: FuelClass) -> &'static str {
    match fuel {
        FuelClass::Ccgt => "CCGT",
        FuelClass::Coal => "COAL",
        FuelClass::WindOnshoreEngland => "WONE",
        FuelClass::WindOnshoreScotland => "WONS",
        FuelClass::WindOffshoreEngland => "WOFE",
        FuelClass::WindOffshoreScotland => "WOFS",
        FuelClass::Other => "OTHR",
    }
}

struct Unit {
    entry: UnitRegistryEntry,
    weight: f64,
}

fn build_units(cfg: &SynthConfig) -> Vec<Unit> {
    let mut units = Vec::new();
    let mut index = 0u32;
    let onshore_scot = 0.9;
    let offshore_eng = 0.9;
    let region_weight = |fuel: FuelClass, n: u32, other_n: u32, major: f64| {
        let share = match (n, other_n) {
            (_, 0) => 1.0,
            (0, _) => 0.0,
            _ => match fuel {
                FuelClass::WindOnshoreScotland | FuelClass::WindOffshoreEngland => major,
                _ => 1.0 - major,
            },
        };
        share / n.max(1) as f64
    };
    for fuel in FuelClass::ALL {
        let n = *cfg.units.get(fuel);
        let weight = match fuel {
            FuelClass::Ccgt => 0.45 / n.max(1) as f64,
            FuelClass::Coal => 0.5 / n.max(1) as f64,
            FuelClass::Other => 0.05 / n.max(1) as f64,
            FuelClass::WindOnshoreScotland => region_weight(fuel, n, cfg.units.wind_onshore_england, onshore_scot),
            FuelClass::WindOnshoreEngland => region_weight(fuel, n, cfg.units.wind_onshore_scotland, onshore_scot),
            FuelClass::WindOffshoreEngland => region_weight(fuel, n, cfg.units.wind_offshore_scotland, offshore_eng),
            FuelClass::WindOffshoreScotland => region_weight(fuel, n, cfg.units.wind_offshore_england, offshore_eng),
        };
        for i in 0..n {
            index += 1;
            let role = if cfg.unknown_role_every > 0 && index.is_multiple_of(cfg.unknown_role_every) {
                Role::Unknown
            } else {
                Role::Producer
            };
            units.push(Unit {
                entry: UnitRegistryEntry {
                    unit_id: UnitId::new(format!("{}-{:02}", unit_prefix(fuel), i + 1)),
                    fuel,
                    role,
                },
                weight,
            });
        }
    }
    for i in 0..cfg.consumer_units {
        units.push(Unit {
            entry: UnitRegistryEntry {
                unit_id: UnitId::new(format!("DEMD-{:02}", i + 1)),
                fuel: FuelClass::Other,
                role: Role::Consumer,
            },
            weight: 0.0,
        });
    }
    units
}

/// Splits `total` whole MWh across `weights` by largest remainder.
fn split_integer(total: u64, weights: &[f64]) -> Vec<u64> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() || sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut out: Vec<u64> = exact.iter().map(|x| x.floor() as u64).collect();
    let mut left = total - out.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for i in order.into_iter().cycle() {
        if left == 0 {
            break;
        }
        if weights[i] > 0.0 {
            out[i] += 1;
            left -= 1;
        }
    }
    out
}

fn round_to(x: f64, decimals: i32) -> f64 {
    let s = format!("{:.*}", decimals as usize, x);
    s.parse().expect("formatted float parses")
}

struct Draw<'a> {
    rng: ChaCha8Rng,
    normal: Normal<f64>,
    _cfg: &'a SynthConfig,
}

impl Draw<'_> {
    fn gauss(&mut self) -> f64 {
        self.normal.sample(&mut self.rng)
    }

    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            lo
        } else {
            self.rng.random_range(lo..hi)
        }
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.random::<f64>() < p
    }
}

pub fn generate(cfg: &SynthConfig, rule: &ClockRule) -> Result<SynthOutput, SynthError> {
    cfg.validate(rule)?;
    let units = build_units(cfg);
    let mut draw = Draw {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        normal: Normal::new(0.0, 1.0).expect("unit normal"),
        _cfg: cfg,
    };

    let mut generation = Vec::new();
    let mut spot = Vec::new();
    let mut actions = Vec::new();
    let mut tlm_elexon = Vec::new();
    let mut tlm_bmr = Vec::new();
    let mut periods = 0usize;
    let mut sub_knee = 0usize;

    let onshore_idx: Vec<usize> = (0..units.len()).filter(|&i| units[i].entry.fuel.is_onshore()).collect();
    let offshore_idx: Vec<usize> = (0..units.len()).filter(|&i| units[i].entry.fuel.is_offshore()).collect();
    let thermal_idx: Vec<usize> =
        (0..units.len()).filter(|&i| !units[i].entry.fuel.is_wind() && units[i].entry.role != Role::Consumer).collect();
    let wp = cfg.wind_share_process;

    let mut date = cfg.start;
    while date <= cfg.end {
        let n_periods = periods_in_day(date, rule)?;
        let season = (2.0 * std::f64::consts::PI * (date.ordinal0() as f64) / 365.0).cos();
        let elexon_day = draw.chance(cfg.elexon_tlm_coverage);
        for sp in 1..=n_periods {
            let key = SettlementKey::new(date, sp);
            periods += 1;
            let phase = 2.0 * std::f64::consts::PI * (sp - 1) as f64 / n_periods as f64;

            let demand = cfg.base_demand_mwh
                * (1.0 + cfg.seasonal_demand_swing * season)
                * (1.0 - cfg.daily_demand_swing * phase.cos());
            let hundreds = (demand / 100.0).round().max(1.0) as u64;
            let total = hundreds * 100;

            let raw_wind = wp.mean_pct
                + wp.daily_amplitude_pct * phase.cos()
                + wp.seasonal_amplitude_pct * season
                + wp.noise_pct * draw.gauss();
            let mut wind_pct = raw_wind.clamp(0.0, wp.max_pct).round() as u64;
            let frac = (wp.onshore_fraction + wp.onshore_fraction_spread * draw.gauss()).clamp(0.0, 1.0);
            let mut onshore_pct = ((wind_pct as f64) * frac).round() as u64;
            if onshore_idx.is_empty() {
                onshore_pct = 0;
            }
            if offshore_idx.is_empty() {
                wind_pct = onshore_pct;
            }
            if onshore_idx.is_empty() && offshore_idx.is_empty() {
                wind_pct = 0;
            }
            let offshore_pct = wind_pct - onshore_pct;
            if (wind_pct as f64) <= 25.0 {
                sub_knee += 1;
            }

            // Whole-MWh allocation; one percent of `total` is `hundreds` MWh.
            let mut volumes = vec![None::<u64>; units.len()];
            let mut allocate = |idx: &[usize], amount: u64, draw: &mut Draw| {
                let weights: Vec<f64> = idx.iter().map(|&i| units[i].weight * draw.uniform(0.7, 1.3)).collect();
                for (&i, v) in idx.iter().zip(split_integer(amount, &weights)) {
                    volumes[i] = Some(v);
                }
            };
            allocate(&onshore_idx, onshore_pct * hundreds, &mut draw);
            allocate(&offshore_idx, offshore_pct * hundreds, &mut draw);
            allocate(&thermal_idx, total - wind_pct * hundreds, &mut draw);

            let noise = cfg.noise_sigma * draw.gauss();
            let price = round_to(cfg.planted_price(wind_pct as f64) + noise, 2);
            let traded = round_to(total as f64 * draw.uniform(0.05, 0.2), 3);
            spot.push(SpotRecord { key, price, traded_volume: traded });

            let producer_tlm = round_to(draw.uniform(cfg.producer_tlm.0, cfg.producer_tlm.1), 4);
            let consumer_tlm = round_to(draw.uniform(cfg.consumer_tlm.0, cfg.consumer_tlm.1), 4);
            tlm_bmr.push(TlmRecord { key, role: Role::Producer, multiplier: producer_tlm });
            tlm_bmr.push(TlmRecord { key, role: Role::Consumer, multiplier: consumer_tlm });
            if elexon_day {
                let shift =
                    |d: &mut Draw, v: f64, lo: f64, hi: f64| round_to((v + d.uniform(-0.001, 0.001)).clamp(lo, hi), 4);
                let p = shift(&mut draw, producer_tlm, cfg.producer_tlm.0, cfg.producer_tlm.1);
                let c = shift(&mut draw, consumer_tlm, cfg.consumer_tlm.0, cfg.consumer_tlm.1);
                tlm_elexon.push(TlmRecord { key, role: Role::Producer, multiplier: p });
                tlm_elexon.push(TlmRecord { key, role: Role::Consumer, multiplier: c });
            }

            for (i, unit) in units.iter().enumerate() {
                let entry = &unit.entry;
                if let Some(v) = volumes[i] {
                    generation.push(GenerationRecord { key, unit_id: entry.unit_id.clone(), volume: v as f64 });
                }
                let gen = volumes[i].unwrap_or(0) as f64;
                let r = cfg.imbalance_ratio.get(entry.fuel);
                let prices = cfg.bid_distributions.get(entry.fuel);
                // At most one offer and one bid per (unit, period); a bid's
                // sign is drawn in proportion to the two bid ratios.
                for kind in [ActionKind::Offer, ActionKind::Bid] {
                    let ratio = match kind {
                        ActionKind::Offer => r.offer,
                        ActionKind::Bid => r.positive_bid + r.negative_bid,
                    };
                    let volume = if entry.role == Role::Consumer {
                        if kind != ActionKind::Offer || !draw.chance(cfg.action_probability) {
                            continue;
                        }
                        cfg.consumer_action_mwh * draw.uniform(0.5, 1.5)
                    } else {
                        if ratio <= 0.0 || gen <= 0.0 || !draw.chance(cfg.action_probability) {
                            continue;
                        }
                        ratio / cfg.action_probability * gen * draw.uniform(0.5, 1.5)
                    };
                    let category = match kind {
                        ActionKind::Offer => ActionCategory::Offer,
                        ActionKind::Bid if draw.uniform(0.0, ratio) < r.negative_bid => ActionCategory::NegativeBid,
                        ActionKind::Bid => ActionCategory::PositiveBid,
                    };
                    let dist = match category {
                        ActionCategory::Offer => prices.offer,
                        ActionCategory::PositiveBid => prices.positive_bid,
                        ActionCategory::NegativeBid => prices.negative_bid,
                    };
                    let volume = round_to(volume, 3);
                    if volume <= 0.0 {
                        continue;
                    }
                    let raw = dist.mean + dist.spread * draw.gauss();
                    let price = match category {
                        ActionCategory::Offer | ActionCategory::PositiveBid => round_to(raw.max(0.0), 2),
                        ActionCategory::NegativeBid => round_to(raw.min(-0.01), 2),
                    };
                    let table_tlm = match entry.role {
                        Role::Consumer => consumer_tlm,
                        _ => producer_tlm,
                    };
                    let published = match entry.role {
                        Role::Unknown => true,
                        _ => draw.chance(cfg.published_tlm_probability),
                    };
                    let tlm_published = published.then(|| {
                        let jitter = draw.uniform(-0.0005, 0.0005);
                        let v = round_to(table_tlm + jitter, 4);
                        match entry.role {
                            Role::Consumer => v.max(1.0001),
                            _ => v.min(0.9999),
                        }
                    });
                    actions.push(BalancingAction {
                        key,
                        unit_id: entry.unit_id.clone(),
                        kind,
                        volume,
                        price,
                        tlm_published,
                    });
                }
            }
        }
        date = date.succ_opt().expect("date in range");
    }

    let registry: Vec<UnitRegistryEntry> = units.iter().map(|u| u.entry.clone()).collect();
    let manifest = manifest(cfg, &registry, periods, sub_knee);
    Ok(SynthOutput { registry, generation, spot, actions, tlm_elexon, tlm_bmr, manifest })
}

fn manifest(
    cfg: &SynthConfig,
    registry: &[UnitRegistryEntry],
    periods: usize,
    sub_knee: usize,
) -> BTreeMap<String, Value> {
    let mut m = BTreeMap::new();
    let mut put = |k: String, v: Value| {
        m.insert(k, v);
    };
    put("seed".into(), json!(cfg.seed));
    put("window.start".into(), json!(cfg.start.to_string()));
    put("window.end".into(), json!(cfg.end.to_string()));
    put("periods".into(), json!(periods));
    put("periods.wind_le_25pct".into(), json!(sub_knee));
    put("units.total".into(), json!(registry.len()));
    put("units.unknown_role".into(), json!(registry.iter().filter(|u| u.role == Role::Unknown).count()));
    put("units.consumer".into(), json!(registry.iter().filter(|u| u.role == Role::Consumer).count()));
    put("moe.y0".into(), json!(cfg.moe_y0));
    put("moe.m".into(), json!(cfg.moe_m));
    put("moe.m_above".into(), json!(cfg.moe_m_above));
    put("moe.knee_pct".into(), json!(cfg.knee_pct));
    put("moe.noise_sigma".into(), json!(cfg.noise_sigma));
    put("moe.wind_pct_quantum".into(), json!(1.0));
    put("action_probability".into(), json!(cfg.action_probability));
    put("tlm.elexon_day_coverage".into(), json!(cfg.elexon_tlm_coverage));
    put("tlm.producer_range".into(), json!([cfg.producer_tlm.0, cfg.producer_tlm.1]));
    put("tlm.consumer_range".into(), json!([cfg.consumer_tlm.0, cfg.consumer_tlm.1]));
    for fuel in FuelClass::ALL {
        put(format!("units.{fuel}"), json!(registry.iter().filter(|u| u.fuel == fuel).count()));
        let r = cfg.imbalance_ratio.get(fuel);
        let d = cfg.bid_distributions.get(fuel);
        for c in ActionCategory::ALL {
            let signed = match c {
                ActionCategory::Offer => 100.0 * r.get(c),
                _ => -100.0 * r.get(c),
            };
            put(format!("imbalance_pct.{fuel}.{c}"), json!(signed));
        }
        for (name, p) in [("offer", d.offer), ("positive_bid", d.positive_bid), ("negative_bid", d.negative_bid)] {
            put(format!("price.{fuel}.{name}.mean"), json!(p.mean));
            put(format!("price.{fuel}.{name}.spread"), json!(p.spread));
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            start: NaiveDate::from_ymd_opt(2013, 3, 30).unwrap(),
            end: NaiveDate::from_ymd_opt(2013, 4, 1).unwrap(),
            ..SynthConfig::default()
        }
    }

    #[test]
    fn integer_split() {
        assert_eq!(split_integer(10, &[1.0, 1.0, 1.0]), vec![4, 3, 3]);
        assert_eq!(split_integer(7, &[0.0, 2.0]), vec![0, 7]);
        assert_eq!(split_integer(5, &[]), Vec::<u64>::new());
        let v = split_integer(12_345, &[0.3, 0.11, 0.59]);
        assert_eq!(v.iter().sum::<u64>(), 12_345);
    }

    #[test]
    fn same_seed_same_output() {
        let rule = ClockRule::uk_default();
        let a = generate(&small(), &rule).unwrap().to_files().unwrap();
        let b = generate(&small(), &rule).unwrap().to_files().unwrap();
        assert_eq!(a, b);
        let c = generate(&SynthConfig { seed: 2, ..small() }, &rule).unwrap().to_files().unwrap();
        assert_ne!(a["spot.csv"], c["spot.csv"]);
    }

    #[test]
    fn clock_change_day_has_46_periods() {
        let out = generate(&small(), &ClockRule::uk_default()).unwrap();
        let spring = NaiveDate::from_ymd_opt(2013, 3, 31).unwrap();
        assert_eq!(out.spot.iter().filter(|s| s.key.date == spring).count(), 46);
        assert_eq!(out.manifest["periods"], json!(48 + 46 + 48));
    }

    #[test]
    fn rejects_bad_config() {
        let rule = ClockRule::uk_default();
        let mut cfg = small();
        cfg.end = NaiveDate::from_ymd_opt(2013, 1, 1).unwrap();
        assert!(matches!(generate(&cfg, &rule), Err(SynthError::Invalid(_))));
        let mut cfg = small();
        cfg.units.ccgt = 0;
        cfg.units.coal = 0;
        cfg.units.other = 0;
        assert!(generate(&cfg, &rule).is_err());
        let mut cfg = small();
        cfg.action_probability = 0.0;
        assert!(generate(&cfg, &rule).is_err());
        let mut cfg = small();
        cfg.start = NaiveDate::from_ymd_opt(1990, 1, 1).unwrap();
        assert!(generate(&cfg, &rule).is_err());
    }

    #[test]
    fn actions_respect_sign_rules() {
        let out = generate(&small(), &ClockRule::uk_default()).unwrap();
        assert!(!out.actions.is_empty());
        for a in &out.actions {
            assert!(a.volume > 0.0);
            if a.kind == ActionKind::Offer {
                assert!(a.price >= 0.0);
            }
        }
    }
}
