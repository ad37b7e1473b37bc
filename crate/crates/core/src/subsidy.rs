//! Renewable Obligation Certificate accounting, FIT aggregates and the
//! lost-subsidy screen for negative bids.
//!
//! Ledger CSV: `period,technology,certificates_millions,cost_gbp_bn`, where
//! `period` is an April to March obligation period such as `2013-14` and
//! `technology` is `OnshoreWind`, `OffshoreWind` or `TOTAL`. Values are kept
//! as exact decimals.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imbalance::{classify_action, ActionCategory};
use crate::ingest::BalancingAction;
use crate::money::Money;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SubsidyError {
    #[error("ledger line {line}: {reason}")]
    Format { line: u64, reason: String },
    #[error("obligation period {0} not in ledger")]
    UnknownPeriod(ObligationPeriod),
    #[error("no certificates for {0}")]
    ZeroCertificates(ObligationPeriod),
    #[error("{period}: published total {published} differs from recomputed {computed} by more than rounding")]
    TotalMismatch { period: ObligationPeriod, published: String, computed: String },
}

/// April to March obligation period, identified by its starting year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObligationPeriod(pub i32);

impl fmt::Display for ObligationPeriod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{:02}", self.0, (self.0 + 1).rem_euclid(100))
    }
}

impl FromStr for ObligationPeriod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("expected an obligation period like `2013-14`, got `{s}`");
        let (a, b) = s.trim().split_once('-').ok_or_else(bad)?;
        let start: i32 = a.parse().map_err(|_| bad())?;
        let end: i32 = b.parse().map_err(|_| bad())?;
        if b.len() != 2 || (start + 1).rem_euclid(100) != end {
            return Err(bad());
        }
        Ok(ObligationPeriod(start))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Technology {
    OffshoreWind,
    OnshoreWind,
}

impl Technology {
    pub const ALL: [Technology; 2] = [Technology::OffshoreWind, Technology::OnshoreWind];

    pub fn name(self) -> &'static str {
        match self {
            Technology::OffshoreWind => "OffshoreWind",
            Technology::OnshoreWind => "OnshoreWind",
        }
    }
}

impl FromStr for Technology {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "OffshoreWind" => Ok(Technology::OffshoreWind),
            "OnshoreWind" => Ok(Technology::OnshoreWind),
            other => Err(format!("unknown technology `{other}`")),
        }
    }
}

/// Certificates (millions) and cost (£bn) as exact decimals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RocAmount {
    pub certificates_millions: Decimal,
    pub cost_gbp_bn: Decimal,
}

impl RocAmount {
    pub fn certificates(&self) -> Decimal {
        self.certificates_millions * Decimal::from(1_000_000)
    }

    pub fn cost(&self) -> Money {
        let micros = self.cost_gbp_bn * Decimal::from(1_000_000_000_000_000i64);
        Money::from_micros(micros.round().to_i128().expect("cost fits in i128"))
    }
}

impl std::ops::Add for RocAmount {
    type Output = RocAmount;
    fn add(self, rhs: RocAmount) -> RocAmount {
        RocAmount {
            certificates_millions: self.certificates_millions + rhs.certificates_millions,
            cost_gbp_bn: self.cost_gbp_bn + rhs.cost_gbp_bn,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RocLedger {
    pub entries: BTreeMap<(ObligationPeriod, Technology), RocAmount>,
    /// `TOTAL` rows as published, validated against the entries on load.
    pub published_totals: BTreeMap<ObligationPeriod, RocAmount>,
}

const LEDGER_HEADER: [&str; 4] = ["period", "technology", "certificates_millions", "cost_gbp_bn"];

/// Largest rounding gap between a published total and the sum of `n` parts,
/// each shown to `scale` decimal places.
fn rounding_allowance(n: usize, scale: u32) -> Decimal {
    Decimal::new(5, scale + 1) * Decimal::from(n as u64)
}

impl RocLedger {
    pub fn from_entries(entries: impl IntoIterator<Item = ((ObligationPeriod, Technology), RocAmount)>) -> Self {
        Self { entries: entries.into_iter().collect(), published_totals: BTreeMap::new() }
    }

    pub fn parse<R: Read>(input: R) -> Result<Self, SubsidyError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
        let mut ledger = RocLedger::default();
        let mut first = true;
        for row in reader.records() {
            let row = row.map_err(|e| SubsidyError::Format {
                line: e.position().map(|p| p.line()).unwrap_or(0),
                reason: e.to_string(),
            })?;
            let line = row.position().map(|p| p.line()).unwrap_or(0);
            let fields: Vec<&str> = row.iter().map(str::trim).collect();
            if first {
                first = false;
                if fields != LEDGER_HEADER {
                    return Err(SubsidyError::Format {
                        line,
                        reason: format!("expected header `{}`", LEDGER_HEADER.join(",")),
                    });
                }
                continue;
            }
            let err = |reason: String| SubsidyError::Format { line, reason };
            if fields.len() != 4 {
                return Err(err(format!("expected 4 fields, found {}", fields.len())));
            }
            let period: ObligationPeriod = fields[0].parse().map_err(err)?;
            let dec = |s: &str, name: &str| {
                let v = Decimal::from_str(s).map_err(|_| err(format!("`{name}`: not a decimal `{s}`")))?;
                if v.is_sign_negative() {
                    return Err(err(format!("`{name}` must be non-negative")));
                }
                Ok(v)
            };
            let amount = RocAmount {
                certificates_millions: dec(fields[2], "certificates_millions")?,
                cost_gbp_bn: dec(fields[3], "cost_gbp_bn")?,
            };
            let duplicate = if fields[1].eq_ignore_ascii_case("TOTAL") {
                ledger.published_totals.insert(period, amount).is_some()
            } else {
                let tech: Technology = fields[1].parse().map_err(err)?;
                ledger.entries.insert((period, tech), amount).is_some()
            };
            if duplicate {
                return Err(err(format!("duplicate row for {period} {}", fields[1])));
            }
        }
        ledger.validate_totals()?;
        Ok(ledger)
    }

    /// Each published total must equal the recomputed column sum up to the
    /// rounding of its displayed parts.
    pub fn validate_totals(&self) -> Result<(), SubsidyError> {
        for (period, published) in &self.published_totals {
            let parts: Vec<&RocAmount> =
                self.entries.iter().filter(|((p, _), _)| p == period).map(|(_, a)| a).collect();
            if parts.is_empty() {
                return Err(SubsidyError::UnknownPeriod(*period));
            }
            let computed = parts.iter().fold(RocAmount::default(), |acc, a| acc + **a);
            let checks = [
                (
                    published.certificates_millions,
                    computed.certificates_millions,
                    parts.iter().map(|a| a.certificates_millions.scale()).max().unwrap_or(0),
                ),
                (
                    published.cost_gbp_bn,
                    computed.cost_gbp_bn,
                    parts.iter().map(|a| a.cost_gbp_bn.scale()).max().unwrap_or(0),
                ),
            ];
            for (pubd, comp, scale) in checks {
                if (pubd - comp).abs() > rounding_allowance(parts.len(), scale) {
                    return Err(SubsidyError::TotalMismatch {
                        period: *period,
                        published: pubd.to_string(),
                        computed: comp.to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn periods(&self) -> BTreeSet<ObligationPeriod> {
        self.entries.keys().map(|(p, _)| *p).collect()
    }

    pub fn get(&self, period: ObligationPeriod, tech: Technology) -> Option<&RocAmount> {
        self.entries.get(&(period, tech))
    }
}

/// Component-wise sum over the listed periods and technologies.
pub fn roc_totals(
    ledger: &RocLedger,
    periods: &[ObligationPeriod],
    technologies: &[Technology],
) -> Result<RocAmount, SubsidyError> {
    let known = ledger.periods();
    let mut total = RocAmount::default();
    for period in periods {
        if !known.contains(period) {
            return Err(SubsidyError::UnknownPeriod(*period));
        }
        for tech in technologies {
            if let Some(a) = ledger.get(*period, *tech) {
                total = total + *a;
            }
        }
    }
    Ok(total)
}

/// Cost per certificate in £.
pub fn implied_roc_price(
    ledger: &RocLedger,
    period: ObligationPeriod,
    technologies: &[Technology],
) -> Result<f64, SubsidyError> {
    let t = roc_totals(ledger, &[period], technologies)?;
    if t.certificates_millions.is_zero() {
        return Err(SubsidyError::ZeroCertificates(period));
    }
    let price = (t.cost_gbp_bn * Decimal::from(1000)) / t.certificates_millions;
    Ok(price.to_f64().expect("finite decimal"))
}

/// ROC cost for a calendar year, pro-rated from the two obligation periods it
/// straddles: January to March from the earlier period, April to December from the
/// later one. Both periods must be in the ledger.
pub fn calendar_year_cost(ledger: &RocLedger, year: i32, technologies: &[Technology]) -> Result<Money, SubsidyError> {
    let earlier = roc_totals(ledger, &[ObligationPeriod(year - 1)], technologies)?;
    let later = roc_totals(ledger, &[ObligationPeriod(year)], technologies)?;
    let bn = earlier.cost_gbp_bn * Decimal::new(25, 2) + later.cost_gbp_bn * Decimal::new(75, 2);
    Ok(RocAmount { certificates_millions: Decimal::ZERO, cost_gbp_bn: bn }.cost())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsidyConstants {
    /// £/MWh; a negative bid below `-threshold` is flagged.
    pub lost_subsidy_threshold: f64,
    pub fit_costs: BTreeMap<ObligationPeriod, Money>,
}

impl Default for SubsidyConstants {
    fn default() -> Self {
        Self {
            lost_subsidy_threshold: 55.0,
            fit_costs: BTreeMap::from([
                (ObligationPeriod(2011), Money::from_whole_pounds(6_000_000)),
                (ObligationPeriod(2012), Money::from_whole_pounds(56_000_000)),
                (ObligationPeriod(2013), Money::from_whole_pounds(97_000_000)),
            ]),
        }
    }
}

/// Negative bids priced strictly below `-lost_subsidy_threshold`.
pub fn screen_lost_subsidy<'a>(
    bids: impl IntoIterator<Item = &'a BalancingAction>,
    constants: &SubsidyConstants,
) -> Vec<&'a BalancingAction> {
    bids.into_iter()
        .filter(|b| classify_action(b) == ActionCategory::NegativeBid)
        .filter(|b| b.price < -constants.lost_subsidy_threshold)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ActionKind;
    use crate::timebase::SettlementKey;
    use chrono::NaiveDate;

    const TABLE: &str = "period,technology,certificates_millions,cost_gbp_bn
2012-13,OffshoreWind,15.69,0.639
2012-13,OnshoreWind,12.21,0.497
2012-13,TOTAL,27.9,1.136
";

    fn d(s: &str) -> Decimal {
        s.parse().unwrap()
    }

    #[test]
    fn period_labels() {
        assert_eq!("2013-14".parse::<ObligationPeriod>().unwrap(), ObligationPeriod(2013));
        assert_eq!(ObligationPeriod(1999).to_string(), "1999-00");
        assert!("2013-15".parse::<ObligationPeriod>().is_err());
        assert!("2013".parse::<ObligationPeriod>().is_err());
    }

    #[test]
    fn totals_and_price() {
        let ledger = RocLedger::parse(TABLE.as_bytes()).unwrap();
        let t = roc_totals(&ledger, &[ObligationPeriod(2012)], &Technology::ALL).unwrap();
        assert_eq!(t.certificates_millions, d("27.90"));
        assert_eq!(t.cost_gbp_bn, d("1.136"));
        let p = implied_roc_price(&ledger, ObligationPeriod(2012), &Technology::ALL).unwrap();
        assert!((p - 1.136e9 / 27.9e6).abs() < 1e-9);
        assert!((p - 40.72).abs() < 0.005);
        assert_eq!(roc_totals(&ledger, &[], &Technology::ALL).unwrap(), RocAmount::default());
        assert_eq!(
            roc_totals(&ledger, &[ObligationPeriod(2020)], &Technology::ALL),
            Err(SubsidyError::UnknownPeriod(ObligationPeriod(2020)))
        );
    }

    #[test]
    fn planted_price_recovered() {
        let ledger = RocLedger::from_entries([(
            (ObligationPeriod(2020), Technology::OnshoreWind),
            RocAmount { certificates_millions: d("2"), cost_gbp_bn: d("0.0925") },
        )]);
        assert_eq!(implied_roc_price(&ledger, ObligationPeriod(2020), &Technology::ALL).unwrap(), 46.25);
        let unit = RocLedger::from_entries([(
            (ObligationPeriod(2020), Technology::OnshoreWind),
            RocAmount { certificates_millions: d("1000"), cost_gbp_bn: d("1") },
        )]);
        assert_eq!(implied_roc_price(&unit, ObligationPeriod(2020), &Technology::ALL).unwrap(), 1.0);
        let zero = RocLedger::from_entries([(
            (ObligationPeriod(2020), Technology::OnshoreWind),
            RocAmount { certificates_millions: d("0"), cost_gbp_bn: d("0") },
        )]);
        assert!(implied_roc_price(&zero, ObligationPeriod(2020), &Technology::ALL).is_err());
    }

    #[test]
    fn mismatched_total_rejected() {
        let bad = TABLE.replace("2012-13,TOTAL,27.9,1.136", "2012-13,TOTAL,27.9,1.200");
        assert!(matches!(RocLedger::parse(bad.as_bytes()), Err(SubsidyError::TotalMismatch { .. })));
        let bad = TABLE.replace("period,", "year,");
        assert!(matches!(RocLedger::parse(bad.as_bytes()), Err(SubsidyError::Format { line: 1, .. })));
    }

    #[test]
    fn lost_subsidy_screen() {
        let bid = |price: f64, kind: ActionKind| BalancingAction {
            key: SettlementKey::new(NaiveDate::from_ymd_opt(2013, 1, 1).unwrap(), 1),
            unit_id: "W".into(),
            kind,
            volume: 1.0,
            price,
            tlm_published: None,
        };
        let bids = [
            bid(-60.0, ActionKind::Bid),
            bid(-55.0, ActionKind::Bid),
            bid(-10.0, ActionKind::Bid),
            bid(70.0, ActionKind::Offer),
        ];
        let flagged = screen_lost_subsidy(&bids, &SubsidyConstants::default());
        assert_eq!(flagged.len(), 1);
        assert_eq!(flagged[0].price, -60.0);
    }
}
