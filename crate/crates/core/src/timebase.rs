//! Settlement-day calendar for the GB market.
//!
//! A settlement day runs from UK local midnight to the next local midnight and
//! is cut into half-hour settlement periods numbered from 1. Ordinary days
//! have 48 periods, the spring-forward day 46 and the fall-back day 50.
//!
//! Clock changes come from a small transition table (see [`ClockRule::parse`])
//! rather than a timezone database. Intervals are half-open everywhere.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Length of one settlement period.
pub const PERIOD_MINUTES: i64 = 30;

const DEFAULT_RULE: &str = include_str!("../data/uk_clock_changes.csv");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TimebaseError {
    #[error("date {0} is outside the clock-rule coverage")]
    Coverage(NaiveDate),
    #[error("settlement period {sp} is out of range 1..={max} for {date}")]
    PeriodOutOfRange { date: NaiveDate, sp: u32, max: u32 },
    #[error("clock rule line {line}: {reason}")]
    RuleFormat { line: usize, reason: String },
}

/// Identifies one half-hour trading window: a settlement day and a 1-based
/// period index. Orders lexicographically by (date, sp).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SettlementKey {
    pub date: NaiveDate,
    pub sp: u32,
}

impl SettlementKey {
    pub fn new(date: NaiveDate, sp: u32) -> Self {
        Self { date, sp }
    }
}

impl fmt::Display for SettlementKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} SP{}", self.date, self.sp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Transition {
    Spring,
    Fall,
}

/// British Summer Time transition dates for the covered years.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClockRule {
    spring_forward: BTreeMap<i32, NaiveDate>,
    fall_back: BTreeMap<i32, NaiveDate>,
}

impl ClockRule {
    /// Built-in UK transition table (last Sunday of March and October).
    pub fn uk_default() -> Self {
        Self::parse(DEFAULT_RULE).expect("bundled clock rule table is valid")
    }

    /// Parses `YYYY-MM-DD,spring|fall` lines. Blank lines are ignored.
    pub fn parse(text: &str) -> Result<Self, TimebaseError> {
        let mut spring_forward = BTreeMap::new();
        let mut fall_back = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let raw = raw.trim_end_matches('\r').trim();
            if raw.is_empty() {
                continue;
            }
            let err = |reason: String| TimebaseError::RuleFormat { line, reason };
            let (date, kind) = raw.split_once(',').ok_or_else(|| err("expected `date,spring|fall`".into()))?;
            let date = NaiveDate::parse_from_str(date.trim(), "%Y-%m-%d").map_err(|e| err(format!("bad date: {e}")))?;
            let kind = match kind.trim() {
                "spring" => Transition::Spring,
                "fall" => Transition::Fall,
                other => return Err(err(format!("unknown transition `{other}`"))),
            };
            let table = match kind {
                Transition::Spring => &mut spring_forward,
                Transition::Fall => &mut fall_back,
            };
            if table.insert(date.year(), date).is_some() {
                return Err(err(format!("second {kind:?} transition in {}", date.year())));
            }
        }
        for (year, spring) in &spring_forward {
            if let Some(fall) = fall_back.get(year) {
                if spring >= fall {
                    return Err(TimebaseError::RuleFormat {
                        line: 0,
                        reason: format!("{year}: spring transition {spring} not before fall {fall}"),
                    });
                }
            }
        }
        Ok(Self { spring_forward, fall_back })
    }

    /// Covered years are those with both a spring and a fall transition.
    pub fn covers_year(&self, year: i32) -> bool {
        self.spring_forward.contains_key(&year) && self.fall_back.contains_key(&year)
    }

    pub fn covered_years(&self) -> BTreeSet<i32> {
        self.spring_forward.keys().copied().filter(|y| self.fall_back.contains_key(y)).collect()
    }

    pub fn spring_forward_dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.spring_forward.values().copied()
    }

    pub fn fall_back_dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.fall_back.values().copied()
    }

    /// UTC offset in hours in force at local midnight starting `date`.
    fn midnight_offset(&self, date: NaiveDate) -> Result<i64, TimebaseError> {
        let year = date.year();
        if !self.covers_year(year) {
            // The day after the last covered 31 December starts in winter time.
            let prev = date.pred_opt().ok_or(TimebaseError::Coverage(date))?;
            if date.ordinal() == 1 && self.covers_year(prev.year()) {
                return Ok(0);
            }
            return Err(TimebaseError::Coverage(date));
        }
        let spring = self.spring_forward[&year];
        let fall = self.fall_back[&year];
        // Midnight on the spring date is still GMT; midnight on the fall date is still BST.
        Ok(if date > spring && date <= fall { 1 } else { 0 })
    }

    /// UTC instant of local midnight at the start of `date`.
    pub fn day_start(&self, date: NaiveDate) -> Result<DateTime<Utc>, TimebaseError> {
        let offset = self.midnight_offset(date)?;
        let midnight = Utc.from_utc_datetime(&date.and_time(NaiveTime::MIN));
        Ok(midnight - Duration::hours(offset))
    }

    fn day_bounds(&self, date: NaiveDate) -> Result<(DateTime<Utc>, DateTime<Utc>), TimebaseError> {
        if !self.covers_year(date.year()) {
            return Err(TimebaseError::Coverage(date));
        }
        let next = date.succ_opt().ok_or(TimebaseError::Coverage(date))?;
        Ok((self.day_start(date)?, self.day_start(next)?))
    }
}

impl Default for ClockRule {
    fn default() -> Self {
        Self::uk_default()
    }
}

impl FromStr for ClockRule {
    type Err = TimebaseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

/// Number of settlement periods in `date`: 46, 48 or 50.
pub fn periods_in_day(date: NaiveDate, rule: &ClockRule) -> Result<u32, TimebaseError> {
    let (start, end) = rule.day_bounds(date)?;
    Ok(((end - start).num_minutes() / PERIOD_MINUTES) as u32)
}

/// Settlement key whose half-hour window contains `timestamp`.
pub fn to_settlement_key(timestamp: DateTime<Utc>, rule: &ClockRule) -> Result<SettlementKey, TimebaseError> {
    let utc_date = timestamp.date_naive();
    // Local date is either the UTC date or the following day (BST runs ahead).
    let candidates = [utc_date.succ_opt(), Some(utc_date)];
    for date in candidates.into_iter().flatten() {
        let (start, end) = match rule.day_bounds(date) {
            Ok(b) => b,
            Err(_) => continue,
        };
        if start <= timestamp && timestamp < end {
            let sp = (timestamp - start).num_minutes() / PERIOD_MINUTES + 1;
            return Ok(SettlementKey::new(date, sp as u32));
        }
    }
    Err(TimebaseError::Coverage(utc_date))
}

/// Half-open UTC interval `[start, end)` of a settlement period.
pub fn sp_to_utc_range(key: SettlementKey, rule: &ClockRule) -> Result<(DateTime<Utc>, DateTime<Utc>), TimebaseError> {
    let max = periods_in_day(key.date, rule)?;
    if key.sp == 0 || key.sp > max {
        return Err(TimebaseError::PeriodOutOfRange { date: key.date, sp: key.sp, max });
    }
    let start = rule.day_start(key.date)? + Duration::minutes(PERIOD_MINUTES * (key.sp as i64 - 1));
    Ok((start, start + Duration::minutes(PERIOD_MINUTES)))
}

/// Checks `1 <= sp <= periods_in_day(date)`.
pub fn validate_key(key: SettlementKey, rule: &ClockRule) -> Result<(), TimebaseError> {
    let max = periods_in_day(key.date, rule)?;
    if key.sp == 0 || key.sp > max {
        return Err(TimebaseError::PeriodOutOfRange { date: key.date, sp: key.sp, max });
    }
    Ok(())
}

/// Every settlement key of `date` in order.
pub fn keys_for_day(date: NaiveDate, rule: &ClockRule) -> Result<impl Iterator<Item = SettlementKey>, TimebaseError> {
    let n = periods_in_day(date, rule)?;
    Ok((1..=n).map(move |sp| SettlementKey::new(date, sp)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn utc(y: i32, m: u32, day: u32, h: u32, min: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(y, m, day, h, min, 0).unwrap()
    }

    /// Independent count: walk the day in half-hour UTC steps and count the
    /// steps whose UK wall-clock date is `date`, using the textbook rule that
    /// BST runs from 01:00 UTC on the last Sunday of March to 01:00 UTC on the
    /// last Sunday of October.
    fn enumerate_half_hours(date: NaiveDate) -> u32 {
        fn last_sunday(year: i32, month: u32) -> NaiveDate {
            let mut day = NaiveDate::from_ymd_opt(year, month, 31).unwrap();
            while day.weekday() != chrono::Weekday::Sun {
                day = day.pred_opt().unwrap();
            }
            day
        }
        let bst_start = utc(date.year(), 3, last_sunday(date.year(), 3).day(), 1, 0);
        let bst_end = utc(date.year(), 10, last_sunday(date.year(), 10).day(), 1, 0);
        let mut t = Utc.from_utc_datetime(&date.and_time(NaiveTime::MIN)) - Duration::hours(2);
        let stop = t + Duration::hours(28);
        let mut n = 0;
        while t < stop {
            let offset = if t >= bst_start && t < bst_end { 1 } else { 0 };
            if (t + Duration::hours(offset)).date_naive() == date {
                n += 1;
            }
            t += Duration::minutes(30);
        }
        n
    }

    #[test]
    fn period_counts() {
        let rule = ClockRule::uk_default();
        assert_eq!(periods_in_day(d(2013, 6, 15), &rule).unwrap(), 48);
        assert_eq!(enumerate_half_hours(d(2013, 3, 31)), 46);
        assert_eq!(enumerate_half_hours(d(2013, 10, 27)), 50);
        assert_eq!(periods_in_day(d(2013, 3, 31), &rule).unwrap(), 46);
        assert_eq!(periods_in_day(d(2013, 10, 27), &rule).unwrap(), 50);
    }

    #[test]
    fn period_counts_match_enumeration_for_whole_year() {
        let rule = ClockRule::uk_default();
        let mut day = d(2014, 1, 1);
        while day.year() == 2014 {
            assert_eq!(periods_in_day(day, &rule).unwrap(), enumerate_half_hours(day), "{day}");
            day = day.succ_opt().unwrap();
        }
    }

    #[test]
    fn timestamp_to_key() {
        let rule = ClockRule::uk_default();
        assert_eq!(to_settlement_key(utc(2013, 1, 15, 0, 0), &rule).unwrap(), SettlementKey::new(d(2013, 1, 15), 1));
        assert_eq!(to_settlement_key(utc(2013, 6, 15, 0, 0), &rule).unwrap(), SettlementKey::new(d(2013, 6, 15), 3));
        assert_eq!(to_settlement_key(utc(2013, 6, 14, 23, 30), &rule).unwrap(), SettlementKey::new(d(2013, 6, 15), 2));
    }

    #[test]
    fn key_to_range() {
        let rule = ClockRule::uk_default();
        let (s, e) = sp_to_utc_range(SettlementKey::new(d(2013, 1, 15), 1), &rule).unwrap();
        assert_eq!((s, e), (utc(2013, 1, 15, 0, 0), utc(2013, 1, 15, 0, 30)));
        let (s, e) = sp_to_utc_range(SettlementKey::new(d(2013, 6, 15), 1), &rule).unwrap();
        assert_eq!((s, e), (utc(2013, 6, 14, 23, 0), utc(2013, 6, 14, 23, 30)));
        // Fall-back day starts 23:00 UTC (BST midnight) and ends 00:00 UTC next day.
        let (s, e) = sp_to_utc_range(SettlementKey::new(d(2013, 10, 27), 50), &rule).unwrap();
        assert_eq!((s, e), (utc(2013, 10, 27, 23, 30), utc(2013, 10, 28, 0, 0)));
        let (s, _) = sp_to_utc_range(SettlementKey::new(d(2013, 10, 27), 1), &rule).unwrap();
        assert_eq!(s, utc(2013, 10, 26, 23, 0));
    }

    #[test]
    fn out_of_range_period() {
        let rule = ClockRule::uk_default();
        let err = sp_to_utc_range(SettlementKey::new(d(2013, 3, 31), 47), &rule).unwrap_err();
        assert_eq!(err, TimebaseError::PeriodOutOfRange { date: d(2013, 3, 31), sp: 47, max: 46 });
        assert!(sp_to_utc_range(SettlementKey::new(d(2013, 3, 30), 0), &rule).is_err());
    }

    #[test]
    fn coverage_errors() {
        let rule = ClockRule::parse("2013-03-31,spring\n2013-10-27,fall\n").unwrap();
        assert!(matches!(periods_in_day(d(2014, 6, 1), &rule), Err(TimebaseError::Coverage(_))));
        assert_eq!(periods_in_day(d(2013, 12, 31), &rule).unwrap(), 48);
        assert!(to_settlement_key(utc(2012, 6, 1, 12, 0), &rule).is_err());
    }

    #[test]
    fn rule_parsing() {
        assert!(ClockRule::parse("2013-03-31,spring\n2013-04-07,spring\n").is_err());
        assert!(ClockRule::parse("2013-03-31,winter\n").is_err());
        assert!(ClockRule::parse("2013-10-27,spring\n2013-03-31,fall\n").is_err());
        let crlf = ClockRule::parse("2013-03-31,spring\r\n2013-10-27,fall\r\n").unwrap();
        assert!(crlf.covers_year(2013));
        assert!(!crlf.covers_year(2014));
    }
}
