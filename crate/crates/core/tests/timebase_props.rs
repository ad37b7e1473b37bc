use chrono::{DateTime, Datelike, Duration, NaiveDate, TimeZone, Utc};
use proptest::prelude::*;
use windmarket::timebase::{keys_for_day, periods_in_day, sp_to_utc_range, to_settlement_key};
use windmarket::ClockRule;

fn rule() -> ClockRule {
    ClockRule::uk_default()
}

/// Any instant between 2000-01-01 and 2035-12-31 UTC.
fn instant() -> impl Strategy<Value = DateTime<Utc>> {
    let lo = Utc.with_ymd_and_hms(2000, 1, 1, 0, 0, 0).unwrap().timestamp();
    let hi = Utc.with_ymd_and_hms(2035, 12, 31, 0, 0, 0).unwrap().timestamp();
    (lo..hi).prop_map(|s| Utc.timestamp_opt(s, 0).unwrap())
}

proptest! {
    #[test]
    fn timestamp_lies_in_its_period(t in instant()) {
        let rule = rule();
        let k = to_settlement_key(t, &rule).unwrap();
        let (start, end) = sp_to_utc_range(k, &rule).unwrap();
        prop_assert!(start <= t && t < end, "{t} not in [{start}, {end}) for {k}");
        prop_assert_eq!(end - start, Duration::minutes(30));
    }

    #[test]
    fn key_is_monotone(t in instant(), gap in 0i64..200_000) {
        let rule = rule();
        let later = t + Duration::seconds(gap);
        prop_assert!(to_settlement_key(t, &rule).unwrap() <= to_settlement_key(later, &rule).unwrap());
    }
}

#[test]
fn year_hours_are_conserved() {
    let rule = rule();
    for year in 2000..=2035 {
        let mut half_hours = 0u32;
        let mut day = NaiveDate::from_ymd_opt(year, 1, 1).unwrap();
        while day.year() == year {
            half_hours += periods_in_day(day, &rule).unwrap();
            day = day.succ_opt().unwrap();
        }
        let leap = NaiveDate::from_ymd_opt(year, 2, 29).is_some();
        assert_eq!(half_hours as f64 * 0.5, if leap { 8784.0 } else { 8760.0 }, "{year}");
    }
}

#[test]
fn consecutive_periods_tile_the_timeline() {
    let rule = rule();
    let mut day = NaiveDate::from_ymd_opt(2013, 1, 1).unwrap();
    let mut cursor = sp_to_utc_range(windmarket::SettlementKey::new(day, 1), &rule).unwrap().0;
    while day.year() == 2014 || day.year() == 2013 {
        for k in keys_for_day(day, &rule).unwrap() {
            let (start, end) = sp_to_utc_range(k, &rule).unwrap();
            assert_eq!(start, cursor, "{k}");
            cursor = end;
        }
        day = day.succ_opt().unwrap();
    }
}

#[test]
fn uncovered_year_is_an_error() {
    let rule = ClockRule::parse("2013-03-31,spring\n2013-10-27,fall\n").unwrap();
    assert!(periods_in_day(NaiveDate::from_ymd_opt(2014, 6, 1).unwrap(), &rule).is_err());
    assert_eq!(periods_in_day(NaiveDate::from_ymd_opt(2013, 6, 1).unwrap(), &rule).unwrap(), 48);
}
