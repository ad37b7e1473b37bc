mod common;

use chrono::Datelike;
use common::{d, key};
use proptest::prelude::*;
use windmarket::counterfactual::{
    build_bins, monthly_series, scenario_cost, CostInputs, Scenario, Window, DEFAULT_MIN_N,
};
use windmarket::moe::WindSharePoint;
use windmarket::synthgen::{generate, SynthConfig};
use windmarket::{ClockRule, Money};

fn points() -> impl Strategy<Value = Vec<WindSharePoint>> {
    proptest::collection::vec((0u32..90, 1u32..=6, 0.0f64..30.0, 0.0f64..1.0, 10.0f64..90.0, 1.0f64..5e3), 1..250)
        .prop_map(|rows| {
            let mut seen = std::collections::BTreeSet::new();
            rows.into_iter()
                .filter(|(day, sp, ..)| seen.insert((*day, *sp)))
                .map(|(day, sp, wind, split, price, volume)| WindSharePoint {
                    key: key(d(2013, 1, 1) + chrono::Duration::days(day as i64), sp),
                    wind_pct: wind,
                    onshore_pct: wind * split,
                    offshore_pct: wind * (1.0 - split),
                    price,
                    volume,
                })
                .collect()
        })
}

fn window() -> Window {
    Window::new(d(2013, 1, 1), d(2013, 12, 31)).unwrap()
}

proptest! {
    #[test]
    fn actual_scenario_is_the_spot_bill(pts in points()) {
        let inputs = CostInputs { points: pts.clone(), unpriced: vec![] };
        let bins = build_bins(&pts, 5.0).unwrap();
        let cost = scenario_cost(&window(), Scenario::Actual, &inputs, &bins, DEFAULT_MIN_N);
        let oracle: Money = pts.iter().map(|p| Money::of_energy(p.volume, p.price)).sum();
        prop_assert_eq!(cost.total, oracle);
        prop_assert_eq!(cost.fallback_keys, 0);
    }

    #[test]
    fn raising_min_n_only_adds_fallbacks(pts in points(), a in 0usize..10, b in 0usize..10) {
        let (lo, hi) = (a.min(b), a.max(b));
        let inputs = CostInputs { points: pts.clone(), unpriced: vec![] };
        let bins = build_bins(&pts, 5.0).unwrap();
        let actual = scenario_cost(&window(), Scenario::Actual, &inputs, &bins, lo).total;
        for s in Scenario::ALL {
            let x = scenario_cost(&window(), s, &inputs, &bins, lo);
            let y = scenario_cost(&window(), s, &inputs, &bins, hi);
            prop_assert!(x.fallback_keys <= y.fallback_keys);
            let inf = scenario_cost(&window(), s, &inputs, &bins, usize::MAX);
            prop_assert_eq!(inf.total, actual);
        }
    }

    #[test]
    fn bins_partition_points(pts in points(), width in 0.5f64..50.0) {
        let bins = build_bins(&pts, width).unwrap();
        prop_assert_eq!(bins.sample_count(), pts.len());
    }

    #[test]
    fn months_sum_to_the_total(pts in points(), min_n in 0usize..6) {
        let inputs = CostInputs { points: pts.clone(), unpriced: vec![] };
        let bins = build_bins(&pts, 5.0).unwrap();
        let monthly = monthly_series(&window(), &Scenario::ALL, &inputs, &bins, min_n);
        for s in Scenario::ALL {
            let sum: Money = monthly.iter().filter(|((_, sc), _)| *sc == s).map(|(_, m)| *m).sum();
            prop_assert_eq!(sum, scenario_cost(&window(), s, &inputs, &bins, min_n).total);
        }
    }

    #[test]
    fn missing_component_reduces_to_actual(pts in points(), onshore_only in any::<bool>()) {
        // All wind on one side: removing the other side leaves each point in
        // its own bin, so the volume-weighted cell means reproduce the bill.
        let pts: Vec<_> = pts.into_iter().map(|mut p| {
            if onshore_only { p.onshore_pct = p.wind_pct; p.offshore_pct = 0.0; }
            else { p.offshore_pct = p.wind_pct; p.onshore_pct = 0.0; }
            p
        }).collect();
        let inputs = CostInputs { points: pts.clone(), unpriced: vec![] };
        let bins = build_bins(&pts, 5.0).unwrap();
        let scenario = if onshore_only { Scenario::NoOffshore } else { Scenario::NoOnshore };
        let actual = scenario_cost(&window(), Scenario::Actual, &inputs, &bins, 1).total;
        let removed = scenario_cost(&window(), scenario, &inputs, &bins, 1).total;
        let tolerance = pts.len() as i128 + (actual.micros().abs() / 1_000_000_000_000);
        prop_assert!((actual - removed).micros().abs() <= tolerance, "{} vs {}", actual, removed);
    }
}

#[test]
fn unpriced_keys_are_skipped_and_reported() {
    let p = WindSharePoint {
        key: key(d(2013, 6, 1), 1),
        wind_pct: 10.0,
        onshore_pct: 4.0,
        offshore_pct: 6.0,
        price: 50.0,
        volume: 100.0,
    };
    let inputs = CostInputs { points: vec![p], unpriced: vec![(key(d(2013, 6, 1), 2), 250.0)] };
    let bins = build_bins(&inputs.points, 5.0).unwrap();
    let c = scenario_cost(&window(), Scenario::Actual, &inputs, &bins, 5);
    assert_eq!(c.total, Money::from_whole_pounds(5000));
    assert_eq!((c.skipped_keys, c.skipped_mwh), (1, 250.0));
}

/// The default corpus plants a winter-high wind share, so the low-wind
/// premium per MWh must be larger in winter than in summer.
#[test]
fn winter_months_show_larger_low_wind_gaps() {
    let rule = ClockRule::uk_default();
    let out = generate(&SynthConfig { noise_sigma: 1.0, ..SynthConfig::default() }, &rule).unwrap();
    let registry = windmarket::ingest::Registry::new(out.registry.iter().cloned());
    let table = windmarket::ingest::join_settlement(&out.generation, &out.spot, &[], &registry);
    let inputs = CostInputs::from_table(&table);
    let bins = build_bins(&inputs.points, 5.0).unwrap();
    let monthly = monthly_series(&window(), &[Scenario::Actual, Scenario::LowWind], &inputs, &bins, DEFAULT_MIN_N);
    let mut mwh = [0.0f64; 13];
    for p in &inputs.points {
        mwh[p.key.date.month() as usize] += p.volume;
    }
    let gap_per_mwh = |m: u32| {
        let actual = monthly[&((2013, m), Scenario::Actual)];
        let low = monthly[&((2013, m), Scenario::LowWind)];
        (low - actual).pounds() / mwh[m as usize]
    };
    let winter = [12, 1, 2].map(gap_per_mwh).iter().sum::<f64>() / 3.0;
    let summer = [6, 7, 8].map(gap_per_mwh).iter().sum::<f64>() / 3.0;
    assert!(winter > summer, "winter {winter} summer {summer}");
}
