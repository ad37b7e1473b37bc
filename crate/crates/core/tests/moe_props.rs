mod common;

use common::{d, key};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use windmarket::moe::{
    contour_grid, fit_line, fit_piecewise, relative_moe, FitOptions, FitResult, PriceSeries, Weighting, WindSharePoint,
};

fn point(i: usize, wind: f64, price: f64, volume: f64) -> WindSharePoint {
    WindSharePoint {
        key: key(d(2013, 1, 1) + chrono::Duration::days((i / 48) as i64), (i % 48) as u32 + 1),
        wind_pct: wind,
        onshore_pct: wind * 0.4,
        offshore_pct: wind * 0.6,
        price,
        volume,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #[test]
    fn noiseless_lines_are_recovered(
        y0 in 10.0f64..100.0,
        m in -3.0f64..-0.1,
        xs in proptest::collection::vec((0.0f64..25.0, 1.0f64..1e4), 3..200),
    ) {
        let pts: Vec<_> = xs.iter().enumerate().map(|(i, (x, v))| point(i, *x, y0 + m * x, *v)).collect();
        prop_assume!(pts.iter().any(|p| (p.wind_pct - pts[0].wind_pct).abs() > 0.5));
        let fit = fit_line(&pts, PriceSeries::Spot, 0.0, 25.0, Weighting::Volume).unwrap();
        prop_assert!(rel(fit.m, m) < 1e-9, "{} vs {}", fit.m, m);
        prop_assert!(rel(fit.y0, y0) < 1e-9);
    }

    #[test]
    fn relative_moe_ignores_price_scale(y0 in 1.0f64..200.0, m in -5.0f64..5.0, k in 0.01f64..100.0) {
        let f = |y0, m| FitResult { series: PriceSeries::Spot, y0, m, x0: None, range: (0.0, 25.0), n: 2 };
        let a = relative_moe(&f(y0, m)).unwrap();
        let b = relative_moe(&f(k * y0, k * m)).unwrap();
        prop_assert!(rel(a, b) < 1e-12 || a == 0.0);
    }

    #[test]
    fn duplicating_a_point_doubles_its_weight(
        xs in proptest::collection::vec((0.0f64..25.0, 0.0f64..100.0, 1.0f64..100.0), 3..50),
        pick in 0usize..50,
    ) {
        let pts: Vec<_> = xs.iter().enumerate().map(|(i, (x, y, v))| point(i, *x, *y, *v)).collect();
        let j = pick % pts.len();
        let mut dup = pts.clone();
        dup.push(pts[j]);
        let mut doubled = pts.clone();
        doubled[j].volume *= 2.0;
        let a = fit_line(&dup, PriceSeries::Spot, 0.0, 25.0, Weighting::Volume);
        let b = fit_line(&doubled, PriceSeries::Spot, 0.0, 25.0, Weighting::Volume);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert!((a.m - b.m).abs() <= 1e-7 * b.m.abs().max(1.0));
                prop_assert!((a.y0 - b.y0).abs() <= 1e-7 * b.y0.abs().max(1.0));
                prop_assert_eq!(a.n, b.n + 1);
            }
            (Err(_), Err(_)) => {}
            other => prop_assert!(false, "{:?}", other),
        }
    }

    #[test]
    fn contour_conserves_points_and_volume(
        pts in proptest::collection::vec((0.0f64..40.0, 0.0f64..40.0, 0.0f64..100.0, 0.1f64..1e3), 1..200),
        width in 0.5f64..10.0,
    ) {
        let points: Vec<_> = pts.iter().enumerate().map(|(i, (on, off, p, v))| WindSharePoint {
            onshore_pct: *on,
            offshore_pct: *off,
            wind_pct: on + off,
            ..point(i, 0.0, *p, *v)
        }).collect();
        let grid = contour_grid(&points, width).unwrap();
        prop_assert_eq!(grid.cells.values().map(|c| c.n).sum::<usize>(), points.len());
        let vol: f64 = points.iter().map(|p| p.volume).sum();
        let grid_vol: f64 = grid.cells.values().map(|c| c.volume).sum();
        prop_assert!(rel(grid_vol, vol) < 1e-12);
        for p in &points {
            prop_assert!(grid.get(p.onshore_pct, p.offshore_pct).is_some());
        }
    }
}

#[test]
fn constant_prices_have_no_zero_crossing() {
    let pts: Vec<_> = (0..20).map(|i| point(i, i as f64, 42.0, 10.0)).collect();
    let fit = fit_line(&pts, PriceSeries::Spot, 0.0, 25.0, Weighting::Volume).unwrap();
    assert_eq!(fit.m, 0.0);
    assert!((fit.y0 - 42.0).abs() < 1e-12);
    assert_eq!(fit.x0, None);
}

/// y = y0 + m·x + N(0, 5) on 10⁴ sub-knee points; m within ±5%.
#[test]
fn gradient_is_recovered_under_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(2013);
    let noise = Normal::new(0.0, 5.0).unwrap();
    let (y0, m) = (52.85, -0.88);
    let pts: Vec<_> = (0..10_000)
        .map(|i| {
            let x: f64 = rng.random_range(0.0..25.0);
            point(i, x, y0 + m * x + noise.sample(&mut rng), rng.random_range(500.0..1500.0))
        })
        .collect();
    let (below, _) = fit_piecewise(
        &pts.iter().cloned().chain((0..10).map(|i| point(i, 40.0 + i as f64, 20.0, 1.0))).collect::<Vec<_>>(),
        PriceSeries::Spot,
        &FitOptions::default(),
    )
    .unwrap();
    assert!(below.n >= 10_000);
    assert!(rel(below.m, m) <= 0.05, "m = {}", below.m);
}

/// Price falls with distance from the origin, so cell means must fall along
/// every ray from the origin.
#[test]
fn radial_field_decreases_along_rays() {
    let mut pts = Vec::new();
    let mut i = 0;
    for a in 0..40 {
        for b in 0..40 {
            let (on, off) = (a as f64 + 0.5, b as f64 + 0.5);
            pts.push(WindSharePoint {
                onshore_pct: on,
                offshore_pct: off,
                wind_pct: on + off,
                ..point(i, 0.0, 80.0 - 0.02 * (on * on + off * off), 1.0)
            });
            i += 1;
        }
    }
    let grid = contour_grid(&pts, 2.0).unwrap();
    for (di, dj) in [(1i64, 0i64), (0, 1), (1, 1), (2, 1), (1, 2)] {
        let mut prev = f64::INFINITY;
        let mut step = 0;
        while let Some(cell) = grid.cells.get(&(di * step, dj * step)) {
            assert!(cell.mean_price < prev, "ray ({di},{dj}) step {step}");
            prev = cell.mean_price;
            step += 1;
        }
        assert!(step > 5);
    }
}
