//! `report` subcommand: every output is rendered in memory before anything
//! touches the output directory.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use chrono::Datelike;
use windmarket::counterfactual::{build_bins, cost_report, monthly_series, CostInputs, Scenario, Window};
use windmarket::imbalance::{
    box_stats, cash_flow, imbalance_percentages, negative_bid_deviation, ActionCategory, CashFlowSummary,
};
use windmarket::ingest::{FuelClass, JoinedTable};
use windmarket::moe::{contour_grid, fit_piecewise, relative_moe, wind_points, FitOptions, PriceSeries, Weighting};
use windmarket::subsidy::{calendar_year_cost, screen_lost_subsidy, RocLedger, SubsidyConstants, Technology};
use windmarket::{ClockRule, Money};

use crate::exit::{data, usage, Exit};
use crate::output::{opt, write_all, Csv, Files};
use crate::store::{self, Store};
use crate::{ReportArgs, Which};

pub fn run(args: &ReportArgs, rule: &ClockRule) -> Result<(), Exit> {
    validate(args).map_err(usage)?;
    let files = build(args, rule)?;
    write_all(&args.out, &files)
}

fn validate(args: &ReportArgs) -> anyhow::Result<()> {
    let pct = |name: &str, v: f64| {
        if v > 0.0 && v <= 100.0 {
            Ok(())
        } else {
            Err(anyhow!("--{name} must lie in (0, 100], got {v}"))
        }
    };
    pct("knee", args.knee)?;
    pct("below-cap", args.below_cap)?;
    pct("bin-width", args.bin_width)?;
    pct("cell-width", args.cell_width)?;
    if args.savings.is_some() != args.roc_cost.is_some() {
        bail!("--savings and --roc-cost must be given together");
    }
    Ok(())
}

struct Loaded {
    store: Store,
    table: JoinedTable,
    window: Window,
}

fn open(args: &ReportArgs, rule: &ClockRule) -> Result<Loaded, Exit> {
    let dir = args.store.as_deref().ok_or_else(|| usage(anyhow!("--store is required for this report")))?;
    let store = store::load(dir, rule)?;
    let full = store.join();
    let (first, last) = match (full.periods.keys().next(), full.periods.keys().next_back()) {
        (Some(a), Some(b)) => (a.date, b.date),
        _ => return Err(data(anyhow!("store {} holds no settlement periods", dir.display()))),
    };
    let window = args.window.unwrap_or(Window { from: first, to: last });
    let table = full.window(window.from, window.to);
    if table.periods.is_empty() {
        return Err(data(anyhow!("window {}..{} contains no settlement periods", window.from, window.to)));
    }
    Ok(Loaded { store, table, window })
}

fn build(args: &ReportArgs, rule: &ClockRule) -> Result<Files, Exit> {
    if args.which == Which::Net && args.savings.is_some() {
        return net_supplied(args);
    }
    let ctx = open(args, rule)?;
    match args.which {
        Which::Table1 => Ok(vec![("table1.csv".into(), table1(&ctx))]),
        Which::Table3 => table3(args, &ctx),
        Which::Table4 => table4(args, &ctx),
        Which::Cashflow => Ok(vec![("cashflow.csv".into(), cashflow_csv(&cashflow(&ctx)?))]),
        Which::Contour => contour(args, &ctx),
        Which::Monthly => monthly(args, &ctx),
        Which::Net => net_from_store(args, &ctx),
        Which::Bids => bids(&ctx),
    }
}

fn table1(ctx: &Loaded) -> Vec<u8> {
    let mut csv = Csv::new(&[
        "group",
        "year",
        "total_generation_mwh",
        "offers_mwh",
        "positive_bids_mwh",
        "negative_bids_mwh",
        "offers_pct",
        "positive_bids_pct",
        "negative_bids_pct",
    ]);
    for row in imbalance_percentages(&ctx.table) {
        let mut fields = vec![row.group.label(), row.year.to_string(), row.total_generation_mwh.to_string()];
        for c in ActionCategory::ALL {
            fields.push(row.volumes_mwh.get(&c).copied().unwrap_or(0.0).to_string());
        }
        for c in ActionCategory::ALL {
            fields.push(row.percentage(c).map(|p| format!("{p:.3}")).unwrap_or_default());
        }
        csv.row(fields);
    }
    csv.finish()
}

fn table3(args: &ReportArgs, ctx: &Loaded) -> Result<Files, Exit> {
    let options = FitOptions { knee: args.knee, below_cap: args.below_cap, weighting: Weighting::Volume };
    let mut fits = Csv::new(&["series", "regime", "lo_pct", "hi_pct", "n", "y0", "m", "x0", "relative_moe_pct"]);
    let mut points_csv =
        Csv::new(&["series", "date", "sp", "wind_pct", "onshore_pct", "offshore_pct", "price", "volume_mwh"]);
    let mut fitted = 0;
    for series in PriceSeries::ALL {
        let points = wind_points(&ctx.table, series);
        for p in &points {
            points_csv.row([
                series.to_string(),
                p.key.date.to_string(),
                p.key.sp.to_string(),
                p.wind_pct.to_string(),
                p.onshore_pct.to_string(),
                p.offshore_pct.to_string(),
                p.price.to_string(),
                p.volume.to_string(),
            ]);
        }
        match fit_piecewise(&points, series, &options) {
            Ok((below, above)) => {
                fitted += 1;
                for (regime, f) in [("below_knee", below), ("above_knee", above)] {
                    fits.row([
                        series.to_string(),
                        regime.to_owned(),
                        f.range.0.to_string(),
                        f.range.1.to_string(),
                        f.n.to_string(),
                        f.y0.to_string(),
                        f.m.to_string(),
                        opt(f.x0),
                        opt(relative_moe(&f).ok()),
                    ]);
                }
            }
            Err(e) => eprintln!("warning: {series}: {e}"),
        }
    }
    if fitted == 0 {
        return Err(data(anyhow!("no price series had enough distinct wind shares to fit")));
    }
    Ok(vec![("table3.csv".into(), fits.finish()), ("moe_points.csv".into(), points_csv.finish())])
}

fn table4(args: &ReportArgs, ctx: &Loaded) -> Result<Files, Exit> {
    let inputs = CostInputs::from_table(&ctx.table);
    let bins = build_bins(&inputs.points, args.bin_width).map_err(usage)?;
    let report = cost_report(&ctx.window, &inputs, &bins, args.min_n);
    if report.rows.is_empty() {
        return Err(data(anyhow!("no priced settlement periods in the window")));
    }
    let mut csv = Csv::new(&[
        "year",
        "actual_gbp_bn",
        "no_onshore_gbp_bn",
        "no_offshore_gbp_bn",
        "low_wind_gbp_bn",
        "increase_gbp_bn",
        "increase_pct",
        "fallback_fraction",
        "skipped_mwh",
        "actual_gbp",
        "no_onshore_gbp",
        "no_offshore_gbp",
        "low_wind_gbp",
    ]);
    for r in &report.rows {
        let shown = r.display_cells();
        csv.row(shown.into_iter().chain([
            format!("{:.4}", r.fallback_fraction),
            r.skipped_mwh.to_string(),
            r.actual.to_plain_string(),
            r.no_onshore.to_plain_string(),
            r.no_offshore.to_plain_string(),
            r.low_wind.to_plain_string(),
        ]));
    }
    Ok(vec![("table4.csv".into(), csv.finish())])
}

fn cashflow(ctx: &Loaded) -> Result<CashFlowSummary, Exit> {
    let registry = ctx.store.registry();
    let sources = ctx.store.sources();
    cash_flow(ctx.table.actions().map(|(_, a)| a), &registry, &sources).map_err(data)
}

fn cashflow_csv(summary: &CashFlowSummary) -> Vec<u8> {
    let mut csv = Csv::new(&["fuel", "year", "category", "cash_flow_gbp"]);
    for ((fuel, year, category), v) in &summary.totals {
        csv.row([fuel.to_string(), year.to_string(), category.to_string(), v.to_string()]);
    }
    csv.finish()
}

fn contour(args: &ReportArgs, ctx: &Loaded) -> Result<Files, Exit> {
    let points = wind_points(&ctx.table, PriceSeries::Spot);
    let grid = contour_grid(&points, args.cell_width).map_err(usage)?;
    let mut csv = Csv::new(&[
        "onshore_lo_pct",
        "onshore_hi_pct",
        "offshore_lo_pct",
        "offshore_hi_pct",
        "n",
        "volume_mwh",
        "mean_price",
    ]);
    let w = grid.cell_width;
    for ((i, j), cell) in &grid.cells {
        csv.row([
            (*i as f64 * w).to_string(),
            ((*i + 1) as f64 * w).to_string(),
            (*j as f64 * w).to_string(),
            ((*j + 1) as f64 * w).to_string(),
            cell.n.to_string(),
            cell.volume.to_string(),
            cell.mean_price.to_string(),
        ]);
    }
    Ok(vec![("contour.csv".into(), csv.finish())])
}

fn monthly(args: &ReportArgs, ctx: &Loaded) -> Result<Files, Exit> {
    let inputs = CostInputs::from_table(&ctx.table);
    let bins = build_bins(&inputs.points, args.bin_width).map_err(usage)?;
    let series = monthly_series(&ctx.window, &Scenario::ALL, &inputs, &bins, args.min_n);
    let mut csv = Csv::new(&["month", "scenario", "cost_gbp"]);
    for (((year, month), scenario), cost) in &series {
        csv.row([format!("{year:04}-{month:02}"), scenario.to_string(), cost.to_plain_string()]);
    }
    Ok(vec![("monthly.csv".into(), csv.finish())])
}

fn bids(ctx: &Loaded) -> Result<Files, Exit> {
    let actions: Vec<_> = ctx.table.actions().map(|(_, a)| a).collect();
    let deviations = negative_bid_deviation(actions.iter().copied());
    let mut by_year: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
    for d in &deviations {
        by_year.entry(d.key.date.year()).or_default().push(d.deviation);
    }
    let constants = SubsidyConstants::default();
    let mut flagged: BTreeMap<i32, usize> = BTreeMap::new();
    for b in screen_lost_subsidy(actions.iter().copied(), &constants) {
        *flagged.entry(b.key.date.year()).or_default() += 1;
    }
    let mut csv =
        Csv::new(&["year", "n", "median", "q1", "q3", "whisker_low", "whisker_high", "below_lost_subsidy_threshold"]);
    for (year, values) in &by_year {
        let s = box_stats(values).map_err(data)?;
        csv.row([
            year.to_string(),
            s.n.to_string(),
            s.median.to_string(),
            s.q1.to_string(),
            s.q3.to_string(),
            s.whisker_low.to_string(),
            s.whisker_high.to_string(),
            flagged.get(year).copied().unwrap_or(0).to_string(),
        ]);
    }
    Ok(vec![("bids.csv".into(), csv.finish())])
}

/// Parses `4.30bn`, `86.2M`, `£1,200k` or a plain pound amount exactly.
pub fn parse_gbp(text: &str) -> anyhow::Result<Money> {
    let s: String = text.trim().trim_start_matches('£').chars().filter(|c| *c != ',' && *c != '_').collect();
    let (s, negative) = match s.strip_prefix('-') {
        Some(rest) => (rest.to_owned(), true),
        None => (s, false),
    };
    let lower = s.to_ascii_lowercase();
    let (number, exp) = if let Some(n) = lower.strip_suffix("bn") {
        (n, 9)
    } else if let Some(n) = lower.strip_suffix('b') {
        (n, 9)
    } else if let Some(n) = lower.strip_suffix('m') {
        (n, 6)
    } else if let Some(n) = lower.strip_suffix('k') {
        (n, 3)
    } else {
        (lower.as_str(), 0)
    };
    let (int, frac) = number.split_once('.').unwrap_or((number, ""));
    let digits_ok = |d: &str| d.chars().all(|c| c.is_ascii_digit());
    if (int.is_empty() && frac.is_empty()) || !digits_ok(int) || !digits_ok(frac) {
        bail!("cannot parse amount `{text}`");
    }
    let scale = exp + 6;
    if frac.len() > scale as usize {
        bail!("amount `{text}` is finer than one micro-pound");
    }
    let mantissa: i128 = format!("{int}{frac}").parse().unwrap_or(0);
    let micros = mantissa * 10i128.pow(scale - frac.len() as u32);
    Ok(Money::from_micros(if negative { -micros } else { micros }))
}

fn net_header() -> Csv {
    Csv::new(&["case", "savings_gbp", "roc_cost_gbp", "curtailment_gbp", "other_gbp", "net_gbp", "net_gbp_m"])
}

fn net_row(csv: &mut Csv, case: &str, savings: Money, roc: Money, curtailment: Money, other: Money) {
    let net = windmarket::counterfactual::net_position(savings, roc, curtailment, other);
    csv.row([
        case.to_owned(),
        savings.to_plain_string(),
        roc.to_plain_string(),
        curtailment.to_plain_string(),
        other.to_plain_string(),
        net.to_plain_string(),
        format!("{:.1}", net.millions()),
    ]);
}

fn amount(flag: &str, v: &Option<String>) -> Result<Money, Exit> {
    match v {
        None => Ok(Money::ZERO),
        Some(s) => parse_gbp(s).with_context(|| format!("--{flag}")).map_err(usage),
    }
}

fn net_supplied(args: &ReportArgs) -> Result<Files, Exit> {
    let mut csv = net_header();
    net_row(
        &mut csv,
        "supplied",
        amount("savings", &args.savings)?,
        amount("roc-cost", &args.roc_cost)?,
        amount("curtailment", &args.curtailment)?,
        amount("other", &args.other)?,
    );
    Ok(vec![("net.csv".into(), csv.finish())])
}

fn load_ledger(path: &Path) -> Result<RocLedger, Exit> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display())).map_err(usage)?;
    let ledger = RocLedger::parse(BufReader::new(file)).with_context(|| format!("{}", path.display())).map_err(data)?;
    ledger.validate_totals().with_context(|| format!("{}", path.display())).map_err(data)?;
    Ok(ledger)
}

/// Savings, ROC cost and curtailment per technology from the store; ROC
/// costs are pro-rated to calendar years from the ledger.
fn net_from_store(args: &ReportArgs, ctx: &Loaded) -> Result<Files, Exit> {
    let path = args
        .roc_ledger
        .as_deref()
        .ok_or_else(|| usage(anyhow!("net needs --roc-ledger, or --savings and --roc-cost")))?;
    let ledger = load_ledger(path)?;
    let inputs = CostInputs::from_table(&ctx.table);
    let bins = build_bins(&inputs.points, args.bin_width).map_err(usage)?;
    let report = cost_report(&ctx.window, &inputs, &bins, args.min_n);
    let flows = cashflow(ctx)?;
    let other = amount("other", &args.other)?;

    let curtailment = |pred: fn(FuelClass) -> bool| -> Money {
        let total: f64 = flows
            .totals
            .iter()
            .filter(|((fuel, _, c), _)| pred(*fuel) && *c == ActionCategory::NegativeBid)
            .map(|(_, v)| v)
            .sum();
        Money::from_pounds(total)
    };
    let roc = |techs: &[Technology]| -> Result<Money, Exit> {
        report.rows.iter().map(|r| calendar_year_cost(&ledger, r.year, techs).map_err(data)).sum()
    };
    let savings = |f: fn(&windmarket::counterfactual::CostRow) -> Money| -> Money {
        report.rows.iter().map(|r| f(r) - r.actual).sum()
    };

    let mut csv = net_header();
    net_row(&mut csv, "wind", savings(|r| r.low_wind), roc(&Technology::ALL)?, curtailment(FuelClass::is_wind), other);
    net_row(
        &mut csv,
        "onshore",
        savings(|r| r.no_onshore),
        roc(&[Technology::OnshoreWind])?,
        curtailment(FuelClass::is_onshore),
        Money::ZERO,
    );
    net_row(
        &mut csv,
        "offshore",
        savings(|r| r.no_offshore),
        roc(&[Technology::OffshoreWind])?,
        curtailment(FuelClass::is_offshore),
        Money::ZERO,
    );
    Ok(vec![("net.csv".into(), csv.finish())])
}
