use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::anyhow;
use serde_json::json;
use windmarket::ingest::{write_dataset, DatasetKind};
use windmarket::tlm::{disagreements, DEFAULT_DISAGREEMENT_THRESHOLD};
use windmarket::ClockRule;

use crate::exit::{data, usage, Exit};
use crate::output::{write_all, Files};
use crate::store::{read_dataset, Store, REQUIRED};
use crate::IngestArgs;

pub const REPORT_FILE: &str = "ingest_report.json";

fn input_paths(args: &IngestArgs) -> Result<BTreeMap<DatasetKind, PathBuf>, Exit> {
    let explicit = [
        (DatasetKind::Generation, &args.generation),
        (DatasetKind::Spot, &args.spot),
        (DatasetKind::Actions, &args.actions),
        (DatasetKind::Registry, &args.registry),
        (DatasetKind::TlmElexon, &args.tlm_elexon),
        (DatasetKind::TlmBmr, &args.tlm_bmr),
    ];
    let mut paths = BTreeMap::new();
    for (kind, path) in explicit {
        let chosen = match (path, &args.input) {
            (Some(p), _) => Some(p.clone()),
            (None, Some(dir)) => Some(dir.join(kind.file_name())).filter(|p| p.exists()),
            (None, None) => None,
        };
        match chosen {
            Some(p) if !p.exists() => return Err(usage(anyhow!("{} input {} does not exist", kind, p.display()))),
            Some(p) => {
                paths.insert(kind, p);
            }
            None if REQUIRED.contains(&kind) => {
                return Err(usage(anyhow!("missing {kind} input (use --{} or --input)", kind.name().replace('_', "-"))))
            }
            None => {}
        }
    }
    Ok(paths)
}

pub fn run(args: &IngestArgs, rule: &ClockRule) -> Result<(), Exit> {
    let paths = input_paths(args)?;
    let mut store = Store::default();
    let mut files: Files = Vec::new();
    let mut per_file = serde_json::Map::new();
    let mut rejected = 0usize;
    for (kind, path) in &paths {
        let (dataset, report) = read_dataset(*kind, path, rule)?;
        for r in &report.rejects {
            eprintln!("{}:{}: rejected: {}", path.display(), r.line, r.reason);
        }
        rejected += report.rows_rejected;
        let mut bytes = Vec::new();
        write_dataset(&mut bytes, &dataset).map_err(data)?;
        files.push((kind.file_name(), bytes));
        per_file.insert(kind.name().to_owned(), serde_json::to_value(&report).map_err(data)?);
        store.insert(dataset);
    }
    // Empty TLM tables keep the store self-describing.
    for kind in [DatasetKind::TlmElexon, DatasetKind::TlmBmr] {
        if !paths.contains_key(&kind) {
            let mut bytes = Vec::new();
            write_dataset(&mut bytes, &store_empty(kind)).map_err(data)?;
            files.push((kind.file_name(), bytes));
        }
    }

    let table = store.join();
    let registry = store.registry();
    let sources = store.sources();
    let pairs: Vec<_> = store.actions.iter().map(|a| (registry.entry_or_default(&a.unit_id), a)).collect();
    let disagree = disagreements(pairs.iter().map(|(e, a)| (e, *a)), &sources, DEFAULT_DISAGREEMENT_THRESHOLD);
    let summary = json!({
        "files": per_file,
        "rows_rejected": rejected,
        "join": {
            "settlement_periods": table.periods.len(),
            "missing_price_periods": table.missing_price_keys().count(),
            "duplicate_actions": table.duplicate_actions.len(),
            "duplicate_generation": table.duplicate_generation.len(),
        },
        "tlm_disagreements": disagree.len(),
    });
    let mut report = serde_json::to_vec_pretty(&summary).map_err(data)?;
    report.push(b'\n');
    files.push((REPORT_FILE.to_owned(), report));

    eprintln!("{rejected} rows rejected");
    if rejected > 0 && !args.allow_rejects {
        return Err(data(anyhow!("{rejected} rows rejected; rerun with --allow-rejects to accept")));
    }
    write_all(&args.out, &files)
}

fn store_empty(kind: DatasetKind) -> windmarket::ingest::Dataset {
    use windmarket::ingest::Dataset;
    match kind {
        DatasetKind::TlmElexon => Dataset::TlmElexon(Vec::new()),
        _ => Dataset::TlmBmr(Vec::new()),
    }
}
