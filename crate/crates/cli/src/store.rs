//! Reading datasets from disk with file-and-line diagnostics.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::{anyhow, Context};
use windmarket::ingest::{
    join_settlement, parse_dataset, BalancingAction, Dataset, DatasetKind, GenerationRecord, IngestError, IngestReport,
    JoinedTable, Registry, SpotRecord, TlmRecord, UnitRegistryEntry,
};
use windmarket::tlm::TlmSources;
use windmarket::ClockRule;

use crate::exit::{data, usage, Exit};

pub fn clock_rule(path: Option<&Path>) -> Result<ClockRule, Exit> {
    match path {
        None => Ok(ClockRule::uk_default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading clock rule {}", p.display()))
                .map_err(usage)?;
            ClockRule::parse(&text).with_context(|| format!("{}", p.display())).map_err(data)
        }
    }
}

/// Parses one file; fatal format errors name the file and line.
pub fn read_dataset(kind: DatasetKind, path: &Path, rule: &ClockRule) -> Result<(Dataset, IngestReport), Exit> {
    let file = File::open(path).with_context(|| format!("opening {} input {}", kind, path.display())).map_err(usage)?;
    parse_dataset(kind, BufReader::new(file), rule).map_err(|e| {
        let line = match &e {
            IngestError::Header { .. } | IngestError::MissingHeader { .. } => Some(1),
            IngestError::Csv { line, .. } => Some(*line),
            IngestError::Io(_) => None,
        };
        match line {
            Some(l) => data(anyhow!("{}:{}: {}", path.display(), l, e)),
            None => data(anyhow!("{}: {}", path.display(), e)),
        }
    })
}

/// The six datasets of one corpus.
#[derive(Debug, Default)]
pub struct Store {
    pub registry: Vec<UnitRegistryEntry>,
    pub generation: Vec<GenerationRecord>,
    pub spot: Vec<SpotRecord>,
    pub actions: Vec<BalancingAction>,
    pub tlm_elexon: Vec<TlmRecord>,
    pub tlm_bmr: Vec<TlmRecord>,
}

impl Store {
    pub fn insert(&mut self, data: Dataset) {
        match data {
            Dataset::Generation(v) => self.generation = v,
            Dataset::Spot(v) => self.spot = v,
            Dataset::Actions(v) => self.actions = v,
            Dataset::TlmElexon(v) => self.tlm_elexon = v,
            Dataset::TlmBmr(v) => self.tlm_bmr = v,
            Dataset::Registry(v) => self.registry = v,
        }
    }

    pub fn registry(&self) -> Registry {
        Registry::new(self.registry.iter().cloned())
    }

    pub fn sources(&self) -> TlmSources {
        TlmSources::new(&self.tlm_elexon, &self.tlm_bmr)
    }

    pub fn join(&self) -> JoinedTable {
        join_settlement(&self.generation, &self.spot, &self.actions, &self.registry())
    }
}

pub const REQUIRED: [DatasetKind; 4] =
    [DatasetKind::Registry, DatasetKind::Generation, DatasetKind::Spot, DatasetKind::Actions];

/// Loads a store directory. TLM tables are optional; any rejected row is
/// treated as corruption because stores hold normalized data only.
pub fn load(dir: &Path, rule: &ClockRule) -> Result<Store, Exit> {
    if !dir.is_dir() {
        return Err(data(anyhow!("store {} does not exist", dir.display())));
    }
    let mut store = Store::default();
    for kind in DatasetKind::ALL {
        let path = dir.join(kind.file_name());
        if !path.exists() {
            if REQUIRED.contains(&kind) {
                return Err(data(anyhow!("store {} lacks {}", dir.display(), kind.file_name())));
            }
            continue;
        }
        let (dataset, report) = read_dataset(kind, &path, rule)?;
        if let Some(r) = report.rejects.first() {
            return Err(data(anyhow!("{}:{}: {}", path.display(), r.line, r.reason)));
        }
        store.insert(dataset);
    }
    Ok(store)
}
