#![allow(dead_code)]

pub mod tlm_cases;

use chrono::NaiveDate;
use windmarket::ingest::{
    parse_dataset, BalancingAction, Dataset, DatasetKind, FuelClass, GenerationRecord, JoinedTable, Registry, Role,
    SpotRecord, TlmRecord, UnitId, UnitRegistryEntry,
};
use windmarket::synthgen::SynthOutput;
use windmarket::tlm::TlmSources;
use windmarket::{ClockRule, SettlementKey};

pub fn d(y: i32, m: u32, day: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, day).unwrap()
}

pub fn key(date: NaiveDate, sp: u32) -> SettlementKey {
    SettlementKey::new(date, sp)
}

pub fn unit(id: &str, fuel: FuelClass, role: Role) -> UnitRegistryEntry {
    UnitRegistryEntry { unit_id: UnitId::new(id), fuel, role }
}

pub fn gen(k: SettlementKey, id: &str, volume: f64) -> GenerationRecord {
    GenerationRecord { key: k, unit_id: UnitId::new(id), volume }
}

pub fn spot(k: SettlementKey, price: f64) -> SpotRecord {
    SpotRecord { key: k, price, traded_volume: 100.0 }
}

pub fn action(
    k: SettlementKey,
    id: &str,
    kind: windmarket::ingest::ActionKind,
    volume: f64,
    price: f64,
) -> BalancingAction {
    BalancingAction { key: k, unit_id: UnitId::new(id), kind, volume, price, tlm_published: None }
}

/// A corpus after a round trip through its CSV files.
pub struct Corpus {
    pub registry: Vec<UnitRegistryEntry>,
    pub generation: Vec<GenerationRecord>,
    pub spot: Vec<SpotRecord>,
    pub actions: Vec<BalancingAction>,
    pub tlm_elexon: Vec<TlmRecord>,
    pub tlm_bmr: Vec<TlmRecord>,
    pub rejects: usize,
}

impl Corpus {
    pub fn registry(&self) -> Registry {
        Registry::new(self.registry.iter().cloned())
    }

    pub fn sources(&self) -> TlmSources {
        TlmSources::new(&self.tlm_elexon, &self.tlm_bmr)
    }

    pub fn join(&self) -> JoinedTable {
        windmarket::ingest::join_settlement(&self.generation, &self.spot, &self.actions, &self.registry())
    }
}

/// Serializes every dataset and parses it back, counting rejects.
pub fn reparse(out: &SynthOutput, rule: &ClockRule) -> Corpus {
    let files = out.to_files().unwrap();
    let mut c = Corpus {
        registry: vec![],
        generation: vec![],
        spot: vec![],
        actions: vec![],
        tlm_elexon: vec![],
        tlm_bmr: vec![],
        rejects: 0,
    };
    for kind in DatasetKind::ALL {
        let bytes = &files[&kind.file_name()];
        let (data, report) = parse_dataset(kind, bytes.as_slice(), rule).unwrap();
        c.rejects += report.rows_rejected;
        match data {
            Dataset::Generation(v) => c.generation = v,
            Dataset::Spot(v) => c.spot = v,
            Dataset::Actions(v) => c.actions = v,
            Dataset::TlmElexon(v) => c.tlm_elexon = v,
            Dataset::TlmBmr(v) => c.tlm_bmr = v,
            Dataset::Registry(v) => c.registry = v,
        }
    }
    c
}
