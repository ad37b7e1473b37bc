//! Canonical flat-file datasets and the settlement join.
//!
//! | kind         | header                                         |
//! |--------------|------------------------------------------------|
//! | `generation` | `date,sp,unit_id,volume`                       |
//! | `spot`       | `date,sp,price,traded_volume`                  |
//! | `actions`    | `date,sp,unit_id,kind,volume,price,tlm`        |
//! | `tlm_elexon` | `date,sp,role,multiplier`                      |
//! | `tlm_bmr`    | `date,sp,role,multiplier`                      |
//! | `registry`   | `unit_id,fuel,role`                            |
//!
//! Dates are ISO-8601, volumes MWh, prices £/MWh. `kind` is `offer` or `bid`,
//! `tlm` may be empty, `role` is `P`, `C` or (registry only) `U`.
//!
//! A bad header is fatal. A bad row is rejected with its line number and
//! parsing carries on; nothing is dropped without appearing in the report.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timebase::{validate_key, ClockRule, SettlementKey};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{kind}: malformed header: expected `{expected}`, found `{found}`")]
    Header { kind: DatasetKind, expected: String, found: String },
    #[error("{kind}: empty input, header row required")]
    MissingHeader { kind: DatasetKind },
    #[error("{kind}: csv error at line {line}: {source}")]
    Csv {
        kind: DatasetKind,
        line: u64,
        #[source]
        source: csv::Error,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Generation,
    Spot,
    Actions,
    TlmElexon,
    TlmBmr,
    Registry,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 6] = [
        DatasetKind::Generation,
        DatasetKind::Spot,
        DatasetKind::Actions,
        DatasetKind::TlmElexon,
        DatasetKind::TlmBmr,
        DatasetKind::Registry,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::Generation => "generation",
            DatasetKind::Spot => "spot",
            DatasetKind::Actions => "actions",
            DatasetKind::TlmElexon => "tlm_elexon",
            DatasetKind::TlmBmr => "tlm_bmr",
            DatasetKind::Registry => "registry",
        }
    }

    /// Conventional file name inside a dataset directory.
    pub fn file_name(self) -> String {
        format!("{}.csv", self.name())
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DatasetKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown dataset kind `{s}`"))
    }
}

/// Fuel classification. Wind is split by (onshore/offshore) × (England/Scotland).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FuelClass {
    #[serde(rename = "CCGT")]
    Ccgt,
    Coal,
    WindOnshoreEngland,
    WindOnshoreScotland,
    WindOffshoreEngland,
    WindOffshoreScotland,
    Other,
}

impl FuelClass {
    pub const ALL: [FuelClass; 7] = [
        FuelClass::Ccgt,
        FuelClass::Coal,
        FuelClass::WindOffshoreEngland,
        FuelClass::WindOffshoreScotland,
        FuelClass::WindOnshoreEngland,
        FuelClass::WindOnshoreScotland,
        FuelClass::Other,
    ];

    pub fn is_wind(self) -> bool {
        self.is_onshore() || self.is_offshore()
    }

    pub fn is_onshore(self) -> bool {
        matches!(self, FuelClass::WindOnshoreEngland | FuelClass::WindOnshoreScotland)
    }

    pub fn is_offshore(self) -> bool {
        matches!(self, FuelClass::WindOffshoreEngland | FuelClass::WindOffshoreScotland)
    }

    pub fn name(self) -> &'static str {
        match self {
            FuelClass::Ccgt => "CCGT",
            FuelClass::Coal => "Coal",
            FuelClass::WindOnshoreEngland => "WindOnshoreEngland",
            FuelClass::WindOnshoreScotland => "WindOnshoreScotland",
            FuelClass::WindOffshoreEngland => "WindOffshoreEngland",
            FuelClass::WindOffshoreScotland => "WindOffshoreScotland",
            FuelClass::Other => "Other",
        }
    }
}

impl fmt::Display for FuelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FuelClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FuelClass::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown fuel class `{s}`"))
    }
}

/// Whether a unit delivers to or takes from the transmission system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Producer,
    Consumer,
    Unknown,
}

impl Role {
    pub fn code(self) -> &'static str {
        match self {
            Role::Producer => "P",
            Role::Consumer => "C",
            Role::Unknown => "U",
        }
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "P" => Ok(Role::Producer),
            "C" => Ok(Role::Consumer),
            "U" => Ok(Role::Unknown),
            other => Err(format!("unknown role `{other}`")),
        }
    }
}

/// Opaque balancing-mechanism unit identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UnitId(pub String);

impl UnitId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UnitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for UnitId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitRegistryEntry {
    pub unit_id: UnitId,
    pub fuel: FuelClass,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub key: SettlementKey,
    pub unit_id: UnitId,
    pub volume: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpotRecord {
    pub key: SettlementKey,
    pub price: f64,
    pub traded_volume: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    Offer,
    Bid,
}

impl ActionKind {
    pub fn name(self) -> &'static str {
        match self {
            ActionKind::Offer => "offer",
            ActionKind::Bid => "bid",
        }
    }
}

impl FromStr for ActionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "offer" => Ok(ActionKind::Offer),
            "bid" => Ok(ActionKind::Bid),
            other => Err(format!("unknown action kind `{other}`")),
        }
    }
}

/// One accepted offer or bid. `volume` is a positive magnitude; the sign
/// convention is applied by the imbalance analytics, never in storage.
#[derive(Debug, Clone, PartialEq)]
pub struct BalancingAction {
    pub key: SettlementKey,
    pub unit_id: UnitId,
    pub kind: ActionKind,
    pub volume: f64,
    pub price: f64,
    pub tlm_published: Option<f64>,
}

/// One row of a TLM table (Elexon or BMReports historic).
#[derive(Debug, Clone, PartialEq)]
pub struct TlmRecord {
    pub key: SettlementKey,
    pub role: Role,
    pub multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_accepted: usize,
    pub rows_rejected: usize,
    pub rejects: Vec<Reject>,
}

impl IngestReport {
    pub fn total(&self) -> usize {
        self.rows_accepted + self.rows_rejected
    }

    fn reject(&mut self, line: u64, reason: impl Into<String>) {
        self.rows_rejected += 1;
        self.rejects.push(Reject { line, reason: reason.into() });
    }
}

/// A row type with a canonical CSV schema.
pub trait CsvRecord: Sized {
    const KIND: DatasetKind;
    const HEADER: &'static [&'static str];
    /// Identity that must be unique within one file, if any.
    type UniqueKey: Ord;

    fn from_fields(fields: &csv::StringRecord, rule: &ClockRule) -> Result<Self, String>;
    fn to_fields(&self) -> Vec<String>;
    fn unique_key(&self) -> Option<Self::UniqueKey>;
}

fn field<'a>(rec: &'a csv::StringRecord, idx: usize, name: &str) -> Result<&'a str, String> {
    rec.get(idx).map(str::trim).ok_or_else(|| format!("missing field `{name}`"))
}

fn parse_f64(rec: &csv::StringRecord, idx: usize, name: &str) -> Result<f64, String> {
    let raw = field(rec, idx, name)?;
    let v: f64 = raw.parse().map_err(|_| format!("field `{name}`: not a number `{raw}`"))?;
    if !v.is_finite() {
        return Err(format!("field `{name}`: non-finite value `{raw}`"));
    }
    Ok(v)
}

fn parse_key(rec: &csv::StringRecord, rule: &ClockRule) -> Result<SettlementKey, String> {
    let raw_date = field(rec, 0, "date")?;
    let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d")
        .map_err(|_| format!("field `date`: not an ISO date `{raw_date}`"))?;
    let raw_sp = field(rec, 1, "sp")?;
    let sp: u32 = raw_sp.parse().map_err(|_| format!("field `sp`: not an integer `{raw_sp}`"))?;
    let key = SettlementKey::new(date, sp);
    validate_key(key, rule).map_err(|e| e.to_string())?;
    Ok(key)
}

fn key_fields(key: &SettlementKey) -> [String; 2] {
    [key.date.format("%Y-%m-%d").to_string(), key.sp.to_string()]
}

impl CsvRecord for GenerationRecord {
    const KIND: DatasetKind = DatasetKind::Generation;
    const HEADER: &'static [&'static str] = &["date", "sp", "unit_id", "volume"];
    type UniqueKey = (SettlementKey, UnitId);

    fn from_fields(rec: &csv::StringRecord, rule: &ClockRule) -> Result<Self, String> {
        let key = parse_key(rec, rule)?;
        let unit_id = nonempty_unit(rec, 2)?;
        let volume = parse_f64(rec, 3, "volume")?;
        if volume < 0.0 {
            return Err(format!("volume must be non-negative, got {volume}"));
        }
        Ok(Self { key, unit_id, volume })
    }

    fn to_fields(&self) -> Vec<String> {
        let [d, sp] = key_fields(&self.key);
        vec![d, sp, self.unit_id.0.clone(), self.volume.to_string()]
    }

    fn unique_key(&self) -> Option<Self::UniqueKey> {
        Some((self.key, self.unit_id.clone()))
    }
}

fn nonempty_unit(rec: &csv::StringRecord, idx: usize) -> Result<UnitId, String> {
    let raw = field(rec, idx, "unit_id")?;
    if raw.is_empty() {
        return Err("field `unit_id` is empty".into());
    }
    Ok(UnitId::new(raw))
}

impl CsvRecord for SpotRecord {
    const KIND: DatasetKind = DatasetKind::Spot;
    const HEADER: &'static [&'static str] = &["date", "sp", "price", "traded_volume"];
    type UniqueKey = SettlementKey;

    fn from_fields(rec: &csv::StringRecord, rule: &ClockRule) -> Result<Self, String> {
        let key = parse_key(rec, rule)?;
        let price = parse_f64(rec, 2, "price")?;
        let traded_volume = parse_f64(rec, 3, "traded_volume")?;
        if traded_volume < 0.0 {
            return Err(format!("traded_volume must be non-negative, got {traded_volume}"));
        }
        Ok(Self { key, price, traded_volume })
    }

    fn to_fields(&self) -> Vec<String> {
        let [d, sp] = key_fields(&self.key);
        vec![d, sp, self.price.to_string(), self.traded_volume.to_string()]
    }

    fn unique_key(&self) -> Option<Self::UniqueKey> {
        Some(self.key)
    }
}

impl CsvRecord for BalancingAction {
    const KIND: DatasetKind = DatasetKind::Actions;
    const HEADER: &'static [&'static str] = &["date", "sp", "unit_id", "kind", "volume", "price", "tlm"];
    // Duplicates are resolved by the join, not the parser.
    type UniqueKey = ();

    fn from_fields(rec: &csv::StringRecord, rule: &ClockRule) -> Result<Self, String> {
        let key = parse_key(rec, rule)?;
        let unit_id = nonempty_unit(rec, 2)?;
        let kind: ActionKind = field(rec, 3, "kind")?.parse()?;
        let volume = parse_f64(rec, 4, "volume")?;
        if volume <= 0.0 {
            return Err(format!("volume must be strictly positive, got {volume}"));
        }
        let price = parse_f64(rec, 5, "price")?;
        if kind == ActionKind::Offer && price < 0.0 {
            return Err(format!("offer price must be non-negative, got {price}"));
        }
        let tlm_published = match field(rec, 6, "tlm")? {
            "" => None,
            _ => {
                let t = parse_f64(rec, 6, "tlm")?;
                if t <= 0.0 {
                    return Err(format!("tlm must be positive, got {t}"));
                }
                Some(t)
            }
        };
        Ok(Self { key, unit_id, kind, volume, price, tlm_published })
    }

    fn to_fields(&self) -> Vec<String> {
        let [d, sp] = key_fields(&self.key);
        vec![
            d,
            sp,
            self.unit_id.0.clone(),
            self.kind.name().to_owned(),
            self.volume.to_string(),
            self.price.to_string(),
            self.tlm_published.map(|t| t.to_string()).unwrap_or_default(),
        ]
    }

    fn unique_key(&self) -> Option<()> {
        None
    }
}

/// TLM tables share one schema; the marker picks the dataset kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ElexonTlm(pub TlmRecord);
#[derive(Debug, Clone, PartialEq)]
pub struct BmrTlm(pub TlmRecord);

fn tlm_from_fields(rec: &csv::StringRecord, rule: &ClockRule) -> Result<TlmRecord, String> {
    let key = parse_key(rec, rule)?;
    let role: Role = field(rec, 2, "role")?.parse()?;
    if role == Role::Unknown {
        return Err("tlm role must be `P` or `C`".into());
    }
    let multiplier = parse_f64(rec, 3, "multiplier")?;
    if multiplier <= 0.0 {
        return Err(format!("multiplier must be positive, got {multiplier}"));
    }
    Ok(TlmRecord { key, role, multiplier })
}

fn tlm_to_fields(r: &TlmRecord) -> Vec<String> {
    let [d, sp] = key_fields(&r.key);
    vec![d, sp, r.role.code().to_owned(), r.multiplier.to_string()]
}

macro_rules! tlm_record {
    ($ty:ident, $kind:expr) => {
        impl CsvRecord for $ty {
            const KIND: DatasetKind = $kind;
            const HEADER: &'static [&'static str] = &["date", "sp", "role", "multiplier"];
            type UniqueKey = (SettlementKey, Role);

            fn from_fields(rec: &csv::StringRecord, rule: &ClockRule) -> Result<Self, String> {
                tlm_from_fields(rec, rule).map($ty)
            }

            fn to_fields(&self) -> Vec<String> {
                tlm_to_fields(&self.0)
            }

            fn unique_key(&self) -> Option<Self::UniqueKey> {
                Some((self.0.key, self.0.role))
            }
        }
    };
}

tlm_record!(ElexonTlm, DatasetKind::TlmElexon);
tlm_record!(BmrTlm, DatasetKind::TlmBmr);

impl CsvRecord for UnitRegistryEntry {
    const KIND: DatasetKind = DatasetKind::Registry;
    const HEADER: &'static [&'static str] = &["unit_id", "fuel", "role"];
    type UniqueKey = UnitId;

    fn from_fields(rec: &csv::StringRecord, _rule: &ClockRule) -> Result<Self, String> {
        let unit_id = nonempty_unit(rec, 0)?;
        let fuel: FuelClass = field(rec, 1, "fuel")?.parse()?;
        let role: Role = field(rec, 2, "role")?.parse()?;
        Ok(Self { unit_id, fuel, role })
    }

    fn to_fields(&self) -> Vec<String> {
        vec![self.unit_id.0.clone(), self.fuel.name().to_owned(), self.role.code().to_owned()]
    }

    fn unique_key(&self) -> Option<UnitId> {
        Some(self.unit_id.clone())
    }
}

/// Parses one canonical CSV stream.
pub fn parse_records<T: CsvRecord, R: Read>(input: R, rule: &ClockRule) -> Result<(Vec<T>, IngestReport), IngestError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut rows = reader.records();
    let header = match rows.next() {
        None => return Err(IngestError::MissingHeader { kind: T::KIND }),
        Some(Err(source)) => return Err(IngestError::Csv { kind: T::KIND, line: 1, source }),
        Some(Ok(h)) => h,
    };
    let found: Vec<&str> = header.iter().map(|s| s.trim().trim_start_matches('\u{feff}')).collect();
    if found != T::HEADER {
        return Err(IngestError::Header { kind: T::KIND, expected: T::HEADER.join(","), found: found.join(",") });
    }

    let mut records = Vec::new();
    let mut report = IngestReport::default();
    let mut seen = BTreeSet::new();
    for row in rows {
        let row = match row {
            Ok(r) => r,
            Err(source) => {
                let line = source.position().map(|p| p.line()).unwrap_or(0);
                match source.kind() {
                    csv::ErrorKind::Utf8 { .. } => {
                        report.reject(line, "invalid UTF-8");
                        continue;
                    }
                    _ => return Err(IngestError::Csv { kind: T::KIND, line, source }),
                }
            }
        };
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != T::HEADER.len() {
            report.reject(line, format!("expected {} fields, found {}", T::HEADER.len(), row.len()));
            continue;
        }
        match T::from_fields(&row, rule) {
            Ok(rec) => {
                if let Some(k) = rec.unique_key() {
                    if !seen.insert(k) {
                        report.reject(line, "duplicate row for the same identity");
                        continue;
                    }
                }
                report.rows_accepted += 1;
                records.push(rec);
            }
            Err(reason) => report.reject(line, reason),
        }
    }
    Ok((records, report))
}

/// Writes records in canonical form. Parsing the output reproduces `records`.
pub fn write_records<T: CsvRecord, W: Write>(out: W, records: &[T]) -> Result<(), IngestError> {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let csv_err = |source| IngestError::Csv { kind: T::KIND, line: 0, source };
    writer.write_record(T::HEADER).map_err(csv_err)?;
    for r in records {
        writer.write_record(r.to_fields()).map_err(csv_err)?;
    }
    writer.flush()?;
    Ok(())
}

/// Parsed content of any dataset kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Generation(Vec<GenerationRecord>),
    Spot(Vec<SpotRecord>),
    Actions(Vec<BalancingAction>),
    TlmElexon(Vec<TlmRecord>),
    TlmBmr(Vec<TlmRecord>),
    Registry(Vec<UnitRegistryEntry>),
}

impl Dataset {
    pub fn len(&self) -> usize {
        match self {
            Dataset::Generation(v) => v.len(),
            Dataset::Spot(v) => v.len(),
            Dataset::Actions(v) => v.len(),
            Dataset::TlmElexon(v) | Dataset::TlmBmr(v) => v.len(),
            Dataset::Registry(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn parse_dataset<R: Read>(
    kind: DatasetKind,
    input: R,
    rule: &ClockRule,
) -> Result<(Dataset, IngestReport), IngestError> {
    Ok(match kind {
        DatasetKind::Generation => {
            let (v, r) = parse_records(input, rule)?;
            (Dataset::Generation(v), r)
        }
        DatasetKind::Spot => {
            let (v, r) = parse_records(input, rule)?;
            (Dataset::Spot(v), r)
        }
        DatasetKind::Actions => {
            let (v, r) = parse_records(input, rule)?;
            (Dataset::Actions(v), r)
        }
        DatasetKind::TlmElexon => {
            let (v, r) = parse_records::<ElexonTlm, _>(input, rule)?;
            (Dataset::TlmElexon(v.into_iter().map(|t| t.0).collect()), r)
        }
        DatasetKind::TlmBmr => {
            let (v, r) = parse_records::<BmrTlm, _>(input, rule)?;
            (Dataset::TlmBmr(v.into_iter().map(|t| t.0).collect()), r)
        }
        DatasetKind::Registry => {
            let (v, r) = parse_records(input, rule)?;
            (Dataset::Registry(v), r)
        }
    })
}

pub fn write_dataset<W: Write>(out: W, data: &Dataset) -> Result<(), IngestError> {
    match data {
        Dataset::Generation(v) => write_records(out, v),
        Dataset::Spot(v) => write_records(out, v),
        Dataset::Actions(v) => write_records(out, v),
        Dataset::TlmElexon(v) => {
            let rows: Vec<ElexonTlm> = v.iter().cloned().map(ElexonTlm).collect();
            write_records(out, &rows)
        }
        Dataset::TlmBmr(v) => {
            let rows: Vec<BmrTlm> = v.iter().cloned().map(BmrTlm).collect();
            write_records(out, &rows)
        }
        Dataset::Registry(v) => write_records(out, v),
    }
}

/// Unit registry indexed by identifier.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Registry {
    entries: BTreeMap<UnitId, UnitRegistryEntry>,
}

impl Registry {
    /// Builds a registry; later duplicates of an identifier are ignored.
    pub fn new(entries: impl IntoIterator<Item = UnitRegistryEntry>) -> Self {
        let mut map = BTreeMap::new();
        for e in entries {
            map.entry(e.unit_id.clone()).or_insert(e);
        }
        Self { entries: map }
    }

    pub fn get(&self, unit: &UnitId) -> Option<&UnitRegistryEntry> {
        self.entries.get(unit)
    }

    /// Registry entry, or an `Other`/`Unknown` entry for unregistered units.
    pub fn entry_or_default(&self, unit: &UnitId) -> UnitRegistryEntry {
        self.entries.get(unit).cloned().unwrap_or_else(|| UnitRegistryEntry {
            unit_id: unit.clone(),
            fuel: FuelClass::Other,
            role: Role::Unknown,
        })
    }

    pub fn entries(&self) -> impl Iterator<Item = &UnitRegistryEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Fuel class of a unit; unregistered units are `Other`.
pub fn classify_fuel(unit: &UnitId, registry: &Registry) -> FuelClass {
    registry.get(unit).map(|e| e.fuel).unwrap_or(FuelClass::Other)
}

/// Everything known about one unit in one settlement period.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitSlice {
    pub fuel: FuelClass,
    /// Metered volume, `None` when the unit has no generation row for the key.
    pub generation: Option<f64>,
    pub actions: Vec<BalancingAction>,
}

impl UnitSlice {
    pub fn generated(&self) -> f64 {
        self.generation.unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PeriodSlice {
    pub spot: Option<SpotRecord>,
    pub units: BTreeMap<UnitId, UnitSlice>,
}

impl PeriodSlice {
    pub fn missing_price(&self) -> bool {
        self.spot.is_none()
    }

    pub fn total_generation(&self) -> f64 {
        self.units.values().map(UnitSlice::generated).sum::<f64>() + 0.0
    }
}

/// Flat view of one `(key, unit)` row.
#[derive(Debug, Clone, Copy)]
pub struct JoinedRow<'a> {
    pub key: SettlementKey,
    pub unit_id: &'a UnitId,
    pub unit: &'a UnitSlice,
    pub spot: Option<&'a SpotRecord>,
}

/// Outer join of generation, spot and balancing data on settlement key, then
/// unit. Keys with no spot record are kept and flagged.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct JoinedTable {
    pub periods: BTreeMap<SettlementKey, PeriodSlice>,
    /// Actions dropped because an earlier row had the same (key, unit, kind).
    pub duplicate_actions: Vec<BalancingAction>,
    /// Generation rows dropped because an earlier row had the same (key, unit).
    pub duplicate_generation: Vec<GenerationRecord>,
}

impl JoinedTable {
    pub fn rows(&self) -> impl Iterator<Item = JoinedRow<'_>> {
        self.periods.iter().flat_map(|(key, slice)| {
            slice.units.iter().map(move |(unit_id, unit)| JoinedRow {
                key: *key,
                unit_id,
                unit,
                spot: slice.spot.as_ref(),
            })
        })
    }

    pub fn missing_price_keys(&self) -> impl Iterator<Item = SettlementKey> + '_ {
        self.periods.iter().filter(|(_, s)| s.missing_price()).map(|(k, _)| *k)
    }

    pub fn actions(&self) -> impl Iterator<Item = (FuelClass, &BalancingAction)> {
        self.periods.values().flat_map(|s| s.units.values()).flat_map(|u| u.actions.iter().map(move |a| (u.fuel, a)))
    }

    /// Restricts to keys whose date lies in `[from, to]`.
    pub fn window(&self, from: NaiveDate, to: NaiveDate) -> JoinedTable {
        JoinedTable {
            periods: self
                .periods
                .iter()
                .filter(|(k, _)| k.date >= from && k.date <= to)
                .map(|(k, v)| (*k, v.clone()))
                .collect(),
            duplicate_actions: Vec::new(),
            duplicate_generation: Vec::new(),
        }
    }
}

/// Joins the three record sets. Duplicate balancing rows for the same
/// (key, unit, kind) keep the first in input order; the rest are reported.
pub fn join_settlement(
    generation: &[GenerationRecord],
    spot: &[SpotRecord],
    actions: &[BalancingAction],
    registry: &Registry,
) -> JoinedTable {
    let mut table = JoinedTable::default();
    let unit_slice =
        |unit: &UnitId| UnitSlice { fuel: classify_fuel(unit, registry), generation: None, actions: Vec::new() };

    for g in generation {
        let period = table.periods.entry(g.key).or_default();
        let slot = period.units.entry(g.unit_id.clone()).or_insert_with(|| unit_slice(&g.unit_id));
        if slot.generation.is_some() {
            table.duplicate_generation.push(g.clone());
        } else {
            slot.generation = Some(g.volume);
        }
    }
    for s in spot {
        let period = table.periods.entry(s.key).or_default();
        // Spot files are de-duplicated by the parser; first wins otherwise.
        if period.spot.is_none() {
            period.spot = Some(s.clone());
        }
    }
    let mut seen = BTreeSet::new();
    for a in actions {
        if !seen.insert((a.key, a.unit_id.clone(), a.kind)) {
            table.duplicate_actions.push(a.clone());
            continue;
        }
        let period = table.periods.entry(a.key).or_default();
        period.units.entry(a.unit_id.clone()).or_insert_with(|| unit_slice(&a.unit_id)).actions.push(a.clone());
    }
    table
}
