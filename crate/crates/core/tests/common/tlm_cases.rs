//! Exhaustive role × table availability × detsys-sign enumeration of TLM
//! resolution, checked against the procedure written out by hand.

use chrono::NaiveDate;
use windmarket::ingest::{FuelClass, Role, TlmRecord, UnitId, UnitRegistryEntry};
use windmarket::tlm::{resolve_tlm, Provenance, TlmError, TlmSources};
use windmarket::SettlementKey;

const E_P: f64 = 0.990;
const E_C: f64 = 1.010;
const B_P: f64 = 0.985;
const B_C: f64 = 1.015;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Table {
    Hit,
    Miss,
    /// Only the opposite role has an entry.
    OtherRole,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Detsys {
    Below,
    Above,
    One,
    Absent,
}

#[derive(Debug, PartialEq)]
pub enum Outcome {
    Value(f64, Provenance, Role),
    Unresolved,
    Ambiguous,
    Missing(Role),
    Other(String),
}

fn key() -> SettlementKey {
    SettlementKey::new(NaiveDate::from_ymd_opt(2013, 6, 15).unwrap(), 20)
}

fn detsys_value(d: Detsys) -> Option<f64> {
    match d {
        Detsys::Below => Some(0.992),
        Detsys::Above => Some(1.008),
        Detsys::One => Some(1.0),
        Detsys::Absent => None,
    }
}

pub fn expected(role: Role, elexon: Table, bmr: Table, detsys: Detsys) -> Outcome {
    let inferred = match role {
        Role::Unknown => match detsys {
            Detsys::Absent => return Outcome::Unresolved,
            Detsys::One => return Outcome::Ambiguous,
            Detsys::Below => Role::Producer,
            Detsys::Above => Role::Consumer,
        },
        known => known,
    };
    let (e, b) = if inferred == Role::Producer { (E_P, B_P) } else { (E_C, B_C) };
    if elexon == Table::Hit {
        Outcome::Value(e, Provenance::ElexonTable, inferred)
    } else if bmr == Table::Hit {
        Outcome::Value(b, Provenance::BmrHistoric, inferred)
    } else if role == Role::Unknown {
        Outcome::Value(detsys_value(detsys).unwrap(), Provenance::DetsysInferred, inferred)
    } else {
        Outcome::Missing(inferred)
    }
}

/// `Hit` holds both roles; `OtherRole` holds only the role not queried.
fn table_rows(table: Table, p: f64, c: f64, queried: Role) -> Vec<TlmRecord> {
    let rec = |role, multiplier| TlmRecord { key: key(), role, multiplier };
    match (table, queried) {
        (Table::Hit, _) => vec![rec(Role::Producer, p), rec(Role::Consumer, c)],
        (Table::Miss, _) => vec![],
        (Table::OtherRole, Role::Producer) => vec![rec(Role::Consumer, c)],
        (Table::OtherRole, _) => vec![rec(Role::Producer, p)],
    }
}

pub fn actual(role: Role, elexon: Table, bmr: Table, detsys: Detsys) -> Outcome {
    let queried = match (role, detsys) {
        (Role::Unknown, Detsys::Above) => Role::Consumer,
        (Role::Unknown, _) => Role::Producer,
        (r, _) => r,
    };
    let sources = TlmSources::new(&table_rows(elexon, E_P, E_C, queried), &table_rows(bmr, B_P, B_C, queried));
    let unit = UnitRegistryEntry { unit_id: UnitId::new("T-1"), fuel: FuelClass::Ccgt, role };
    match resolve_tlm(&unit, key(), detsys_value(detsys), &sources) {
        Ok(r) => Outcome::Value(r.value, r.provenance, r.inferred_role),
        Err(TlmError::Unresolved { .. }) => Outcome::Unresolved,
        Err(TlmError::Ambiguous { .. }) => Outcome::Ambiguous,
        Err(TlmError::Missing { role, .. }) => Outcome::Missing(role),
        Err(e) => Outcome::Other(e.to_string()),
    }
}

/// Runs every case; returns the case count and a description of each mismatch.
pub fn run_all() -> (usize, Vec<String>) {
    let tables = [Table::Hit, Table::Miss, Table::OtherRole];
    let mut cases = 0;
    let mut mismatches = Vec::new();
    for role in [Role::Producer, Role::Consumer, Role::Unknown] {
        for elexon in tables {
            for bmr in tables {
                for ds in [Detsys::Below, Detsys::Above, Detsys::One, Detsys::Absent] {
                    let (got, want) = (actual(role, elexon, bmr, ds), expected(role, elexon, bmr, ds));
                    if got != want {
                        mismatches.push(format!("{role:?} {elexon:?} {bmr:?} {ds:?}: {got:?} != {want:?}"));
                    }
                    cases += 1;
                }
            }
        }
    }
    (cases, mismatches)
}
