//! Transmission Loss Multiplier resolution.
//!
//! Producers carry a delivering multiplier below one, consumers an
//! off-taking multiplier above one. Resolution order for a unit in one
//! settlement period:
//!
//! 1. Known role: the Elexon table entry for (key, role); failing that the
//!    BMReports historic entry.
//! 2. Unknown role: the per-action published (DETSYSPRICE) value decides the
//!    role (< 1 producer, > 1 consumer) and step 1 runs with that role. If both
//!    tables miss, the published value itself is used.
//!
//! Anything else is an error. There is no default multiplier.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{BalancingAction, Role, TlmRecord, UnitId, UnitRegistryEntry};
use crate::timebase::SettlementKey;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TlmError {
    #[error("{unit} at {key}: role unknown and no published multiplier")]
    Unresolved { unit: UnitId, key: SettlementKey },
    #[error("{unit} at {key}: no Elexon or BMReports multiplier for role {role:?}")]
    Missing { unit: UnitId, key: SettlementKey, role: Role },
    #[error("{unit} at {key}: published multiplier is exactly 1, role ambiguous")]
    Ambiguous { unit: UnitId, key: SettlementKey },
    #[error("{source_name} multiplier {value} at {key} violates the {role:?} bound")]
    DataIntegrity { source_name: &'static str, key: SettlementKey, role: Role, value: f64 },
}

/// Sanity envelope for every multiplier, open on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlmBounds {
    pub low: f64,
    pub high: f64,
}

impl Default for TlmBounds {
    fn default() -> Self {
        Self { low: 0.5, high: 1.5 }
    }
}

impl TlmBounds {
    /// Producer values in (low, 1), consumer values in (1, high).
    pub fn admits(&self, role: Role, value: f64) -> bool {
        if !(value > self.low && value < self.high) {
            return false;
        }
        match role {
            Role::Producer => value < 1.0,
            Role::Consumer => value > 1.0,
            Role::Unknown => value != 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    ElexonTable,
    BmrHistoric,
    DetsysInferred,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedTlm {
    pub value: f64,
    pub provenance: Provenance,
    /// Role used for the lookup: the registry role, or the one inferred from
    /// the published value.
    pub inferred_role: Role,
}

/// The two per-period TLM tables.
#[derive(Debug, Clone, Default)]
pub struct TlmSources {
    pub elexon: HashMap<(SettlementKey, Role), f64>,
    pub bmr_historic: HashMap<(SettlementKey, Role), f64>,
    pub bounds: TlmBounds,
}

impl TlmSources {
    pub fn new(elexon: &[TlmRecord], bmr_historic: &[TlmRecord]) -> Self {
        let index = |rows: &[TlmRecord]| {
            let mut map = HashMap::with_capacity(rows.len());
            for r in rows {
                map.entry((r.key, r.role)).or_insert(r.multiplier);
            }
            map
        };
        Self { elexon: index(elexon), bmr_historic: index(bmr_historic), bounds: TlmBounds::default() }
    }

    pub fn with_bounds(mut self, bounds: TlmBounds) -> Self {
        self.bounds = bounds;
        self
    }

    /// Resolves the multiplier for an action; the action's published value
    /// is the DETSYSPRICE input.
    pub fn resolve_action(&self, unit: &UnitRegistryEntry, action: &BalancingAction) -> Result<ResolvedTlm, TlmError> {
        resolve_tlm(unit, action.key, action.tlm_published, self)
    }
}

fn lookup(sources: &TlmSources, key: SettlementKey, role: Role) -> Result<Option<(f64, Provenance)>, TlmError> {
    let tables: [(&'static str, &HashMap<_, _>, Provenance); 2] = [
        ("elexon", &sources.elexon, Provenance::ElexonTable),
        ("bmr_historic", &sources.bmr_historic, Provenance::BmrHistoric),
    ];
    for (name, table, provenance) in tables {
        if let Some(&value) = table.get(&(key, role)) {
            if !sources.bounds.admits(role, value) {
                return Err(TlmError::DataIntegrity { source_name: name, key, role, value });
            }
            return Ok(Some((value, provenance)));
        }
    }
    Ok(None)
}

/// Runs the resolution procedure for one unit and settlement period.
pub fn resolve_tlm(
    unit: &UnitRegistryEntry,
    key: SettlementKey,
    detsys: Option<f64>,
    sources: &TlmSources,
) -> Result<ResolvedTlm, TlmError> {
    let id = || unit.unit_id.clone();
    match unit.role {
        Role::Producer | Role::Consumer => match lookup(sources, key, unit.role)? {
            Some((value, provenance)) => Ok(ResolvedTlm { value, provenance, inferred_role: unit.role }),
            None => Err(TlmError::Missing { unit: id(), key, role: unit.role }),
        },
        Role::Unknown => {
            let published = detsys.ok_or_else(|| TlmError::Unresolved { unit: id(), key })?;
            let role = if published < 1.0 {
                Role::Producer
            } else if published > 1.0 {
                Role::Consumer
            } else {
                return Err(TlmError::Ambiguous { unit: id(), key });
            };
            if !sources.bounds.admits(role, published) {
                return Err(TlmError::DataIntegrity { source_name: "detsys", key, role, value: published });
            }
            Ok(match lookup(sources, key, role)? {
                Some((value, provenance)) => ResolvedTlm { value, provenance, inferred_role: role },
                None => ResolvedTlm { value: published, provenance: Provenance::DetsysInferred, inferred_role: role },
            })
        }
    }
}

/// A published per-action multiplier that differs from the historic table.
#[derive(Debug, Clone, PartialEq)]
pub struct TlmDisagreement {
    pub key: SettlementKey,
    pub unit_id: UnitId,
    pub published: f64,
    pub historic: f64,
    pub relative_diff: f64,
}

/// Default relative threshold for [`disagreements`].
pub const DEFAULT_DISAGREEMENT_THRESHOLD: f64 = 1e-3;

/// Lists actions whose published multiplier differs from the BMReports
/// historic value for the same role by more than `threshold` (relative).
/// Reported only; resolution is unaffected.
pub fn disagreements<'a>(
    actions: impl IntoIterator<Item = (&'a UnitRegistryEntry, &'a BalancingAction)>,
    sources: &TlmSources,
    threshold: f64,
) -> Vec<TlmDisagreement> {
    let mut out = Vec::new();
    for (unit, action) in actions {
        let Some(published) = action.tlm_published else { continue };
        let role = match unit.role {
            Role::Unknown if published < 1.0 => Role::Producer,
            Role::Unknown if published > 1.0 => Role::Consumer,
            Role::Unknown => continue,
            known => known,
        };
        if let Some(&historic) = sources.bmr_historic.get(&(action.key, role)) {
            let relative_diff = (published - historic).abs() / historic.abs();
            if relative_diff > threshold {
                out.push(TlmDisagreement {
                    key: action.key,
                    unit_id: action.unit_id.clone(),
                    published,
                    historic,
                    relative_diff,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::FuelClass;
    use chrono::NaiveDate;

    fn key() -> SettlementKey {
        SettlementKey::new(NaiveDate::from_ymd_opt(2013, 5, 1).unwrap(), 20)
    }

    fn unit(role: Role) -> UnitRegistryEntry {
        UnitRegistryEntry { unit_id: "U1".into(), fuel: FuelClass::Ccgt, role }
    }

    fn sources(elexon: Option<f64>, bmr: Option<f64>, role: Role) -> TlmSources {
        let mut s = TlmSources::default();
        if let Some(v) = elexon {
            s.elexon.insert((key(), role), v);
        }
        if let Some(v) = bmr {
            s.bmr_historic.insert((key(), role), v);
        }
        s
    }

    #[test]
    fn elexon_preferred() {
        let r = resolve_tlm(&unit(Role::Producer), key(), None, &sources(Some(0.990), Some(0.985), Role::Producer))
            .unwrap();
        assert_eq!((r.value, r.provenance), (0.990, Provenance::ElexonTable));
    }

    #[test]
    fn falls_back_to_bmr() {
        let r = resolve_tlm(&unit(Role::Producer), key(), None, &sources(None, Some(0.985), Role::Producer)).unwrap();
        assert_eq!((r.value, r.provenance), (0.985, Provenance::BmrHistoric));
    }

    #[test]
    fn unknown_role_inferred_from_published_value() {
        let r =
            resolve_tlm(&unit(Role::Unknown), key(), Some(0.992), &sources(Some(0.990), None, Role::Producer)).unwrap();
        assert_eq!(r.value, 0.990);
        assert_eq!(r.inferred_role, Role::Producer);
        assert_eq!(r.provenance, Provenance::ElexonTable);
    }

    #[test]
    fn error_branches() {
        let empty = TlmSources::default();
        assert!(matches!(resolve_tlm(&unit(Role::Unknown), key(), None, &empty), Err(TlmError::Unresolved { .. })));
        assert!(matches!(resolve_tlm(&unit(Role::Unknown), key(), Some(1.0), &empty), Err(TlmError::Ambiguous { .. })));
        assert!(matches!(resolve_tlm(&unit(Role::Consumer), key(), None, &empty), Err(TlmError::Missing { .. })));
        // Producer table value above one is a data bug.
        assert!(matches!(
            resolve_tlm(&unit(Role::Producer), key(), None, &sources(Some(1.01), None, Role::Producer)),
            Err(TlmError::DataIntegrity { source_name: "elexon", .. })
        ));
        assert!(matches!(
            resolve_tlm(&unit(Role::Unknown), key(), Some(0.3), &empty),
            Err(TlmError::DataIntegrity { source_name: "detsys", .. })
        ));
    }

    #[test]
    fn disagreement_report() {
        let s = sources(None, Some(0.98), Role::Producer);
        let u = unit(Role::Producer);
        let mk = |t: f64| BalancingAction {
            key: key(),
            unit_id: "U1".into(),
            kind: crate::ingest::ActionKind::Bid,
            volume: 1.0,
            price: 1.0,
            tlm_published: Some(t),
        };
        let close = mk(0.9805);
        let far = mk(0.97);
        let found = disagreements([(&u, &close), (&u, &far)], &s, DEFAULT_DISAGREEMENT_THRESHOLD);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].published, 0.97);
    }
}
