//! Time-indexed public record, scope and standing policies, and the
//! count-based featurizer that turns a record slice into network inputs.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::canonical::{canonical_hash, canonical_string};
use crate::error::{GateError, Result};
use crate::rational::Rational;

pub type Timestamp = DateTime<Utc>;

/// Evidence classes the featurizer recognises.
pub const EVIDENCE_CLASSES: &[&str] = &[
    "court_ruling",
    "inquiry_report",
    "press_report",
    "registry_entry",
    "sworn_testimony",
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemProvenance {
    pub source_id: String,
    pub custody_chain: Vec<String>,
    pub authenticated: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordItem {
    pub item_id: String,
    pub content_hash: String,
    pub evidence_class: String,
    pub timestamp: Timestamp,
    pub provenance: ItemProvenance,
}

impl RecordItem {
    /// Digest referenced by certificates; covers every field.
    pub fn digest(&self) -> String {
        canonical_hash(self).expect("record items always serialize")
    }

    fn validate(&self) -> Result<()> {
        if self.content_hash.is_empty() {
            return Err(GateError::Parse(format!("item {}: empty content_hash", self.item_id)));
        }
        Ok(())
    }
}

/// Append-only record store. Items keep insertion order; as-of queries
/// return them sorted by timestamp.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RecordStore {
    items: Vec<RecordItem>,
    completeness_attested: bool,
}

impl RecordStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn items(&self) -> &[RecordItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn append(&mut self, item: RecordItem) -> Result<()> {
        item.validate()?;
        if self.items.iter().any(|i| i.item_id == item.item_id) {
            return Err(GateError::Parse(format!("duplicate item_id {}", item.item_id)));
        }
        self.items.push(item);
        Ok(())
    }

    /// Records an attestation that the store is a complete registry.
    /// Nothing verifies the attestation; it is carried as a flag only.
    pub fn attest_completeness(&mut self) {
        self.completeness_attested = true;
    }

    pub fn completeness_attested(&self) -> bool {
        self.completeness_attested
    }

    /// Item with the given digest that was on record at `t`.
    pub fn resolve(&self, digest: &str, t: &Timestamp) -> Option<&RecordItem> {
        self.items.iter().find(|i| i.timestamp <= *t && i.digest() == digest)
    }

    pub fn from_jsonl(source: &str) -> Result<Self> {
        let mut store = RecordStore::new();
        for (n, line) in source.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let item: RecordItem =
                serde_json::from_str(line).map_err(|e| GateError::Parse(format!("record line {}: {e}", n + 1)))?;
            store.append(item)?;
        }
        Ok(store)
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for item in &self.items {
            out.push_str(&canonical_string(item)?);
            out.push('\n');
        }
        Ok(out)
    }
}

/// Items with `timestamp <= t`, ordered by timestamp then insertion.
pub fn record_asof(store: &RecordStore, t: &Timestamp) -> Vec<RecordItem> {
    let mut out: Vec<RecordItem> = store.items.iter().filter(|i| i.timestamp <= *t).cloned().collect();
    out.sort_by_key(|i| i.timestamp);
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeWindow {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl TimeWindow {
    pub fn contains(&self, t: &Timestamp) -> bool {
        self.start <= *t && *t <= self.end
    }

    pub fn is_within(&self, other: &TimeWindow) -> bool {
        other.start <= self.start && self.end <= other.end
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScopePolicy {
    pub policy_id: String,
    pub jurisdictions: BTreeSet<String>,
    pub time_window: TimeWindow,
    pub identity_rule_id: String,
}

impl ScopePolicy {
    pub fn validate(&self) -> Result<()> {
        if self.time_window.start > self.time_window.end {
            return Err(GateError::Configuration(format!(
                "scope policy {}: time window starts after it ends",
                self.policy_id
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StandingPolicy {
    pub policy_id: String,
    pub required_classes: BTreeMap<String, u32>,
    pub require_authenticated: bool,
}

/// Both policies as stored in one `.policy.json` file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyBundle {
    pub scope: ScopePolicy,
    pub standing: StandingPolicy,
}

impl PolicyBundle {
    pub fn from_json(source: &[u8]) -> Result<Self> {
        let bundle: PolicyBundle = serde_json::from_slice(source)?;
        bundle.scope.validate()?;
        Ok(bundle)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryMeta {
    pub jurisdiction: String,
    pub query_time: Timestamp,
    pub identity_rule_id: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScopeFailure {
    Jurisdiction,
    TimeWindow,
    Identity,
}

impl fmt::Display for ScopeFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScopeFailure::Jurisdiction => "jurisdiction",
            ScopeFailure::TimeWindow => "time_window",
            ScopeFailure::Identity => "identity",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ScopeOutcome {
    Pass,
    Fail(ScopeFailure),
}

impl ScopeOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, ScopeOutcome::Pass)
    }
}

pub fn evaluate_scope(policy: &ScopePolicy, meta: &QueryMeta) -> ScopeOutcome {
    if !policy.jurisdictions.contains(&meta.jurisdiction) {
        ScopeOutcome::Fail(ScopeFailure::Jurisdiction)
    } else if !policy.time_window.contains(&meta.query_time) {
        ScopeOutcome::Fail(ScopeFailure::TimeWindow)
    } else if policy.identity_rule_id != meta.identity_rule_id {
        ScopeOutcome::Fail(ScopeFailure::Identity)
    } else {
        ScopeOutcome::Pass
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StandingOutcome {
    Pass,
    /// Shortfall per evidence class.
    Fail {
        missing: BTreeMap<String, u32>,
    },
}

impl StandingOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, StandingOutcome::Pass)
    }
}

pub fn evaluate_standing(policy: &StandingPolicy, items: &[RecordItem]) -> StandingOutcome {
    let mut missing = BTreeMap::new();
    for (class, &min) in &policy.required_classes {
        let have = items
            .iter()
            .filter(|i| &i.evidence_class == class)
            .filter(|i| !policy.require_authenticated || i.provenance.authenticated)
            .count() as u32;
        if have < min {
            missing.insert(class.clone(), min - have);
        }
    }
    if missing.is_empty() {
        StandingOutcome::Pass
    } else {
        StandingOutcome::Fail { missing }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureDim {
    pub evidence_class: String,
    pub saturation: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSpec {
    pub dims: Vec<FeatureDim>,
}

impl FeatureSpec {
    pub fn new(dims: &[(&str, u32)]) -> Self {
        FeatureSpec {
            dims: dims
                .iter()
                .map(|(c, s)| FeatureDim {
                    evidence_class: c.to_string(),
                    saturation: *s,
                })
                .collect(),
        }
    }

    pub fn config_hash(&self) -> String {
        canonical_hash(self).expect("feature specs always serialize")
    }
}

/// `min(count, saturation) / saturation` per dimension; each value lies in [0, 1].
pub fn features_from_record(items: &[RecordItem], spec: &FeatureSpec) -> Result<Vec<Rational>> {
    let known: HashSet<&str> = EVIDENCE_CLASSES.iter().copied().collect();
    spec.dims
        .iter()
        .map(|d| {
            if !known.contains(d.evidence_class.as_str()) {
                return Err(GateError::UnknownClass(d.evidence_class.clone()));
            }
            if d.saturation == 0 {
                return Err(GateError::Configuration(format!(
                    "saturation for {} must be positive",
                    d.evidence_class
                )));
            }
            let count = items.iter().filter(|i| i.evidence_class == d.evidence_class).count() as i64;
            let sat = d.saturation as i64;
            Ok(Rational::new(count.min(sat), sat))
        })
        .collect()
}
