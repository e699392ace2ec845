//! A small deployment shared by the integration tests: two record-derived
//! inputs (press coverage, inquiry findings) feeding `f = 1/5 + x0/5 + 3*x1/5`
//! through one relu layer.

#![allow(dead_code)]

use gate_core::certificate::{ConfigRef, RegimeDescriptor, VERIFIER_VERSION};
use gate_core::gate::Query;
use gate_core::rational::q;
use gate_core::record::{
    FeatureSpec, ItemProvenance, PolicyBundle, QueryMeta, RecordItem, RecordStore, ScopePolicy, StandingPolicy,
    TimeWindow, Timestamp,
};
use gate_core::{DeploymentContract, Layer, NetworkModel, Predicate, Rational};

pub fn ts(s: &str) -> Timestamp {
    s.parse().unwrap()
}

pub fn net() -> NetworkModel {
    NetworkModel::new(
        "toy",
        2,
        vec![
            Layer::Affine {
                weights: vec![vec![q("1"), q("0")], vec![q("0"), q("1")]],
                bias: vec![q("0"), q("0")],
            },
            Layer::Relu,
            Layer::Affine {
                weights: vec![vec![q("1/5"), q("3/5")]],
                bias: vec![q("1/5")],
            },
        ],
    )
    .unwrap()
}

pub fn spec(press_saturation: u32, inquiry_saturation: u32) -> FeatureSpec {
    FeatureSpec::new(&[
        ("press_report", press_saturation),
        ("inquiry_report", inquiry_saturation),
    ])
}

pub fn policies() -> PolicyBundle {
    PolicyBundle {
        scope: ScopePolicy {
            policy_id: "sigma".into(),
            jurisdictions: ["US".to_string()].into_iter().collect(),
            time_window: TimeWindow {
                start: ts("2025-01-01T00:00:00Z"),
                end: ts("2026-12-31T00:00:00Z"),
            },
            identity_rule_id: "named-official".into(),
        },
        standing: StandingPolicy {
            policy_id: "S".into(),
            required_classes: [("press_report".to_string(), 1)].into_iter().collect(),
            require_authenticated: true,
        },
    }
}

pub struct Terms {
    pub radius: Vec<Rational>,
    pub budget: u64,
    pub n_max: usize,
    pub record_time: Timestamp,
    pub spec: FeatureSpec,
}

impl Default for Terms {
    fn default() -> Self {
        Terms {
            radius: vec![],
            budget: 32,
            n_max: 8,
            record_time: ts("2025-06-15T00:00:00Z"),
            spec: spec(4, 1),
        }
    }
}

pub fn contract(t: Terms) -> DeploymentContract {
    let p = policies();
    DeploymentContract {
        scope_policy_id: p.scope.policy_id,
        regime: RegimeDescriptor::standard(&["relu"], 32),
        t_int: ConfigRef {
            timestamp: ts("2025-01-01T00:00:00Z"),
            model_hash: net().model_hash().into(),
            verifier_version: VERIFIER_VERSION.into(),
            config_hash: t.spec.config_hash(),
        },
        budget: t.budget,
        n_max: t.n_max,
        standing_policy_id: p.standing.policy_id,
        tau: q("7/10"),
        record_time: t.record_time,
        input_radius: t.radius,
        contract_hash: String::new(),
    }
    .seal()
    .unwrap()
}

pub fn item(id: &str, class: &str, t: &str) -> RecordItem {
    RecordItem {
        item_id: id.into(),
        content_hash: format!("sha256:{id}"),
        evidence_class: class.into(),
        timestamp: ts(t),
        provenance: ItemProvenance {
            source_id: format!("source-{id}"),
            custody_chain: vec!["archive".into()],
            authenticated: true,
        },
    }
}

pub fn store(press: usize, inquiry: usize) -> RecordStore {
    let mut s = RecordStore::new();
    for k in 0..press {
        s.append(item(&format!("press-{k}"), "press_report", "2025-02-01T00:00:00Z"))
            .unwrap();
    }
    for k in 0..inquiry {
        s.append(item(&format!("inquiry-{k}"), "inquiry_report", "2025-06-01T00:00:00Z"))
            .unwrap();
    }
    s
}

pub fn query(id: &str, spec: FeatureSpec) -> Query {
    Query {
        query_id: id.into(),
        query_meta: QueryMeta {
            jurisdiction: "US".into(),
            query_time: ts("2025-06-15T00:00:00Z"),
            identity_rule_id: "named-official".into(),
        },
        predicate: Predicate::threshold(0, q("7/10")),
        feature_spec: spec,
    }
}
