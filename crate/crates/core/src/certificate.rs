//! Deployment contracts, certificate tokens, and the auditor-side check.
//!
//! Contracts and certificates are sealed: each embeds the SHA-256 of its own
//! canonical JSON with the digest field removed.

use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::canonical::{canonical_string, hash_excluding, sha256_hex};
use crate::decision::{forced_status, witness_check, ForcingWitness, Predicate, Status};
use crate::error::{GateError, Result};
use crate::network::NetworkModel;
use crate::rational::Rational;
use crate::record::{evaluate_standing, record_asof, RecordStore, ScopePolicy, StandingPolicy, TimeWindow, Timestamp};

pub const VERIFIER_VERSION: &str = concat!("gate-core/", env!("CARGO_PKG_VERSION"));
pub const REFINEMENT: &str = "bisection-widest-dim";
pub const ARITHMETIC: &str = "exact-rational";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeDescriptor {
    pub activations: Vec<String>,
    pub precision_bits: u32,
    pub refinement: String,
    pub arithmetic: String,
}

impl RegimeDescriptor {
    pub fn standard(activations: &[&str], precision_bits: u32) -> Self {
        let mut activations: Vec<String> = activations.iter().map(|s| s.to_string()).collect();
        activations.sort();
        activations.dedup();
        RegimeDescriptor {
            activations,
            precision_bits,
            refinement: REFINEMENT.into(),
            arithmetic: ARITHMETIC.into(),
        }
    }

    /// The assumptions every certificate under this regime must declare.
    pub fn assumptions(&self) -> Vec<String> {
        vec![
            format!("arithmetic={}", self.arithmetic),
            format!("refinement={}", self.refinement),
            format!("activations={}", self.activations.join(",")),
            format!("precision_bits={}", self.precision_bits),
            "propagation=interval-bound".into(),
        ]
    }

    /// Whether a network only uses activations this regime supports.
    pub fn supports(&self, net: &NetworkModel) -> bool {
        net.activations()
            .iter()
            .all(|a| self.activations.iter().any(|s| s == a))
    }
}

/// Configuration reference `t_int`: what was deployed, and when.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigRef {
    pub timestamp: Timestamp,
    pub model_hash: String,
    pub verifier_version: String,
    pub config_hash: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeploymentContract {
    pub scope_policy_id: String,
    pub regime: RegimeDescriptor,
    pub t_int: ConfigRef,
    /// Leaf propagations available per query.
    pub budget: u64,
    pub n_max: usize,
    pub standing_policy_id: String,
    pub tau: Rational,
    pub record_time: Timestamp,
    /// Per-input uncertainty radius; empty means a degenerate input box.
    pub input_radius: Vec<Rational>,
    pub contract_hash: String,
}

impl DeploymentContract {
    /// Recomputes and stores `contract_hash`.
    pub fn seal(mut self) -> Result<Self> {
        if self.input_radius.iter().any(Rational::is_negative) {
            return Err(GateError::Configuration("input radius must be non-negative".into()));
        }
        self.contract_hash = hash_excluding(&self, "contract_hash")?;
        Ok(self)
    }

    pub fn computed_hash(&self) -> String {
        hash_excluding(self, "contract_hash").expect("contracts always serialize")
    }

    pub fn hash_is_valid(&self) -> bool {
        self.computed_hash() == self.contract_hash
    }

    /// The same contract re-indexed to another record time.
    pub fn at_record_time(&self, t: Timestamp) -> Result<Self> {
        let mut c = self.clone();
        c.record_time = t;
        c.seal()
    }

    pub fn from_json(source: &[u8]) -> Result<Self> {
        let c: DeploymentContract = serde_json::from_slice(source)?;
        let computed = c.computed_hash();
        if computed != c.contract_hash {
            return Err(GateError::HashMismatch {
                embedded: c.contract_hash,
                computed,
            });
        }
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        canonical_string(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertType {
    Formal,
    Institutional,
    Mixed,
}

impl CertType {
    pub fn name(self) -> &'static str {
        match self {
            CertType::Formal => "formal",
            CertType::Institutional => "institutional",
            CertType::Mixed => "mixed",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Claim {
    pub predicate: Predicate,
    pub query_id: String,
    pub status: Status,
}

/// The scope a certificate claims for itself.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScopeDescriptor {
    pub policy_id: String,
    pub jurisdiction: String,
    pub time_window: TimeWindow,
    pub identity_rule_id: String,
}

impl ScopeDescriptor {
    pub fn admissible_under(&self, policy: &ScopePolicy) -> bool {
        self.policy_id == policy.policy_id
            && policy.jurisdictions.contains(&self.jurisdiction)
            && self.time_window.is_within(&policy.time_window)
            && self.identity_rule_id == policy.identity_rule_id
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertProvenance {
    pub model_hash: String,
    pub verifier_version: String,
    pub config_hash: String,
    pub record_item_hashes: Vec<String>,
    pub replay_seed: u64,
    pub contract_hash: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateToken {
    pub cert_type: CertType,
    pub claim: Claim,
    pub witness: ForcingWitness,
    pub assumptions: Vec<String>,
    pub scope: ScopeDescriptor,
    pub record_time: Timestamp,
    pub t_int: ConfigRef,
    pub provenance: CertProvenance,
    pub cert_hash: String,
}

pub const MANDATORY_FIELDS: &[&str] = &[
    "cert_type",
    "claim",
    "witness",
    "assumptions",
    "scope",
    "record_time",
    "t_int",
    "provenance",
    "cert_hash",
];

const PROVENANCE_FIELDS: &[&str] = &[
    "model_hash",
    "verifier_version",
    "config_hash",
    "record_item_hashes",
    "replay_seed",
    "contract_hash",
];

impl CertificateToken {
    pub fn computed_hash(&self) -> String {
        hash_excluding(self, "cert_hash").expect("certificates always serialize")
    }

    /// Recomputes and stores `cert_hash`.
    pub fn reseal(mut self) -> Self {
        self.cert_hash = self.computed_hash();
        self
    }

    pub fn to_json(&self) -> Result<String> {
        canonical_string(self)
    }

    pub fn from_json(source: &[u8]) -> Result<Self> {
        Ok(serde_json::from_slice(source)?)
    }
}

/// Seed recorded for replay; a pure function of the contract and query.
pub fn replay_seed(contract_hash: &str, query_id: &str) -> u64 {
    let digest = sha256_hex(format!("{contract_hash}:{query_id}").as_bytes());
    u64::from_str_radix(&digest[..16], 16).expect("hex digest prefix")
}

fn expected_cert_type(record_refs: &[String]) -> CertType {
    if record_refs.is_empty() {
        CertType::Formal
    } else {
        CertType::Mixed
    }
}

/// Builds a sealed certificate after re-checking the witness and resolving
/// every record reference as of the contract's record time.
pub fn issue_certificate(
    contract: &DeploymentContract,
    claim: Claim,
    witness: ForcingWitness,
    scope: ScopeDescriptor,
    record_refs: &[String],
    store: &RecordStore,
) -> Result<CertificateToken> {
    if !witness_check(&witness, &claim.predicate, claim.status) {
        return Err(GateError::WitnessRejected);
    }
    for r in record_refs {
        if store.resolve(r, &contract.record_time).is_none() {
            return Err(GateError::UnresolvedRecordRef(r.clone()));
        }
    }
    let token = CertificateToken {
        cert_type: expected_cert_type(record_refs),
        provenance: CertProvenance {
            model_hash: contract.t_int.model_hash.clone(),
            verifier_version: contract.t_int.verifier_version.clone(),
            config_hash: contract.t_int.config_hash.clone(),
            record_item_hashes: record_refs.to_vec(),
            replay_seed: replay_seed(&contract.contract_hash, &claim.query_id),
            contract_hash: contract.contract_hash.clone(),
        },
        claim,
        witness,
        assumptions: contract.regime.assumptions(),
        scope,
        record_time: contract.record_time,
        t_int: contract.t_int.clone(),
        cert_hash: String::new(),
    };
    Ok(token.reseal())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FailureCode {
    WitnessInvalid,
    ScopeMismatch,
    StandingFail,
    ProvenanceFail,
    FieldMissing,
    HashMismatch,
}

impl fmt::Display for FailureCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureCode::WitnessInvalid => "WITNESS_INVALID",
            FailureCode::ScopeMismatch => "SCOPE_MISMATCH",
            FailureCode::StandingFail => "STANDING_FAIL",
            FailureCode::ProvenanceFail => "PROVENANCE_FAIL",
            FailureCode::FieldMissing => "FIELD_MISSING",
            FailureCode::HashMismatch => "HASH_MISMATCH",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckFailure {
    pub field: String,
    pub code: FailureCode,
}

/// `accepted` holds exactly when `failures` is empty.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckResult {
    pub accepted: bool,
    pub failures: Vec<CheckFailure>,
}

impl CheckResult {
    fn from_failures(failures: Vec<CheckFailure>) -> Self {
        CheckResult {
            accepted: failures.is_empty(),
            failures,
        }
    }

    pub fn codes(&self) -> Vec<FailureCode> {
        self.failures.iter().map(|f| f.code).collect()
    }

    pub fn has(&self, code: FailureCode) -> bool {
        self.failures.iter().any(|f| f.code == code)
    }
}

/// Everything an auditor needs besides the token and the contract.
#[derive(Clone, Copy)]
pub struct CheckContext<'a> {
    pub store: &'a RecordStore,
    pub scope_policy: &'a ScopePolicy,
    pub standing_policy: &'a StandingPolicy,
}

pub fn check_certificate(
    contract: &DeploymentContract,
    token: &CertificateToken,
    ctx: CheckContext<'_>,
) -> CheckResult {
    let value = serde_json::to_value(token).expect("certificates always serialize");
    check_certificate_value(contract, &value, ctx)
}

/// Checks a certificate given as raw JSON so that withheld fields are
/// reported rather than rejected at parse time.
pub fn check_certificate_value(contract: &DeploymentContract, value: &Value, ctx: CheckContext<'_>) -> CheckResult {
    let missing = missing_fields(value);
    if !missing.is_empty() {
        return CheckResult::from_failures(
            missing
                .into_iter()
                .map(|field| CheckFailure {
                    field,
                    code: FailureCode::FieldMissing,
                })
                .collect(),
        );
    }
    let token: CertificateToken = match serde_json::from_value(value.clone()) {
        Ok(t) => t,
        Err(_) => {
            let field = malformed_field(value).unwrap_or_else(|| "token".into());
            return CheckResult::from_failures(vec![CheckFailure {
                field,
                code: FailureCode::FieldMissing,
            }]);
        }
    };
    let mut failures = Vec::new();
    let mut fail = |field: &str, code| {
        if !failures
            .iter()
            .any(|f: &CheckFailure| f.field == field && f.code == code)
        {
            failures.push(CheckFailure {
                field: field.into(),
                code,
            });
        }
    };

    // Integrity.
    if hash_excluding(value, "cert_hash").ok().as_deref() != Some(token.cert_hash.as_str()) {
        fail("cert_hash", FailureCode::HashMismatch);
    }
    if !contract.hash_is_valid() || token.provenance.contract_hash != contract.contract_hash {
        fail("provenance", FailureCode::HashMismatch);
    }

    // Witness.
    if !witness_check(&token.witness, &token.claim.predicate, token.claim.status) {
        fail("witness", FailureCode::WitnessInvalid);
    }
    if token.witness.stage() > contract.n_max {
        fail("witness", FailureCode::WitnessInvalid);
    }
    if let Predicate::Threshold(p) = &token.claim.predicate {
        if p.tau != contract.tau {
            fail("claim", FailureCode::WitnessInvalid);
        }
    }
    if token.assumptions != contract.regime.assumptions() {
        fail("assumptions", FailureCode::WitnessInvalid);
    }

    // Scope.
    if token.scope.policy_id != contract.scope_policy_id || !token.scope.admissible_under(ctx.scope_policy) {
        fail("scope", FailureCode::ScopeMismatch);
    }
    if token.record_time != contract.record_time {
        fail("record_time", FailureCode::ScopeMismatch);
    }

    // Provenance.
    let prov = &token.provenance;
    if prov.model_hash != contract.t_int.model_hash
        || prov.config_hash != contract.t_int.config_hash
        || prov.verifier_version != contract.t_int.verifier_version
        || prov.replay_seed != replay_seed(&contract.contract_hash, &token.claim.query_id)
        || prov
            .record_item_hashes
            .iter()
            .any(|h| ctx.store.resolve(h, &token.record_time).is_none())
    {
        fail("provenance", FailureCode::ProvenanceFail);
    }
    if token.t_int != contract.t_int {
        fail("t_int", FailureCode::ProvenanceFail);
    }
    if token.cert_type != expected_cert_type(&prov.record_item_hashes) {
        fail("cert_type", FailureCode::ProvenanceFail);
    }

    // Standing.
    if ctx.standing_policy.policy_id != contract.standing_policy_id
        || !evaluate_standing(ctx.standing_policy, &record_asof(ctx.store, &token.record_time)).passed()
    {
        fail("standing", FailureCode::StandingFail);
    }

    CheckResult::from_failures(failures)
}

fn missing_fields(value: &Value) -> Vec<String> {
    let Some(obj) = value.as_object() else {
        return vec!["token".into()];
    };
    let mut out: Vec<String> = MANDATORY_FIELDS
        .iter()
        .filter(|f| obj.get(**f).is_none_or(Value::is_null))
        .map(|f| f.to_string())
        .collect();
    if let Some(Value::Object(prov)) = obj.get("provenance") {
        out.extend(
            PROVENANCE_FIELDS
                .iter()
                .filter(|f| prov.get(**f).is_none_or(Value::is_null))
                .map(|f| format!("provenance.{f}")),
        );
    }
    out
}

fn parses<T: DeserializeOwned>(v: &Value) -> bool {
    serde_json::from_value::<T>(v.clone()).is_ok()
}

fn malformed_field(value: &Value) -> Option<String> {
    let obj = value.as_object()?;
    type Parses = fn(&Value) -> bool;
    let checks: [(&str, Parses); 9] = [
        ("cert_type", parses::<CertType>),
        ("claim", parses::<Claim>),
        ("witness", parses::<ForcingWitness>),
        ("assumptions", parses::<Vec<String>>),
        ("scope", parses::<ScopeDescriptor>),
        ("record_time", parses::<Timestamp>),
        ("t_int", parses::<ConfigRef>),
        ("provenance", parses::<CertProvenance>),
        ("cert_hash", parses::<String>),
    ];
    checks
        .iter()
        .find(|(f, ok)| obj.get(*f).is_some_and(|v| !ok(v)))
        .map(|(f, _)| f.to_string())
}

/// The check accepts and the certificate's scope lies inside the scope policy.
pub fn adequacy(contract: &DeploymentContract, token: &CertificateToken, ctx: CheckContext<'_>) -> bool {
    check_certificate(contract, token, ctx).accepted && token.scope.admissible_under(ctx.scope_policy)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Forcing {
    Asserts,
    Denies,
    Neither,
}

/// Which disjunct the token's witness forces for `predicate`.
pub fn forces(token: &CertificateToken, predicate: &Predicate) -> Forcing {
    match forced_status(&token.witness, predicate) {
        Status::A => Forcing::Asserts,
        Status::D => Forcing::Denies,
        Status::U => Forcing::Neither,
    }
}
