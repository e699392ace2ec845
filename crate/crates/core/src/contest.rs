//! Challenge intake, contractual re-check, status revision, and the
//! hash-chained entitlement history.
//!
//! Each log line is the canonical JSON of one [`HistoryEntry`]. An entry's
//! `entry_hash` covers every other field, and `prev_entry_hash` is the
//! previous entry's `entry_hash` (genesis: [`ZERO_DIGEST`]).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::canonical::{canonical_string, hash_excluding, ZERO_DIGEST};
use crate::certificate::{
    check_certificate, CertificateToken, CheckContext, CheckResult, DeploymentContract, FailureCode,
};
use crate::decision::{ForcingWitness, Status};
use crate::error::{GateError, Result};
use crate::gate::{InterfaceOutput, ReasonClass, UndeterminedDetail};
use crate::record::Timestamp;

pub const AUTHORIZED_ROLES: &[&str] = &["affected_party", "auditor"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Event {
    Issued,
    Challenged,
    Upheld,
    Dismissed,
    Revised,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ground {
    WitnessValidity,
    ScopeApplicability,
    ProvenanceDefect,
}

impl Ground {
    /// Failure codes that count against the aspect this ground disputes.
    pub fn targets(self) -> &'static [FailureCode] {
        match self {
            Ground::WitnessValidity => &[FailureCode::WitnessInvalid],
            Ground::ScopeApplicability => &[FailureCode::ScopeMismatch],
            Ground::ProvenanceDefect => &[
                FailureCode::ProvenanceFail,
                FailureCode::StandingFail,
                FailureCode::HashMismatch,
                FailureCode::FieldMissing,
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Challenge {
    pub challenge_id: String,
    pub challenger_role: String,
    pub target_cert_hash: String,
    pub ground: Ground,
    pub submitted_at: Timestamp,
    #[serde(default)]
    pub payload: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistoryEntry {
    pub seq: u64,
    pub event: Event,
    pub query_id: String,
    pub cert_hash: Option<String>,
    pub new_status: Option<Status>,
    pub challenge_id: Option<String>,
    pub output_hash: Option<String>,
    /// Output replaced by a revision.
    pub supersedes: Option<String>,
    pub prev_entry_hash: String,
    pub entry_hash: String,
}

impl HistoryEntry {
    pub fn computed_hash(&self) -> String {
        hash_excluding(self, "entry_hash").expect("history entries always serialize")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Acknowledgment {
    pub challenge_id: String,
    pub seq: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecheckOutcome {
    pub challenge_id: String,
    pub query_id: String,
    pub ground: Ground,
    pub upheld: bool,
    pub check: CheckResult,
}

impl RecheckOutcome {
    pub fn verdict(&self) -> &'static str {
        if self.upheld {
            "upheld"
        } else {
            "dismissed"
        }
    }
}

#[derive(Clone, Debug, Default)]
struct EntryFields {
    cert_hash: Option<String>,
    new_status: Option<Status>,
    challenge_id: Option<String>,
    output_hash: Option<String>,
    supersedes: Option<String>,
}

/// Append-only entitlement history with archives of the outputs and
/// certificates its entries reference.
#[derive(Clone, Debug, Default)]
pub struct EntitlementHistory {
    entries: Vec<HistoryEntry>,
    outputs: BTreeMap<String, InterfaceOutput>,
    certificates: BTreeMap<String, CertificateToken>,
    challenges: BTreeMap<String, Challenge>,
}

impl EntitlementHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads a log after verifying its chain.
    pub fn from_jsonl(source: &[u8]) -> Result<Self> {
        if let ReplayResult::Invalid { seq, reason } = replay_verify(source) {
            return Err(GateError::Parse(format!("history invalid at seq {seq}: {reason}")));
        }
        let mut h = EntitlementHistory::new();
        for line in source.split(|b| *b == b'\n').filter(|l| !l.is_empty()) {
            h.entries.push(serde_json::from_slice(line)?);
        }
        Ok(h)
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&canonical_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn entries(&self) -> &[HistoryEntry] {
        &self.entries
    }

    fn append(&mut self, event: Event, query_id: &str, f: EntryFields) -> u64 {
        let seq = self.entries.len() as u64;
        let prev = self
            .entries
            .last()
            .map(|e| e.entry_hash.clone())
            .unwrap_or_else(|| ZERO_DIGEST.to_string());
        let mut entry = HistoryEntry {
            seq,
            event,
            query_id: query_id.into(),
            cert_hash: f.cert_hash,
            new_status: f.new_status,
            challenge_id: f.challenge_id,
            output_hash: f.output_hash,
            supersedes: f.supersedes,
            prev_entry_hash: prev,
            entry_hash: String::new(),
        };
        entry.entry_hash = entry.computed_hash();
        self.entries.push(entry);
        seq
    }

    /// Records an issued output and archives it with its certificates.
    pub fn record_output(&mut self, output: &InterfaceOutput) -> u64 {
        let output_hash = output.output_hash();
        for c in output.certificates() {
            self.certificates.insert(c.cert_hash.clone(), c.clone());
        }
        self.outputs.insert(output_hash.clone(), output.clone());
        let fields = EntryFields {
            cert_hash: output.certificates().first().map(|c| c.cert_hash.clone()),
            new_status: Some(output.status),
            output_hash: Some(output_hash),
            ..Default::default()
        };
        self.append(Event::Issued, &output.query_id, fields)
    }

    /// Makes a certificate available to challenges; it must already be
    /// referenced by an ISSUED entry.
    pub fn archive_certificate(&mut self, token: CertificateToken) -> Result<()> {
        if !self.was_issued(&token.cert_hash) {
            return Err(GateError::UnknownCertificate(token.cert_hash));
        }
        self.certificates.insert(token.cert_hash.clone(), token);
        Ok(())
    }

    fn was_issued(&self, cert_hash: &str) -> bool {
        self.entries
            .iter()
            .any(|e| e.event == Event::Issued && e.cert_hash.as_deref() == Some(cert_hash))
    }

    pub fn certificate(&self, cert_hash: &str) -> Option<&CertificateToken> {
        self.certificates.get(cert_hash)
    }

    fn latest_output_entry(&self, query_id: &str) -> Option<&HistoryEntry> {
        self.entries
            .iter()
            .rev()
            .find(|e| e.query_id == query_id && matches!(e.event, Event::Issued | Event::Revised))
    }

    pub fn current_status(&self, query_id: &str) -> Option<Status> {
        self.latest_output_entry(query_id).and_then(|e| e.new_status)
    }

    /// The output now in force for `query_id`, if archived.
    pub fn current_output(&self, query_id: &str) -> Option<&InterfaceOutput> {
        let e = self.latest_output_entry(query_id)?;
        self.outputs.get(e.output_hash.as_deref()?)
    }

    /// The output recorded by the entry at `seq`, if archived.
    pub fn output_at(&self, seq: u64) -> Option<&InterfaceOutput> {
        let e = self.entries.get(seq as usize)?;
        self.outputs.get(e.output_hash.as_deref()?)
    }
}

pub fn submit_challenge(log: &mut EntitlementHistory, challenge: Challenge) -> Result<Acknowledgment> {
    if !AUTHORIZED_ROLES.contains(&challenge.challenger_role.as_str()) {
        return Err(GateError::UnauthorizedChallenger(challenge.challenger_role));
    }
    let Some(cert) = log.certificates.get(&challenge.target_cert_hash) else {
        return Err(GateError::UnknownCertificate(challenge.target_cert_hash));
    };
    if log.challenges.contains_key(&challenge.challenge_id) {
        return Err(GateError::Configuration(format!(
            "challenge {} already submitted",
            challenge.challenge_id
        )));
    }
    let query_id = cert.claim.query_id.clone();
    let seq = log.append(
        Event::Challenged,
        &query_id,
        EntryFields {
            cert_hash: Some(challenge.target_cert_hash.clone()),
            challenge_id: Some(challenge.challenge_id.clone()),
            ..Default::default()
        },
    );
    let ack = Acknowledgment {
        challenge_id: challenge.challenge_id.clone(),
        seq,
    };
    log.challenges.insert(challenge.challenge_id.clone(), challenge);
    Ok(ack)
}

/// Re-runs the certificate check under `contract` and upholds the challenge
/// iff the disputed aspect now fails.
pub fn recheck(
    log: &mut EntitlementHistory,
    contract: &DeploymentContract,
    challenge_id: &str,
    ctx: CheckContext<'_>,
) -> Result<RecheckOutcome> {
    let challenge = log
        .challenges
        .get(challenge_id)
        .ok_or_else(|| GateError::Configuration(format!("challenge {challenge_id} was not submitted")))?
        .clone();
    let cert = log
        .certificates
        .get(&challenge.target_cert_hash)
        .ok_or_else(|| GateError::UnknownCertificate(challenge.target_cert_hash.clone()))?;
    let check = check_certificate(contract, cert, ctx);
    let upheld = check
        .failures
        .iter()
        .any(|f| challenge.ground.targets().contains(&f.code));
    let query_id = cert.claim.query_id.clone();
    log.append(
        if upheld { Event::Upheld } else { Event::Dismissed },
        &query_id,
        EntryFields {
            cert_hash: Some(challenge.target_cert_hash.clone()),
            challenge_id: Some(challenge_id.into()),
            ..Default::default()
        },
    );
    Ok(RecheckOutcome {
        challenge_id: challenge_id.into(),
        query_id,
        ground: challenge.ground,
        upheld,
        check,
    })
}

fn reason_for(code: FailureCode) -> ReasonClass {
    match code {
        FailureCode::ScopeMismatch => ReasonClass::Scope,
        FailureCode::WitnessInvalid => ReasonClass::Model,
        FailureCode::ProvenanceFail
        | FailureCode::StandingFail
        | FailureCode::HashMismatch
        | FailureCode::FieldMissing => ReasonClass::Evidence,
    }
}

/// Retracts the current verdict for `query_id` in favour of `U`.
pub fn revise_status(
    log: &mut EntitlementHistory,
    query_id: &str,
    outcome: &RecheckOutcome,
) -> Result<InterfaceOutput> {
    let upheld_logged = log.entries.iter().any(|e| {
        e.event == Event::Upheld && e.query_id == query_id && e.challenge_id.as_deref() == Some(&outcome.challenge_id)
    });
    if !outcome.upheld || outcome.query_id != query_id || !upheld_logged {
        return Err(GateError::NoUpheldChallenge(query_id.into()));
    }
    let failure = outcome
        .check
        .failures
        .iter()
        .find(|f| outcome.ground.targets().contains(&f.code))
        .ok_or_else(|| GateError::NoUpheldChallenge(query_id.into()))?;
    let challenge = &log.challenges[&outcome.challenge_id];
    let cert = &log.certificates[&challenge.target_cert_hash];
    let (last_bounds, stages_used) = match &cert.witness {
        ForcingWitness::Bound { interval, stage } => (Some(interval.clone()), *stage),
        ForcingWitness::Separation { stage, .. } => (None, *stage),
    };
    let mut failed_checks = vec![format!("challenge:{}", outcome.challenge_id)];
    failed_checks.extend(outcome.check.failures.iter().map(|f| format!("{}:{}", f.field, f.code)));
    let output = InterfaceOutput::undetermined(
        query_id,
        &cert.provenance.contract_hash,
        reason_for(failure.code),
        UndeterminedDetail {
            failed_checks,
            last_bounds,
            stages_used,
            cost_spent: 0,
            exhausted: false,
        },
    );
    let supersedes = log.latest_output_entry(query_id).and_then(|e| e.output_hash.clone());
    let output_hash = output.output_hash();
    log.outputs.insert(output_hash.clone(), output.clone());
    log.append(
        Event::Revised,
        query_id,
        EntryFields {
            cert_hash: Some(cert.cert_hash.clone()),
            new_status: Some(Status::U),
            challenge_id: Some(outcome.challenge_id.clone()),
            output_hash: Some(output_hash),
            supersedes,
        },
    );
    Ok(output)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReplayResult {
    Valid,
    Invalid { seq: u64, reason: String },
}

impl fmt::Display for ReplayResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReplayResult::Valid => f.write_str("valid"),
            ReplayResult::Invalid { seq, reason } => write!(f, "invalid at seq {seq}: {reason}"),
        }
    }
}

/// Re-verifies a serialized log: every line canonical, every hash and link
/// recomputed, and `seq` gapless from 0. Reports the first bad line.
pub fn replay_verify(source: &[u8]) -> ReplayResult {
    let mut lines: Vec<&[u8]> = source.split(|b| *b == b'\n').collect();
    // A well-formed log ends with a newline, leaving one empty tail.
    let tail = lines.pop().unwrap_or_default();
    let mut prev = ZERO_DIGEST.to_string();
    let invalid = |seq: usize, reason: &str| ReplayResult::Invalid {
        seq: seq as u64,
        reason: reason.into(),
    };
    for (k, line) in lines.iter().enumerate() {
        let Ok(entry) = serde_json::from_slice::<HistoryEntry>(line) else {
            return invalid(k, "unparseable entry");
        };
        match canonical_string(&entry) {
            Ok(s) if s.as_bytes() == *line => {}
            _ => return invalid(k, "entry is not in canonical form"),
        }
        if entry.seq != k as u64 {
            return invalid(k, "sequence gap");
        }
        if entry.prev_entry_hash != prev {
            return invalid(k, "broken link to previous entry");
        }
        if entry.entry_hash != entry.computed_hash() {
            return invalid(k, "entry hash mismatch");
        }
        prev = entry.entry_hash;
    }
    if !tail.is_empty() {
        return invalid(lines.len(), "trailing bytes after last entry");
    }
    ReplayResult::Valid
}
