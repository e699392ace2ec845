//! The output contract: scope, then standing, then witness search. Every
//! categorical status carries a checked certificate; every `U` carries
//! exactly one reason class.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::canonical::{canonical_hash, canonical_string};
use crate::certificate::{
    check_certificate, forces, issue_certificate, CertificateToken, CheckContext, Claim, DeploymentContract, Forcing,
    ScopeDescriptor, VERIFIER_VERSION,
};
use crate::decision::{budgeted_decide, Decision, Predicate, Status};
use crate::error::{GateError, Result};
use crate::interval::Interval;
use crate::network::{InputBox, Layer, NetworkModel};
use crate::rational::Rational;
use crate::record::{
    evaluate_scope, evaluate_standing, features_from_record, record_asof, FeatureSpec, PolicyBundle, QueryMeta,
    RecordStore, ScopeOutcome, StandingOutcome, TimeWindow,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReasonClass {
    #[serde(rename = "U-EVIDENCE")]
    Evidence,
    #[serde(rename = "U-SCOPE")]
    Scope,
    #[serde(rename = "U-MODEL")]
    Model,
    #[serde(rename = "U-COMPUTE")]
    Compute,
}

impl fmt::Display for ReasonClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReasonClass::Evidence => "U-EVIDENCE",
            ReasonClass::Scope => "U-SCOPE",
            ReasonClass::Model => "U-MODEL",
            ReasonClass::Compute => "U-COMPUTE",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UndeterminedDetail {
    pub failed_checks: Vec<String>,
    pub last_bounds: Option<Interval>,
    pub stages_used: usize,
    pub cost_spent: u64,
    pub exhausted: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Trace {
    Certified {
        certificates: Vec<CertificateToken>,
    },
    Undetermined {
        reason: ReasonClass,
        detail: UndeterminedDetail,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterfaceOutput {
    pub status: Status,
    pub trace: Trace,
    pub query_id: String,
    pub contract_hash: String,
}

impl InterfaceOutput {
    pub fn undetermined(query_id: &str, contract_hash: &str, reason: ReasonClass, detail: UndeterminedDetail) -> Self {
        InterfaceOutput {
            status: Status::U,
            trace: Trace::Undetermined { reason, detail },
            query_id: query_id.into(),
            contract_hash: contract_hash.into(),
        }
    }

    pub fn reason(&self) -> Option<ReasonClass> {
        match &self.trace {
            Trace::Undetermined { reason, .. } => Some(*reason),
            Trace::Certified { .. } => None,
        }
    }

    pub fn certificates(&self) -> &[CertificateToken] {
        match &self.trace {
            Trace::Certified { certificates } => certificates,
            Trace::Undetermined { .. } => &[],
        }
    }

    pub fn detail(&self) -> Option<&UndeterminedDetail> {
        match &self.trace {
            Trace::Undetermined { detail, .. } => Some(detail),
            Trace::Certified { .. } => None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        canonical_string(self)
    }

    pub fn output_hash(&self) -> String {
        canonical_hash(self).expect("outputs always serialize")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Query {
    pub query_id: String,
    pub query_meta: QueryMeta,
    pub predicate: Predicate,
    pub feature_spec: FeatureSpec,
}

/// `U-SCOPE ≻ U-EVIDENCE ≻ (U-COMPUTE if the budget ran out, else U-MODEL)`.
pub fn classify_undetermined(scope: &ScopeOutcome, standing: &StandingOutcome, exhausted: bool) -> ReasonClass {
    if !scope.passed() {
        ReasonClass::Scope
    } else if !standing.passed() {
        ReasonClass::Evidence
    } else if exhausted {
        ReasonClass::Compute
    } else {
        ReasonClass::Model
    }
}

fn configuration(msg: impl Into<String>) -> GateError {
    GateError::Configuration(msg.into())
}

/// Rejects artifacts the contract does not pin.
pub fn check_configuration(
    contract: &DeploymentContract,
    net: &NetworkModel,
    query: &Query,
    policies: &PolicyBundle,
) -> Result<()> {
    if !contract.hash_is_valid() {
        return Err(configuration("contract hash does not match its contents"));
    }
    if contract.t_int.verifier_version != VERIFIER_VERSION {
        return Err(configuration(format!(
            "contract pins verifier {}, running {VERIFIER_VERSION}",
            contract.t_int.verifier_version
        )));
    }
    if net.model_hash() != contract.t_int.model_hash {
        return Err(configuration(format!(
            "network hash {} is not the contract's model hash {}",
            net.model_hash(),
            contract.t_int.model_hash
        )));
    }
    if query.feature_spec.config_hash() != contract.t_int.config_hash {
        return Err(configuration("feature spec does not match the contract's config hash"));
    }
    if policies.scope.policy_id != contract.scope_policy_id {
        return Err(configuration(format!(
            "scope policy {} is not the contract's {}",
            policies.scope.policy_id, contract.scope_policy_id
        )));
    }
    if policies.standing.policy_id != contract.standing_policy_id {
        return Err(configuration(format!(
            "standing policy {} is not the contract's {}",
            policies.standing.policy_id, contract.standing_policy_id
        )));
    }
    if !contract.regime.supports(net) {
        return Err(configuration("network uses an activation outside the regime"));
    }
    for layer in net.layers() {
        if let Layer::Monotone { precision_bits, .. } = layer {
            if *precision_bits != contract.regime.precision_bits {
                return Err(configuration(format!(
                    "monotone layer precision {precision_bits} differs from the regime's {}",
                    contract.regime.precision_bits
                )));
            }
        }
    }
    if query.feature_spec.dims.len() != net.input_arity() {
        return Err(configuration("feature spec arity differs from the network input arity"));
    }
    if !contract.input_radius.is_empty() && contract.input_radius.len() != net.input_arity() {
        return Err(configuration("input radius arity differs from the network input arity"));
    }
    if let Predicate::Threshold(p) = &query.predicate {
        if p.tau != contract.tau {
            return Err(configuration("query threshold differs from the contract's tau"));
        }
    }
    Ok(())
}

/// `x ± r` per coordinate, clamped to the feature range [0, 1].
pub fn input_box(x: &[Rational], radius: &[Rational]) -> Result<InputBox> {
    let dims = x
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let r = radius.get(i).cloned().unwrap_or_else(Rational::zero);
            Interval::new((v - &r).max(Rational::zero()), (v + &r).min(Rational::one()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InputBox::new(dims))
}

fn focus_bounds(decision: &Decision, predicate: &Predicate) -> Option<Interval> {
    let b = decision.last_bounds.as_ref()?;
    let idx = match predicate {
        Predicate::Threshold(p) => p.output_index,
        Predicate::Argmax(p) => p.candidate_index,
    };
    b.dims.get(idx).cloned()
}

/// Runs one query through scope, standing, and witness search under `contract`.
pub fn evaluate_interface(
    contract: &DeploymentContract,
    net: &NetworkModel,
    query: &Query,
    store: &RecordStore,
    policies: &PolicyBundle,
) -> Result<InterfaceOutput> {
    evaluate_interface_traced(contract, net, query, store, policies).map(|(out, _)| out)
}

/// As [`evaluate_interface`], also returning the witness search result when
/// the pipeline got that far.
pub fn evaluate_interface_traced(
    contract: &DeploymentContract,
    net: &NetworkModel,
    query: &Query,
    store: &RecordStore,
    policies: &PolicyBundle,
) -> Result<(InterfaceOutput, Option<Decision>)> {
    check_configuration(contract, net, query, policies)?;
    let qid = query.query_id.as_str();
    let chash = contract.contract_hash.as_str();
    let empty_detail = |failed_checks| UndeterminedDetail {
        failed_checks,
        last_bounds: None,
        stages_used: 0,
        cost_spent: 0,
        exhausted: false,
    };

    let scope = evaluate_scope(&policies.scope, &query.query_meta);
    if let ScopeOutcome::Fail(why) = &scope {
        let out = InterfaceOutput::undetermined(
            qid,
            chash,
            classify_undetermined(&scope, &StandingOutcome::Pass, false),
            empty_detail(vec![format!("scope:{why}")]),
        );
        return Ok((out, None));
    }

    let items = record_asof(store, &contract.record_time);
    let standing = evaluate_standing(&policies.standing, &items);
    if let StandingOutcome::Fail { missing } = &standing {
        let failed = missing
            .iter()
            .map(|(class, n)| format!("standing:{class} short by {n}"))
            .collect();
        let out = InterfaceOutput::undetermined(
            qid,
            chash,
            classify_undetermined(&scope, &standing, false),
            empty_detail(failed),
        );
        return Ok((out, None));
    }

    let x = features_from_record(&items, &query.feature_spec)?;
    let bx = input_box(&x, &contract.input_radius)?;
    let decision = budgeted_decide(net, &bx, &query.predicate, contract.budget, contract.n_max)?;

    match (decision.status, decision.witness.clone()) {
        (Status::A | Status::D, Some(witness)) => {
            let claim = Claim {
                predicate: query.predicate.clone(),
                query_id: query.query_id.clone(),
                status: decision.status,
            };
            let meta = &query.query_meta;
            let sigma = ScopeDescriptor {
                policy_id: policies.scope.policy_id.clone(),
                jurisdiction: meta.jurisdiction.clone(),
                time_window: TimeWindow {
                    start: meta.query_time,
                    end: meta.query_time,
                },
                identity_rule_id: meta.identity_rule_id.clone(),
            };
            let refs: Vec<String> = items.iter().map(|i| i.digest()).collect();
            let token = issue_certificate(contract, claim, witness, sigma, &refs, store)?;
            let out = InterfaceOutput {
                status: decision.status,
                trace: Trace::Certified {
                    certificates: vec![token],
                },
                query_id: query.query_id.clone(),
                contract_hash: contract.contract_hash.clone(),
            };
            Ok((out, Some(decision)))
        }
        _ => {
            let reason = classify_undetermined(&scope, &standing, decision.exhausted);
            let failed = vec![match reason {
                ReasonClass::Compute => "witness:budget exhausted".to_string(),
                _ => "witness:bounds do not force".to_string(),
            }];
            let out = InterfaceOutput::undetermined(
                qid,
                chash,
                reason,
                UndeterminedDetail {
                    failed_checks: failed,
                    last_bounds: focus_bounds(&decision, &query.predicate),
                    stages_used: decision.stages_used,
                    cost_spent: decision.cost_spent,
                    exhausted: decision.exhausted,
                },
            );
            Ok((out, Some(decision)))
        }
    }
}

/// Human-readable rendering; always emitted next to the structured output.
pub fn render_transcript(output: &InterfaceOutput, contract: &DeploymentContract) -> String {
    let head = format!(
        "As of {}, under standard {} and threshold tau = {}, query {} is {}",
        contract.record_time.to_rfc3339(),
        contract.standing_policy_id,
        contract.tau.to_decimal_string(12),
        output.query_id,
        output.status.word(),
    );
    match &output.trace {
        Trace::Certified { certificates } => {
            let mut s = format!("{head}.\n");
            for c in certificates {
                let w = match &c.witness {
                    crate::decision::ForcingWitness::Bound { interval, stage } => format!(
                        "certified bound [{}, {}] at stage {stage}",
                        interval.lo().to_decimal_string(12),
                        interval.hi().to_decimal_string(12)
                    ),
                    crate::decision::ForcingWitness::Separation { pairs, stage } => {
                        format!("{} certified separations at stage {stage}", pairs.len())
                    }
                };
                s.push_str(&format!(
                    "  certificate {} ({}): {w}; {} record items referenced.\n",
                    &c.cert_hash[..16],
                    c.cert_type.name(),
                    c.provenance.record_item_hashes.len()
                ));
            }
            s
        }
        Trace::Undetermined { reason, detail } => {
            let bounds = detail
                .last_bounds
                .as_ref()
                .map(|b| {
                    format!(
                        " Last certified bound [{}, {}] after {} stages (cost {}).",
                        b.lo().to_decimal_string(12),
                        b.hi().to_decimal_string(12),
                        detail.stages_used,
                        detail.cost_spent
                    )
                })
                .unwrap_or_default();
            format!("{head} ({reason}): {}.{bounds}\n", detail.failed_checks.join("; "))
        }
    }
}

/// A categorical answer with the certificate that re-verified it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decided {
    pub status: Status,
    pub certificate: CertificateToken,
}

type Oracle<'a> = Box<dyn Fn(&Query, &RecordStore) -> Result<InterfaceOutput> + 'a>;

/// Decision procedure built from a total binary oracle: every answer is
/// re-verified against the contract before it is returned.
pub struct Decider<'a> {
    contract: &'a DeploymentContract,
    policies: &'a PolicyBundle,
    oracle: Oracle<'a>,
}

pub fn derive_decider<'a, F>(oracle: F, contract: &'a DeploymentContract, policies: &'a PolicyBundle) -> Decider<'a>
where
    F: Fn(&Query, &RecordStore) -> Result<InterfaceOutput> + 'a,
{
    Decider {
        contract,
        policies,
        oracle: Box::new(oracle),
    }
}

impl Decider<'_> {
    pub fn decide(&self, query: &Query, store: &RecordStore) -> Result<Decided> {
        let out = (self.oracle)(query, store)?;
        if !out.status.is_categorical() {
            return Err(GateError::OracleNotTotal(query.query_id.clone()));
        }
        let violation = |why: &str| GateError::SoundnessViolation(format!("{}: {why}", query.query_id));
        if out.contract_hash != self.contract.contract_hash {
            return Err(violation("output under a different contract"));
        }
        let ctx = CheckContext {
            store,
            scope_policy: &self.policies.scope,
            standing_policy: &self.policies.standing,
        };
        let expected = match out.status {
            Status::A => Forcing::Asserts,
            _ => Forcing::Denies,
        };
        let mut verified = None;
        for cert in out.certificates() {
            let check = check_certificate(self.contract, cert, ctx);
            if !check.accepted {
                let codes: Vec<String> = check.codes().iter().map(|c| c.to_string()).collect();
                return Err(violation(&format!("certificate rejected: {}", codes.join(","))));
            }
            if cert.claim.query_id != query.query_id || cert.claim.predicate != query.predicate {
                return Err(violation("certificate answers a different claim"));
            }
            if forces(cert, &query.predicate) != expected {
                return Err(violation("certificate does not force the returned status"));
            }
            verified.get_or_insert_with(|| cert.clone());
        }
        let certificate = verified.ok_or_else(|| violation("categorical status without a certificate"))?;
        Ok(Decided {
            status: out.status,
            certificate,
        })
    }
}
