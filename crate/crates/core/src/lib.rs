//! Certificate-gated assertibility: a three-valued decision layer over
//! exact-rational scoring networks.
//!
//! A query is answered `A` or `D` only when interval bound propagation yields
//! a witness that forces the claim and a certificate binding that witness to
//! a deployment contract passes an independent check. Everything else is `U`
//! with exactly one reason class.

pub mod canonical;
pub mod certificate;
pub mod contest;
pub mod decision;
pub mod error;
pub mod gate;
pub mod interval;
pub mod monotone;
pub mod network;
pub mod propagation;
pub mod rational;
pub mod record;

pub use certificate::{
    adequacy, check_certificate, check_certificate_value, forces, issue_certificate, CertType, CertificateToken,
    CheckContext, CheckFailure, CheckResult, Claim, ConfigRef, DeploymentContract, FailureCode, Forcing,
    RegimeDescriptor, ScopeDescriptor,
};
pub use contest::{
    recheck, replay_verify, revise_status, submit_challenge, Challenge, EntitlementHistory, ReplayResult,
};
pub use decision::{budgeted_decide, witness_check, Decision, ForcingWitness, Predicate, Status};
pub use error::{GateError, Result};
pub use gate::{
    classify_undetermined, derive_decider, evaluate_interface, evaluate_interface_traced, InterfaceOutput, Query,
    ReasonClass,
};
pub use interval::{monotonize, Interval, IntervalSequence};
pub use network::{load_network, InputBox, Layer, NetworkModel};
pub use propagation::{propagate_box, refine, EnclosureVector, RefinementState};
pub use rational::Rational;
pub use record::{FeatureSpec, PolicyBundle, QueryMeta, RecordItem, RecordStore, ScopePolicy, StandingPolicy};
