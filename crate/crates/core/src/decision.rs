//! Stage-relative and budgeted forcing of threshold, argmax and top-k claims.
//!
//! Asserting a threshold claim needs `lo >= τ` (inclusive); denying needs
//! `hi < τ` (strict). Argmax claims are forced by strict separations
//! `lo_i > hi_j` between enclosures.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{GateError, Result};
use crate::interval::Interval;
use crate::network::{InputBox, NetworkModel};
use crate::propagation::{refine, EnclosureVector, RefinementState};
use crate::rational::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Status {
    A,
    D,
    U,
}

impl Status {
    pub fn is_categorical(self) -> bool {
        !matches!(self, Status::U)
    }

    pub fn word(self) -> &'static str {
        match self {
            Status::A => "Asserted",
            Status::D => "Denied",
            Status::U => "Undetermined",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::A => "A",
            Status::D => "D",
            Status::U => "U",
        })
    }
}

/// `s(x) >= τ` on one network output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdPredicate {
    pub output_index: usize,
    pub tau: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArgmaxMode {
    /// Claim: the candidate is the unique maximizer.
    UniqueArgmax,
    /// Claim: the candidate is *not* the unique maximizer.
    DenyQuery,
    /// Claim: the set dominates its complement. Never denied.
    TopK(BTreeSet<usize>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArgmaxPredicate {
    pub candidate_index: usize,
    pub classes: usize,
    pub mode: ArgmaxMode,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Predicate {
    Threshold(ThresholdPredicate),
    Argmax(ArgmaxPredicate),
}

impl Predicate {
    pub fn threshold(output_index: usize, tau: Rational) -> Self {
        Predicate::Threshold(ThresholdPredicate { output_index, tau })
    }

    pub fn unique_argmax(candidate_index: usize, classes: usize) -> Self {
        Predicate::Argmax(ArgmaxPredicate {
            candidate_index,
            classes,
            mode: ArgmaxMode::UniqueArgmax,
        })
    }

    /// Checks indices against the network's output arity.
    pub fn validate(&self, arity: usize) -> Result<()> {
        match self {
            Predicate::Threshold(p) => {
                if p.output_index >= arity {
                    return Err(GateError::IndexOutOfRange {
                        index: p.output_index,
                        arity,
                    });
                }
            }
            Predicate::Argmax(p) => {
                if p.classes != arity {
                    return Err(GateError::InvalidPredicate(format!(
                        "predicate declares {} classes, network has {arity} outputs",
                        p.classes
                    )));
                }
                p.validate()?;
            }
        }
        Ok(())
    }
}

impl ArgmaxPredicate {
    fn validate(&self) -> Result<()> {
        if self.candidate_index >= self.classes {
            return Err(GateError::IndexOutOfRange {
                index: self.candidate_index,
                arity: self.classes,
            });
        }
        if let ArgmaxMode::TopK(set) = &self.mode {
            if set.is_empty() || set.len() >= self.classes {
                return Err(GateError::InvalidPredicate(
                    "top-k set must be nonempty and proper".into(),
                ));
            }
            if let Some(&i) = set.iter().find(|&&i| i >= self.classes) {
                return Err(GateError::IndexOutOfRange {
                    index: i,
                    arity: self.classes,
                });
            }
        }
        Ok(())
    }
}

/// `winner_lo > loser_hi` forces `z_winner > z_loser`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparationPair {
    pub winner: usize,
    pub loser: usize,
    pub winner_lo: Rational,
    pub loser_hi: Rational,
}

impl SeparationPair {
    fn holds(&self) -> bool {
        self.winner != self.loser && self.winner_lo > self.loser_hi
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForcingWitness {
    Bound { interval: Interval, stage: usize },
    Separation { pairs: Vec<SeparationPair>, stage: usize },
}

impl ForcingWitness {
    pub fn stage(&self) -> usize {
        match self {
            ForcingWitness::Bound { stage, .. } | ForcingWitness::Separation { stage, .. } => *stage,
        }
    }
}

pub fn threshold_status_at_stage(bounds: &Interval, tau: &Rational) -> Status {
    if bounds.lo() >= tau {
        Status::A
    } else if bounds.hi() < tau {
        Status::D
    } else {
        Status::U
    }
}

fn separated(bounds: &EnclosureVector, i: usize, j: usize) -> bool {
    bounds.dims[i].lo() > bounds.dims[j].hi()
}

/// `i` strictly beats every other index, or some other index strictly beats `i`.
fn unique_argmax_status(bounds: &EnclosureVector, i: usize) -> Status {
    let n = bounds.arity();
    if (0..n).filter(|&j| j != i).all(|j| separated(bounds, i, j)) {
        Status::A
    } else if (0..n).filter(|&j| j != i).any(|j| separated(bounds, j, i)) {
        Status::D
    } else {
        Status::U
    }
}

pub fn argmax_status_at_stage(bounds: &EnclosureVector, pred: &ArgmaxPredicate) -> Result<Status> {
    if pred.classes != bounds.arity() {
        return Err(GateError::InvalidPredicate(format!(
            "predicate declares {} classes, bounds have {}",
            pred.classes,
            bounds.arity()
        )));
    }
    pred.validate()?;
    let i = pred.candidate_index;
    Ok(match &pred.mode {
        ArgmaxMode::UniqueArgmax => unique_argmax_status(bounds, i),
        ArgmaxMode::DenyQuery => match unique_argmax_status(bounds, i) {
            Status::A => Status::D,
            Status::D => Status::A,
            Status::U => Status::U,
        },
        ArgmaxMode::TopK(set) => {
            let complement: Vec<usize> = (0..pred.classes).filter(|j| !set.contains(j)).collect();
            if set.iter().all(|&i| complement.iter().all(|&j| separated(bounds, i, j))) {
                Status::A
            } else {
                Status::U
            }
        }
    })
}

pub fn status_at_stage(bounds: &EnclosureVector, pred: &Predicate) -> Result<Status> {
    match pred {
        Predicate::Threshold(p) => {
            let b = bounds.dims.get(p.output_index).ok_or(GateError::IndexOutOfRange {
                index: p.output_index,
                arity: bounds.arity(),
            })?;
            Ok(threshold_status_at_stage(b, &p.tau))
        }
        Predicate::Argmax(p) => argmax_status_at_stage(bounds, p),
    }
}

fn pair(bounds: &EnclosureVector, winner: usize, loser: usize) -> SeparationPair {
    SeparationPair {
        winner,
        loser,
        winner_lo: bounds.dims[winner].lo().clone(),
        loser_hi: bounds.dims[loser].hi().clone(),
    }
}

fn all_pairs_from(bounds: &EnclosureVector, i: usize) -> Vec<SeparationPair> {
    (0..bounds.arity())
        .filter(|&j| j != i)
        .map(|j| pair(bounds, i, j))
        .collect()
}

fn first_beater(bounds: &EnclosureVector, i: usize) -> Vec<SeparationPair> {
    (0..bounds.arity())
        .find(|&j| j != i && separated(bounds, j, i))
        .map(|j| vec![pair(bounds, j, i)])
        .unwrap_or_default()
}

/// The witness recording the inequalities behind a categorical status.
pub fn witness_for(bounds: &EnclosureVector, pred: &Predicate, status: Status, stage: usize) -> Option<ForcingWitness> {
    if !status.is_categorical() {
        return None;
    }
    Some(match pred {
        Predicate::Threshold(p) => ForcingWitness::Bound {
            interval: bounds.dims[p.output_index].clone(),
            stage,
        },
        Predicate::Argmax(p) => {
            let i = p.candidate_index;
            let pairs = match (&p.mode, status) {
                (ArgmaxMode::UniqueArgmax, Status::A) | (ArgmaxMode::DenyQuery, Status::D) => all_pairs_from(bounds, i),
                (ArgmaxMode::UniqueArgmax, _) | (ArgmaxMode::DenyQuery, _) => first_beater(bounds, i),
                (ArgmaxMode::TopK(set), _) => set
                    .iter()
                    .flat_map(|&w| {
                        (0..p.classes)
                            .filter(move |l| !set.contains(l))
                            .map(move |l| pair(bounds, w, l))
                    })
                    .collect(),
            };
            ForcingWitness::Separation { pairs, stage }
        }
    })
}

/// Re-verifies that the witness's recorded inequalities entail `claimed`,
/// using only the witness and the predicate.
pub fn witness_check(witness: &ForcingWitness, pred: &Predicate, claimed: Status) -> bool {
    match (witness, pred) {
        (ForcingWitness::Bound { interval, .. }, Predicate::Threshold(p)) => match claimed {
            Status::A => interval.lo() >= &p.tau,
            Status::D => interval.hi() < &p.tau,
            Status::U => false,
        },
        (ForcingWitness::Separation { pairs, .. }, Predicate::Argmax(p)) => {
            if p.validate().is_err() || claimed == Status::U {
                return false;
            }
            let in_range = |x: &SeparationPair| x.winner < p.classes && x.loser < p.classes;
            if !pairs.iter().all(|x| x.holds() && in_range(x)) {
                return false;
            }
            let has = |w: usize, l: usize| pairs.iter().any(|x| x.winner == w && x.loser == l);
            let i = p.candidate_index;
            let dominates = || (0..p.classes).filter(|&j| j != i).all(|j| has(i, j));
            let beaten = || pairs.iter().any(|x| x.loser == i);
            match (&p.mode, claimed) {
                (ArgmaxMode::UniqueArgmax, Status::A) | (ArgmaxMode::DenyQuery, Status::D) => dominates(),
                (ArgmaxMode::UniqueArgmax, _) | (ArgmaxMode::DenyQuery, _) => beaten(),
                (ArgmaxMode::TopK(set), Status::A) => set
                    .iter()
                    .all(|&w| (0..p.classes).filter(|l| !set.contains(l)).all(|l| has(w, l))),
                (ArgmaxMode::TopK(_), _) => false,
            }
        }
        _ => false,
    }
}

/// The status a witness forces for a predicate, if any.
pub fn forced_status(witness: &ForcingWitness, pred: &Predicate) -> Status {
    if witness_check(witness, pred, Status::A) {
        Status::A
    } else if witness_check(witness, pred, Status::D) {
        Status::D
    } else {
        Status::U
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decision {
    pub status: Status,
    pub witness: Option<ForcingWitness>,
    pub stages_used: usize,
    pub cost_spent: u64,
    /// Budget ran out before reaching the stage cap.
    pub exhausted: bool,
    /// Monotonized bounds at the last stage reached, if any stage ran.
    pub last_bounds: Option<EnclosureVector>,
}

/// Searches refinement stages `0..=n_max` within `budget` leaf propagations
/// and stops at the first stage that forces the predicate.
pub fn budgeted_decide(
    net: &NetworkModel,
    input: &InputBox,
    pred: &Predicate,
    budget: u64,
    n_max: usize,
) -> Result<Decision> {
    if input.arity() != net.input_arity() {
        return Err(GateError::ArityMismatch {
            expected: net.input_arity(),
            got: input.arity(),
        });
    }
    pred.validate(net.output_arity())?;
    if budget == 0 {
        return Ok(Decision {
            status: Status::U,
            witness: None,
            stages_used: 0,
            cost_spent: 0,
            exhausted: true,
            last_bounds: None,
        });
    }
    let mut state = RefinementState::init(net, input)?;
    loop {
        let bounds = state.bounds();
        let status = status_at_stage(&bounds, pred)?;
        let undetermined = |exhausted| Decision {
            status: Status::U,
            witness: None,
            stages_used: state.stage(),
            cost_spent: state.cost_spent(),
            exhausted,
            last_bounds: Some(bounds.clone()),
        };
        if status.is_categorical() {
            return Ok(Decision {
                status,
                witness: witness_for(&bounds, pred, status, state.stage()),
                stages_used: state.stage(),
                cost_spent: state.cost_spent(),
                exhausted: false,
                last_bounds: Some(bounds),
            });
        }
        if state.stage() >= n_max || state.is_fixed_point() {
            return Ok(undetermined(false));
        }
        let next = refine(&state, net, budget - state.cost_spent());
        if next.exhausted() {
            return Ok(undetermined(true));
        }
        state = next;
    }
}
