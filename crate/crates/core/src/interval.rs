//! Closed exact-rational intervals and nested bound histories.
//!
//! Every forcing rule in the gate reduces to comparisons against interval
//! endpoints, so endpoints are exact rationals and both ends are closed.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{GateError, Result};
use crate::rational::Rational;

#[derive(Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Interval {
    lo: Rational,
    hi: Rational,
}

impl Interval {
    pub fn new(lo: Rational, hi: Rational) -> Result<Self> {
        if lo > hi {
            return Err(GateError::InvalidInterval {
                lo: Box::new(lo),
                hi: Box::new(hi),
            });
        }
        Ok(Interval { lo, hi })
    }

    pub fn point(v: Rational) -> Self {
        Interval { lo: v.clone(), hi: v }
    }

    pub fn lo(&self) -> &Rational {
        &self.lo
    }

    pub fn hi(&self) -> &Rational {
        &self.hi
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn midpoint(&self) -> Rational {
        self.lo.midpoint(&self.hi)
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, v: &Rational) -> bool {
        &self.lo <= v && v <= &self.hi
    }

    /// `self ⊆ other`.
    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    /// Smallest interval containing both.
    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.clone().min(other.lo.clone()),
            hi: self.hi.clone().max(other.hi.clone()),
        }
    }

    /// `[v·lo, v·hi]` or its reversal for negative `v`.
    pub fn scale(&self, v: &Rational) -> Interval {
        let a = v * &self.lo;
        let b = v * &self.hi;
        if a <= b {
            Interval { lo: a, hi: b }
        } else {
            Interval { lo: b, hi: a }
        }
    }

    pub fn add(&self, other: &Interval) -> Interval {
        Interval {
            lo: &self.lo + &other.lo,
            hi: &self.hi + &other.hi,
        }
    }

    pub fn shift(&self, v: &Rational) -> Interval {
        Interval {
            lo: &self.lo + v,
            hi: &self.hi + v,
        }
    }

    /// Splits at the midpoint into two closed halves sharing the midpoint.
    pub fn bisect(&self) -> (Interval, Interval) {
        let mid = self.midpoint();
        (
            Interval {
                lo: self.lo.clone(),
                hi: mid.clone(),
            },
            Interval {
                lo: mid,
                hi: self.hi.clone(),
            },
        )
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            lo: Rational,
            hi: Rational,
        }
        let raw = Raw::deserialize(deserializer)?;
        Interval::new(raw.lo, raw.hi).map_err(serde::de::Error::custom)
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

pub fn make_interval(lo: Rational, hi: Rational) -> Result<Interval> {
    Interval::new(lo, hi)
}

pub fn contains(i: &Interval, v: &Rational) -> bool {
    i.contains(v)
}

/// A nested sequence of stage bounds, `stages[n + 1] ⊆ stages[n]`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalSequence {
    stages: Vec<Interval>,
}

impl IntervalSequence {
    pub fn new() -> Self {
        IntervalSequence::default()
    }

    pub fn stages(&self) -> &[Interval] {
        &self.stages
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn last(&self) -> Option<&Interval> {
        self.stages.last()
    }

    /// Appends a raw stage bound, intersecting it with the current last stage.
    pub fn push_raw(&mut self, raw: &Interval) -> Result<&Interval> {
        let next = match self.stages.last() {
            None => raw.clone(),
            Some(prev) => {
                let lo = prev.lo.clone().max(raw.lo.clone());
                let hi = prev.hi.clone().min(raw.hi.clone());
                if lo > hi {
                    return Err(GateError::InconsistentHistory {
                        stage: self.stages.len(),
                        lo: Box::new(lo),
                        hi: Box::new(hi),
                    });
                }
                Interval { lo, hi }
            }
        };
        self.stages.push(next);
        Ok(self.stages.last().expect("just pushed"))
    }
}

/// Prefix max of lower endpoints and prefix min of upper endpoints.
pub fn monotonize(raw: &[Interval]) -> Result<IntervalSequence> {
    let mut seq = IntervalSequence::new();
    for stage in raw {
        seq.push_raw(stage)?;
    }
    Ok(seq)
}
