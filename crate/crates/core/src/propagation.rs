//! Sound interval propagation and branch-and-bound refinement.

use serde::{Deserialize, Serialize};

use crate::error::{GateError, Result};
use crate::interval::{Interval, IntervalSequence};
use crate::monotone::MonotoneFn;
use crate::network::{InputBox, Layer, NetworkModel};
use crate::rational::Rational;

/// Per-coordinate enclosure of a layer's outputs over an input box.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnclosureVector {
    pub dims: Vec<Interval>,
}

impl EnclosureVector {
    pub fn new(dims: Vec<Interval>) -> Self {
        EnclosureVector { dims }
    }

    pub fn arity(&self) -> usize {
        self.dims.len()
    }

    pub fn contains(&self, other: &[Interval]) -> bool {
        other.len() == self.dims.len() && other.iter().zip(&self.dims).all(|(o, s)| o.is_subset_of(s))
    }
}

pub fn propagate_affine(
    weights: &[Vec<Rational>],
    bias: &[Rational],
    input: &EnclosureVector,
) -> Result<EnclosureVector> {
    if weights.len() != bias.len() {
        return Err(GateError::DimensionMismatch(format!(
            "{} weight rows, {} bias entries",
            weights.len(),
            bias.len()
        )));
    }
    let mut out = Vec::with_capacity(weights.len());
    for row in weights {
        if row.len() != input.arity() {
            return Err(GateError::DimensionMismatch(format!(
                "row has {} columns, input arity is {}",
                row.len(),
                input.arity()
            )));
        }
        out.push(
            row.iter()
                .zip(&input.dims)
                .fold(Interval::point(Rational::zero()), |acc, (w, x)| acc.add(&x.scale(w))),
        );
    }
    Ok(EnclosureVector::new(
        out.into_iter().zip(bias).map(|(i, b)| i.shift(b)).collect(),
    ))
}

pub fn propagate_relu(input: &EnclosureVector) -> EnclosureVector {
    let zero = Rational::zero();
    EnclosureVector::new(
        input
            .dims
            .iter()
            .map(|i| {
                if i.hi() <= &zero {
                    Interval::point(zero.clone())
                } else if i.lo() >= &zero {
                    i.clone()
                } else {
                    Interval::new(zero.clone(), i.hi().clone()).expect("0 < hi")
                }
            })
            .collect(),
    )
}

pub fn propagate_monotone(f: MonotoneFn, bits: u32, input: &EnclosureVector) -> EnclosureVector {
    EnclosureVector::new(
        input
            .dims
            .iter()
            .map(|i| {
                let (lo, hi) = if i.is_degenerate() {
                    f.bracket(i.lo(), bits)
                } else {
                    (f.round_down(i.lo(), bits), f.round_up(i.hi(), bits))
                };
                Interval::new(lo, hi).expect("monotone brackets are ordered")
            })
            .collect(),
    )
}

fn propagate_layer(layer: &Layer, input: &EnclosureVector) -> Result<EnclosureVector> {
    match layer {
        Layer::Affine { weights, bias } => propagate_affine(weights, bias, input),
        Layer::Relu => Ok(propagate_relu(input)),
        Layer::Monotone {
            function_id,
            precision_bits,
        } => Ok(propagate_monotone(*function_id, *precision_bits, input)),
    }
}

/// Composes the per-layer transformers over the whole network.
pub fn propagate_box(net: &NetworkModel, input: &InputBox) -> Result<EnclosureVector> {
    if input.arity() != net.input_arity() {
        return Err(GateError::ArityMismatch {
            expected: net.input_arity(),
            got: input.arity(),
        });
    }
    let mut cur = EnclosureVector::new(input.dims.clone());
    for layer in net.layers() {
        cur = propagate_layer(layer, &cur)?;
    }
    Ok(cur)
}

/// Sound upper bound on `c·z + d` over the enclosure `z`. A result `<= 0`
/// certifies the linear specification `c·z + d <= 0`.
pub fn bound_linear_spec(c: &[Rational], d: &Rational, z: &EnclosureVector) -> Result<Rational> {
    if c.len() != z.arity() {
        return Err(GateError::ArityMismatch {
            expected: z.arity(),
            got: c.len(),
        });
    }
    Ok(c.iter()
        .zip(&z.dims)
        .map(|(ci, zi)| zi.scale(ci).hi().clone())
        .sum::<Rational>()
        + d)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Leaf {
    pub input: InputBox,
    pub output: EnclosureVector,
}

/// Anytime refinement of the output bounds by bisecting the input box.
///
/// Leaves always tile the original box. Stage 0 propagates the whole box at a
/// cost of one leaf propagation; each later stage bisects one leaf and pays
/// for its two children.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RefinementState {
    original: InputBox,
    leaves: Vec<Leaf>,
    history: Vec<IntervalSequence>,
    stage: usize,
    cost_spent: u64,
    exhausted: bool,
}

/// Leaf propagations charged for one bisection stage.
pub const STAGE_COST: u64 = 2;

impl RefinementState {
    /// Stage 0: one propagation of the whole box.
    pub fn init(net: &NetworkModel, input: &InputBox) -> Result<Self> {
        let output = propagate_box(net, input)?;
        let mut history = vec![IntervalSequence::new(); output.arity()];
        for (seq, raw) in history.iter_mut().zip(&output.dims) {
            seq.push_raw(raw)?;
        }
        Ok(RefinementState {
            original: input.clone(),
            leaves: vec![Leaf {
                input: input.clone(),
                output,
            }],
            history,
            stage: 0,
            cost_spent: 1,
            exhausted: false,
        })
    }

    pub fn original(&self) -> &InputBox {
        &self.original
    }

    pub fn leaves(&self) -> &[Leaf] {
        &self.leaves
    }

    pub fn history(&self) -> &[IntervalSequence] {
        &self.history
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn cost_spent(&self) -> u64 {
        self.cost_spent
    }

    pub fn exhausted(&self) -> bool {
        self.exhausted
    }

    /// Current monotonized bounds, one per output.
    pub fn bounds(&self) -> EnclosureVector {
        EnclosureVector::new(
            self.history
                .iter()
                .map(|h| h.last().expect("stage 0 recorded").clone())
                .collect(),
        )
    }

    /// The leaf and dimension the next stage would bisect: the widest input
    /// dimension over all leaves, ties to the lowest leaf then dimension.
    pub fn split_candidate(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize, Rational)> = None;
        for (li, leaf) in self.leaves.iter().enumerate() {
            for (di, dim) in leaf.input.dims.iter().enumerate() {
                let w = dim.width();
                if !w.is_positive() {
                    continue;
                }
                if best.as_ref().is_none_or(|(_, _, bw)| &w > bw) {
                    best = Some((li, di, w));
                }
            }
        }
        best.map(|(l, d, _)| (l, d))
    }

    /// True when no leaf has a splittable dimension.
    pub fn is_fixed_point(&self) -> bool {
        self.split_candidate().is_none()
    }
}

/// One refinement stage. Returns the state unchanged (with `exhausted` set)
/// when the remaining budget cannot pay for a full stage, and unchanged when
/// every leaf is degenerate.
pub fn refine(state: &RefinementState, net: &NetworkModel, budget_remaining: u64) -> RefinementState {
    let mut next = state.clone();
    let Some((li, di)) = state.split_candidate() else {
        return next;
    };
    if budget_remaining < STAGE_COST {
        next.exhausted = true;
        return next;
    }
    let parent = &state.leaves[li];
    let (left, right) = parent.input.dims[di].bisect();
    let children: Vec<Leaf> = [left, right]
        .into_iter()
        .map(|half| {
            let mut dims = parent.input.dims.clone();
            dims[di] = half;
            let input = InputBox::new(dims);
            let output = propagate_box(net, &input).expect("leaf arity matches the original box");
            Leaf { input, output }
        })
        .collect();
    next.leaves.splice(li..=li, children);
    next.cost_spent += STAGE_COST;
    next.stage += 1;
    for (k, seq) in next.history.iter_mut().enumerate() {
        let raw = next
            .leaves
            .iter()
            .map(|l| l.output.dims[k].clone())
            .reduce(|a, b| a.hull(&b))
            .expect("at least one leaf");
        seq.push_raw(&raw)
            .expect("sound enclosures of nested boxes always intersect");
    }
    next
}
