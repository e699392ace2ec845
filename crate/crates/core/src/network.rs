//! Feed-forward scoring networks with exact-rational weights.

use serde::{Deserialize, Serialize};

use crate::canonical::{canonical_hash, canonical_string};
use crate::error::{GateError, Result};
use crate::interval::Interval;
use crate::monotone::MonotoneFn;
use crate::rational::Rational;

pub const MIN_PRECISION_BITS: u32 = 8;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Layer {
    Affine {
        weights: Vec<Vec<Rational>>,
        bias: Vec<Rational>,
    },
    Relu,
    Monotone {
        function_id: MonotoneFn,
        precision_bits: u32,
    },
}

impl Layer {
    /// Output arity given the input arity, or a description of the mismatch.
    fn output_arity(&self, input: usize, index: usize) -> Result<usize> {
        match self {
            Layer::Affine { weights, bias } => {
                if weights.is_empty() {
                    return Err(GateError::DimensionMismatch(format!(
                        "layer {index}: affine layer with no rows"
                    )));
                }
                if bias.len() != weights.len() {
                    return Err(GateError::DimensionMismatch(format!(
                        "layer {index}: {} weight rows but {} bias entries",
                        weights.len(),
                        bias.len()
                    )));
                }
                if let Some((row, w)) = weights.iter().enumerate().find(|(_, w)| w.len() != input) {
                    return Err(GateError::DimensionMismatch(format!(
                        "layer {index}: row {row} has {} columns, previous arity is {input}",
                        w.len()
                    )));
                }
                Ok(weights.len())
            }
            Layer::Relu => Ok(input),
            Layer::Monotone { precision_bits, .. } => {
                if *precision_bits < MIN_PRECISION_BITS {
                    return Err(GateError::Parse(format!(
                        "layer {index}: precision_bits {precision_bits} below {MIN_PRECISION_BITS}"
                    )));
                }
                Ok(input)
            }
        }
    }
}

/// On-disk form; `model_hash` is optional on input and always written on output.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    name: String,
    input_arity: usize,
    layers: Vec<Layer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    model_hash: Option<String>,
}

#[derive(Serialize)]
struct HashedFields<'a> {
    name: &'a str,
    input_arity: usize,
    layers: &'a [Layer],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkModel {
    name: String,
    layers: Vec<Layer>,
    input_arity: usize,
    output_arity: usize,
    model_hash: String,
}

impl NetworkModel {
    /// Validates the layer chain and computes the model digest.
    pub fn new(name: impl Into<String>, input_arity: usize, layers: Vec<Layer>) -> Result<Self> {
        let name = name.into();
        if input_arity == 0 {
            return Err(GateError::DimensionMismatch("input arity must be positive".into()));
        }
        if layers.is_empty() {
            return Err(GateError::DimensionMismatch("network has no layers".into()));
        }
        let mut arity = input_arity;
        for (i, layer) in layers.iter().enumerate() {
            arity = layer.output_arity(arity, i)?;
        }
        let model_hash = canonical_hash(&HashedFields {
            name: &name,
            input_arity,
            layers: &layers,
        })?;
        Ok(NetworkModel {
            name,
            layers,
            input_arity,
            output_arity: arity,
            model_hash,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_arity(&self) -> usize {
        self.input_arity
    }

    pub fn output_arity(&self) -> usize {
        self.output_arity
    }

    pub fn model_hash(&self) -> &str {
        &self.model_hash
    }

    /// Activation names used by the network, for regime compatibility checks.
    pub fn activations(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        for layer in &self.layers {
            let name = match layer {
                Layer::Affine { .. } => continue,
                Layer::Relu => "relu",
                Layer::Monotone { function_id, .. } => function_id.name(),
            };
            if !out.contains(&name) {
                out.push(name);
            }
        }
        out
    }

    /// Canonical JSON text including the embedded `model_hash`.
    pub fn to_json(&self) -> Result<String> {
        canonical_string(&NetworkFile {
            name: self.name.clone(),
            input_arity: self.input_arity,
            layers: self.layers.clone(),
            model_hash: Some(self.model_hash.clone()),
        })
    }
}

pub fn load_network(source: &[u8]) -> Result<NetworkModel> {
    let file: NetworkFile = serde_json::from_slice(source)?;
    let net = NetworkModel::new(file.name, file.input_arity, file.layers)?;
    if let Some(embedded) = file.model_hash {
        if embedded != net.model_hash {
            return Err(GateError::HashMismatch {
                embedded,
                computed: net.model_hash,
            });
        }
    }
    Ok(net)
}

/// An input-uncertainty box, one closed interval per input coordinate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputBox {
    pub dims: Vec<Interval>,
}

impl InputBox {
    pub fn new(dims: Vec<Interval>) -> Self {
        InputBox { dims }
    }

    pub fn point(x: &[Rational]) -> Self {
        InputBox {
            dims: x.iter().cloned().map(Interval::point).collect(),
        }
    }

    pub fn arity(&self) -> usize {
        self.dims.len()
    }

    pub fn contains(&self, x: &[Rational]) -> bool {
        x.len() == self.dims.len() && self.dims.iter().zip(x).all(|(d, v)| d.contains(v))
    }
}

/// Concrete forward pass at a point.
///
/// Affine and relu layers stay exact; a monotone layer replaces each value by
/// its dyadic bracket, after which later layers carry narrow enclosures.
pub fn evaluate_point(net: &NetworkModel, x: &[Rational]) -> Result<Vec<Interval>> {
    if x.len() != net.input_arity {
        return Err(GateError::ArityMismatch {
            expected: net.input_arity,
            got: x.len(),
        });
    }
    let mut vals: Vec<(Rational, Rational)> = x.iter().map(|v| (v.clone(), v.clone())).collect();
    for layer in &net.layers {
        vals = match layer {
            Layer::Affine { weights, bias } => weights
                .iter()
                .zip(bias)
                .map(|(row, b)| {
                    let mut lo = b.clone();
                    let mut hi = b.clone();
                    for (w, (vl, vh)) in row.iter().zip(&vals) {
                        if vl == vh {
                            let t = w * vl;
                            lo = lo + &t;
                            hi = hi + t;
                        } else if w.is_negative() {
                            lo = lo + w * vh;
                            hi = hi + w * vl;
                        } else {
                            lo = lo + w * vl;
                            hi = hi + w * vh;
                        }
                    }
                    (lo, hi)
                })
                .collect(),
            Layer::Relu => vals
                .into_iter()
                .map(|(lo, hi)| (lo.max(Rational::zero()), hi.max(Rational::zero())))
                .collect(),
            Layer::Monotone {
                function_id,
                precision_bits,
            } => vals
                .into_iter()
                .map(|(lo, hi)| {
                    if lo == hi {
                        function_id.bracket(&lo, *precision_bits)
                    } else {
                        (
                            function_id.round_down(&lo, *precision_bits),
                            function_id.round_up(&hi, *precision_bits),
                        )
                    }
                })
                .collect(),
        };
    }
    vals.into_iter().map(|(lo, hi)| Interval::new(lo, hi)).collect()
}
