//! Layer specifications and the shared-parameter store.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;

use super::{RisnetError, EXPANSION_UNITS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Normal,
    Expansion,
    Final,
}

/// Shape of one layer: input feature dimension and per-class output
/// dimension. Normal and expansion layers stack four classes, so the next
/// layer sees `4 * out_dim` features; the final layer emits one scalar per
/// (element, user).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl LayerSpec {
    pub fn normal(in_dim: usize, out_dim: usize) -> Self {
        Self {
            kind: LayerKind::Normal,
            in_dim,
            out_dim,
        }
    }

    pub fn expansion(in_dim: usize, out_dim: usize) -> Self {
        Self {
            kind: LayerKind::Expansion,
            in_dim,
            out_dim,
        }
    }

    pub fn final_layer(in_dim: usize) -> Self {
        Self {
            kind: LayerKind::Final,
            in_dim,
            out_dim: 1,
        }
    }

    /// Units per class: nine for expansion layers, one otherwise.
    pub fn units_per_class(&self) -> usize {
        match self.kind {
            LayerKind::Expansion => EXPANSION_UNITS,
            _ => 1,
        }
    }

    pub fn classes(&self) -> usize {
        match self.kind {
            LayerKind::Final => 1,
            _ => 4,
        }
    }
}

/// Default full-CSI stack: three hidden layers of 16 per class, then the
/// final summation layer (feature dims 5 -> 64 -> 64 -> 64 -> 1).
pub fn full_csi_default_specs(input_dim: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::normal(input_dim, 16),
        LayerSpec::normal(64, 16),
        LayerSpec::normal(64, 16),
        LayerSpec::final_layer(64),
    ]
}

/// Default partial-CSI stack with two expansion layers, growing the anchor
/// grid by a factor of nine.
pub fn partial_csi_default_specs(input_dim: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::normal(input_dim, 16),
        LayerSpec::normal(64, 16),
        LayerSpec::expansion(64, 16),
        LayerSpec::normal(64, 16),
        LayerSpec::expansion(64, 16),
        LayerSpec::final_layer(64),
    ]
}

/// Validate that consecutive layer dimensions compose and the final layer
/// sits last.
pub fn validate_specs(specs: &[LayerSpec]) -> Result<(), RisnetError> {
    if specs.is_empty() {
        return Err(RisnetError::BadSpecChain("no layers".into()));
    }
    for (i, spec) in specs.iter().enumerate() {
        let last = i + 1 == specs.len();
        match spec.kind {
            LayerKind::Final => {
                if !last {
                    return Err(RisnetError::BadSpecChain(format!(
                        "final layer at position {i} is not last"
                    )));
                }
                if spec.out_dim != 1 {
                    return Err(RisnetError::BadSpecChain(
                        "final layer must emit one feature".into(),
                    ));
                }
            }
            _ => {
                if last {
                    return Err(RisnetError::BadSpecChain(
                        "network must end with a final layer".into(),
                    ));
                }
                let next = &specs[i + 1];
                if next.in_dim != 4 * spec.out_dim {
                    return Err(RisnetError::BadSpecChain(format!(
                        "layer {i} emits {} features but layer {} expects {}",
                        4 * spec.out_dim,
                        i + 1,
                        next.in_dim
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Borrowed view of one information-processing unit.
#[derive(Debug, Clone, Copy)]
pub struct UnitParams<'a> {
    /// `out_dim x in_dim` weight matrix.
    pub weight: &'a Tensor,
    /// `out_dim` bias vector.
    pub bias: &'a Tensor,
}

/// All trainable tensors in canonical (layer, class, unit) order, each unit
/// contributing its weight then its bias. The count depends only on the
/// layer specs, never on the number of RIS elements or users.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    specs: Vec<LayerSpec>,
    tensors: Vec<Tensor>,
}

impl NetworkParams {
    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    /// Index of the weight tensor of (layer, class, unit); the bias follows
    /// at the next slot.
    pub fn slot(&self, layer: usize, class: usize, unit: usize) -> usize {
        let mut index = 0;
        for spec in &self.specs[..layer] {
            index += 2 * spec.classes() * spec.units_per_class();
        }
        let spec = &self.specs[layer];
        index + 2 * (class * spec.units_per_class() + unit)
    }

    pub fn unit(&self, layer: usize, class: usize, unit: usize) -> UnitParams<'_> {
        let slot = self.slot(layer, class, unit);
        UnitParams {
            weight: &self.tensors[slot],
            bias: &self.tensors[slot + 1],
        }
    }

    /// Total number of trainable scalars.
    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    /// Rebuild from the canonical tensor list, checking shapes.
    pub fn from_tensors(specs: Vec<LayerSpec>, tensors: Vec<Tensor>) -> Result<Self, RisnetError> {
        validate_specs(&specs)?;
        let expected = expected_shapes(&specs);
        if tensors.len() != expected.len() {
            return Err(RisnetError::BadSpecChain(format!(
                "expected {} tensors, got {}",
                expected.len(),
                tensors.len()
            )));
        }
        for (i, (t, shape)) in tensors.iter().zip(&expected).enumerate() {
            if t.shape() != shape.as_slice() {
                return Err(RisnetError::BadSpecChain(format!(
                    "tensor {i} has shape {:?}, expected {:?}",
                    t.shape(),
                    shape
                )));
            }
        }
        Ok(Self { specs, tensors })
    }
}

fn expected_shapes(specs: &[LayerSpec]) -> Vec<Vec<usize>> {
    let mut shapes = Vec::new();
    for spec in specs {
        for _class in 0..spec.classes() {
            for _unit in 0..spec.units_per_class() {
                shapes.push(vec![spec.out_dim, spec.in_dim]);
                shapes.push(vec![spec.out_dim]);
            }
        }
    }
    shapes
}

/// Draw fresh parameters: weights uniform in `[-a, a]` with
/// `a = sqrt(6 / (in_dim + out_dim))`, biases zero. Deterministic per seed.
pub fn init_params(specs: &[LayerSpec], seed: u64) -> Result<NetworkParams, RisnetError> {
    validate_specs(specs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tensors = Vec::new();
    for spec in specs {
        let bound = (6.0 / (spec.in_dim + spec.out_dim) as f64).sqrt();
        for _class in 0..spec.classes() {
            for _unit in 0..spec.units_per_class() {
                let weight: Vec<f64> = (0..spec.out_dim * spec.in_dim)
                    .map(|_| (2.0 * rng.random::<f64>() - 1.0) * bound)
                    .collect();
                tensors.push(Tensor::from_vec(&[spec.out_dim, spec.in_dim], weight));
                tensors.push(Tensor::zeros(&[spec.out_dim]));
            }
        }
    }
    Ok(NetworkParams {
        specs: specs.to_vec(),
        tensors,
    })
}
