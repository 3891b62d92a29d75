use serde::{Deserialize, Serialize};

use crate::error::{GenexError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    TrainableWeight,
    TrainableBias,
    NormalizationStatistic,
    Buffer,
}

impl Role {
    pub fn is_trainable(self) -> bool {
        matches!(self, Role::TrainableWeight | Role::TrainableBias)
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Role::TrainableWeight => 0,
            Role::TrainableBias => 1,
            Role::NormalizationStatistic => 2,
            Role::Buffer => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Role::TrainableWeight,
            1 => Role::TrainableBias,
            2 => Role::NormalizationStatistic,
            3 => Role::Buffer,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Group {
    Body,
    Head,
}

impl Group {
    pub(crate) fn code(self) -> u8 {
        match self {
            Group::Body => 0,
            Group::Head => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Group::Body,
            1 => Group::Head,
            _ => return None,
        })
    }
}

/// One named tensor, stored flat in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub role: Role,
    pub group: Group,
}

impl ParamTensor {
    pub fn new(
        name: impl Into<String>,
        shape: Vec<usize>,
        values: Vec<f64>,
        role: Role,
        group: Group,
    ) -> Self {
        Self {
            name: name.into(),
            shape,
            values,
            role,
            group,
        }
    }

    pub fn zeros(name: impl Into<String>, shape: Vec<usize>, role: Role, group: Group) -> Self {
        let len = shape.iter().product();
        Self::new(name, shape, vec![0.0; len], role, group)
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    /// Same name, shape, role and group.
    pub fn same_layout(&self, other: &ParamTensor) -> bool {
        self.name == other.name
            && self.shape == other.shape
            && self.role == other.role
            && self.group == other.group
    }
}

/// A model's weights: an ordered list of named tensors.
///
/// Tensor order is part of the architecture: two sets are compatible only if
/// their signatures are equal, and every genetic or fusion operator walks both
/// lists in lockstep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedParamSet {
    tensors: Vec<ParamTensor>,
}

impl NamedParamSet {
    pub fn new(tensors: Vec<ParamTensor>) -> Result<Self> {
        let set = Self { tensors };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for t in &self.tensors {
            if !seen.insert(t.name.as_str()) {
                return Err(GenexError::invalid(format!("duplicate tensor name `{}`", t.name)));
            }
            if t.values.len() != t.numel() {
                return Err(GenexError::invalid(format!(
                    "tensor `{}` has {} values for shape {:?}",
                    t.name,
                    t.values.len(),
                    t.shape
                )));
            }
        }
        // exactly one contiguous head suffix
        let first_head = self.tensors.iter().position(|t| t.group == Group::Head);
        match first_head {
            None => return Err(GenexError::invalid("parameter set has no head tensors")),
            Some(i) => {
                if self.tensors[i..].iter().any(|t| t.group != Group::Head) {
                    return Err(GenexError::invalid("head tensors must form a contiguous suffix"));
                }
            }
        }
        Ok(())
    }

    pub fn tensors(&self) -> &[ParamTensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [ParamTensor] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&ParamTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn numel(&self) -> usize {
        self.tensors.iter().map(ParamTensor::numel).sum()
    }

    /// `name:shape:role:group` for every tensor, `;`-joined.
    pub fn signature(&self) -> String {
        self.tensors
            .iter()
            .map(|t| {
                let dims: Vec<String> = t.shape.iter().map(usize::to_string).collect();
                format!("{}:{}:{:?}:{:?}", t.name, dims.join("x"), t.role, t.group)
            })
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn ensure_compatible(&self, other: &NamedParamSet) -> Result<()> {
        let compatible = self.tensors.len() == other.tensors.len()
            && self
                .tensors
                .iter()
                .zip(&other.tensors)
                .all(|(a, b)| a.same_layout(b));
        if compatible {
            Ok(())
        } else {
            Err(GenexError::ArchitectureMismatch {
                expected: self.signature(),
                got: other.signature(),
            })
        }
    }

    /// Squared Euclidean distance over all entries.
    pub fn squared_distance(&self, other: &NamedParamSet) -> Result<f64> {
        self.ensure_compatible(other)?;
        Ok(self
            .tensors
            .iter()
            .zip(&other.tensors)
            .flat_map(|(a, b)| a.values.iter().zip(&b.values))
            .map(|(x, y)| (x - y) * (x - y))
            .sum())
    }
}
