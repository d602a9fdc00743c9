use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

/// Index of a parameter inside its [`ParamSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    /// Frozen parameters still receive gradients but the optimizer skips them.
    pub trainable: bool,
}

/// Ordered, named parameter storage for one network.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    params: Vec<Param>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor, trainable: bool) -> ParamId {
        self.params.push(Param {
            name: name.into(),
            value,
            trainable,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn param(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    /// Number of scalar values across trainable parameters.
    pub fn trainable_count(&self) -> usize {
        self.params
            .iter()
            .filter(|p| p.trainable)
            .map(|p| p.value.len())
            .sum()
    }

    pub fn zero_grads(&self) -> Vec<Tensor> {
        self.params
            .iter()
            .map(|p| Tensor::zeros(p.value.shape()))
            .collect()
    }

    /// Replace every value from `(name, tensor)` entries; names, order and
    /// shapes must match exactly.
    pub fn assign(&mut self, entries: Vec<(String, Tensor)>) -> Result<()> {
        if entries.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "checkpoint holds {} parameters, architecture expects {}",
                entries.len(),
                self.params.len()
            )));
        }
        for (param, (name, value)) in self.params.iter().zip(&entries) {
            if &param.name != name || param.value.shape() != value.shape() {
                return Err(Error::Shape(format!(
                    "checkpoint entry {name} {:?} does not match architecture entry {} {:?}",
                    value.shape(),
                    param.name,
                    param.value.shape()
                )));
            }
        }
        for (param, (_, value)) in self.params.iter_mut().zip(entries) {
            param.value = value;
        }
        Ok(())
    }
}
