use super::{Layer, LayerDesc};
use crate::error::{Error, Result};
use crate::neuron::Activation;
use crate::tensor::Tensor;

/// Stateless elementwise activation, used where non-spiking networks put
/// their nonlinearity.
pub struct ActivationLayer {
    name: String,
    sigma: Activation,
    inputs: Vec<Tensor>,
}

impl ActivationLayer {
    pub fn new(name: impl Into<String>, sigma: Activation) -> ActivationLayer {
        ActivationLayer {
            name: name.into(),
            sigma,
            inputs: Vec::new(),
        }
    }
}

impl Layer for ActivationLayer {
    fn name(&self) -> &str {
        &self.name
    }

    fn begin_pass(&mut self) {
        self.inputs.clear();
    }

    fn forward_step(&mut self, step: usize, x: &Tensor) -> Result<Tensor> {
        if step != self.inputs.len() {
            return Err(Error::Internal(format!(
                "activation {}: step {step} out of order",
                self.name
            )));
        }
        self.inputs.push(x.clone());
        self.sigma.apply_tensor(x)
    }

    fn backward_step(&mut self, step: usize, upstream: &Tensor) -> Result<Tensor> {
        let x = self.inputs.get(step).ok_or_else(|| {
            Error::Internal(format!("activation {}: backward before forward", self.name))
        })?;
        upstream.mul(&self.sigma.grad_tensor(x)?)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        Ok(input.to_vec())
    }

    fn describe(&self) -> LayerDesc {
        LayerDesc::Activation(self.sigma)
    }
}
