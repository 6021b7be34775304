use super::{Layer, LayerDesc};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Flattens `[batch, features...]` to `[batch, prod(features)]`.
pub struct FlattenLayer {
    name: String,
    in_shapes: Vec<Vec<usize>>,
}

impl FlattenLayer {
    pub fn new(name: impl Into<String>) -> FlattenLayer {
        FlattenLayer {
            name: name.into(),
            in_shapes: Vec::new(),
        }
    }
}

impl Layer for FlattenLayer {
    fn name(&self) -> &str {
        &self.name
    }

    fn begin_pass(&mut self) {
        self.in_shapes.clear();
    }

    fn forward_step(&mut self, step: usize, x: &Tensor) -> Result<Tensor> {
        if step != self.in_shapes.len() {
            return Err(Error::Internal(format!(
                "flatten {}: step {step} out of order",
                self.name
            )));
        }
        let out_shape = self.output_shape(x.shape())?;
        self.in_shapes.push(x.shape().to_vec());
        x.reshape(&out_shape)
    }

    fn backward_step(&mut self, step: usize, upstream: &Tensor) -> Result<Tensor> {
        let shape = self.in_shapes.get(step).ok_or_else(|| {
            Error::Internal(format!("flatten {}: backward before forward", self.name))
        })?;
        upstream.reshape(shape)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match input {
            [batch, rest @ ..] if !rest.is_empty() => Ok(vec![*batch, rest.iter().product()]),
            _ => Err(Error::dim(format!(
                "flatten {} expects [batch, features...], got {input:?}",
                self.name
            ))),
        }
    }

    fn describe(&self) -> LayerDesc {
        LayerDesc::Flatten
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_identity() {
        let mut l = FlattenLayer::new("f");
        l.begin_pass();
        let x = Tensor::new(vec![2, 2, 2, 3], (0..24).map(|v| v as f64).collect()).unwrap();
        let y = l.forward_step(0, &x).unwrap();
        assert_eq!(y.shape(), &[2, 12]);
        assert_eq!(l.backward_step(0, &y).unwrap(), x);
    }
}
