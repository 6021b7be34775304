use rand::Rng;

use super::{Layer, LayerDesc, ParamGrad};
use crate::error::{Error, Result};
use crate::tensor::{Reduce, Tensor};

/// Densely connected linear layer, `y = x W^T + b` per batch row.
pub struct DenseLayer {
    name: String,
    weights: Tensor, // [n_out, n_in]
    bias: Tensor,    // [n_out]
    w_grad: Tensor,
    b_grad: Tensor,
    inputs: Vec<Tensor>, // cached per STS
}

impl DenseLayer {
    pub fn new(
        name: impl Into<String>,
        n_in: usize,
        n_out: usize,
        rng: &mut impl Rng,
    ) -> DenseLayer {
        // uniform in +-1/sqrt(fan_in)
        let bound = 1.0 / (n_in as f64).sqrt();
        let weights = Tensor::new(
            vec![n_out, n_in],
            (0..n_out * n_in)
                .map(|_| rng.gen_range(-bound..bound))
                .collect(),
        )
        .expect("init weights");
        let bias = Tensor::new(
            vec![n_out],
            (0..n_out).map(|_| rng.gen_range(-bound..bound)).collect(),
        )
        .expect("init bias");
        DenseLayer::with_params(name, weights, bias).expect("consistent shapes")
    }

    pub fn with_params(
        name: impl Into<String>,
        weights: Tensor,
        bias: Tensor,
    ) -> Result<DenseLayer> {
        let [n_out, _n_in] = *shape2(weights.shape())?;
        if bias.shape() != [n_out] {
            return Err(Error::dim(format!(
                "bias shape {:?} does not match weights {:?}",
                bias.shape(),
                weights.shape()
            )));
        }
        Ok(DenseLayer {
            name: name.into(),
            w_grad: Tensor::zeros(weights.shape()),
            b_grad: Tensor::zeros(bias.shape()),
            weights,
            bias,
            inputs: Vec::new(),
        })
    }

    pub fn n_in(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn n_out(&self) -> usize {
        self.weights.shape()[0]
    }
}

fn shape2(shape: &[usize]) -> Result<&[usize; 2]> {
    shape
        .try_into()
        .map_err(|_| Error::dim(format!("expected 2-D weights, got {shape:?}")))
}

impl Layer for DenseLayer {
    fn name(&self) -> &str {
        &self.name
    }

    fn begin_pass(&mut self) {
        self.inputs.clear();
    }

    fn forward_step(&mut self, step: usize, x: &Tensor) -> Result<Tensor> {
        if step != self.inputs.len() {
            return Err(Error::Internal(format!(
                "dense {}: step {step} out of order",
                self.name
            )));
        }
        let y = x.matmul(&self.weights.transpose()?)?;
        // add bias per row
        let (batch, n_out) = (y.shape()[0], y.shape()[1]);
        let mut y = y;
        {
            let data = y.data_mut();
            for b in 0..batch {
                for j in 0..n_out {
                    data[b * n_out + j] += self.bias.data()[j];
                }
            }
        }
        self.inputs.push(x.clone());
        Ok(y)
    }

    fn backward_step(&mut self, step: usize, upstream: &Tensor) -> Result<Tensor> {
        let x = self.inputs.get(step).ok_or_else(|| {
            Error::Internal(format!("dense {}: backward before forward", self.name))
        })?;
        self.w_grad.add_assign(&upstream.transpose()?.matmul(x)?)?;
        self.b_grad.add_assign(&upstream.reduce(Reduce::Sum, 0)?)?;
        upstream.matmul(&self.weights)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match input {
            [batch, n_in] if *n_in == self.n_in() => Ok(vec![*batch, self.n_out()]),
            _ => Err(Error::dim(format!(
                "dense {} expects [batch, {}], got {input:?}",
                self.name,
                self.n_in()
            ))),
        }
    }

    fn params_grads_mut(&mut self) -> Vec<ParamGrad<'_>> {
        vec![
            ParamGrad {
                name: "weights",
                param: &mut self.weights,
                grad: &mut self.w_grad,
            },
            ParamGrad {
                name: "bias",
                param: &mut self.bias,
                grad: &mut self.b_grad,
            },
        ]
    }

    fn zero_grad(&mut self) {
        self.w_grad = Tensor::zeros(self.weights.shape());
        self.b_grad = Tensor::zeros(self.bias.shape());
    }

    fn describe(&self) -> LayerDesc {
        LayerDesc::Dense {
            weights: self.weights.clone(),
            bias: self.bias.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer_1x2(w: &[f64], b: f64) -> DenseLayer {
        DenseLayer::with_params(
            "dl",
            Tensor::new(vec![1, 2], w.to_vec()).unwrap(),
            Tensor::from_vec(vec![b]),
        )
        .unwrap()
    }

    #[test]
    fn forward_sum_fixture() {
        let mut l = layer_1x2(&[1.0, 1.0], 0.0);
        l.begin_pass();
        let y = l
            .forward_step(0, &Tensor::new(vec![1, 2], vec![2.0, 3.0]).unwrap())
            .unwrap();
        assert_eq!(y.data(), &[5.0]);
    }

    #[test]
    fn identity_weights_pass_input_through() {
        let mut l =
            DenseLayer::with_params("dl", Tensor::identity(3), Tensor::zeros(&[3])).unwrap();
        let x = Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        l.begin_pass();
        assert_eq!(l.forward_step(0, &x).unwrap(), x);
    }

    #[test]
    fn backward_hand_fixture() {
        // 1x1 layer, batch of 3 ones: dW = 3, db = 3
        let mut l = DenseLayer::with_params(
            "dl",
            Tensor::new(vec![1, 1], vec![0.5]).unwrap(),
            Tensor::zeros(&[1]),
        )
        .unwrap();
        l.begin_pass();
        let x = Tensor::full(&[3, 1], 1.0);
        l.forward_step(0, &x).unwrap();
        let dx = l.backward_step(0, &Tensor::full(&[3, 1], 1.0)).unwrap();
        assert_eq!(l.w_grad.data(), &[3.0]);
        assert_eq!(l.b_grad.data(), &[3.0]);
        assert_eq!(dx.data(), &[0.5, 0.5, 0.5]);
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut rng = rand::rngs::mock::StepRng::new(2, 1);
        let mut l = DenseLayer::new("dl", 4, 3, &mut rng);
        l.begin_pass();
        l.forward_step(0, &Tensor::full(&[2, 4], 0.3)).unwrap();
        l.backward_step(0, &Tensor::zeros(&[2, 3])).unwrap();
        assert!(l.w_grad.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grad_accumulation_is_additive() {
        let mut l = layer_1x2(&[1.0, 2.0], 0.0);
        l.begin_pass();
        let x = Tensor::new(vec![1, 2], vec![0.5, -1.0]).unwrap();
        l.forward_step(0, &x).unwrap();
        let up = Tensor::new(vec![1, 1], vec![2.0]).unwrap();
        l.backward_step(0, &up).unwrap();
        let once = l.w_grad.clone();
        l.backward_step(0, &up).unwrap();
        assert_eq!(l.w_grad, once.scale(2.0).unwrap());
        l.zero_grad();
        assert!(l.w_grad.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_before_forward_is_internal_error() {
        let mut l = layer_1x2(&[1.0, 1.0], 0.0);
        l.begin_pass();
        assert!(l.backward_step(0, &Tensor::zeros(&[1, 1])).is_err());
    }
}
