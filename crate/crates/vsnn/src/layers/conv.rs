use rand::Rng;

use super::{Layer, LayerDesc, ParamGrad};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// 2-D convolution layer (cross-correlation, stride 1, no padding),
/// applied per batch element.
pub struct ConvLayer {
    name: String,
    kernels: Tensor, // [c_out, c_in, hk, lk]
    bias: Tensor,    // [c_out]
    k_grad: Tensor,
    b_grad: Tensor,
    inputs: Vec<Tensor>,
}

impl ConvLayer {
    pub fn new(
        name: impl Into<String>,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        rng: &mut impl Rng,
    ) -> ConvLayer {
        let fan_in = c_in * kernel * kernel;
        let bound = 1.0 / (fan_in as f64).sqrt();
        let kernels = Tensor::new(
            vec![c_out, c_in, kernel, kernel],
            (0..c_out * fan_in)
                .map(|_| rng.gen_range(-bound..bound))
                .collect(),
        )
        .expect("init kernels");
        let bias = Tensor::new(
            vec![c_out],
            (0..c_out).map(|_| rng.gen_range(-bound..bound)).collect(),
        )
        .expect("init bias");
        ConvLayer::with_params(name, kernels, bias).expect("consistent shapes")
    }

    pub fn with_params(
        name: impl Into<String>,
        kernels: Tensor,
        bias: Tensor,
    ) -> Result<ConvLayer> {
        if kernels.shape().len() != 4 {
            return Err(Error::dim(format!(
                "conv kernels must be 4-D, got {:?}",
                kernels.shape()
            )));
        }
        if bias.shape() != [kernels.shape()[0]] {
            return Err(Error::dim(format!(
                "conv bias shape {:?} does not match kernels {:?}",
                bias.shape(),
                kernels.shape()
            )));
        }
        Ok(ConvLayer {
            name: name.into(),
            k_grad: Tensor::zeros(kernels.shape()),
            b_grad: Tensor::zeros(bias.shape()),
            kernels,
            bias,
            inputs: Vec::new(),
        })
    }

    fn dims(&self) -> (usize, usize, usize, usize) {
        let s = self.kernels.shape();
        (s[0], s[1], s[2], s[3])
    }
}

impl Layer for ConvLayer {
    fn name(&self) -> &str {
        &self.name
    }

    fn begin_pass(&mut self) {
        self.inputs.clear();
    }

    fn forward_step(&mut self, step: usize, x: &Tensor) -> Result<Tensor> {
        if step != self.inputs.len() {
            return Err(Error::Internal(format!(
                "conv {}: step {step} out of order",
                self.name
            )));
        }
        let out_shape = self.output_shape(x.shape())?;
        let batch = x.shape()[0];
        let mut parts = Vec::with_capacity(batch);
        for b in 0..batch {
            let sample = x.index_axis0(b)?;
            parts.push(Tensor::conv2d_forward(&sample, &self.kernels, &self.bias)?);
        }
        let y = Tensor::stack(&parts)?;
        debug_assert_eq!(y.shape(), &out_shape[..]);
        self.inputs.push(x.clone());
        Ok(y)
    }

    fn backward_step(&mut self, step: usize, upstream: &Tensor) -> Result<Tensor> {
        let x = self
            .inputs
            .get(step)
            .ok_or_else(|| Error::Internal(format!("conv {}: backward before forward", self.name)))?
            .clone();
        let (c_out, c_in, hk, lk) = self.dims();
        let [batch, _, h, l] = *shape4(x.shape())?;
        let (ho, lo) = (h - hk + 1, l - lk + 1);
        if upstream.shape() != [batch, c_out, ho, lo] {
            return Err(Error::dim(format!(
                "conv {} upstream shape {:?}, expected {:?}",
                self.name,
                upstream.shape(),
                [batch, c_out, ho, lo]
            )));
        }
        let mut dx = Tensor::zeros(x.shape());
        {
            let xd = x.data();
            let ud = upstream.data();
            let kd = self.kernels.data();
            let kg = self.k_grad.data_mut();
            let bg = self.b_grad.data_mut();
            let dxd = dx.data_mut();
            for b in 0..batch {
                for co in 0..c_out {
                    for oy in 0..ho {
                        for ox in 0..lo {
                            let u = ud[((b * c_out + co) * ho + oy) * lo + ox];
                            if u == 0.0 {
                                continue;
                            }
                            bg[co] += u;
                            for ci in 0..c_in {
                                for ky in 0..hk {
                                    let xrow = ((b * c_in + ci) * h + oy + ky) * l + ox;
                                    let krow = ((co * c_in + ci) * hk + ky) * lk;
                                    for kx in 0..lk {
                                        kg[krow + kx] += u * xd[xrow + kx];
                                        dxd[xrow + kx] += u * kd[krow + kx];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        self.k_grad.check_finite()?;
        dx.check_finite()?;
        Ok(dx)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let (c_out, c_in, hk, lk) = self.dims();
        let [batch, c, h, l] = *shape4(input)?;
        if c != c_in {
            return Err(Error::dim(format!(
                "conv {} expects {c_in} input channels, got shape {input:?}",
                self.name
            )));
        }
        if hk > h || lk > l {
            return Err(Error::dim(format!(
                "conv {} kernel {hk}x{lk} larger than input {h}x{l}",
                self.name
            )));
        }
        Ok(vec![batch, c_out, h - hk + 1, l - lk + 1])
    }

    fn params_grads_mut(&mut self) -> Vec<ParamGrad<'_>> {
        vec![
            ParamGrad {
                name: "kernels",
                param: &mut self.kernels,
                grad: &mut self.k_grad,
            },
            ParamGrad {
                name: "bias",
                param: &mut self.bias,
                grad: &mut self.b_grad,
            },
        ]
    }

    fn zero_grad(&mut self) {
        self.k_grad = Tensor::zeros(self.kernels.shape());
        self.b_grad = Tensor::zeros(self.bias.shape());
    }

    fn describe(&self) -> LayerDesc {
        LayerDesc::Conv {
            kernels: self.kernels.clone(),
            bias: self.bias.clone(),
        }
    }
}

fn shape4(shape: &[usize]) -> Result<&[usize; 4]> {
    shape
        .try_into()
        .map_err(|_| Error::dim(format!("expected [batch,C,H,L] tensor, got {shape:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_matches_tensor_core_per_sample() {
        let mut rng = rand::rngs::mock::StepRng::new(7, 31);
        let mut layer = ConvLayer::new("cl", 2, 3, 3, &mut rng);
        let x = Tensor::new(
            vec![2, 2, 5, 5],
            (0..100).map(|i| (i as f64 * 0.73).sin()).collect(),
        )
        .unwrap();
        layer.begin_pass();
        let y = layer.forward_step(0, &x).unwrap();
        for b in 0..2 {
            let single =
                Tensor::conv2d_forward(&x.index_axis0(b).unwrap(), &layer.kernels, &layer.bias)
                    .unwrap();
            assert_eq!(y.index_axis0(b).unwrap(), single);
        }
    }

    #[test]
    fn bias_grad_counts_output_positions() {
        let kernels = Tensor::full(&[1, 1, 2, 2], 0.0);
        let bias = Tensor::zeros(&[1]);
        let mut layer = ConvLayer::with_params("cl", kernels, bias).unwrap();
        layer.begin_pass();
        let x = Tensor::full(&[1, 1, 3, 3], 1.0);
        layer.forward_step(0, &x).unwrap();
        layer
            .backward_step(0, &Tensor::full(&[1, 1, 2, 2], 1.0))
            .unwrap();
        assert_eq!(layer.b_grad.data(), &[4.0]);
        // every input position covered by the 2x2 kernel once per overlap
        assert_eq!(layer.k_grad.data(), &[4.0, 4.0, 4.0, 4.0]);
    }
}
