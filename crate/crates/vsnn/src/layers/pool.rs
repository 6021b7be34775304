use super::{Layer, LayerDesc};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// 2x2 max pooling with stride 2. Ties route the gradient to the first
/// (row-major) maximal element.
pub struct MaxPoolLayer {
    name: String,
    // per STS: input shape and flat argmax index per output element
    caches: Vec<(Vec<usize>, Vec<usize>)>,
}

impl MaxPoolLayer {
    pub fn new(name: impl Into<String>) -> MaxPoolLayer {
        MaxPoolLayer {
            name: name.into(),
            caches: Vec::new(),
        }
    }
}

impl Layer for MaxPoolLayer {
    fn name(&self) -> &str {
        &self.name
    }

    fn begin_pass(&mut self) {
        self.caches.clear();
    }

    fn forward_step(&mut self, step: usize, x: &Tensor) -> Result<Tensor> {
        if step != self.caches.len() {
            return Err(Error::Internal(format!(
                "maxpool {}: step {step} out of order",
                self.name
            )));
        }
        let out_shape = self.output_shape(x.shape())?;
        let [batch, c, h, l] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
        let (ho, lo) = (h / 2, l / 2);
        let mut out = Tensor::zeros(&out_shape);
        let mut argmax = vec![0usize; out.numel()];
        {
            let xd = x.data();
            let od = out.data_mut();
            for bc in 0..batch * c {
                for oy in 0..ho {
                    for ox in 0..lo {
                        let mut best_idx = (bc * h + 2 * oy) * l + 2 * ox;
                        let mut best = xd[best_idx];
                        for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                            let idx = (bc * h + 2 * oy + dy) * l + 2 * ox + dx;
                            if xd[idx] > best {
                                best = xd[idx];
                                best_idx = idx;
                            }
                        }
                        let o = (bc * ho + oy) * lo + ox;
                        od[o] = best;
                        argmax[o] = best_idx;
                    }
                }
            }
        }
        self.caches.push((x.shape().to_vec(), argmax));
        Ok(out)
    }

    fn backward_step(&mut self, step: usize, upstream: &Tensor) -> Result<Tensor> {
        let (in_shape, argmax) = self.caches.get(step).ok_or_else(|| {
            Error::Internal(format!("maxpool {}: backward before forward", self.name))
        })?;
        if upstream.numel() != argmax.len() {
            return Err(Error::dim(format!(
                "maxpool {} upstream has {} elements, expected {}",
                self.name,
                upstream.numel(),
                argmax.len()
            )));
        }
        let mut dx = Tensor::zeros(in_shape);
        let dxd = dx.data_mut();
        for (o, &src) in argmax.iter().enumerate() {
            dxd[src] += upstream.data()[o];
        }
        Ok(dx)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match input {
            [batch, c, h, l] if h % 2 == 0 && l % 2 == 0 => Ok(vec![*batch, *c, h / 2, l / 2]),
            [_, _, h, l] => Err(Error::dim(format!(
                "maxpool {} needs even spatial dims, got {h}x{l}",
                self.name
            ))),
            _ => Err(Error::dim(format!(
                "maxpool {} expects [batch,C,H,L], got {input:?}",
                self.name
            ))),
        }
    }

    fn describe(&self) -> LayerDesc {
        LayerDesc::MaxPool
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_and_route_fixture() {
        let mut l = MaxPoolLayer::new("mp");
        l.begin_pass();
        let x = Tensor::new(vec![1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = l.forward_step(0, &x).unwrap();
        assert_eq!(y.data(), &[4.0]);
        let dx = l
            .backward_step(0, &Tensor::new(vec![1, 1, 1, 1], vec![5.0]).unwrap())
            .unwrap();
        assert_eq!(dx.data(), &[0.0, 0.0, 0.0, 5.0]);
    }

    #[test]
    fn ties_route_to_first_row_major_element() {
        let mut l = MaxPoolLayer::new("mp");
        l.begin_pass();
        let x = Tensor::full(&[1, 1, 2, 2], 7.0);
        l.forward_step(0, &x).unwrap();
        let dx = l
            .backward_step(0, &Tensor::new(vec![1, 1, 1, 1], vec![1.0]).unwrap())
            .unwrap();
        assert_eq!(dx.data(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn odd_dims_rejected() {
        let l = MaxPoolLayer::new("mp");
        assert!(l.output_shape(&[1, 1, 3, 4]).is_err());
    }
}
