//! Dense row-major float64 tensors.
//!
//! Gradients in this library are computed by explicit per-layer backward
//! rules, so the tensor type stays minimal: no autodiff, no broadcasting
//! beyond scalar operands. Every exported operation checks that its result
//! is finite; NaN/Inf anywhere is a hard error.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// Elementwise reduction over one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduce {
    Sum,
    Mean,
    Max,
    /// Ties broken by lowest index.
    Argmax,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Tensor> {
        if shape.contains(&0) {
            return Err(Error::dim(format!("zero-sized axis in shape {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::dim(format!(
                "shape {shape:?} needs {n} elements, got {}",
                data.len()
            )));
        }
        let t = Tensor { shape, data };
        t.check_finite()?;
        Ok(t)
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn full(shape: &[usize], value: f64) -> Tensor {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn from_vec(data: Vec<f64>) -> Tensor {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn scalar(value: f64) -> Tensor {
        Tensor {
            shape: vec![1],
            data: vec![value],
        }
    }

    /// Square identity matrix.
    pub fn identity(n: usize) -> Tensor {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Numerical("non-finite value in tensor".into()))
        }
    }

    /// Same data, new shape with equal element count.
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::dim(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data: self.data.clone(),
        })
    }

    /// Copy of the `i`-th slice along axis 0, with that axis removed.
    pub fn index_axis0(&self, i: usize) -> Result<Tensor> {
        if self.shape.is_empty() || i >= self.shape[0] {
            return Err(Error::dim(format!(
                "index {i} out of bounds for axis 0 of {:?}",
                self.shape
            )));
        }
        let inner: usize = self.shape[1..].iter().product();
        let shape = if self.shape.len() == 1 {
            vec![1]
        } else {
            self.shape[1..].to_vec()
        };
        Ok(Tensor {
            shape,
            data: self.data[i * inner..(i + 1) * inner].to_vec(),
        })
    }

    /// Stack equally-shaped tensors along a new leading axis.
    pub fn stack(parts: &[Tensor]) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::dim("cannot stack zero tensors"))?;
        let mut data = Vec::with_capacity(first.numel() * parts.len());
        for p in parts {
            if p.shape != first.shape {
                return Err(Error::dim(format!(
                    "stack shape mismatch: {:?} vs {:?}",
                    first.shape, p.shape
                )));
            }
            data.extend_from_slice(&p.data);
        }
        let mut shape = vec![parts.len()];
        shape.extend_from_slice(&first.shape);
        Ok(Tensor { shape, data })
    }

    /// Matrix product of `[m,k] x [k,n]`, accumulated left-to-right over k.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = as_2d(&self.shape)?;
        let (k2, n) = as_2d(&other.shape)?;
        if k != k2 {
            return Err(Error::dim(format!(
                "matmul inner dims disagree: {:?} x {:?}",
                self.shape, other.shape
            )));
        }
        let mut out = vec![0.0f64; m * n];
        for i in 0..m {
            let row = &self.data[i * k..(i + 1) * k];
            let orow = &mut out[i * n..(i + 1) * n];
            // kk in the middle keeps per-element accumulation in k order
            // while the innermost loop vectorizes over j.
            for (kk, &aik) in row.iter().enumerate() {
                let brow = &other.data[kk * n..(kk + 1) * n];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += aik * b;
                }
            }
        }
        let t = Tensor {
            shape: vec![m, n],
            data: out,
        };
        t.check_finite()?;
        Ok(t)
    }

    /// Transpose of a 2-D tensor.
    pub fn transpose(&self) -> Result<Tensor> {
        let (m, n) = as_2d(&self.shape)?;
        let mut out = vec![0.0f64; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = self.data[i * n + j];
            }
        }
        Ok(Tensor {
            shape: vec![n, m],
            data: out,
        })
    }

    /// Valid cross-correlation (no kernel flip), stride 1, zero padding.
    ///
    /// `input` is `[C,H,L]`, `kernels` is `[C_out,C,H_k,L_k]`, `bias` is
    /// `[C_out]`; the output is `[C_out, H-H_k+1, L-L_k+1]`.
    pub fn conv2d_forward(input: &Tensor, kernels: &Tensor, bias: &Tensor) -> Result<Tensor> {
        let [c, h, l] = *as_nd::<3>(&input.shape)?;
        let [c_out, c_in, hk, lk] = *as_nd::<4>(&kernels.shape)?;
        if c_in != c {
            return Err(Error::dim(format!(
                "conv2d channel mismatch: input {:?} vs kernels {:?}",
                input.shape, kernels.shape
            )));
        }
        if hk > h || lk > l {
            return Err(Error::dim(format!(
                "conv2d kernel {hk}x{lk} larger than input {h}x{l}"
            )));
        }
        if bias.shape != [c_out] {
            return Err(Error::dim(format!(
                "conv2d bias shape {:?}, expected [{c_out}]",
                bias.shape
            )));
        }
        let ho = h - hk + 1;
        let lo = l - lk + 1;
        let mut out = vec![0.0f64; c_out * ho * lo];
        for co in 0..c_out {
            for oy in 0..ho {
                for ox in 0..lo {
                    let mut acc = 0.0;
                    for ci in 0..c {
                        for ky in 0..hk {
                            let irow = &input.data[ci * h * l + (oy + ky) * l + ox..];
                            let krow = &kernels.data[co * c * hk * lk + ci * hk * lk + ky * lk..];
                            for kx in 0..lk {
                                acc += irow[kx] * krow[kx];
                            }
                        }
                    }
                    out[co * ho * lo + oy * lo + ox] = acc + bias.data[co];
                }
            }
        }
        let t = Tensor {
            shape: vec![c_out, ho, lo],
            data: out,
        };
        t.check_finite()?;
        Ok(t)
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip(other, |a, b| a * b)
    }

    pub fn scale(&self, factor: f64) -> Result<Tensor> {
        self.map(|v| v * factor)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Tensor> {
        let t = Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        };
        t.check_finite()?;
        Ok(t)
    }

    fn zip(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::dim(format!(
                "elementwise shape mismatch: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        let t = Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        };
        t.check_finite()?;
        Ok(t)
    }

    /// Reduce one axis; the result drops that axis (rank 1 inputs reduce
    /// to a single-element tensor).
    pub fn reduce(&self, op: Reduce, axis: usize) -> Result<Tensor> {
        if axis >= self.shape.len() {
            return Err(Error::dim(format!(
                "axis {axis} invalid for shape {:?}",
                self.shape
            )));
        }
        let outer: usize = self.shape[..axis].iter().product();
        let len = self.shape[axis];
        let inner: usize = self.shape[axis + 1..].iter().product();
        let mut out = vec![0.0f64; outer * inner];
        for o in 0..outer {
            for i in 0..inner {
                let at = |j: usize| self.data[o * len * inner + j * inner + i];
                out[o * inner + i] = match op {
                    Reduce::Sum => (0..len).map(at).sum(),
                    Reduce::Mean => (0..len).map(at).sum::<f64>() / len as f64,
                    Reduce::Max => (0..len).map(at).fold(f64::NEG_INFINITY, f64::max),
                    Reduce::Argmax => {
                        let mut best = 0usize;
                        for j in 1..len {
                            if at(j) > at(best) {
                                best = j;
                            }
                        }
                        best as f64
                    }
                };
            }
        }
        let mut shape: Vec<usize> = self.shape[..axis].to_vec();
        shape.extend_from_slice(&self.shape[axis + 1..]);
        if shape.is_empty() {
            shape.push(1);
        }
        let t = Tensor { shape, data: out };
        t.check_finite()?;
        Ok(t)
    }

    /// In-place elementwise accumulation (used for gradient accumulation).
    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::dim(format!(
                "elementwise shape mismatch: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        self.check_finite()
    }

    /// Sum of all elements.
    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}

fn as_2d(shape: &[usize]) -> Result<(usize, usize)> {
    match shape {
        [m, n] => Ok((*m, *n)),
        _ => Err(Error::dim(format!("expected 2-D tensor, got {shape:?}"))),
    }
}

fn as_nd<const N: usize>(shape: &[usize]) -> Result<&[usize; N]> {
    shape
        .try_into()
        .map_err(|_| Error::dim(format!("expected {N}-D tensor, got {shape:?}")))
}
