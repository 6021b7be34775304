//! Input encoders: how a static sample becomes a spike train.
//!
//! `direct` repeats the raw values on every STS, leaving the first
//! spiking layer to do the temporal coding. `rate` draws a Bernoulli
//! spike per value and step, with the value (in `[0,1]`) as the firing
//! probability.

use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Reduce, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderSpec {
    Direct,
    Rate,
}

impl FromStr for EncoderSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<EncoderSpec> {
        match s.to_ascii_lowercase().as_str() {
            "direct" => Ok(EncoderSpec::Direct),
            "rate" => Ok(EncoderSpec::Rate),
            "te" => Err(Error::Unsupported(
                "temporal encoding ('TE') is not implemented; use 'direct' or 'rate'".into(),
            )),
            other => Err(Error::Config(format!("unknown encoder '{other}'"))),
        }
    }
}

impl EncoderSpec {
    /// Encodes a batch `[batch, features...]` into `[n_sts, batch, ...]`.
    pub fn encode(&self, batch: &Tensor, n_sts: usize, rng: &mut impl Rng) -> Result<Tensor> {
        match self {
            EncoderSpec::Direct => encode_direct(batch, n_sts),
            EncoderSpec::Rate => encode_rate(batch, n_sts, rng),
        }
    }
}

/// Repeats the sample on every spike time step.
pub fn encode_direct(batch: &Tensor, n_sts: usize) -> Result<Tensor> {
    if n_sts == 0 {
        return Err(Error::Config("n_sts must be at least 1".into()));
    }
    let steps: Vec<Tensor> = (0..n_sts).map(|_| batch.clone()).collect();
    Tensor::stack(&steps)
}

/// Bernoulli rate coding: each value in `[0,1]` is a per-step firing
/// probability.
pub fn encode_rate(batch: &Tensor, n_sts: usize, rng: &mut impl Rng) -> Result<Tensor> {
    if n_sts == 0 {
        return Err(Error::Config("n_sts must be at least 1".into()));
    }
    if let Some(&bad) = batch.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Data(format!(
            "rate encoding needs values in [0,1], got {bad}"
        )));
    }
    let mut out = Tensor::zeros(
        &std::iter::once(n_sts)
            .chain(batch.shape().iter().copied())
            .collect::<Vec<_>>(),
    );
    let od = out.data_mut();
    let n = batch.numel();
    for t in 0..n_sts {
        for (i, &p) in batch.data().iter().enumerate() {
            od[t * n + i] = if rng.gen::<f64>() < p { 1.0 } else { 0.0 };
        }
    }
    Ok(out)
}

/// Mean over the leading STS axis, the inverse of direct encoding.
pub fn decode_mean(train: &Tensor) -> Result<Tensor> {
    if train.shape().len() < 2 {
        return Err(Error::dim(format!(
            "decode expects [n_sts, ...], got {:?}",
            train.shape()
        )));
    }
    train.reduce(Reduce::Mean, 0)
}
