//! Adam optimizer and the training/evaluation loops.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Targets};
use crate::encoding::EncoderSpec;
use crate::error::{Error, Result};
use crate::layers::{mse_loss, softmax_cross_entropy, ParamGrad};
use crate::metrics::{compute_nmse, compute_s_tilde};
use crate::network::SequentialNetwork;
use crate::tensor::{Reduce, Tensor};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_weight_decay() -> f64 {
    1e-4
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("learning rate {} invalid", self.lr)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam betas must lie in [0,1)".into()));
        }
        if self.weight_decay < 0.0 || !self.weight_decay.is_finite() {
            return Err(Error::Config("weight decay must be non-negative".into()));
        }
        Ok(())
    }
}

/// Adam with decoupled-from-nothing weight decay: the L2 term is added
/// to the raw gradient before the moment updates.
pub struct Adam {
    cfg: AdamConfig,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(cfg: AdamConfig) -> Result<Adam> {
        cfg.validate()?;
        Ok(Adam {
            cfg,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        })
    }

    pub fn step(&mut self, params: &mut [ParamGrad<'_>]) -> Result<()> {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.param.numel()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() {
            return Err(Error::Internal(format!(
                "optimizer saw {} parameter tensors, expected {}",
                params.len(),
                self.m.len()
            )));
        }
        self.t += 1;
        let t = self.t as f64;
        let c = &self.cfg;
        let bc1 = 1.0 - c.beta1.powf(t);
        let bc2 = 1.0 - c.beta2.powf(t);
        for (i, pg) in params.iter_mut().enumerate() {
            if self.m[i].len() != pg.param.numel() {
                return Err(Error::Internal(format!(
                    "parameter '{}' changed size mid-training",
                    pg.name
                )));
            }
            let w = pg.param.data_mut();
            let g = pg.grad.data();
            for j in 0..w.len() {
                let grad = g[j] + c.weight_decay * w[j];
                self.m[i][j] = c.beta1 * self.m[i][j] + (1.0 - c.beta1) * grad;
                self.v[i][j] = c.beta2 * self.v[i][j] + (1.0 - c.beta2) * grad * grad;
                let m_hat = self.m[i][j] / bc1;
                let v_hat = self.v[i][j] / bc2;
                w[j] -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
            }
            pg.param.check_finite()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamConfig,
}

impl TrainSettings {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "epochs and batch_size must be positive".into(),
            ));
        }
        self.optimizer.validate()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    /// "accuracy" (percent) or "nmse".
    pub metric_name: String,
    pub metric: f64,
    pub loss: f64,
    /// Average spiking percentage per spiking layer, in network order.
    pub s_tilde: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    pub epoch_losses: Vec<f64>,
    pub eval: EvalReport,
    pub warnings: Vec<String>,
}

fn batch_loss(net: &SequentialNetwork, out: &Tensor, batch: &Dataset) -> Result<(f64, Tensor)> {
    if net.is_classification() {
        softmax_cross_entropy(out, batch.labels()?)
    } else {
        mse_loss(out, batch.values()?)
    }
}

/// Trains `net` in place for `settings.epochs` epochs. Shuffling, rate
/// encoding and nothing else consume the seeded RNG, so runs are
/// reproducible given (network init seed, train seed).
pub fn train(
    net: &mut SequentialNetwork,
    encoder: EncoderSpec,
    train_ds: &Dataset,
    settings: &TrainSettings,
    seed: u64,
) -> Result<(Vec<f64>, Vec<String>)> {
    settings.validate()?;
    if train_ds.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut opt = Adam::new(settings.optimizer.clone())?;
    let n_sts = net.n_sts();
    let mut epoch_losses = Vec::with_capacity(settings.epochs);
    let mut warnings = Vec::new();
    let mut order: Vec<usize> = (0..train_ds.len()).collect();
    for _epoch in 0..settings.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        for chunk in order.chunks(settings.batch_size) {
            let batch = train_ds.subset(chunk)?;
            let encoded = encoder.encode(&batch.features, n_sts, &mut rng)?;
            let out = net.forward(&encoded)?;
            let (loss, dloss) = batch_loss(net, &out, &batch)?;
            net.zero_grad();
            net.backward(&dloss)?;
            opt.step(&mut net.params_grads_mut())?;
            loss_sum += loss * chunk.len() as f64;
            loss_count += chunk.len();
        }
        epoch_losses.push(loss_sum / loss_count as f64);
    }
    if let (Some(first), Some(last)) = (epoch_losses.first(), epoch_losses.last()) {
        if epoch_losses.len() > 1 && last >= first {
            warnings.push(format!(
                "training loss did not decrease ({first:.6} -> {last:.6})"
            ));
        }
    }
    Ok((epoch_losses, warnings))
}

/// Evaluates on `ds` in chunks; also refreshes the spiking-activity
/// counters so the returned percentages describe exactly these passes.
pub fn evaluate(
    net: &mut SequentialNetwork,
    encoder: EncoderSpec,
    ds: &Dataset,
    eval_seed: u64,
) -> Result<EvalReport> {
    if ds.is_empty() {
        return Err(Error::Data("evaluation set is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(eval_seed);
    net.reset_spike_records();
    let n_sts = net.n_sts();
    let indices: Vec<usize> = (0..ds.len()).collect();
    let mut outputs = Vec::new();
    let mut loss_sum = 0.0;
    for chunk in indices.chunks(500) {
        let batch = ds.subset(chunk)?;
        let encoded = encoder.encode(&batch.features, n_sts, &mut rng)?;
        let out = net.forward(&encoded)?;
        let (loss, _) = batch_loss(net, &out, &batch)?;
        loss_sum += loss * chunk.len() as f64;
        outputs.push(out);
    }
    let out = concat_rows(&outputs)?;
    let loss = loss_sum / ds.len() as f64;
    let s_tilde = net
        .spike_records()
        .iter()
        .map(|r| Ok((r.layer.clone(), compute_s_tilde(r)?)))
        .collect::<Result<Vec<_>>>()?;
    let (metric_name, metric) = match &ds.targets {
        Targets::Labels(labels) => {
            let pred = out.reduce(Reduce::Argmax, 1)?;
            let correct = pred
                .data()
                .iter()
                .zip(labels)
                .filter(|(&p, &l)| p as usize == l)
                .count();
            (
                "accuracy".to_string(),
                100.0 * correct as f64 / labels.len() as f64,
            )
        }
        Targets::Values(truth) => {
            // NMSE is reported in the targets' original units
            let pred = ds.denormalize_targets(&out)?;
            let truth = ds.denormalize_targets(truth)?;
            ("nmse".to_string(), compute_nmse(&pred, &truth)?)
        }
    };
    Ok(EvalReport {
        metric_name,
        metric,
        loss,
        s_tilde,
    })
}

fn concat_rows(parts: &[Tensor]) -> Result<Tensor> {
    let width = parts
        .first()
        .ok_or_else(|| Error::Internal("no evaluation outputs".into()))?
        .shape()[1];
    let mut data = Vec::new();
    for p in parts {
        if p.shape()[1] != width {
            return Err(Error::dim("evaluation chunk width changed"));
        }
        data.extend_from_slice(p.data());
    }
    let n = data.len() / width;
    Tensor::new(vec![n, width], data)
}

/// Convenience wrapper: train then evaluate, mapping numerical blowups
/// to a failed trial.
pub fn run_trial(
    net: &mut SequentialNetwork,
    encoder: EncoderSpec,
    train_ds: &Dataset,
    test_ds: &Dataset,
    settings: &TrainSettings,
    seed: u64,
) -> Result<TrainReport> {
    let (epoch_losses, warnings) = train(net, encoder, train_ds, settings, seed)?;
    let eval = evaluate(net, encoder, test_ds, seed.wrapping_add(0x5eed))?;
    Ok(TrainReport {
        seed,
        epoch_losses,
        eval,
        warnings,
    })
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Seeded permutation of `0..n`, exposed for deterministic data splits.
pub fn seeded_permutation(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}
