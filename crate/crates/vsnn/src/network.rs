//! Sequential network container with spike-time-step unrolling.
//!
//! Networks are built from architecture strings like
//! `I(784)->DL(200)->A1->DL(200)->A2->DL(10)->softmax`. The layers up to
//! and including the last spiking activation (the "head") run once per
//! STS with persistent membrane state; the spike train collected after
//! the last spiking activation is decoded (mean over STSs by default) and
//! the remaining "tail" layers run once on the decoded value.

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{
    ActivationLayer, ConvLayer, DenseLayer, FlattenLayer, Layer, LayerDesc, MaxPoolLayer,
    ParamGrad, SpikingActivationLayer,
};
use crate::metrics::{
    conv_mean_targets, dense_mean_targets, Activity, EnergySegment, SpikeTrainRecord,
};
use crate::neuron::{GateMode, SpikeKind, SpikingNeuronConfig};
use crate::tensor::Tensor;

/// One token of an architecture string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArchToken {
    /// `I(n)` or `I(c,h,w)`.
    Input(Vec<usize>),
    /// `DL(n)`.
    Dense(usize),
    /// `CL(channels, kernel)`.
    Conv { channels: usize, kernel: usize },
    /// `MP` (2x2, stride 2).
    MaxPool,
    /// `F`.
    Flatten,
    /// `A1`, `A2`, ...
    Activation(usize),
    /// `softmax` (classification head marker, must be last).
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    tokens: Vec<ArchToken>,
    source: String,
}

impl Architecture {
    pub fn tokens(&self) -> &[ArchToken] {
        &self.tokens
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn input_shape(&self) -> &[usize] {
        match &self.tokens[0] {
            ArchToken::Input(shape) => shape,
            _ => unreachable!("validated at parse time"),
        }
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Architecture> {
        let mut tokens = Vec::new();
        for (idx, raw) in s.replace('→', "->").split("->").enumerate() {
            let tok = raw.trim();
            let parse_err = |msg: &str| {
                Error::Config(format!("architecture token {} ('{tok}'): {msg}", idx + 1))
            };
            let parsed = if let Some(args) = strip_call(tok, "I") {
                let dims = parse_dims(&args).map_err(|e| parse_err(&e))?;
                if dims.len() != 1 && dims.len() != 3 {
                    return Err(parse_err("I takes 1 (flat) or 3 (C,H,L) dimensions"));
                }
                ArchToken::Input(dims)
            } else if let Some(args) = strip_call(tok, "DL") {
                let dims = parse_dims(&args).map_err(|e| parse_err(&e))?;
                match dims[..] {
                    [n] => ArchToken::Dense(n),
                    _ => return Err(parse_err("DL takes one node count")),
                }
            } else if let Some(args) = strip_call(tok, "CL") {
                let dims = parse_dims(&args).map_err(|e| parse_err(&e))?;
                match dims[..] {
                    [channels, kernel] => ArchToken::Conv { channels, kernel },
                    _ => return Err(parse_err("CL takes (channels, kernel)")),
                }
            } else if tok == "MP" {
                ArchToken::MaxPool
            } else if tok == "F" {
                ArchToken::Flatten
            } else if tok.eq_ignore_ascii_case("softmax") {
                ArchToken::Softmax
            } else if let Some(num) = tok.strip_prefix('A') {
                let n: usize = num
                    .parse()
                    .map_err(|_| parse_err("activation must be A<number>"))?;
                ArchToken::Activation(n)
            } else {
                return Err(parse_err("unknown token"));
            };
            tokens.push(parsed);
        }
        match tokens.first() {
            Some(ArchToken::Input(_)) => {}
            _ => return Err(Error::Config("architecture must start with I(...)".into())),
        }
        if tokens[1..].iter().any(|t| matches!(t, ArchToken::Input(_))) {
            return Err(Error::Config("only one input token allowed".into()));
        }
        if let Some(pos) = tokens.iter().position(|t| *t == ArchToken::Softmax) {
            if pos != tokens.len() - 1 {
                return Err(Error::Config("softmax must be the final token".into()));
            }
        }
        Ok(Architecture {
            tokens,
            source: s.to_string(),
        })
    }
}

fn strip_call(tok: &str, name: &str) -> Option<String> {
    tok.strip_prefix(name)?
        .trim()
        .strip_prefix('(')?
        .strip_suffix(')')
        .map(|s| s.to_string())
}

fn parse_dims(args: &str) -> std::result::Result<Vec<usize>, String> {
    args.split(',')
        .map(|p| {
            let p = p.trim();
            p.parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| format!("'{p}' is not a positive integer"))
        })
        .collect()
}

/// Which unit replaces the `A#` activations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum NetworkKind {
    Ann,
    Snn,
    Vsnn,
}

impl FromStr for NetworkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<NetworkKind> {
        match s.to_ascii_uppercase().as_str() {
            "ANN" => Ok(NetworkKind::Ann),
            "SNN" => Ok(NetworkKind::Snn),
            "VSNN" => Ok(NetworkKind::Vsnn),
            other => Err(Error::Config(format!("unknown network kind '{other}'"))),
        }
    }
}

/// How the spike train after the last spiking activation is decoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    #[default]
    MeanOverSts,
    LastStep,
}

pub struct SequentialNetwork {
    layers: Vec<Box<dyn Layer>>,
    /// Layers `[..head_len]` run per STS; the rest run once on the
    /// decoded value. Zero when the network has no spiking layers.
    head_len: usize,
    n_sts: usize,
    readout: Readout,
    classification: bool,
    input_shape: Vec<usize>,
    arch: Architecture,
    kind: NetworkKind,
    // caches for backward
    last_head_outputs: Vec<Tensor>,
}

/// Builds a network from an architecture string, mapping `A#` tokens to
/// the continuous activation (ANN), LIF neurons (SNN) or variable
/// spiking neurons (VSNN).
pub fn build_from_spec(
    arch: &Architecture,
    neuron: &SpikingNeuronConfig,
    kind: NetworkKind,
    n_sts: usize,
    rng: &mut impl Rng,
) -> Result<SequentialNetwork> {
    build_network(arch, neuron, kind, n_sts, rng, GateMode::Hard, false)
}

/// As [`build_from_spec`] with control over the gate mode and reset
/// detachment (used by gradient checks and ablations).
pub fn build_network(
    arch: &Architecture,
    neuron: &SpikingNeuronConfig,
    kind: NetworkKind,
    n_sts: usize,
    rng: &mut impl Rng,
    gate_mode: GateMode,
    detach_reset: bool,
) -> Result<SequentialNetwork> {
    neuron.validate()?;
    if n_sts == 0 {
        return Err(Error::Config("n_sts must be at least 1".into()));
    }
    let mut layers: Vec<Box<dyn Layer>> = Vec::new();
    let mut classification = false;
    // shape with a dummy batch axis, updated layer by layer
    let mut shape: Vec<usize> = std::iter::once(1)
        .chain(arch.input_shape().iter().copied())
        .collect();
    let (mut n_dense, mut n_conv, mut n_pool, mut n_flat) = (0, 0, 0, 0);
    for token in &arch.tokens()[1..] {
        let layer: Box<dyn Layer> = match token {
            ArchToken::Input(_) => unreachable!("rejected at parse time"),
            ArchToken::Dense(n) => {
                n_dense += 1;
                let n_in = match shape[..] {
                    [_, f] => f,
                    _ => {
                        return Err(Error::Config(format!(
                            "dense layer needs flat input, got shape {:?}; add F before DL",
                            &shape[1..]
                        )))
                    }
                };
                Box::new(DenseLayer::new(format!("DL{n_dense}"), n_in, *n, rng))
            }
            ArchToken::Conv { channels, kernel } => {
                n_conv += 1;
                let c_in = match shape[..] {
                    [_, c, _, _] => c,
                    _ => {
                        return Err(Error::Config(format!(
                            "conv layer needs [C,H,L] input, got shape {:?}",
                            &shape[1..]
                        )))
                    }
                };
                Box::new(ConvLayer::new(
                    format!("CL{n_conv}"),
                    c_in,
                    *channels,
                    *kernel,
                    rng,
                ))
            }
            ArchToken::MaxPool => {
                n_pool += 1;
                Box::new(MaxPoolLayer::new(format!("MP{n_pool}")))
            }
            ArchToken::Flatten => {
                n_flat += 1;
                Box::new(FlattenLayer::new(format!("F{n_flat}")))
            }
            ArchToken::Activation(i) => {
                let name = format!("A{i}");
                match kind {
                    NetworkKind::Ann => Box::new(ActivationLayer::new(name, neuron.sigma)),
                    NetworkKind::Snn => Box::new(
                        SpikingActivationLayer::new(name, SpikeKind::Lif, *neuron)
                            .with_gate_mode(gate_mode)
                            .with_detached_reset(detach_reset),
                    ),
                    NetworkKind::Vsnn => Box::new(
                        SpikingActivationLayer::new(name, SpikeKind::Vsn, *neuron)
                            .with_gate_mode(gate_mode)
                            .with_detached_reset(detach_reset),
                    ),
                }
            }
            ArchToken::Softmax => {
                classification = true;
                continue;
            }
        };
        shape = layer.output_shape(&shape)?;
        layers.push(layer);
    }
    if shape.len() != 2 {
        return Err(Error::Config(format!(
            "network output must be flat, got shape {:?}",
            &shape[1..]
        )));
    }
    let head_len = layers
        .iter()
        .rposition(|l| l.is_spiking())
        .map(|i| i + 1)
        .unwrap_or(0);
    Ok(SequentialNetwork {
        layers,
        head_len,
        n_sts,
        readout: Readout::MeanOverSts,
        classification,
        input_shape: arch.input_shape().to_vec(),
        arch: arch.clone(),
        kind,
        last_head_outputs: Vec::new(),
    })
}

impl SequentialNetwork {
    pub fn n_sts(&self) -> usize {
        self.n_sts
    }

    pub fn is_classification(&self) -> bool {
        self.classification
    }

    pub fn kind(&self) -> NetworkKind {
        self.kind
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn with_readout(mut self, readout: Readout) -> SequentialNetwork {
        self.readout = readout;
        self
    }

    pub fn layer_descs(&self) -> Vec<(String, LayerDesc)> {
        self.layers
            .iter()
            .map(|l| (l.name().to_string(), l.describe()))
            .collect()
    }

    pub fn head_len(&self) -> usize {
        self.head_len
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l.describe() {
                LayerDesc::Dense { weights, bias }
                | LayerDesc::Conv {
                    kernels: weights,
                    bias,
                } => weights.numel() + bias.numel(),
                _ => 0,
            })
            .sum()
    }

    /// Runs the network on an encoded input train of shape
    /// `[n_sts, batch, features...]` and returns `[batch, n_out]`.
    pub fn forward(&mut self, input_train: &Tensor) -> Result<Tensor> {
        let shape = input_train.shape();
        let expected: Vec<usize> = self.input_shape.clone();
        if shape.first() != Some(&self.n_sts) {
            return Err(Error::Config(format!(
                "input train has {:?} steps, network expects {}",
                shape.first(),
                self.n_sts
            )));
        }
        if shape.len() != expected.len() + 2 || shape[2..] != expected[..] {
            return Err(Error::dim(format!(
                "input train shape {shape:?}, expected [{}, batch, {expected:?}]",
                self.n_sts
            )));
        }
        for layer in &mut self.layers {
            layer.begin_pass();
        }
        let (head, tail) = self.layers.split_at_mut(self.head_len);
        let mut head_outputs = Vec::with_capacity(self.n_sts);
        for t in 0..self.n_sts {
            let mut x = input_train.index_axis0(t)?;
            for layer in head.iter_mut() {
                x = layer.forward_step(t, &x)?;
            }
            head_outputs.push(x);
        }
        let mut x = match self.readout {
            Readout::MeanOverSts => {
                let mut acc = head_outputs[0].clone();
                for part in &head_outputs[1..] {
                    acc.add_assign(part)?;
                }
                acc.scale(1.0 / self.n_sts as f64)?
            }
            Readout::LastStep => head_outputs.last().expect("n_sts >= 1").clone(),
        };
        self.last_head_outputs = head_outputs;
        for layer in tail.iter_mut() {
            x = layer.forward_step(0, &x)?;
        }
        Ok(x)
    }

    /// Backpropagates `dLoss/doutput`, accumulating parameter gradients.
    pub fn backward(&mut self, upstream: &Tensor) -> Result<()> {
        if self.last_head_outputs.is_empty() && self.head_len > 0 {
            return Err(Error::Internal("backward without forward".into()));
        }
        let (head, tail) = self.layers.split_at_mut(self.head_len);
        let mut g = upstream.clone();
        for layer in tail.iter_mut().rev() {
            g = layer.backward_step(0, &g)?;
        }
        match self.readout {
            Readout::MeanOverSts => {
                let per_step = g.scale(1.0 / self.n_sts as f64)?;
                for t in (0..self.n_sts).rev() {
                    let mut gt = per_step.clone();
                    for layer in head.iter_mut().rev() {
                        gt = layer.backward_step(t, &gt)?;
                    }
                }
            }
            Readout::LastStep => {
                let zero = g.scale(0.0)?;
                for t in (0..self.n_sts).rev() {
                    let mut gt = if t + 1 == self.n_sts {
                        g.clone()
                    } else {
                        zero.clone()
                    };
                    for layer in head.iter_mut().rev() {
                        gt = layer.backward_step(t, &gt)?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for layer in &mut self.layers {
            layer.zero_grad();
        }
    }

    pub fn params_grads_mut(&mut self) -> Vec<ParamGrad<'_>> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.params_grads_mut())
            .collect()
    }

    pub fn spike_records(&self) -> Vec<SpikeTrainRecord> {
        self.layers
            .iter()
            .filter_map(|l| l.spike_record())
            .collect()
    }

    pub fn reset_spike_records(&mut self) {
        for layer in &mut self.layers {
            layer.reset_spike_record();
        }
    }

    /// Parameter tensors flattened in layer order, for model files.
    pub fn export_params(&self) -> Vec<Vec<f64>> {
        self.layers
            .iter()
            .flat_map(|l| match l.describe() {
                LayerDesc::Dense { weights, bias }
                | LayerDesc::Conv {
                    kernels: weights,
                    bias,
                } => {
                    vec![weights.into_data(), bias.into_data()]
                }
                _ => vec![],
            })
            .collect()
    }

    pub fn import_params(&mut self, params: &[Vec<f64>]) -> Result<()> {
        let mut slots = self.params_grads_mut();
        if slots.len() != params.len() {
            return Err(Error::Config(format!(
                "model file has {} parameter tensors, network has {}",
                params.len(),
                slots.len()
            )));
        }
        for (slot, values) in slots.iter_mut().zip(params) {
            if slot.param.numel() != values.len() {
                return Err(Error::Config(format!(
                    "parameter '{}' has {} values in model file, expected {}",
                    slot.name,
                    values.len(),
                    slot.param.numel()
                )));
            }
            slot.param.data_mut().copy_from_slice(values);
            slot.param.check_finite()?;
        }
        Ok(())
    }

    /// Source-node groups for the synaptic energy model: each
    /// parameterized layer paired with the activity of whatever feeds it.
    /// `s_map` holds the recorded spiking percentage per spiking layer.
    pub fn energy_topology(&self, s_map: &BTreeMap<String, f64>) -> Result<Vec<EnergySegment>> {
        let mut segments = Vec::new();
        let mut shape: Vec<usize> = std::iter::once(1)
            .chain(self.input_shape.iter().copied())
            .collect();
        // activity of the most recent producer feeding the next layer
        let mut source: (String, Activity) = ("I".to_string(), Activity::AlwaysOn);
        for layer in &self.layers {
            let desc = layer.describe();
            match &desc {
                LayerDesc::Dense { weights, .. } => {
                    segments.push(EnergySegment {
                        layer: format!("{} -> {}", source.0, layer.name()),
                        n_nodes: shape[1..].iter().product::<usize>() as f64,
                        mean_targets: dense_mean_targets(weights.shape()[0]),
                        activity: source.1,
                    });
                    source = (layer.name().to_string(), Activity::AlwaysOn);
                }
                LayerDesc::Conv { kernels, .. } => {
                    let out = layer.output_shape(&shape)?;
                    let (h, l) = (shape[2], shape[3]);
                    let (ho, lo) = (out[2], out[3]);
                    let k = kernels.shape()[2];
                    segments.push(EnergySegment {
                        layer: format!("{} -> {}", source.0, layer.name()),
                        n_nodes: shape[1..].iter().product::<usize>() as f64,
                        mean_targets: conv_mean_targets(l, h, k, k, lo, ho, kernels.shape()[0])?,
                        activity: source.1,
                    });
                    source = (layer.name().to_string(), Activity::AlwaysOn);
                }
                LayerDesc::Spiking { .. } => {
                    let s = *s_map.get(layer.name()).ok_or_else(|| {
                        Error::Config(format!(
                            "no recorded spiking activity for layer {}",
                            layer.name()
                        ))
                    })?;
                    source = (layer.name().to_string(), Activity::Spiking(s));
                }
                LayerDesc::Activation(_) => {
                    source = (layer.name().to_string(), Activity::AlwaysOn);
                }
                // pooling and flattening only reshape the source group
                LayerDesc::MaxPool | LayerDesc::Flatten => {}
            }
            shape = layer.output_shape(&shape)?;
        }
        Ok(segments)
    }
}
