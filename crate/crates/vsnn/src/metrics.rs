//! Spiking-activity and synaptic-energy accounting.
//!
//! Energy is modeled per synaptic operation: reading neuron state and
//! multiplication cost 5E each, addition and writing state cost E each,
//! so one target update costs 12E and a node spends
//! `12E * N_mean_targets * N_avg_spikes` over a spike train. The ratio
//! `E_r` compares that spend against 100% spiking activity; the constant
//! E cancels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Spike counters for one spiking layer, accumulated over forward passes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpikeTrainRecord {
    pub layer: String,
    pub n_sts: usize,
    /// Total spikes fired over all STSs and batch elements.
    pub spikes_fired: f64,
    /// Possible spike sites in one STS (neurons x samples seen).
    pub spike_sites: f64,
}

/// Average percentage of spikes: `100 * fired / (n_sts * sites)`.
pub fn compute_s_tilde(rec: &SpikeTrainRecord) -> Result<f64> {
    let denom = rec.n_sts as f64 * rec.spike_sites;
    if denom == 0.0 {
        return Err(Error::Data(format!(
            "layer {}: no recorded spike sites",
            rec.layer
        )));
    }
    Ok(100.0 * rec.spikes_fired / denom)
}

/// Mean targets of a node densely connected to a layer of `next_width`
/// nodes.
pub fn dense_mean_targets(next_width: usize) -> f64 {
    next_width as f64
}

/// Mean targets of one input element of a valid (stride 1, no padding)
/// convolution: `L_k*H_k*(L*H)/(L_o*H_o)`, times the output channels.
pub fn conv_mean_targets(
    l: usize,
    h: usize,
    l_k: usize,
    h_k: usize,
    l_o: usize,
    h_o: usize,
    c_out: usize,
) -> Result<f64> {
    if l_o != l - l_k + 1 || h_o != h - h_k + 1 {
        return Err(Error::dim(format!(
            "inconsistent conv dims: {l}x{h} input, {l_k}x{h_k} kernel, {l_o}x{h_o} output"
        )));
    }
    Ok((l_k * h_k) as f64 * (l * h) as f64 / (l_o * h_o) as f64 * c_out as f64)
}

/// Whether a group of source nodes fires on every step or at a recorded
/// average rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Activity {
    AlwaysOn,
    /// Layer-average spiking percentage in `[0,100]`.
    Spiking(f64),
}

/// One group of source nodes with a common mean-target count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergySegment {
    pub layer: String,
    pub n_nodes: f64,
    pub mean_targets: f64,
    pub activity: Activity,
}

impl EnergySegment {
    fn avg_spikes(&self, n_sts: f64) -> f64 {
        match self.activity {
            Activity::AlwaysOn => n_sts,
            Activity::Spiking(s) => s / 100.0 * n_sts,
        }
    }
}

/// Ratio of synaptic-operation energy at the observed spiking activity to
/// the energy at 100% activity. Always-on segments contribute equally to
/// numerator and denominator.
pub fn compute_energy_ratio(segments: &[EnergySegment], n_sts: usize) -> Result<f64> {
    if segments.is_empty() {
        return Err(Error::Config("energy topology has no segments".into()));
    }
    let n_sts = n_sts as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for seg in segments {
        if let Activity::Spiking(s) = seg.activity {
            if !(0.0..=100.0).contains(&s) {
                return Err(Error::Config(format!(
                    "segment {}: spiking activity {s} outside [0,100]",
                    seg.layer
                )));
            }
        }
        let base = 12.0 * seg.n_nodes * seg.mean_targets;
        num += base * seg.avg_spikes(n_sts);
        den += base * n_sts;
    }
    if den == 0.0 {
        return Err(Error::Config(
            "energy topology has zero baseline energy".into(),
        ));
    }
    Ok(num / den)
}

/// Normalized mean square error `sum((pred-truth)^2) / sum(truth^2)`.
/// The null predictor scores exactly 1.
pub fn compute_nmse(pred: &Tensor, truth: &Tensor) -> Result<f64> {
    if pred.shape() != truth.shape() {
        return Err(Error::dim(format!(
            "nmse shape mismatch: {:?} vs {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    let denom: f64 = truth.data().iter().map(|v| v * v).sum();
    if denom == 0.0 {
        return Err(Error::Data("nmse: ground truth has zero norm".into()));
    }
    let num: f64 = pred
        .data()
        .iter()
        .zip(truth.data())
        .map(|(&p, &t)| (p - t) * (p - t))
        .sum();
    Ok(num / denom)
}
