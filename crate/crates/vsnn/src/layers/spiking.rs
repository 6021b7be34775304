use super::{Layer, LayerDesc};
use crate::error::{Error, Result};
use crate::metrics::SpikeTrainRecord;
use crate::neuron::{
    hard_fire, smoothed_gate, spike_backward_step, GateMode, SpikeKind, SpikeStepCache,
    SpikingNeuronConfig,
};
use crate::tensor::Tensor;

/// Spiking activation layer: LIF (binary output) or VSN (graded output).
///
/// One membrane accumulator per neuron per batch element, carried across
/// the spike time steps of a pass and discarded between passes. The
/// backward pass unrolls the layer's own STS chain; `backward_step` must
/// be called in decreasing step order.
pub struct SpikingActivationLayer {
    name: String,
    cfg: SpikingNeuronConfig,
    kind: SpikeKind,
    mode: GateMode,
    detach_reset: bool,
    membrane: Vec<f64>,
    caches: Vec<SpikeStepCache>,
    carry: Vec<f64>,
    // spiking-activity counters, accumulated until reset
    fired: f64,
    sites: f64,
    n_sts_seen: usize,
}

impl SpikingActivationLayer {
    pub fn new(
        name: impl Into<String>,
        kind: SpikeKind,
        cfg: SpikingNeuronConfig,
    ) -> SpikingActivationLayer {
        SpikingActivationLayer {
            name: name.into(),
            cfg,
            kind,
            mode: GateMode::Hard,
            detach_reset: false,
            membrane: Vec::new(),
            caches: Vec::new(),
            carry: Vec::new(),
            fired: 0.0,
            sites: 0.0,
            n_sts_seen: 0,
        }
    }

    /// Replace the hard threshold by the smooth gate. Only gradient
    /// checks use this; it makes the whole forward differentiable.
    pub fn with_gate_mode(mut self, mode: GateMode) -> SpikingActivationLayer {
        self.mode = mode;
        self
    }

    /// Drop the reset contribution from the backward chain.
    pub fn with_detached_reset(mut self, detach: bool) -> SpikingActivationLayer {
        self.detach_reset = detach;
        self
    }

    pub fn config(&self) -> &SpikingNeuronConfig {
        &self.cfg
    }

    pub fn spike_kind(&self) -> SpikeKind {
        self.kind
    }
}

impl Layer for SpikingActivationLayer {
    fn name(&self) -> &str {
        &self.name
    }

    fn begin_pass(&mut self) {
        self.caches.clear();
        self.membrane.clear();
    }

    fn forward_step(&mut self, step: usize, z: &Tensor) -> Result<Tensor> {
        if step != self.caches.len() {
            return Err(Error::Internal(format!(
                "spiking {}: step {step} out of order",
                self.name
            )));
        }
        let n = z.numel();
        if step == 0 {
            self.membrane = vec![0.0; n];
            self.sites += n as f64;
        } else if self.membrane.len() != n {
            return Err(Error::dim(format!(
                "spiking {}: input size changed mid-pass ({} vs {n})",
                self.name,
                self.membrane.len()
            )));
        }
        let mut gate = Tensor::zeros(z.shape());
        let mut m_pre = Tensor::zeros(z.shape());
        match self.mode {
            GateMode::Hard => {
                hard_fire(
                    &mut self.membrane,
                    z.data(),
                    self.cfg.beta,
                    self.cfg.threshold,
                    gate.data_mut(),
                    m_pre.data_mut(),
                );
                self.fired += gate.sum();
            }
            GateMode::Smoothed => {
                let gd = gate.data_mut();
                let md = m_pre.data_mut();
                for i in 0..n {
                    let m = self.cfg.beta * self.membrane[i] + z.data()[i];
                    let g = smoothed_gate(m - self.cfg.threshold, self.cfg.surrogate_slope);
                    md[i] = m;
                    gd[i] = g;
                    self.membrane[i] = m * (1.0 - g);
                }
            }
        }
        let out = match self.kind {
            SpikeKind::Lif => gate.clone(),
            SpikeKind::Vsn => self.cfg.sigma.apply_tensor(&z.mul(&gate)?)?,
        };
        self.n_sts_seen = self.n_sts_seen.max(step + 1);
        self.caches.push(SpikeStepCache {
            z: z.clone(),
            gate,
            membrane_pre_reset: m_pre,
        });
        Ok(out)
    }

    fn backward_step(&mut self, step: usize, upstream: &Tensor) -> Result<Tensor> {
        let cache = self.caches.get(step).ok_or_else(|| {
            Error::Internal(format!("spiking {}: backward before forward", self.name))
        })?;
        if step + 1 == self.caches.len() {
            // entering a fresh backward sweep
            self.carry = vec![0.0; cache.z.numel()];
        }
        spike_backward_step(
            cache,
            upstream,
            &mut self.carry,
            &self.cfg,
            self.kind,
            self.mode,
            self.detach_reset,
        )
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        Ok(input.to_vec())
    }

    fn is_spiking(&self) -> bool {
        true
    }

    fn spike_record(&self) -> Option<SpikeTrainRecord> {
        Some(SpikeTrainRecord {
            layer: self.name.clone(),
            n_sts: self.n_sts_seen.max(1),
            spikes_fired: self.fired,
            spike_sites: self.sites,
        })
    }

    fn reset_spike_record(&mut self) {
        self.fired = 0.0;
        self.sites = 0.0;
    }

    fn describe(&self) -> LayerDesc {
        LayerDesc::Spiking {
            cfg: self.cfg,
            kind: self.kind,
        }
    }
}
