//! Spiking neuron models and their backward rules.
//!
//! Two stateful activation units are provided: the leaky integrate-and-fire
//! neuron (binary spikes) and the variable spiking neuron (graded spikes,
//! a continuous activation gated by the LIF firing decision). The forward
//! threshold is the hard Heaviside; only the backward pass substitutes the
//! fast-sigmoid surrogate derivative.

use serde::{Deserialize, Serialize};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Continuous activation choices. All of them satisfy `sigma(0) = 0`,
/// which the variable spiking neuron requires so that non-spiking neurons
/// emit exactly zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Relu,
    Gelu,
    Tanh,
}

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Linear => x,
            Activation::Relu => x.max(0.0),
            // Exact Gaussian CDF form, not the tanh approximation.
            Activation::Gelu => x * phi(x),
            Activation::Tanh => x.tanh(),
        }
    }

    pub fn grad(self, x: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Gelu => phi(x) + x * INV_SQRT_2PI * (-0.5 * x * x).exp(),
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
        }
    }

    pub fn apply_tensor(self, x: &Tensor) -> Result<Tensor> {
        x.map(|v| self.apply(v))
    }

    pub fn grad_tensor(self, x: &Tensor) -> Result<Tensor> {
        x.map(|v| self.grad(v))
    }
}

/// Standard normal CDF.
fn phi(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / SQRT_2))
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Activation> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Activation::Linear),
            "relu" => Ok(Activation::Relu),
            "gelu" => Ok(Activation::Gelu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::Config(format!("unknown activation '{other}'"))),
        }
    }
}

fn default_slope() -> f64 {
    25.0
}

/// Parameters shared by every spiking neuron in a layer (and, in the
/// experiments here, by every spiking layer of a network).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpikingNeuronConfig {
    /// Leakage factor applied to the membrane each step, in `[0,1]`.
    pub beta: f64,
    /// Firing threshold, > 0.
    pub threshold: f64,
    /// Fast-sigmoid slope used by the surrogate derivative.
    #[serde(default = "default_slope")]
    pub surrogate_slope: f64,
    /// Continuous activation applied to graded spikes.
    pub sigma: Activation,
}

impl SpikingNeuronConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!("beta {} outside [0,1]", self.beta)));
        }
        if self.threshold <= 0.0 || self.threshold.is_nan() {
            return Err(Error::Config(format!(
                "threshold {} must be > 0",
                self.threshold
            )));
        }
        if self.surrogate_slope <= 0.0 || self.surrogate_slope.is_nan() {
            return Err(Error::Config(format!(
                "surrogate slope {} must be > 0",
                self.surrogate_slope
            )));
        }
        if self.sigma.apply(0.0) != 0.0 {
            return Err(Error::Config(format!(
                "activation {:?} violates sigma(0) = 0",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// Per-layer membrane state carried between spike time steps.
#[derive(Debug, Clone)]
pub struct NeuronLayerState {
    /// Post-reset membrane values, one per neuron per batch element.
    pub membrane: Tensor,
    /// Binary spikes emitted at the previous step.
    pub last_binary_spikes: Tensor,
}

impl NeuronLayerState {
    pub fn zeros(shape: &[usize]) -> NeuronLayerState {
        NeuronLayerState {
            membrane: Tensor::zeros(shape),
            last_binary_spikes: Tensor::zeros(shape),
        }
    }
}

fn check_state_shape(state: &NeuronLayerState, z: &Tensor) -> Result<()> {
    if state.membrane.shape() != z.shape() {
        return Err(Error::dim(format!(
            "input shape {:?} does not match membrane shape {:?}",
            z.shape(),
            state.membrane.shape()
        )));
    }
    Ok(())
}

/// One LIF step: integrate, fire where `M >= T`, reset fired membranes to
/// zero for the next step. Returns the binary spike tensor.
pub fn lif_step(
    state: &mut NeuronLayerState,
    z: &Tensor,
    cfg: &SpikingNeuronConfig,
) -> Result<Tensor> {
    check_state_shape(state, z)?;
    let mut spikes = Tensor::zeros(z.shape());
    let mut m_pre = vec![0.0f64; z.numel()];
    hard_fire(
        state.membrane.data_mut(),
        z.data(),
        cfg.beta,
        cfg.threshold,
        spikes.data_mut(),
        &mut m_pre,
    );
    state.last_binary_spikes = spikes.clone();
    Ok(spikes)
}

/// Integrate `beta*M + z`, fire where the pre-reset membrane reaches the
/// threshold, and reset fired membranes to zero. Writes binary spikes and
/// the pre-reset membrane (needed by the backward pass).
pub fn hard_fire(
    membrane: &mut [f64],
    z: &[f64],
    beta: f64,
    threshold: f64,
    spikes: &mut [f64],
    m_pre: &mut [f64],
) {
    for i in 0..membrane.len() {
        let m = beta * membrane[i] + z[i];
        m_pre[i] = m;
        if m >= threshold {
            spikes[i] = 1.0;
            membrane[i] = 0.0;
        } else {
            spikes[i] = 0.0;
            membrane[i] = m;
        }
    }
}

/// One VSN step: the binary firing decision of [`lif_step`] gates the
/// continuous activation, `y = sigma(z * spike)`.
pub fn vsn_step(
    state: &mut NeuronLayerState,
    z: &Tensor,
    cfg: &SpikingNeuronConfig,
) -> Result<Tensor> {
    let spikes = lif_step(state, z, cfg)?;
    let gated = z.mul(&spikes)?;
    cfg.sigma.apply_tensor(&gated)
}

/// Fast-sigmoid surrogate for the threshold derivative,
/// `1 / (1 + slope*|m - T|)^2`.
pub fn surrogate_threshold_grad(m_minus_t: &Tensor, slope: f64) -> Result<Tensor> {
    m_minus_t.map(|x| surrogate_scalar(x, slope))
}

pub fn surrogate_scalar(x: f64, slope: f64) -> f64 {
    let d = 1.0 + slope * x.abs();
    1.0 / (d * d)
}

/// Smooth stand-in for the Heaviside gate: the shifted, slope-`k` fast
/// sigmoid `(1 + k*x/(1+k|x|)) / 2`. It is 1/2 at the threshold and
/// converges to the hard gate as `k*x` grows.
pub fn smoothed_gate(x: f64, slope: f64) -> f64 {
    0.5 * (1.0 + slope * x / (1.0 + slope * x.abs()))
}

/// Derivative of [`smoothed_gate`]: `(slope/2) / (1+k|x|)^2`.
pub fn smoothed_gate_grad(x: f64, slope: f64) -> f64 {
    0.5 * slope * surrogate_scalar(x, slope)
}

/// Which derivative stands in for the hard threshold in the backward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateMode {
    /// Hard Heaviside forward, fast-sigmoid surrogate backward.
    Hard,
    /// Fully smooth gate (used by gradient checks): forward gates with
    /// [`smoothed_gate`] and backward uses its exact derivative.
    Smoothed,
}

impl GateMode {
    pub fn gate_grad(self, m_minus_t: f64, slope: f64) -> f64 {
        match self {
            GateMode::Hard => surrogate_scalar(m_minus_t, slope),
            GateMode::Smoothed => smoothed_gate_grad(m_minus_t, slope),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpikeKind {
    Lif,
    Vsn,
}

impl SpikeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SpikeKind::Lif => "LIF",
            SpikeKind::Vsn => "VSN",
        }
    }
}

/// Tensors saved during the forward pass of one spike time step, consumed
/// by [`vsn_backward`].
#[derive(Debug, Clone)]
pub struct SpikeStepCache {
    /// Layer input at this step.
    pub z: Tensor,
    /// Gate values: binary spikes in hard mode, graded in smoothed mode.
    pub gate: Tensor,
    /// Membrane after integration, before the post-spike reset.
    pub membrane_pre_reset: Tensor,
}

/// One reverse step of the spike-time-step chain.
///
/// `carry` holds `dLoss/dM` of the following step and is updated in
/// place. The membrane recurrence is differentiated through the
/// equivalent form `M(t+1) = beta*M(t)*(1-gate(t)) + z(t+1)`, so the
/// reset contributes both `beta*(1-gate)` on the membrane path and
/// `-beta*M_pre` on the gate path. Setting `detach_reset` drops the gate
/// path of the reset.
pub fn spike_backward_step(
    step: &SpikeStepCache,
    upstream: &Tensor,
    carry: &mut [f64],
    cfg: &SpikingNeuronConfig,
    kind: SpikeKind,
    mode: GateMode,
    detach_reset: bool,
) -> Result<Tensor> {
    let n = step.z.numel();
    if upstream.numel() != n || carry.len() != n {
        return Err(Error::Internal(format!(
            "backward shape mismatch: step {n}, upstream {}, carry {}",
            upstream.numel(),
            carry.len()
        )));
    }
    let z = step.z.data();
    let gate = step.gate.data();
    let m_pre = step.membrane_pre_reset.data();
    let up = upstream.data();
    let mut dz_t = Tensor::zeros(step.z.shape());
    let dz = dz_t.data_mut();
    for i in 0..n {
        let s = mode.gate_grad(m_pre[i] - cfg.threshold, cfg.surrogate_slope);
        let (direct, mut d_gate) = match kind {
            SpikeKind::Vsn => {
                let a = up[i] * cfg.sigma.grad(z[i] * gate[i]);
                (a * gate[i], a * z[i])
            }
            SpikeKind::Lif => (0.0, up[i]),
        };
        if !detach_reset {
            d_gate += carry[i] * (-cfg.beta * m_pre[i]);
        }
        let d_m = d_gate * s + carry[i] * cfg.beta * (1.0 - gate[i]);
        dz[i] = direct + d_m;
        carry[i] = d_m;
    }
    dz_t.check_finite()?;
    Ok(dz_t)
}

/// Backpropagation through all saved spike time steps of one layer,
/// accumulated backward over STSs. Returns `dLoss/dz` per step.
pub fn vsn_backward(
    saved: &[SpikeStepCache],
    upstream: &[Tensor],
    cfg: &SpikingNeuronConfig,
    kind: SpikeKind,
    mode: GateMode,
    detach_reset: bool,
) -> Result<Vec<Tensor>> {
    if saved.is_empty() || saved.len() != upstream.len() {
        return Err(Error::Internal(format!(
            "saved {} steps, upstream {} steps",
            saved.len(),
            upstream.len()
        )));
    }
    let n = saved[0].z.numel();
    let mut carry = vec![0.0f64; n];
    let mut dz_steps = vec![Tensor::zeros(saved[0].z.shape()); saved.len()];
    for t in (0..saved.len()).rev() {
        dz_steps[t] = spike_backward_step(
            &saved[t],
            &upstream[t],
            &mut carry,
            cfg,
            kind,
            mode,
            detach_reset,
        )?;
    }
    Ok(dz_steps)
}
