//! Trainable network layers with explicit forward/backward rules.
//!
//! Every layer implements the [`Layer`] trait; networks hold them as
//! trait objects. A forward pass over a batch runs as a sequence of spike
//! time steps (STS): `forward_step` is called once per step in increasing
//! order, `backward_step` once per step in decreasing order. Layers cache
//! whatever their backward rule needs per step.

mod activation;
mod conv;
mod dense;
mod flatten;
mod loss;
mod pool;
mod spiking;

pub use activation::ActivationLayer;
pub use conv::ConvLayer;
pub use dense::DenseLayer;
pub use flatten::FlattenLayer;
pub use loss::{mse_loss, softmax_cross_entropy, softmax_rows};
pub use pool::MaxPoolLayer;
pub use spiking::SpikingActivationLayer;

use crate::error::Result;
use crate::metrics::SpikeTrainRecord;
use crate::neuron::{Activation, SpikeKind, SpikingNeuronConfig};
use crate::tensor::Tensor;

/// Mutable view of one parameter tensor and its gradient accumulator.
pub struct ParamGrad<'a> {
    pub name: &'static str,
    pub param: &'a mut Tensor,
    pub grad: &'a mut Tensor,
}

/// Structural description of a layer, with parameter copies. Consumed by
/// the reference implementations in the oracle module and by the energy
/// topology builder; production forward/backward never reads it.
#[derive(Debug, Clone)]
pub enum LayerDesc {
    Dense {
        weights: Tensor,
        bias: Tensor,
    },
    Conv {
        kernels: Tensor,
        bias: Tensor,
    },
    MaxPool,
    Flatten,
    Activation(Activation),
    Spiking {
        cfg: SpikingNeuronConfig,
        kind: SpikeKind,
    },
}

pub trait Layer {
    fn name(&self) -> &str;

    /// Resets step caches and any neuron state. Called at the start of
    /// every forward pass over a batch.
    fn begin_pass(&mut self);

    /// Shapes are `[batch, features...]`; `step` counts STSs from 0 in
    /// increasing order within one pass.
    fn forward_step(&mut self, step: usize, x: &Tensor) -> Result<Tensor>;

    /// Steps must arrive in decreasing order, mirroring the forward
    /// unrolling. Accumulates parameter gradients and returns the
    /// adjoint with respect to this step's input.
    fn backward_step(&mut self, step: usize, upstream: &Tensor) -> Result<Tensor>;

    /// Output shape for a given `[batch, features...]` input shape.
    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>>;

    fn params_grads_mut(&mut self) -> Vec<ParamGrad<'_>> {
        Vec::new()
    }

    fn zero_grad(&mut self) {}

    fn is_spiking(&self) -> bool {
        false
    }

    /// Spiking-activity counters accumulated since the last reset.
    fn spike_record(&self) -> Option<SpikeTrainRecord> {
        None
    }

    fn reset_spike_record(&mut self) {}

    fn describe(&self) -> LayerDesc;
}
