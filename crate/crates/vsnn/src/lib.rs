//! Spiking neural network training with variable spiking neurons.
//!
//! The library implements leaky integrate-and-fire (LIF) and variable
//! spiking neuron (VSN) activations with surrogate-gradient
//! backpropagation through time, plus the spiking-activity and synaptic
//! energy accounting used to compare them against conventional networks.
//!
//! Everything is f64, single threaded and seeded: two runs with the same
//! configuration and seeds produce bit-identical results.

pub mod config;
pub mod data;
pub mod encoding;
pub mod error;
pub mod layers;
pub mod metrics;
pub mod network;
pub mod neuron;
pub mod oracle;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use tensor::Tensor;
