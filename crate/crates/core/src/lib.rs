//! Mutual-information-maximizing quantization.
//!
//! The crate is layered bottom-up:
//!
//! * [`info`]: exact finite-alphabet probability and information arithmetic;
//! * [`channel`]: discrete memoryless channels, including clipped and
//!   discretized AWGN channels with ASK/BPSK inputs;
//! * [`ib`]: quantizer designers (iterative and agglomerative information
//!   bottleneck, KL-means, and the DP optimum for binary inputs);
//! * [`maxlut`]: mutual-information-maximizing lookup tables for check and
//!   variable nodes;
//! * [`ldpc`]: regular LDPC codes, discrete density evolution, LUT /
//!   min-sum / belief-propagation decoders and a BER harness.

pub mod channel;
pub mod error;
pub mod ib;
pub mod info;
pub mod ldpc;
pub mod maxlut;
pub mod quantizer;

pub use error::{Error, Result};
pub use info::{ConditionalDist, JointXY, Pmf};
pub use quantizer::Quantizer;
