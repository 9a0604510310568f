//! Digital over-the-air computation for two-user federated aggregation.
//!
//! Two devices quantize their model parameters, convolutionally encode them
//! and transmit BPSK-OFDM frames at the same time, with only their preambles
//! and pilots kept orthogonal. The server never separates the users: it runs
//! a Viterbi search on the product of the two encoders' trellises and reads
//! off the position-wise arithmetic sum of the source bits, which decodes to
//! the sum of the parameters.
//!
//! Modules, bottom up:
//!
//! - [`quantizer`]: parameters to bits and sum digits back to values.
//! - [`convcodec`]: encoder plus the full-state, reduced-state and
//!   parallel single-user sum decoders.
//! - [`ofdm`]: frame layout, modulation, channel estimation, phase tracking.
//! - [`channel`]: asynchronous two-user uplink with AWGN.
//! - [`protocol`]: one aggregation round, digital and analog.
//! - [`feel`]: a small federated learning loop on top of the rounds.

pub mod channel;
pub mod convcodec;
pub mod error;
pub mod feel;
pub mod ofdm;
pub mod protocol;
pub mod quantizer;
pub mod rng;

pub use error::{Error, Result};
