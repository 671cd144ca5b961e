//! Quantum Angle Generator toolkit.
//!
//! A variational-circuit generative model that encodes each pixel energy in
//! the measured rotation angle of one qubit. The crate bundles a statevector
//! simulator with trajectory noise, the ansatz zoo, the angle codec, the
//! MMD/correlation objectives, an SPSA trainer, circuit metrics and the
//! shower-image evaluation suite.

pub mod circuits;
pub mod codec;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod metrics;
pub mod objectives;
pub mod sim;
pub mod train;
pub mod util;

pub use error::{QagError, Result};
