//! Statevector simulation, shot sampling and trajectory noise.

mod gate;
mod noise;
mod sampling;
mod state;

pub use gate::{Circuit, Gate, GateKind, Instruction};
pub use noise::NoiseModel;
pub use sampling::{sample_counts, sample_counts_with_rng};
pub use state::{apply_gate, run_circuit, run_circuit_from, run_gates, Pauli, StateVector, MAX_QUBITS};
