//! Quantum long-attention memory (QLAM).
//!
//! A recurrent sequence classifier whose memory is an `n`-qubit statevector.
//! Each token is angle-encoded and followed by a shared parameterized circuit;
//! learned queries are decoded into Hermitian Pauli observables whose
//! expectations form the readout.

pub mod checkpoint;
pub mod circuits;
pub mod data;
pub mod error;
pub mod gradients;
pub mod model;
pub mod nn;
pub mod observables;
pub mod rng;
pub mod statevector;
pub mod trainer;

pub use circuits::{AnsatzConfig, CircuitParams, Entangler};
pub use data::{DatasetKind, FoldPlan, SequenceSample};
pub use error::{ErrorKind, QlamError, Result};
pub use gradients::{loss_and_grad, GradBundle};
pub use model::{QlamConfig, QlamModel, QlamParams, ReadoutTrace};
pub use nn::{AdamState, ElmanBaseline, ParamSet};
pub use observables::{
    default_pauli_pool, Observable, Pauli, PauliString, ReadoutMode, ShotConfig, ShotSite,
};
pub use statevector::{Gate1Q, StateVector, MAX_QUBITS};
pub use trainer::{MetricsRow, ModelKind, Network, SplitMode, TrainConfig, TrainOutcome};
