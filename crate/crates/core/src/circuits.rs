//! Step unitary `U(x_t, θ) = U_var(θ) · U_enc(x_t)`.
//!
//! `U_enc` applies `RY(e_j)` to qubit `j`, one embedding angle per qubit.
//! `U_var` is a hardware-efficient ansatz: per layer, `RY` then `RZ` on every
//! qubit followed by a CNOT entangler. Angle `θ[(layer·n + q)·2 + k]` drives the
//! `RY` (`k = 0`) or `RZ` (`k = 1`) on qubit `q`.

use serde::{Deserialize, Serialize};

use crate::error::{QlamError, Result};
use crate::statevector::StateVector;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Entangler {
    /// CNOT `j → (j+1) mod n` for every `j`.
    #[default]
    Ring,
    /// CNOT `j → j+1` for `j < n-1`.
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzConfig {
    pub n_qubits: usize,
    pub n_layers: usize,
    #[serde(default)]
    pub entangler: Entangler,
}

impl AnsatzConfig {
    pub fn new(n_qubits: usize, n_layers: usize, entangler: Entangler) -> Result<Self> {
        let cfg = Self {
            n_qubits,
            n_layers,
            entangler,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > crate::statevector::MAX_QUBITS {
            return Err(QlamError::Config(format!(
                "n_qubits must be in 1..={}, got {}",
                crate::statevector::MAX_QUBITS,
                self.n_qubits
            )));
        }
        if self.n_layers == 0 {
            return Err(QlamError::Config("n_layers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn params_per_layer(&self) -> usize {
        2 * self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.n_layers * self.params_per_layer()
    }

    pub fn theta_index(&self, layer: usize, qubit: usize, rotation: usize) -> usize {
        (layer * self.n_qubits + qubit) * 2 + rotation
    }

    fn entangler_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.n_qubits;
        match (n, self.entangler) {
            (1, _) => Vec::new(),
            (_, Entangler::Ring) => (0..n).map(|j| (j, (j + 1) % n)).collect(),
            (_, Entangler::Linear) => (0..n - 1).map(|j| (j, j + 1)).collect(),
        }
    }

    /// Gate sequence of `U_var(θ)` alone.
    pub fn ansatz_program(&self) -> Vec<GateOp> {
        let mut ops = Vec::with_capacity(self.n_layers * 4 * self.n_qubits);
        let pairs = self.entangler_pairs();
        for layer in 0..self.n_layers {
            for q in 0..self.n_qubits {
                ops.push(GateOp::Ry {
                    qubit: q,
                    angle: AngleRef::Theta(self.theta_index(layer, q, 0)),
                });
                ops.push(GateOp::Rz {
                    qubit: q,
                    angle: AngleRef::Theta(self.theta_index(layer, q, 1)),
                });
            }
            ops.extend(
                pairs
                    .iter()
                    .map(|&(control, target)| GateOp::Cnot { control, target }),
            );
        }
        ops
    }

    /// Gate sequence of one full step, encoding first.
    pub fn step_program(&self) -> Vec<GateOp> {
        let mut ops: Vec<GateOp> = (0..self.n_qubits)
            .map(|q| GateOp::Ry {
                qubit: q,
                angle: AngleRef::Encoding(q),
            })
            .collect();
        ops.extend(self.ansatz_program());
        ops
    }
}

/// Where a rotation angle comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AngleRef {
    /// Component of the token embedding.
    Encoding(usize),
    /// Trainable circuit angle.
    Theta(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateOp {
    Ry { qubit: usize, angle: AngleRef },
    Rz { qubit: usize, angle: AngleRef },
    Cnot { control: usize, target: usize },
}

impl GateOp {
    pub(crate) fn resolve(angle: AngleRef, embedding: &[f64], theta: &[f64]) -> f64 {
        match angle {
            AngleRef::Encoding(j) => embedding[j],
            AngleRef::Theta(k) => theta[k],
        }
    }

    pub(crate) fn apply(
        &self,
        state: &mut StateVector,
        embedding: &[f64],
        theta: &[f64],
    ) -> Result<()> {
        match *self {
            GateOp::Ry { qubit, angle } => {
                state.apply_ry(qubit, Self::resolve(angle, embedding, theta))
            }
            GateOp::Rz { qubit, angle } => {
                state.apply_rz(qubit, Self::resolve(angle, embedding, theta))
            }
            GateOp::Cnot { control, target } => state.apply_cnot(control, target),
        }
    }

    pub(crate) fn apply_inverse(
        &self,
        state: &mut StateVector,
        embedding: &[f64],
        theta: &[f64],
    ) -> Result<()> {
        match *self {
            GateOp::Ry { qubit, angle } => {
                state.apply_ry(qubit, -Self::resolve(angle, embedding, theta))
            }
            GateOp::Rz { qubit, angle } => {
                state.apply_rz(qubit, -Self::resolve(angle, embedding, theta))
            }
            GateOp::Cnot { control, target } => state.apply_cnot(control, target),
        }
    }
}

/// Trainable angles of `U_var(θ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    pub theta: Vec<f64>,
}

impl CircuitParams {
    pub fn zeros(cfg: &AnsatzConfig) -> Self {
        Self {
            theta: vec![0.0; cfg.n_params()],
        }
    }

    pub fn validate(&self, cfg: &AnsatzConfig) -> Result<()> {
        if self.theta.len() != cfg.n_params() {
            return Err(QlamError::Shape(format!(
                "{} circuit angles for an ansatz with {} parameters",
                self.theta.len(),
                cfg.n_params()
            )));
        }
        if let Some((i, v)) = self.theta.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(QlamError::Numeric(format!(
                "circuit angle {i} is not finite: {v}"
            )));
        }
        Ok(())
    }
}

pub fn apply_encoding(state: &mut StateVector, embedding: &[f64]) -> Result<()> {
    if embedding.len() != state.n_qubits() {
        return Err(QlamError::Shape(format!(
            "embedding of length {} for {} qubits",
            embedding.len(),
            state.n_qubits()
        )));
    }
    for (q, &angle) in embedding.iter().enumerate() {
        state.apply_ry(q, angle)?;
    }
    Ok(())
}

pub fn apply_ansatz(
    state: &mut StateVector,
    cfg: &AnsatzConfig,
    params: &CircuitParams,
) -> Result<()> {
    check_register(state, cfg)?;
    params.validate(cfg)?;
    for op in cfg.ansatz_program() {
        op.apply(state, &[], &params.theta)?;
    }
    Ok(())
}

/// `|ψ⟩ ← U_var(θ) U_enc(e) |ψ⟩`.
pub fn step(
    state: &mut StateVector,
    embedding: &[f64],
    cfg: &AnsatzConfig,
    params: &CircuitParams,
) -> Result<()> {
    apply_encoding(state, embedding)?;
    apply_ansatz(state, cfg, params)
}

fn check_register(state: &StateVector, cfg: &AnsatzConfig) -> Result<()> {
    if state.n_qubits() != cfg.n_qubits {
        return Err(QlamError::Shape(format!(
            "ansatz for {} qubits applied to a {}-qubit state",
            cfg.n_qubits,
            state.n_qubits()
        )));
    }
    Ok(())
}

/// Runs a precompiled step program; the hot path of the recurrence.
pub(crate) fn run_program(
    state: &mut StateVector,
    program: &[GateOp],
    embedding: &[f64],
    theta: &[f64],
) -> Result<()> {
    for op in program {
        op.apply(state, embedding, theta)?;
    }
    Ok(())
}
