//! Dense statevector storage for the quantum memory and in-place gate kernels.
//!
//! Basis index `i` encodes the computational basis state `|i⟩` with qubit 0 as
//! the least-significant bit. Kernels walk amplitude pairs by stride and never
//! materialize a `2^n × 2^n` matrix.

use num_complex::Complex64;

use crate::error::{QlamError, Result};

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A single-qubit gate as a row-major 2×2 complex matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gate1Q {
    pub matrix: [[Complex64; 2]; 2],
}

impl Gate1Q {
    pub const fn new(matrix: [[Complex64; 2]; 2]) -> Self {
        Self { matrix }
    }

    pub fn identity() -> Self {
        Self::new([[ONE, ZERO], [ZERO, ONE]])
    }

    pub fn x() -> Self {
        Self::new([[ZERO, ONE], [ONE, ZERO]])
    }

    pub fn y() -> Self {
        let i = Complex64::i();
        Self::new([[ZERO, -i], [i, ZERO]])
    }

    pub fn z() -> Self {
        Self::new([[ONE, ZERO], [ZERO, -ONE]])
    }

    pub fn hadamard() -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::new([[h, h], [h, -h]])
    }

    /// `RY(a) = [[cos(a/2), -sin(a/2)], [sin(a/2), cos(a/2)]]`.
    pub fn ry(angle: f64) -> Self {
        let (s, c) = (angle / 2.0).sin_cos();
        Self::new([
            [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
            [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
        ])
    }

    /// `RZ(a) = diag(e^{-ia/2}, e^{+ia/2})`.
    pub fn rz(angle: f64) -> Self {
        let half = angle / 2.0;
        Self::new([
            [Complex64::from_polar(1.0, -half), ZERO],
            [ZERO, Complex64::from_polar(1.0, half)],
        ])
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.matrix;
        Self::new([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }

    /// Max-abs deviation of `M†M` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let m = &self.matrix;
        let mut worst = 0.0f64;
        for r in 0..2 {
            for c in 0..2 {
                let entry = m[0][r].conj() * m[0][c] + m[1][r].conj() * m[1][c];
                let expected = if r == c { ONE } else { ZERO };
                worst = worst.max((entry - expected).norm());
            }
        }
        worst
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_error() <= tol
    }
}

/// The quantum memory: `2^n` complex amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

fn check_qubit_count(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(QlamError::Config(format!(
            "n_qubits must be in 1..={MAX_QUBITS}, got {n_qubits}"
        )));
    }
    Ok(())
}

fn check_angle(angle: f64) -> Result<()> {
    if !angle.is_finite() {
        return Err(QlamError::Numeric(format!(
            "rotation angle is not finite: {angle}"
        )));
    }
    Ok(())
}

impl StateVector {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let mut amplitudes = vec![ZERO; 1 << n_qubits];
        amplitudes[0] = ONE;
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Wraps raw amplitudes. Only the length is validated; use
    /// [`StateVector::check_normalized`] to enforce the unit-norm invariant.
    pub fn from_amplitudes(n_qubits: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        if amplitudes.len() != 1 << n_qubits {
            return Err(QlamError::Shape(format!(
                "{} amplitudes supplied for {} qubits (expected {})",
                amplitudes.len(),
                n_qubits,
                1usize << n_qubits
            )));
        }
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn check_normalized(&self, tol: f64) -> Result<()> {
        let norm = self.norm();
        if (norm - 1.0).abs() > tol {
            return Err(QlamError::Numeric(format!(
                "state norm {norm} deviates from 1 by more than {tol}"
            )));
        }
        Ok(())
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        self.check_same_register(other)?;
        Ok(inner(&self.amplitudes, &other.amplitudes))
    }

    pub(crate) fn check_same_register(&self, other: &StateVector) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            return Err(QlamError::Shape(format!(
                "register mismatch: {} vs {} qubits",
                self.n_qubits, other.n_qubits
            )));
        }
        Ok(())
    }

    fn check_target(&self, target: usize) -> Result<()> {
        if target >= self.n_qubits {
            return Err(QlamError::Index(format!(
                "qubit {target} does not exist in a {}-qubit register",
                self.n_qubits
            )));
        }
        Ok(())
    }

    pub fn apply_gate_1q(&mut self, gate: &Gate1Q, target: usize) -> Result<()> {
        self.check_target(target)?;
        debug_assert!(gate.is_unitary(1e-12), "non-unitary gate {gate:?}");
        let [[m00, m01], [m10, m11]] = gate.matrix;
        for_each_pair(&mut self.amplitudes, target, |a0, a1| {
            let (x0, x1) = (*a0, *a1);
            *a0 = m00 * x0 + m01 * x1;
            *a1 = m10 * x0 + m11 * x1;
        });
        Ok(())
    }

    pub fn apply_ry(&mut self, target: usize, angle: f64) -> Result<()> {
        self.check_target(target)?;
        check_angle(angle)?;
        let (s, c) = (angle / 2.0).sin_cos();
        for_each_pair(&mut self.amplitudes, target, |a0, a1| {
            let (x0, x1) = (*a0, *a1);
            *a0 = x0 * c - x1 * s;
            *a1 = x0 * s + x1 * c;
        });
        Ok(())
    }

    pub fn apply_rz(&mut self, target: usize, angle: f64) -> Result<()> {
        self.check_target(target)?;
        check_angle(angle)?;
        let lo = Complex64::from_polar(1.0, -angle / 2.0);
        let hi = lo.conj();
        for_each_pair(&mut self.amplitudes, target, |a0, a1| {
            *a0 *= lo;
            *a1 *= hi;
        });
        Ok(())
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_target(control)?;
        self.check_target(target)?;
        if control == target {
            return Err(QlamError::Config(format!(
                "CNOT control and target are both qubit {control}"
            )));
        }
        let cbit = 1usize << control;
        let tbit = 1usize << target;
        for i in 0..self.amplitudes.len() {
            // visit each swapped pair once, from its target-bit-0 member
            if i & cbit != 0 && i & tbit == 0 {
                self.amplitudes.swap(i, i | tbit);
            }
        }
        Ok(())
    }
}

/// `Σ conj(a_i)·b_i`.
pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Calls `f(amp[i], amp[i | 1<<target])` for every index `i` whose target bit is 0.
#[inline]
fn for_each_pair(
    amps: &mut [Complex64],
    target: usize,
    mut f: impl FnMut(&mut Complex64, &mut Complex64),
) {
    let stride = 1usize << target;
    for block in amps.chunks_exact_mut(stride << 1) {
        let (lo, hi) = block.split_at_mut(stride);
        for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
            f(a0, a1);
        }
    }
}
