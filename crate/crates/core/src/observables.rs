//! Pauli strings, real-weighted Hermitian observables and their expectation
//! values, exact or estimated from simulated measurement shots.
//!
//! A Pauli string acts on basis states as
//! `P|i⟩ = i^{#Y} · (-1)^{popcount(i & z_mask)} · |i ^ x_mask⟩`,
//! where `x_mask` marks X/Y positions and `z_mask` marks Z/Y positions. Both the
//! action and the expectation value are evaluated from these masks directly.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{QlamError, Result};
use crate::rng;
use crate::statevector::StateVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Tensor product of single-qubit Paulis; `labels[j]` acts on qubit `j`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    labels: Vec<Pauli>,
    x_mask: usize,
    z_mask: usize,
    n_y: u32,
}

impl PauliString {
    pub fn new(labels: Vec<Pauli>) -> Result<Self> {
        if labels.is_empty() || labels.len() > crate::statevector::MAX_QUBITS {
            return Err(QlamError::Config(format!(
                "a Pauli string needs 1..={} labels, got {}",
                crate::statevector::MAX_QUBITS,
                labels.len()
            )));
        }
        let (mut x_mask, mut z_mask, mut n_y) = (0, 0, 0);
        for (q, p) in labels.iter().enumerate() {
            let bit = 1usize << q;
            match p {
                Pauli::I => {}
                Pauli::X => x_mask |= bit,
                Pauli::Z => z_mask |= bit,
                Pauli::Y => {
                    x_mask |= bit;
                    z_mask |= bit;
                    n_y += 1;
                }
            }
        }
        Ok(Self {
            labels,
            x_mask,
            z_mask,
            n_y,
        })
    }

    pub fn identity(n_qubits: usize) -> Result<Self> {
        Self::new(vec![Pauli::I; n_qubits])
    }

    /// `pauli` on each listed qubit, identity elsewhere.
    pub fn on(n_qubits: usize, sites: &[(usize, Pauli)]) -> Result<Self> {
        let mut labels = vec![Pauli::I; n_qubits];
        for &(q, p) in sites {
            let slot = labels.get_mut(q).ok_or_else(|| {
                QlamError::Index(format!("qubit {q} out of range for {n_qubits} qubits"))
            })?;
            *slot = p;
        }
        Self::new(labels)
    }

    pub fn n_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[Pauli] {
        &self.labels
    }

    pub fn is_identity(&self) -> bool {
        self.x_mask == 0 && self.z_mask == 0
    }

    fn check_register(&self, state: &StateVector) -> Result<()> {
        if state.n_qubits() != self.n_qubits() {
            return Err(QlamError::Shape(format!(
                "Pauli string on {} qubits applied to a {}-qubit state",
                self.n_qubits(),
                state.n_qubits()
            )));
        }
        Ok(())
    }

    #[inline]
    fn phase(&self, basis: usize) -> Complex64 {
        let sign = if (basis & self.z_mask).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        match self.n_y % 4 {
            0 => Complex64::new(sign, 0.0),
            1 => Complex64::new(0.0, sign),
            2 => Complex64::new(-sign, 0.0),
            _ => Complex64::new(0.0, -sign),
        }
    }

    /// `⟨ψ|P|ψ⟩`.
    pub fn expectation(&self, state: &StateVector) -> Result<f64> {
        self.check_register(state)?;
        Ok(self.expectation_unchecked(state.amplitudes()))
    }

    pub(crate) fn expectation_unchecked(&self, amps: &[Complex64]) -> f64 {
        if self.x_mask == 0 {
            return amps
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let p = a.norm_sqr();
                    if (i & self.z_mask).count_ones() % 2 == 0 {
                        p
                    } else {
                        -p
                    }
                })
                .sum();
        }
        let mut acc = 0.0;
        for (i, a) in amps.iter().enumerate() {
            acc += (amps[i ^ self.x_mask].conj() * self.phase(i) * a).re;
        }
        acc
    }

    /// Writes `P|ψ⟩` into `out`.
    pub fn apply(&self, state: &StateVector, out: &mut StateVector) -> Result<()> {
        self.check_register(state)?;
        self.check_register(out)?;
        self.apply_unchecked(state.amplitudes(), out.amplitudes_mut());
        Ok(())
    }

    pub(crate) fn apply_unchecked(&self, amps: &[Complex64], out: &mut [Complex64]) {
        for (i, a) in amps.iter().enumerate() {
            out[i ^ self.x_mask] = self.phase(i) * a;
        }
    }

    /// Adds `weight · P|ψ⟩` to `out`.
    pub(crate) fn accumulate_unchecked(
        &self,
        weight: f64,
        amps: &[Complex64],
        out: &mut [Complex64],
    ) {
        for (i, a) in amps.iter().enumerate() {
            out[i ^ self.x_mask] += self.phase(i) * a * weight;
        }
    }

    /// Row-major dense matrix, for diagnostics and small-register checks.
    pub fn to_dense(&self) -> Vec<Complex64> {
        let dim = 1usize << self.n_qubits();
        let mut m = vec![Complex64::new(0.0, 0.0); dim * dim];
        for col in 0..dim {
            m[(col ^ self.x_mask) * dim + col] = self.phase(col);
        }
        m
    }
}

impl fmt::Display for PauliString {
    /// Sparse form such as `Z0Z1`; the identity prints as `I`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return write!(f, "I");
        }
        for (q, p) in self.labels.iter().enumerate() {
            if *p != Pauli::I {
                write!(f, "{}{}", p.symbol(), q)?;
            }
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = QlamError;

    /// Dense form: one symbol per qubit, character `j` acting on qubit `j`
    /// (so `"ZI"` is Z on qubit 0).
    fn from_str(s: &str) -> Result<Self> {
        let labels = s
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(QlamError::Input(format!("unknown Pauli symbol {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(labels)
    }
}

/// `O = Σ γ_i P_i` with real coefficients, hence Hermitian.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    n_qubits: usize,
    terms: Vec<(f64, PauliString)>,
}

impl Observable {
    pub fn new(gammas: &[f64], pool: &[PauliString]) -> Result<Self> {
        if gammas.len() != pool.len() {
            return Err(QlamError::Shape(format!(
                "{} coefficients for {} Pauli terms",
                gammas.len(),
                pool.len()
            )));
        }
        let n_qubits = pool
            .first()
            .map(PauliString::n_qubits)
            .ok_or_else(|| QlamError::Shape("observable needs at least one term".into()))?;
        if let Some(bad) = pool.iter().find(|p| p.n_qubits() != n_qubits) {
            return Err(QlamError::Shape(format!(
                "mixed register sizes in Pauli pool: {} and {}",
                n_qubits,
                bad.n_qubits()
            )));
        }
        if let Some((i, g)) = gammas.iter().enumerate().find(|(_, g)| !g.is_finite()) {
            return Err(QlamError::Numeric(format!(
                "coefficient {i} is not finite: {g}"
            )));
        }
        Ok(Self {
            n_qubits,
            terms: gammas.iter().copied().zip(pool.iter().cloned()).collect(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    pub fn coefficient_l1(&self) -> f64 {
        self.terms.iter().map(|(g, _)| g.abs()).sum()
    }

    fn check_register(&self, state: &StateVector) -> Result<()> {
        if state.n_qubits() != self.n_qubits {
            return Err(QlamError::Shape(format!(
                "observable on {} qubits measured on a {}-qubit state",
                self.n_qubits,
                state.n_qubits()
            )));
        }
        Ok(())
    }

    /// `⟨ψ|O|ψ⟩ = Σ γ_i ⟨ψ|P_i|ψ⟩`.
    pub fn expectation(&self, state: &StateVector) -> Result<f64> {
        self.check_register(state)?;
        Ok(self
            .terms
            .iter()
            .map(|(g, p)| g * p.expectation_unchecked(state.amplitudes()))
            .sum())
    }

    /// Shot-based estimate of `⟨ψ|O|ψ⟩`. Each term is measured in its own
    /// eigenbasis with `shots_per_term` independent ±1 outcomes, drawn from
    /// the stream `(cfg.rng_seed, site.sample_index, site.timestep,
    /// site.term_offset + i)`.
    pub fn expectation_sampled(
        &self,
        state: &StateVector,
        cfg: &ShotConfig,
        site: ShotSite,
    ) -> Result<f64> {
        self.check_register(state)?;
        let m = cfg.shots_per_term;
        if m == 0 {
            return Err(QlamError::Config(
                "shots_per_term must be at least 1".into(),
            ));
        }
        let mut total = 0.0;
        for (i, (gamma, pauli)) in self.terms.iter().enumerate() {
            let exact = pauli.expectation_unchecked(state.amplitudes());
            let mut rng = rng::shot_stream(
                cfg.rng_seed,
                site.sample_index,
                site.timestep,
                site.term_offset + i as u64,
            );
            total += gamma * sample_pm1_mean(exact, m, &mut rng)?;
        }
        Ok(total)
    }

    /// Dispatches on `cfg.mode`.
    pub fn measure(&self, state: &StateVector, cfg: &ShotConfig, site: ShotSite) -> Result<f64> {
        match cfg.mode {
            ReadoutMode::Exact => self.expectation(state),
            ReadoutMode::Sampled => self.expectation_sampled(state, cfg, site),
        }
    }

    /// Predicted standard deviation of [`Observable::expectation_sampled`]:
    /// `sqrt(Σ γ_i² (1 − ⟨P_i⟩²) / m)`.
    pub fn sampled_std(&self, state: &StateVector, shots_per_term: u32) -> Result<f64> {
        self.check_register(state)?;
        let var: f64 = self
            .terms
            .iter()
            .map(|(g, p)| {
                let e = p.expectation_unchecked(state.amplitudes());
                g * g * (1.0 - e * e).max(0.0)
            })
            .sum();
        Ok((var / shots_per_term as f64).sqrt())
    }

    /// Row-major dense matrix.
    pub fn to_dense(&self) -> Vec<Complex64> {
        let dim = 1usize << self.n_qubits;
        let mut m = vec![Complex64::new(0.0, 0.0); dim * dim];
        for (g, p) in &self.terms {
            for (acc, v) in m.iter_mut().zip(p.to_dense()) {
                *acc += v * g;
            }
        }
        m
    }
}

/// Mean of `m` independent ±1 outcomes with `P(+1) = (1 + expectation)/2`.
/// The count of +1 outcomes is drawn from the equivalent binomial law.
pub(crate) fn sample_pm1_mean(expectation: f64, m: u32, rng: &mut rng::StreamRng) -> Result<f64> {
    let p_plus = ((1.0 + expectation) / 2.0).clamp(0.0, 1.0);
    let dist = Binomial::new(m as u64, p_plus)
        .map_err(|e| QlamError::Numeric(format!("invalid shot distribution: {e}")))?;
    let plus = dist.sample(rng) as f64;
    let m = m as f64;
    Ok((2.0 * plus - m) / m)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReadoutMode {
    #[default]
    Exact,
    Sampled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotConfig {
    pub mode: ReadoutMode,
    pub shots_per_term: u32,
    pub rng_seed: u64,
}

impl ShotConfig {
    pub fn exact() -> Self {
        Self {
            mode: ReadoutMode::Exact,
            shots_per_term: 1,
            rng_seed: 0,
        }
    }

    pub fn sampled(shots_per_term: u32, rng_seed: u64) -> Self {
        Self {
            mode: ReadoutMode::Sampled,
            shots_per_term,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == ReadoutMode::Sampled && self.shots_per_term == 0 {
            return Err(QlamError::Config(
                "shots_per_term must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

impl Default for ShotConfig {
    fn default() -> Self {
        Self::exact()
    }
}

/// Coordinates of a measurement within a run, used to derive its RNG stream.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ShotSite {
    pub sample_index: u64,
    pub timestep: u64,
    pub term_offset: u64,
}

/// `Z_j` for every qubit, then `X_j`, then `Z_j Z_{j+1 mod n}` for each distinct
/// ring pair: `n = 1` has no pairs, `n = 2` one, `n ≥ 3` has `n`.
pub fn default_pauli_pool(n_qubits: usize) -> Result<Vec<PauliString>> {
    let mut pool = Vec::new();
    for q in 0..n_qubits {
        pool.push(PauliString::on(n_qubits, &[(q, Pauli::Z)])?);
    }
    for q in 0..n_qubits {
        pool.push(PauliString::on(n_qubits, &[(q, Pauli::X)])?);
    }
    let n_pairs = match n_qubits {
        0 | 1 => 0,
        2 => 1,
        n => n,
    };
    for q in 0..n_pairs {
        pool.push(PauliString::on(
            n_qubits,
            &[(q, Pauli::Z), ((q + 1) % n_qubits, Pauli::Z)],
        )?);
    }
    Ok(pool)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn plus_state() -> StateVector {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        StateVector::from_amplitudes(1, vec![h, h]).unwrap()
    }

    fn one_state() -> StateVector {
        let mut s = StateVector::zero(1).unwrap();
        s.apply_ry(0, std::f64::consts::PI).unwrap();
        s
    }

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn single_term_expectations() {
        let zero = StateVector::zero(1).unwrap();
        assert_eq!(p("Z").expectation(&zero).unwrap(), 1.0);
        assert_eq!(p("X").expectation(&zero).unwrap(), 0.0);
        assert!((p("X").expectation(&plus_state()).unwrap() - 1.0).abs() < 1e-15);
        assert!(p("Y").expectation(&plus_state()).unwrap().abs() < 1e-15);
    }

    #[test]
    fn register_mismatch_is_shape_error() {
        let s = StateVector::zero(2).unwrap();
        assert!(matches!(p("Z").expectation(&s), Err(QlamError::Shape(_))));
        let obs = Observable::new(&[1.0], &[p("ZZZ")]).unwrap();
        assert!(matches!(obs.expectation(&s), Err(QlamError::Shape(_))));
    }

    #[test]
    fn build_observable_examples() {
        let obs = Observable::new(&[1.0], &[p("Z")]).unwrap();
        let d = obs.to_dense();
        let expect = [1.0, 0.0, 0.0, -1.0];
        for (a, e) in d.iter().zip(expect) {
            assert_eq!(*a, Complex64::new(e, 0.0));
        }

        let pool = default_pauli_pool(3).unwrap();
        let zero = Observable::new(&vec![0.0; pool.len()], &pool).unwrap();
        let mut s = StateVector::zero(3).unwrap();
        s.apply_ry(1, 0.4).unwrap();
        s.apply_cnot(1, 2).unwrap();
        assert_eq!(zero.expectation(&s).unwrap(), 0.0);

        let obs = Observable::new(&[0.5, -0.3], &[p("Z"), p("X")]).unwrap();
        let got = obs.expectation(&plus_state()).unwrap();
        assert!((got - (-0.3)).abs() < 1e-15);
        // dense 2×2 cross-check: O = [[0.5, -0.3], [-0.3, -0.5]], ψ = (1,1)/√2
        let dense = (0.5 - 0.3 - 0.3 - 0.5) / 2.0;
        assert!((got - dense).abs() < 1e-15);
    }

    #[test]
    fn build_observable_errors() {
        assert!(matches!(
            Observable::new(&[1.0, 2.0], &[p("Z")]),
            Err(QlamError::Shape(_))
        ));
        assert!(matches!(
            Observable::new(&[f64::NAN], &[p("Z")]),
            Err(QlamError::Numeric(_))
        ));
        assert!(matches!(
            Observable::new(&[1.0, 1.0], &[p("Z"), p("ZZ")]),
            Err(QlamError::Shape(_))
        ));
    }

    #[test]
    fn scaled_term_on_one_state() {
        let obs = Observable::new(&[2.0], &[p("Z")]).unwrap();
        assert_eq!(obs.expectation(&one_state()).unwrap(), -2.0);
    }

    #[test]
    fn pauli_action_matches_dense_matrix() {
        let mut s = StateVector::zero(3).unwrap();
        for q in 0..3 {
            s.apply_ry(q, 0.3 + 0.5 * q as f64).unwrap();
            s.apply_rz(q, -0.2 + 0.7 * q as f64).unwrap();
        }
        s.apply_cnot(0, 2).unwrap();
        for label in ["XYZ", "YYI", "IZY", "XXX", "III"] {
            let pauli = p(label);
            let mut out = StateVector::zero(3).unwrap();
            pauli.apply(&s, &mut out).unwrap();
            let dense = pauli.to_dense();
            for r in 0..8 {
                let row: Complex64 = (0..8).map(|c| dense[r * 8 + c] * s.amplitudes()[c]).sum();
                assert!(
                    (row - out.amplitudes()[r]).norm() < 1e-14,
                    "{label} row {r}"
                );
            }
        }
    }

    #[test]
    fn pool_sizes() {
        let labels = |n| {
            default_pauli_pool(n)
                .unwrap()
                .iter()
                .map(|p| p.to_string())
                .collect::<Vec<_>>()
        };
        assert_eq!(labels(1), ["Z0", "X0"]);
        assert_eq!(labels(2), ["Z0", "Z1", "X0", "X1", "Z0Z1"]);
        assert_eq!(default_pauli_pool(4).unwrap().len(), 12);
        assert_eq!(
            labels(3)[6..],
            ["Z0Z1".to_string(), "Z1Z2".to_string(), "Z0Z2".to_string()]
        );
    }

    #[test]
    fn degenerate_shots_are_exact() {
        let obs = Observable::new(&[1.0], &[p("Z")]).unwrap();
        let zero = StateVector::zero(1).unwrap();
        for m in [1, 7, 1000] {
            let est = obs
                .expectation_sampled(&zero, &ShotConfig::sampled(m, 3), ShotSite::default())
                .unwrap();
            assert_eq!(est, 1.0);
        }
    }

    #[test]
    fn sampled_estimate_is_reproducible_and_site_dependent() {
        let obs = Observable::new(&[1.0, 0.5], &[p("Z"), p("X")]).unwrap();
        let s = {
            let mut s = StateVector::zero(1).unwrap();
            s.apply_ry(0, 1.1).unwrap();
            s
        };
        let cfg = ShotConfig::sampled(100, 11);
        let site = ShotSite {
            sample_index: 4,
            timestep: 2,
            term_offset: 0,
        };
        let a = obs.expectation_sampled(&s, &cfg, site).unwrap();
        assert_eq!(a, obs.expectation_sampled(&s, &cfg, site).unwrap());
        let moved = ShotSite {
            timestep: 3,
            ..site
        };
        assert_ne!(a, obs.expectation_sampled(&s, &cfg, moved).unwrap());
    }

    #[test]
    fn zero_shots_rejected() {
        let obs = Observable::new(&[1.0], &[p("Z")]).unwrap();
        let cfg = ShotConfig::sampled(0, 0);
        assert!(cfg.validate().is_err());
        assert!(matches!(
            obs.expectation_sampled(&StateVector::zero(1).unwrap(), &cfg, ShotSite::default()),
            Err(QlamError::Config(_))
        ));
    }

    #[test]
    fn plus_state_shot_noise_matches_bernoulli_variance() {
        // ⟨Z⟩ = 0 on |+⟩, so each estimate has std 1/√m = 0.01 at m = 10⁴
        let obs = Observable::new(&[1.0], &[p("Z")]).unwrap();
        let s = plus_state();
        let cfg = ShotConfig::sampled(10_000, 5);
        let est: Vec<f64> = (0..200)
            .map(|r| {
                let site = ShotSite {
                    sample_index: r,
                    ..Default::default()
                };
                obs.expectation_sampled(&s, &cfg, site).unwrap()
            })
            .collect();
        let mean = est.iter().sum::<f64>() / est.len() as f64;
        let var = est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (est.len() - 1) as f64;
        let std = var.sqrt();
        assert!((std - 0.01).abs() < 0.002, "std {std}");
        assert!((obs.sampled_std(&s, 10_000).unwrap() - 0.01).abs() < 1e-15);
    }
}
