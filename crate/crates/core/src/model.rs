//! The QLAM recurrence.
//!
//! For each token `x_t`: embed it classically (`e_t = W_e x_t + b_e`, one angle
//! per qubit), evolve the memory `|ψ_t⟩ = U_var(θ) U_enc(e_t) |ψ_{t−1}⟩`, form
//! the query `q_t = W_Q e_t`, decode one coefficient vector `γ^{(h)}(q_t)` per
//! head and read `r_t[h] = ⟨ψ_t| Σ_i γ_i^{(h)} P_i |ψ_t⟩`. The classifier sees
//! the readouts of the last `t_keep` steps. The memory starts in `|0…0⟩` and
//! is the only state carried between steps.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuits::{self, AnsatzConfig, CircuitParams, Entangler, GateOp};
use crate::error::{QlamError, Result};
use crate::nn::{argmax, Affine, Mlp, MlpCache, ParamSet, ParamView};
use crate::observables::{default_pauli_pool, Observable, PauliString, ReadoutMode, ShotConfig};
use crate::rng;
use crate::statevector::StateVector;

/// Half-width of the uniform distribution for initial circuit angles.
pub const INIT_ANGLE_BOUND: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QlamConfig {
    pub n_qubits: usize,
    pub n_layers: usize,
    #[serde(default)]
    pub entangler: Entangler,
    /// Query dimension `d_q`.
    pub d_q: usize,
    pub n_heads: usize,
    /// Hidden width of each observable decoder.
    pub decoder_hidden: usize,
    pub n_classes: usize,
    /// Number of final timesteps whose readouts feed the classifier.
    pub t_keep: usize,
    /// Clamp tokens into `[0, 1]` instead of rejecting them.
    #[serde(default)]
    pub clamp_tokens: bool,
}

impl Default for QlamConfig {
    fn default() -> Self {
        Self {
            n_qubits: 4,
            n_layers: 2,
            entangler: Entangler::Ring,
            d_q: 8,
            n_heads: 8,
            decoder_hidden: 16,
            n_classes: 10,
            t_keep: 1,
            clamp_tokens: false,
        }
    }
}

impl QlamConfig {
    pub fn ansatz(&self) -> AnsatzConfig {
        AnsatzConfig {
            n_qubits: self.n_qubits,
            n_layers: self.n_layers,
            entangler: self.entangler,
        }
    }

    pub fn pool_size(&self) -> usize {
        match self.n_qubits {
            1 => 2,
            2 => 5,
            n => 3 * n,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.n_heads * self.t_keep
    }

    pub fn validate(&self) -> Result<()> {
        self.ansatz().validate()?;
        for (name, v) in [
            ("d_q", self.d_q),
            ("n_heads", self.n_heads),
            ("decoder_hidden", self.decoder_hidden),
            ("t_keep", self.t_keep),
        ] {
            if v == 0 {
                return Err(QlamError::Config(format!("{name} must be at least 1")));
            }
        }
        if self.n_classes < 2 {
            return Err(QlamError::Config("n_classes must be at least 2".into()));
        }
        Ok(())
    }
}

/// Every trainable array of the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QlamParams {
    /// Scalar token → one angle per qubit.
    pub embed: Affine,
    pub circuit: CircuitParams,
    /// `W_Q`, row-major `d_q × n_qubits`, no bias.
    pub w_q: Vec<f64>,
    /// One observable decoder per head, `d_q → pool size`.
    pub decoders: Vec<Mlp>,
    /// `n_heads · t_keep → n_classes`.
    pub classifier: Affine,
}

impl QlamParams {
    pub fn zeros(cfg: &QlamConfig) -> Self {
        let ansatz = cfg.ansatz();
        Self {
            embed: Affine::zeros(cfg.n_qubits, 1),
            circuit: CircuitParams::zeros(&ansatz),
            w_q: vec![0.0; cfg.d_q * cfg.n_qubits],
            decoders: (0..cfg.n_heads)
                .map(|_| Mlp::zeros(cfg.d_q, cfg.decoder_hidden, cfg.pool_size()))
                .collect(),
            classifier: Affine::zeros(cfg.n_classes, cfg.feature_dim()),
        }
    }

    /// Affine maps from `U(±1/√fan_in)`, circuit angles from `U(±0.1)`.
    pub fn init<R: Rng + ?Sized>(cfg: &QlamConfig, rng: &mut R) -> Self {
        let embed = Affine::init(cfg.n_qubits, 1, rng);
        let theta = (0..cfg.ansatz().n_params())
            .map(|_| rng.random_range(-INIT_ANGLE_BOUND..=INIT_ANGLE_BOUND))
            .collect();
        let bound = 1.0 / (cfg.n_qubits as f64).sqrt();
        let w_q = (0..cfg.d_q * cfg.n_qubits)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        let decoders = (0..cfg.n_heads)
            .map(|_| Mlp::init(cfg.d_q, cfg.decoder_hidden, cfg.pool_size(), rng))
            .collect();
        let classifier = Affine::init(cfg.n_classes, cfg.feature_dim(), rng);
        Self {
            embed,
            circuit: CircuitParams { theta },
            w_q,
            decoders,
            classifier,
        }
    }

    fn check_shapes(&self, cfg: &QlamConfig) -> Result<()> {
        let zeros = Self::zeros(cfg);
        let expect: Vec<(String, Vec<usize>)> = zeros
            .arrays()
            .into_iter()
            .map(|a| (a.name, a.shape))
            .collect();
        let got: Vec<(String, Vec<usize>, usize)> = self
            .arrays()
            .into_iter()
            .map(|a| (a.name, a.shape, a.data.len()))
            .collect();
        if expect.len() != got.len() {
            return Err(QlamError::Shape(format!(
                "{} parameter arrays for a model with {}",
                got.len(),
                expect.len()
            )));
        }
        for ((name, shape), (_, gshape, len)) in expect.iter().zip(&got) {
            if shape != gshape || shape.iter().product::<usize>() != *len {
                return Err(QlamError::Shape(format!(
                    "parameter {name}: expected shape {shape:?}, got {gshape:?} with {len} values"
                )));
            }
        }
        if !self.all_finite() {
            return Err(QlamError::Numeric(
                "model parameters contain non-finite values".into(),
            ));
        }
        Ok(())
    }
}

impl ParamSet for QlamParams {
    fn arrays(&self) -> Vec<ParamView<'_>> {
        let n_qubits = self.embed.out_dim;
        let d_q = self.w_q.len().checked_div(n_qubits).unwrap_or(0);
        let mut v = self.embed.views("embed").to_vec();
        v.push(ParamView {
            name: "circuit.theta".into(),
            shape: vec![
                self.circuit.theta.len() / (2 * n_qubits.max(1)),
                n_qubits,
                2,
            ],
            data: &self.circuit.theta,
        });
        v.push(ParamView {
            name: "query.weight".into(),
            shape: vec![d_q, n_qubits],
            data: &self.w_q,
        });
        for (h, dec) in self.decoders.iter().enumerate() {
            v.extend(dec.views(&format!("decoder.{h}")));
        }
        v.extend(self.classifier.views("classifier"));
        v
    }

    fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = self.embed.views_mut().into_iter().collect();
        v.push(&mut self.circuit.theta);
        v.push(&mut self.w_q);
        for dec in self.decoders.iter_mut() {
            v.extend(dec.views_mut());
        }
        v.extend(self.classifier.views_mut());
        v
    }
}

/// Everything a forward pass produces.
#[derive(Clone, Debug)]
pub struct ReadoutTrace {
    /// `readouts[t][h]`, one row per timestep.
    pub readouts: Vec<Vec<f64>>,
    /// `Σ_i |γ_i^{(h)}(q_t)|` for every step and head: the bound on `|readouts[t][h]|`.
    pub readout_bounds: Vec<Vec<f64>>,
    pub features: Vec<f64>,
    pub logits: Vec<f64>,
    /// Memory after the last token; the only quantum state the pass keeps.
    pub final_state: StateVector,
}

/// Configuration, parameters and the derived Pauli pool and gate program.
#[derive(Clone, Debug)]
pub struct QlamModel {
    config: QlamConfig,
    pub params: QlamParams,
    pool: Vec<PauliString>,
    program: Vec<GateOp>,
}

impl QlamModel {
    pub fn new(config: QlamConfig, params: QlamParams) -> Result<Self> {
        config.validate()?;
        params.check_shapes(&config)?;
        let pool = default_pauli_pool(config.n_qubits)?;
        debug_assert_eq!(pool.len(), config.pool_size());
        let program = config.ansatz().step_program();
        Ok(Self {
            config,
            params,
            pool,
            program,
        })
    }

    pub fn init<R: Rng + ?Sized>(config: QlamConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        Self::new(config, QlamParams::init(&config, rng))
    }

    pub fn config(&self) -> &QlamConfig {
        &self.config
    }

    pub fn pool(&self) -> &[PauliString] {
        &self.pool
    }

    pub(crate) fn program(&self) -> &[GateOp] {
        &self.program
    }

    pub fn n_params(&self) -> usize {
        self.params.n_params()
    }

    /// Validated (or clamped) copy of the token sequence.
    pub fn prepare_tokens(&self, tokens: &[f64]) -> Result<Vec<f64>> {
        if tokens.is_empty() {
            return Err(QlamError::Input("empty token sequence".into()));
        }
        if tokens.len() < self.config.t_keep {
            return Err(QlamError::Input(format!(
                "sequence of length {} is shorter than the {} kept readout steps",
                tokens.len(),
                self.config.t_keep
            )));
        }
        tokens
            .iter()
            .enumerate()
            .map(|(t, &x)| {
                if !x.is_finite() {
                    return Err(QlamError::Input(format!("token {t} is not finite")));
                }
                if (0.0..=1.0).contains(&x) {
                    Ok(x)
                } else if self.config.clamp_tokens {
                    Ok(x.clamp(0.0, 1.0))
                } else {
                    Err(QlamError::Input(format!(
                        "token {t} = {x} lies outside [0, 1]"
                    )))
                }
            })
            .collect()
    }

    pub fn embed(&self, token: f64) -> Vec<f64> {
        self.params.embed.apply(&[token])
    }

    /// `q = W_Q · e`.
    pub fn query(&self, embedding: &[f64]) -> Vec<f64> {
        let n = self.config.n_qubits;
        self.params
            .w_q
            .chunks_exact(n)
            .map(|row| row.iter().zip(embedding).map(|(w, e)| w * e).sum())
            .collect()
    }

    pub(crate) fn decode_gammas(&self, q: &[f64], head: usize, cache: &mut MlpCache) -> Vec<f64> {
        self.params.decoders[head].forward(q, cache)
    }

    /// `O^{(head)}(q) = Σ_i γ_i(q) P_i`.
    pub fn decode_observable(&self, q: &[f64], head: usize) -> Result<Observable> {
        let decoder =
            self.params.decoders.get(head).ok_or_else(|| {
                QlamError::Index(format!("head {head} of {}", self.config.n_heads))
            })?;
        if q.len() != self.config.d_q {
            return Err(QlamError::Shape(format!(
                "query of length {} for d_q = {}",
                q.len(),
                self.config.d_q
            )));
        }
        if decoder.out_dim() != self.pool.len() {
            return Err(QlamError::Shape(format!(
                "decoder emits {} coefficients for a pool of {}",
                decoder.out_dim(),
                self.pool.len()
            )));
        }
        let gammas = decoder.forward(q, &mut MlpCache::default());
        Observable::new(&gammas, &self.pool)
    }

    /// Runs the recurrence over `tokens`. `sample_index` only matters in
    /// sampled mode, where it selects the shot streams.
    pub fn forward(
        &self,
        tokens: &[f64],
        shot: &ShotConfig,
        sample_index: u64,
    ) -> Result<ReadoutTrace> {
        shot.validate()?;
        let tokens = self.prepare_tokens(tokens)?;
        let cfg = &self.config;
        let p = self.pool.len();
        let mut state = StateVector::zero(cfg.n_qubits)?;
        let mut readouts = Vec::with_capacity(tokens.len());
        let mut bounds = Vec::with_capacity(tokens.len());
        let mut cache = MlpCache::default();
        let mut expectations = vec![0.0; p];

        for (t, &x) in tokens.iter().enumerate() {
            let e = self.embed(x);
            circuits::run_program(&mut state, &self.program, &e, &self.params.circuit.theta)?;
            let q = self.query(&e);
            for (ev, pauli) in expectations.iter_mut().zip(&self.pool) {
                *ev = pauli.expectation_unchecked(state.amplitudes());
            }
            let mut r = Vec::with_capacity(cfg.n_heads);
            let mut b = Vec::with_capacity(cfg.n_heads);
            for h in 0..cfg.n_heads {
                let gammas = self.decode_gammas(&q, h, &mut cache);
                let value = match shot.mode {
                    ReadoutMode::Exact => {
                        gammas.iter().zip(&expectations).map(|(g, e)| g * e).sum()
                    }
                    ReadoutMode::Sampled => {
                        let mut acc = 0.0;
                        for (i, (g, ev)) in gammas.iter().zip(&expectations).enumerate() {
                            let mut stream = rng::shot_stream(
                                shot.rng_seed,
                                sample_index,
                                t as u64,
                                (h * p + i) as u64,
                            );
                            acc += g * crate::observables::sample_pm1_mean(
                                *ev,
                                shot.shots_per_term,
                                &mut stream,
                            )?;
                        }
                        acc
                    }
                };
                if !value.is_finite() {
                    return Err(QlamError::NonFinite {
                        timestep: t,
                        what: format!("readout of head {h}"),
                    });
                }
                r.push(value);
                b.push(gammas.iter().map(|g| g.abs()).sum());
            }
            readouts.push(r);
            bounds.push(b);
        }

        let features: Vec<f64> = readouts[tokens.len() - cfg.t_keep..].concat();
        let logits = self.params.classifier.apply(&features);
        Ok(ReadoutTrace {
            readouts,
            readout_bounds: bounds,
            features,
            logits,
            final_state: state,
        })
    }

    /// Exact-mode logits.
    pub fn logits(&self, tokens: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(tokens, &ShotConfig::exact(), 0)?.logits)
    }

    /// Argmax of the exact-mode logits, lowest index on ties.
    pub fn predict(&self, tokens: &[f64]) -> Result<usize> {
        Ok(argmax(&self.logits(tokens)?))
    }
}
