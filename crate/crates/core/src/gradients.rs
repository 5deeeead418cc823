//! Exact gradients of the hybrid model.
//!
//! Classical maps are backpropagated analytically. The circuit is
//! differentiated with the adjoint method: for a loss `L` that depends on the
//! memory through readouts `r = ⟨ψ|O|ψ⟩`, the adjoint `λ = Σ (∂L/∂r) O|ψ⟩` is
//! carried backwards through the inverse gates, and each rotation
//! `G(a) = exp(−i a K / 2)` contributes `∂L/∂a = Im⟨λ|K|ψ⟩`, with `ψ` and `λ`
//! taken just after the gate.
//!
//! The forward pass stores the memory every [`CHECKPOINT_INTERVAL`] steps. The
//! backward pass replays one window at a time from its checkpoint, so storage
//! is `T / K + K` statevectors rather than `T`.
//!
//! [`param_shift_grad`] evaluates the same circuit derivatives with the
//! two-term shift rule and is kept as an independent check.

use num_complex::Complex64;

use crate::circuits::{AngleRef, GateOp};
use crate::error::{QlamError, Result};
use crate::model::{QlamModel, QlamParams};
use crate::nn::{softmax_cross_entropy, Affine, MlpCache, ParamSet};
use crate::statevector::StateVector;

pub const CHECKPOINT_INTERVAL: usize = 32;

/// Loss, logits and shape-mirrored parameter gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct GradBundle {
    pub loss: f64,
    pub logits: Vec<f64>,
    pub grads: QlamParams,
}

/// Quantities from a kept readout step that the backward pass reuses.
struct KeptStep {
    query: Vec<f64>,
    caches: Vec<MlpCache>,
    gammas: Vec<Vec<f64>>,
    expectations: Vec<f64>,
}

struct Tape {
    tokens: Vec<f64>,
    checkpoints: Vec<StateVector>,
    kept: Vec<KeptStep>,
    features: Vec<f64>,
}

/// Angle perturbation of one occurrence of a circuit angle.
#[derive(Clone, Copy, Debug)]
struct Shift {
    angle: usize,
    timestep: usize,
    delta: f64,
}

fn record_forward(model: &QlamModel, tokens: &[f64], shift: Option<Shift>) -> Result<Tape> {
    let tokens = model.prepare_tokens(tokens)?;
    let cfg = model.config();
    let t_len = tokens.len();
    let first_kept = t_len - cfg.t_keep;
    let mut state = StateVector::zero(cfg.n_qubits)?;
    let mut checkpoints = Vec::with_capacity(t_len / CHECKPOINT_INTERVAL + 1);
    let mut kept = Vec::with_capacity(cfg.t_keep);
    let mut features = Vec::with_capacity(cfg.feature_dim());
    let mut shifted_theta = model.params.circuit.theta.clone();

    for (t, &x) in tokens.iter().enumerate() {
        if t % CHECKPOINT_INTERVAL == 0 {
            checkpoints.push(state.clone());
        }
        let e = model.embed(x);
        let theta = match shift {
            Some(s) if s.timestep == t => {
                shifted_theta[s.angle] = model.params.circuit.theta[s.angle] + s.delta;
                &shifted_theta
            }
            _ => &model.params.circuit.theta,
        };
        for op in model.program() {
            op.apply(&mut state, &e, theta)?;
        }
        if t < first_kept {
            continue;
        }
        let query = model.query(&e);
        let expectations: Vec<f64> = model
            .pool()
            .iter()
            .map(|p| p.expectation_unchecked(state.amplitudes()))
            .collect();
        let mut caches = Vec::with_capacity(cfg.n_heads);
        let mut gammas = Vec::with_capacity(cfg.n_heads);
        for h in 0..cfg.n_heads {
            let mut cache = MlpCache::default();
            let g = model.decode_gammas(&query, h, &mut cache);
            let r: f64 = g.iter().zip(&expectations).map(|(a, b)| a * b).sum();
            if !r.is_finite() {
                return Err(QlamError::NonFinite {
                    timestep: t,
                    what: format!("readout of head {h}"),
                });
            }
            features.push(r);
            caches.push(cache);
            gammas.push(g);
        }
        kept.push(KeptStep {
            query,
            caches,
            gammas,
            expectations,
        });
    }
    Ok(Tape {
        tokens,
        checkpoints,
        kept,
        features,
    })
}

/// `⟨λ|K_q|ψ⟩` for `K = Y` or `Z` on qubit `q`.
fn generator_overlap(
    lambda: &[Complex64],
    psi: &[Complex64],
    qubit: usize,
    is_y: bool,
) -> Complex64 {
    let stride = 1usize << qubit;
    let mut acc = Complex64::new(0.0, 0.0);
    for (lb, pb) in lambda
        .chunks_exact(stride << 1)
        .zip(psi.chunks_exact(stride << 1))
    {
        let (l0, l1) = lb.split_at(stride);
        let (p0, p1) = pb.split_at(stride);
        for k in 0..stride {
            if is_y {
                // Y|0⟩ = i|1⟩, Y|1⟩ = −i|0⟩
                acc += l0[k].conj() * (-Complex64::i() * p1[k])
                    + l1[k].conj() * (Complex64::i() * p0[k]);
            } else {
                acc += l0[k].conj() * p0[k] - l1[k].conj() * p1[k];
            }
        }
    }
    acc
}

/// Backpropagates `∂L/∂features` through readouts, decoders, query map,
/// circuit and embedding, accumulating into `grads`.
fn backward(
    model: &QlamModel,
    tape: &Tape,
    dfeatures: &[f64],
    grads: &mut QlamParams,
) -> Result<()> {
    let cfg = model.config();
    let n = cfg.n_qubits;
    let t_len = tape.tokens.len();
    let first_kept = t_len - cfg.t_keep;
    let program = model.program();
    let theta = &model.params.circuit.theta;

    // Classical part of every kept step: decoders and query map. The circuit
    // sees the readout gradient as an effective observable Σ_i c_i P_i.
    let mut observable_weights: Vec<Vec<f64>> = Vec::with_capacity(tape.kept.len());
    let mut query_embed_grads: Vec<Vec<f64>> = Vec::with_capacity(tape.kept.len());
    for (s, step) in tape.kept.iter().enumerate() {
        let g_heads = &dfeatures[s * cfg.n_heads..(s + 1) * cfg.n_heads];
        let mut weights = vec![0.0; model.pool().len()];
        let mut dq = vec![0.0; cfg.d_q];
        for (h, &g) in g_heads.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let dgamma: Vec<f64> = step.expectations.iter().map(|e| g * e).collect();
            model.params.decoders[h].backward(
                &step.query,
                &step.caches[h],
                &dgamma,
                &mut grads.decoders[h],
                Some(&mut dq),
            );
            for (w, gamma) in weights.iter_mut().zip(&step.gammas[h]) {
                *w += g * gamma;
            }
        }
        // q = W_Q e
        let e = model.embed(tape.tokens[first_kept + s]);
        let mut de = vec![0.0; n];
        for (r, &dqr) in dq.iter().enumerate() {
            for j in 0..n {
                grads.w_q[r * n + j] += dqr * e[j];
                de[j] += dqr * model.params.w_q[r * n + j];
            }
        }
        observable_weights.push(weights);
        query_embed_grads.push(de);
    }

    let dim = 1usize << n;
    let mut lambda = StateVector::from_amplitudes(n, vec![Complex64::new(0.0, 0.0); dim])?;
    let mut window: Vec<StateVector> = Vec::with_capacity(CHECKPOINT_INTERVAL + 1);
    let mut embeddings: Vec<Vec<f64>> = Vec::with_capacity(CHECKPOINT_INTERVAL);

    for (w, checkpoint) in tape.checkpoints.iter().enumerate().rev() {
        let start = w * CHECKPOINT_INTERVAL;
        let end = (start + CHECKPOINT_INTERVAL).min(t_len);
        // replay the window: window[k] is the memory before step start + k
        window.clear();
        embeddings.clear();
        window.push(checkpoint.clone());
        for t in start..end {
            let e = model.embed(tape.tokens[t]);
            let mut next = window.last().expect("window is seeded").clone();
            for op in program {
                op.apply(&mut next, &e, theta)?;
            }
            window.push(next);
            embeddings.push(e);
        }

        for t in (start..end).rev() {
            let k = t - start;
            let mut psi = window[k + 1].clone();
            if t >= first_kept {
                let weights = &observable_weights[t - first_kept];
                for (c, pauli) in weights.iter().zip(model.pool()) {
                    if *c != 0.0 {
                        pauli.accumulate_unchecked(*c, psi.amplitudes(), lambda.amplitudes_mut());
                    }
                }
            }
            let e = &embeddings[k];
            let mut de = match t.checked_sub(first_kept) {
                Some(s) => query_embed_grads[s].clone(),
                None => vec![0.0; n],
            };
            for op in program.iter().rev() {
                let (qubit, angle, is_y) = match *op {
                    GateOp::Ry { qubit, angle } => (qubit, angle, true),
                    GateOp::Rz { qubit, angle } => (qubit, angle, false),
                    GateOp::Cnot { .. } => {
                        op.apply_inverse(&mut psi, e, theta)?;
                        op.apply_inverse(&mut lambda, e, theta)?;
                        continue;
                    }
                };
                let d = generator_overlap(lambda.amplitudes(), psi.amplitudes(), qubit, is_y).im;
                match angle {
                    AngleRef::Encoding(j) => de[j] += d,
                    AngleRef::Theta(i) => grads.circuit.theta[i] += d,
                }
                op.apply_inverse(&mut psi, e, theta)?;
                op.apply_inverse(&mut lambda, e, theta)?;
            }
            // e_t = W_e x_t + b_e
            let x = tape.tokens[t];
            for ((w, b), g) in grads
                .embed
                .weights
                .iter_mut()
                .zip(&mut grads.embed.bias)
                .zip(&de)
            {
                *w += g * x;
                *b += g;
            }
            if !de.iter().all(|v| v.is_finite()) {
                return Err(QlamError::NonFinite {
                    timestep: t,
                    what: "embedding gradient".into(),
                });
            }
        }
    }
    Ok(())
}

/// Cross-entropy loss of one labelled sequence and its exact gradient.
pub fn loss_and_grad(model: &QlamModel, tokens: &[f64], label: usize) -> Result<GradBundle> {
    let tape = record_forward(model, tokens, None)?;
    let logits = model.params.classifier.apply(&tape.features);
    let (loss, dlogits) = softmax_cross_entropy(&logits, label)?;
    if !loss.is_finite() {
        return Err(QlamError::NonFinite {
            timestep: tape.tokens.len() - 1,
            what: "loss".into(),
        });
    }
    let mut grads = QlamParams::zeros(model.config());
    let mut dfeatures = vec![0.0; tape.features.len()];
    model.params.classifier.backward(
        &tape.features,
        &dlogits,
        &mut grads.classifier,
        Some(&mut dfeatures),
    );
    backward(model, &tape, &dfeatures, &mut grads)?;
    if !grads.all_finite() {
        return Err(QlamError::NonFinite {
            timestep: 0,
            what: "parameter gradient".into(),
        });
    }
    Ok(GradBundle {
        loss,
        logits,
        grads,
    })
}

/// Value and gradient of the pure-expectation objective `Σ_k w_k · features_k`,
/// where `features` are the kept readouts (classifier excluded).
pub fn readout_objective_grad(
    model: &QlamModel,
    tokens: &[f64],
    weights: &[f64],
) -> Result<(f64, QlamParams)> {
    let tape = record_forward(model, tokens, None)?;
    if weights.len() != tape.features.len() {
        return Err(QlamError::Shape(format!(
            "{} objective weights for {} readout features",
            weights.len(),
            tape.features.len()
        )));
    }
    let value = weights.iter().zip(&tape.features).map(|(w, f)| w * f).sum();
    let mut grads = QlamParams::zeros(model.config());
    backward(model, &tape, weights, &mut grads)?;
    Ok((value, grads))
}

/// Kept readout features, optionally with one occurrence of a circuit angle
/// shifted by `delta`.
fn shifted_features(model: &QlamModel, tokens: &[f64], shift: Option<Shift>) -> Result<Vec<f64>> {
    Ok(record_forward(model, tokens, shift)?.features)
}

fn check_angle_index(model: &QlamModel, angle_index: usize) -> Result<()> {
    let n = model.params.circuit.theta.len();
    if angle_index >= n {
        return Err(QlamError::Index(format!(
            "circuit angle {angle_index} of {n}"
        )));
    }
    Ok(())
}

/// Shift-rule derivative of every kept readout with respect to circuit angle
/// `angle_index`, restricted to the occurrences at `timesteps` (all steps when
/// `None`). Each occurrence is shifted on its own by `±shift` and the
/// contributions are summed; `shift = π/2` gives the exact derivative.
pub fn param_shift_feature_grads(
    model: &QlamModel,
    tokens: &[f64],
    angle_index: usize,
    timesteps: Option<&[usize]>,
    shift: f64,
) -> Result<Vec<f64>> {
    check_angle_index(model, angle_index)?;
    let all: Vec<usize> = (0..tokens.len()).collect();
    let steps = timesteps.unwrap_or(&all);
    let mut total = vec![0.0; model.config().feature_dim()];
    for &t in steps {
        let plus = shifted_features(
            model,
            tokens,
            Some(Shift {
                angle: angle_index,
                timestep: t,
                delta: shift,
            }),
        )?;
        let minus = shifted_features(
            model,
            tokens,
            Some(Shift {
                angle: angle_index,
                timestep: t,
                delta: -shift,
            }),
        )?;
        for (acc, (p, m)) in total.iter_mut().zip(plus.iter().zip(&minus)) {
            *acc += (p - m) / 2.0;
        }
    }
    Ok(total)
}

/// Shift-rule derivative of the objective `Σ_k w_k · features_k`.
pub fn param_shift_objective(
    model: &QlamModel,
    tokens: &[f64],
    weights: &[f64],
    angle_index: usize,
    timesteps: Option<&[usize]>,
    shift: f64,
) -> Result<f64> {
    let d = param_shift_feature_grads(model, tokens, angle_index, timesteps, shift)?;
    if weights.len() != d.len() {
        return Err(QlamError::Shape(format!(
            "{} objective weights for {} readout features",
            weights.len(),
            d.len()
        )));
    }
    Ok(weights.iter().zip(&d).map(|(w, g)| w * g).sum())
}

/// `∂L/∂θ_k` for the cross-entropy loss: shift-rule derivatives of each
/// readout, chained through the classifier and softmax.
pub fn param_shift_grad(
    model: &QlamModel,
    tokens: &[f64],
    label: usize,
    angle_index: usize,
) -> Result<f64> {
    let features = shifted_features(model, tokens, None)?;
    let logits = model.params.classifier.apply(&features);
    let (_, dlogits) = softmax_cross_entropy(&logits, label)?;
    let mut dfeatures = vec![0.0; features.len()];
    let mut scratch = Affine::zeros(
        model.params.classifier.out_dim,
        model.params.classifier.in_dim,
    );
    model
        .params
        .classifier
        .backward(&features, &dlogits, &mut scratch, Some(&mut dfeatures));
    param_shift_objective(
        model,
        tokens,
        &dfeatures,
        angle_index,
        None,
        std::f64::consts::FRAC_PI_2,
    )
}

/// Mean of per-sample bundles, summed in the order given.
pub fn mean_bundle(bundles: &[GradBundle]) -> Option<(f64, Vec<f64>)> {
    let first = bundles.first()?;
    let mut sum = vec![0.0; first.grads.n_params()];
    let mut loss = 0.0;
    for b in bundles {
        loss += b.loss;
        for (acc, g) in sum.iter_mut().zip(b.grads.flatten()) {
            *acc += g;
        }
    }
    let n = bundles.len() as f64;
    sum.iter_mut().for_each(|v| *v /= n);
    Some((loss / n, sum))
}
