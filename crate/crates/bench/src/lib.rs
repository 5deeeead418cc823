//! Shared fixtures for the benchmarks.

use qlam::{QlamConfig, QlamModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Default hyperparameters with `n_qubits` qubits and `t_keep` kept readouts.
pub fn model(n_qubits: usize, t_keep: usize, seed: u64) -> QlamModel {
    let cfg = QlamConfig {
        n_qubits,
        t_keep,
        ..Default::default()
    };
    QlamModel::init(cfg, &mut ChaCha8Rng::seed_from_u64(seed)).expect("valid config")
}

/// Uniform tokens in [0, 1].
pub fn tokens(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random::<f64>()).collect()
}
