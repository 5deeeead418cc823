//! Brute-force dense linear algebra used as an independent reference.
#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;

pub type C = Complex64;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

/// Square matrix, row-major.
#[derive(Clone, Debug)]
pub struct Dense {
    pub dim: usize,
    pub m: Vec<C>,
}

impl Dense {
    pub fn identity(dim: usize) -> Self {
        let mut m = vec![c(0.0, 0.0); dim * dim];
        for i in 0..dim {
            m[i * dim + i] = c(1.0, 0.0);
        }
        Self { dim, m }
    }

    pub fn from_2x2(a: [[C; 2]; 2]) -> Self {
        Self {
            dim: 2,
            m: vec![a[0][0], a[0][1], a[1][0], a[1][1]],
        }
    }

    pub fn at(&self, r: usize, col: usize) -> C {
        self.m[r * self.dim + col]
    }

    pub fn kron(&self, other: &Dense) -> Dense {
        let d = self.dim * other.dim;
        let mut m = vec![c(0.0, 0.0); d * d];
        for i in 0..self.dim {
            for j in 0..self.dim {
                for k in 0..other.dim {
                    for l in 0..other.dim {
                        m[(i * other.dim + k) * d + j * other.dim + l] =
                            self.at(i, j) * other.at(k, l);
                    }
                }
            }
        }
        Dense { dim: d, m }
    }

    pub fn matmul(&self, other: &Dense) -> Dense {
        let d = self.dim;
        let mut m = vec![c(0.0, 0.0); d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.at(i, k);
                for j in 0..d {
                    m[i * d + j] += a * other.at(k, j);
                }
            }
        }
        Dense { dim: d, m }
    }

    pub fn dagger(&self) -> Dense {
        let d = self.dim;
        let mut m = vec![c(0.0, 0.0); d * d];
        for i in 0..d {
            for j in 0..d {
                m[j * d + i] = self.at(i, j).conj();
            }
        }
        Dense { dim: d, m }
    }

    pub fn apply(&self, v: &[C]) -> Vec<C> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.at(i, j) * v[j]).sum())
            .collect()
    }

    pub fn add_scaled(&mut self, s: f64, other: &Dense) {
        for (a, b) in self.m.iter_mut().zip(&other.m) {
            *a += b * s;
        }
    }

    pub fn max_abs_diff(&self, other: &Dense) -> f64 {
        self.m
            .iter()
            .zip(&other.m)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

pub fn pauli_x() -> Dense {
    Dense::from_2x2([[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]])
}

pub fn pauli_y() -> Dense {
    Dense::from_2x2([[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]])
}

pub fn pauli_z() -> Dense {
    Dense::from_2x2([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]])
}

pub fn ry(a: f64) -> Dense {
    let (s, co) = (a / 2.0).sin_cos();
    Dense::from_2x2([[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]])
}

pub fn rz(a: f64) -> Dense {
    let h = a / 2.0;
    Dense::from_2x2([
        [C::from_polar(1.0, -h), c(0.0, 0.0)],
        [c(0.0, 0.0), C::from_polar(1.0, h)],
    ])
}

/// `ops[q]` acts on qubit `q`; qubit 0 is the least significant bit, so it is
/// the rightmost Kronecker factor.
pub fn kron_all(ops: &[Dense]) -> Dense {
    let mut acc = Dense::identity(1);
    for op in ops.iter().rev() {
        acc = acc.kron(op);
    }
    acc
}

pub fn on_qubit(n: usize, q: usize, g: &Dense) -> Dense {
    let ops: Vec<Dense> = (0..n)
        .map(|k| {
            if k == q {
                g.clone()
            } else {
                Dense::identity(2)
            }
        })
        .collect();
    kron_all(&ops)
}

/// `|0⟩⟨0|_c ⊗ I + |1⟩⟨1|_c ⊗ X_t` assembled from projectors.
pub fn cnot(n: usize, control: usize, target: usize) -> Dense {
    let p0 = Dense::from_2x2([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]]);
    let p1 = Dense::from_2x2([[c(0.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]]);
    let first: Vec<Dense> = (0..n)
        .map(|k| {
            if k == control {
                p0.clone()
            } else {
                Dense::identity(2)
            }
        })
        .collect();
    let second: Vec<Dense> = (0..n)
        .map(|k| {
            if k == control {
                p1.clone()
            } else if k == target {
                pauli_x()
            } else {
                Dense::identity(2)
            }
        })
        .collect();
    let mut m = kron_all(&first);
    m.add_scaled(1.0, &kron_all(&second));
    m
}

/// Dense matrix of one recurrence step with a ring entangler:
/// encoding RYs, then per layer RY·RZ on each qubit and the CNOT ring.
pub fn step_matrix(n: usize, layers: usize, e: &[f64], theta: &[f64]) -> Dense {
    let mut u = Dense::identity(1 << n);
    let mut then = |g: Dense| u = g.matmul(&u);
    for (q, &angle) in e.iter().enumerate().take(n) {
        then(on_qubit(n, q, &ry(angle)));
    }
    for l in 0..layers {
        for q in 0..n {
            let k = (l * n + q) * 2;
            then(on_qubit(n, q, &ry(theta[k])));
            then(on_qubit(n, q, &rz(theta[k + 1])));
        }
        let pairs: Vec<(usize, usize)> = match n {
            1 => vec![],
            _ => (0..n).map(|j| (j, (j + 1) % n)).collect(),
        };
        for (a, b) in pairs {
            then(cnot(n, a, b));
        }
    }
    u
}

/// Pauli string from characters, char `j` acting on qubit `j`.
pub fn pauli_string(labels: &str) -> Dense {
    let ops: Vec<Dense> = labels
        .chars()
        .map(|ch| match ch {
            'I' => Dense::identity(2),
            'X' => pauli_x(),
            'Y' => pauli_y(),
            'Z' => pauli_z(),
            other => panic!("bad Pauli label {other}"),
        })
        .collect();
    kron_all(&ops)
}

/// Labels of the default pool: Z_j, X_j, then Z_j Z_{j+1} ring pairs.
pub fn pool_labels(n: usize) -> Vec<String> {
    let single = |q: usize, p: char| {
        (0..n)
            .map(|k| if k == q { p } else { 'I' })
            .collect::<String>()
    };
    let mut out: Vec<String> = (0..n).map(|q| single(q, 'Z')).collect();
    out.extend((0..n).map(|q| single(q, 'X')));
    let pairs = match n {
        1 => 0,
        2 => 1,
        _ => n,
    };
    for q in 0..pairs {
        out.push(
            (0..n)
                .map(|k| if k == q || k == (q + 1) % n { 'Z' } else { 'I' })
                .collect(),
        );
    }
    out
}

pub fn expectation(m: &Dense, psi: &[C]) -> C {
    let mv = m.apply(psi);
    psi.iter().zip(&mv).map(|(a, b)| a.conj() * b).sum()
}

pub fn random_state<R: Rng>(n: usize, rng: &mut R) -> Vec<C> {
    let mut v: Vec<C> = (0..1 << n)
        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|a| *a /= norm);
    v
}

pub fn max_diff(a: &[C], b: &[C]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Cross-entropy via log-sum-exp, written out independently of the library.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    lse - logits[label]
}

/// `|a − b| / max(|a|, |b|, 1e-4)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}
