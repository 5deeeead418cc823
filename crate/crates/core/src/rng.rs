//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator whose 256-bit key is the little-endian
//! concatenation of four 64-bit words `(base_seed, a, b, c)` and whose ChaCha
//! stream id selects the purpose ([`Domain`]). The key map is injective, so two
//! distinct coordinates never share a stream, and a stream's output does not
//! depend on which thread draws it or on what was drawn elsewhere.
//!
//! | domain            | a              | b        | c          |
//! |-------------------|----------------|----------|------------|
//! | `Shots`           | sample index   | timestep | term index |
//! | `Init`            | fold           | model id | 0          |
//! | `Shuffle`         | fold           | epoch    | 0          |
//! | `Subsample`       | fold           | split id | 0          |
//! | `Folds`           | 0              | 0        | 0          |

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Shots = 0,
    Init = 1,
    Shuffle = 2,
    Subsample = 3,
    Folds = 4,
}

pub type StreamRng = ChaCha8Rng;

pub fn stream(domain: Domain, base_seed: u64, a: u64, b: u64, c: u64) -> StreamRng {
    let mut key = [0u8; 32];
    for (chunk, word) in key.chunks_exact_mut(8).zip([base_seed, a, b, c]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(domain as u64);
    rng
}

/// Stream for the measurement shots of one observable term.
pub fn shot_stream(base_seed: u64, sample_index: u64, timestep: u64, term_index: u64) -> StreamRng {
    stream(Domain::Shots, base_seed, sample_index, timestep, term_index)
}
