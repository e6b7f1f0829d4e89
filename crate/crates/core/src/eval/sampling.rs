//! Deterministic subsampling.
//!
//! Generator: SplitMix64 (Steele, Lea, Flood 2014). The state starts at the
//! seed; each step adds `0x9E3779B97F4A7C15` (wrapping) and returns the state
//! mixed by
//!
//! ```text
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! z ^ (z >> 31)
//! ```
//!
//! A uniform integer below `bound` is drawn by rejection: outputs smaller
//! than `2^64 mod bound` are discarded, the first survivor is reduced
//! modulo `bound`.
//!
//! Selection uses Knuth's Algorithm S: walking the rows in order, row `t`
//! of `N` is kept when a draw below `N - t` is less than the number still
//! needed. The walk stops once `n` rows are kept. Output keeps dataset order.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("sample size {requested} out of range: must be between 1 and {available}")]
pub struct SampleSizeError {
    pub requested: usize,
    pub available: usize,
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform integer in `0..bound`. `bound` must be nonzero.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let r = self.next_u64();
            if r >= threshold {
                return r % bound;
            }
        }
    }
}

/// Indices of a uniform `n`-subset of `0..len`, ascending.
pub fn sample_indices(len: usize, n: usize, seed: u64) -> Result<Vec<usize>, SampleSizeError> {
    if n == 0 || n > len {
        return Err(SampleSizeError {
            requested: n,
            available: len,
        });
    }
    let mut rng = SplitMix64::new(seed);
    let mut picked = Vec::with_capacity(n);
    for t in 0..len {
        let remaining = (len - t) as u64;
        let needed = (n - picked.len()) as u64;
        if rng.below(remaining) < needed {
            picked.push(t);
            if picked.len() == n {
                break;
            }
        }
    }
    Ok(picked)
}

pub fn sample_subset<T: Clone>(items: &[T], n: usize, seed: u64) -> Result<Vec<T>, SampleSizeError> {
    Ok(sample_indices(items.len(), n, seed)?
        .into_iter()
        .map(|i| items[i].clone())
        .collect())
}
