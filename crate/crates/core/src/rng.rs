//! Seeded randomness for the engine.
//!
//! The generator is ChaCha8 (via `rand_chacha`) seeded with
//! `SeedableRng::seed_from_u64`; its output stream is fixed across platforms and
//! crate releases. Floats and bounded integers are derived here from raw `u64`
//! words rather than through `rand`'s distribution code, so the mapping from a
//! seed to a game schedule never depends on another crate's sampling details.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::layout::TargetId;
use crate::time::Millis;

#[derive(Clone, Debug)]
pub struct GameRng {
    inner: ChaCha8Rng,
}

impl GameRng {
    pub fn seed_from_u64(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`, unbiased (Lemire's widening multiply with rejection).
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = (self.next_u64() as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    /// Uniform integer in `[lo, hi]`.
    pub fn inclusive(&mut self, lo: u64, hi: u64) -> u64 {
        assert!(lo <= hi);
        match (hi - lo).checked_add(1) {
            Some(span) => lo + self.below(span),
            None => self.next_u64(),
        }
    }
}

impl RngCore for GameRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Delay until the next flash, uniform over the whole milliseconds in `[min, max]`.
pub fn next_flash_delay(rng: &mut GameRng, bounds: (Millis, Millis)) -> Millis {
    let (min, max) = bounds;
    assert!(min > Millis::ZERO && min <= max, "invalid flash bounds");
    Millis(rng.inclusive(min.as_ms(), max.as_ms()))
}

/// Returns `prev` with one uniformly chosen target appended. The new target never
/// repeats the last element unless the board has only one target.
pub fn extend_sequence(prev: &[TargetId], rng: &mut GameRng, n_targets: usize) -> Vec<TargetId> {
    assert!(n_targets >= 1, "no targets to choose from");
    let mut next = prev.to_vec();
    next.push(pick_target(rng, n_targets, prev.last().copied()));
    next
}

/// Uniform target, excluding `avoid` when there is anything else to choose.
pub fn pick_target(rng: &mut GameRng, n_targets: usize, avoid: Option<TargetId>) -> TargetId {
    match avoid {
        Some(last) if n_targets > 1 && last.index() < n_targets => {
            let k = rng.below(n_targets as u64 - 1) as u32;
            TargetId(if k >= last.0 { k + 1 } else { k })
        }
        _ => TargetId(rng.below(n_targets as u64) as u32),
    }
}
