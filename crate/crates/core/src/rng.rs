//! Counter-based pseudo-random streams.
//!
//! Everything random in this crate (weight init, synthetic prompts, decoder
//! initialization, fuzz sampling) is derived from the splitmix64 finalizer
//! applied to a key and a counter. A value depends only on `(key, counter)`,
//! never on how many values were drawn before it, so weight generation is
//! order-independent and bit-identical across platforms.
//!
//! Constants are the standard splitmix64 ones:
//! increment `0x9E3779B97F4A7C15`, mix multipliers `0xBF58476D1CE4E5B9`
//! and `0x94D049BB133111EB`. Stream keys are built by folding strings and
//! integers into the state with the same finalizer.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// The splitmix64 output function: a bijective mix of a 64-bit state.
#[inline]
pub fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A keyed counter stream: `value(i) = mix(key + (i+1) * GOLDEN)`.
#[derive(Debug, Clone, Copy)]
pub struct Stream {
    key: u64,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream {
            key: mix(seed.wrapping_add(GOLDEN)),
        }
    }

    /// Derive a substream key from a label, e.g. a tensor name.
    pub fn with_label(self, label: &str) -> Self {
        let mut key = self.key;
        for &b in label.as_bytes() {
            key = mix(key ^ u64::from(b)).wrapping_add(GOLDEN);
        }
        Stream { key: mix(key) }
    }

    /// Derive a substream key from an integer, e.g. a prompt index.
    pub fn with_index(self, index: u64) -> Self {
        Stream {
            key: mix(self.key ^ mix(index.wrapping_add(GOLDEN))),
        }
    }

    /// The i-th 64-bit value of the stream.
    #[inline]
    pub fn u64_at(self, i: u64) -> u64 {
        mix(self
            .key
            .wrapping_add(i.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    /// The i-th value mapped to `[0, 1)` using the top 24 bits.
    #[inline]
    pub fn unit_f32_at(self, i: u64) -> f32 {
        ((self.u64_at(i) >> 40) as f32) / (1u32 << 24) as f32
    }

    /// The i-th value mapped uniformly to `[-limit, limit)`.
    #[inline]
    pub fn symmetric_f32_at(self, i: u64, limit: f32) -> f32 {
        (self.unit_f32_at(i) * 2.0 - 1.0) * limit
    }

    /// The i-th value mapped to `[0, 1)` with 53-bit resolution.
    #[inline]
    pub fn unit_f64_at(self, i: u64) -> f64 {
        (self.u64_at(i) >> 11) as f64 / (1u64 << 53) as f64
    }

    /// The i-th value mapped uniformly to `0..bound`.
    #[inline]
    pub fn bounded_at(self, i: u64, bound: u64) -> u64 {
        // Multiply-shift; bias is negligible for the small bounds used here.
        ((u128::from(self.u64_at(i)) * u128::from(bound)) >> 64) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_are_order_independent() {
        let s = Stream::new(7).with_label("embed.token");
        let forward: Vec<u64> = (0..8).map(|i| s.u64_at(i)).collect();
        let backward: Vec<u64> = (0..8).rev().map(|i| s.u64_at(i)).collect();
        let reversed: Vec<u64> = backward.into_iter().rev().collect();
        assert_eq!(forward, reversed);
    }

    #[test]
    fn labels_and_indices_separate_streams() {
        let base = Stream::new(1);
        assert_ne!(
            base.with_label("a").u64_at(0),
            base.with_label("b").u64_at(0)
        );
        assert_ne!(base.with_index(0).u64_at(0), base.with_index(1).u64_at(0));
        assert_ne!(Stream::new(1).u64_at(0), Stream::new(2).u64_at(0));
    }

    #[test]
    fn unit_values_stay_in_range() {
        let s = Stream::new(42);
        for i in 0..10_000 {
            let f = s.unit_f32_at(i);
            assert!((0.0..1.0).contains(&f));
            let w = s.symmetric_f32_at(i, 0.08);
            assert!((-0.08..0.08).contains(&w));
            let d = s.unit_f64_at(i);
            assert!((0.0..1.0).contains(&d));
        }
    }

    #[test]
    fn bounded_values_cover_range() {
        let s = Stream::new(9);
        let mut seen = [false; 16];
        for i in 0..1_000 {
            let v = s.bounded_at(i, 16) as usize;
            assert!(v < 16);
            seen[v] = true;
        }
        assert!(seen.iter().all(|&b| b));
    }
}
