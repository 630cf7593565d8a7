//! Counter-based deterministic random numbers.
//!
//! All randomness in the laboratory flows through `mix64`: a SplitMix64-style
//! avalanche applied to a key assembled from (seed, stream, counter).  Values
//! depend only on the key, never on call order, so sampling a potential site
//! by site gives the same field no matter how the loop is scheduled.

const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn avalanche(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix an arbitrary list of words into one 64-bit value.
pub fn mix64(words: &[u64]) -> u64 {
    let mut state: u64 = 0x243f_6a88_85a3_08d3;
    for (i, &w) in words.iter().enumerate() {
        state = avalanche(state ^ w.wrapping_add(GAMMA.wrapping_mul(i as u64 + 1)));
    }
    avalanche(state)
}

/// Uniform f64 in the open interval (0, 1).
pub fn unit_open(words: &[u64]) -> f64 {
    let bits = mix64(words) >> 11; // 53 bits
    ((bits as f64) + 0.5) / (1u64 << 53) as f64
}

/// Key for one lattice site under a given seed.
pub fn site_key(seed: u64, coords: [i64; 3]) -> u64 {
    mix64(&[
        seed,
        coords[0] as u64,
        coords[1] as u64,
        coords[2] as u64,
    ])
}

/// Derive an independent substream, e.g. per Monte Carlo trial or per sweep
/// entry.  Substreams with distinct indices never collide in practice.
pub fn substream(seed: u64, index: u64) -> u64 {
    mix64(&[seed, 0x5eed_5eed_5eed_5eed, index])
}

/// A small stateful generator for places where a stream of draws is more
/// convenient than explicit counters.  Still fully determined by its key.
#[derive(Clone, Debug)]
pub struct Stream {
    key: u64,
    counter: u64,
}

impl Stream {
    pub fn new(key: u64) -> Self {
        Stream { key, counter: 0 }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        mix64(&[self.key, self.counter])
    }

    /// Uniform in (0, 1).
    pub fn next_unit(&mut self) -> f64 {
        let bits = self.next_u64() >> 11;
        ((bits as f64) + 0.5) / (1u64 << 53) as f64
    }

    /// Uniform in [lo, hi).
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_unit()
    }

    /// Uniform integer in [0, n).
    pub fn next_below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }

    /// Standard normal via Box-Muller.
    pub fn next_normal(&mut self) -> f64 {
        let u1 = self.next_unit();
        let u2 = self.next_unit();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mix_is_order_free_of_call_pattern() {
        let a = unit_open(&[7, 1, 2]);
        let b = unit_open(&[7, 1, 3]);
        // Recompute in the opposite order; values must be identical.
        let b2 = unit_open(&[7, 1, 3]);
        let a2 = unit_open(&[7, 1, 2]);
        assert_eq!(a, a2);
        assert_eq!(b, b2);
        assert_ne!(a, b);
    }

    #[test]
    fn unit_open_stays_in_open_interval() {
        for i in 0..10_000u64 {
            let u = unit_open(&[42, i]);
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn substreams_differ() {
        assert_ne!(substream(1, 0), substream(1, 1));
        assert_ne!(substream(1, 0), substream(2, 0));
    }
}
