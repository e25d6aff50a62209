//! Counter-based random streams.
//!
//! Every random draw of the simulator comes from a stream addressed by
//! `(seed, replica, label, channel, step)`. Two runs that agree on these keys
//! see the same numbers, whatever the thread schedule, restart point or
//! perturbation of the initial positions. This is what couples the paired
//! runs of the stability checks.

use rand::RngCore;

use crate::measures::Label;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Channel {
    Motion,
    Event,
    Offspring,
    Init,
    Optimizer,
}

impl Channel {
    fn tag(self) -> u64 {
        match self {
            Channel::Motion => 0x6d6f74,
            Channel::Event => 0x657674,
            Channel::Offspring => 0x6f6666,
            Channel::Init => 0x696e69,
            Channel::Optimizer => 0x6f7074,
        }
    }
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finaliser.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn absorb(h: u64, v: u64) -> u64 {
    mix64(h ^ v.wrapping_add(GOLDEN).wrapping_add(h << 6).wrapping_add(h >> 2))
}

/// Stable hash of a stream address.
pub fn stream_key(seed: u64, replica: u64, label: &Label, channel: Channel, step: i64) -> u64 {
    let mut h = absorb(mix64(seed), replica);
    h = absorb(h, label.depth() as u64);
    for &p in label.path() {
        h = absorb(h, p as u64);
    }
    h = absorb(h, channel.tag());
    absorb(h, step as u64)
}

/// A stream: the `i`-th output is `mix64(key + (i + 1) * GOLDEN)`.
#[derive(Clone, Debug)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(key: u64) -> Self {
        Self { key, counter: 0 }
    }

    pub fn at(seed: u64, replica: u64, label: &Label, channel: Channel, step: i64) -> Self {
        Self::new(stream_key(seed, replica, label, channel, step))
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for CounterRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let v = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&v[..chunk.len()]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn keys_separate_every_component() {
        let l = Label::root().child(2);
        let base = stream_key(7, 3, &l, Channel::Motion, 10);
        assert_eq!(base, stream_key(7, 3, &l, Channel::Motion, 10));
        let others = [
            stream_key(8, 3, &l, Channel::Motion, 10),
            stream_key(7, 4, &l, Channel::Motion, 10),
            stream_key(7, 3, &Label::root().child(3), Channel::Motion, 10),
            stream_key(7, 3, &l.child(1), Channel::Motion, 10),
            stream_key(7, 3, &l, Channel::Event, 10),
            stream_key(7, 3, &l, Channel::Motion, 11),
        ];
        assert!(others.iter().all(|&k| k != base));
    }

    #[test]
    fn uniform_moments() {
        let mut rng = CounterRng::new(42);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.005);
        assert!((var - 1.0 / 12.0).abs() < 0.002);
        assert!(xs.iter().all(|&x| (0.0..1.0).contains(&x)));
        let _: f64 = rng.random();
    }
}
