//! Deterministic seed derivation.
//!
//! Every stochastic call in the crate receives a seed produced by
//! [`derive_seed`] from a run's master seed and an ordered tuple of labels, so
//! reruns are reproducible and independent of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG used for every stochastic step.
pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One component of a seed derivation path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedLabel<'a> {
    Int(u64),
    Str(&'a str),
}

impl From<u64> for SeedLabel<'_> {
    fn from(v: u64) -> Self {
        SeedLabel::Int(v)
    }
}

impl From<usize> for SeedLabel<'_> {
    fn from(v: usize) -> Self {
        SeedLabel::Int(v as u64)
    }
}

impl From<u32> for SeedLabel<'_> {
    fn from(v: u32) -> Self {
        SeedLabel::Int(u64::from(v))
    }
}

impl<'a> From<&'a str> for SeedLabel<'a> {
    fn from(v: &'a str) -> Self {
        SeedLabel::Str(v)
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over a one-byte type tag followed by the label payload
/// (little-endian bytes for integers, UTF-8 for strings).
fn label_hash(label: &SeedLabel<'_>) -> u64 {
    let mut h = FNV_OFFSET;
    let mut feed = |b: u8| {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    };
    match label {
        SeedLabel::Int(v) => {
            feed(b'i');
            v.to_le_bytes().into_iter().for_each(&mut feed);
        }
        SeedLabel::Str(s) => {
            feed(b's');
            s.bytes().for_each(&mut feed);
        }
    }
    h
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// SplitMix64 chain seeded by `master`, folding in each label's hash in order.
pub fn derive_seed(master: u64, labels: &[SeedLabel<'_>]) -> u64 {
    let mut state = master;
    let mut out = splitmix64(&mut state);
    for label in labels {
        state = out ^ label_hash(label);
        out = splitmix64(&mut state);
    }
    out
}

/// `derive_seed(master, &[a.into(), b.into(), ...])` without the boilerplate.
#[macro_export]
macro_rules! seed {
    ($master:expr $(, $label:expr)* $(,)?) => {
        $crate::seed::derive_seed($master, &[$($crate::seed::SeedLabel::from($label)),*])
    };
}
