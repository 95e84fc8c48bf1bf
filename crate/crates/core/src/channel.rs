//! Seeded binary symmetric channel and pairwise error probabilities.
//!
//! Noise for a stream is a ChaCha20 keystream keyed by
//! `SHA-256(domain || master_seed || stream_index)`, so any stream can be
//! regenerated on its own regardless of execution order.

use num_bigint::BigUint;
use rand::distributions::{Bernoulli, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::analysis::{binomial_big, log2_binomial};
use crate::error::{Error, Result};
use crate::gf2::BitWord;

/// Identifies the noise generator. Changing the derivation changes this id.
pub const PRNG_ID: &str = "chacha20-sha256seed-v1";

const NOISE_DOMAIN: &[u8] = b"rateless/bsc-noise";

/// A ChaCha20 generator keyed by a domain tag, master seed and stream index.
pub fn stream_rng(domain: &[u8], master_seed: u64, stream_index: u64) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update((domain.len() as u64).to_le_bytes());
    h.update(domain);
    h.update(master_seed.to_le_bytes());
    h.update(stream_index.to_le_bytes());
    let key: [u8; 32] = h.finalize().into();
    ChaCha20Rng::from_seed(key)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSpec {
    p: f64,
    master_seed: u64,
    prng_id: &'static str,
}

impl ChannelSpec {
    pub fn new(p: f64, master_seed: u64) -> Result<Self> {
        if !(p > 0.0 && p < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "crossover probability must lie in (0, 1/2), got {p}"
            )));
        }
        Ok(Self {
            p,
            master_seed,
            prng_id: PRNG_ID,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn prng_id(&self) -> &'static str {
        self.prng_id
    }
}

/// Produces the error pattern added to a transmitted word.
pub trait NoiseSource: Sync {
    fn noise(&self, len: usize, stream_index: u64) -> BitWord;
}

/// Independent Bernoulli(p) flips.
#[derive(Clone, Debug, PartialEq)]
pub struct BscNoise(pub ChannelSpec);

impl NoiseSource for BscNoise {
    fn noise(&self, len: usize, stream_index: u64) -> BitWord {
        let mut rng = stream_rng(NOISE_DOMAIN, self.0.master_seed, stream_index);
        let coin = Bernoulli::new(self.0.p).expect("p validated in ChannelSpec");
        let mut e = BitWord::zeros(len);
        for pos in 1..=len {
            if coin.sample(&mut rng) {
                e.set(pos, true);
            }
        }
        e
    }
}

/// A channel that never flips anything.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ZeroNoise;

impl NoiseSource for ZeroNoise {
    fn noise(&self, len: usize, _stream_index: u64) -> BitWord {
        BitWord::zeros(len)
    }
}

pub fn transmit(c: &BitWord, ch: &ChannelSpec, stream_index: u64) -> BitWord {
    transmit_with(c, &BscNoise(ch.clone()), stream_index)
}

pub fn transmit_with(c: &BitWord, noise: &dyn NoiseSource, stream_index: u64) -> BitWord {
    c.xor(&noise.noise(c.len(), stream_index))
        .expect("noise has the word's length")
}

/// Probability that BSC(p) flips at least half of `i` given positions:
/// `sum_{j=ceil(i/2)}^{i} C(i,j) p^j (1-p)^{i-j}`.
pub fn pair_error_prob(i: usize, p: f64) -> Result<f64> {
    if i == 0 {
        return Err(Error::InvalidParameter("pair error needs i >= 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("p={p} outside [0, 1]")));
    }
    if p == 0.0 || p == 1.0 {
        return Ok(p);
    }
    let (lp, lq) = (p.log2(), (1.0 - p).log2());
    Ok((i.div_ceil(2)..=i)
        .map(|j| (log2_binomial(i as u64, j as u64) + j as f64 * lp + (i - j) as f64 * lq).exp2())
        .sum())
}

/// `-1/2 log2(4p(1-p))`.
pub fn exponent_beta(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "exponent needs p in (0, 1/2), got {p}"
        )));
    }
    Ok(-0.5 * (4.0 * p * (1.0 - p)).log2())
}

/// `pair_error_prob` for rational `p = num/den`, as an exact fraction.
pub fn pair_error_prob_exact(i: usize, num: u64, den: u64) -> Result<(BigUint, BigUint)> {
    if i == 0 || den == 0 || num > den {
        return Err(Error::InvalidParameter(format!(
            "exact pair error needs i >= 1 and 0 <= num <= den, got i={i} {num}/{den}"
        )));
    }
    let (a, b) = (BigUint::from(num), BigUint::from(den - num));
    let mut total = BigUint::from(0u32);
    for j in i.div_ceil(2)..=i {
        total += binomial_big(i as u64, j as u64) * a.pow(j as u32) * b.pow((i - j) as u32);
    }
    Ok((total, BigUint::from(den).pow(i as u32)))
}

/// Exact test of `P_i <= 2^{-beta i}` for rational `p = num/den`, by
/// comparing squares: `N^2 <= (4 num (den - num))^i` where `P_i = N / den^i`.
pub fn pair_bound_holds_exact(i: usize, num: u64, den: u64) -> Result<bool> {
    let (n, _) = pair_error_prob_exact(i, num, den)?;
    let base = BigUint::from(4u32) * BigUint::from(num) * BigUint::from(den - num);
    Ok(&n * &n <= base.pow(i as u32))
}
