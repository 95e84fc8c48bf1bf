//! The inner code: prefix encoding and exhaustive maximum-likelihood decoding.
//!
//! Decoding scans all `2^k` messages in Gray-code order, so each step costs
//! one column XOR and a popcount. Ties in distance go to the smallest message.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gf2::{encode_prefix, encode_prefix_bits, BitWord, GeneratorMatrix};

/// Messages at or above this length are scanned in parallel.
const PARALLEL_MIN_K: usize = 14;
/// Low message bits handled by one sequential Gray-code run.
const CHUNK_BITS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct InnerCode {
    g: GeneratorMatrix,
}

impl InnerCode {
    pub fn new(g: GeneratorMatrix) -> Self {
        Self { g }
    }

    pub fn k(&self) -> usize {
        self.g.k()
    }

    pub fn matrix(&self) -> &GeneratorMatrix {
        &self.g
    }

    /// Longest prefix the current matrix supports.
    pub fn max_len(&self) -> usize {
        self.g.num_rows()
    }

    pub fn encode(&self, m: &BitWord, n: usize) -> Result<BitWord> {
        encode_prefix(&self.g, m, n)
    }

    /// A decoder for received words of length `n`.
    pub fn decoder(&self, n: usize) -> Result<MlDecoder> {
        MlDecoder::new(self, n)
    }

    /// Closest message to `y` under the prefix code of length `y.len()`.
    pub fn ml_decode(&self, y: &BitWord) -> Result<BitWord> {
        let dec = self.decoder(y.len())?;
        Ok(BitWord::from_u64(dec.decode_bits(y)?, self.k()))
    }
}

/// Column-major view of the first `n` rows, prepared for repeated decoding.
#[derive(Clone, Debug)]
pub struct MlDecoder {
    k: usize,
    n: usize,
    blocks: usize,
    /// `columns[b]` is the codeword of the message with only integer bit `b` set.
    columns: Vec<Vec<u64>>,
    g: GeneratorMatrix,
}

impl MlDecoder {
    fn new(code: &InnerCode, n: usize) -> Result<Self> {
        let k = code.k();
        if n < k {
            return Err(Error::Underdetermined { n, k });
        }
        if n > code.max_len() {
            return Err(Error::NotEnoughRows {
                requested: n,
                available: code.max_len(),
            });
        }
        let columns = (0..k)
            .map(|b| code.g.column(k - b, n).blocks().to_vec())
            .collect();
        Ok(Self {
            k,
            n,
            blocks: n.div_ceil(64),
            columns,
            g: code.g.clone(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Minimum (distance, message) over messages `base .. base + 2^low_bits`.
    fn scan(&self, y: &[u64], base: u64, low_bits: usize) -> (usize, u64) {
        let mut cw = encode_prefix_bits(&self.g, base, self.n)
            .expect("length checked at construction")
            .blocks()
            .to_vec();
        let dist = |cw: &[u64]| -> usize {
            cw.iter()
                .zip(y)
                .map(|(a, b)| (a ^ b).count_ones() as usize)
                .sum()
        };
        let mut msg = base;
        let mut best = (dist(&cw), msg);
        for i in 1u64..(1u64 << low_bits) {
            let bit = i.trailing_zeros() as usize;
            msg ^= 1 << bit;
            for (c, col) in cw.iter_mut().zip(&self.columns[bit]) {
                *c ^= col;
            }
            let cand = (dist(&cw), msg);
            if cand < best {
                best = cand;
            }
        }
        best
    }

    pub(crate) fn decode_bits(&self, y: &BitWord) -> Result<u64> {
        if y.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: y.len(),
            });
        }
        let y = y.blocks();
        debug_assert_eq!(y.len(), self.blocks);
        if self.k < PARALLEL_MIN_K {
            return Ok(self.scan(y, 0, self.k).1);
        }
        let low = CHUNK_BITS.min(self.k);
        let chunks = 1u64 << (self.k - low);
        let best = (0..chunks)
            .into_par_iter()
            .map(|c| self.scan(y, c << low, low))
            .min()
            .expect("at least one chunk");
        Ok(best.1)
    }

    pub fn decode(&self, y: &BitWord) -> Result<BitWord> {
        Ok(BitWord::from_u64(self.decode_bits(y)?, self.k))
    }
}
