//! Concatenated rateless code: a Reed-Solomon outer code over `m`-bit symbols
//! whose codeword is split into `L` inner blocks of `beta` bits, each encoded
//! with the rateless inner code and emitted row by row.
//!
//! Outer symbols go to inner blocks round robin: symbol `s` (1-based) lands in
//! block `((s-1) mod L) + 1`, slot `ceil(s/L)`. Stream position `t` carries row
//! `ceil(t/L)` of block `((t-1) mod L) + 1`.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gf2::{BitWord, GeneratorMatrix};
use crate::inner::InnerCode;
use crate::outer::{OuterCode, OuterCodeSpec, ReedSolomon, Symbol};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ConcatParams {
    pub beta: usize,
    /// Bits per outer symbol, `log2 beta`.
    pub m: usize,
    pub k: usize,
    pub k_out: usize,
    pub n_out: usize,
    pub pad_symbols: usize,
    pub l_in: usize,
    pub k_in: usize,
    pub radius: usize,
}

impl ConcatParams {
    /// Outer length `ceil(k_out (1 + beta^{-1/2}))`, capped at `2^m - 1`.
    pub fn derive(k: usize, beta: usize) -> Result<Self> {
        let (m, k_out) = Self::split(k, beta)?;
        let target = (k_out as f64 * (1.0 + 1.0 / (beta as f64).sqrt())).ceil() as usize;
        let cap = (1usize << m) - 1;
        Self::with_n_out(k, beta, target.min(cap))
    }

    /// Like [`derive`](Self::derive) with an explicit outer length.
    pub fn with_n_out(k: usize, beta: usize, n_out: usize) -> Result<Self> {
        let (m, k_out) = Self::split(k, beta)?;
        let cap = (1usize << m) - 1;
        if k_out > cap {
            return Err(Error::InvalidParameter(format!(
                "k_out={k_out} symbols exceed the field-size cap 2^{m} - 1 = {cap}"
            )));
        }
        if !(k_out <= n_out && n_out <= cap) {
            return Err(Error::InvalidParameter(format!(
                "n_out={n_out} must lie in k_out..=2^m - 1 = {k_out}..={cap}"
            )));
        }
        let per_block = beta / m;
        let pad_symbols = (per_block - n_out % per_block) % per_block;
        let l_in = (n_out + pad_symbols) / per_block;
        Ok(Self {
            beta,
            m,
            k,
            k_out,
            n_out,
            pad_symbols,
            l_in,
            k_in: beta,
            radius: (n_out - k_out) / 2,
        })
    }

    fn split(k: usize, beta: usize) -> Result<(usize, usize)> {
        if beta < 4 || !beta.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "beta must be a power of two >= 4, got {beta}"
            )));
        }
        let m = beta.trailing_zeros() as usize;
        if m > 16 {
            return Err(Error::InvalidParameter(format!(
                "beta=2^{m} exceeds 16-bit symbols"
            )));
        }
        if !beta.is_multiple_of(m) {
            return Err(Error::InvalidParameter(format!(
                "inner blocks of {beta} bits must hold whole {m}-bit symbols"
            )));
        }
        if k == 0 || !k.is_multiple_of(m) {
            return Err(Error::InvalidParameter(format!(
                "k={k} must be a positive multiple of {m}"
            )));
        }
        Ok((m, k / m))
    }

    /// Outer symbols per inner block.
    pub fn symbols_per_block(&self) -> usize {
        self.k_in / self.m
    }

    /// Achieved outer rate `k_out / n_out`.
    pub fn outer_rate(&self) -> f64 {
        self.k_out as f64 / self.n_out as f64
    }

    /// Guaranteed-correctable fraction of outer symbols.
    pub fn correctable_fraction(&self) -> f64 {
        self.radius as f64 / self.n_out as f64
    }

    pub fn outer_spec(&self) -> OuterCodeSpec {
        OuterCodeSpec {
            symbol_bits: self.m,
            k_out: self.k_out,
            n_out: self.n_out,
            decoding_radius: self.radius,
        }
    }
}

impl fmt::Display for ConcatParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "beta={} m={} k={} k_out={} n_out={} pad_symbols={} l_in={} k_in={} radius={} outer_rate={}",
            self.beta,
            self.m,
            self.k,
            self.k_out,
            self.n_out,
            self.pad_symbols,
            self.l_in,
            self.k_in,
            self.radius,
            self.outer_rate()
        )
    }
}

/// `(row, block)` carried at stream position `t`, all 1-based.
pub fn stream_position(t: usize, l_in: usize) -> (usize, usize) {
    assert!(t >= 1 && l_in >= 1);
    (t.div_ceil(l_in), (t - 1) % l_in + 1)
}

/// `pi` with stream bit `t` equal to message bit `pi[t-1]` for `t <= k`.
///
/// Needs `L` to divide `k_out` so that the first `k` stream positions read
/// only systematic rows of message-carrying blocks.
pub fn systematic_permutation(params: &ConcatParams) -> Result<Vec<usize>> {
    let l = params.l_in;
    if !params.k_out.is_multiple_of(l) {
        return Err(Error::InvalidParameter(format!(
            "the first k stream bits mix in parity symbols unless L={l} divides k_out={}",
            params.k_out
        )));
    }
    let m = params.m;
    Ok((1..=params.k)
        .map(|t| {
            let (row, block) = stream_position(t, l);
            let slot = row.div_ceil(m);
            let bit = (row - 1) % m + 1;
            let symbol = block + (slot - 1) * l;
            (symbol - 1) * m + bit
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct ConcatCode {
    params: ConcatParams,
    inner: InnerCode,
    outer: ReedSolomon,
}

impl ConcatCode {
    pub fn new(params: ConcatParams, g: GeneratorMatrix) -> Result<Self> {
        if g.k() != params.k_in {
            return Err(Error::InvalidParameter(format!(
                "inner matrix has k={} but the parameters need k_in={}",
                g.k(),
                params.k_in
            )));
        }
        let outer = ReedSolomon::new(params.m, params.k_out, params.n_out)?;
        Ok(Self {
            params,
            inner: InnerCode::new(g),
            outer,
        })
    }

    pub fn params(&self) -> &ConcatParams {
        &self.params
    }

    pub fn inner(&self) -> &InnerCode {
        &self.inner
    }

    pub fn outer(&self) -> &ReedSolomon {
        &self.outer
    }

    /// Longest stream the inner matrix supports.
    pub fn max_len(&self) -> usize {
        self.params.l_in * self.inner.max_len()
    }

    fn inner_len(&self, n: usize) -> Result<usize> {
        let l = self.params.l_in;
        if !n.is_multiple_of(l) {
            return Err(Error::InvalidParameter(format!(
                "stream length {n} is not a multiple of L={l}"
            )));
        }
        let n_in = n / l;
        if n_in < self.params.k_in {
            return Err(Error::Underdetermined {
                n: n_in,
                k: self.params.k_in,
            });
        }
        Ok(n_in)
    }

    fn to_symbols(&self, bits: &BitWord) -> Vec<Symbol> {
        let m = self.params.m;
        (0..bits.len() / m)
            .map(|s| (1..=m).fold(0, |acc, b| (acc << 1) | bits.get(s * m + b) as Symbol))
            .collect()
    }

    fn word_from_symbols(&self, symbols: &[Symbol]) -> BitWord {
        let m = self.params.m;
        let mut out = BitWord::zeros(symbols.len() * m);
        for (s, &sym) in symbols.iter().enumerate() {
            for b in 1..=m {
                out.set(s * m + b, (sym >> (m - b)) & 1 == 1);
            }
        }
        out
    }

    /// The `L` inner messages carrying the padded outer codeword of `msg`.
    pub fn block_messages(&self, msg: &BitWord) -> Result<Vec<BitWord>> {
        if msg.len() != self.params.k {
            return Err(Error::LengthMismatch {
                expected: self.params.k,
                actual: msg.len(),
            });
        }
        let mut symbols = self.outer.encode(&self.to_symbols(msg))?;
        symbols.resize(self.params.n_out + self.params.pad_symbols, 0);
        let l = self.params.l_in;
        Ok((0..l)
            .map(|b| {
                let slots: Vec<Symbol> = symbols.iter().skip(b).step_by(l).copied().collect();
                self.word_from_symbols(&slots)
            })
            .collect())
    }

    pub fn encode(&self, msg: &BitWord, n: usize) -> Result<BitWord> {
        let n_in = self.inner_len(n)?;
        let blocks = self
            .block_messages(msg)?
            .iter()
            .map(|b| self.inner.encode(b, n_in))
            .collect::<Result<Vec<_>>>()?;
        let mut out = BitWord::zeros(n);
        for t in 1..=n {
            let (row, block) = stream_position(t, self.params.l_in);
            out.set(t, blocks[block - 1].get(row));
        }
        Ok(out)
    }

    /// Splits a received stream into its `L` inner words.
    pub fn deinterleave(&self, y: &BitWord) -> Result<Vec<BitWord>> {
        let n_in = self.inner_len(y.len())?;
        let l = self.params.l_in;
        let mut blocks = vec![BitWord::zeros(n_in); l];
        for t in 1..=y.len() {
            let (row, block) = stream_position(t, l);
            blocks[block - 1].set(row, y.get(t));
        }
        Ok(blocks)
    }

    /// ML decisions for every inner block.
    pub fn decode_blocks(&self, y: &BitWord) -> Result<Vec<BitWord>> {
        let words = self.deinterleave(y)?;
        let decoder = self.inner.decoder(words[0].len())?;
        words.par_iter().map(|w| decoder.decode(w)).collect()
    }

    /// Outer decoding of already decided inner blocks.
    pub fn decode_from_blocks(&self, blocks: &[BitWord]) -> Result<BitWord> {
        let l = self.params.l_in;
        let total = self.params.n_out + self.params.pad_symbols;
        let per_block: Vec<Vec<Symbol>> = blocks.iter().map(|b| self.to_symbols(b)).collect();
        let symbols: Vec<Symbol> = (0..total)
            .map(|s| per_block[s % l][s / l])
            .take(self.params.n_out)
            .collect();
        let msg = self.outer.decode(&symbols)?;
        Ok(self.word_from_symbols(&msg))
    }

    pub fn decode(&self, y: &BitWord) -> Result<BitWord> {
        self.decode_from_blocks(&self.decode_blocks(y)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::{build_matrix, BuildConfig};

    #[test]
    fn derive_examples() {
        let p = ConcatParams::derive(48, 16).unwrap();
        assert_eq!(
            (p.m, p.k_out, p.n_out, p.pad_symbols, p.l_in, p.radius),
            (4, 12, 15, 1, 4, 1)
        );
        let p = ConcatParams::derive(4, 4).unwrap();
        assert_eq!(
            (p.m, p.k_out, p.n_out, p.pad_symbols, p.l_in),
            (2, 2, 3, 1, 2)
        );
        assert!(ConcatParams::derive(12, 6).is_err());
        assert!(ConcatParams::derive(12, 8).is_err());
        assert!(ConcatParams::derive(6, 4).is_ok());
        assert!(ConcatParams::derive(5, 4).is_err());
        assert!(ConcatParams::derive(8, 4).is_err());
        let p = ConcatParams::with_n_out(32, 16, 15).unwrap();
        assert_eq!((p.k_out, p.radius, p.l_in, p.pad_symbols), (8, 3, 4, 1));
    }

    #[test]
    fn stream_positions() {
        assert_eq!(stream_position(1, 4), (1, 1));
        assert_eq!(stream_position(6, 4), (2, 2));
    }

    #[test]
    fn permutation_examples() {
        let p = ConcatParams::derive(4, 4).unwrap();
        assert_eq!(systematic_permutation(&p).unwrap(), vec![1, 3, 2, 4]);
        let mut sorted = systematic_permutation(&ConcatParams::derive(48, 16).unwrap()).unwrap();
        sorted.sort();
        assert_eq!(sorted, (1..=48).collect::<Vec<_>>());
    }

    #[test]
    fn small_roundtrip_and_permutation() {
        let params = ConcatParams::derive(4, 4).unwrap();
        let g = build_matrix(4, 12, BuildConfig::strict())
            .unwrap()
            .into_matrix();
        let code = ConcatCode::new(params, g).unwrap();
        let pi = systematic_permutation(&params).unwrap();
        for v in 0..16u64 {
            let msg = BitWord::from_u64(v, 4);
            let c = code.encode(&msg, 24).unwrap();
            assert_eq!(code.decode(&c).unwrap(), msg);
            for (t, &src) in pi.iter().enumerate() {
                assert_eq!(c.get(t + 1), msg.get(src));
            }
        }
        assert!(code.encode(&BitWord::zeros(4), 7).is_err());
        assert!(code.encode(&BitWord::zeros(4), 6).is_err());
    }
}
