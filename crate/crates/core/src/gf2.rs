//! Bit-packed GF(2) vectors and the prefix-extendable generator matrix.
//!
//! Positions are 1-based. When a word is read as an integer, position 1 is the
//! most significant bit, so `"011"` is 3 and the lexicographic order of words
//! coincides with integer order.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BLOCK: usize = 64;

/// A fixed-length vector over GF(2).
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitWord {
    len: usize,
    // position p lives at blocks[(p-1)/64], bit (p-1)%64; padding bits stay zero
    blocks: Vec<u64>,
}

impl BitWord {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            blocks: vec![0; len.div_ceil(BLOCK)],
        }
    }

    /// Builds a word from its integer reading (position 1 = most significant).
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= 64, "from_u64 supports at most 64 bits");
        assert!(
            len == 64 || value >> len == 0,
            "value {value:#x} does not fit in {len} bits"
        );
        let mut w = Self::zeros(len);
        for p in 1..=len {
            if (value >> (len - p)) & 1 == 1 {
                w.set(p, true);
            }
        }
        w
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut w = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                w.set(i + 1, true);
            }
        }
        w
    }

    /// Integer reading of a word of at most 64 bits.
    pub fn to_u64(&self) -> u64 {
        assert!(self.len <= 64, "to_u64 supports at most 64 bits");
        (1..=self.len).fold(0u64, |acc, p| (acc << 1) | self.get(p) as u64)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, pos: usize) -> bool {
        assert!(
            pos >= 1 && pos <= self.len,
            "bit position {pos} out of 1..={}",
            self.len
        );
        let i = pos - 1;
        (self.blocks[i / BLOCK] >> (i % BLOCK)) & 1 == 1
    }

    pub fn set(&mut self, pos: usize, bit: bool) {
        assert!(
            pos >= 1 && pos <= self.len,
            "bit position {pos} out of 1..={}",
            self.len
        );
        let i = pos - 1;
        let mask = 1u64 << (i % BLOCK);
        if bit {
            self.blocks[i / BLOCK] |= mask;
        } else {
            self.blocks[i / BLOCK] &= !mask;
        }
    }

    pub fn flip(&mut self, pos: usize) {
        let b = self.get(pos);
        self.set(pos, !b);
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (1..=self.len).map(move |p| self.get(p))
    }

    /// The first `n` bits.
    pub fn prefix(&self, n: usize) -> Self {
        assert!(n <= self.len);
        let mut w = Self::zeros(n);
        for p in 1..=n {
            if self.get(p) {
                w.set(p, true);
            }
        }
        w
    }

    pub fn xor(&self, other: &Self) -> Result<Self> {
        check_len(self.len, other.len)?;
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a ^ b)
            .collect();
        Ok(Self {
            len: self.len,
            blocks,
        })
    }

    pub(crate) fn blocks(&self) -> &[u64] {
        &self.blocks
    }

    pub(crate) fn from_blocks(len: usize, mut blocks: Vec<u64>) -> Self {
        blocks.resize(len.div_ceil(BLOCK), 0);
        if !len.is_multiple_of(BLOCK) {
            if let Some(last) = blocks.last_mut() {
                *last &= (1u64 << (len % BLOCK)) - 1;
            }
        }
        Self { len, blocks }
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, actual })
    }
}

/// Parity of the bitwise AND of two equal-length words.
pub fn dot(u: &BitWord, v: &BitWord) -> Result<bool> {
    check_len(u.len, v.len)?;
    let ones: u32 = u
        .blocks
        .iter()
        .zip(&v.blocks)
        .map(|(a, b)| (a & b).count_ones())
        .sum();
    Ok(ones & 1 == 1)
}

pub fn hamming_weight(v: &BitWord) -> usize {
    v.blocks.iter().map(|b| b.count_ones() as usize).sum()
}

pub fn hamming_distance(u: &BitWord, v: &BitWord) -> Result<usize> {
    check_len(u.len, v.len)?;
    Ok(u.blocks
        .iter()
        .zip(&v.blocks)
        .map(|(a, b)| (a ^ b).count_ones() as usize)
        .sum())
}

/// Parity of `a & b` for integer-encoded words.
#[inline]
pub(crate) fn parity(a: u64, b: u64) -> bool {
    (a & b).count_ones() & 1 == 1
}

impl fmt::Display for BitWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bits() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitWord({self})")
    }
}

impl FromStr for BitWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidBits(format!(
                    "unexpected character {other:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_bits(&bits))
    }
}

/// An ordered, append-only list of `k`-bit generator rows whose first `k`
/// rows are the identity.
///
/// Rows are kept in integer form, so `k` is limited to 64 columns; the
/// exhaustive algorithms built on top are only practical far below that.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorMatrix {
    k: usize,
    rows: Vec<u64>,
}

pub const MAX_COLUMNS: usize = 64;

impl GeneratorMatrix {
    pub fn identity(k: usize) -> Result<Self> {
        if k == 0 || k > MAX_COLUMNS {
            return Err(Error::UnsupportedK {
                k,
                reason: "generator matrices need 1..=64 columns",
            });
        }
        let rows = (1..=k).map(|i| 1u64 << (k - i)).collect();
        Ok(Self { k, rows })
    }

    /// Builds a matrix from explicit rows; the first `k` must be the identity.
    pub fn from_rows(k: usize, rows: &[BitWord]) -> Result<Self> {
        let mut g = Self::identity(k)?;
        if rows.len() < k {
            return Err(Error::InvalidParameter(format!(
                "a generator matrix needs at least k={k} rows, got {}",
                rows.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            check_len(k, row.len())?;
            if i < k {
                if row.to_u64() != g.rows[i] {
                    return Err(Error::InvalidParameter(format!(
                        "row {} is {row}, expected identity row",
                        i + 1
                    )));
                }
            } else {
                g.rows.push(row.to_u64());
            }
        }
        Ok(g)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Row `i` (1-based).
    pub fn row(&self, i: usize) -> BitWord {
        BitWord::from_u64(self.rows[i - 1], self.k)
    }

    /// Row `i` (1-based) in integer form.
    pub fn row_bits(&self, i: usize) -> u64 {
        self.rows[i - 1]
    }

    pub fn push_row(&mut self, row: &BitWord) -> Result<()> {
        check_len(self.k, row.len())?;
        self.rows.push(row.to_u64());
        Ok(())
    }

    pub(crate) fn push_row_bits(&mut self, row: u64) {
        debug_assert!(self.k == 64 || row >> self.k == 0);
        self.rows.push(row);
    }

    /// Column `j` (1-based) of the first `n` rows, as an `n`-bit word.
    pub fn column(&self, j: usize, n: usize) -> BitWord {
        assert!(j >= 1 && j <= self.k && n <= self.rows.len());
        let shift = self.k - j;
        let mut col = BitWord::zeros(n);
        for (i, r) in self.rows[..n].iter().enumerate() {
            if (r >> shift) & 1 == 1 {
                col.set(i + 1, true);
            }
        }
        col
    }
}

/// The first `n` bits of the codeword of `m`: bit `i` is `dot(R_i, m)`.
pub fn encode_prefix(g: &GeneratorMatrix, m: &BitWord, n: usize) -> Result<BitWord> {
    check_len(g.k, m.len())?;
    encode_prefix_bits(g, m.to_u64(), n)
}

pub(crate) fn encode_prefix_bits(g: &GeneratorMatrix, m: u64, n: usize) -> Result<BitWord> {
    if n > g.rows.len() {
        return Err(Error::NotEnoughRows {
            requested: n,
            available: g.rows.len(),
        });
    }
    let mut blocks = vec![0u64; n.div_ceil(BLOCK)];
    for (i, &r) in g.rows[..n].iter().enumerate() {
        if parity(r, m) {
            blocks[i / BLOCK] |= 1u64 << (i % BLOCK);
        }
    }
    Ok(BitWord::from_blocks(n, blocks))
}

/// Hamming weight of the first `n` bits of the codeword of `m`.
pub(crate) fn codeword_weight(g: &GeneratorMatrix, m: u64, n: usize) -> usize {
    g.rows[..n].iter().filter(|&&r| parity(r, m)).count()
}
