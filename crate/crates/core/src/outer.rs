//! Outer code over GF(2^m): a systematic Reed-Solomon code with
//! Berlekamp-Massey / Chien / Forney unique decoding.
//!
//! Codeword symbol `i` (0-based) is the coefficient of `x^{n-1-i}`; the
//! generator has roots `alpha^1 ..= alpha^{n-k}`.

use serde::Serialize;
use thiserror::Error;

use crate::error::{Error, Result};

pub type Symbol = u16;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum DecodeFailure {
    #[error("error locator degree {degree} exceeds the decoding radius {radius}")]
    LocatorTooLong { degree: usize, radius: usize },
    #[error("error locator of degree {degree} has only {roots} roots in the code positions")]
    RootCountMismatch { degree: usize, roots: usize },
    #[error("corrected word still has nonzero syndromes")]
    ResidualSyndrome,
}

/// Primitive polynomials for GF(2^m), indexed by `m - 2`.
const PRIMITIVE: [u32; 15] = [
    0x7, 0xB, 0x13, 0x25, 0x43, 0x89, 0x11D, 0x211, 0x409, 0x805, 0x1053, 0x201B, 0x4443, 0x8003,
    0x1100B,
];

/// Log/antilog tables for GF(2^m).
#[derive(Clone, Debug)]
pub struct Field {
    m: usize,
    order: usize,
    exp: Vec<Symbol>,
    log: Vec<u32>,
}

impl Field {
    pub fn new(m: usize) -> Result<Self> {
        if !(2..=16).contains(&m) {
            return Err(Error::InvalidParameter(format!(
                "symbol size must be 2..=16 bits, got {m}"
            )));
        }
        let poly = PRIMITIVE[m - 2];
        let order = (1usize << m) - 1;
        let mut exp = vec![0 as Symbol; 2 * order];
        let mut log = vec![0u32; order + 1];
        let mut x: u32 = 1;
        for (i, e) in exp.iter_mut().take(order).enumerate() {
            *e = x as Symbol;
            log[x as usize] = i as u32;
            x <<= 1;
            if x >> m != 0 {
                x ^= poly;
            }
        }
        for i in order..2 * order {
            exp[i] = exp[i - order];
        }
        Ok(Self { m, order, exp, log })
    }

    pub fn bits(&self) -> usize {
        self.m
    }

    /// Number of nonzero elements.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn mul(&self, a: Symbol, b: Symbol) -> Symbol {
        if a == 0 || b == 0 {
            return 0;
        }
        self.exp[(self.log[a as usize] + self.log[b as usize]) as usize]
    }

    pub fn inv(&self, a: Symbol) -> Symbol {
        assert!(a != 0, "zero has no inverse");
        self.exp[(self.order - self.log[a as usize] as usize) % self.order]
    }

    pub fn div(&self, a: Symbol, b: Symbol) -> Symbol {
        self.mul(a, self.inv(b))
    }

    /// `alpha^e` for any integer exponent.
    pub fn alpha_pow(&self, e: i64) -> Symbol {
        self.exp[e.rem_euclid(self.order as i64) as usize]
    }

    /// Evaluates a polynomial given lowest degree first.
    fn eval(&self, poly: &[Symbol], x: Symbol) -> Symbol {
        poly.iter().rev().fold(0, |acc, &c| self.mul(acc, x) ^ c)
    }
}

/// The parameters every outer code exposes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct OuterCodeSpec {
    pub symbol_bits: usize,
    pub k_out: usize,
    pub n_out: usize,
    pub decoding_radius: usize,
}

pub trait OuterCode: Send + Sync {
    fn spec(&self) -> OuterCodeSpec;

    /// Systematic encoding: the first `k_out` symbols equal the message.
    fn encode(&self, message: &[Symbol]) -> Result<Vec<Symbol>>;

    /// Recovers the message when at most `decoding_radius` symbols are wrong.
    /// Detected failures come back as [`Error::OuterDecode`].
    fn decode(&self, received: &[Symbol]) -> Result<Vec<Symbol>>;
}

#[derive(Clone, Debug)]
pub struct ReedSolomon {
    field: Field,
    k: usize,
    n: usize,
    /// Generator polynomial, lowest degree first, monic of degree `n - k`.
    generator: Vec<Symbol>,
}

impl ReedSolomon {
    pub fn new(symbol_bits: usize, k_out: usize, n_out: usize) -> Result<Self> {
        let field = Field::new(symbol_bits)?;
        if !(1 <= k_out && k_out <= n_out && n_out <= field.order()) {
            return Err(Error::InvalidParameter(format!(
                "Reed-Solomon needs 1 <= k <= n <= 2^m - 1, got k={k_out} n={n_out} m={symbol_bits}"
            )));
        }
        let mut generator = vec![1 as Symbol];
        for j in 1..=(n_out - k_out) {
            // multiply by (x + alpha^j)
            let root = field.alpha_pow(j as i64);
            let mut next = vec![0 as Symbol; generator.len() + 1];
            for (d, &c) in generator.iter().enumerate() {
                next[d + 1] ^= c;
                next[d] ^= field.mul(c, root);
            }
            generator = next;
        }
        Ok(Self {
            field,
            k: k_out,
            n: n_out,
            generator,
        })
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    fn check_symbols(&self, word: &[Symbol], expected: usize) -> Result<()> {
        if word.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: word.len(),
            });
        }
        if let Some(&s) = word.iter().find(|&&s| s as usize > self.field.order()) {
            return Err(Error::InvalidParameter(format!(
                "symbol {s} does not fit in {} bits",
                self.field.bits()
            )));
        }
        Ok(())
    }

    /// `S_j = r(alpha^j)` for `j = 1 ..= n - k`.
    fn syndromes(&self, word: &[Symbol]) -> Vec<Symbol> {
        (1..=self.n - self.k)
            .map(|j| {
                let x = self.field.alpha_pow(j as i64);
                // word[0] is the highest-degree coefficient
                word.iter().fold(0, |acc, &c| self.field.mul(acc, x) ^ c)
            })
            .collect()
    }

    fn berlekamp_massey(&self, s: &[Symbol]) -> Vec<Symbol> {
        let f = &self.field;
        let mut c = vec![1 as Symbol];
        let mut b = vec![1 as Symbol];
        let mut l = 0usize;
        let mut shift = 1usize;
        let mut last = 1 as Symbol;
        for r in 0..s.len() {
            let mut d = s[r];
            for i in 1..=l.min(c.len() - 1) {
                d ^= f.mul(c[i], s[r - i]);
            }
            if d == 0 {
                shift += 1;
                continue;
            }
            let coef = f.div(d, last);
            let mut next = c.clone();
            if next.len() < b.len() + shift {
                next.resize(b.len() + shift, 0);
            }
            for (i, &bi) in b.iter().enumerate() {
                next[i + shift] ^= f.mul(coef, bi);
            }
            if 2 * l <= r {
                l = r + 1 - l;
                b = std::mem::replace(&mut c, next);
                last = d;
                shift = 1;
            } else {
                c = next;
                shift += 1;
            }
        }
        c.truncate(l + 1);
        c
    }

    fn try_decode(&self, received: &[Symbol]) -> std::result::Result<Vec<Symbol>, DecodeFailure> {
        let f = &self.field;
        let nsym = self.n - self.k;
        let s = self.syndromes(received);
        if s.iter().all(|&x| x == 0) {
            return Ok(received[..self.k].to_vec());
        }
        let lambda = self.berlekamp_massey(&s);
        let degree = lambda.len() - 1;
        let radius = nsym / 2;
        if degree > radius {
            return Err(DecodeFailure::LocatorTooLong { degree, radius });
        }
        // error at codeword index i sits at power n-1-i, locator X = alpha^{n-1-i}
        let positions: Vec<usize> = (0..self.n)
            .filter(|&i| {
                let power = (self.n - 1 - i) as i64;
                f.eval(&lambda, f.alpha_pow(-power)) == 0
            })
            .collect();
        if positions.len() != degree {
            return Err(DecodeFailure::RootCountMismatch {
                degree,
                roots: positions.len(),
            });
        }
        // Omega = S(x) Lambda(x) mod x^{nsym}
        let mut omega = vec![0 as Symbol; nsym];
        for (i, &si) in s.iter().enumerate() {
            for (j, &lj) in lambda.iter().enumerate() {
                if i + j < nsym {
                    omega[i + j] ^= f.mul(si, lj);
                }
            }
        }
        // formal derivative keeps the odd-degree terms
        let d_lambda: Vec<Symbol> = lambda
            .iter()
            .enumerate()
            .skip(1)
            .map(|(j, &c)| if j % 2 == 1 { c } else { 0 })
            .collect();
        let mut corrected = received.to_vec();
        for &i in &positions {
            let x_inv = f.alpha_pow(-((self.n - 1 - i) as i64));
            let den = f.eval(&d_lambda, x_inv);
            if den == 0 {
                return Err(DecodeFailure::ResidualSyndrome);
            }
            corrected[i] ^= f.div(f.eval(&omega, x_inv), den);
        }
        if self.syndromes(&corrected).iter().any(|&x| x != 0) {
            return Err(DecodeFailure::ResidualSyndrome);
        }
        Ok(corrected[..self.k].to_vec())
    }
}

impl OuterCode for ReedSolomon {
    fn spec(&self) -> OuterCodeSpec {
        OuterCodeSpec {
            symbol_bits: self.field.bits(),
            k_out: self.k,
            n_out: self.n,
            decoding_radius: (self.n - self.k) / 2,
        }
    }

    fn encode(&self, message: &[Symbol]) -> Result<Vec<Symbol>> {
        self.check_symbols(message, self.k)?;
        let f = &self.field;
        let nsym = self.n - self.k;
        // remainder of m(x) x^{nsym} modulo the generator, by long division
        // over coefficients highest degree first
        let mut work: Vec<Symbol> = message.to_vec();
        work.resize(self.n, 0);
        for i in 0..self.k {
            let coef = work[i];
            if coef == 0 {
                continue;
            }
            // generator highest degree first is generator.rev(); leading 1
            for (j, &g) in self.generator.iter().rev().enumerate().skip(1) {
                work[i + j] ^= f.mul(coef, g);
            }
        }
        let mut out = message.to_vec();
        out.extend_from_slice(&work[self.k..self.k + nsym]);
        Ok(out)
    }

    fn decode(&self, received: &[Symbol]) -> Result<Vec<Symbol>> {
        self.check_symbols(received, self.n)?;
        Ok(self.try_decode(received)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn field_tables_are_consistent() {
        for m in 2..=12 {
            let f = Field::new(m).unwrap();
            for a in 1..=f.order() as Symbol {
                assert_eq!(f.mul(a, f.inv(a)), 1, "m={m} a={a}");
            }
        }
        assert!(Field::new(1).is_err());
        assert!(Field::new(17).is_err());
    }

    #[test]
    fn zero_message_gives_zero_codeword() {
        let rs = ReedSolomon::new(4, 12, 15).unwrap();
        assert_eq!(rs.encode(&[0; 12]).unwrap(), vec![0; 15]);
    }

    #[test]
    fn codewords_have_zero_syndromes() {
        let rs = ReedSolomon::new(4, 9, 15).unwrap();
        let m: Vec<Symbol> = (1..=9).collect();
        let c = rs.encode(&m).unwrap();
        assert_eq!(&c[..9], &m[..]);
        assert!(rs.syndromes(&c).iter().all(|&s| s == 0));
    }

    #[test]
    fn corrects_up_to_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &(m, k, n) in &[
            (4usize, 12usize, 15usize),
            (4, 8, 15),
            (8, 200, 255),
            (3, 3, 7),
        ] {
            let rs = ReedSolomon::new(m, k, n).unwrap();
            let radius = rs.spec().decoding_radius;
            for _ in 0..50 {
                let msg: Vec<Symbol> = (0..k)
                    .map(|_| rng.gen_range(0..1u32 << m) as Symbol)
                    .collect();
                let mut c = rs.encode(&msg).unwrap();
                let errs = rng.gen_range(0..=radius);
                let mut hit = std::collections::BTreeSet::new();
                while hit.len() < errs {
                    hit.insert(rng.gen_range(0..n));
                }
                for &i in &hit {
                    c[i] ^= rng.gen_range(1..1u32 << m) as Symbol;
                }
                assert_eq!(rs.decode(&c).unwrap(), msg, "m={m} k={k} n={n} errs={errs}");
            }
        }
    }

    #[test]
    fn beyond_radius_is_flagged_or_wrong_but_never_panics() {
        let rs = ReedSolomon::new(4, 12, 15).unwrap();
        let msg: Vec<Symbol> = (0..12).collect();
        let mut c = rs.encode(&msg).unwrap();
        c[0] ^= 3;
        c[5] ^= 7;
        let out = rs.decode(&c);
        assert!(out.is_err() || out.unwrap() != msg);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(ReedSolomon::new(4, 12, 16).is_err());
        assert!(ReedSolomon::new(4, 0, 15).is_err());
        let rs = ReedSolomon::new(2, 2, 3).unwrap();
        assert!(rs.encode(&[1]).is_err());
        assert!(rs.encode(&[1, 4]).is_err());
        assert!(rs.decode(&[1, 2]).is_err());
    }
}
