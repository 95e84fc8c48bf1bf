//! Weight distributions of prefix codes and the checks on their shape.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{binomial_u128, distance_floor, log2_binomial, BoundReport};
use crate::builder::BuilderState;
use crate::error::{Error, Result};
use crate::gf2::encode_prefix_bits;
use crate::inner::InnerCode;

/// `w[i]` counts messages whose length-`n` codeword has weight `i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WeightDistribution {
    n: usize,
    k: usize,
    w: Vec<u64>,
}

impl WeightDistribution {
    /// Wraps arbitrary counts, e.g. a hypothetical spectrum. `counts` has
    /// one entry per weight `0..=n`.
    pub fn from_counts(k: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidParameter(
                "a spectrum needs at least w_0".into(),
            ));
        }
        Ok(Self {
            n: counts.len() - 1,
            k,
            w: counts,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of messages at weight `i`; zero beyond `n`.
    pub fn count(&self, i: usize) -> u64 {
        self.w.get(i).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &[u64] {
        &self.w
    }

    pub fn total(&self) -> u128 {
        self.w.iter().map(|&c| c as u128).sum()
    }

    /// Smallest positive weight present, if any.
    pub fn min_positive_weight(&self) -> Option<usize> {
        (1..=self.n).find(|&i| self.w[i] > 0)
    }
}

/// Messages at or above this length are enumerated in parallel chunks.
const PARALLEL_MIN_K: usize = 12;
const CHUNK_BITS: usize = 10;

/// Exact weight counts over all `2^k` messages, via Gray-code enumeration.
pub fn weight_distribution(code: &InnerCode, n: usize) -> Result<WeightDistribution> {
    let g = code.matrix();
    let k = g.k();
    if n < k {
        return Err(Error::Underdetermined { n, k });
    }
    if n > g.num_rows() {
        return Err(Error::NotEnoughRows {
            requested: n,
            available: g.num_rows(),
        });
    }
    let columns: Vec<Vec<u64>> = (0..k)
        .map(|b| g.column(k - b, n).blocks().to_vec())
        .collect();

    let scan = |base: u64, low: usize| -> Vec<u64> {
        let mut hist = vec![0u64; n + 1];
        let mut cw = encode_prefix_bits(g, base, n)
            .expect("length checked above")
            .blocks()
            .to_vec();
        let weight = |cw: &[u64]| cw.iter().map(|b| b.count_ones() as usize).sum::<usize>();
        hist[weight(&cw)] += 1;
        for i in 1u64..(1u64 << low) {
            let bit = i.trailing_zeros() as usize;
            for (c, col) in cw.iter_mut().zip(&columns[bit]) {
                *c ^= col;
            }
            hist[weight(&cw)] += 1;
        }
        hist
    };

    let w = if k < PARALLEL_MIN_K {
        scan(0, k)
    } else {
        let low = CHUNK_BITS;
        (0..1u64 << (k - low))
            .into_par_iter()
            .map(|c| scan(c << low, low))
            .reduce(
                || vec![0u64; n + 1],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            )
    };
    Ok(WeightDistribution { n, k, w })
}

/// Minimum weight over nonzero messages.
pub fn min_distance(code: &InnerCode, n: usize) -> Result<usize> {
    let w = weight_distribution(code, n)?;
    // w_0 may exceed 1 only for a non-injective prefix, which n >= k with an
    // identity head rules out
    Ok(w.min_positive_weight()
        .expect("k >= 1 gives a nonzero codeword"))
}

/// `C(n, i) 2^{k-n}`.
pub fn ideal_weight(n: usize, k: usize, i: usize) -> Result<f64> {
    if i > n || k > n {
        return Err(Error::InvalidParameter(format!(
            "ideal weight needs i <= n and k <= n, got n={n} k={k} i={i}"
        )));
    }
    let scale = (k as f64 - n as f64).exp2();
    Ok(match binomial_u128(n as u64, i as u64) {
        Some(c) => c as f64 * scale,
        None => (log2_binomial(n as u64, i as u64) + k as f64 - n as f64).exp2(),
    })
}

/// `prod_{j=k+1}^{n-1} (1 + 1/sqrt j)`, equal to 1 when the range is empty.
pub fn pi_bound(k: usize, n: usize) -> f64 {
    (k + 1..n).map(|j| 1.0 + 1.0 / (j as f64).sqrt()).product()
}

/// `(2/3)^t C(k+t, i)`.
pub fn bin_process_bound(k: usize, t: usize, i: usize) -> Result<f64> {
    if i > k + t {
        return Err(Error::InvalidParameter(format!(
            "bin bound needs i <= k + t, got k={k} t={t} i={i}"
        )));
    }
    let c = binomial_u128((k + t) as u64, i as u64)
        .map(|c| c as f64)
        .unwrap_or_else(|| log2_binomial((k + t) as u64, i as u64).exp2());
    Ok((2.0f64 / 3.0).powi(t as i32) * c)
}

/// One step of the bin process: bin `i` keeps `stay` of itself and receives
/// `rise` of bin `i - 1`. Both fractions must be at most 2/3.
pub fn bin_process_step(bins: &[f64], stay: f64, rise: f64) -> Vec<f64> {
    assert!((0.0..=2.0 / 3.0).contains(&stay) && (0.0..=2.0 / 3.0).contains(&rise));
    (0..=bins.len())
        .map(|i| {
            let own = bins.get(i).map_or(0.0, |b| stay * b);
            let below = if i > 0 { rise * bins[i - 1] } else { 0.0 };
            own + below
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SpectrumClaim {
    /// No nonzero codeword of weight at most `(n-k)/(55 log2 n)`.
    Distance,
    /// `w_i <= 2n^4 + w*_i Pi_{k,n}`.
    Weight,
    /// `|M| < 2n^4`.
    Marked,
}

impl fmt::Display for SpectrumClaim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Distance => "distance",
            Self::Weight => "weight",
            Self::Marked => "marked",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumCheck {
    pub claim: SpectrumClaim,
    /// Weight index; the marked-set row uses the current length.
    pub i: usize,
    pub observed: u64,
    pub bound: f64,
    pub pass: bool,
    /// False for the distance claim at lengths below [`DISTANCE_ENFORCED_FROM`].
    pub enforced: bool,
}

impl SpectrumCheck {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.claim, self.i, self.observed, self.bound, self.pass
        )
    }

    pub fn to_bound_report(&self, n: usize, k: usize) -> BoundReport {
        BoundReport {
            name: format!("spectrum_{}", self.claim),
            inputs: vec![
                ("n".into(), n as f64),
                ("k".into(), k as f64),
                ("i".into(), self.i as f64),
                ("enforced".into(), self.enforced as u8 as f64),
            ],
            bound_value: self.bound,
            observed: Some(self.observed as f64),
            pass: self.pass,
        }
    }
}

/// Lengths below this only report the distance claim.
pub const DISTANCE_ENFORCED_FROM: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub n: usize,
    pub k: usize,
    pub checks: Vec<SpectrumCheck>,
}

impl SpectrumReport {
    pub const CSV_HEADER: &'static str = "claim,i,observed,bound,pass";

    /// True when every enforced check passes.
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass || !c.enforced)
    }

    pub fn failures(&self) -> impl Iterator<Item = &SpectrumCheck> {
        self.checks.iter().filter(|c| c.enforced && !c.pass)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for c in &self.checks {
            out.push_str(&c.csv_row());
            out.push('\n');
        }
        out
    }
}

/// Evaluates the distance and weight claims at length `n`, plus the
/// marked-set size when the builder state is supplied.
pub fn check_spectrum_bounds(
    code: &InnerCode,
    n: usize,
    state: Option<&BuilderState>,
) -> Result<SpectrumReport> {
    let w = weight_distribution(code, n)?;
    Ok(check_distribution(&w, state))
}

/// Same as [`check_spectrum_bounds`] for an already computed distribution.
pub fn check_distribution(w: &WeightDistribution, state: Option<&BuilderState>) -> SpectrumReport {
    let (n, k) = (w.n(), w.k());
    let floor = distance_floor(n, k);
    let enforce_distance = n >= DISTANCE_ENFORCED_FROM;
    let n4 = 2.0 * (n as f64).powi(4);
    let pi = pi_bound(k, n);
    let mut checks = Vec::with_capacity(n + 1);
    for i in 1..=n {
        let observed = w.count(i);
        if (i as f64) <= floor {
            checks.push(SpectrumCheck {
                claim: SpectrumClaim::Distance,
                i,
                observed,
                bound: 0.0,
                pass: observed == 0,
                enforced: enforce_distance,
            });
        } else {
            let ideal = ideal_weight(n, k, i).expect("i <= n and k <= n");
            let bound = n4 + ideal * pi;
            checks.push(SpectrumCheck {
                claim: SpectrumClaim::Weight,
                i,
                observed,
                bound,
                pass: observed as f64 <= bound,
                enforced: true,
            });
        }
    }
    if let Some(s) = state {
        let sn = s.n();
        let observed = s.marked_count() as u64;
        let bound = 2.0 * (sn as f64).powi(4);
        checks.push(SpectrumCheck {
            claim: SpectrumClaim::Marked,
            i: sn,
            observed,
            bound,
            pass: (observed as f64) < bound,
            enforced: true,
        });
    }
    SpectrumReport { n, k, checks }
}
