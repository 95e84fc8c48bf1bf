//! Row-by-row construction of the rateless generator matrix.
//!
//! The builder tracks, for every nonzero information word, the weight of its
//! current codeword prefix, together with a monotone set of *marked* words.
//! Each new row is the smallest candidate (in integer order) that
//! `1/(2*sqrt(n))`-splits every unmarked weight class and `1/8`-elevates the
//! lightest nonempty class. Words are indexed by their integer reading, so
//! the candidate order is the lexicographic order of `gf2`.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::{codeword_weight, parity, BitWord, GeneratorMatrix};

/// Largest `k` the builder will enumerate (`2^k` words are tracked).
pub const MAX_BUILD_K: usize = 28;

/// Candidate scans below this `k` run sequentially.
const PARALLEL_SCAN_MIN_K: usize = 11;

/// How small a weight class must be before its words are marked.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MarkingMode {
    /// Mark classes with fewer than `2n^2` unmarked words.
    Strict,
    /// Mark classes with fewer than `threshold_factor * n^2` unmarked words.
    Scaled { threshold_factor: f64 },
}

impl MarkingMode {
    /// True when a class with `unmarked` unmarked words counts as small at length `n`.
    pub fn is_small(&self, unmarked: usize, n: usize) -> bool {
        match *self {
            MarkingMode::Strict => (unmarked as u128) < 2 * (n as u128) * (n as u128),
            MarkingMode::Scaled { threshold_factor } => {
                (unmarked as f64) < threshold_factor * (n as f64) * (n as f64)
            }
        }
    }

    pub fn threshold(&self, n: usize) -> f64 {
        match *self {
            MarkingMode::Strict => 2.0 * (n as f64) * (n as f64),
            MarkingMode::Scaled { threshold_factor } => threshold_factor * (n as f64) * (n as f64),
        }
    }
}

impl fmt::Display for MarkingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MarkingMode::Strict => f.write_str("strict"),
            MarkingMode::Scaled { threshold_factor } => write!(f, "scaled:{threshold_factor}"),
        }
    }
}

impl std::str::FromStr for MarkingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "strict" {
            return Ok(MarkingMode::Strict);
        }
        let factor = s
            .strip_prefix("scaled:")
            .and_then(|f| f.parse::<f64>().ok())
            .filter(|f| f.is_finite() && *f > 0.0)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown marking mode {s:?}")))?;
        Ok(MarkingMode::Scaled {
            threshold_factor: factor,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub mode: MarkingMode,
    /// Drop the elevation requirement whenever the lightest class still has
    /// unmarked words. Off by default.
    pub skip_elevation_when_unmarked: bool,
}

impl BuildConfig {
    pub fn strict() -> Self {
        Self {
            mode: MarkingMode::Strict,
            skip_elevation_when_unmarked: false,
        }
    }

    pub fn scaled(threshold_factor: f64) -> Self {
        Self {
            mode: MarkingMode::Scaled { threshold_factor },
            skip_elevation_when_unmarked: false,
        }
    }
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self::strict()
    }
}

/// Number of members of `set` with odd overlap with `row`.
#[inline]
fn odd_count(row: u64, set: &[u64]) -> usize {
    set.iter().filter(|&&s| parity(s, row)).count()
}

/// True iff `row` eps-splits `set`: between `(1/2 - eps)|S|` and `(1/2 + eps)|S|`
/// members have odd overlap with it. Vacuous for an empty set.
///
/// The comparison allows a relative slack of a few ulps so that boundary
/// cases such as `eps = 1/6, |S| = 3` are decided as in exact arithmetic.
pub fn splits(row: &BitWord, set: &[BitWord], eps: f64) -> bool {
    if set.is_empty() {
        return true;
    }
    let count = set
        .iter()
        .filter(|s| crate::gf2::dot(s, row).expect("set members must match the row length"))
        .count() as f64;
    let size = set.len() as f64;
    let slack = 8.0 * f64::EPSILON * size;
    (0.5 - eps) * size - slack <= count && count <= (0.5 + eps) * size + slack
}

/// True iff at least `eps * |S|` members of `set` have odd overlap with `row`.
pub fn elevates(row: &BitWord, set: &[BitWord], eps: f64) -> bool {
    if set.is_empty() {
        return true;
    }
    let count = set
        .iter()
        .filter(|s| crate::gf2::dot(s, row).expect("set members must match the row length"))
        .count() as f64;
    let size = set.len() as f64;
    count + 8.0 * f64::EPSILON * size >= eps * size
}

/// `1/(2 sqrt(n))`-splitting in exact integer arithmetic:
/// `|2c - |S|| <= |S| / sqrt(n)`  iff  `(2c - |S|)^2 * n <= |S|^2`.
#[inline]
pub(crate) fn splits_at_length(odd: usize, size: usize, n: usize) -> bool {
    let diff = (2 * odd as i128 - size as i128).unsigned_abs();
    diff * diff * (n as u128) <= (size as u128) * (size as u128)
}

/// Number of vectors in `{0,1}^k` that `1/(2 sqrt(n))`-split `set`, by
/// exhaustive count with the exact predicate.
pub fn count_splitters(set: &[BitWord], n: usize) -> Result<u64> {
    let k = match set.first() {
        Some(s) => s.len(),
        None => {
            return Err(Error::InvalidParameter(
                "splitter count of an empty set".into(),
            ))
        }
    };
    if k > MAX_BUILD_K || set.iter().any(|s| s.len() != k) {
        return Err(Error::InvalidParameter(format!(
            "set members must share one length k <= {MAX_BUILD_K}"
        )));
    }
    let words: Vec<u64> = set.iter().map(BitWord::to_u64).collect();
    Ok((0..1u64 << k)
        .into_par_iter()
        .filter(|&r| splits_at_length(odd_count(r, &words), words.len(), n))
        .count() as u64)
}

/// `1/8`-elevation in exact integer arithmetic.
#[inline]
pub(crate) fn elevates_eighth(odd: usize, size: usize) -> bool {
    8 * odd >= size
}

/// Everything needed to resume the construction at the current length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuilderState {
    config: BuildConfig,
    g: GeneratorMatrix,
    /// Bitset over information words.
    marked: Vec<u64>,
    /// Codeword weight of every information word at the current length; entry 0 unused.
    class_of: Vec<u32>,
    /// Length at which `mark_small_classes` last ran.
    marked_at: Option<usize>,
}

/// Outcome of one appended row, for callers that want to observe the process.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub n: usize,
    pub lightest_weight: usize,
    pub newly_marked: usize,
    pub row: u64,
}

impl BuilderState {
    /// Starts at `n = k` with the identity matrix and no marked words.
    pub fn new(k: usize, config: BuildConfig) -> Result<Self> {
        if k == 0 || k > MAX_BUILD_K {
            return Err(Error::UnsupportedK {
                k,
                reason: "the builder enumerates all 2^k information words (1 <= k <= 28)",
            });
        }
        if let MarkingMode::Scaled { threshold_factor } = config.mode {
            if !(threshold_factor.is_finite() && threshold_factor > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "threshold factor must be positive, got {threshold_factor}"
                )));
            }
        }
        let g = GeneratorMatrix::identity(k)?;
        let words = 1usize << k;
        let class_of = (0..words as u64).map(|x| x.count_ones()).collect();
        Ok(Self {
            config,
            g,
            marked: vec![0; words.div_ceil(64)],
            class_of,
            marked_at: None,
        })
    }

    /// Rebuilds the state for an existing matrix without searching, checking
    /// that every row beyond the identity satisfies the split and elevation
    /// constraints of its step. The lexicographic minimality of rows is not
    /// checked here; see [`BuilderState::verify_construction`].
    pub fn resume(g: &GeneratorMatrix, config: BuildConfig) -> Result<Self> {
        let mut state = Self::new(g.k(), config)?;
        for i in g.k() + 1..=g.num_rows() {
            let row = g.row_bits(i);
            state.mark_small_classes();
            if !state.row_satisfies_constraints(row) {
                return Err(Error::InvalidParameter(format!(
                    "row {i} ({}) violates the split/elevation constraints",
                    g.row(i)
                )));
            }
            state.append_row(row);
        }
        Ok(state)
    }

    /// Replays the construction for `g.k()` and compares row by row; returns the
    /// first (1-based) row that differs from what the builder would choose.
    pub fn verify_construction(g: &GeneratorMatrix, config: BuildConfig) -> Result<Option<usize>> {
        let mut state = Self::new(g.k(), config)?;
        for i in g.k() + 1..=g.num_rows() {
            state.mark_small_classes();
            let expected = state.find_next_row_bits()?;
            if expected != g.row_bits(i) {
                return Ok(Some(i));
            }
            state.append_row(expected);
        }
        Ok(None)
    }

    pub fn k(&self) -> usize {
        self.g.k()
    }

    /// Current number of rows.
    pub fn n(&self) -> usize {
        self.g.num_rows()
    }

    pub fn config(&self) -> BuildConfig {
        self.config
    }

    pub fn matrix(&self) -> &GeneratorMatrix {
        &self.g
    }

    pub fn into_matrix(self) -> GeneratorMatrix {
        self.g
    }

    pub fn is_marked(&self, word: u64) -> bool {
        (self.marked[(word / 64) as usize] >> (word % 64)) & 1 == 1
    }

    fn mark(&mut self, word: u64) -> bool {
        let slot = &mut self.marked[(word / 64) as usize];
        let bit = 1u64 << (word % 64);
        let fresh = *slot & bit == 0;
        *slot |= bit;
        fresh
    }

    pub fn marked_count(&self) -> usize {
        self.marked.iter().map(|b| b.count_ones() as usize).sum()
    }

    /// Current codeword weight of a nonzero information word.
    pub fn class_of(&self, word: u64) -> usize {
        assert!(word != 0, "the zero word is not tracked");
        self.class_of[word as usize] as usize
    }

    fn words(&self) -> impl Iterator<Item = u64> {
        1..(1u64 << self.k())
    }

    /// Nonzero words grouped by codeword weight, in integer form; index = weight.
    pub(crate) fn classes_bits(&self) -> Vec<Vec<u64>> {
        let mut classes = vec![Vec::new(); self.n() + 1];
        for x in self.words() {
            classes[self.class_of[x as usize] as usize].push(x);
        }
        classes
    }

    /// The partition of nonzero words by current codeword weight; empty
    /// classes are absent.
    pub fn weight_classes(&self) -> BTreeMap<usize, Vec<BitWord>> {
        let k = self.k();
        self.classes_bits()
            .into_iter()
            .enumerate()
            .filter(|(_, c)| !c.is_empty())
            .map(|(i, c)| (i, c.into_iter().map(|x| BitWord::from_u64(x, k)).collect()))
            .collect()
    }

    /// Smallest positive weight with a nonempty class.
    pub fn lightest_weight(&self) -> usize {
        self.words()
            .map(|x| self.class_of[x as usize] as usize)
            .min()
            .expect("k >= 1 leaves at least one nonzero word")
    }

    /// Marks every class whose unmarked part is below the threshold. Returns
    /// the number of newly marked words.
    pub fn mark_small_classes(&mut self) -> usize {
        let n = self.n();
        let classes = self.classes_bits();
        let mut newly = 0;
        for class in classes.iter().skip(1) {
            if class.is_empty() {
                continue;
            }
            let unmarked = class.iter().filter(|&&x| !self.is_marked(x)).count();
            if self.config.mode.is_small(unmarked, n) {
                for &x in class {
                    newly += self.mark(x) as usize;
                }
            }
        }
        self.marked_at = Some(n);
        newly
    }

    fn unmarked_classes(&self, classes: &[Vec<u64>]) -> Vec<Vec<u64>> {
        classes
            .iter()
            .skip(1)
            .map(|c| {
                c.iter()
                    .copied()
                    .filter(|&x| !self.is_marked(x))
                    .collect::<Vec<_>>()
            })
            .filter(|c| !c.is_empty())
            .collect()
    }

    /// Returns (unmarked nonempty classes, lightest class if elevation is required).
    fn constraints(&self) -> (Vec<Vec<u64>>, Option<Vec<u64>>) {
        let classes = self.classes_bits();
        let d = self.lightest_weight();
        let unmarked = self.unmarked_classes(&classes);
        let lightest = classes[d].clone();
        let skip = self.config.skip_elevation_when_unmarked
            && lightest.iter().any(|&x| !self.is_marked(x));
        (unmarked, (!skip).then_some(lightest))
    }

    fn row_satisfies_constraints(&self, row: u64) -> bool {
        let (unmarked, lightest) = self.constraints();
        candidate_ok(row, &unmarked, lightest.as_deref(), self.n())
    }

    /// Smallest candidate satisfying both constraints. Requires
    /// [`mark_small_classes`](Self::mark_small_classes) at the current length.
    pub fn find_next_row(&self) -> Result<BitWord> {
        Ok(BitWord::from_u64(self.find_next_row_bits()?, self.k()))
    }

    fn find_next_row_bits(&self) -> Result<u64> {
        let n = self.n();
        if self.marked_at != Some(n) {
            return Err(Error::InvalidParameter(format!(
                "small classes have not been marked at n={n}"
            )));
        }
        let (unmarked, lightest) = self.constraints();
        let lightest = lightest.as_deref();
        let candidates = 1u64 << self.k();
        let ok = |r: &u64| candidate_ok(*r, &unmarked, lightest, n);
        let found = if self.k() < PARALLEL_SCAN_MIN_K {
            (0..candidates).find(ok)
        } else {
            (0..candidates).into_par_iter().find_first(ok)
        };
        let row = found.ok_or(Error::RowSearchExhausted { n })?;

        // Re-verify through the floating-point predicates.
        let k = self.k();
        let as_words = |s: &[u64]| {
            s.iter()
                .map(|&x| BitWord::from_u64(x, k))
                .collect::<Vec<_>>()
        };
        let r = BitWord::from_u64(row, k);
        let eps = 1.0 / (2.0 * (n as f64).sqrt());
        assert!(
            unmarked.iter().all(|c| splits(&r, &as_words(c), eps)),
            "row {r} fails the split re-check at n={n}"
        );
        if let Some(l) = lightest {
            assert!(
                elevates(&r, &as_words(l), 0.125),
                "row {r} fails the elevation re-check at n={n}"
            );
        }
        Ok(row)
    }

    /// Appends a row and updates the weight bookkeeping: words with odd
    /// overlap move up one class.
    fn append_row(&mut self, row: u64) {
        for x in 1..(1u64 << self.k()) {
            if parity(x, row) {
                self.class_of[x as usize] += 1;
            }
        }
        self.g.push_row_bits(row);
    }

    /// Marks, searches and appends one row.
    pub fn step(&mut self) -> Result<StepRecord> {
        let lightest_weight = self.lightest_weight();
        let newly_marked = self.mark_small_classes();
        let row = self.find_next_row_bits()?;
        let n = self.n();
        self.append_row(row);
        Ok(StepRecord {
            n,
            lightest_weight,
            newly_marked,
            row,
        })
    }

    /// Grows the matrix to `n_target` rows.
    pub fn extend_to(&mut self, n_target: usize) -> Result<()> {
        if n_target < self.n() {
            return Err(Error::ShrinkRequested {
                target: n_target,
                current: self.n(),
            });
        }
        while self.n() < n_target {
            self.step()?;
        }
        Ok(())
    }

    /// Recomputes every word's codeword weight from the matrix and compares
    /// with the incremental bookkeeping.
    pub fn classes_consistent(&self) -> bool {
        let n = self.n();
        self.words()
            .all(|x| codeword_weight(&self.g, x, n) == self.class_of[x as usize] as usize)
    }
}

fn candidate_ok(row: u64, unmarked: &[Vec<u64>], lightest: Option<&[u64]>, n: usize) -> bool {
    if let Some(l) = lightest {
        if !elevates_eighth(odd_count(row, l), l.len()) {
            return false;
        }
    }
    unmarked
        .iter()
        .all(|c| splits_at_length(odd_count(row, c), c.len(), n))
}

/// Builds the first `n` rows for message length `k`.
pub fn build_matrix(k: usize, n: usize, config: BuildConfig) -> Result<BuilderState> {
    let mut state = BuilderState::new(k, config)?;
    if n < k {
        return Err(Error::Underdetermined { n, k });
    }
    state.extend_to(n)?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> BitWord {
        s.parse().unwrap()
    }

    fn ws(v: &[&str]) -> Vec<BitWord> {
        v.iter().map(|s| w(s)).collect()
    }

    #[test]
    fn weight_classes_of_identity() {
        let s = BuilderState::new(2, BuildConfig::strict()).unwrap();
        let classes = s.weight_classes();
        assert_eq!(classes[&1], ws(&["01", "10"]));
        assert_eq!(classes[&2], ws(&["11"]));

        let s = BuilderState::new(3, BuildConfig::strict()).unwrap();
        let sizes: Vec<_> = s
            .weight_classes()
            .iter()
            .map(|(i, c)| (*i, c.len()))
            .collect();
        assert_eq!(sizes, vec![(1, 3), (2, 3), (3, 1)]);
    }

    #[test]
    fn split_and_elevate_examples() {
        let s = ws(&["001", "010", "011"]);
        assert!(!splits(&w("000"), &s, 0.25));
        assert!(splits(&w("001"), &s, 1.0 / 6.0));
        assert!(!splits(&w("001"), &s, 0.1));
        assert!(splits(&w("101"), &[], 0.0));

        assert!(!elevates(&w("000"), &s, 0.125));
        assert!(elevates(&w("011"), &s, 0.125));
        let all: Vec<_> = (1..8).map(|x| BitWord::from_u64(x, 3)).collect();
        assert!(elevates(&w("111"), &all, 0.125));
        assert!(elevates(&w("000"), &[], 0.5));
    }

    #[test]
    fn exact_predicates_match_float_predicates() {
        for n in 1..40usize {
            let eps = 1.0 / (2.0 * (n as f64).sqrt());
            for size in 1..60usize {
                for odd in 0..=size {
                    let lo = (0.5 - eps) * size as f64;
                    let hi = (0.5 + eps) * size as f64;
                    let float = lo - 1e-9 <= odd as f64 && odd as f64 <= hi + 1e-9;
                    assert_eq!(
                        splits_at_length(odd, size, n),
                        float,
                        "n={n} size={size} odd={odd}"
                    );
                }
            }
        }
    }

    #[test]
    fn hand_traced_k2() {
        let mut s = BuilderState::new(2, BuildConfig::strict()).unwrap();
        assert_eq!(s.mark_small_classes(), 3);
        assert_eq!(s.lightest_weight(), 1);
        assert_eq!(s.find_next_row().unwrap(), w("01"));
        s.extend_to(3).unwrap();
        let classes = s.weight_classes();
        assert_eq!(classes[&1], ws(&["10"]));
        assert_eq!(classes[&2], ws(&["01"]));
        assert_eq!(classes[&3], ws(&["11"]));
        s.mark_small_classes();
        assert_eq!(s.find_next_row().unwrap(), w("10"));
        s.extend_to(4).unwrap();
        let rows: Vec<_> = (1..=4).map(|i| s.matrix().row(i).to_string()).collect();
        assert_eq!(rows, vec!["10", "01", "01", "10"]);
    }

    #[test]
    fn find_next_row_requires_marking() {
        let s = BuilderState::new(3, BuildConfig::strict()).unwrap();
        assert!(s.find_next_row().is_err());
    }

    #[test]
    fn marking_is_monotone_and_respects_threshold() {
        let mut s = BuilderState::new(6, BuildConfig::scaled(0.25)).unwrap();
        let mut prev = 0;
        for _ in 0..20 {
            let before: Vec<u64> = (1..64).filter(|&x| s.is_marked(x)).collect();
            s.mark_small_classes();
            assert!(before.iter().all(|&x| s.is_marked(x)));
            let n = s.n();
            for class in s.classes_bits().iter().skip(1) {
                let unmarked = class.iter().filter(|&&x| !s.is_marked(x)).count();
                assert!(unmarked == 0 || !s.config().mode.is_small(unmarked, n));
            }
            assert!(s.marked_count() >= prev);
            prev = s.marked_count();
            s.step().unwrap();
        }
    }

    #[test]
    fn extend_to_is_prefix_stable() {
        let mut a = BuilderState::new(4, BuildConfig::strict()).unwrap();
        a.extend_to(10).unwrap();
        let a10 = a.matrix().clone();
        a.extend_to(16).unwrap();
        let b = build_matrix(4, 16, BuildConfig::strict()).unwrap();
        assert_eq!(a, b);
        for i in 1..=10 {
            assert_eq!(a10.row_bits(i), b.matrix().row_bits(i));
        }
        let before = a.clone();
        a.extend_to(16).unwrap();
        assert_eq!(a, before);
        assert!(matches!(a.extend_to(3), Err(Error::ShrinkRequested { .. })));
    }

    #[test]
    fn incremental_classes_match_recomputation() {
        let s = build_matrix(4, 16, BuildConfig::strict()).unwrap();
        assert!(s.classes_consistent());
        let s = build_matrix(7, 30, BuildConfig::scaled(0.1)).unwrap();
        assert!(s.classes_consistent());
    }

    #[test]
    fn resume_matches_original_state() {
        let s = build_matrix(5, 20, BuildConfig::scaled(0.2)).unwrap();
        let mut r = BuilderState::resume(s.matrix(), s.config()).unwrap();
        let mut s2 = s.clone();
        r.extend_to(25).unwrap();
        s2.extend_to(25).unwrap();
        assert_eq!(r.matrix(), s2.matrix());
        assert_eq!(
            BuilderState::verify_construction(s2.matrix(), s2.config()).unwrap(),
            None
        );
    }

    #[test]
    fn state_serializes() {
        let s = build_matrix(4, 12, BuildConfig::strict()).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: BuilderState = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn skip_elevation_flag_is_off_by_default() {
        assert!(!BuildConfig::default().skip_elevation_when_unmarked);
        let mut cfg = BuildConfig::scaled(0.05);
        cfg.skip_elevation_when_unmarked = true;
        let s = build_matrix(6, 24, cfg).unwrap();
        assert!(s.classes_consistent());
    }

    #[test]
    fn mode_roundtrip() {
        for m in [
            MarkingMode::Strict,
            MarkingMode::Scaled {
                threshold_factor: 0.5,
            },
        ] {
            assert_eq!(m.to_string().parse::<MarkingMode>().unwrap(), m);
        }
        assert!("scaled:-1".parse::<MarkingMode>().is_err());
        assert!("lenient".parse::<MarkingMode>().is_err());
    }
}
