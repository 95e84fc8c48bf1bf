//! Closed-form and information-theoretic quantities used to certify codes.
//!
//! All logarithms are base 2. Quantities that overflow `f64` quickly are
//! carried in the log domain; combinatorial identities use big integers.

use std::fmt;

use num_bigint::BigUint;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::channel::{exponent_beta, pair_error_prob};
use crate::error::{Error, Result};
use crate::spectrum::WeightDistribution;

/// Outcome of one bound evaluation.
///
/// When `observed` is present, `pass` is exactly `observed <= bound_value`.
/// Compound checks leave `observed` empty and carry their pieces in `inputs`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub name: String,
    pub inputs: Vec<(String, f64)>,
    pub bound_value: f64,
    pub observed: Option<f64>,
    pub pass: bool,
}

impl BoundReport {
    pub fn comparison(name: &str, inputs: Vec<(String, f64)>, bound: f64, observed: f64) -> Self {
        Self {
            name: name.to_string(),
            inputs,
            bound_value: bound,
            observed: Some(observed),
            pass: observed <= bound,
        }
    }

    pub const CSV_HEADER: &'static str = "name,inputs,bound,observed,pass";

    pub fn csv_row(&self) -> String {
        let inputs = self
            .inputs
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        let observed = self.observed.map(|o| o.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{}",
            self.name, inputs, self.bound_value, observed, self.pass
        )
    }
}

impl fmt::Display for BoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.csv_row())
    }
}

fn inputs(pairs: &[(&str, f64)]) -> Vec<(String, f64)> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Binary entropy, extended continuously to `H(0) = H(1) = 0`.
pub fn entropy(p: f64) -> f64 {
    assert!(
        (0.0..=1.0).contains(&p),
        "entropy needs p in [0, 1], got {p}"
    );
    let term = |x: f64| if x == 0.0 { 0.0 } else { -x * x.log2() };
    term(p) + term(1.0 - p)
}

/// BSC capacity `1 - H(p)`.
pub fn capacity(p: f64) -> f64 {
    1.0 - entropy(p)
}

/// Prefix length `ceil(k / (C(p) - delta))` needed to operate `delta` below capacity.
pub fn prefix_length_for(p: f64, delta: f64, k: usize) -> Result<usize> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("p={p} outside [0, 1]")));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("empty message (k = 0)".into()));
    }
    let c = capacity(p);
    if !(delta > 0.0 && delta < c) {
        return Err(Error::InvalidParameter(format!(
            "delta={delta} must lie in (0, C(p)={c})"
        )));
    }
    Ok((k as f64 / (c - delta)).ceil() as usize)
}

/// Gilbert-Varshamov relative distance: the root in `(0, 1/2)` of `H(x) = 1 - k/n`.
pub fn delta_gv(n: usize, k: usize) -> Result<f64> {
    if !(0 < k && k < n) {
        return Err(Error::InvalidParameter(format!(
            "delta_gv needs 0 < k < n, got n={n} k={k}"
        )));
    }
    let target = 1.0 - k as f64 / n as f64;
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if entropy(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Exact binomial coefficient, `None` on `u128` overflow. Zero when `k > n`.
pub fn binomial_u128(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        // acc * (n - j) / (j + 1) stays integral at every step
        acc = acc.checked_mul((n - j) as u128)? / (j + 1) as u128;
    }
    Some(acc)
}

pub fn binomial_big(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    let k = k.min(n - k);
    let mut acc = BigUint::from(1u32);
    for j in 0..k {
        acc = acc * BigUint::from(n - j) / BigUint::from(j + 1);
    }
    acc
}

/// `log2 C(n, k)` for integers; exact through `u128` when it fits.
pub fn log2_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    match binomial_u128(n, k) {
        Some(c) => (c as f64).log2(),
        None => {
            (ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0))
                / std::f64::consts::LN_2
        }
    }
}

/// Binomial coefficient extended to reals through the Gamma function.
pub fn real_binom(a: f64, x: f64) -> Result<f64> {
    if !(x >= 0.0 && a >= x) {
        return Err(Error::InvalidParameter(format!(
            "real_binom needs a >= x >= 0, got a={a} x={x}"
        )));
    }
    Ok((ln_gamma(a + 1.0) - ln_gamma(x + 1.0) - ln_gamma(a - x + 1.0)).exp())
}

/// Checks the argmax location and peak bound of `f(x) = C(a,x) C(b,x)` by
/// scanning the integer points of `grid` (clamped to `0..=floor(a)`).
pub fn comb_argmax_check(
    a: f64,
    b: f64,
    grid: std::ops::RangeInclusive<u64>,
) -> Result<BoundReport> {
    if !(0.0 < a && a <= b && a * a >= a + b) {
        return Err(Error::InvalidParameter(format!(
            "comb check needs 0 < a <= b and a^2 >= a + b, got a={a} b={b}"
        )));
    }
    let upper = (*grid.end()).min(a.floor() as u64);
    let f = |x: f64| -> Result<f64> { Ok(real_binom(a, x)? * real_binom(b, x)?) };
    let mut best: Option<(u64, f64)> = None;
    for x in *grid.start()..=upper {
        let v = f(x as f64)?;
        // strict: ties keep the smaller x
        if best.is_none_or(|(_, bv)| v > bv * (1.0 + 1e-12)) {
            best = Some((x, v));
        }
    }
    let (x_star, max_f) =
        best.ok_or_else(|| Error::InvalidParameter("empty argmax grid".into()))?;
    let t = (a * b - 1.0) / (a + b + 2.0);
    let y = a * b / (a + b);
    let peak_bound = f(y)? * (a * b).powi(4) / (a + b).powi(4);
    let argmax_ok = (x_star as f64 - t).abs() <= 1.0;
    let peak_ok = max_f <= peak_bound * (1.0 + 1e-12);
    Ok(BoundReport {
        name: "comb_argmax".into(),
        inputs: inputs(&[
            ("a", a),
            ("b", b),
            ("x_star", x_star as f64),
            ("t", t),
            ("max_f", max_f),
        ]),
        bound_value: peak_bound,
        observed: None,
        pass: argmax_ok && peak_ok,
    })
}

/// `C(n,i) C(i,i/2) C(n-i,r-i/2) == C(n,r) C(r,i/2) C(n-r,i/2)` in exact arithmetic.
pub fn poltyrev_identity_check(n: u64, r: u64, i: u64) -> Result<bool> {
    let h = i / 2;
    if !i.is_multiple_of(2) || i > n || h > r || r > n || r - h > n - i {
        return Err(Error::InvalidParameter(format!(
            "identity needs even i <= n and i/2 <= r <= n, r - i/2 <= n - i; got n={n} r={r} i={i}"
        )));
    }
    let lhs = binomial_big(n, i) * binomial_big(i, h) * binomial_big(n - i, r - h);
    let rhs = binomial_big(n, r) * binomial_big(r, h) * binomial_big(n - r, h);
    Ok(lhs == rhs)
}

/// Number of weight-`r` words at distance at most `r` from a weight-`i` word:
/// `sum_{w=ceil(i/2)}^{r} C(i,w) C(n-i,r-w)`.
pub fn confusion_count(n: u64, i: u64, r: u64) -> Result<BigUint> {
    if !(1 <= i && i <= n && r <= n) {
        return Err(Error::InvalidParameter(format!(
            "confusion count needs 1 <= i <= n and r <= n; got n={n} i={i} r={r}"
        )));
    }
    let start = i.div_ceil(2);
    let mut total = BigUint::from(0u32);
    for w in start..=r {
        if r - w > n - i {
            continue;
        }
        total += binomial_big(i, w) * binomial_big(n - i, r - w);
    }
    Ok(total)
}

/// The single-term bound `n C(i, ceil(i/2)) C(n-i, r-ceil(i/2))` on [`confusion_count`].
pub fn confusion_bound(n: u64, i: u64, r: u64) -> BigUint {
    let h = i.div_ceil(2);
    if r < h {
        return BigUint::from(0u32);
    }
    BigUint::from(n) * binomial_big(i, h) * binomial_big(n - i, r - h)
}

/// Result of the heavy-codeword spectral check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PoltyrevCertificate {
    /// `observed` is the largest `log2(w_i / (2^{(delta/3) n} w*_i))` over
    /// `i >= tau n`; the bound is 0.
    pub report: BoundReport,
    /// `k - n + (delta/3) n + n H(p_hat)` at `p_hat = p`.
    pub exponent: f64,
    /// `log2(n^6 2^exponent)`.
    pub log2_error_bound: f64,
    pub eps: f64,
    /// Exponents at `p_hat = p - eps` and `p_hat = p + eps`.
    pub window_exponents: (f64, f64),
}

fn certificate_exponent(n: usize, k: usize, delta: f64, p_hat: f64) -> f64 {
    let n = n as f64;
    k as f64 - n + delta / 3.0 * n + n * entropy(p_hat)
}

/// Default typical-window half width `min(1/2 - p, p) / 2`.
pub fn default_window(p: f64) -> f64 {
    (0.5 - p).min(p) / 2.0
}

pub fn poltyrev_certificate(
    w: &WeightDistribution,
    p: f64,
    delta: f64,
    tau: f64,
    eps: Option<f64>,
) -> Result<PoltyrevCertificate> {
    let (n, k) = (w.n(), w.k());
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::InvalidParameter(format!("p={p} outside (0, 1/2)")));
    }
    if (k as f64) / (n as f64) >= 1.0 - entropy(p) - delta || delta.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "rate {k}/{n} is not below 1 - H(p) - delta = {}",
            1.0 - entropy(p) - delta
        )));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidParameter(format!("tau={tau} outside [0, 1]")));
    }
    let eps = eps.unwrap_or_else(|| default_window(p));
    let start = (tau * n as f64).ceil() as usize;
    let mut excess = f64::NEG_INFINITY;
    for i in start.max(1)..=n {
        let wi = w.count(i);
        if wi == 0 {
            continue;
        }
        let log2_ideal = log2_binomial(n as u64, i as u64) + k as f64 - n as f64;
        let e = (wi as f64).log2() - (delta / 3.0 * n as f64 + log2_ideal);
        excess = excess.max(e);
    }
    let exponent = certificate_exponent(n, k, delta, p);
    let window_exponents = (
        certificate_exponent(n, k, delta, (p - eps).max(0.0)),
        certificate_exponent(n, k, delta, (p + eps).min(1.0)),
    );
    let report = BoundReport::comparison(
        "poltyrev_weight_condition",
        inputs(&[
            ("n", n as f64),
            ("k", k as f64),
            ("p", p),
            ("delta", delta),
            ("tau", tau),
            ("exponent", exponent),
        ]),
        0.0,
        excess,
    );
    Ok(PoltyrevCertificate {
        report,
        exponent,
        log2_error_bound: 6.0 * (n as f64).log2() + exponent,
        eps,
        window_exponents,
    })
}

/// `log2(2^a + 2^b)`.
fn log2_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (1.0 + (lo - hi).exp2()).log2()
}

/// Lowest weight the distance claim allows: `(n - k) / (55 log2 n)`.
pub fn distance_floor(n: usize, k: usize) -> f64 {
    if n <= k || n < 2 {
        return 0.0;
    }
    (n - k) as f64 / (55.0 * (n as f64).log2())
}

/// `log2` of the light-codeword ML error bound
/// `(2n^4 + e^{2 sqrt n}) * sum_{i=ceil(floor)}^{floor(delta_gv n)} 2^{-beta i}`.
pub fn case1_bound_log2(n: usize, k: usize, p: f64) -> Result<f64> {
    if n <= k {
        return Err(Error::Underdetermined { n, k });
    }
    let beta = exponent_beta(p)?;
    let lo = (distance_floor(n, k).ceil() as usize).max(1);
    let hi = (delta_gv(n, k)? * n as f64).floor() as usize;
    if hi < lo {
        return Ok(f64::NEG_INFINITY);
    }
    let nf = n as f64;
    let log_mult = log2_add(
        1.0 + 4.0 * nf.log2(),
        2.0 * nf.sqrt() * std::f64::consts::LOG2_E,
    );
    // geometric series 2^{-beta lo} (1 - 2^{-beta (hi-lo+1)}) / (1 - 2^{-beta})
    let terms = (hi - lo + 1) as f64;
    let log_sum = -beta * lo as f64 + (-(-beta * terms).exp2()).ln_1p() / std::f64::consts::LN_2
        - (-(-beta).exp2()).ln_1p() / std::f64::consts::LN_2;
    Ok(log_mult + log_sum)
}

pub fn case1_bound(n: usize, k: usize, p: f64) -> Result<f64> {
    Ok(case1_bound_log2(n, k, p)?.exp2())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ConcatBoundMode {
    /// `2^{-2 L (eps_out - eps_in)^2}`
    Chernoff,
    /// `2^{H(eps_out) L} eps_in^{eps_out L}`
    Union,
}

/// Probability bound on the fraction of failed inner blocks reaching `eps_out`.
pub fn chernoff_concat_bound(
    blocks: usize,
    eps_out: f64,
    eps_in: f64,
    mode: ConcatBoundMode,
) -> Result<f64> {
    if !(0.0 < eps_in && eps_in < eps_out && eps_out < 1.0 && blocks >= 1) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < eps_in < eps_out < 1 and L >= 1; got L={blocks} eps_out={eps_out} eps_in={eps_in}"
        )));
    }
    let l = blocks as f64;
    Ok(match mode {
        ConcatBoundMode::Chernoff => (-2.0 * l * (eps_out - eps_in).powi(2)).exp2(),
        ConcatBoundMode::Union => (entropy(eps_out) * l + eps_out * l * eps_in.log2()).exp2(),
    })
}

/// Wilson score interval for `errors` out of `trials` at normal quantile `z`.
pub fn wilson_interval(errors: u64, trials: u64, z: f64) -> (f64, f64) {
    assert!(trials > 0);
    let nt = trials as f64;
    let phat = errors as f64 / nt;
    let z2 = z * z;
    let denom = 1.0 + z2 / nt;
    let center = (phat + z2 / (2.0 * nt)) / denom;
    let half = z * (phat * (1.0 - phat) / nt + z2 / (4.0 * nt * nt)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Two-sided 99% normal quantile.
pub const Z_99: f64 = 2.575_829_303_548_901;

/// Analytic ML error predictor for the all-zero codeword: the light-codeword
/// union bound below `delta_gv n` plus the smaller of the heavy-codeword
/// union bound and the spectral certificate bound (when the certificate
/// holds). Clamped to 1.
pub fn ml_error_predictor(w: &WeightDistribution, p: f64) -> Result<f64> {
    let (n, k) = (w.n(), w.k());
    if n <= k {
        return Ok(1.0);
    }
    let split = delta_gv(n, k)? * n as f64;
    let mut light = 0.0;
    let mut heavy_union = 0.0;
    for i in 1..=n {
        let term = w.count(i) as f64 * pair_error_prob(i, p)?;
        if (i as f64) < split {
            light += term;
        } else {
            heavy_union += term;
        }
    }
    let mut heavy = heavy_union;
    let gap = 1.0 - entropy(p) - k as f64 / n as f64;
    if gap > 0.0 {
        let delta = gap * (1.0 - 1e-9);
        let cert = poltyrev_certificate(w, p, delta, split / n as f64, None)?;
        if cert.report.pass {
            let eps = cert.eps;
            let nf = n as f64;
            let tail = 2.0 * (-2.0 * eps * eps * nf).exp();
            let lo = ((p - eps) * nf).ceil() as usize;
            let hi = ((p + eps) * nf).floor() as usize;
            let window: f64 = (lo..=hi)
                .map(|r| {
                    (6.0 * nf.log2() + certificate_exponent(n, k, delta, r as f64 / nf)).exp2()
                })
                .sum();
            heavy = heavy.min(tail + window);
        }
    }
    Ok((light + heavy).min(1.0))
}
