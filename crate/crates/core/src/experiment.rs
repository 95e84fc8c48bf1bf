//! Monte Carlo error-rate experiments and matrix certification.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::analysis::{
    capacity, delta_gv, entropy, poltyrev_certificate, prefix_length_for, wilson_interval,
    BoundReport, Z_99,
};
use crate::builder::{BuilderState, MAX_BUILD_K};
use crate::channel::{stream_rng, BscNoise, ChannelSpec, NoiseSource, PRNG_ID};
use crate::concat::{ConcatCode, ConcatParams};
use crate::error::{Error, Result};
use crate::gf2::{BitWord, GeneratorMatrix};
use crate::inner::InnerCode;
use crate::matrix_file::MatrixFile;
use crate::spectrum::check_spectrum_bounds;

const MESSAGE_DOMAIN: &[u8] = b"rateless/message";

pub const TOOL_VERSION: &str = concat!("rateless ", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MessageMode {
    /// A fresh message per trial from the seeded message stream.
    #[default]
    Random,
    /// Always the zero message.
    AllZero,
}

impl FromStr for MessageMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Self::Random),
            "all-zero" => Ok(Self::AllZero),
            other => Err(Error::InvalidParameter(format!(
                "message mode must be `random` or `all-zero`, got {other:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Lengths {
    /// One length per `(p, delta)` from [`prefix_length_for`].
    Auto,
    List(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub k: usize,
    /// `Some(beta)` simulates the concatenated code, `None` the inner code.
    pub beta: Option<usize>,
    pub ps: Vec<f64>,
    pub deltas: Vec<f64>,
    pub lengths: Lengths,
    pub trials: u64,
    pub master_seed: u64,
    pub message: MessageMode,
}

/// One simulated point.
#[derive(Clone, Debug, PartialEq)]
pub struct SimRow {
    pub code: String,
    pub k: usize,
    pub n: usize,
    pub p: f64,
    pub delta: f64,
    pub trials: u64,
    pub errors: u64,
    pub wilson: (f64, f64),
    pub seed: u64,
}

impl SimRow {
    pub fn err_rate(&self) -> f64 {
        self.errors as f64 / self.trials as f64
    }
}

pub const SIM_CSV_HEADER: &str =
    "code,k,n,p,delta,trials,errors,err_rate,wilson_ci_lo,wilson_ci_hi,seed,prng_id";

impl fmt::Display for SimRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{:.6},{},{},{:.6},{:.6},{:.6},{},{}",
            self.code,
            self.k,
            self.n,
            self.p,
            self.delta,
            self.trials,
            self.errors,
            self.err_rate(),
            self.wilson.0,
            self.wilson.1,
            self.seed,
            PRNG_ID
        )
    }
}

/// A code under test: encode, then decode a noisy word back to a message.
enum Codec {
    Inner(InnerCode),
    Concat(Box<ConcatCode>),
}

impl Codec {
    fn label(&self) -> String {
        match self {
            Self::Inner(_) => "inner".into(),
            Self::Concat(c) => format!("concat-b{}", c.params().beta),
        }
    }

    fn k(&self) -> usize {
        match self {
            Self::Inner(c) => c.k(),
            Self::Concat(c) => c.params().k,
        }
    }

    fn max_len(&self) -> usize {
        match self {
            Self::Inner(c) => c.max_len(),
            Self::Concat(c) => c.max_len(),
        }
    }

    /// Number of information bits the length formula applies to.
    fn auto_len(&self, p: f64, delta: f64) -> Result<usize> {
        match self {
            Self::Inner(c) => prefix_length_for(p, delta, c.k()),
            Self::Concat(c) => {
                let n_in = prefix_length_for(p, delta, c.params().k_in)?;
                Ok(n_in * c.params().l_in)
            }
        }
    }
}

/// Runs `trials` transmissions at length `n`; trial `t` uses noise stream
/// `t` and message stream `t`, so results do not depend on scheduling.
fn count_errors(
    codec: &Codec,
    n: usize,
    noise: &dyn NoiseSource,
    trials: u64,
    master_seed: u64,
    message: MessageMode,
) -> Result<u64> {
    let k = codec.k();
    let draw = |t: u64| -> BitWord {
        match message {
            MessageMode::AllZero => BitWord::zeros(k),
            MessageMode::Random => {
                let mut rng = stream_rng(MESSAGE_DOMAIN, master_seed, t);
                BitWord::from_bits(&(0..k).map(|_| rng.gen::<bool>()).collect::<Vec<_>>())
            }
        }
    };
    match codec {
        Codec::Inner(code) => {
            let dec = code.decoder(n)?;
            (0..trials)
                .into_par_iter()
                .map(|t| -> Result<u64> {
                    let m = draw(t);
                    let y = crate::channel::transmit_with(&code.encode(&m, n)?, noise, t);
                    Ok((dec.decode(&y)? != m) as u64)
                })
                .sum()
        }
        Codec::Concat(code) => (0..trials)
            .into_par_iter()
            .map(|t| -> Result<u64> {
                let m = draw(t);
                let y = crate::channel::transmit_with(&code.encode(&m, n)?, noise, t);
                Ok(match code.decode(&y) {
                    Ok(d) => (d != m) as u64,
                    Err(Error::OuterDecode(_)) => 1,
                    Err(e) => return Err(e),
                })
            })
            .sum(),
    }
}

/// Simulates every `(p, delta)` or `(p, n)` point of the configuration with
/// the supplied inner matrix (`k` rows for the inner code, `beta` for the
/// concatenated code).
pub fn simulate(config: &ExperimentConfig, g: &GeneratorMatrix) -> Result<Vec<SimRow>> {
    if config.trials == 0 {
        return Err(Error::InvalidParameter(
            "at least one trial is required".into(),
        ));
    }
    let codec = match config.beta {
        None => {
            if g.k() != config.k {
                return Err(Error::InvalidParameter(format!(
                    "matrix has k={} but the experiment asks for k={}",
                    g.k(),
                    config.k
                )));
            }
            Codec::Inner(InnerCode::new(g.clone()))
        }
        Some(beta) => {
            let params = ConcatParams::derive(config.k, beta)?;
            Codec::Concat(Box::new(ConcatCode::new(params, g.clone())?))
        }
    };
    let mut points = Vec::new();
    for &p in &config.ps {
        match &config.lengths {
            Lengths::Auto => {
                for &delta in &config.deltas {
                    points.push((p, delta, codec.auto_len(p, delta)?));
                }
            }
            Lengths::List(ns) => {
                for &n in ns {
                    points.push((p, capacity(p) - config.k as f64 / n as f64, n));
                }
            }
        }
    }
    let mut rows = Vec::with_capacity(points.len());
    for (p, delta, n) in points {
        if n > codec.max_len() {
            return Err(Error::NotEnoughRows {
                requested: n,
                available: codec.max_len(),
            });
        }
        let noise = BscNoise(ChannelSpec::new(p, config.master_seed)?);
        let errors = count_errors(
            &codec,
            n,
            &noise,
            config.trials,
            config.master_seed,
            config.message,
        )?;
        rows.push(SimRow {
            code: codec.label(),
            k: codec.k(),
            n,
            p,
            delta,
            trials: config.trials,
            errors,
            wilson: wilson_interval(errors, config.trials, Z_99),
            seed: config.master_seed,
        });
    }
    Ok(rows)
}

/// Longest length a configuration needs from the inner matrix.
pub fn required_inner_rows(config: &ExperimentConfig) -> Result<usize> {
    let (k_inner, l) = match config.beta {
        None => (config.k, 1),
        Some(beta) => {
            let params = ConcatParams::derive(config.k, beta)?;
            (params.k_in, params.l_in)
        }
    };
    let mut longest = k_inner;
    for &p in &config.ps {
        match &config.lengths {
            Lengths::Auto => {
                for &delta in &config.deltas {
                    longest = longest.max(prefix_length_for(p, delta, k_inner)?);
                }
            }
            Lengths::List(ns) => {
                for &n in ns {
                    longest = longest.max(n.div_ceil(l));
                }
            }
        }
    }
    Ok(longest)
}

/// Metadata lines written above every experiment table.
pub struct CsvMeta<'a> {
    pub matrix_sha256: &'a str,
    pub master_seed: u64,
    pub params: Option<ConcatParams>,
}

pub fn rows_to_csv(meta: &CsvMeta<'_>, rows: &[SimRow]) -> String {
    let mut out = format!(
        "# tool={TOOL_VERSION}\n# matrix_sha256={}\n# prng_id={PRNG_ID}\n# master_seed={}\n",
        meta.matrix_sha256, meta.master_seed
    );
    if let Some(p) = meta.params {
        out.push_str(&format!("# concat_params {p}\n"));
    }
    out.push_str(SIM_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_string());
        out.push('\n');
    }
    out
}

/// Checks a matrix file at length `n`: the construction replay, the spectral
/// claims and the heavy-codeword certificate at `(p, delta, tau)`; `tau`
/// defaults to the relative GV distance.
pub fn certify(
    file: &MatrixFile,
    n: Option<usize>,
    p: f64,
    delta: f64,
    tau: Option<f64>,
) -> Result<Vec<BoundReport>> {
    let g = &file.matrix;
    let (k, n) = (g.k(), n.unwrap_or(g.num_rows()));
    let mut reports = Vec::new();

    if k <= MAX_BUILD_K {
        let replay = BuilderState::verify_construction(g, file.config)?;
        reports.push(BoundReport {
            name: "construction_replay".into(),
            inputs: vec![
                ("k".into(), k as f64),
                ("rows".into(), g.num_rows() as f64),
                (
                    "first_mismatch_row".into(),
                    replay.map_or(0.0, |r| r as f64),
                ),
            ],
            bound_value: 0.0,
            observed: None,
            pass: replay.is_none(),
        });
    }

    let state = BuilderState::resume(g, file.config).ok();
    let state = state.filter(|s| s.n() == n);
    let code = InnerCode::new(g.clone());
    let spectrum = check_spectrum_bounds(&code, n, state.as_ref())?;
    reports.extend(spectrum.checks.iter().map(|c| c.to_bound_report(n, k)));

    if n > k {
        let tau = match tau {
            Some(t) => t,
            None => delta_gv(n, k)?,
        };
        let w = crate::spectrum::weight_distribution(&code, n)?;
        ChannelSpec::new(p, 0)?;
        let ceiling = 1.0 - entropy(p) - delta;
        if (k as f64 / n as f64) < ceiling {
            reports.push(poltyrev_certificate(&w, p, delta, tau, None)?.report);
        } else {
            reports.push(BoundReport {
                name: "poltyrev_rate_precondition".into(),
                inputs: vec![
                    ("rate".into(), k as f64 / n as f64),
                    ("p".into(), p),
                    ("delta".into(), delta),
                ],
                bound_value: ceiling,
                observed: None,
                pass: false,
            });
        }
    }
    Ok(reports)
}

/// Overall verdict over certification rows; spectrum rows marked as not
/// enforced are reported but ignored here.
pub fn certification_passes(reports: &[BoundReport]) -> bool {
    reports.iter().all(|r| {
        r.pass
            || r.inputs
                .iter()
                .any(|(name, v)| name == "enforced" && *v == 0.0)
    })
}

pub fn reports_to_csv(meta: &CsvMeta<'_>, reports: &[BoundReport]) -> String {
    let mut out = format!(
        "# tool={TOOL_VERSION}\n# matrix_sha256={}\n",
        meta.matrix_sha256
    );
    out.push_str(BoundReport::CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::{build_matrix, BuildConfig};

    fn config(ns: Vec<usize>, trials: u64) -> ExperimentConfig {
        ExperimentConfig {
            k: 6,
            beta: None,
            ps: vec![0.05],
            deltas: vec![],
            lengths: Lengths::List(ns),
            trials,
            master_seed: 7,
            message: MessageMode::Random,
        }
    }

    #[test]
    fn simulation_is_reproducible() {
        let g = build_matrix(6, 24, BuildConfig::strict())
            .unwrap()
            .into_matrix();
        let cfg = config(vec![12, 24], 300);
        let a = simulate(&cfg, &g).unwrap();
        let b = simulate(&cfg, &g).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        assert!(a[1].errors <= a[0].errors + 10);
    }

    #[test]
    fn auto_lengths_and_guards() {
        let g = build_matrix(6, 24, BuildConfig::strict())
            .unwrap()
            .into_matrix();
        let mut cfg = config(vec![], 10);
        cfg.lengths = Lengths::Auto;
        cfg.deltas = vec![0.3];
        assert_eq!(
            required_inner_rows(&cfg).unwrap(),
            prefix_length_for(0.05, 0.3, 6).unwrap()
        );
        let rows = simulate(&cfg, &g).unwrap();
        assert_eq!(rows[0].n, 15);
        cfg.trials = 0;
        assert!(simulate(&cfg, &g).is_err());
        let too_long = config(vec![40], 5);
        assert!(matches!(
            simulate(&too_long, &g),
            Err(Error::NotEnoughRows { .. })
        ));
    }

    #[test]
    fn csv_has_metadata_and_header() {
        let meta = CsvMeta {
            matrix_sha256: "abc",
            master_seed: 7,
            params: None,
        };
        let csv = rows_to_csv(&meta, &[]);
        let lines: Vec<_> = csv.lines().collect();
        assert!(lines[0].starts_with("# tool=rateless "));
        assert_eq!(lines[1], "# matrix_sha256=abc");
        assert_eq!(lines[2], format!("# prng_id={PRNG_ID}"));
        assert_eq!(lines[3], "# master_seed=7");
        assert_eq!(lines[4], SIM_CSV_HEADER);
    }
}
