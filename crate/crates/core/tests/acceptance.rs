//! Acceptance run: prints one PASS/FAIL line per criterion and exits nonzero
//! if any criterion fails.
//!
//! Golden hashes live in `tests/fixtures/goldens.sha256`. Setting
//! `RATELESS_BLESS=1` rewrites that file from the current build.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use num_bigint::BigUint;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rateless_core::analysis::{
    binomial_u128, chernoff_concat_bound, comb_argmax_check, confusion_count, delta_gv, entropy,
    poltyrev_identity_check, real_binom, ConcatBoundMode,
};
use rateless_core::builder::count_splitters;
use rateless_core::channel::{exponent_beta, pair_bound_holds_exact, pair_error_prob, stream_rng};
use rateless_core::experiment::{
    rows_to_csv, simulate, CsvMeta, ExperimentConfig, Lengths, MessageMode,
};
use rateless_core::matrix_file::sha256_hex;
use rateless_core::spectrum::check_spectrum_bounds;
use rateless_core::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Criterion 1 and the matrices reused by criterion 2.
fn builder_totality() -> (Outcome, Vec<GeneratorMatrix>) {
    let start = Instant::now();
    let mut built = Vec::new();
    let mut failures = Vec::new();
    for k in [2usize, 4, 6, 8, 10, 12] {
        match build_matrix(k, 8 * k, BuildConfig::strict()) {
            Ok(s) => built.push(s.into_matrix()),
            Err(e) => failures.push(format!("k={k}: {e}")),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = failures.is_empty() && secs < 600.0;
    (
        outcome(
            pass,
            format!("k in {{2..12 step 2}}, n <= 8k, strict; {} builds ok, {secs:.2}s (budget 600s) {failures:?}", built.len()),
        ),
        built,
    )
}

fn spectrum_certification(matrices: &[GeneratorMatrix]) -> Outcome {
    let mut checked = 0usize;
    let mut rows = 0usize;
    let mut distance_rows = 0usize;
    let mut failures = Vec::new();
    for g in matrices {
        let k = g.k();
        let code = InnerCode::new(g.clone());
        let mut state = BuilderState::new(k, BuildConfig::strict()).unwrap();
        for n in k..=g.num_rows() {
            if n > k {
                state.step().unwrap();
            }
            assert_eq!(state.matrix().row(n), g.row(n));
            let report = check_spectrum_bounds(&code, n, Some(&state)).unwrap();
            checked += 1;
            rows += report.checks.len();
            distance_rows += report
                .checks
                .iter()
                .filter(|c| c.claim == spectrum::SpectrumClaim::Distance)
                .count();
            // every row counts here, enforced or not
            failures.extend(
                report
                    .checks
                    .iter()
                    .filter(|c| !c.pass)
                    .map(|c| format!("k={k} n={n} {}", c.csv_row())),
            );
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{checked} (k, n) prefixes, {rows} integer comparisons ({distance_rows} distance rows), failures: {failures:?}"
        ),
    )
}

fn splitter_abundance() -> Outcome {
    let (k, n) = (12usize, 16usize);
    let universe = (1u64 << k) - 1;
    let needed = (1u64 << k) as f64 * (1.0 - 1.0 / (2.0 * n as f64));
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_0003);
    let mut worst = u64::MAX;
    let mut failures = 0;
    for _ in 0..50 {
        let size = rng.gen_range(2 * n * n..=universe as usize);
        let set: Vec<BitWord> = sample(&mut rng, universe as usize, size)
            .into_iter()
            .map(|x| BitWord::from_u64(x as u64 + 1, k))
            .collect();
        let count = count_splitters(&set, n).unwrap();
        worst = worst.min(count);
        if count as f64 <= needed {
            failures += 1;
        }
    }
    outcome(
        failures == 0,
        format!(
            "50 sets, |S| >= {}, fewest splitters {worst} of 4096, need > {needed}",
            2 * n * n
        ),
    )
}

fn closed_form_numerics() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;

    let mut ids = 0;
    let mut id_fail = 0;
    for n in 0u64..=20 {
        for i in (0..=n).step_by(2) {
            for r in i / 2..=n {
                if r - i / 2 > n - i {
                    continue;
                }
                ids += 1;
                if !poltyrev_identity_check(n, r, i).unwrap() {
                    id_fail += 1;
                }
            }
        }
    }
    pass &= id_fail == 0;
    parts.push(format!("identity {}/{ids}", ids - id_fail));

    let mut conf = 0;
    let mut conf_fail = 0;
    for n in 1u64..=14 {
        for i in 1..=n {
            let c = (1u64 << i) - 1;
            let mut hist = vec![0u64; n as usize + 1];
            for y in 0u64..1 << n {
                let r = y.count_ones() as u64;
                if (y ^ c).count_ones() as u64 <= r {
                    hist[r as usize] += 1;
                }
            }
            for r in 0..=n {
                conf += 1;
                if confusion_count(n, i, r).unwrap() != BigUint::from(hist[r as usize]) {
                    conf_fail += 1;
                }
            }
        }
    }
    pass &= conf_fail == 0;
    parts.push(format!("confusion {}/{conf}", conf - conf_fail));

    let mut combs = 0;
    let mut comb_fail = Vec::new();
    for a in 2..=40u64 {
        for b in a..=40u64 {
            if a * a < a + b {
                continue;
            }
            combs += 1;
            let r = comb_argmax_check(a as f64, b as f64, 0..=a).unwrap();
            if !r.pass {
                comb_fail.push((a, b));
            }
        }
    }
    pass &= comb_fail.is_empty();
    parts.push(format!(
        "comb {}/{combs} {comb_fail:?}",
        combs - comb_fail.len()
    ));

    let mut worst_rel = 0f64;
    for n in 0u64..=60 {
        for x in 0..=n {
            let exact = binomial_u128(n, x).unwrap() as f64;
            let rel = (real_binom(n as f64, x as f64).unwrap() - exact).abs() / exact;
            worst_rel = worst_rel.max(rel);
        }
    }
    pass &= worst_rel <= 1e-10;
    parts.push(format!("real_binom max rel err {worst_rel:.2e}"));

    let mut worst_res = 0f64;
    for n in 2usize..=400 {
        for k in 1..n {
            let d = delta_gv(n, k).unwrap();
            worst_res = worst_res.max((entropy(d) - (1.0 - k as f64 / n as f64)).abs());
        }
    }
    pass &= worst_res <= 1e-10;
    parts.push(format!("delta_gv max residual {worst_res:.2e}"));

    outcome(pass, parts.join("; "))
}

fn pair_error_bound() -> Outcome {
    let ps: [(u64, u64); 4] = [(1, 20), (1, 10), (1, 4), (2, 5)];
    let mut failures = Vec::new();
    let mut tightest = f64::NEG_INFINITY;
    for &(num, den) in &ps {
        let p = num as f64 / den as f64;
        let beta = exponent_beta(p).unwrap();
        for i in 1..=64 {
            if !pair_bound_holds_exact(i, num, den).unwrap() {
                failures.push((i, p));
            }
            let ratio = pair_error_prob(i, p).unwrap().log2() + beta * i as f64;
            tightest = tightest.max(ratio);
        }
    }
    outcome(
        failures.is_empty(),
        format!("i <= 64, p in {{0.05,0.1,0.25,0.4}} exact rational comparison; max log2(P_i / 2^(-beta i)) = {tightest:.4}; failures {failures:?}"),
    )
}

fn monte_carlo_monotonicity() -> Outcome {
    let start = Instant::now();
    let g = build_matrix(8, 96, BuildConfig::strict())
        .unwrap()
        .into_matrix();
    let config = ExperimentConfig {
        k: 8,
        beta: None,
        ps: vec![0.05],
        deltas: vec![],
        lengths: Lengths::List(vec![16, 32, 64, 96]),
        trials: 10_000,
        master_seed: 6,
        message: MessageMode::Random,
    };
    let rows = simulate(&config, &g).unwrap();
    let mut pass = true;
    for pair in rows.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if b.err_rate() > a.err_rate() && b.wilson.0 > a.wilson.1 {
            pass = false;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 300.0;
    let summary: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "n={} rate={:.4} [{:.4},{:.4}]",
                r.n,
                r.err_rate(),
                r.wilson.0,
                r.wilson.1
            )
        })
        .collect();
    outcome(
        pass,
        format!(
            "k=8 p=0.05 10^4 trials: {}; {secs:.1}s (budget 300s)",
            summary.join(", ")
        ),
    )
}

fn concatenated_end_to_end() -> Outcome {
    let params = ConcatParams::derive(48, 16).unwrap();
    let (p, n_in, trials) = (0.02, 40usize, 1000u64);
    let headroom = analysis::capacity(p) - 0.3 - params.k_in as f64 / n_in as f64;
    let g = build_matrix(16, n_in, BuildConfig::strict())
        .unwrap()
        .into_matrix();
    let code = ConcatCode::new(params, g).unwrap();
    let ch = ChannelSpec::new(p, 7).unwrap();
    let n = n_in * params.l_in;
    let (mut block_errors, mut failures) = (0u64, 0u64);
    for t in 0..trials {
        let mut rng = stream_rng(b"acceptance/concat-message", 7, t);
        let m = BitWord::from_bits(&(0..params.k).map(|_| rng.gen::<bool>()).collect::<Vec<_>>());
        let y = transmit(&code.encode(&m, n).unwrap(), &ch, t);
        let want = code.block_messages(&m).unwrap();
        let got = code.decode_blocks(&y).unwrap();
        block_errors += want.iter().zip(&got).filter(|(a, b)| a != b).count() as u64;
        if code
            .decode_from_blocks(&got)
            .map(|d| d != m)
            .unwrap_or(true)
        {
            failures += 1;
        }
    }
    let eps_in = block_errors as f64 / (trials as f64 * params.l_in as f64);
    let eps_out = params.correctable_fraction();
    let rate = failures as f64 / trials as f64;
    let detail = format!(
        "beta=16 k=48 L={} radius={} n_in={n_in} p={p} (capacity headroom {headroom:.4}); eps_in={eps_in:.4} eps_out={eps_out:.4} failure rate={rate:.4}",
        params.l_in, params.radius
    );
    if headroom < 0.0 {
        return outcome(false, format!("{detail}; rate condition violated"));
    }
    match chernoff_concat_bound(params.l_in, eps_out, eps_in, ConcatBoundMode::Chernoff) {
        Ok(bound) => {
            let sigma = (bound * (1.0 - bound) / trials as f64).sqrt();
            let union = if eps_in > 0.0 {
                chernoff_concat_bound(params.l_in, eps_out, eps_in, ConcatBoundMode::Union)
                    .map(|u| format!("{u:.4}"))
                    .unwrap_or_else(|_| "n/a".into())
            } else {
                "n/a".into()
            };
            outcome(
                rate <= bound + 3.0 * sigma,
                format!(
                    "{detail}; chernoff bound={bound:.4} + 3 sigma={:.4} (union form {union})",
                    3.0 * sigma
                ),
            )
        }
        Err(e) => outcome(false, format!("{detail}; bound undefined: {e}")),
    }
}

fn golden_artifacts() -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let configs = [
        (
            "matrix_k8_n32_strict",
            8usize,
            32usize,
            BuildConfig::strict(),
        ),
        ("matrix_k12_n48_strict", 12, 48, BuildConfig::strict()),
        (
            "matrix_k10_n30_scaled0.05",
            10,
            30,
            BuildConfig::scaled(0.05),
        ),
        ("matrix_k16_n40_strict", 16, 40, BuildConfig::strict()),
    ];
    for (name, k, n, cfg) in configs {
        let s = build_matrix(k, n, cfg).unwrap();
        let text = MatrixFile::new(s.into_matrix(), cfg).to_text();
        out.insert(name.to_string(), text);
    }

    let g8 = MatrixFile::parse(&out["matrix_k8_n32_strict"]).unwrap();
    let config = ExperimentConfig {
        k: 8,
        beta: None,
        ps: vec![0.05, 0.1],
        deltas: vec![],
        lengths: Lengths::List(vec![16, 32]),
        trials: 2000,
        master_seed: 8,
        message: MessageMode::Random,
    };
    let rows = simulate(&config, &g8.matrix).unwrap();
    let meta = CsvMeta {
        matrix_sha256: &g8.sha256(),
        master_seed: 8,
        params: None,
    };
    out.insert("csv_inner_k8".into(), rows_to_csv(&meta, &rows));

    let g16 = MatrixFile::parse(&out["matrix_k16_n40_strict"]).unwrap();
    let config = ExperimentConfig {
        k: 48,
        beta: Some(16),
        ps: vec![0.02],
        deltas: vec![0.3],
        lengths: Lengths::Auto,
        trials: 200,
        master_seed: 9,
        message: MessageMode::Random,
    };
    let rows = simulate(&config, &g16.matrix).unwrap();
    let meta = CsvMeta {
        matrix_sha256: &g16.sha256(),
        master_seed: 9,
        params: Some(ConcatParams::derive(48, 16).unwrap()),
    };
    out.insert("csv_concat_b16_k48".into(), rows_to_csv(&meta, &rows));
    out
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/goldens.sha256")
}

fn determinism_goldens() -> Outcome {
    let single = in_pool(1, golden_artifacts);
    let again = in_pool(1, golden_artifacts);
    let multi = in_pool(4, golden_artifacts);
    let mut problems = Vec::new();
    if single != again {
        problems.push("two single-thread runs differ".to_string());
    }
    if single != multi {
        problems.push("1-thread and 4-thread runs differ".to_string());
    }
    let hashes: BTreeMap<String, String> = single
        .iter()
        .map(|(name, text)| (name.clone(), sha256_hex(text.as_bytes())))
        .collect();
    let rendered: String = hashes.iter().map(|(n, h)| format!("{h}  {n}\n")).collect();
    let path = fixture_path();
    if std::env::var("RATELESS_BLESS").as_deref() == Ok("1") {
        std::fs::write(&path, &rendered).unwrap();
    }
    match std::fs::read_to_string(&path) {
        Ok(frozen) if frozen == rendered => {}
        Ok(frozen) => {
            for line in frozen.lines() {
                if !rendered.contains(line) {
                    problems.push(format!("golden mismatch: {line}"));
                }
            }
            if problems.is_empty() {
                problems.push("golden set changed".into());
            }
        }
        Err(e) => problems.push(format!("missing fixture {}: {e}", path.display())),
    }
    outcome(
        problems.is_empty(),
        format!(
            "{} artifacts, threads 1/1/4, frozen SHA-256 fixture; {problems:?}",
            hashes.len()
        ),
    )
}

fn prefix_and_systematic() -> Outcome {
    let mut problems = Vec::new();
    let mut checked = 0u64;
    for k in 1usize..=10 {
        let n_max = 4 * k;
        let g = build_matrix(k, n_max, BuildConfig::strict())
            .unwrap()
            .into_matrix();
        let code = InnerCode::new(g);
        for v in 0..1u64 << k {
            let m = BitWord::from_u64(v, k);
            let full = code.encode(&m, n_max).unwrap();
            if full.prefix(k) != m {
                problems.push(format!("inner k={k} m={m} not systematic"));
            }
            for n in 0..n_max {
                checked += 1;
                if code.encode(&m, n).unwrap() != full.prefix(n) {
                    problems.push(format!("inner k={k} m={m} n={n} not a prefix"));
                }
            }
        }
    }

    let concat_cases: [(usize, usize, Option<u64>); 3] =
        [(4, 4, None), (16, 16, None), (48, 16, Some(300))];
    for (k, beta, sampled) in concat_cases {
        let params = ConcatParams::derive(k, beta).unwrap();
        let rows = params.k_in + 12;
        let g = build_matrix(params.k_in, rows, BuildConfig::strict())
            .unwrap()
            .into_matrix();
        let code = ConcatCode::new(params, g).unwrap();
        let pi = systematic_permutation(&params).unwrap();
        let n_max = rows * params.l_in;
        let messages: Box<dyn Iterator<Item = BitWord>> = match sampled {
            None => Box::new((0..1u64 << k).map(move |v| BitWord::from_u64(v, k))),
            Some(count) => Box::new((0..count).map(move |t| {
                let mut rng = stream_rng(b"acceptance/prefix", 9, t);
                BitWord::from_bits(&(0..k).map(|_| rng.gen::<bool>()).collect::<Vec<_>>())
            })),
        };
        for m in messages {
            let full = code.encode(&m, n_max).unwrap();
            if (1..=k).any(|t| full.get(t) != m.get(pi[t - 1])) {
                problems.push(format!(
                    "concat beta={beta} k={k} m={m} not systematic up to pi"
                ));
            }
            for n in (params.k_in * params.l_in..n_max).step_by(params.l_in) {
                checked += 1;
                if code.encode(&m, n).unwrap() != full.prefix(n) {
                    problems.push(format!("concat beta={beta} k={k} n={n} not a prefix"));
                }
            }
        }
    }
    problems.truncate(5);
    outcome(
        problems.is_empty(),
        format!("inner k <= 10 all messages, concat beta=4 (k=4) and beta=16 (k=16) all messages, beta=16 k=48 300 sampled; {checked} prefix comparisons; {problems:?}"),
    )
}

fn main() {
    let start = Instant::now();
    let (c1, matrices) = builder_totality();
    let results = [
        ("1 builder totality", c1),
        (
            "2 spectrum certification",
            spectrum_certification(&matrices),
        ),
        ("3 splitter abundance", splitter_abundance()),
        ("4 closed-form numerics", closed_form_numerics()),
        ("5 pairwise error bound", pair_error_bound()),
        ("6 monte carlo monotonicity", monte_carlo_monotonicity()),
        ("7 concatenated end-to-end", concatenated_end_to_end()),
        ("8 determinism goldens", determinism_goldens()),
        ("9 prefix and systematic", prefix_and_systematic()),
    ];
    let mut all = true;
    for (name, o) in &results {
        all &= o.pass;
        println!(
            "ACCEPTANCE {name}: {} | {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance finished in {:.1}s",
        start.elapsed().as_secs_f64()
    );
    if !all {
        std::process::exit(1);
    }
}
