use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rateless_core::experiment::{
    certification_passes, certify, reports_to_csv, required_inner_rows, rows_to_csv, simulate,
    CsvMeta, ExperimentConfig, Lengths, MessageMode,
};
use rateless_core::{
    build_matrix, BitWord, BuildConfig, BuilderState, ConcatCode, ConcatParams, InnerCode,
    MarkingMode, MatrixFile,
};

/// Largest message length built without `--allow-large-k`.
const DEFAULT_K_GUARD: usize = 20;

#[derive(Parser)]
#[command(
    name = "rateless",
    version,
    about = "Deterministic rateless codes for the BSC"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build (or extend) a generator matrix and write it as a matrix file.
    Build(BuildArgs),
    /// Encode a message into a codeword prefix of length n.
    Encode(EncodeArgs),
    /// Decode a received word back to a message.
    Decode(DecodeArgs),
    /// Monte Carlo error rates as CSV.
    Simulate(SimulateArgs),
    /// Check a matrix file against every bound that applies to it.
    Certify(CertifyArgs),
    /// Print the concatenated-code parameters for (k, beta).
    Params(ParamsArgs),
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    k: Option<usize>,
    /// Number of rows (identity head included).
    #[arg(long)]
    n: usize,
    /// `strict` or `scaled:<factor>`.
    #[arg(long, default_value = "strict")]
    mode: String,
    /// Skip the elevation test while nothing is marked.
    #[arg(long)]
    skip_elevation: bool,
    /// Extend this matrix file instead of starting from the identity.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Lift the k <= 20 enumeration guard.
    #[arg(long)]
    allow_large_k: bool,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct CodecArgs {
    #[arg(long)]
    matrix: PathBuf,
    /// Use the concatenated code with this beta; the matrix is its inner code.
    #[arg(long)]
    beta: Option<usize>,
}

#[derive(Args)]
struct EncodeArgs {
    #[command(flatten)]
    codec: CodecArgs,
    /// Message bits, position 1 first.
    #[arg(long)]
    message: String,
    #[arg(long)]
    n: usize,
}

#[derive(Args)]
struct DecodeArgs {
    #[command(flatten)]
    codec: CodecArgs,
    /// Received bits, position 1 first.
    #[arg(long)]
    received: String,
    /// Message length of the concatenated code (ignored for the inner code).
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Matrix file; built in strict mode on the fly when omitted.
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    beta: Option<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    p: Vec<f64>,
    /// Gaps below capacity; lengths follow from them unless `--n` is given.
    #[arg(long, value_delimiter = ',')]
    delta: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `random` or `all-zero`.
    #[arg(long, default_value = "random")]
    message: String,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    delta: f64,
    /// Heavy-codeword threshold as a fraction of n; defaults to the GV distance.
    #[arg(long)]
    tau: Option<f64>,
    /// Prefix length to certify; defaults to every row of the file.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ParamsArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    beta: usize,
    /// Override the derived outer length.
    #[arg(long)]
    n_out: Option<usize>,
    #[arg(long)]
    json: bool,
}

fn read_matrix(path: &Path) -> anyhow::Result<MatrixFile> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    MatrixFile::parse(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_build(args: BuildArgs) -> anyhow::Result<bool> {
    let (state, config) = match &args.resume {
        Some(path) => {
            let file = read_matrix(path)?;
            let state = BuilderState::resume(&file.matrix, file.config)
                .context("the matrix file does not replay as a valid construction")?;
            (state, file.config)
        }
        None => {
            let config = BuildConfig {
                mode: args.mode.parse::<MarkingMode>()?,
                skip_elevation_when_unmarked: args.skip_elevation,
            };
            let k = args.k.context("--k is required unless --resume is given")?;
            if k > DEFAULT_K_GUARD && !args.allow_large_k {
                bail!("k={k} exceeds {DEFAULT_K_GUARD}; pass --allow-large-k to enumerate 2^{k} words");
            }
            (BuilderState::new(k, config)?, config)
        }
    };
    if let Some(k) = args.k {
        if k != state.k() {
            bail!(
                "--k {k} disagrees with the resumed matrix (k={})",
                state.k()
            );
        }
    }
    let mut state = state;
    if state.n() > args.n {
        bail!(
            "resumed matrix already has {} rows, more than --n {}",
            state.n(),
            args.n
        );
    }
    state.extend_to(args.n)?;
    let file = MatrixFile::new(state.into_matrix(), config);
    emit(Some(&args.out), &file.to_text())?;
    println!("{}  {}", file.sha256(), args.out.display());
    Ok(true)
}

enum Codec {
    Inner(InnerCode),
    Concat(ConcatCode),
}

fn open_codec(args: &CodecArgs, k: usize) -> anyhow::Result<Codec> {
    let file = read_matrix(&args.matrix)?;
    Ok(match args.beta {
        None => Codec::Inner(InnerCode::new(file.matrix)),
        Some(beta) => Codec::Concat(ConcatCode::new(
            ConcatParams::derive(k, beta)?,
            file.matrix,
        )?),
    })
}

fn cmd_encode(args: EncodeArgs) -> anyhow::Result<bool> {
    let m: BitWord = args.message.parse()?;
    let c = match open_codec(&args.codec, m.len())? {
        Codec::Inner(code) => code.encode(&m, args.n)?,
        Codec::Concat(code) => code.encode(&m, args.n)?,
    };
    println!("{c}");
    Ok(true)
}

fn cmd_decode(args: DecodeArgs) -> anyhow::Result<bool> {
    let y: BitWord = args.received.parse()?;
    let k = match (args.codec.beta, args.k) {
        (Some(_), Some(k)) => k,
        (Some(_), None) => bail!("--k is required with --beta"),
        (None, _) => 0,
    };
    let m = match open_codec(&args.codec, k)? {
        Codec::Inner(code) => code.ml_decode(&y)?,
        Codec::Concat(code) => code.decode(&y)?,
    };
    println!("{m}");
    Ok(true)
}

fn cmd_simulate(args: SimulateArgs) -> anyhow::Result<bool> {
    let lengths = if args.n.is_empty() {
        if args.delta.is_empty() {
            bail!("give either --delta (automatic lengths) or --n");
        }
        Lengths::Auto
    } else {
        Lengths::List(args.n.clone())
    };
    let config = ExperimentConfig {
        k: args.k,
        beta: args.beta,
        ps: args.p.clone(),
        deltas: args.delta.clone(),
        lengths,
        trials: args.trials,
        master_seed: args.seed,
        message: args.message.parse::<MessageMode>()?,
    };
    let params = args
        .beta
        .map(|b| ConcatParams::derive(args.k, b))
        .transpose()?;
    let file = match &args.matrix {
        Some(path) => read_matrix(path)?,
        None => {
            let k_inner = params.map_or(args.k, |p| p.k_in);
            if k_inner > DEFAULT_K_GUARD {
                bail!("inner k={k_inner} is too large to build on the fly; pass --matrix");
            }
            let rows = required_inner_rows(&config)?;
            let config = BuildConfig::strict();
            MatrixFile::new(build_matrix(k_inner, rows, config)?.into_matrix(), config)
        }
    };
    let rows = simulate(&config, &file.matrix)?;
    let sha = file.sha256();
    let meta = CsvMeta {
        matrix_sha256: &sha,
        master_seed: args.seed,
        params,
    };
    emit(args.out.as_deref(), &rows_to_csv(&meta, &rows))?;
    Ok(true)
}

fn cmd_certify(args: CertifyArgs) -> anyhow::Result<bool> {
    let file = read_matrix(&args.matrix)?;
    let reports = certify(&file, args.n, args.p, args.delta, args.tau)?;
    let sha = file.sha256();
    let meta = CsvMeta {
        matrix_sha256: &sha,
        master_seed: 0,
        params: None,
    };
    emit(args.out.as_deref(), &reports_to_csv(&meta, &reports))?;
    let pass = certification_passes(&reports);
    if !pass {
        for r in reports.iter().filter(|r| !r.pass) {
            eprintln!("FAIL {r}");
        }
    }
    Ok(pass)
}

fn cmd_params(args: ParamsArgs) -> anyhow::Result<bool> {
    let params = match args.n_out {
        Some(n_out) => ConcatParams::with_n_out(args.k, args.beta, n_out)?,
        None => ConcatParams::derive(args.k, args.beta)?,
    };
    if args.json {
        println!("{}", serde_json::to_string_pretty(&params)?);
    } else {
        println!("{params}");
        println!("outer_rate={:.6}", params.outer_rate());
        println!("correctable_fraction={:.6}", params.correctable_fraction());
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Build(a) => cmd_build(a),
        Command::Encode(a) => cmd_encode(a),
        Command::Decode(a) => cmd_decode(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Params(a) => cmd_params(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
