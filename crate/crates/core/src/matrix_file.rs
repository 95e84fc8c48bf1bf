//! Versioned text format for generator matrices.
//!
//! ```text
//! RATELESS-G v1
//! k 3
//! mode strict
//! 100
//! 010
//! 001
//! 111
//! ```
//!
//! One row per line, position 1 first. The canonical hash is SHA-256 over
//! the exact file bytes. A build with the elevation shortcut enabled writes
//! its mode as `<mode>+skip-elevation`.

use sha2::{Digest, Sha256};

use crate::builder::{BuildConfig, MarkingMode};
use crate::error::{Error, Result};
use crate::gf2::{BitWord, GeneratorMatrix};

pub const MAGIC: &str = "RATELESS-G v1";
const SKIP_SUFFIX: &str = "+skip-elevation";

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixFile {
    pub config: BuildConfig,
    pub matrix: GeneratorMatrix,
}

impl MatrixFile {
    pub fn new(matrix: GeneratorMatrix, config: BuildConfig) -> Self {
        Self { config, matrix }
    }

    pub fn to_text(&self) -> String {
        let g = &self.matrix;
        let mut out = String::with_capacity(32 + g.num_rows() * (g.k() + 1));
        out.push_str(MAGIC);
        out.push('\n');
        out.push_str(&format!("k {}\n", g.k()));
        out.push_str(&format!("mode {}", self.config.mode));
        if self.config.skip_elevation_when_unmarked {
            out.push_str(SKIP_SUFFIX);
        }
        out.push('\n');
        for i in 1..=g.num_rows() {
            out.push_str(&g.row(i).to_string());
            out.push('\n');
        }
        out
    }

    pub fn sha256(&self) -> String {
        sha256_hex(self.to_text().as_bytes())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse { line, message };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

        let (_, magic) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
        if magic != MAGIC {
            return Err(err(
                1,
                format!("expected header {MAGIC:?}, found {magic:?}"),
            ));
        }

        let (ln, k_line) = lines
            .next()
            .ok_or_else(|| err(2, "missing k line".into()))?;
        let k = k_line
            .strip_prefix("k ")
            .and_then(|v| v.parse::<usize>().ok())
            .ok_or_else(|| err(ln, format!("expected `k <k>`, found {k_line:?}")))?;

        let (ln, mode_line) = lines
            .next()
            .ok_or_else(|| err(3, "missing mode line".into()))?;
        let mode_text = mode_line
            .strip_prefix("mode ")
            .ok_or_else(|| err(ln, format!("expected `mode <mode>`, found {mode_line:?}")))?;
        let (mode_text, skip) = match mode_text.strip_suffix(SKIP_SUFFIX) {
            Some(m) => (m, true),
            None => (mode_text, false),
        };
        let mode: MarkingMode = mode_text
            .parse()
            .map_err(|e: Error| err(ln, e.to_string()))?;

        let mut rows = Vec::new();
        for (ln, line) in lines {
            if line.len() != k {
                return Err(err(
                    ln,
                    format!("row has {} bits, expected {k}", line.len()),
                ));
            }
            let row: BitWord = line.parse().map_err(|e: Error| err(ln, e.to_string()))?;
            rows.push(row);
        }
        let matrix = GeneratorMatrix::from_rows(k, &rows).map_err(|e| err(4, e.to_string()))?;
        Ok(Self {
            config: BuildConfig {
                mode,
                skip_elevation_when_unmarked: skip,
            },
            matrix,
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
