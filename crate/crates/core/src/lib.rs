//! Deterministic rateless codes for the binary symmetric channel.
//!
//! The generator matrix grows one row at a time ([`builder`]); any prefix of
//! its rows is a linear code that is decoded by exhaustive maximum likelihood
//! ([`inner`]). Longer messages go through a Reed-Solomon outer code and
//! several interleaved inner blocks ([`concat`]). The remaining modules
//! simulate the channel and evaluate the bounds that certify a built matrix.

pub mod analysis;
pub mod builder;
pub mod channel;
pub mod concat;
pub mod error;
pub mod experiment;
pub mod gf2;
pub mod inner;
pub mod matrix_file;
pub mod outer;
pub mod spectrum;

pub use builder::{build_matrix, BuildConfig, BuilderState, MarkingMode};
pub use channel::{transmit, ChannelSpec, PRNG_ID};
pub use concat::{systematic_permutation, ConcatCode, ConcatParams};
pub use error::{Error, Result};
pub use gf2::{encode_prefix, BitWord, GeneratorMatrix};
pub use inner::InnerCode;
pub use matrix_file::MatrixFile;
pub use outer::{DecodeFailure, OuterCode, ReedSolomon};
pub use spectrum::WeightDistribution;
