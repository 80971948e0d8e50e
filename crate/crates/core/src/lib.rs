//! Progressive trit-plane entropy coding for Gaussian-modelled latents,
//! with machine-oriented symbol ordering and a confidence-driven decoding
//! controller.
//!
//! A [`LatentGrid`] holds centered latents with per-coefficient means and
//! scales. [`encode`] writes a single truncatable stream; [`decode`] turns
//! any prefix of it into a reconstruction. The [`controller`] module decides
//! how much of a stream a downstream classifier needs.

#![allow(clippy::needless_range_loop)]

pub mod codec;
pub mod controller;
pub mod error;
pub mod gaussian;
pub mod priority;
pub mod rangecoder;
pub mod task;
pub mod tensor;
pub mod trit;

pub use codec::{
    decode, encode, rate_report, Budget, DecodeReport, Decoded, EncodeOptions, EncodeSummary,
    ProgressiveBitstream, RateReport, StreamHeader,
};
pub use controller::{FeatureVector, FilterModel, LevelGrid, Sample};
pub use error::{Error, Result};
pub use gaussian::{bit_estimate, kappa, plane_length, BinPmf};
pub use priority::{build_order_for_grid, PriorityOrder, Strategy};
pub use task::{LogitRecord, SyntheticClassifier, TaskOracle};
pub use tensor::{load_grid, save_grid, synth_grid, Dims, FlatIndex, LatentGrid, ScaleLaw};
pub use trit::TritPlaneStack;
