//! Olfactory signal processing: learn a low-rank physicochemical →
//! perceptual linear map, then design non-negative compound mixtures for
//! odor cancellation, perceptual hiding of foods, target-percept
//! filtering, and adaptive cancellation in time-varying environments.
//!
//! All randomized behavior is seeded and deterministic; no wall-clock or
//! OS entropy is consulted anywhere in the crate.

pub mod cancellation;
pub mod corpus;
pub mod error;
pub mod filtering;
pub mod numerics;
pub mod perceptmap;
pub mod steganography;

pub use error::{Error, Result};
