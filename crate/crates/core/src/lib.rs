//! Core primitives for offline handwritten text-line recognition in cursive
//! right-to-left scripts: grayscale/binary raster operations, projection-based
//! skew correction and line segmentation, positional-label corpus tooling, a
//! from-scratch bidirectional LSTM with CTC training, and a deterministic
//! synthetic page generator for desk-scale experiments.
//!
//! The crate is `no_std` + `alloc`; everything here is pure computation on
//! in-memory values. File formats, CLI, and wall-clock concerns live in the
//! companion `nastaliq-lines` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod corpus;
pub mod ctc;
pub mod net;
pub mod preprocess;
pub mod raster;
pub mod segment;
pub mod synth;
pub mod train;

mod math;
