//! Simulation core for mobile crowdsourcing.
//!
//! Workers carry a location (a point plus the class of the place they are
//! in) and a profile learned from their answer history. Tasks are matched to
//! workers by context distance, delivered over a lossy network model, and
//! answered according to each worker's behaviour. Answers are aggregated by
//! majority vote, credibility-weighted vote or confusion-matrix EM, and the
//! outcomes feed a seeded clustering that labels (location class, task type)
//! pairs as efficient or not.
//!
//! Everything here is pure and `no_std` (with `alloc`); file formats, timing
//! and the command line live in the `mocrowd` crate.

#![cfg_attr(not(test), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod dispatch;
pub mod domain;
pub mod engine;
pub mod geolearn;
pub mod quality;
mod rng;
pub mod stats;
pub mod world;
