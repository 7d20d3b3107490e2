//! Streaming reputation engine for online rating systems.
//!
//! The engine watches a stream of `(user, product, rating, feedback)` events
//! and decides, per event, whether the rater is behaving honestly. Three
//! mechanisms cooperate:
//!
//! * [`detector`] — an adaptive threshold band around the accepted-rating
//!   history, computed by iterated mean bisection. Ratings outside the band
//!   raise an upgrading or downgrading alarm.
//! * [`lsi`] + [`repository`] — alarmed users must justify themselves with
//!   feedback text, scored by latent semantic similarity against a per-product
//!   quality repository seeded from manufacturer descriptions and grown from
//!   trusted feedback, with exponential forgetting of stale entries.
//! * [`behavior`] — suspects whose feedback fails verification get one more
//!   chance: their rating profile across other products and their similarity
//!   to other raters decide between rescue and a malicious verdict.
//!
//! Accepted ratings aggregate into a trust-filtered reputation score;
//! [`pipeline`] orchestrates the flow and classifies the attack direction from
//! the gap between filtered and unfiltered aggregates. [`baseline`] provides a
//! CUSUM change detector, a seeded scenario generator with ground truth, and
//! the false-alarm/detection metrics used to compare the two detectors.
//!
//! [`config`], [`io`], and [`snapshot`] supply the file-facing surface: run
//! configuration in `key = value` form, line-delimited event files, CSV
//! exports, and checksummed state snapshots.

pub mod baseline;
pub mod behavior;
pub mod config;
pub mod detector;
pub mod io;
pub mod lsi;
pub mod model;
pub mod pipeline;
pub mod render;
pub mod repository;
pub mod snapshot;

pub use config::RunConfig;
pub use model::{AlarmDirection, RatingEvent, RatingScale, UserStatus, UserVerdict};
pub use pipeline::Engine;
