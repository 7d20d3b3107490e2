//! Adaptive change detection over a product's accepted-rating history.
//!
//! The detector brackets "normal" ratings with a band derived from mean
//! bisector analysis: split the history at a pivot, average the two group
//! means, and iterate until the mid-value settles. The band half-width is the
//! sample standard deviation plus a tunable sensitivity term. Ratings strictly
//! outside the band raise a directional alarm; only ratings from users later
//! adjudicated honest ever update the history, so a malicious burst cannot
//! drag the band toward itself.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{initial_threshold, AlarmDirection, RatingScale};

/// Convergence tolerance on successive mid-values.
const MID_EPSILON: f64 = 1e-9;
/// Hard cap on bisection passes; hitting it clears `converged`.
const MAX_ITERATIONS: usize = 100;

/// Outcome of mean bisector analysis over one rating multiset.
#[derive(Debug, Clone, PartialEq)]
pub struct BisectorResult {
    /// Converged mid-value, the center of the threshold band.
    pub mid: f64,
    /// Overall mean of the input.
    pub mu: f64,
    /// Mean of the group below the final pivot (equals `mu` when one group
    /// went empty).
    pub mu1: f64,
    /// Mean of the group at or above the final pivot.
    pub mu2: f64,
    pub group1: Vec<f64>,
    pub group2: Vec<f64>,
    /// Number of bisection passes performed (>= 1).
    pub iterations: usize,
    /// False only if the iteration cap was hit before the mid settled.
    pub converged: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DetectorError {
    #[error("mean bisector analysis needs at least one rating")]
    EmptyInput,
}

/// Iterated mean bisection: starting from the overall mean as pivot, split
/// into `group1` (< pivot) and `group2` (>= pivot), move the pivot to the
/// average of the two group means, and repeat until it stops moving. If either
/// group empties (all values on one side), the mid falls back to the overall
/// mean and iteration stops.
pub fn mean_bisector(ratings: &[f64]) -> Result<BisectorResult, DetectorError> {
    if ratings.is_empty() {
        return Err(DetectorError::EmptyInput);
    }
    let mu = mean(ratings);
    let mut pivot = mu;
    let mut iterations = 0;
    let mut converged = false;

    let (mut group1, mut group2) = split(ratings, pivot);
    loop {
        iterations += 1;
        if group1.is_empty() || group2.is_empty() {
            return Ok(BisectorResult {
                mid: mu,
                mu,
                mu1: mu,
                mu2: mu,
                group1,
                group2,
                iterations,
                converged: true,
            });
        }
        let mu1 = mean(&group1);
        let mu2 = mean(&group2);
        let mid = (mu1 + mu2) / 2.0;
        if (mid - pivot).abs() < MID_EPSILON {
            converged = true;
            pivot = mid;
        } else if iterations >= MAX_ITERATIONS {
            pivot = mid;
        } else {
            pivot = mid;
            let next = split(ratings, pivot);
            group1 = next.0;
            group2 = next.1;
            continue;
        }
        return Ok(BisectorResult {
            mid: pivot,
            mu,
            mu1,
            mu2,
            group1,
            group2,
            iterations,
            converged,
        });
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn split(ratings: &[f64], pivot: f64) -> (Vec<f64>, Vec<f64>) {
    let mut group1 = Vec::new();
    let mut group2 = Vec::new();
    for &r in ratings {
        if r < pivot {
            group1.push(r);
        } else {
            group2.push(r);
        }
    }
    (group1, group2)
}

/// Band half-width: sample standard deviation (n−1 denominator) plus the
/// sensitivity term, clamped at zero so a strongly negative sensitivity can
/// never invert the band. Fewer than two ratings have no spread, leaving
/// `max(0, sensitivity)`.
pub fn deviation(ratings: &[f64], sensitivity: f64) -> f64 {
    if ratings.len() < 2 {
        return sensitivity.max(0.0);
    }
    let mu = mean(ratings);
    let ss: f64 = ratings.iter().map(|r| (r - mu).powi(2)).sum();
    let std = (ss / (ratings.len() - 1) as f64).sqrt();
    (std + sensitivity).max(0.0)
}

/// The alarm band currently in force.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPair {
    pub upgrading: f64,
    pub downgrading: f64,
    pub deviation: f64,
    pub sensitivity: f64,
}

/// Band around a mid-value: upgrading = mid + dev, downgrading = mid − dev.
pub fn thresholds(mid: f64, dev: f64, sensitivity: f64) -> ThresholdPair {
    debug_assert!(dev >= 0.0);
    ThresholdPair {
        upgrading: mid + dev,
        downgrading: mid - dev,
        deviation: dev,
        sensitivity,
    }
}

/// A breach and where in the stream it happened.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlarmOutcome {
    pub direction: AlarmDirection,
    /// 1-based event index, present iff an alarm fired.
    pub position: Option<usize>,
}

/// Strict comparison against the band: a rating sitting exactly on a
/// threshold is normal.
pub fn check_alarm(rating: f64, pair: &ThresholdPair, position: usize) -> AlarmOutcome {
    if rating > pair.upgrading {
        AlarmOutcome { direction: AlarmDirection::Upgrading, position: Some(position) }
    } else if rating < pair.downgrading {
        AlarmOutcome { direction: AlarmDirection::Downgrading, position: Some(position) }
    } else {
        AlarmOutcome { direction: AlarmDirection::None, position: None }
    }
}

/// Accepted-rating history plus the derived band for one product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorState {
    accepted: Vec<f64>,
    thresholds: ThresholdPair,
    mid: f64,
    sensitivity: f64,
}

impl DetectorState {
    /// Fresh state: both thresholds sit at the scale mean until a rating is
    /// accepted.
    pub fn new(scale: &RatingScale, sensitivity: f64) -> Self {
        let t0 = initial_threshold(scale);
        DetectorState {
            accepted: Vec::new(),
            thresholds: thresholds(t0, 0.0, sensitivity),
            mid: t0,
            sensitivity,
        }
    }

    pub fn thresholds(&self) -> &ThresholdPair {
        &self.thresholds
    }

    pub fn mid(&self) -> f64 {
        self.mid
    }

    pub fn accepted(&self) -> &[f64] {
        &self.accepted
    }

    /// Fold one accepted rating into the history and recompute the band.
    /// Callers must only pass ratings whose user was adjudicated honest.
    pub fn accept(&mut self, rating: f64) {
        self.accepted.push(rating);
        let result = mean_bisector(&self.accepted).expect("history is non-empty after push");
        let dev = deviation(&self.accepted, self.sensitivity);
        self.mid = result.mid;
        self.thresholds = thresholds(result.mid, dev, self.sensitivity);
    }
}
