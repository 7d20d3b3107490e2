//! Shared domain vocabulary: rating scales, events, verdicts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The ordered set of integer rating values a system permits, e.g. 1..=5.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingScale {
    levels: Vec<i64>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScaleError {
    #[error("a rating scale needs at least 2 levels, got {0}")]
    TooFewLevels(usize),
    #[error("scale levels must be strictly increasing positive integers")]
    NotIncreasing,
}

impl RatingScale {
    pub fn new(levels: Vec<i64>) -> Result<Self, ScaleError> {
        if levels.len() < 2 {
            return Err(ScaleError::TooFewLevels(levels.len()));
        }
        let increasing = levels.windows(2).all(|w| w[0] < w[1]);
        if !increasing || levels[0] <= 0 {
            return Err(ScaleError::NotIncreasing);
        }
        Ok(Self { levels })
    }

    /// The conventional 1..=5 star scale.
    pub fn one_to_five() -> Self {
        Self { levels: vec![1, 2, 3, 4, 5] }
    }

    pub fn levels(&self) -> &[i64] {
        &self.levels
    }

    pub fn min(&self) -> i64 {
        self.levels[0]
    }

    pub fn max(&self) -> i64 {
        *self.levels.last().expect("scale has >= 2 levels")
    }

    pub fn contains(&self, rating: i64) -> bool {
        self.levels.binary_search(&rating).is_ok()
    }

    /// Clamp an arbitrary value onto the nearest permitted level.
    pub fn clamp(&self, value: f64) -> i64 {
        let rounded = value.round() as i64;
        self.levels
            .iter()
            .copied()
            .min_by_key(|l| (l - rounded).abs())
            .expect("scale has >= 2 levels")
    }
}

/// Mean of all permitted rating values; serves as both thresholds before any
/// rating has been accepted.
pub fn initial_threshold(scale: &RatingScale) -> f64 {
    let sum: i64 = scale.levels().iter().sum();
    sum as f64 / scale.levels().len() as f64
}

/// One observation from the rating stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingEvent {
    pub user_id: String,
    pub product_id: String,
    pub rating: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<String>,
    pub timestamp: i64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EventError {
    #[error("line {line}: rating {rating} is not on the scale")]
    OutOfScaleRating { line: usize, rating: i64 },
    #[error("line {line}: missing required field `{field}`")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: timestamp {ts} is negative")]
    NegativeTimestamp { line: usize, ts: i64 },
}

/// Check a decoded event against the scale and the structural invariants.
/// `line` is carried through purely for error reporting.
pub fn validate_event(
    event: RatingEvent,
    scale: &RatingScale,
    line: usize,
) -> Result<RatingEvent, EventError> {
    if event.user_id.is_empty() {
        return Err(EventError::MissingField { line, field: "user_id" });
    }
    if event.product_id.is_empty() {
        return Err(EventError::MissingField { line, field: "product_id" });
    }
    if event.timestamp < 0 {
        return Err(EventError::NegativeTimestamp { line, ts: event.timestamp });
    }
    if !scale.contains(event.rating) {
        return Err(EventError::OutOfScaleRating { line, rating: event.rating });
    }
    Ok(event)
}

/// Adjudication outcome for one user on one product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UserStatus {
    TrueUser,
    MaliciousUser,
}

impl UserStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            UserStatus::TrueUser => "TRUE",
            UserStatus::MaliciousUser => "MALICIOUS",
        }
    }
}

/// Direction of a threshold breach, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlarmDirection {
    None,
    Upgrading,
    Downgrading,
}

impl AlarmDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            AlarmDirection::None => "NONE",
            AlarmDirection::Upgrading => "UPGRADING",
            AlarmDirection::Downgrading => "DOWNGRADING",
        }
    }
}

/// Per-event verdict: what the engine decided and the state it decided under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserVerdict {
    pub user_id: String,
    pub product_id: String,
    pub rating: i64,
    pub status: UserStatus,
    /// Trust level: 1 = verified, 2 = accepted with reservations, 3 = rejected.
    pub level: u8,
    pub alarm: AlarmDirection,
    /// Threshold band the rating was checked against (pre-update).
    pub upgrading_threshold: f64,
    pub downgrading_threshold: f64,
    /// Best repository similarity, when feedback was consulted.
    pub similarity: Option<f64>,
    /// Reputation score after this event (unchanged by malicious verdicts);
    /// `None` until the product has at least one accepted rating.
    pub score_after: Option<f64>,
}

/// Direction of a score-distortion attack inferred from aggregate scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackType {
    pub kind: AlarmDirection,
    /// |difference| between filtered and unfiltered aggregates, in score units.
    pub magnitude: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn event(rating: i64, ts: i64) -> RatingEvent {
        RatingEvent {
            user_id: "u1".into(),
            product_id: "p1".into(),
            rating,
            feedback: None,
            timestamp: ts,
        }
    }

    #[test]
    fn scale_rejects_degenerate_inputs() {
        assert_eq!(RatingScale::new(vec![3]), Err(ScaleError::TooFewLevels(1)));
        assert_eq!(RatingScale::new(vec![2, 2]), Err(ScaleError::NotIncreasing));
        assert_eq!(RatingScale::new(vec![5, 1]), Err(ScaleError::NotIncreasing));
        assert_eq!(RatingScale::new(vec![0, 1]), Err(ScaleError::NotIncreasing));
    }

    #[test]
    fn initial_threshold_is_scale_mean() {
        assert_eq!(initial_threshold(&RatingScale::one_to_five()), 3.0);
        assert_eq!(initial_threshold(&RatingScale::new(vec![1, 2]).unwrap()), 1.5);
        let one_to_ten = RatingScale::new((1..=10).collect()).unwrap();
        assert_eq!(initial_threshold(&one_to_ten), 5.5);
    }

    #[test]
    fn initial_threshold_stays_inside_scale() {
        for levels in [vec![1, 5], vec![2, 3, 9], vec![1, 2, 3, 4, 5, 6, 7]] {
            let scale = RatingScale::new(levels).unwrap();
            let t = initial_threshold(&scale);
            assert!(scale.min() as f64 <= t && t <= scale.max() as f64);
        }
    }

    #[test]
    fn validate_accepts_well_formed_event() {
        let scale = RatingScale::one_to_five();
        assert!(validate_event(event(3, 10), &scale, 1).is_ok());
    }

    #[test]
    fn validate_rejects_out_of_scale_ratings() {
        let scale = RatingScale::one_to_five();
        assert_eq!(
            validate_event(event(6, 10), &scale, 4),
            Err(EventError::OutOfScaleRating { line: 4, rating: 6 })
        );
        assert_eq!(
            validate_event(event(0, 10), &scale, 9),
            Err(EventError::OutOfScaleRating { line: 9, rating: 0 })
        );
    }

    #[test]
    fn validate_rejects_structural_problems() {
        let scale = RatingScale::one_to_five();
        let mut missing_user = event(3, 10);
        missing_user.user_id.clear();
        assert!(matches!(
            validate_event(missing_user, &scale, 2),
            Err(EventError::MissingField { field: "user_id", .. })
        ));
        assert!(matches!(
            validate_event(event(3, -1), &scale, 3),
            Err(EventError::NegativeTimestamp { ts: -1, .. })
        ));
    }

    #[test]
    fn clamp_snaps_to_nearest_level() {
        let scale = RatingScale::one_to_five();
        assert_eq!(scale.clamp(0.2), 1);
        assert_eq!(scale.clamp(3.4), 3);
        assert_eq!(scale.clamp(7.9), 5);
    }
}
