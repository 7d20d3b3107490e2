//! The per-event decision flow wiring the detector, quality repositories, and
//! behavior analysis into one engine, plus trust-filtered score aggregation.
//!
//! Every event takes the same path: check the rating against the product's
//! current threshold band; an in-band rating is accepted outright, an alarmed
//! one must justify itself — first by its feedback against the repository
//! matching the alarm direction, then (failing that) by the user's own track
//! record. Only ratings from users adjudicated honest reach the detector
//! history, the reputation score, and the consensus tables, so a condemned
//! rating leaves every piece of engine state exactly as it found it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behavior::{adjudicate_suspect, RatingHistory};
use crate::config::{ConfigError, RunConfig};
use crate::detector::{check_alarm, DetectorState, ThresholdPair};
use crate::model::{
    validate_event, AlarmDirection, AttackType, EventError, RatingEvent, RatingScale, UserStatus,
    UserVerdict,
};
use crate::render::trunc;
use crate::repository::{Direction, QualityRepository, RepoError};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    InvalidEvent(#[from] EventError),
    #[error("event for product `{got}` routed to engine for `{expected}`")]
    WrongProduct { expected: String, got: String },
    #[error(transparent)]
    Repository(#[from] RepoError),
    #[error("product has no accepted ratings yet")]
    NoAcceptedRatings,
    #[error("product has no processed events yet")]
    NoEvents,
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Reputation aggregates with and without the condemned ratings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScorePair {
    /// Mean over every processed rating, malicious included.
    pub including_all: f64,
    /// Mean over accepted ratings only — the reputation score.
    pub excluding_malicious: f64,
    /// `excluding_malicious − including_all`.
    pub difference: f64,
}

impl ScorePair {
    pub fn new(including_all: f64, excluding_malicious: f64) -> Self {
        ScorePair {
            including_all,
            excluding_malicious,
            difference: excluding_malicious - including_all,
        }
    }
}

/// Classify the distortion an attack was aiming for from the gap between the
/// filtered and unfiltered aggregates: condemned ratings that dragged the
/// unfiltered mean down were a downgrading campaign, and vice versa.
/// Differences inside the `epsilon` dead band classify as no attack.
pub fn attack_type(pair: &ScorePair, epsilon: f64) -> AttackType {
    let kind = if pair.difference > epsilon {
        AlarmDirection::Downgrading
    } else if pair.difference < -epsilon {
        AlarmDirection::Upgrading
    } else {
        AlarmDirection::None
    };
    AttackType { kind, magnitude: pair.difference.abs() }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Detector, repositories, and verdict log for a single product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductEngine {
    product_id: String,
    detector: DetectorState,
    up_repo: Option<QualityRepository>,
    down_repo: Option<QualityRepository>,
    verdicts: Vec<UserVerdict>,
    /// Every processed rating in arrival order, condemned ones included.
    all_ratings: Vec<f64>,
}

impl ProductEngine {
    fn new(product_id: String, scale: &RatingScale, sensitivity: f64) -> Self {
        ProductEngine {
            product_id,
            detector: DetectorState::new(scale, sensitivity),
            up_repo: None,
            down_repo: None,
            verdicts: Vec::new(),
            all_ratings: Vec::new(),
        }
    }

    pub fn product_id(&self) -> &str {
        &self.product_id
    }

    pub fn detector(&self) -> &DetectorState {
        &self.detector
    }

    /// The band the next rating will be checked against.
    pub fn thresholds(&self) -> &ThresholdPair {
        self.detector.thresholds()
    }

    pub fn repository(&self, direction: Direction) -> Option<&QualityRepository> {
        match direction {
            Direction::Upgrading => self.up_repo.as_ref(),
            Direction::Downgrading => self.down_repo.as_ref(),
        }
    }

    fn repository_mut(&mut self, direction: Direction) -> Option<&mut QualityRepository> {
        match direction {
            Direction::Upgrading => self.up_repo.as_mut(),
            Direction::Downgrading => self.down_repo.as_mut(),
        }
    }

    /// One verdict per processed event, in arrival order.
    pub fn verdicts(&self) -> &[UserVerdict] {
        &self.verdicts
    }

    pub fn event_count(&self) -> usize {
        self.all_ratings.len()
    }

    /// Mean of accepted ratings, full precision.
    pub fn reputation_score(&self) -> Result<f64, EngineError> {
        let accepted = self.detector.accepted();
        if accepted.is_empty() {
            return Err(EngineError::NoAcceptedRatings);
        }
        Ok(mean(accepted))
    }

    /// Aggregates over all vs. accepted ratings, full precision.
    pub fn score_pair(&self) -> Result<ScorePair, EngineError> {
        if self.all_ratings.is_empty() {
            return Err(EngineError::NoEvents);
        }
        Ok(ScorePair::new(mean(&self.all_ratings), self.reputation_score()?))
    }

    /// The pair as reports print it: the unfiltered mean truncated to 4
    /// decimals, the reputation score truncated to 2, and the difference of
    /// those two rendered values.
    pub fn reported_score_pair(&self) -> Result<ScorePair, EngineError> {
        let pair = self.score_pair()?;
        Ok(ScorePair::new(trunc(pair.including_all, 4), trunc(pair.excluding_malicious, 2)))
    }
}

/// Multi-product engine: routes events, owns the cross-product rating history
/// and the per-user statuses the behavior analyzer consults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Engine {
    config: RunConfig,
    scale: RatingScale,
    products: BTreeMap<String, ProductEngine>,
    history: RatingHistory,
    statuses: BTreeMap<String, UserStatus>,
    /// Largest timestamp seen; drives repository forgetting.
    clock: i64,
}

impl Engine {
    pub fn new(config: RunConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let scale = config.scale();
        Ok(Engine {
            config,
            scale,
            products: BTreeMap::new(),
            history: RatingHistory::new(),
            statuses: BTreeMap::new(),
            clock: 0,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn scale(&self) -> &RatingScale {
        &self.scale
    }

    pub fn clock(&self) -> i64 {
        self.clock
    }

    pub fn product(&self, product_id: &str) -> Option<&ProductEngine> {
        self.products.get(product_id)
    }

    pub fn products(&self) -> impl Iterator<Item = &ProductEngine> {
        self.products.values()
    }

    pub fn history(&self) -> &RatingHistory {
        &self.history
    }

    pub fn statuses(&self) -> &BTreeMap<String, UserStatus> {
        &self.statuses
    }

    /// Install the manufacturer corpus for one direction of one product,
    /// creating the product engine if this is the first mention of it.
    /// Reseeding a direction replaces that repository outright.
    pub fn seed_repository(
        &mut self,
        product_id: &str,
        direction: Direction,
        manufacturer_docs: &[(String, i64)],
    ) -> Result<(), RepoError> {
        let repo = QualityRepository::init(
            product_id,
            direction,
            manufacturer_docs,
            self.config.repository_settings(),
        )?;
        let product = self.products.entry(product_id.to_string()).or_insert_with(|| {
            ProductEngine::new(product_id.to_string(), &self.scale, self.config.sensitivity)
        });
        match direction {
            Direction::Upgrading => product.up_repo = Some(repo),
            Direction::Downgrading => product.down_repo = Some(repo),
        }
        Ok(())
    }

    /// Adjudicate one event and fold the outcome into engine state.
    pub fn process_event(&mut self, event: &RatingEvent) -> Result<UserVerdict, EngineError> {
        let event = validate_event(event.clone(), &self.scale, 0)?;
        self.clock = self.clock.max(event.timestamp);
        let Engine { config, scale, products, history, statuses, clock } = self;
        let product = products.entry(event.product_id.clone()).or_insert_with(|| {
            ProductEngine::new(event.product_id.clone(), scale, config.sensitivity)
        });
        process_one(product, history, statuses, config, *clock, &event)
    }
}

enum Resolution {
    Accept { level: u8, admit: bool },
    Reject,
}

fn process_one(
    product: &mut ProductEngine,
    history: &mut RatingHistory,
    statuses: &mut BTreeMap<String, UserStatus>,
    config: &RunConfig,
    clock: i64,
    event: &RatingEvent,
) -> Result<UserVerdict, EngineError> {
    if event.product_id != product.product_id {
        return Err(EngineError::WrongProduct {
            expected: product.product_id.clone(),
            got: event.product_id.clone(),
        });
    }
    if let Some(repo) = product.up_repo.as_mut() {
        repo.apply_forgetting(clock)?;
    }
    if let Some(repo) = product.down_repo.as_mut() {
        repo.apply_forgetting(clock)?;
    }

    let pair = *product.detector.thresholds();
    let rating = event.rating as f64;
    let alarm = check_alarm(rating, &pair, product.all_ratings.len() + 1).direction;

    let behavior = |history: &RatingHistory, statuses: &BTreeMap<String, UserStatus>| {
        let verdict = adjudicate_suspect(
            history,
            statuses,
            &event.user_id,
            &event.product_id,
            &config.behavior_settings(),
        );
        if verdict.rescued {
            Resolution::Accept { level: 2, admit: false }
        } else {
            Resolution::Reject
        }
    };

    let already_malicious =
        statuses.get(&event.user_id) == Some(&UserStatus::MaliciousUser);
    let mut similarity = None;
    let resolution = if already_malicious {
        // Once condemned, always condemned: no fresh rating rehabilitates.
        Resolution::Reject
    } else if alarm == AlarmDirection::None {
        Resolution::Accept { level: 1, admit: false }
    } else {
        let direction = Direction::from_alarm(alarm).expect("alarmed events have a direction");
        match product.repository(direction).map(|r| r.consult(event.feedback.as_deref())) {
            Some(Ok(verdict)) => {
                similarity = Some(verdict.best_sim);
                match verdict.level {
                    1 => Resolution::Accept { level: 1, admit: true },
                    2 => Resolution::Accept { level: 2, admit: false },
                    _ => behavior(history, statuses),
                }
            }
            Some(Err(RepoError::MissingFeedback)) => {
                if config.strict_missing_feedback {
                    Resolution::Reject
                } else {
                    behavior(history, statuses)
                }
            }
            // Nothing to compare against: fall through to behavior analysis.
            Some(Err(RepoError::EmptyRepository)) | None => behavior(history, statuses),
            Some(Err(other)) => return Err(other.into()),
        }
    };

    let (status, level) = match resolution {
        Resolution::Accept { level, admit } => {
            product.detector.accept(rating);
            history.record(&event.user_id, &event.product_id, rating);
            statuses.insert(event.user_id.clone(), UserStatus::TrueUser);
            if admit {
                let direction =
                    Direction::from_alarm(alarm).expect("admission only follows an alarm");
                let text = event.feedback.as_deref().expect("level 1 requires feedback");
                product
                    .repository_mut(direction)
                    .expect("level 1 came from this repository")
                    .admit_feedback(text, event.timestamp)?;
            }
            (UserStatus::TrueUser, level)
        }
        Resolution::Reject => {
            statuses.insert(event.user_id.clone(), UserStatus::MaliciousUser);
            (UserStatus::MaliciousUser, 3)
        }
    };

    product.all_ratings.push(rating);
    let accepted = product.detector.accepted();
    let verdict = UserVerdict {
        user_id: event.user_id.clone(),
        product_id: event.product_id.clone(),
        rating: event.rating,
        status,
        level,
        alarm,
        upgrading_threshold: pair.upgrading,
        downgrading_threshold: pair.downgrading,
        similarity,
        score_after: if accepted.is_empty() { None } else { Some(mean(accepted)) },
    };
    product.verdicts.push(verdict.clone());
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn event(user: &str, rating: i64, ts: i64, feedback: Option<&str>) -> RatingEvent {
        RatingEvent {
            user_id: user.to_string(),
            product_id: "p1".to_string(),
            rating,
            feedback: feedback.map(str::to_string),
            timestamp: ts,
        }
    }

    fn engine() -> Engine {
        Engine::new(RunConfig::default()).unwrap()
    }

    fn seeded_engine() -> Engine {
        let mut e = engine();
        let up: Vec<(String, i64)> = [
            "battery backup yields more than 2 hrs, so it is very good",
            "touch screen is very good and display also good",
        ]
        .iter()
        .map(|t| (t.to_string(), 0))
        .collect();
        let down: Vec<(String, i64)> = [
            "battery drains fast and overheats during charging",
            "display flickers with dead pixels on screen edge",
        ]
        .iter()
        .map(|t| (t.to_string(), 0))
        .collect();
        e.seed_repository("p1", Direction::Upgrading, &up).unwrap();
        e.seed_repository("p1", Direction::Downgrading, &down).unwrap();
        e
    }

    #[test]
    fn first_in_band_rating_is_accepted_at_the_scale_mean_band() {
        let mut e = engine();
        let v = e.process_event(&event("u1", 3, 1, None)).unwrap();
        assert_eq!(v.status, UserStatus::TrueUser);
        assert_eq!(v.level, 1);
        assert_eq!(v.alarm, AlarmDirection::None);
        assert_eq!((v.upgrading_threshold, v.downgrading_threshold), (3.0, 3.0));
        assert_relative_eq!(v.score_after.unwrap(), 3.0);
    }

    #[test]
    fn alarmed_rating_with_trusted_feedback_is_accepted_and_admitted() {
        let mut e = seeded_engine();
        e.process_event(&event("u1", 3, 1, None)).unwrap();
        let docs_before = e.product("p1").unwrap().repository(Direction::Upgrading).unwrap().docs().len();
        let v = e
            .process_event(&event("u2", 5, 2, Some("touch screen is very good and display also good")))
            .unwrap();
        assert_eq!(v.alarm, AlarmDirection::Upgrading);
        assert_eq!(v.status, UserStatus::TrueUser);
        assert_eq!(v.level, 1);
        assert!(v.similarity.unwrap() > 0.999);
        assert_relative_eq!(v.score_after.unwrap(), 4.0);
        let docs_after = e.product("p1").unwrap().repository(Direction::Upgrading).unwrap().docs().len();
        assert_eq!(docs_after, docs_before + 1, "level 1 feedback joins the corpus");
    }

    #[test]
    fn alarmed_rating_with_off_topic_feedback_is_condemned_and_frozen() {
        let mut e = seeded_engine();
        e.process_event(&event("u1", 3, 1, None)).unwrap();
        e.process_event(&event("u2", 5, 2, Some("battery backup yields more than 2 hrs, so it is very good")))
            .unwrap();
        let before = *e.product("p1").unwrap().thresholds();
        let score_before = e.product("p1").unwrap().reputation_score().unwrap();
        let v = e
            .process_event(&event("u3", 1, 3, Some("courier lost my parcel in transit")))
            .unwrap();
        assert_eq!(v.alarm, AlarmDirection::Downgrading);
        assert_eq!(v.status, UserStatus::MaliciousUser);
        assert_eq!(v.level, 3);
        assert_eq!(v.similarity, Some(0.0));
        let after = *e.product("p1").unwrap().thresholds();
        assert_eq!(before, after, "condemned ratings never move the band");
        assert_relative_eq!(e.product("p1").unwrap().reputation_score().unwrap(), score_before);
        assert_relative_eq!(v.score_after.unwrap(), score_before);
    }

    #[test]
    fn condemned_user_stays_condemned_even_in_band() {
        let mut e = seeded_engine();
        e.process_event(&event("u1", 3, 1, None)).unwrap();
        e.process_event(&event("u2", 1, 2, Some("junk text about nothing"))).unwrap();
        assert_eq!(e.statuses()["u2"], UserStatus::MaliciousUser);
        // 3 is inside every band, but u2 is already out.
        let v = e.process_event(&event("u2", 3, 3, None)).unwrap();
        assert_eq!(v.status, UserStatus::MaliciousUser);
        assert_eq!(v.level, 3);
        assert_relative_eq!(v.score_after.unwrap(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn missing_feedback_routes_to_behavior_by_default_and_rejects_in_strict_mode() {
        let mut e = seeded_engine();
        e.process_event(&event("u1", 3, 1, None)).unwrap();
        let v = e.process_event(&event("u2", 5, 2, None)).unwrap();
        // No history for u2 → evidence-free → default switch condemns.
        assert_eq!(v.status, UserStatus::MaliciousUser);
        assert_eq!(v.similarity, None);

        let mut config = RunConfig::default();
        config.strict_missing_feedback = true;
        let mut strict = Engine::new(config).unwrap();
        strict.process_event(&event("u1", 3, 1, None)).unwrap();
        let v = strict.process_event(&event("u2", 5, 2, None)).unwrap();
        assert_eq!(v.status, UserStatus::MaliciousUser);
    }

    #[test]
    fn unseeded_product_falls_back_to_behavior_analysis() {
        let mut e = engine();
        // Build u2 a clean record on p2: tracks its consensus of 3 exactly.
        // (Ratings of 3 sit on the initial band, so nothing alarms here.)
        e.process_event(&RatingEvent {
            user_id: "other".into(),
            product_id: "p2".into(),
            rating: 3,
            feedback: None,
            timestamp: 1,
        })
        .unwrap();
        e.process_event(&RatingEvent {
            user_id: "u2".into(),
            product_id: "p2".into(),
            rating: 3,
            feedback: None,
            timestamp: 2,
        })
        .unwrap();
        e.process_event(&event("u1", 3, 3, None)).unwrap();
        let v = e.process_event(&event("u2", 5, 4, Some("ignored without a repository"))).unwrap();
        assert_eq!(v.alarm, AlarmDirection::Upgrading);
        assert_eq!(v.status, UserStatus::TrueUser);
        assert_eq!(v.level, 2, "rescued by track record, accepted with reservations");
        assert_eq!(v.similarity, None);
        assert_relative_eq!(v.score_after.unwrap(), 4.0);
    }

    #[test]
    fn evidence_free_rescue_switch_accepts_unknown_suspects() {
        let mut config = RunConfig::default();
        config.rescue_evidence_free = true;
        let mut e = Engine::new(config).unwrap();
        e.process_event(&event("u1", 3, 1, None)).unwrap();
        let v = e.process_event(&event("u2", 5, 2, None)).unwrap();
        assert_eq!(v.status, UserStatus::TrueUser);
        assert_eq!(v.level, 2);
    }

    #[test]
    fn score_pair_separates_filtered_and_unfiltered_means() {
        let mut e = seeded_engine();
        // First 5 alarms at the initial band and justifies itself; the second
        // lands exactly on the new band (5, 5) without alarming.
        e.process_event(&event("u1", 5, 1, Some("touch screen is very good and display also good")))
            .unwrap();
        e.process_event(&event("u2", 5, 2, None)).unwrap();
        e.process_event(&event("u3", 1, 3, Some("off topic rambling text"))).unwrap();
        let pair = e.product("p1").unwrap().score_pair().unwrap();
        assert_relative_eq!(pair.including_all, 11.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(pair.including_all, 3.6667, epsilon = 1e-4);
        assert_relative_eq!(pair.excluding_malicious, 5.0);
        assert_relative_eq!(pair.difference, 1.3333, epsilon = 1e-4);
    }

    #[test]
    fn reported_pair_truncates_each_side_to_its_printed_precision() {
        let mut e = engine();
        // Accepted 3, 5, 5 → 13/3 = 4.3333…; all ratings include a condemned 1.
        e.process_event(&event("u1", 3, 1, None)).unwrap();
        e.process_event(&event("u2", 5, 2, None)).unwrap();
        assert_eq!(e.statuses()["u2"], UserStatus::MaliciousUser);
        e.process_event(&event("u3", 4, 3, None)).unwrap();
        let pair = e.product("p1").unwrap().score_pair().unwrap();
        let reported = e.product("p1").unwrap().reported_score_pair().unwrap();
        assert_relative_eq!(reported.including_all, trunc(pair.including_all, 4));
        assert_relative_eq!(reported.excluding_malicious, trunc(pair.excluding_malicious, 2));
        assert_relative_eq!(
            reported.difference,
            reported.excluding_malicious - reported.including_all
        );
    }

    #[test]
    fn attack_type_classifies_by_sign_outside_the_dead_band() {
        let down = attack_type(&ScorePair::new(3.5333, 4.36), 0.05);
        assert_eq!(down.kind, AlarmDirection::Downgrading);
        assert_relative_eq!(down.magnitude, 0.8267, epsilon = 1e-12);
        let up = attack_type(&ScorePair::new(4.0, 3.5), 0.05);
        assert_eq!(up.kind, AlarmDirection::Upgrading);
        let none = attack_type(&ScorePair::new(4.0, 4.01), 0.05);
        assert_eq!(none.kind, AlarmDirection::None);
        assert_relative_eq!(none.magnitude, 0.01, epsilon = 1e-12);
    }

    #[test]
    fn empty_product_errors_on_scores() {
        let e = seeded_engine();
        let product = e.product("p1").unwrap();
        assert!(matches!(product.reputation_score(), Err(EngineError::NoAcceptedRatings)));
        assert!(matches!(product.score_pair(), Err(EngineError::NoEvents)));
    }

    #[test]
    fn out_of_scale_event_is_rejected() {
        let mut e = engine();
        assert!(matches!(
            e.process_event(&event("u1", 9, 1, None)),
            Err(EngineError::InvalidEvent(EventError::OutOfScaleRating { rating: 9, .. }))
        ));
        assert_eq!(e.product("p1"), None, "rejected events leave no trace");
    }

    #[test]
    fn wrong_product_is_caught_by_the_product_guard() {
        let mut config_engine = engine();
        config_engine.process_event(&event("u1", 3, 1, None)).unwrap();
        let Engine { config, products, history, statuses, .. } = &mut config_engine;
        let product = products.get_mut("p1").unwrap();
        let stray = RatingEvent {
            user_id: "u2".into(),
            product_id: "p2".into(),
            rating: 3,
            feedback: None,
            timestamp: 2,
        };
        let err = process_one(product, history, statuses, config, 2, &stray).unwrap_err();
        assert!(matches!(err, EngineError::WrongProduct { .. }));
    }

    #[test]
    fn replay_is_deterministic() {
        let events: Vec<RatingEvent> = [(3, None), (5, None), (1, Some("spam spam")), (4, None)]
            .iter()
            .enumerate()
            .map(|(i, (r, f))| event(&format!("u{i}"), *r, i as i64 + 1, *f))
            .collect();
        let mut a = seeded_engine();
        let mut b = seeded_engine();
        let va: Vec<_> = events.iter().map(|e| a.process_event(e).unwrap()).collect();
        let vb: Vec<_> = events.iter().map(|e| b.process_event(e).unwrap()).collect();
        assert_eq!(va, vb);
        assert_eq!(a, b);
    }

    #[test]
    fn one_verdict_per_event_appended_in_order() {
        let mut e = seeded_engine();
        for (i, r) in [3, 4, 5, 1, 3].iter().enumerate() {
            e.process_event(&event(&format!("u{i}"), *r, i as i64 + 1, None)).unwrap();
        }
        let product = e.product("p1").unwrap();
        assert_eq!(product.verdicts().len(), 5);
        assert_eq!(product.event_count(), 5);
        let users: Vec<&str> = product.verdicts().iter().map(|v| v.user_id.as_str()).collect();
        assert_eq!(users, vec!["u0", "u1", "u2", "u3", "u4"]);
    }

    #[test]
    fn filtering_equivalence_on_a_small_stream() {
        let events: Vec<RatingEvent> = [
            ("u1", 3, None),
            ("u2", 5, Some("battery backup yields more than 2 hrs, so it is very good")),
            ("u3", 1, Some("driver dumped the package somewhere")),
            ("u4", 4, None),
            ("u5", 1, None),
            ("u6", 5, Some("touch screen is very good and display also good")),
        ]
        .iter()
        .enumerate()
        .map(|(i, (u, r, f))| {
            let mut ev = event(u, *r, i as i64 + 1, *f);
            ev.user_id = u.to_string();
            ev
        })
        .collect();

        let mut full = seeded_engine();
        let verdicts: Vec<UserVerdict> =
            events.iter().map(|e| full.process_event(e).unwrap()).collect();
        let malicious: Vec<&str> = verdicts
            .iter()
            .filter(|v| v.status == UserStatus::MaliciousUser)
            .map(|v| v.user_id.as_str())
            .collect();
        assert!(!malicious.is_empty(), "the stream must exercise the filter");

        let mut filtered = seeded_engine();
        for (ev, v) in events.iter().zip(&verdicts) {
            if v.status == UserStatus::TrueUser {
                filtered.process_event(ev).unwrap();
            }
        }
        assert_eq!(
            full.product("p1").unwrap().reputation_score().unwrap(),
            filtered.product("p1").unwrap().reputation_score().unwrap()
        );
        assert_eq!(full.product("p1").unwrap().thresholds(), filtered.product("p1").unwrap().thresholds());
    }

    #[test]
    fn scores_stay_on_the_scale() {
        let mut e = seeded_engine();
        for (i, r) in [5, 5, 5, 1, 1, 3, 4, 2].iter().enumerate() {
            e.process_event(&event(&format!("u{i}"), *r, i as i64 + 1, None)).unwrap();
        }
        let score = e.product("p1").unwrap().reputation_score().unwrap();
        assert!((1.0..=5.0).contains(&score));
    }

    #[test]
    fn serde_round_trip_resumes_identically() {
        let mut e = seeded_engine();
        e.process_event(&event("u1", 3, 1, None)).unwrap();
        e.process_event(&event("u2", 5, 2, Some("touch screen is very good and display also good")))
            .unwrap();
        let json = serde_json::to_string(&e).unwrap();
        let mut restored: Engine = serde_json::from_str(&json).unwrap();
        assert_eq!(restored, e);
        let next = event("u3", 1, 3, Some("random unrelated complaint"));
        assert_eq!(e.process_event(&next).unwrap(), restored.process_event(&next).unwrap());
        assert_eq!(e, restored);
    }
}
