//! CUSUM baseline detector, synthetic attack scenarios with ground truth,
//! and the metrics that compare the two detection approaches.
//!
//! The baseline treats the rating stream as a plain change-detection problem:
//! a two-sided CUSUM chart accumulates deviations from an in-control mean and
//! flags whoever happens to be rating when the chart crosses its decision
//! threshold. It sees no feedback text and keeps no per-user state — exactly
//! the handicap the comparison is designed to expose, since a burst of honest
//! enthusiasm and a collusion attack look identical to a mean-shift chart.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::model::{
    initial_threshold, AlarmDirection, RatingEvent, RatingScale, UserStatus, UserVerdict,
};
use crate::pipeline::{Engine, EngineError};
use crate::repository::{Direction, RepoError};

/// How the in-control mean is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Mu0Mode {
    /// Mean of the non-alarmed ratings seen so far (scale mean before any).
    RunningMean,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CusumParams {
    pub mu0: Mu0Mode,
    /// Smallest mean shift worth detecting, in rating units.
    pub nu: f64,
    /// Decision threshold on the cumulative statistics.
    pub h: f64,
}

impl Default for CusumParams {
    fn default() -> Self {
        CusumParams { mu0: Mu0Mode::RunningMean, nu: 1.0, h: 2.0 }
    }
}

/// One snapshot of the two-sided chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CusumState {
    pub mu0: f64,
    pub nu: f64,
    pub h: f64,
    pub g_plus: f64,
    pub g_minus: f64,
}

/// Advance the chart by one rating. The statistics clamp at zero from below;
/// whichever side crosses `h` raises its alarm and resets to zero.
pub fn cusum_step(state: &CusumState, rating: f64) -> (CusumState, AlarmDirection) {
    let mut next = *state;
    next.g_plus = (state.g_plus + rating - state.mu0 - state.nu / 2.0).max(0.0);
    next.g_minus = (state.g_minus + state.mu0 - state.nu / 2.0 - rating).max(0.0);
    // With nu > 0 a single rating can push at most one side over h.
    let alarm = if next.g_plus > state.h {
        next.g_plus = 0.0;
        AlarmDirection::Upgrading
    } else if next.g_minus > state.h {
        next.g_minus = 0.0;
        AlarmDirection::Downgrading
    } else {
        AlarmDirection::None
    };
    (next, alarm)
}

/// Stateful chart for one product's stream, with the running in-control mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CusumDetector {
    params: CusumParams,
    g_plus: f64,
    g_minus: f64,
    /// Scale mean; stands in for the running mean until a rating is accepted.
    initial_mean: f64,
    accepted_sum: f64,
    accepted_count: u64,
}

impl CusumDetector {
    pub fn new(scale: &RatingScale, params: CusumParams) -> Self {
        CusumDetector {
            params,
            g_plus: 0.0,
            g_minus: 0.0,
            initial_mean: initial_threshold(scale),
            accepted_sum: 0.0,
            accepted_count: 0,
        }
    }

    /// In-control mean in force for the NEXT rating.
    pub fn mu0(&self) -> f64 {
        match self.params.mu0 {
            Mu0Mode::Fixed(value) => value,
            Mu0Mode::RunningMean => {
                if self.accepted_count == 0 {
                    self.initial_mean
                } else {
                    self.accepted_sum / self.accepted_count as f64
                }
            }
        }
    }

    pub fn statistics(&self) -> (f64, f64) {
        (self.g_plus, self.g_minus)
    }

    /// Mean of the non-alarmed ratings, once there is one.
    pub fn accepted_mean(&self) -> Option<f64> {
        (self.accepted_count > 0).then(|| self.accepted_sum / self.accepted_count as f64)
    }

    /// The exact band the next rating must stay inside to avoid an alarm,
    /// derived by inverting the step recursions at the current statistics.
    pub fn thresholds(&self) -> (f64, f64) {
        let mu0 = self.mu0();
        let up = mu0 + self.params.nu / 2.0 + (self.params.h - self.g_plus).max(0.0);
        let down = mu0 - self.params.nu / 2.0 - (self.params.h - self.g_minus).max(0.0);
        (up, down)
    }

    /// Feed one rating; non-alarmed ratings join the running mean.
    pub fn observe(&mut self, rating: f64) -> AlarmDirection {
        let state = CusumState {
            mu0: self.mu0(),
            nu: self.params.nu,
            h: self.params.h,
            g_plus: self.g_plus,
            g_minus: self.g_minus,
        };
        let (next, alarm) = cusum_step(&state, rating);
        self.g_plus = next.g_plus;
        self.g_minus = next.g_minus;
        if alarm == AlarmDirection::None {
            self.accepted_sum += rating;
            self.accepted_count += 1;
        }
        alarm
    }
}

/// Run the CUSUM baseline over a stream as if it were the detection engine:
/// one chart per product, an alarm condemns the rating's user, non-alarmed
/// ratings aggregate into the score. No feedback, no rescue.
pub fn run_cusum_detector(
    events: &[RatingEvent],
    scale: &RatingScale,
    params: CusumParams,
) -> Vec<UserVerdict> {
    let mut charts: BTreeMap<String, CusumDetector> = BTreeMap::new();
    events
        .iter()
        .map(|event| {
            let chart = charts
                .entry(event.product_id.clone())
                .or_insert_with(|| CusumDetector::new(scale, params));
            let (up, down) = chart.thresholds();
            let alarm = chart.observe(event.rating as f64);
            let flagged = alarm != AlarmDirection::None;
            UserVerdict {
                user_id: event.user_id.clone(),
                product_id: event.product_id.clone(),
                rating: event.rating,
                status: if flagged { UserStatus::MaliciousUser } else { UserStatus::TrueUser },
                level: if flagged { 3 } else { 1 },
                alarm,
                upgrading_threshold: up,
                downgrading_threshold: down,
                similarity: None,
                score_after: chart.accepted_mean(),
            }
        })
        .collect()
}

/// Feedback texts honest raters draw from when they liked the product.
/// The same texts seed the upgrading repositories in comparisons, standing in
/// for a manufacturer description honest reviewers naturally echo.
pub const POSITIVE_TEMPLATES: &[&str] = &[
    "battery backup yields more than 2 hrs, so it is very good",
    "touch screen is very good and display also good",
    "battery backup yields more so it is very good",
    "touch screen is very good and display good",
];

/// Honest complaints; seed the downgrading repositories in comparisons.
pub const NEGATIVE_TEMPLATES: &[&str] = &[
    "battery drains fast and overheats during charging",
    "display flickers with dead pixels on screen edge",
    "touch response lags and freezes after updates",
];

/// What colluders attach to their ratings: grievances about everything except
/// the product. Shares no vocabulary with either template set.
pub const OFF_TOPIC_TEXTS: &[&str] = &[
    "courier misplaced my parcel delivery box",
    "seller never answered refund emails",
    "warehouse shipped wrong color weeks late",
    "packaging arrived crushed torn label missing",
];

/// Manufacturer seed corpus for one direction, timestamped at zero.
pub fn template_seed_docs(direction: Direction) -> Vec<(String, i64)> {
    let templates = match direction {
        Direction::Upgrading => POSITIVE_TEMPLATES,
        Direction::Downgrading => NEGATIVE_TEMPLATES,
    };
    templates.iter().map(|t| (t.to_string(), 0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum TruthLabel {
    Honest,
    Malicious,
}

/// A generated rating stream with its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub events: Vec<RatingEvent>,
    pub truth: BTreeMap<String, TruthLabel>,
    /// The product's actual quality honest ratings scatter around.
    pub q: f64,
    pub seed: u64,
}

/// Build a single-product scenario: `n_honest` raters scoring the true
/// quality `q` plus noise in {−1, 0, +1} (probabilities `honest_noise`),
/// with feedback echoing the template matching their sentiment, and
/// `n_malicious` colluders all pushing the scale extreme for `attack` with
/// off-topic feedback. Arrival order is shuffled; timestamps follow arrival.
/// Pure in all arguments including `seed`.
pub fn generate_scenario(
    scale: &RatingScale,
    n_honest: usize,
    n_malicious: usize,
    q: f64,
    attack: Direction,
    seed: u64,
    honest_noise: [f64; 3],
) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let product_id = "p1".to_string();
    let mut events = Vec::with_capacity(n_honest + n_malicious);
    let mut truth = BTreeMap::new();

    for i in 0..n_honest {
        let user_id = format!("u{}", i + 1);
        let noise = sample_noise(&mut rng, honest_noise);
        let rating = scale.clamp(q + noise as f64);
        let templates =
            if (rating as f64) < q { NEGATIVE_TEMPLATES } else { POSITIVE_TEMPLATES };
        let feedback = templates[rng.gen_range(0..templates.len())].to_string();
        truth.insert(user_id.clone(), TruthLabel::Honest);
        events.push(RatingEvent {
            user_id,
            product_id: product_id.clone(),
            rating,
            feedback: Some(feedback),
            timestamp: 0,
        });
    }
    for j in 0..n_malicious {
        let user_id = format!("u{}", n_honest + j + 1);
        let rating = match attack {
            Direction::Upgrading => scale.max(),
            Direction::Downgrading => scale.min(),
        };
        let feedback = OFF_TOPIC_TEXTS[rng.gen_range(0..OFF_TOPIC_TEXTS.len())].to_string();
        truth.insert(user_id.clone(), TruthLabel::Malicious);
        events.push(RatingEvent {
            user_id,
            product_id: product_id.clone(),
            rating,
            feedback: Some(feedback),
            timestamp: 0,
        });
    }

    events.shuffle(&mut rng);
    for (i, event) in events.iter_mut().enumerate() {
        event.timestamp = i as i64 + 1;
    }
    Scenario { events, truth, q, seed }
}

fn sample_noise(rng: &mut ChaCha8Rng, probs: [f64; 3]) -> i64 {
    let x: f64 = rng.gen();
    if x < probs[0] {
        -1
    } else if x < probs[0] + probs[1] {
        0
    } else {
        1
    }
}

/// Per-user detection quality against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Honest users flagged / honest users rated. 0 when no honest users.
    pub false_alarm_rate: f64,
    /// Malicious users flagged / malicious users rated. 1 when none.
    pub detection_rate: f64,
    pub true_flagged: usize,
    pub true_total: usize,
    pub malicious_flagged: usize,
    pub malicious_total: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("verdict user `{0}` is missing from ground truth")]
    UnknownUser(String),
}

/// Score a verdict log against ground truth, counting per unique user: a
/// user is flagged if any of their verdicts is malicious.
pub fn evaluate(
    verdicts: &[UserVerdict],
    truth: &BTreeMap<String, TruthLabel>,
) -> Result<Metrics, EvalError> {
    let mut flagged_by_user: BTreeMap<&str, bool> = BTreeMap::new();
    for verdict in verdicts {
        if !truth.contains_key(&verdict.user_id) {
            return Err(EvalError::UnknownUser(verdict.user_id.clone()));
        }
        let entry = flagged_by_user.entry(&verdict.user_id).or_insert(false);
        *entry |= verdict.status == UserStatus::MaliciousUser;
    }
    let mut metrics = Metrics {
        false_alarm_rate: 0.0,
        detection_rate: 1.0,
        true_flagged: 0,
        true_total: 0,
        malicious_flagged: 0,
        malicious_total: 0,
    };
    for (user, flagged) in &flagged_by_user {
        match truth[*user] {
            TruthLabel::Honest => {
                metrics.true_total += 1;
                metrics.true_flagged += *flagged as usize;
            }
            TruthLabel::Malicious => {
                metrics.malicious_total += 1;
                metrics.malicious_flagged += *flagged as usize;
            }
        }
    }
    if metrics.true_total > 0 {
        metrics.false_alarm_rate = metrics.true_flagged as f64 / metrics.true_total as f64;
    }
    if metrics.malicious_total > 0 {
        metrics.detection_rate = metrics.malicious_flagged as f64 / metrics.malicious_total as f64;
    }
    Ok(metrics)
}

#[derive(Debug, Error)]
pub enum CompareError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Repository(#[from] RepoError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Both detectors' metrics over one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub n_users: usize,
    pub qra: Metrics,
    pub cusum: Metrics,
    pub seed: u64,
}

/// Run the full engine and the CUSUM baseline over the same stream. The
/// engine's repositories are seeded from the template corpora for every
/// product in the scenario; the baseline gets the raw ratings only.
pub fn compare_detectors(
    scenario: &Scenario,
    config: &RunConfig,
) -> Result<ComparisonRecord, CompareError> {
    let mut engine = Engine::new(config.clone())?;
    let products: BTreeSet<&str> =
        scenario.events.iter().map(|e| e.product_id.as_str()).collect();
    for product in products {
        engine.seed_repository(product, Direction::Upgrading, &template_seed_docs(Direction::Upgrading))?;
        engine.seed_repository(product, Direction::Downgrading, &template_seed_docs(Direction::Downgrading))?;
    }
    let mut qra_verdicts = Vec::with_capacity(scenario.events.len());
    for event in &scenario.events {
        qra_verdicts.push(engine.process_event(event)?);
    }
    let qra = evaluate(&qra_verdicts, &scenario.truth)?;

    let cusum_verdicts =
        run_cusum_detector(&scenario.events, &config.scale(), config.cusum_params());
    let cusum = evaluate(&cusum_verdicts, &scenario.truth)?;

    Ok(ComparisonRecord { n_users: scenario.truth.len(), qra, cusum, seed: scenario.seed })
}

/// Mean metrics for one rater-count, aggregated over a seed suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub n_users: usize,
    pub qra_far: f64,
    pub cusum_far: f64,
    pub qra_detection: f64,
    pub cusum_detection: f64,
    /// How many seeds the means aggregate.
    pub seeds: usize,
}

/// Monte Carlo suite parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteParams {
    pub sizes: Vec<usize>,
    pub seeds_per_size: usize,
    /// Fraction of each size that colludes (rounded to the nearest user).
    pub malicious_fraction: f64,
    pub q: f64,
    pub attack: Direction,
}

impl Default for SuiteParams {
    fn default() -> Self {
        SuiteParams {
            sizes: vec![0, 10, 15, 20, 25],
            seeds_per_size: 100,
            malicious_fraction: 0.3,
            q: 4.0,
            attack: Direction::Downgrading,
        }
    }
}

/// One averaged row per size; scenario seeds run `config.seed`,
/// `config.seed + 1`, … so suites are reproducible end to end.
pub fn run_comparison_suite(
    config: &RunConfig,
    params: &SuiteParams,
) -> Result<Vec<ComparisonRow>, CompareError> {
    let scale = config.scale();
    let mut rows = Vec::with_capacity(params.sizes.len());
    for &size in &params.sizes {
        let n_malicious = (size as f64 * params.malicious_fraction).round() as usize;
        let n_honest = size - n_malicious;
        let mut sums = (0.0, 0.0, 0.0, 0.0);
        for s in 0..params.seeds_per_size {
            let seed = config.seed.wrapping_add(s as u64);
            let scenario = generate_scenario(
                &scale,
                n_honest,
                n_malicious,
                params.q,
                params.attack,
                seed,
                config.honest_noise,
            );
            let record = compare_detectors(&scenario, config)?;
            sums.0 += record.qra.false_alarm_rate;
            sums.1 += record.cusum.false_alarm_rate;
            sums.2 += record.qra.detection_rate;
            sums.3 += record.cusum.detection_rate;
        }
        let n = params.seeds_per_size.max(1) as f64;
        rows.push(ComparisonRow {
            n_users: size,
            qra_far: sums.0 / n,
            cusum_far: sums.1 / n,
            qra_detection: sums.2 / n,
            cusum_detection: sums.3 / n,
            seeds: params.seeds_per_size,
        });
    }
    Ok(rows)
}
