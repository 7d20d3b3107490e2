//! Run configuration: every tunable in one place, parsed from a line-oriented
//! `key = value` file, validated, and echoed back into reports so any run can
//! be reproduced from its own output.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::{CusumParams, Mu0Mode};
use crate::behavior::BehaviorSettings;
use crate::lsi::Tokenizer;
use crate::model::{RatingScale, ScaleError};
use crate::repository::RepositorySettings;

/// All knobs for a detection, simulation, or comparison run.
///
/// Field-by-field defaults are what [`RunConfig::default`] returns; the
/// config file only needs the keys that differ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Admissible rating levels, ascending. Key `scale_levels`.
    pub scale_levels: Vec<i64>,
    /// Additive adjustment to the deviation term. Key `sensitivity`.
    pub sensitivity: f64,
    /// Similarity for full trust (level 1). Key `sim_high`.
    pub sim_high: f64,
    /// Similarity below which feedback is rejected (level 3). Key `sim_low`.
    pub sim_low: f64,
    /// Concept-space rank for the feedback index. Key `rank_k`.
    pub rank_k: usize,
    /// Repository forgetting half-life in seconds. Key `half_life_secs`.
    pub half_life_secs: f64,
    /// Decay weight below which repository docs are dropped. Key `epsilon_weight`.
    pub epsilon_weight: f64,
    /// Cross-product deviation above which a suspect is condemned. Key `dev_cap`.
    pub dev_cap: f64,
    /// Minimum shared products for a defined user similarity. Key `min_common`.
    pub min_common: usize,
    /// Lockstep cosine threshold for collusion edges. Key `collusion_threshold`.
    pub collusion_threshold: f64,
    /// CUSUM in-control mean: `running` or a number. Key `cusum_mu0`.
    pub cusum_mu0: Mu0Mode,
    /// CUSUM expected shift. Key `cusum_nu`.
    pub cusum_nu: f64,
    /// CUSUM decision threshold. Key `cusum_h`.
    pub cusum_h: f64,
    /// Dead band around zero for attack classification. Key `attack_epsilon`.
    pub attack_epsilon: f64,
    /// RNG seed for scenario generation. Key `seed`.
    pub seed: u64,
    /// Rescue an alarmed user nothing is known about. Key `rescue_evidence_free`.
    pub rescue_evidence_free: bool,
    /// Mark alarmed non-responders malicious without behavior analysis.
    /// Key `strict_missing_feedback`.
    pub strict_missing_feedback: bool,
    /// P(noise = -1), P(0), P(+1) for honest scenario ratings. Key `honest_noise`.
    pub honest_noise: [f64; 3],
    /// Exempt manufacturer seed docs from forgetting. Key `pin_manufacturer`.
    pub pin_manufacturer: bool,
    /// Tokenizer stop words, comma-separated; empty by default. Key `stop_words`.
    pub stop_words: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scale_levels: vec![1, 2, 3, 4, 5],
            sensitivity: 0.0,
            sim_high: 0.8,
            sim_low: 0.3,
            rank_k: 2,
            half_life_secs: 90.0 * 86_400.0,
            epsilon_weight: 0.01,
            dev_cap: 1.0,
            min_common: 2,
            collusion_threshold: 0.95,
            cusum_mu0: Mu0Mode::RunningMean,
            cusum_nu: 1.0,
            cusum_h: 2.0,
            attack_epsilon: 0.05,
            seed: 0,
            rescue_evidence_free: false,
            strict_missing_feedback: false,
            honest_noise: [0.2, 0.6, 0.2],
            pin_manufacturer: true,
            stop_words: Vec::new(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {detail}")]
    BadValue { line: usize, key: String, detail: String },
    #[error("line {line}: expected `key = value`")]
    MissingSeparator { line: usize },
    #[error("invalid `{field}`: {detail}")]
    Invalid { field: &'static str, detail: String },
}

/// Every key `parse` accepts, in the order `echo` emits them.
const KEYS: &[&str] = &[
    "scale_levels",
    "sensitivity",
    "sim_high",
    "sim_low",
    "rank_k",
    "half_life_secs",
    "epsilon_weight",
    "dev_cap",
    "min_common",
    "collusion_threshold",
    "cusum_mu0",
    "cusum_nu",
    "cusum_h",
    "attack_epsilon",
    "seed",
    "rescue_evidence_free",
    "strict_missing_feedback",
    "honest_noise",
    "pin_manufacturer",
    "stop_words",
];

impl RunConfig {
    /// Parse a config file body. Blank lines and `#` comments are skipped,
    /// later keys override earlier ones, unknown keys are an error. The
    /// result is validated before being returned.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = RunConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let stripped = stripped.trim();
            if stripped.is_empty() {
                continue;
            }
            let (key, value) = stripped
                .split_once('=')
                .ok_or(ConfigError::MissingSeparator { line })?;
            config.apply(key.trim(), value.trim(), line)?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Set one key from its textual value; `line` is for error reporting.
    pub fn apply(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let bad = |detail: String| ConfigError::BadValue {
            line,
            key: key.to_string(),
            detail,
        };
        match key {
            "scale_levels" => {
                self.scale_levels = split_list(value)
                    .map(|v| v.parse::<i64>().map_err(|e| bad(e.to_string())))
                    .collect::<Result<_, _>>()?;
            }
            "sensitivity" => self.sensitivity = parse_num(value).map_err(bad)?,
            "sim_high" => self.sim_high = parse_num(value).map_err(bad)?,
            "sim_low" => self.sim_low = parse_num(value).map_err(bad)?,
            "rank_k" => self.rank_k = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            "half_life_secs" => self.half_life_secs = parse_num(value).map_err(bad)?,
            "epsilon_weight" => self.epsilon_weight = parse_num(value).map_err(bad)?,
            "dev_cap" => self.dev_cap = parse_num(value).map_err(bad)?,
            "min_common" => self.min_common = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            "collusion_threshold" => self.collusion_threshold = parse_num(value).map_err(bad)?,
            "cusum_mu0" => {
                self.cusum_mu0 = if value.eq_ignore_ascii_case("running") {
                    Mu0Mode::RunningMean
                } else {
                    Mu0Mode::Fixed(parse_num(value).map_err(|e| bad(format!("expected `running` or a number: {e}")))?)
                };
            }
            "cusum_nu" => self.cusum_nu = parse_num(value).map_err(bad)?,
            "cusum_h" => self.cusum_h = parse_num(value).map_err(bad)?,
            "attack_epsilon" => self.attack_epsilon = parse_num(value).map_err(bad)?,
            "seed" => self.seed = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            "rescue_evidence_free" => self.rescue_evidence_free = parse_bool(value).map_err(bad)?,
            "strict_missing_feedback" => self.strict_missing_feedback = parse_bool(value).map_err(bad)?,
            "honest_noise" => {
                let probs: Vec<f64> = split_list(value)
                    .map(|v| parse_num(v).map_err(&bad))
                    .collect::<Result<_, _>>()?;
                self.honest_noise = probs
                    .try_into()
                    .map_err(|v: Vec<f64>| bad(format!("expected 3 probabilities, got {}", v.len())))?;
            }
            "pin_manufacturer" => self.pin_manufacturer = parse_bool(value).map_err(bad)?,
            "stop_words" => {
                self.stop_words = split_list(value).map(str::to_string).collect();
            }
            other => {
                return Err(ConfigError::UnknownKey { line, key: other.to_string() });
            }
        }
        Ok(())
    }

    /// Range checks beyond what parsing enforces.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |field: &'static str, detail: String| ConfigError::Invalid { field, detail };
        RatingScale::new(self.scale_levels.clone()).map_err(|e: ScaleError| invalid("scale_levels", e.to_string()))?;
        if !(self.sim_low <= self.sim_high) {
            return Err(invalid("sim_low", format!("must be <= sim_high ({} > {})", self.sim_low, self.sim_high)));
        }
        for (field, value) in [("sim_high", self.sim_high), ("sim_low", self.sim_low)] {
            if !(-1.0..=1.0).contains(&value) {
                return Err(invalid(field, format!("{value} outside [-1, 1]")));
            }
        }
        if self.rank_k == 0 {
            return Err(invalid("rank_k", "must be >= 1".into()));
        }
        if !(self.half_life_secs > 0.0) {
            return Err(invalid("half_life_secs", format!("{} is not > 0", self.half_life_secs)));
        }
        if !(self.epsilon_weight > 0.0 && self.epsilon_weight <= 1.0) {
            return Err(invalid("epsilon_weight", format!("{} outside (0, 1]", self.epsilon_weight)));
        }
        if !(self.dev_cap >= 0.0) {
            return Err(invalid("dev_cap", format!("{} is not >= 0", self.dev_cap)));
        }
        if self.min_common == 0 {
            return Err(invalid("min_common", "must be >= 1".into()));
        }
        if !(-1.0..=1.0).contains(&self.collusion_threshold) {
            return Err(invalid("collusion_threshold", format!("{} outside [-1, 1]", self.collusion_threshold)));
        }
        if !(self.cusum_nu > 0.0) {
            return Err(invalid("cusum_nu", format!("{} is not > 0", self.cusum_nu)));
        }
        if !(self.cusum_h > 0.0) {
            return Err(invalid("cusum_h", format!("{} is not > 0", self.cusum_h)));
        }
        if !(self.attack_epsilon >= 0.0) {
            return Err(invalid("attack_epsilon", format!("{} is not >= 0", self.attack_epsilon)));
        }
        if self.honest_noise.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(invalid("honest_noise", "probabilities must lie in [0, 1]".into()));
        }
        let total: f64 = self.honest_noise.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid("honest_noise", format!("probabilities sum to {total}, not 1")));
        }
        Ok(())
    }

    /// Canonical `key = value` rendering of the full config, one key per
    /// line in a fixed order. `parse(echo(c))` reproduces `c` exactly;
    /// every report embeds this block.
    pub fn echo(&self) -> String {
        let join_i64 = |v: &[i64]| v.iter().map(i64::to_string).collect::<Vec<_>>().join(",");
        let join_f64 = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let mut out = String::new();
        for key in KEYS {
            let value = match *key {
                "scale_levels" => join_i64(&self.scale_levels),
                "sensitivity" => self.sensitivity.to_string(),
                "sim_high" => self.sim_high.to_string(),
                "sim_low" => self.sim_low.to_string(),
                "rank_k" => self.rank_k.to_string(),
                "half_life_secs" => self.half_life_secs.to_string(),
                "epsilon_weight" => self.epsilon_weight.to_string(),
                "dev_cap" => self.dev_cap.to_string(),
                "min_common" => self.min_common.to_string(),
                "collusion_threshold" => self.collusion_threshold.to_string(),
                "cusum_mu0" => match self.cusum_mu0 {
                    Mu0Mode::RunningMean => "running".to_string(),
                    Mu0Mode::Fixed(v) => v.to_string(),
                },
                "cusum_nu" => self.cusum_nu.to_string(),
                "cusum_h" => self.cusum_h.to_string(),
                "attack_epsilon" => self.attack_epsilon.to_string(),
                "seed" => self.seed.to_string(),
                "rescue_evidence_free" => self.rescue_evidence_free.to_string(),
                "strict_missing_feedback" => self.strict_missing_feedback.to_string(),
                "honest_noise" => join_f64(&self.honest_noise),
                "pin_manufacturer" => self.pin_manufacturer.to_string(),
                "stop_words" => self.stop_words.join(","),
                _ => unreachable!("KEYS and echo cover the same set"),
            };
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&value);
            out.push('\n');
        }
        out
    }

    /// The rating scale this config describes. `validate` guarantees this
    /// cannot fail on a parsed config.
    pub fn scale(&self) -> RatingScale {
        RatingScale::new(self.scale_levels.clone()).expect("validated scale")
    }

    pub fn tokenizer(&self) -> Tokenizer {
        if self.stop_words.is_empty() {
            Tokenizer::new()
        } else {
            Tokenizer::with_stop_words(self.stop_words.iter().cloned())
        }
    }

    pub fn repository_settings(&self) -> RepositorySettings {
        RepositorySettings {
            sim_high: self.sim_high,
            sim_low: self.sim_low,
            k: self.rank_k,
            half_life_secs: self.half_life_secs,
            epsilon_weight: self.epsilon_weight,
            pin_manufacturer: self.pin_manufacturer,
            tokenizer: self.tokenizer(),
        }
    }

    pub fn behavior_settings(&self) -> BehaviorSettings {
        BehaviorSettings {
            min_common: self.min_common,
            collusion_threshold: self.collusion_threshold,
            dev_cap: self.dev_cap,
            rescue_evidence_free: self.rescue_evidence_free,
        }
    }

    pub fn cusum_params(&self) -> CusumParams {
        CusumParams {
            mu0: self.cusum_mu0,
            nu: self.cusum_nu,
            h: self.cusum_h,
        }
    }
}

fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_num(value: &str) -> Result<f64, String> {
    let parsed: f64 = value.parse().map_err(|e: std::num::ParseFloatError| e.to_string())?;
    if parsed.is_finite() {
        Ok(parsed)
    } else {
        Err(format!("`{value}` is not finite"))
    }
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(format!("`{other}` is not a boolean")),
    }
}
