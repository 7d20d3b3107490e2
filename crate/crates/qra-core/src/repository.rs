//! Per-product quality repositories: direction-tagged feedback corpora that
//! adjudicate alarmed users by latent semantic similarity.
//!
//! Each product keeps two repositories — *upgrading* (what genuine praise
//! sounds like) and *downgrading* (genuine defect reports) — seeded from
//! manufacturer text and grown from trusted user feedback. An alarmed user's
//! feedback is consulted against the repository matching the alarm direction
//! and mapped to a trust level; stale user feedback ages out under an
//! exponential forgetting scheme so the repository keeps describing the
//! product as currently shipped.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lsi::{build_index_clamped, LsiError, LsiIndex, Tokenizer};
use crate::model::AlarmDirection;

/// Which score-distortion direction a repository guards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Upgrading,
    Downgrading,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Upgrading => "upgrading",
            Direction::Downgrading => "downgrading",
        }
    }

    /// The repository an alarm consults; `None` alarms consult nothing.
    pub fn from_alarm(alarm: AlarmDirection) -> Option<Self> {
        match alarm {
            AlarmDirection::Upgrading => Some(Direction::Upgrading),
            AlarmDirection::Downgrading => Some(Direction::Downgrading),
            AlarmDirection::None => None,
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "upgrading" | "up" => Ok(Direction::Upgrading),
            "downgrading" | "down" => Ok(Direction::Downgrading),
            other => Err(format!("unknown direction `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DocOrigin {
    Manufacturer,
    TrueUser,
}

/// One stored feedback document with its decay weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepositoryDoc {
    pub doc_id: String,
    pub text: String,
    pub timestamp: i64,
    /// 0.5^(age/half_life); gates membership, never similarity.
    pub weight: f64,
    pub origin: DocOrigin,
}

/// Tunables shared by every repository of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepositorySettings {
    /// Similarity at or above which feedback is fully trusted (level 1).
    pub sim_high: f64,
    /// Similarity below which feedback is rejected (level 3).
    pub sim_low: f64,
    /// Requested concept-space rank (clamped to the corpus rank).
    pub k: usize,
    pub half_life_secs: f64,
    /// Docs whose weight decays below this are dropped.
    pub epsilon_weight: f64,
    /// Keep manufacturer seeds forever.
    pub pin_manufacturer: bool,
    pub tokenizer: Tokenizer,
}

impl Default for RepositorySettings {
    fn default() -> Self {
        RepositorySettings {
            sim_high: 0.8,
            sim_low: 0.3,
            k: 2,
            half_life_secs: 90.0 * 86_400.0,
            epsilon_weight: 0.01,
            pin_manufacturer: true,
            tokenizer: Tokenizer::new(),
        }
    }
}

/// Trust level from a similarity consultation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityVerdict {
    pub best_doc: String,
    pub best_sim: f64,
    /// 1: >= sim_high; 2: in [sim_low, sim_high); 3: < sim_low.
    pub level: u8,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RepoError {
    #[error("repository needs at least one seed document with at least one term")]
    EmptyCorpus,
    #[error("alarmed user supplied no feedback text")]
    MissingFeedback,
    #[error("repository has no documents left to compare against")]
    EmptyRepository,
    #[error("index construction failed: {0}")]
    Index(#[from] LsiError),
}

/// Direction-tagged weighted feedback corpus for one product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RepositorySnapshot", into = "RepositorySnapshot")]
pub struct QualityRepository {
    product_id: String,
    direction: Direction,
    docs: Vec<RepositoryDoc>,
    settings: RepositorySettings,
    next_seq: u64,
    /// Rebuilt whenever membership changes; `None` only when all docs aged out.
    index: Option<LsiIndex>,
}

/// Serialized form: documents and settings only; the index is deterministic
/// from them and rebuilt on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RepositorySnapshot {
    product_id: String,
    direction: Direction,
    docs: Vec<RepositoryDoc>,
    settings: RepositorySettings,
    next_seq: u64,
}

impl From<QualityRepository> for RepositorySnapshot {
    fn from(repo: QualityRepository) -> Self {
        RepositorySnapshot {
            product_id: repo.product_id,
            direction: repo.direction,
            docs: repo.docs,
            settings: repo.settings,
            next_seq: repo.next_seq,
        }
    }
}

impl TryFrom<RepositorySnapshot> for QualityRepository {
    type Error = LsiError;

    fn try_from(snap: RepositorySnapshot) -> Result<Self, LsiError> {
        let mut repo = QualityRepository {
            product_id: snap.product_id,
            direction: snap.direction,
            docs: snap.docs,
            settings: snap.settings,
            next_seq: snap.next_seq,
            index: None,
        };
        repo.rebuild_index()?;
        Ok(repo)
    }
}

impl QualityRepository {
    /// Seed a repository from manufacturer documents (weight 1, pinned by
    /// default). At least one non-empty document is required.
    pub fn init(
        product_id: impl Into<String>,
        direction: Direction,
        manufacturer_docs: &[(String, i64)],
        settings: RepositorySettings,
    ) -> Result<Self, RepoError> {
        if manufacturer_docs.is_empty() {
            return Err(RepoError::EmptyCorpus);
        }
        let docs = manufacturer_docs
            .iter()
            .enumerate()
            .map(|(i, (text, ts))| RepositoryDoc {
                doc_id: format!("m{}", i + 1),
                text: text.clone(),
                timestamp: *ts,
                weight: 1.0,
                origin: DocOrigin::Manufacturer,
            })
            .collect();
        let mut repo = QualityRepository {
            product_id: product_id.into(),
            direction,
            docs,
            settings,
            next_seq: 1,
            index: None,
        };
        repo.rebuild_index().map_err(|e| match e {
            LsiError::EmptyCorpus => RepoError::EmptyCorpus,
            other => RepoError::Index(other),
        })?;
        Ok(repo)
    }

    fn rebuild_index(&mut self) -> Result<(), LsiError> {
        if self.docs.is_empty() {
            self.index = None;
            return Ok(());
        }
        let corpus: Vec<(String, String)> = self
            .docs
            .iter()
            .map(|d| (d.doc_id.clone(), d.text.clone()))
            .collect();
        self.index = Some(build_index_clamped(&corpus, self.settings.k, &self.settings.tokenizer)?);
        Ok(())
    }

    pub fn product_id(&self) -> &str {
        &self.product_id
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn docs(&self) -> &[RepositoryDoc] {
        &self.docs
    }

    pub fn settings(&self) -> &RepositorySettings {
        &self.settings
    }

    pub fn index(&self) -> Option<&LsiIndex> {
        self.index.as_ref()
    }

    /// Score feedback against the corpus and assign a trust level. Read-only.
    pub fn consult(&self, feedback: Option<&str>) -> Result<SimilarityVerdict, RepoError> {
        let text = feedback.ok_or(RepoError::MissingFeedback)?;
        let index = self.index.as_ref().ok_or(RepoError::EmptyRepository)?;
        let query = index.project_query(text);
        let sims = index.similarities(&query);
        let (best_doc, best_sim) = sims.ranked.first().cloned().expect("repository is non-empty");
        let level = if best_sim >= self.settings.sim_high {
            1
        } else if best_sim >= self.settings.sim_low {
            2
        } else {
            3
        };
        Ok(SimilarityVerdict { best_doc, best_sim, level })
    }

    /// Append fully-trusted user feedback (weight 1) and rebuild the index.
    /// Callers must only admit feedback from level-1 adjudications.
    pub fn admit_feedback(&mut self, text: &str, timestamp: i64) -> Result<(), RepoError> {
        let doc_id = format!("f{}", self.next_seq);
        self.next_seq += 1;
        self.docs.push(RepositoryDoc {
            doc_id,
            text: text.to_string(),
            timestamp,
            weight: 1.0,
            origin: DocOrigin::TrueUser,
        });
        self.rebuild_index().map_err(RepoError::Index)
    }

    /// Recompute decay weights at `now` and drop documents that fell below
    /// the cutoff. Pinned manufacturer docs keep weight 1. Idempotent at a
    /// fixed `now`; membership only ever shrinks as `now` advances.
    pub fn apply_forgetting(&mut self, now: i64) -> Result<(), RepoError> {
        let before = self.docs.len();
        let settings = &self.settings;
        for doc in &mut self.docs {
            if doc.origin == DocOrigin::Manufacturer && settings.pin_manufacturer {
                doc.weight = 1.0;
                continue;
            }
            let age = (now - doc.timestamp).max(0) as f64;
            doc.weight = 0.5_f64.powf(age / settings.half_life_secs);
        }
        let cutoff = settings.epsilon_weight;
        self.docs.retain(|d| d.weight >= cutoff);
        if self.docs.len() != before {
            self.rebuild_index().map_err(RepoError::Index)?;
        }
        Ok(())
    }
}
