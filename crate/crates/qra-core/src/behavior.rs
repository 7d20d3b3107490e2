//! Cross-user behavior analysis: the last line of defense for alarmed users
//! whose feedback failed (or skipped) the similarity check.
//!
//! The analyzer looks at a suspect from two angles. *Horizontally*, it finds
//! peers who rated the same products almost identically — a tight cluster of
//! near-duplicate rating vectors is how collusion looks from the outside, but
//! the same signature with all-clean peers means the suspect simply agrees
//! with honest users. *Vertically*, it measures how far the suspect's own
//! ratings on other products sit from consensus; a user who tracks consensus
//! everywhere else earns the benefit of the doubt on one outlier.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::lsi::cosine;
use crate::model::UserStatus;

/// Every accepted rating, keyed by user then product, plus running consensus
/// (mean accepted rating) per product.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RatingHistory {
    by_user: BTreeMap<String, BTreeMap<String, f64>>,
    sums: BTreeMap<String, (f64, u64)>,
}

impl RatingHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record an accepted rating. A repeat rating by the same user for the
    /// same product replaces the stored value and adjusts consensus.
    pub fn record(&mut self, user_id: &str, product_id: &str, rating: f64) {
        let slot = self
            .by_user
            .entry(user_id.to_string())
            .or_default()
            .entry(product_id.to_string());
        let entry = self.sums.entry(product_id.to_string()).or_insert((0.0, 0));
        match slot {
            std::collections::btree_map::Entry::Occupied(mut o) => {
                entry.0 += rating - *o.get();
                o.insert(rating);
            }
            std::collections::btree_map::Entry::Vacant(v) => {
                entry.0 += rating;
                entry.1 += 1;
                v.insert(rating);
            }
        }
    }

    pub fn user_ratings(&self, user_id: &str) -> Option<&BTreeMap<String, f64>> {
        self.by_user.get(user_id)
    }

    pub fn users(&self) -> impl Iterator<Item = &String> {
        self.by_user.keys()
    }

    /// Mean accepted rating for a product; `None` before any rating lands.
    pub fn consensus(&self, product_id: &str) -> Option<f64> {
        self.sums.get(product_id).map(|(sum, n)| sum / *n as f64)
    }

    /// Ratings of `a` and `b` over the products both have rated, in a fixed
    /// product order. Empty vectors when they share nothing.
    pub fn rating_vectors(&self, a: &str, b: &str) -> (Vec<f64>, Vec<f64>) {
        let (Some(ra), Some(rb)) = (self.by_user.get(a), self.by_user.get(b)) else {
            return (Vec::new(), Vec::new());
        };
        let mut va = Vec::new();
        let mut vb = Vec::new();
        for (product, rating) in ra {
            if let Some(other) = rb.get(product) {
                va.push(*rating);
                vb.push(*other);
            }
        }
        (va, vb)
    }

    /// Cosine similarity over common products; `None` when fewer than
    /// `min_common` products are shared (the comparison is then undefined,
    /// which callers must not conflate with "dissimilar").
    pub fn user_similarity(&self, a: &str, b: &str, min_common: usize) -> Option<f64> {
        let (va, vb) = self.rating_vectors(a, b);
        if va.len() < min_common.max(1) {
            return None;
        }
        Some(cosine(&va, &vb))
    }

    /// Mean absolute deviation of `user_id`'s ratings from per-product
    /// consensus, excluding `exclude_product` (the one under dispute).
    /// Returns 0 when the user has no other rated products — no evidence of
    /// deviant behavior is not evidence of deviant behavior.
    pub fn cross_product_deviation(&self, user_id: &str, exclude_product: &str) -> f64 {
        let Some(ratings) = self.by_user.get(user_id) else {
            return 0.0;
        };
        let mut total = 0.0;
        let mut n = 0u64;
        for (product, rating) in ratings {
            if product == exclude_product {
                continue;
            }
            if let Some(consensus) = self.consensus(product) {
                total += (rating - consensus).abs();
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            total / n as f64
        }
    }
}

/// Connected components of the "suspiciously similar" graph: an edge joins
/// two users sharing at least `min_common` products with rating-vector
/// cosine `>= threshold`. Singletons are included; groups and members are
/// sorted for determinism.
pub fn collusion_groups(
    history: &RatingHistory,
    min_common: usize,
    threshold: f64,
) -> Vec<Vec<String>> {
    let users: Vec<&String> = history.users().collect();
    let mut visited: BTreeSet<&str> = BTreeSet::new();
    let mut groups = Vec::new();
    for &start in &users {
        if visited.contains(start.as_str()) {
            continue;
        }
        let mut group = Vec::new();
        let mut queue = VecDeque::from([start]);
        visited.insert(start);
        while let Some(user) = queue.pop_front() {
            group.push(user.clone());
            for &other in &users {
                if visited.contains(other.as_str()) {
                    continue;
                }
                let linked = history
                    .user_similarity(user, other, min_common)
                    .is_some_and(|sim| sim >= threshold);
                if linked {
                    visited.insert(other);
                    queue.push_back(other);
                }
            }
        }
        group.sort();
        groups.push(group);
    }
    groups.sort();
    groups
}

/// Knobs for [`adjudicate_suspect`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorSettings {
    /// Minimum shared products before a peer similarity is meaningful.
    pub min_common: usize,
    /// Rating-vector cosine at or above which two users move in lockstep.
    pub collusion_threshold: f64,
    /// Cross-product deviation above which a suspect's own record condemns it.
    pub dev_cap: f64,
    /// What to do with a suspect nothing is known about: `true` rescues,
    /// `false` condemns.
    pub rescue_evidence_free: bool,
}

impl Default for BehaviorSettings {
    fn default() -> Self {
        BehaviorSettings {
            min_common: 2,
            collusion_threshold: 0.95,
            dev_cap: 1.0,
            rescue_evidence_free: false,
        }
    }
}

/// Outcome of a behavioral adjudication, with the evidence that decided it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorVerdict {
    pub user_id: String,
    pub cross_product_deviation: f64,
    /// Highest defined lockstep similarity to any other user, if any.
    pub max_peer_similarity: Option<f64>,
    /// The peer realizing `max_peer_similarity`.
    pub peer: Option<String>,
    pub rescued: bool,
}

/// Decide whether an alarmed user with unconvincing (or absent) feedback is
/// nonetheless behaving like an honest user.
///
/// The rules, in order:
/// 1. A suspect whose own ratings elsewhere stray from consensus by more
///    than `dev_cap` on average is condemned outright.
/// 2. Otherwise, if the suspect moves in lockstep with peers (cosine at or
///    above `collusion_threshold` over at least `min_common` shared
///    products), the company it keeps decides: all-clean peers rescue it,
///    any flagged peer condemns it.
/// 3. Otherwise, with no lockstep peers, a consensus-tracking record on
///    other products rescues it.
/// 4. With no evidence at all, `rescue_evidence_free` decides.
pub fn adjudicate_suspect(
    history: &RatingHistory,
    statuses: &BTreeMap<String, UserStatus>,
    user_id: &str,
    product_id: &str,
    settings: &BehaviorSettings,
) -> BehaviorVerdict {
    let deviation = history.cross_product_deviation(user_id, product_id);

    let mut max_peer: Option<(String, f64)> = None;
    let mut lockstep_peers: Vec<&str> = Vec::new();
    for other in history.users() {
        if other == user_id {
            continue;
        }
        if let Some(sim) = history.user_similarity(user_id, other, settings.min_common) {
            if max_peer.as_ref().is_none_or(|(_, best)| sim > *best) {
                max_peer = Some((other.clone(), sim));
            }
            if sim >= settings.collusion_threshold {
                lockstep_peers.push(other);
            }
        }
    }

    let has_other_evidence = history
        .user_ratings(user_id)
        .map(|ratings| ratings.keys().any(|p| p != product_id))
        .unwrap_or(false);

    let rescued = if deviation > settings.dev_cap {
        false
    } else if !lockstep_peers.is_empty() {
        lockstep_peers
            .iter()
            .all(|peer| statuses.get(*peer).copied().unwrap_or(UserStatus::TrueUser) == UserStatus::TrueUser)
    } else if has_other_evidence {
        true
    } else {
        settings.rescue_evidence_free
    };

    BehaviorVerdict {
        user_id: user_id.to_string(),
        cross_product_deviation: deviation,
        max_peer_similarity: max_peer.as_ref().map(|(_, sim)| *sim),
        peer: max_peer.map(|(peer, _)| peer),
        rescued,
    }
}
