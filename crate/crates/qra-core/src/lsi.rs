//! Latent semantic indexing over a feedback corpus.
//!
//! A corpus becomes a term–document matrix of raw term frequencies; its
//! truncated SVD defines a rank-k concept space. New feedback is *folded in*
//! (`fold(q) = qᵀ·U_k·S_k⁻¹`) and compared to the stored documents by cosine
//! similarity in that space, which lets texts match on meaning-bearing
//! co-occurrence rather than exact word overlap.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lowercases, splits on non-alphanumeric runs, and drops configured stop
/// words. Duplicates are kept — the index wants raw term frequencies.
///
/// The default keeps *every* token: on short review-sized texts each word
/// carries signal, and the reference corpus below only reproduces its expected
/// coordinates without stop-word removal. A conventional function-word list is
/// available as [`Tokenizer::function_words`] and the set is a configuration
/// override for callers who index longer prose.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenizer {
    stop_words: BTreeSet<String>,
}

impl Tokenizer {
    /// Tokenizer with an empty stop list.
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_stop_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Tokenizer {
            stop_words: words.into_iter().map(|w| w.into().to_lowercase()).collect(),
        }
    }

    /// Preset English function-word list: a, an, and, is, it, so, the, than,
    /// more, very, also.
    pub fn function_words() -> Self {
        Self::with_stop_words(["a", "an", "and", "is", "it", "so", "the", "than", "more", "very", "also"])
    }

    pub fn stop_words(&self) -> &BTreeSet<String> {
        &self.stop_words
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        text.to_lowercase()
            .split(|c: char| !c.is_alphanumeric())
            .filter(|tok| !tok.is_empty() && !self.stop_words.contains(*tok))
            .map(str::to_owned)
            .collect()
    }
}

/// Raw term-frequency matrix: rows are vocabulary terms (sorted), columns are
/// documents in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct TermDocMatrix {
    pub vocabulary: Vec<String>,
    pub doc_ids: Vec<String>,
    /// |vocabulary| × |doc_ids|, non-negative integers stored as f64.
    pub counts: DMatrix<f64>,
}

impl TermDocMatrix {
    pub fn build(docs: &[(String, Vec<String>)]) -> Result<Self, LsiError> {
        let vocabulary: Vec<String> = docs
            .iter()
            .flat_map(|(_, terms)| terms.iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if docs.is_empty() || vocabulary.is_empty() {
            return Err(LsiError::EmptyCorpus);
        }
        let mut counts = DMatrix::zeros(vocabulary.len(), docs.len());
        for (j, (_, terms)) in docs.iter().enumerate() {
            for term in terms {
                let i = vocabulary.binary_search(term).expect("vocabulary is the union of doc terms");
                counts[(i, j)] += 1.0;
            }
        }
        Ok(TermDocMatrix {
            vocabulary,
            doc_ids: docs.iter().map(|(id, _)| id.clone()).collect(),
            counts,
        })
    }

    /// Term-frequency vector of `terms` over this vocabulary; terms outside
    /// the vocabulary are dropped.
    pub fn term_vector(&self, terms: &[String]) -> DVector<f64> {
        let mut v = DVector::zeros(self.vocabulary.len());
        for term in terms {
            if let Ok(i) = self.vocabulary.binary_search(term) {
                v[i] += 1.0;
            }
        }
        v
    }
}

/// Thin SVD factors, singular values descending, rank-trimmed.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// ‖A − U·diag(S)·Vᵀ‖_F / ‖A‖_F, for verification.
    pub fn reconstruction_error(&self, a: &DMatrix<f64>) -> f64 {
        let approx = &self.u * DMatrix::from_diagonal(&self.s) * self.v.transpose();
        let norm = a.norm();
        if norm == 0.0 {
            return (a - approx).norm();
        }
        (a - approx).norm() / norm
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LsiError {
    #[error("cannot index an empty corpus")]
    EmptyCorpus,
    #[error("requested rank {k} exceeds the matrix rank {rank}")]
    KExceedsRank { k: usize, rank: usize },
    #[error("singular value decomposition did not converge")]
    NumericalFailure,
}

/// Thin SVD with defensive post-processing: columns re-sorted so singular
/// values are descending, then trimmed at the numerical-rank tolerance
/// `max(m,n) · ε · s_max`.
pub fn svd(a: &DMatrix<f64>) -> Result<SvdFactors, LsiError> {
    let decomp = nalgebra::linalg::SVD::try_new(a.clone(), true, true, f64::EPSILON, 0)
        .ok_or(LsiError::NumericalFailure)?;
    let u = decomp.u.ok_or(LsiError::NumericalFailure)?;
    let v_t = decomp.v_t.ok_or(LsiError::NumericalFailure)?;
    let s = decomp.singular_values;

    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].partial_cmp(&s[i]).expect("singular values are finite"));

    let tol = a.nrows().max(a.ncols()) as f64 * f64::EPSILON * s[order[0]];
    let rank = order.iter().take_while(|&&i| s[i] > tol).count();

    let mut u_sorted = DMatrix::zeros(u.nrows(), rank);
    let mut v_sorted = DMatrix::zeros(v_t.ncols(), rank);
    let mut s_sorted = DVector::zeros(rank);
    for (col, &i) in order.iter().take(rank).enumerate() {
        u_sorted.set_column(col, &u.column(i));
        v_sorted.set_column(col, &v_t.transpose().column(i));
        s_sorted[col] = s[i];
    }
    Ok(SvdFactors { u: u_sorted, s: s_sorted, v: v_sorted })
}

/// A built index: the matrix, its factors, and every document's coordinates in
/// the rank-k space.
#[derive(Debug, Clone, PartialEq)]
pub struct LsiIndex {
    pub matrix: TermDocMatrix,
    pub factors: SvdFactors,
    pub k: usize,
    /// Per-document k-vector; row i equals row i of V_k (computed by folding
    /// the document's own column, so a query with identical text folds to
    /// bitwise-identical coordinates).
    pub doc_coords: Vec<Vec<f64>>,
    tokenizer: Tokenizer,
}

/// Folded coordinates of one query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryCoords {
    pub coords: Vec<f64>,
    /// True iff the query shared no vocabulary with the corpus.
    pub is_zero: bool,
}

/// Ranked query–document similarities.
#[derive(Debug, Clone, PartialEq)]
pub struct Similarities {
    /// (doc_id, cosine), best first; ties keep corpus order.
    pub ranked: Vec<(String, f64)>,
    /// Set when the query had no vocabulary overlap; all similarities are 0.
    pub no_overlap: bool,
}

/// Build a rank-k index over `(doc_id, text)` pairs. Strict about rank:
/// asking for more dimensions than the matrix has is an error.
pub fn build_index(
    docs: &[(String, String)],
    k: usize,
    tokenizer: &Tokenizer,
) -> Result<LsiIndex, LsiError> {
    let tokenized: Vec<(String, Vec<String>)> = docs
        .iter()
        .map(|(id, text)| (id.clone(), tokenizer.tokenize(text)))
        .collect();
    let matrix = TermDocMatrix::build(&tokenized)?;
    let factors = svd(&matrix.counts)?;
    if k == 0 || k > factors.rank() {
        return Err(LsiError::KExceedsRank { k, rank: factors.rank() });
    }
    let doc_coords = (0..matrix.counts.ncols())
        .map(|j| fold(&factors, k, &matrix.counts.column(j).into_owned()))
        .collect();
    Ok(LsiIndex {
        matrix,
        factors,
        k,
        doc_coords,
        tokenizer: tokenizer.clone(),
    })
}

/// Like [`build_index`] but clamps `k` to the available rank instead of
/// erroring — the repository layer wants "up to k dimensions".
pub fn build_index_clamped(
    docs: &[(String, String)],
    k: usize,
    tokenizer: &Tokenizer,
) -> Result<LsiIndex, LsiError> {
    let tokenized: Vec<(String, Vec<String>)> = docs
        .iter()
        .map(|(id, text)| (id.clone(), tokenizer.tokenize(text)))
        .collect();
    let matrix = TermDocMatrix::build(&tokenized)?;
    let factors = svd(&matrix.counts)?;
    let k_eff = k.clamp(1, factors.rank());
    let doc_coords = (0..matrix.counts.ncols())
        .map(|j| fold(&factors, k_eff, &matrix.counts.column(j).into_owned()))
        .collect();
    Ok(LsiIndex {
        matrix,
        factors,
        k: k_eff,
        doc_coords,
        tokenizer: tokenizer.clone(),
    })
}

/// Fold a raw term vector into the rank-k space: `xᵀ·U_k·S_k⁻¹`.
fn fold(factors: &SvdFactors, k: usize, x: &DVector<f64>) -> Vec<f64> {
    (0..k)
        .map(|dim| x.dot(&factors.u.column(dim).into_owned()) / factors.s[dim])
        .collect()
}

impl LsiIndex {
    /// Fold query text into the concept space. Unknown terms are dropped; a
    /// query with no overlap at all is flagged rather than erroring.
    pub fn project_query(&self, text: &str) -> QueryCoords {
        let terms = self.tokenizer.tokenize(text);
        let q = self.matrix.term_vector(&terms);
        let is_zero = q.iter().all(|&c| c == 0.0);
        QueryCoords { coords: fold(&self.factors, self.k, &q), is_zero }
    }

    /// Cosine similarity between the query and every document, best first.
    pub fn similarities(&self, query: &QueryCoords) -> Similarities {
        if query.is_zero {
            let ranked = self.matrix.doc_ids.iter().map(|id| (id.clone(), 0.0)).collect();
            return Similarities { ranked, no_overlap: true };
        }
        let mut ranked: Vec<(String, f64)> = self
            .matrix
            .doc_ids
            .iter()
            .zip(&self.doc_coords)
            .map(|(id, coords)| (id.clone(), cosine(&query.coords, coords)))
            .collect();
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("cosines are finite"));
        Similarities { ranked, no_overlap: false }
    }

    pub fn doc_count(&self) -> usize {
        self.matrix.doc_ids.len()
    }
}

/// Plain cosine; zero-norm inputs get 0 rather than NaN. Clamped to [−1, 1]
/// so rounding in the norms can never leak an out-of-range similarity.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}
