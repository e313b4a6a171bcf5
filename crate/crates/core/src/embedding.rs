//! Static word embeddings and exact cosine-neighbor queries.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbeddingError {
    #[error("embedding dimension must be at least 1")]
    ZeroDimension,
    #[error("line {line}: expected {expected} components, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: duplicate token {token:?} (first seen on line {first_line})")]
    DuplicateToken {
        token: String,
        first_line: usize,
        line: usize,
    },
    #[error("line {line}: empty token")]
    EmptyToken { line: usize },
    #[error("line {line}: non-finite component")]
    NonFinite { line: usize },
    #[error("vectors have different dimensions ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("empty token list")]
    EmptyTokenList,
    #[error("empty entry")]
    EmptyEntry,
    #[error("{entry:?} cannot be resolved: {word:?} is not in the vocabulary")]
    Unresolvable { entry: String, word: String },
}

/// Cosine similarity between two vectors.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Similarity(pub f64);

impl Similarity {
    pub fn value(self) -> f64 {
        self.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// `dot(a, b) / (|a| |b|)`.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<Similarity, EmbeddingError> {
    if a.len() != b.len() {
        return Err(EmbeddingError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(EmbeddingError::ZeroNorm);
    }
    Ok(Similarity(dot(a, b) / (na * nb)))
}

/// How [`EmbeddingTable::phrase_vector`] resolved an entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhraseStrategy {
    /// Single token found as-is.
    Direct,
    /// Multi-word entry found in underscore-joined form (`fit_in`).
    Joined,
    /// Mean of the constituent word vectors.
    Mean,
}

/// Incremental constructor used by file loaders; keeps line numbers for errors.
#[derive(Debug, Default)]
pub struct TableBuilder {
    dim: Option<usize>,
    vocab: Vec<String>,
    lines: Vec<usize>,
    index: BTreeMap<String, usize>,
    vectors: Vec<f64>,
    ranks: Vec<u32>,
}

impl TableBuilder {
    pub fn new(dim: Option<usize>) -> Result<Self, EmbeddingError> {
        if dim == Some(0) {
            return Err(EmbeddingError::ZeroDimension);
        }
        Ok(Self {
            dim,
            ..Self::default()
        })
    }

    pub fn with_capacity(dim: Option<usize>, rows: usize) -> Result<Self, EmbeddingError> {
        let mut b = Self::new(dim)?;
        b.vocab.reserve(rows);
        b.lines.reserve(rows);
        b.ranks.reserve(rows);
        if let Some(d) = dim {
            b.vectors.reserve(rows * d);
        }
        Ok(b)
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    /// Appends one word. `line` is only used for error messages.
    pub fn push(&mut self, token: &str, values: &[f64], line: usize) -> Result<(), EmbeddingError> {
        if token.is_empty() {
            return Err(EmbeddingError::EmptyToken { line });
        }
        let dim = match self.dim {
            Some(d) => d,
            None if values.is_empty() => return Err(EmbeddingError::ZeroDimension),
            None => {
                self.dim = Some(values.len());
                values.len()
            }
        };
        if values.len() != dim {
            return Err(EmbeddingError::DimensionMismatch {
                line,
                expected: dim,
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite { line });
        }
        if let Some(&prev) = self.index.get(token) {
            return Err(EmbeddingError::DuplicateToken {
                token: token.to_string(),
                first_line: self.lines[prev],
                line,
            });
        }
        let idx = self.vocab.len();
        self.index.insert(token.to_string(), idx);
        self.vocab.push(token.to_string());
        self.lines.push(line);
        self.ranks.push(idx as u32 + 1);
        self.vectors.extend_from_slice(values);
        Ok(())
    }

    pub fn finish(self) -> Result<EmbeddingTable, EmbeddingError> {
        let dim = self.dim.ok_or(EmbeddingError::ZeroDimension)?;
        let norms = self.vectors.chunks_exact(dim).map(norm).collect();
        Ok(EmbeddingTable {
            vocab: self.vocab,
            index: self.index,
            dim,
            vectors: self.vectors,
            norms,
            frequency_rank: self.ranks,
        })
    }
}

/// Fixed vocabulary of dense vectors with precomputed norms.
///
/// Immutable once built, so it can be shared read-only across query workers.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    vocab: Vec<String>,
    index: BTreeMap<String, usize>,
    dim: usize,
    vectors: Vec<f64>,
    norms: Vec<f64>,
    frequency_rank: Vec<u32>,
}

impl EmbeddingTable {
    /// Builds a table from `(token, vector)` rows; row `i` is reported as line `i + 1`.
    pub fn from_rows<S, I>(rows: I) -> Result<Self, EmbeddingError>
    where
        S: AsRef<str>,
        I: IntoIterator<Item = (S, Vec<f64>)>,
    {
        let mut b = TableBuilder::new(None)?;
        for (i, (tok, v)) in rows.into_iter().enumerate() {
            b.push(tok.as_ref(), &v, i + 1)?;
        }
        b.finish()
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tokens(&self) -> &[String] {
        &self.vocab
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.index_of(token).map(|i| self.row(i))
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn norm_at(&self, i: usize) -> f64 {
        self.norms[i]
    }

    /// 1 = most frequent; file order unless overridden.
    pub fn frequency_rank(&self, token: &str) -> Option<u32> {
        self.index_of(token).map(|i| self.frequency_rank[i])
    }

    /// Replaces the line-order ranks with explicit ones (one per token, in vocabulary order).
    pub fn set_frequency_ranks(&mut self, ranks: Vec<u32>) -> Result<(), EmbeddingError> {
        if ranks.len() != self.vocab.len() {
            return Err(EmbeddingError::LengthMismatch {
                left: ranks.len(),
                right: self.vocab.len(),
            });
        }
        self.frequency_rank = ranks;
        Ok(())
    }

    /// Every token not in `exclude` whose cosine to `query` is at least
    /// `threshold`, sorted by descending similarity then ascending token.
    ///
    /// Exact full scan. Zero-norm vocabulary vectors never match.
    pub fn neighbors_at_least(
        &self,
        query: &[f64],
        threshold: f64,
        exclude: &BTreeSet<String>,
    ) -> Result<Vec<(String, Similarity)>, EmbeddingError> {
        if query.len() != self.dim {
            return Err(EmbeddingError::LengthMismatch {
                left: query.len(),
                right: self.dim,
            });
        }
        let qn = norm(query);
        if qn == 0.0 {
            return Err(EmbeddingError::ZeroNorm);
        }
        let mut hits: Vec<(usize, f64)> = Vec::new();
        for (i, row) in self.vectors.chunks_exact(self.dim).enumerate() {
            let n = self.norms[i];
            if n == 0.0 {
                continue;
            }
            let sim = dot(query, row) / (qn * n);
            if sim >= threshold && !exclude.contains(&self.vocab[i]) {
                hits.push((i, sim));
            }
        }
        hits.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(Ordering::Equal)
                .then_with(|| self.vocab[a.0].cmp(&self.vocab[b.0]))
        });
        Ok(hits
            .into_iter()
            .map(|(i, s)| (self.vocab[i].clone(), Similarity(s)))
            .collect())
    }

    /// Vector for a word or a multi-word phrase.
    ///
    /// Phrases resolve to their underscore-joined token when present, otherwise
    /// to the mean of their constituent word vectors.
    pub fn phrase_vector(&self, entry: &str) -> Result<(Vec<f64>, PhraseStrategy), EmbeddingError> {
        let entry = entry.trim();
        if entry.is_empty() {
            return Err(EmbeddingError::EmptyEntry);
        }
        let words: Vec<&str> = entry.split_whitespace().collect();
        if words.len() == 1 {
            return self
                .vector(entry)
                .map(|v| (v.to_vec(), PhraseStrategy::Direct))
                .ok_or_else(|| EmbeddingError::Unresolvable {
                    entry: entry.to_string(),
                    word: entry.to_string(),
                });
        }
        let joined = words.join("_");
        if let Some(v) = self.vector(&joined) {
            return Ok((v.to_vec(), PhraseStrategy::Joined));
        }
        let mut acc = alloc::vec![0.0; self.dim];
        for w in &words {
            let v = self.vector(w).ok_or_else(|| EmbeddingError::Unresolvable {
                entry: entry.to_string(),
                word: (*w).to_string(),
            })?;
            for (a, x) in acc.iter_mut().zip(v) {
                *a += x;
            }
        }
        let k = words.len() as f64;
        acc.iter_mut().for_each(|a| *a /= k);
        Ok((acc, PhraseStrategy::Mean))
    }

    /// Component-wise mean of the resolved vectors of `tokens`.
    pub fn centroid<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<f64>, EmbeddingError> {
        if tokens.is_empty() {
            return Err(EmbeddingError::EmptyTokenList);
        }
        let mut acc = alloc::vec![0.0; self.dim];
        for t in tokens {
            let (v, _) = self.phrase_vector(t.as_ref())?;
            for (a, x) in acc.iter_mut().zip(&v) {
                *a += x;
            }
        }
        let k = tokens.len() as f64;
        acc.iter_mut().for_each(|a| *a /= k);
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_abs_diff_eq;

    fn toy() -> EmbeddingTable {
        EmbeddingTable::from_rows(vec![
            ("w1", vec![1.0, 0.0]),
            ("w2", vec![0.9, 0.1]),
            ("w3", vec![0.0, 1.0]),
        ])
        .unwrap()
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&[1.0, 0.0], &[1.0, 0.0]).unwrap().value(), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap().value(), 0.0);
        assert_abs_diff_eq!(
            cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap().value(),
            core::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-12
        );
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(EmbeddingError::ZeroNorm));
        assert!(matches!(
            cosine(&[1.0], &[1.0, 0.0]),
            Err(EmbeddingError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn neighbors_toy() {
        let t = toy();
        let got = t.neighbors_at_least(&[1.0, 0.0], 0.9, &set(&["w1"])).unwrap();
        // brute force: 0.9 / sqrt(0.82)
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].0, "w2");
        assert_abs_diff_eq!(got[0].1.value(), 0.9 / libm::sqrt(0.82), epsilon = 1e-12);

        let got = t.neighbors_at_least(&[0.0, 1.0], 0.999, &set(&["w3"])).unwrap();
        assert!(got.is_empty());

        let got = t.neighbors_at_least(&[1.0, 0.0], 0.5, &BTreeSet::new()).unwrap();
        assert_eq!(got[0].0, "w1");
        assert_eq!(got[0].1.value(), 1.0);
        assert!(t.neighbors_at_least(&[0.0, 0.0], 0.5, &BTreeSet::new()).is_err());
    }

    #[test]
    fn ties_break_lexicographically() {
        let t = EmbeddingTable::from_rows(vec![
            ("b", vec![1.0, 1.0]),
            ("a", vec![2.0, 2.0]),
            ("c", vec![1.0, 0.0]),
        ])
        .unwrap();
        let got = t.neighbors_at_least(&[1.0, 1.0], 0.1, &BTreeSet::new()).unwrap();
        let order: Vec<&str> = got.iter().map(|(w, _)| w.as_str()).collect();
        assert_eq!(order, ["a", "b", "c"]);
    }

    #[test]
    fn builder_errors_carry_lines() {
        let mut b = TableBuilder::new(Some(3)).unwrap();
        b.push("a", &[1.0, 2.0, 3.0], 2).unwrap();
        assert_eq!(
            b.push("b", &[1.0, 2.0], 3),
            Err(EmbeddingError::DimensionMismatch {
                line: 3,
                expected: 3,
                found: 2
            })
        );
        assert_eq!(
            b.push("a", &[0.0, 0.0, 1.0], 9),
            Err(EmbeddingError::DuplicateToken {
                token: "a".into(),
                first_line: 2,
                line: 9
            })
        );
        assert!(matches!(b.push("c", &[f64::NAN, 0.0, 0.0], 4), Err(EmbeddingError::NonFinite { line: 4 })));
        assert!(TableBuilder::new(Some(0)).is_err());
    }

    #[test]
    fn norms_and_ranks() {
        let t = toy();
        for i in 0..t.len() {
            let v = t.row(i);
            let n = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
            assert_abs_diff_eq!(t.norm_at(i), n, epsilon = 1e-9);
        }
        assert_eq!(t.frequency_rank("w1"), Some(1));
        assert_eq!(t.frequency_rank("w3"), Some(3));
    }

    #[test]
    fn phrase_rules() {
        let mut rows = vec![("fit", vec![1.0, 0.0]), ("in", vec![0.0, 1.0]), ("honor", vec![0.3, 0.4])];
        let t = EmbeddingTable::from_rows(rows.clone()).unwrap();
        assert_eq!(t.phrase_vector("honor").unwrap(), (vec![0.3, 0.4], PhraseStrategy::Direct));
        assert_eq!(t.phrase_vector("fit in").unwrap(), (vec![0.5, 0.5], PhraseStrategy::Mean));
        assert_eq!(
            t.phrase_vector("fit out"),
            Err(EmbeddingError::Unresolvable {
                entry: "fit out".into(),
                word: "out".into()
            })
        );
        assert_eq!(t.phrase_vector("   "), Err(EmbeddingError::EmptyEntry));

        rows.push(("fit_in", vec![0.2, 0.9]));
        let t = EmbeddingTable::from_rows(rows).unwrap();
        assert_eq!(t.phrase_vector("fit in").unwrap(), (vec![0.2, 0.9], PhraseStrategy::Joined));
    }

    #[test]
    fn centroid_rules() {
        let t = toy();
        assert_eq!(t.centroid(&["w1", "w3"]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(t.centroid(&["w2"]).unwrap(), vec![0.9, 0.1]);
        let c = t.centroid(&["w2", "w2", "w2"]).unwrap();
        assert!((c[0] - 0.9).abs() < 1e-15 && (c[1] - 0.1).abs() < 1e-15);
        assert_eq!(t.centroid::<&str>(&[]), Err(EmbeddingError::EmptyTokenList));
    }
}
