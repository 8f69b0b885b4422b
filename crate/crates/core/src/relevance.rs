//! Question/policy relevance gate based on embedding cosine similarity.

use serde::{Deserialize, Serialize};

use crate::backends::{BackendError, Embedder};

pub const DEFAULT_THRESHOLD: f64 = 0.25;

#[derive(Debug, thiserror::Error)]
pub enum RelevanceError {
    #[error("vector dimensions differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("{0} text is empty")]
    EmptyText(&'static str),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, RelevanceError> {
    if u.len() != v.len() {
        return Err(RelevanceError::DimensionMismatch(u.len(), v.len()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|b| b * b).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(RelevanceError::ZeroVector);
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelevanceVerdict {
    pub similarity: f64,
    pub threshold: f64,
    pub relevant: bool,
}

impl RelevanceVerdict {
    /// A similarity equal to the threshold counts as relevant.
    pub fn new(similarity: f64, threshold: f64) -> Self {
        RelevanceVerdict {
            similarity,
            threshold,
            relevant: similarity >= threshold,
        }
    }
}

pub fn check_relevance(
    embedder: &dyn Embedder,
    policy: &str,
    question: &str,
    threshold: f64,
) -> Result<RelevanceVerdict, RelevanceError> {
    if policy.trim().is_empty() {
        return Err(RelevanceError::EmptyText("policy"));
    }
    if question.trim().is_empty() {
        return Err(RelevanceError::EmptyText("question"));
    }
    let p = embedder.embed(policy)?;
    let q = embedder.embed(question)?;
    Ok(RelevanceVerdict::new(cosine(&p, &q)?, threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::HashedEmbedder;

    #[test]
    fn cosine_basics() {
        assert!((cosine(&[3.0, 4.0], &[3.0, 4.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), -1.0);
        assert!(matches!(cosine(&[1.0], &[1.0, 0.0]), Err(RelevanceError::DimensionMismatch(1, 2))));
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(RelevanceError::ZeroVector)));
    }

    struct Fixed;

    impl Embedder for Fixed {
        fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
            // 16 ones against a unit axis gives exactly 1/4.
            Ok(if text == "policy" {
                vec![1.0; 16]
            } else {
                let mut v = vec![0.0; 16];
                v[0] = 1.0;
                v
            })
        }
    }

    #[test]
    fn boundary_similarity_is_relevant() {
        let verdict = check_relevance(&Fixed, "policy", "question", DEFAULT_THRESHOLD).unwrap();
        assert_eq!(verdict.similarity, 0.25);
        assert!(verdict.relevant);
        let stricter = check_relevance(&Fixed, "policy", "question", 0.2500001).unwrap();
        assert!(!stricter.relevant);
    }

    #[test]
    fn hashed_embedding_gate() {
        let e = HashedEmbedder::default();
        let same = check_relevance(&e, "Can I get a loan?", "Can I get a loan?", 0.25).unwrap();
        assert!((same.similarity - 1.0).abs() < 1e-12 && same.relevant);
        let disjoint =
            check_relevance(&e, "Loans cover flood damage.", "What time is lunch?", 0.25).unwrap();
        assert_eq!(disjoint.similarity, 0.0);
        assert!(!disjoint.relevant);
        assert!(matches!(
            check_relevance(&e, "", "q", 0.25),
            Err(RelevanceError::EmptyText("policy"))
        ));
    }
}
