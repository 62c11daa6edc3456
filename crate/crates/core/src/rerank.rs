//! Classification re-rankers over retrieved facts.
//!
//! `ind_cls` scores each candidate on `"T || label"`. `jnt_cls` shows the
//! scorer every candidate and marks the one being scored with braces:
//! `"T || F1 || {F2} || F3"`.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::kg::{FactId, KnowledgeGraph, NULL_LABEL};
use crate::predictions::{Prediction, PredictionList, Target};
use crate::retrieval::{display_label, LabelMode};
use crate::text::{Tokenizer, WordTokenizer, LIST_JOINER};

#[derive(Debug, Error)]
pub enum RerankError {
    #[error("cross scorer failed: {0}")]
    Scorer(String),
    #[error("cross scorer returned {score} for {input:?}; scores must lie in [0, 1]")]
    OutOfRange { score: f64, input: String },
}

/// Scores a rendered input in `[0, 1]`. Must be deterministic and safe to
/// share across threads.
pub trait CrossScorer: Send + Sync {
    fn score(&self, rendered: &str) -> Result<f64, RerankError>;
}

impl<S: CrossScorer + ?Sized> CrossScorer for &S {
    fn score(&self, rendered: &str) -> Result<f64, RerankError> {
        (**self).score(rendered)
    }
}

impl<S: CrossScorer + ?Sized> CrossScorer for Box<S> {
    fn score(&self, rendered: &str) -> Result<f64, RerankError> {
        (**self).score(rendered)
    }
}

fn token_set(text: &str) -> HashSet<String> {
    WordTokenizer
        .pieces(text)
        .into_iter()
        .filter(|t| t != ";" && t != "||")
        .collect()
}

/// Jaccard similarity between the sentence tokens and the label tokens.
///
/// The sentence is the first `" || "` segment. The label is the segment in
/// braces if there is one, otherwise everything after the sentence.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalScorer;

impl LexicalScorer {
    pub fn split(rendered: &str) -> (&str, &str) {
        let (sentence, rest) = rendered.split_once(LIST_JOINER).unwrap_or((rendered, ""));
        let label = rest
            .split(LIST_JOINER)
            .find_map(|seg| seg.strip_prefix('{').and_then(|s| s.strip_suffix('}')))
            .unwrap_or(rest);
        (sentence, label)
    }
}

impl CrossScorer for LexicalScorer {
    fn score(&self, rendered: &str) -> Result<f64, RerankError> {
        let (sentence, label) = Self::split(rendered);
        let a = token_set(sentence);
        let b = token_set(label);
        let union = a.union(&b).count();
        if union == 0 {
            return Ok(1.0);
        }
        Ok(a.intersection(&b).count() as f64 / union as f64)
    }
}

/// A retrieved fact with the label shown to the re-ranker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub fact: FactId,
    pub label: String,
}

impl Candidate {
    pub fn null() -> Self {
        Self {
            fact: FactId::null(),
            label: NULL_LABEL.to_string(),
        }
    }
}

/// Labels `facts` for a sentence in `text_language`; see [`display_label`].
/// Unknown ids are skipped.
pub fn candidates_for(
    kg: &KnowledgeGraph,
    facts: &[FactId],
    mode: LabelMode,
    text_language: &str,
) -> Vec<Candidate> {
    facts
        .iter()
        .filter_map(|id| {
            Some(Candidate {
                fact: id.clone(),
                label: display_label(kg, id, mode, text_language)?,
            })
        })
        .collect()
}

/// Appends the NULL candidate unless it is already present.
pub fn with_null(mut candidates: Vec<Candidate>) -> Vec<Candidate> {
    if !candidates.iter().any(|c| c.fact.is_null()) {
        candidates.push(Candidate::null());
    }
    candidates
}

pub fn render_independent(text: &str, label: &str) -> String {
    format!("{text}{LIST_JOINER}{label}")
}

/// Renders every label after `text`, with the one at `target` in braces.
pub fn render_joint(text: &str, labels: &[&str], target: usize) -> String {
    let mut out = String::from(text);
    for (i, l) in labels.iter().enumerate() {
        out.push_str(LIST_JOINER);
        if i == target {
            out.push('{');
            out.push_str(l);
            out.push('}');
        } else {
            out.push_str(l);
        }
    }
    out
}

fn checked(scorer: &dyn CrossScorer, input: String) -> Result<f64, RerankError> {
    let score = scorer.score(&input)?;
    if !(0.0..=1.0).contains(&score) {
        return Err(RerankError::OutOfRange { score, input });
    }
    Ok(score)
}

fn ranked(mut scored: Vec<(f64, FactId)>) -> PredictionList {
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    PredictionList::from_ranked(scored.into_iter().map(|(score, fact)| Prediction {
        target: Target::Fact(fact),
        score,
    }))
}

fn distinct(candidates: &[Candidate]) -> Vec<&Candidate> {
    let mut seen = HashSet::new();
    candidates.iter().filter(|c| seen.insert(&c.fact)).collect()
}

/// Scores each candidate on its own.
pub fn ind_cls(
    text: &str,
    candidates: &[Candidate],
    scorer: &dyn CrossScorer,
) -> Result<PredictionList, RerankError> {
    let scored = distinct(candidates)
        .into_iter()
        .map(|c| {
            Ok((
                checked(scorer, render_independent(text, &c.label))?,
                c.fact.clone(),
            ))
        })
        .collect::<Result<Vec<_>, RerankError>>()?;
    Ok(ranked(scored))
}

/// Scores each candidate with all candidates in view.
pub fn jnt_cls(
    text: &str,
    candidates: &[Candidate],
    scorer: &dyn CrossScorer,
) -> Result<PredictionList, RerankError> {
    let cands = distinct(candidates);
    let labels: Vec<&str> = cands.iter().map(|c| c.label.as_str()).collect();
    let scored = cands
        .iter()
        .enumerate()
        .map(|(i, c)| {
            Ok((
                checked(scorer, render_joint(text, &labels, i))?,
                c.fact.clone(),
            ))
        })
        .collect::<Result<Vec<_>, RerankError>>()?;
    Ok(ranked(scored))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reranker {
    Ind,
    Jnt,
}

impl Reranker {
    pub fn rerank(
        self,
        text: &str,
        candidates: &[Candidate],
        scorer: &dyn CrossScorer,
    ) -> Result<PredictionList, RerankError> {
        match self {
            Reranker::Ind => ind_cls(text, candidates, scorer),
            Reranker::Jnt => jnt_cls(text, candidates, scorer),
        }
    }
}

impl fmt::Display for Reranker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reranker::Ind => "ind",
            Reranker::Jnt => "jnt",
        })
    }
}

impl FromStr for Reranker {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ind" | "indcls" => Ok(Reranker::Ind),
            "jnt" | "jntcls" => Ok(Reranker::Jnt),
            _ => Err(format!("unknown reranker {s:?}; expected ind or jnt")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(Vec<(&'static str, f64)>);

    impl CrossScorer for Fixed {
        fn score(&self, rendered: &str) -> Result<f64, RerankError> {
            Ok(self
                .0
                .iter()
                .find(|(needle, _)| rendered.ends_with(needle))
                .map_or(0.5, |&(_, s)| s))
        }
    }

    struct Constant;

    impl CrossScorer for Constant {
        fn score(&self, _: &str) -> Result<f64, RerankError> {
            Ok(0.3)
        }
    }

    fn cand(id: &str, label: &str) -> Candidate {
        Candidate {
            fact: id.into(),
            label: label.into(),
        }
    }

    fn ids(list: &PredictionList) -> Vec<String> {
        list.iter().map(|p| p.target.to_wire()).collect()
    }

    #[test]
    fn ind_cls_sorts_by_score() {
        let cands = [cand("F1", "a"), cand("F2", "b")];
        let out = ind_cls("t", &cands, &Fixed(vec![("a", 0.2), ("b", 0.9)])).unwrap();
        assert_eq!(ids(&out), vec!["F2", "F1"]);
    }

    #[test]
    fn ties_break_by_fact_id() {
        let cands = [cand("F3", "a"), cand("F1", "b"), cand("F2", "c")];
        assert_eq!(
            ids(&ind_cls("t", &cands, &Constant).unwrap()),
            vec!["F1", "F2", "F3"]
        );
        assert_eq!(
            ids(&jnt_cls("t", &cands, &Constant).unwrap()),
            vec!["F1", "F2", "F3"]
        );
    }

    #[test]
    fn lexical_jaccard_values() {
        let s = LexicalScorer;
        let hi = s.score(&render_independent("w x y z", "w x y q")).unwrap();
        let lo = s.score(&render_independent("w x y z", "w p q r")).unwrap();
        assert!((hi - 3.0 / 5.0).abs() < 1e-12);
        assert!((lo - 1.0 / 7.0).abs() < 1e-12);
        assert_eq!(s.score("a b || b a").unwrap(), 1.0);
        assert_eq!(s.score("a b || c d").unwrap(), 0.0);
    }

    #[test]
    fn joint_rendering_moves_marker() {
        assert_eq!(render_joint("T", &["F1"], 0), "T || {F1}");
        assert_eq!(render_joint("T", &["a", "b", "c"], 1), "T || a || {b} || c");
        assert_eq!(LexicalScorer::split("T || a || {b} || c"), ("T", "b"));
    }

    #[test]
    fn with_null_is_idempotent() {
        let once = with_null(vec![cand("F1", "a"), cand("F2", "b")]);
        assert_eq!(once.last().unwrap().fact, FactId::null());
        assert_eq!(with_null(once.clone()), once);
        assert_eq!(with_null(Vec::new()), vec![Candidate::null()]);
    }

    #[test]
    fn out_of_range_scores_are_rejected() {
        let cands = [cand("F1", "a")];
        assert!(matches!(
            ind_cls("t", &cands, &Fixed(vec![("a", 1.5)])),
            Err(RerankError::OutOfRange { .. })
        ));
    }
}
