//! Generation stage: beam search over fact labels, constrained by a prefix
//! trie, with pluggable per-token scoring.
//!
//! A [`SequenceScorer`] sees the sentence, the retrieved context labels,
//! the current prefix and the candidate next tokens, and returns one
//! log-score per candidate. [`link`] decodes whole fact labels;
//! [`link_sro`] decodes subject, relation and object separately and joins
//! them through the KG.

mod beam;
pub mod scorers;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::kg::{EntityId, FactId, KnowledgeGraph, RelationId, ENGLISH};
use crate::predictions::{Prediction, PredictionList, Target};
use crate::text::{TokenId, Vocabulary, LIST_JOINER};
use crate::trie::{TokenTrie, TrieError};

pub use beam::{beam_search, Hypothesis};

/// What the current decode produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DecodeTarget {
    Fact,
    Subject,
    Relation,
    Object,
}

/// Arguments of one scorer call.
#[derive(Debug, Clone, Copy)]
pub struct ScoringStep<'a> {
    pub text: &'a str,
    pub context: &'a [String],
    pub target: DecodeTarget,
    pub vocab: &'a Vocabulary,
    pub prefix: &'a [TokenId],
    /// Ascending; includes [`TokenId::EOS`] when termination is allowed.
    pub candidates: &'a [TokenId],
}

impl ScoringStep<'_> {
    /// The encoder input: sentence and context labels joined by `" || "`.
    pub fn rendered_input(&self) -> String {
        render_context(self.text, self.context)
    }
}

#[derive(Debug, Clone, Error)]
#[error("{0}")]
pub struct ScorerError(pub String);

/// Log-scores for candidate next tokens.
///
/// Scorers are shared across worker threads, so implementations must be
/// deterministic and safe to call concurrently. A scorer with mutable
/// state should keep it per thread internally.
pub trait SequenceScorer: Send + Sync {
    /// One finite score per entry of `step.candidates`, in the same order.
    fn score(&self, step: &ScoringStep<'_>) -> Result<Vec<f64>, ScorerError>;
}

impl<S: SequenceScorer + ?Sized> SequenceScorer for &S {
    fn score(&self, step: &ScoringStep<'_>) -> Result<Vec<f64>, ScorerError> {
        (**self).score(step)
    }
}

impl<S: SequenceScorer + ?Sized> SequenceScorer for Box<S> {
    fn score(&self, step: &ScoringStep<'_>) -> Result<Vec<f64>, ScorerError> {
        (**self).score(step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecodeMode {
    #[default]
    Constrained,
    Unconstrained,
    SroIndependent,
}

impl fmt::Display for DecodeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecodeMode::Constrained => "constrained",
            DecodeMode::Unconstrained => "unconstrained",
            DecodeMode::SroIndependent => "sro_independent",
        })
    }
}

impl FromStr for DecodeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "constrained" => Ok(DecodeMode::Constrained),
            "unconstrained" => Ok(DecodeMode::Unconstrained),
            "sro_independent" | "sro" => Ok(DecodeMode::SroIndependent),
            _ => Err(format!("unknown decode mode {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeConfig {
    pub beam_width: usize,
    /// Maximum tokens per label, EOS excluded.
    pub max_len: usize,
    pub mode: DecodeMode,
    /// Retrieved labels passed to the scorer.
    pub context_size: usize,
    /// Exponent `a` in `score / (len + 1)^a` used for the final ranking.
    /// Zero ranks by raw cumulative score.
    pub length_penalty: f64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            beam_width: 5,
            max_len: 64,
            mode: DecodeMode::Constrained,
            context_size: 5,
            length_penalty: 0.0,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<(), DecodeError> {
        if self.beam_width == 0 {
            return Err(DecodeError::Config("beam width must be at least 1".into()));
        }
        if self.max_len == 0 {
            return Err(DecodeError::Config("max length must be at least 1".into()));
        }
        if !self.length_penalty.is_finite() {
            return Err(DecodeError::Config("length penalty must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("invalid decode config: {0}")]
    Config(String),
    #[error("scorer failed: {0}")]
    Scorer(#[from] ScorerError),
    #[error("scorer returned {got} scores for {expected} candidates")]
    ScoreCount { expected: usize, got: usize },
    #[error("scorer returned a non-finite score for token {token}")]
    NonFinite { token: TokenId },
    #[error("{0} mode is decoded with a different entry point")]
    Mode(DecodeMode),
}

/// `text`, then each label, joined by `" || "`.
pub fn render_context<S: AsRef<str>>(text: &str, labels: &[S]) -> String {
    let mut out = String::from(text);
    for l in labels {
        out.push_str(LIST_JOINER);
        out.push_str(l.as_ref());
    }
    out
}

/// Decodes fact labels for `text` and maps them to fact ids.
///
/// Labels shared by several facts expand to all of them in ascending id
/// order with the same score. In unconstrained mode, sequences that are not
/// stored labels become [`Target::Invalid`].
pub fn link(
    text: &str,
    context: &[String],
    trie: &TokenTrie,
    scorer: &dyn SequenceScorer,
    config: &DecodeConfig,
) -> Result<PredictionList, DecodeError> {
    if config.mode == DecodeMode::SroIndependent {
        return Err(DecodeError::Mode(config.mode));
    }
    let context = &context[..context.len().min(config.context_size)];
    let hyps = beam_search(trie, text, context, DecodeTarget::Fact, scorer, config)?;
    let mut out = PredictionList::new();
    for h in hyps {
        let score = beam::ranking_score(&h, config.length_penalty);
        let ids = trie.resolve(&h.tokens);
        if ids.is_empty() {
            out.push(Prediction {
                target: Target::Invalid(trie.detokenize(&h.tokens)),
                score,
            });
        }
        for id in ids {
            out.push(Prediction {
                target: Target::Fact(FactId::new(id)),
                score,
            });
        }
        if out.len() >= config.beam_width {
            break;
        }
    }
    out.truncate(config.beam_width);
    Ok(out)
}

/// Entity and relation tries for component-wise decoding. Subjects and
/// objects share the entity trie.
#[derive(Clone)]
pub struct SroTries {
    pub entities: TokenTrie,
    pub relations: TokenTrie,
}

impl SroTries {
    /// Tries over the English entity and relation labels.
    pub fn from_kg(kg: &KnowledgeGraph) -> Result<Self, TrieError> {
        let entities = TokenTrie::build(kg.entities().iter().filter_map(|e| {
            e.labels
                .get(ENGLISH)
                .map(|l| (l.to_string(), e.id.as_str().to_string()))
        }))?;
        let relations = TokenTrie::build(kg.relations().iter().filter_map(|r| {
            r.labels
                .get(ENGLISH)
                .map(|l| (l.to_string(), r.id.as_str().to_string()))
        }))?;
        Ok(Self {
            entities,
            relations,
        })
    }
}

fn component(
    trie: &TokenTrie,
    text: &str,
    context: &[String],
    target: DecodeTarget,
    scorer: &dyn SequenceScorer,
    config: &DecodeConfig,
) -> Result<Vec<(String, f64)>, DecodeError> {
    let mut out: Vec<(String, f64)> = Vec::new();
    for h in beam_search(trie, text, context, target, scorer, config)? {
        let score = beam::ranking_score(&h, config.length_penalty);
        for id in trie.resolve(&h.tokens) {
            if !out.iter().any(|(x, _)| x == id) {
                out.push((id.to_string(), score));
            }
        }
        if out.len() >= config.beam_width {
            break;
        }
    }
    out.truncate(config.beam_width);
    Ok(out)
}

/// Decodes subject, relation and object independently and keeps the
/// combinations that are KG facts, scored by the sum of the component
/// scores. Falls back to the NULL fact when no combination exists.
pub fn link_sro(
    text: &str,
    context: &[String],
    tries: &SroTries,
    kg: &KnowledgeGraph,
    scorer: &dyn SequenceScorer,
    config: &DecodeConfig,
) -> Result<PredictionList, DecodeError> {
    let config = &DecodeConfig {
        mode: DecodeMode::SroIndependent,
        ..config.clone()
    };
    let context = &context[..context.len().min(config.context_size)];
    let subjects = component(
        &tries.entities,
        text,
        context,
        DecodeTarget::Subject,
        scorer,
        config,
    )?;
    let relations = component(
        &tries.relations,
        text,
        context,
        DecodeTarget::Relation,
        scorer,
        config,
    )?;
    let objects = component(
        &tries.entities,
        text,
        context,
        DecodeTarget::Object,
        scorer,
        config,
    )?;

    let mut combos: Vec<(f64, [usize; 3], &FactId)> = Vec::new();
    for (i, (s, ss)) in subjects.iter().enumerate() {
        for (j, (r, rs)) in relations.iter().enumerate() {
            for (k, (o, os)) in objects.iter().enumerate() {
                let fact = kg.fact_for_triple(
                    &EntityId::new(s.as_str()),
                    &RelationId::new(r.as_str()),
                    &EntityId::new(o.as_str()),
                );
                if let Some(fact) = fact {
                    combos.push((ss + rs + os, [i, j, k], fact));
                }
            }
        }
    }
    combos.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut out = PredictionList::new();
    for (score, _, fact) in combos {
        out.push(Prediction {
            target: Target::Fact(fact.clone()),
            score,
        });
        if out.len() == config.beam_width {
            break;
        }
    }
    if out.is_empty() {
        out.push(Prediction {
            target: Target::Fact(FactId::null()),
            score: 0.0,
        });
    }
    Ok(out)
}
