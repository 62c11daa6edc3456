//! Reference scorers. None of them is a trained model; they exist to
//! exercise the decoder deterministically.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use crate::kg::{FactId, KnowledgeGraph, ENGLISH, NULL_LABEL};
use crate::text::{TokenId, Tokenizer, WordTokenizer};

use super::{DecodeTarget, ScorerError, ScoringStep, SequenceScorer};

/// Fixed score per token string, `default` for the rest, 0 for EOS.
#[derive(Debug, Clone)]
pub struct TableScorer {
    table: HashMap<String, f64>,
    default: f64,
}

impl TableScorer {
    pub fn new(table: &[(&str, f64)], default: f64) -> Self {
        Self {
            table: table.iter().map(|&(t, s)| (t.to_string(), s)).collect(),
            default,
        }
    }
}

impl SequenceScorer for TableScorer {
    fn score(&self, step: &ScoringStep<'_>) -> Result<Vec<f64>, ScorerError> {
        Ok(step
            .candidates
            .iter()
            .map(|&c| {
                if c == TokenId::EOS {
                    return 0.0;
                }
                let tok = step.vocab.token(c).unwrap_or_default();
                self.table.get(tok).copied().unwrap_or(self.default)
            })
            .collect())
    }
}

/// Gold-aware scorer: 0 for any token continuing a gold label of the
/// sentence (EOS once a gold label is complete), -1 otherwise.
#[derive(Clone)]
pub struct OracleScorer {
    tokenizer: Arc<dyn Tokenizer>,
    gold: HashMap<(String, DecodeTarget), Vec<Vec<String>>>,
}

impl Default for OracleScorer {
    fn default() -> Self {
        Self::new(Arc::new(WordTokenizer))
    }
}

impl OracleScorer {
    pub const HIT: f64 = 0.0;
    pub const MISS: f64 = -1.0;

    /// `tokenizer` must match the one the decoding trie was built with.
    pub fn new(tokenizer: Arc<dyn Tokenizer>) -> Self {
        Self {
            tokenizer,
            gold: HashMap::new(),
        }
    }

    pub fn add_label(&mut self, text: &str, target: DecodeTarget, label: &str) {
        let pieces = self.tokenizer.pieces(label);
        let paths = self.gold.entry((text.to_string(), target)).or_default();
        if !paths.contains(&pieces) {
            paths.push(pieces);
        }
    }

    /// Registers the English fact label and its components as gold for
    /// `text`. The NULL fact registers the "None" label.
    pub fn add_fact(&mut self, text: &str, kg: &KnowledgeGraph, fact: &FactId) {
        if fact.is_null() {
            self.add_label(text, DecodeTarget::Fact, NULL_LABEL);
            return;
        }
        if let Some(label) = kg.build_label(fact, ENGLISH) {
            self.add_label(text, DecodeTarget::Fact, &label.text);
            let [s, r, o] = &label.parts;
            self.add_label(text, DecodeTarget::Subject, s);
            self.add_label(text, DecodeTarget::Relation, r);
            self.add_label(text, DecodeTarget::Object, o);
        }
    }
}

impl SequenceScorer for OracleScorer {
    fn score(&self, step: &ScoringStep<'_>) -> Result<Vec<f64>, ScorerError> {
        let paths = self
            .gold
            .get(&(step.text.to_string(), step.target))
            .map(Vec::as_slice)
            .unwrap_or_default();
        let prefix = step.vocab.decode(step.prefix);
        let n = prefix.len();
        let on_path: Vec<&Vec<String>> = paths
            .iter()
            .filter(|p| p.len() >= n && p[..n].iter().zip(&prefix).all(|(a, b)| a == b))
            .collect();
        Ok(step
            .candidates
            .iter()
            .map(|&c| {
                let hit = if c == TokenId::EOS {
                    on_path.iter().any(|p| p.len() == n)
                } else {
                    let tok = step.vocab.token(c).unwrap_or_default();
                    on_path.iter().any(|p| p.len() > n && p[n] == tok)
                };
                if hit {
                    Self::HIT
                } else {
                    Self::MISS
                }
            })
            .collect())
    }
}

/// Prefers copying a sentence word and stopping immediately. Without the
/// trie constraint this produces labels that name no fact.
#[derive(Debug, Clone, Copy, Default)]
pub struct AdversarialScorer;

impl SequenceScorer for AdversarialScorer {
    fn score(&self, step: &ScoringStep<'_>) -> Result<Vec<f64>, ScorerError> {
        let words: HashSet<String> = WordTokenizer.pieces(step.text).into_iter().collect();
        Ok(step
            .candidates
            .iter()
            .map(|&c| {
                if c == TokenId::EOS {
                    if step.prefix.is_empty() {
                        -10.0
                    } else {
                        0.0
                    }
                } else if words.contains(step.vocab.token(c).unwrap_or_default()) {
                    -0.5
                } else {
                    -1.0
                }
            })
            .collect())
    }
}

/// Lexical heuristic: log-probabilities favouring tokens that occur in the
/// sentence, then in the context labels.
#[derive(Debug, Clone, Copy, Default)]
pub struct OverlapScorer;

impl SequenceScorer for OverlapScorer {
    fn score(&self, step: &ScoringStep<'_>) -> Result<Vec<f64>, ScorerError> {
        let in_text: HashSet<String> = WordTokenizer.pieces(step.text).into_iter().collect();
        let in_context: HashSet<String> = step
            .context
            .iter()
            .flat_map(|l| WordTokenizer.pieces(l))
            .collect();
        Ok(step
            .candidates
            .iter()
            .map(|&c| {
                let p: f64 = if c == TokenId::EOS {
                    0.3
                } else if c == TokenId::SEP {
                    0.5
                } else {
                    let tok = step.vocab.token(c).unwrap_or_default();
                    if in_text.contains(tok) {
                        0.9
                    } else if in_context.contains(tok) {
                        0.4
                    } else {
                        0.01
                    }
                };
                p.ln()
            })
            .collect())
    }
}
