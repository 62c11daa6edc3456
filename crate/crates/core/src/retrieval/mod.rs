//! Dual-encoder retrieval: embed the sentence and every fact label
//! independently, score facts by cosine similarity under a multilingual
//! label strategy, and keep the top-k.

mod ann;
mod embed;
mod index;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::binio::FormatError;
use crate::kg::{FactId, KnowledgeGraph, ENGLISH, NULL_LABEL};
use crate::text::LIST_JOINER;

pub use ann::AnnParams;
pub use embed::{dot, fnv1a64, Embedder, HashEmbedder};
pub use index::{EmbeddingIndex, ScoredFact, SearchMode};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("index has dimension {index} but the embedder produces {embedder}")]
    DimensionMismatch { index: usize, embedder: usize },
    #[error("index was built with embedder {index:016x}, query embedder is {embedder:016x}")]
    StaleIndex { index: u64, embedder: u64 },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("unknown label strategy {0:?}")]
    UnknownStrategy(String),
    #[error("approximate search requested but no ANN structure was built")]
    NoAnn,
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("index artifact {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Which fact-label languages take part in scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LabelMode {
    /// English label only.
    El,
    /// Label in the language of the input text.
    Tl,
    /// English and text-language labels.
    ETl,
    /// Every available language.
    All,
}

/// How several labels of one fact are turned into one score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Combine {
    /// Embed the joined labels once.
    Concat,
    Max,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LabelStrategy {
    pub mode: LabelMode,
    pub combine: Combine,
}

impl LabelStrategy {
    /// `El` and `Tl` carry a single label, so their combine is fixed to `Concat`.
    pub fn new(mode: LabelMode, combine: Combine) -> Self {
        let combine = match mode {
            LabelMode::El | LabelMode::Tl => Combine::Concat,
            _ => combine,
        };
        Self { mode, combine }
    }

    pub const EL: LabelStrategy = LabelStrategy {
        mode: LabelMode::El,
        combine: Combine::Concat,
    };

    /// Every distinct strategy.
    pub fn all() -> [LabelStrategy; 8] {
        use Combine::*;
        use LabelMode::*;
        [
            Self::new(El, Concat),
            Self::new(Tl, Concat),
            Self::new(ETl, Concat),
            Self::new(ETl, Max),
            Self::new(ETl, Sum),
            Self::new(All, Concat),
            Self::new(All, Max),
            Self::new(All, Sum),
        ]
    }

    /// Whether each fact contributes one combined label.
    pub fn is_single(&self) -> bool {
        self.combine == Combine::Concat
    }

    pub(crate) fn tag(&self) -> u8 {
        let mode = match self.mode {
            LabelMode::El => 0,
            LabelMode::Tl => 1,
            LabelMode::ETl => 2,
            LabelMode::All => 3,
        };
        let combine = match self.combine {
            Combine::Concat => 0,
            Combine::Max => 1,
            Combine::Sum => 2,
        };
        mode * 3 + combine
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        let mode = match tag / 3 {
            0 => LabelMode::El,
            1 => LabelMode::Tl,
            2 => LabelMode::ETl,
            3 => LabelMode::All,
            _ => return None,
        };
        let combine = match tag % 3 {
            0 => Combine::Concat,
            1 => Combine::Max,
            _ => Combine::Sum,
        };
        let s = Self::new(mode, combine);
        (s.tag() == tag).then_some(s)
    }
}

impl fmt::Display for LabelStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mode = match self.mode {
            LabelMode::El => return f.write_str("El"),
            LabelMode::Tl => return f.write_str("Tl"),
            LabelMode::ETl => "ETl",
            LabelMode::All => "All",
        };
        let combine = match self.combine {
            Combine::Concat => "Concat",
            Combine::Max => "Max",
            Combine::Sum => "Sum",
        };
        write!(f, "{mode}-{combine}")
    }
}

impl FromStr for LabelStrategy {
    type Err = RetrievalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        let (mode, combine) = match lower.split_once('-') {
            Some((m, c)) => (m, Some(c)),
            None => (lower.as_str(), None),
        };
        let mode = match mode {
            "el" => LabelMode::El,
            "tl" => LabelMode::Tl,
            "etl" => LabelMode::ETl,
            "all" => LabelMode::All,
            _ => return Err(RetrievalError::UnknownStrategy(s.to_string())),
        };
        let combine = match (mode, combine) {
            (LabelMode::El | LabelMode::Tl, None) => Combine::Concat,
            (_, Some("concat")) => Combine::Concat,
            (LabelMode::ETl | LabelMode::All, Some("max")) => Combine::Max,
            (LabelMode::ETl | LabelMode::All, Some("sum")) => Combine::Sum,
            _ => return Err(RetrievalError::UnknownStrategy(s.to_string())),
        };
        Ok(Self::new(mode, combine))
    }
}

/// Languages a strategy draws from for one fact, in preferred order,
/// restricted to those in which the fact has a label.
fn strategy_languages<'a>(
    available: &[&'a str],
    mode: LabelMode,
    text_language: &str,
) -> Vec<&'a str> {
    available
        .iter()
        .copied()
        .filter(|&l| match mode {
            LabelMode::El => l == ENGLISH,
            LabelMode::Tl => l == text_language,
            LabelMode::ETl => l == ENGLISH || l == text_language,
            LabelMode::All => true,
        })
        .collect()
}

/// Label strings a fact contributes under `strategy` for a sentence in
/// `text_language`. Concat strategies yield at most one string; Max and Sum
/// yield one string per available language. Empty means unscorable.
pub fn expand_labels(
    kg: &KnowledgeGraph,
    fact: &FactId,
    strategy: LabelStrategy,
    text_language: &str,
) -> Vec<String> {
    match kg.fact_position(fact) {
        Some(p) => expand_at(kg, p, strategy, text_language),
        None => Vec::new(),
    }
}

pub(crate) fn expand_at(
    kg: &KnowledgeGraph,
    position: usize,
    strategy: LabelStrategy,
    text_language: &str,
) -> Vec<String> {
    let available = kg.label_languages_at(position);
    let labels: Vec<String> = strategy_languages(&available, strategy.mode, text_language)
        .into_iter()
        .filter_map(|l| kg.label_at(position, l))
        .map(|l| l.text)
        .collect();
    if strategy.is_single() && !labels.is_empty() {
        vec![labels.join(LIST_JOINER)]
    } else {
        labels
    }
}

/// One display string for a fact: its labels under `mode` joined by
/// `" || "`, else the English label, else the first labelled language.
/// The NULL fact displays as "None"; unknown or unlabelled facts as `None`.
pub fn display_label(
    kg: &KnowledgeGraph,
    fact: &FactId,
    mode: LabelMode,
    text_language: &str,
) -> Option<String> {
    if fact.is_null() {
        return Some(NULL_LABEL.to_string());
    }
    let position = kg.fact_position(fact)?;
    if let Some(joined) = expand_at(
        kg,
        position,
        LabelStrategy::new(mode, Combine::Concat),
        text_language,
    )
    .pop()
    {
        return Some(joined);
    }
    if let Some(l) = kg.label_at(position, ENGLISH) {
        return Some(l.text);
    }
    let first = kg.label_languages_at(position).first()?.to_string();
    kg.label_at(position, &first).map(|l| l.text)
}

/// Aggregates per-label cosines into a fact score. An empty list scores
/// negative infinity so the fact never ranks.
pub fn score_fact(entry_scores: &[f64], combine: Combine) -> f64 {
    if entry_scores.is_empty() {
        return f64::NEG_INFINITY;
    }
    match combine {
        Combine::Sum => entry_scores.iter().sum(),
        Combine::Max => entry_scores
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max),
        Combine::Concat => entry_scores[0],
    }
}
