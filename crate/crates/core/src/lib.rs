//! Links sentences in any language to knowledge-graph facts.
//!
//! The pipeline embeds the sentence and every fact label, retrieves the top-k
//! facts by cosine similarity, and then either re-ranks them with a
//! classification scorer or generates a fact label with a beam search that a
//! prefix trie restricts to labels that exist in the graph. Neural models sit
//! behind the [`retrieval::Embedder`], [`decoder::SequenceScorer`] and
//! [`rerank::CrossScorer`] traits; deterministic reference implementations are
//! provided for each.

mod binio;

pub mod decoder;
pub mod eval;
pub mod kg;
pub mod pipeline;
pub mod predictions;
pub mod rerank;
pub mod retrieval;
pub mod text;
pub mod trie;

pub use binio::FormatError;
pub use kg::{FactId, KnowledgeGraph, LabelDictionary};
pub use text::TokenId;
pub use trie::TokenTrie;
