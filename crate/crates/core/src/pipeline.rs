//! End-to-end linking of gold-file sentences: retrieve, then generate or
//! re-rank. Sentences are processed in parallel; output order follows the
//! input.

use rayon::prelude::*;
use thiserror::Error;

use crate::decoder::{
    link, link_sro, DecodeConfig, DecodeError, DecodeMode, SequenceScorer, SroTries,
};
use crate::eval::GoldExample;
use crate::kg::{FactId, KnowledgeGraph};
use crate::predictions::{Prediction, PredictionList, PredictionRecord, Target};
use crate::rerank::{candidates_for, with_null, CrossScorer, RerankError, Reranker};
use crate::retrieval::{
    display_label, Embedder, EmbeddingIndex, LabelMode, RetrievalError, ScoredFact, SearchMode,
};
use crate::trie::TokenTrie;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Rerank(#[from] RerankError),
    #[error("{0}")]
    Config(String),
}

/// Dense retrieval of the top-k facts.
#[derive(Clone, Copy)]
pub struct Retriever<'a> {
    pub index: &'a EmbeddingIndex,
    pub embedder: &'a dyn Embedder,
    pub k: usize,
    pub search: SearchMode,
}

impl Retriever<'_> {
    pub fn retrieve(&self, text: &str, language: &str) -> Result<Vec<ScoredFact>, RetrievalError> {
        self.index
            .top_k(self.embedder, text, language, self.k, self.search)
    }
}

/// What happens after retrieval.
#[derive(Clone, Copy)]
pub enum Stage<'a> {
    /// Retrieved facts are the predictions.
    RetrieveOnly,
    Generate {
        trie: &'a TokenTrie,
        /// Required in [`DecodeMode::SroIndependent`].
        sro: Option<&'a SroTries>,
        scorer: &'a dyn SequenceScorer,
        config: &'a DecodeConfig,
    },
    Rerank {
        reranker: Reranker,
        scorer: &'a dyn CrossScorer,
        with_null: bool,
    },
}

#[derive(Clone, Copy)]
pub struct Pipeline<'a> {
    pub kg: &'a KnowledgeGraph,
    /// `None` skips retrieval.
    pub retriever: Option<Retriever<'a>>,
    /// Label languages shown to the generator or re-ranker.
    pub label_mode: LabelMode,
    pub stage: Stage<'a>,
}

#[derive(Debug, Default)]
pub struct LinkOutput {
    /// One record per input sentence, in input order.
    pub records: Vec<PredictionRecord>,
    /// Sentences whose linking failed; their records are empty.
    pub failures: Vec<(String, PipelineError)>,
}

impl Pipeline<'_> {
    pub fn validate(&self) -> Result<(), PipelineError> {
        match self.stage {
            Stage::RetrieveOnly if self.retriever.is_none() => Err(PipelineError::Config(
                "retrieval-only linking needs retrieval enabled".into(),
            )),
            Stage::Generate {
                sro: None, config, ..
            } if config.mode == DecodeMode::SroIndependent => Err(PipelineError::Config(
                "component-wise decoding needs entity and relation tries".into(),
            )),
            Stage::Generate { config, .. } => config.validate().map_err(Into::into),
            _ => Ok(()),
        }
    }

    pub fn link_one(&self, text: &str, language: &str) -> Result<PredictionList, PipelineError> {
        let retrieved = match &self.retriever {
            Some(r) => r.retrieve(text, language)?,
            None => Vec::new(),
        };
        match self.stage {
            Stage::RetrieveOnly => Ok(PredictionList::from_ranked(retrieved.into_iter().map(
                |s| Prediction {
                    target: Target::Fact(s.fact),
                    score: s.score,
                },
            ))),
            Stage::Generate {
                trie,
                sro,
                scorer,
                config,
            } => {
                let context: Vec<String> = retrieved
                    .iter()
                    .filter_map(|s| display_label(self.kg, &s.fact, self.label_mode, language))
                    .collect();
                match (config.mode, sro) {
                    (DecodeMode::SroIndependent, Some(tries)) => {
                        Ok(link_sro(text, &context, tries, self.kg, scorer, config)?)
                    }
                    (DecodeMode::SroIndependent, None) => Err(PipelineError::Config(
                        "component-wise decoding needs entity and relation tries".into(),
                    )),
                    _ => Ok(link(text, &context, trie, scorer, config)?),
                }
            }
            Stage::Rerank {
                reranker,
                scorer,
                with_null: add_null,
            } => {
                let facts: Vec<FactId> = retrieved.into_iter().map(|s| s.fact).collect();
                let mut candidates = candidates_for(self.kg, &facts, self.label_mode, language);
                if add_null {
                    candidates = with_null(candidates);
                }
                Ok(reranker.rerank(text, &candidates, scorer)?)
            }
        }
    }

    /// Links every example. `jobs` bounds the worker threads; 0 uses the
    /// global pool.
    pub fn link_all(
        &self,
        examples: &[GoldExample],
        jobs: usize,
    ) -> Result<LinkOutput, PipelineError> {
        self.validate()?;
        let run = || -> Vec<(PredictionRecord, Option<PipelineError>)> {
            examples
                .par_iter()
                .map(|ex| match self.link_one(&ex.text, &ex.lang) {
                    Ok(predictions) => (
                        PredictionRecord {
                            sentence_id: ex.sentence_id.clone(),
                            predictions,
                        },
                        None,
                    ),
                    Err(e) => (
                        PredictionRecord {
                            sentence_id: ex.sentence_id.clone(),
                            predictions: PredictionList::new(),
                        },
                        Some(e),
                    ),
                })
                .collect()
        };
        let results = if jobs == 0 {
            run()
        } else {
            rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map_err(|e| PipelineError::Config(format!("cannot start worker pool: {e}")))?
                .install(run)
        };
        let mut out = LinkOutput::default();
        for (record, err) in results {
            if let Some(e) = err {
                out.failures.push((record.sentence_id.clone(), e));
            }
            out.records.push(record);
        }
        Ok(out)
    }
}
