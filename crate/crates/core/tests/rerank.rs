mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use factlink::kg::NULL_LABEL;
use factlink::rerank::{
    candidates_for, render_joint, with_null, Candidate, CrossScorer, LexicalScorer, RerankError,
    Reranker,
};
use factlink::retrieval::LabelMode;
use factlink::FactId;

/// Score from a hash of the rendered input, in [0, 1].
struct Hashed;

impl CrossScorer for Hashed {
    fn score(&self, rendered: &str) -> Result<f64, RerankError> {
        let h = factlink::retrieval::fnv1a64(rendered.as_bytes());
        Ok((h % 1001) as f64 / 1000.0)
    }
}

struct Constant;

impl CrossScorer for Constant {
    fn score(&self, _: &str) -> Result<f64, RerankError> {
        Ok(0.5)
    }
}

fn candidates(n: usize) -> Vec<Candidate> {
    (0..n)
        .map(|i| Candidate {
            fact: FactId::new(format!("F{i:02}")),
            label: format!("label {i} ; r ; o{}", i % 3),
        })
        .collect()
}

fn ids(list: &factlink::predictions::PredictionList) -> Vec<String> {
    list.iter().map(|p| p.target.to_wire()).collect()
}

proptest! {
    #[test]
    fn reranking_permutes_the_candidates(n in 0usize..12, null in any::<bool>(), joint in any::<bool>()) {
        let mut cands = candidates(n);
        if null {
            cands = with_null(cands);
        }
        let reranker = if joint { Reranker::Jnt } else { Reranker::Ind };
        let out = reranker.rerank("a sentence", &cands, &Hashed).unwrap();
        let before: BTreeSet<String> = cands.iter().map(|c| c.fact.to_string()).collect();
        let after: BTreeSet<String> = ids(&out).into_iter().collect();
        prop_assert_eq!(out.len(), cands.len());
        prop_assert_eq!(before, after);
        let scores: Vec<f64> = out.iter().map(|p| p.score).collect();
        prop_assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn independent_scores_ignore_other_candidates(n in 1usize..10, drop in 0usize..10) {
        let all = candidates(n);
        let mut fewer = all.clone();
        if drop < n && n > 1 {
            fewer.remove(drop);
        }
        let a = Reranker::Ind.rerank("s", &all, &Hashed).unwrap();
        let b = Reranker::Ind.rerank("s", &fewer, &Hashed).unwrap();
        for p in b.iter() {
            let q = a.iter().find(|q| q.target == p.target).unwrap();
            prop_assert_eq!(p.score, q.score);
        }
    }

    #[test]
    fn with_null_is_idempotent(n in 0usize..6) {
        let once = with_null(candidates(n));
        let twice = with_null(once.clone());
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(once.last().unwrap().label.as_str(), NULL_LABEL);
    }
}

#[test]
fn constant_scorer_falls_back_to_id_order() {
    let mut cands = candidates(4);
    cands.reverse();
    let out = Reranker::Jnt.rerank("s", &cands, &Constant).unwrap();
    assert_eq!(ids(&out), ["F00", "F01", "F02", "F03"]);
}

#[test]
fn joint_rendering_marks_one_target() {
    assert_eq!(render_joint("T", &["F1"], 0), "T || {F1}");
    assert_eq!(render_joint("T", &["a", "b", "c"], 1), "T || a || {b} || c");
}

#[test]
fn lexical_scorer_prefers_overlap_on_fixture() {
    let kg = common::load_fixture_kg("four_example");
    let facts: Vec<FactId> = ["F1", "F2", "F4"].into_iter().map(FactId::new).collect();
    let cands = candidates_for(&kg, &facts, LabelMode::El, "en");
    let out = Reranker::Ind
        .rerank(
            "Marie Curie was a citizen of Poland.",
            &cands,
            &LexicalScorer,
        )
        .unwrap();
    assert_eq!(ids(&out)[0], "F4");
}

#[test]
fn null_only_candidates_predict_null() {
    let out = Reranker::Ind
        .rerank("anything", &with_null(Vec::new()), &LexicalScorer)
        .unwrap();
    assert_eq!(ids(&out), ["NULL"]);
}
