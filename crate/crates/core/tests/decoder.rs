mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use factlink::decoder::scorers::{AdversarialScorer, OracleScorer};
use factlink::decoder::{
    beam_search, link, link_sro, DecodeConfig, DecodeMode, DecodeTarget, SroTries,
};
use factlink::predictions::Target;
use factlink::{FactId, TokenTrie};

use common::{enumerate_labels, random_kg, trie_labels, HashScorer, KgShape};

fn config(beam_width: usize) -> DecodeConfig {
    DecodeConfig {
        beam_width,
        ..DecodeConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn wide_beam_equals_exhaustive_enumeration(seed in any::<u64>(), facts in 1usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kg = random_kg(&mut rng, KgShape::english(facts));
        let labels = trie_labels(&kg);
        let trie = TokenTrie::build(labels.clone()).unwrap();
        let scorer = HashScorer { seed };
        let oracle = enumerate_labels(&trie, &labels, &scorer);
        let hyps = beam_search(&trie, "text", &[], DecodeTarget::Fact, &scorer, &config(labels.len())).unwrap();
        prop_assert_eq!(hyps.len(), oracle.len());
        for (h, o) in hyps.iter().zip(&oracle) {
            prop_assert_eq!(&h.tokens, &o.tokens);
            prop_assert!((h.score - o.score).abs() <= 1e-9);
        }
    }

    #[test]
    fn constrained_output_names_facts(seed in any::<u64>(), facts in 1usize..120, beam in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kg = random_kg(&mut rng, KgShape::multilingual(facts));
        let trie = TokenTrie::for_facts(&kg).unwrap();
        let out = link("some text", &[], &trie, &HashScorer { seed }, &config(beam)).unwrap();
        prop_assert!(!out.is_empty());
        prop_assert!(out.len() <= beam);
        for p in out.iter() {
            match &p.target {
                Target::Fact(f) => prop_assert!(f.is_null() || kg.fact(f).is_some()),
                Target::Invalid(s) => prop_assert!(false, "invalid prediction {}", s),
            }
        }
    }

    #[test]
    fn decoding_is_deterministic(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kg = random_kg(&mut rng, KgShape::english(40));
        let trie = TokenTrie::for_facts(&kg).unwrap();
        let a = link("t", &[], &trie, &HashScorer { seed }, &config(4)).unwrap();
        let b = link("t", &[], &trie, &HashScorer { seed }, &config(4)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn scores_are_sums_of_token_scores(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kg = random_kg(&mut rng, KgShape::english(30));
        let trie = TokenTrie::for_facts(&kg).unwrap();
        let scorer = HashScorer { seed };
        let hyps = beam_search(&trie, "t", &[], DecodeTarget::Fact, &scorer, &config(3)).unwrap();
        for h in hyps {
            let pieces = trie.vocab().decode(&h.tokens);
            let mut total = 0.0;
            for i in 0..pieces.len() {
                total += scorer.token_score(&pieces[..i], pieces[i]);
            }
            total += scorer.token_score(&pieces, "</s>");
            prop_assert_eq!(h.score, total);
        }
    }
}

#[test]
fn oracle_ranks_gold_first_on_fixture() {
    let kg = common::load_fixture_kg("appendix");
    let trie = TokenTrie::for_facts(&kg).unwrap();
    let mut oracle = OracleScorer::default();
    let gold = FactId::new("Q18168774-P178-Q2283");
    oracle.add_fact("s", &kg, &gold);
    let out = link("s", &[], &trie, &oracle, &config(5)).unwrap();
    assert_eq!(out.first().unwrap().target, Target::Fact(gold));
}

#[test]
fn duplicate_labels_expand_in_id_order() {
    let trie =
        TokenTrie::build([("a ; r ; b", "F9"), ("a ; r ; b", "F10"), ("None", "NULL")]).unwrap();
    let mut oracle = OracleScorer::default();
    oracle.add_label("s", DecodeTarget::Fact, "a ; r ; b");
    let out = link("s", &[], &trie, &oracle, &config(5)).unwrap();
    let ids: Vec<String> = out.iter().map(|p| p.target.to_wire()).collect();
    assert_eq!(&ids[..2], ["F10", "F9"]);
}

#[test]
fn adversarial_scorer_needs_constraints() {
    let kg = common::load_fixture_kg("four_example");
    let trie = TokenTrie::for_facts(&kg).unwrap();
    let text = "Berlin is the largest city in Germany.";
    let open = DecodeConfig {
        mode: DecodeMode::Unconstrained,
        ..DecodeConfig::default()
    };
    let out = link(text, &[], &trie, &AdversarialScorer, &open).unwrap();
    assert!(out.invalid_count() > 0);
    assert!(out
        .iter()
        .any(|p| p.target.to_wire().starts_with("INVALID:")));
    let out = link(text, &[], &trie, &AdversarialScorer, &config(5)).unwrap();
    assert_eq!(out.invalid_count(), 0);
}

#[test]
fn sro_decoding_finds_gold_components() {
    let kg = common::load_fixture_kg("four_example");
    let tries = SroTries::from_kg(&kg).unwrap();
    let gold = FactId::new("F4");
    let mut oracle = OracleScorer::default();
    oracle.add_fact("s", &kg, &gold);
    let cfg = DecodeConfig {
        mode: DecodeMode::SroIndependent,
        ..DecodeConfig::default()
    };
    let out = link_sro("s", &[], &tries, &kg, &oracle, &cfg).unwrap();
    assert_eq!(out.first().unwrap().target, Target::Fact(gold));
}

#[test]
fn sro_decoding_without_a_matching_fact_predicts_null() {
    let kg = common::load_fixture_kg("four_example");
    let tries = SroTries::from_kg(&kg).unwrap();
    let mut oracle = OracleScorer::default();
    oracle.add_label("s", DecodeTarget::Subject, "Berlin");
    oracle.add_label("s", DecodeTarget::Relation, "author");
    oracle.add_label("s", DecodeTarget::Object, "Poland");
    let cfg = DecodeConfig {
        mode: DecodeMode::SroIndependent,
        beam_width: 1,
        ..DecodeConfig::default()
    };
    let out = link_sro("s", &[], &tries, &kg, &oracle, &cfg).unwrap();
    assert_eq!(out.first().unwrap().target, Target::Fact(FactId::null()));
}

#[test]
fn null_is_decodable_from_an_empty_kg() {
    let kg = factlink::KnowledgeGraph::builder().build();
    let trie = TokenTrie::for_facts(&kg).unwrap();
    let out = link("t", &[], &trie, &HashScorer { seed: 7 }, &config(5)).unwrap();
    assert_eq!(out.len(), 1);
    assert_eq!(out.first().unwrap().target, Target::Fact(FactId::null()));
}
