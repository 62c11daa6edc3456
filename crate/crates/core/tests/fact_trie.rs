mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use factlink::kg::{ENGLISH, NULL_LABEL};
use factlink::{TokenId, TokenTrie};

use common::{random_kg, KgShape};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_label_walks_to_its_ids(labels in prop::collection::vec("[a-e]{1,3}( [a-e]{1,3}){0,3}", 1..40)) {
        let pairs: Vec<(String, String)> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), format!("F{i:03}")))
            .collect();
        let trie = TokenTrie::build(pairs.clone()).unwrap();
        for (label, id) in &pairs {
            let tokens = trie.tokenize(label);
            prop_assert!(!tokens.contains(&TokenId::OOV));
            prop_assert!(trie.resolve(&tokens).contains(&id.as_str()));
            for cut in 0..tokens.len() {
                let allowed = trie.allowed_next(&tokens[..cut]).unwrap();
                prop_assert!(allowed.tokens.contains(&tokens[cut]));
            }
            prop_assert!(trie.allowed_next(&tokens).unwrap().eos_allowed);
        }
        let ids: BTreeSet<&str> = pairs.iter().map(|(_, id)| id.as_str()).collect();
        prop_assert_eq!(trie.ids().iter().map(String::as_str).collect::<BTreeSet<_>>(), ids);
    }

    #[test]
    fn completions_are_exactly_the_labels(labels in prop::collection::btree_set("[a-c]{1,2}( [a-c]{1,2}){0,2}", 1..20)) {
        let trie = TokenTrie::build(labels.iter().map(|l| (l.clone(), l.clone()))).unwrap();
        let mut found = BTreeSet::new();
        let mut stack = vec![Vec::<TokenId>::new()];
        while let Some(prefix) = stack.pop() {
            let allowed = trie.allowed_next(&prefix).unwrap();
            if allowed.eos_allowed {
                found.insert(trie.detokenize(&prefix));
            }
            for &t in allowed.tokens {
                let mut next = prefix.clone();
                next.push(t);
                stack.push(next);
            }
        }
        prop_assert_eq!(found, labels);
    }

    #[test]
    fn bytes_roundtrip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kg = random_kg(&mut rng, KgShape::english(80));
        let trie = TokenTrie::for_facts(&kg).unwrap();
        let bytes = trie.to_bytes();
        let back = TokenTrie::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes(), bytes);
        for fact in kg.facts() {
            let label = kg.build_label(&fact.id, ENGLISH).unwrap();
            prop_assert!(back.resolve(&back.tokenize(&label.text)).contains(&fact.id.as_str()));
        }
    }
}

#[test]
fn fact_trie_contains_null() {
    let kg = common::load_fixture_kg("four_example");
    let trie = TokenTrie::for_facts(&kg).unwrap();
    assert_eq!(trie.resolve(&trie.tokenize(NULL_LABEL)), vec!["NULL"]);
}

#[test]
fn invalid_prefix_is_rejected() {
    let trie = TokenTrie::build([("a b", "F1")]).unwrap();
    let b = trie.tokenize("b");
    assert!(trie.allowed_next(&b).is_err());
}

#[test]
fn artifact_is_deterministic() {
    let kg = common::load_fixture_kg("appendix");
    let a = TokenTrie::for_facts(&kg).unwrap().to_bytes();
    let b = TokenTrie::for_facts(&kg).unwrap().to_bytes();
    assert_eq!(a, b);
    assert_eq!(&a[..4], b"FTRI");
}
