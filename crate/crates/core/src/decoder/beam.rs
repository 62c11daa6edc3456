use std::cmp::Ordering;

use crate::text::TokenId;
use crate::trie::{NodeId, TokenTrie};

use super::{DecodeConfig, DecodeError, DecodeMode, DecodeTarget, ScoringStep, SequenceScorer};

/// A finished beam entry. `tokens` excludes the terminating EOS.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<TokenId>,
    pub score: f64,
    pub terminated: bool,
}

struct Live {
    tokens: Vec<TokenId>,
    score: f64,
    node: Option<NodeId>,
}

fn cmp_extended(a: &[TokenId], a_next: TokenId, b: &[TokenId], b_next: TokenId) -> Ordering {
    a.iter()
        .chain(std::iter::once(&a_next))
        .cmp(b.iter().chain(std::iter::once(&b_next)))
}

/// Score used for the final ranking; the raw sum unless a length penalty
/// is configured.
pub(crate) fn ranking_score(h: &Hypothesis, length_penalty: f64) -> f64 {
    if length_penalty == 0.0 {
        h.score
    } else {
        h.score / ((h.tokens.len() + 1) as f64).powf(length_penalty)
    }
}

/// Runs beam search over `trie` and returns the terminated hypotheses,
/// best first. Ties go to the lexicographically smaller token sequence.
///
/// In unconstrained mode every vocabulary token except OOV is offered at
/// each step and the trie is used only to track position.
pub fn beam_search(
    trie: &TokenTrie,
    text: &str,
    context: &[String],
    target: DecodeTarget,
    scorer: &dyn SequenceScorer,
    config: &DecodeConfig,
) -> Result<Vec<Hypothesis>, DecodeError> {
    config.validate()?;
    let b = config.beam_width;
    let constrained = config.mode != DecodeMode::Unconstrained;
    let open: Vec<TokenId> = if constrained {
        Vec::new()
    } else {
        trie.vocab().ids().filter(|&t| t != TokenId::OOV).collect()
    };

    let mut live = vec![Live {
        tokens: Vec::new(),
        score: 0.0,
        node: Some(NodeId::ROOT),
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();
    let mut candidates: Vec<TokenId> = Vec::new();

    for step in 0..=config.max_len {
        if live.is_empty() || finished.len() >= b {
            break;
        }
        let last = step == config.max_len;
        let mut pool: Vec<(usize, TokenId, f64)> = Vec::new();
        for (i, h) in live.iter().enumerate() {
            candidates.clear();
            if constrained {
                let allowed =
                    trie.allowed_at(h.node.expect("constrained hypotheses stay in the trie"));
                if allowed.eos_allowed {
                    candidates.push(TokenId::EOS);
                }
                if !last {
                    candidates.extend_from_slice(allowed.tokens);
                }
            } else if last {
                candidates.push(TokenId::EOS);
            } else {
                candidates.extend_from_slice(&open);
            }
            if candidates.is_empty() {
                continue;
            }
            let scores = scorer.score(&ScoringStep {
                text,
                context,
                target,
                vocab: trie.vocab(),
                prefix: &h.tokens,
                candidates: &candidates,
            })?;
            if scores.len() != candidates.len() {
                return Err(DecodeError::ScoreCount {
                    expected: candidates.len(),
                    got: scores.len(),
                });
            }
            for (&token, &s) in candidates.iter().zip(&scores) {
                if !s.is_finite() {
                    return Err(DecodeError::NonFinite { token });
                }
                pool.push((i, token, h.score + s));
            }
        }

        pool.sort_by(|x, y| {
            y.2.total_cmp(&x.2)
                .then_with(|| cmp_extended(&live[x.0].tokens, x.1, &live[y.0].tokens, y.1))
        });
        pool.truncate(b);

        let mut next = Vec::with_capacity(pool.len());
        for (i, token, score) in pool {
            let parent = &live[i];
            if token == TokenId::EOS {
                finished.push(Hypothesis {
                    tokens: parent.tokens.clone(),
                    score,
                    terminated: true,
                });
            } else {
                let mut tokens = Vec::with_capacity(parent.tokens.len() + 1);
                tokens.extend_from_slice(&parent.tokens);
                tokens.push(token);
                next.push(Live {
                    tokens,
                    score,
                    node: parent.node.and_then(|n| trie.child(n, token)),
                });
            }
        }
        live = next;
    }

    let penalty = config.length_penalty;
    finished.sort_by(|x, y| {
        ranking_score(y, penalty)
            .total_cmp(&ranking_score(x, penalty))
            .then_with(|| x.tokens.cmp(&y.tokens))
    });
    Ok(finished)
}
