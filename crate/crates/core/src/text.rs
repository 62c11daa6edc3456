//! Text normalization and word-level tokenization shared by the label
//! dictionary, the prefix trie and the reference scorers.

use std::collections::HashMap;
use std::fmt;

use unicode_normalization::UnicodeNormalization;

/// Separator placed between the subject, relation and object labels.
pub const COMPONENT_SEPARATOR: &str = " ; ";

/// Joiner used for concatenated label lists and cross-encoder inputs.
pub const LIST_JOINER: &str = " || ";

/// NFKC followed by lowercasing.
pub fn normalize(text: &str) -> String {
    text.nfkc().flat_map(char::to_lowercase).collect()
}

/// Identifier of a vocabulary entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TokenId(pub u32);

impl TokenId {
    pub const EOS: TokenId = TokenId(0);
    pub const SEP: TokenId = TokenId(1);
    pub const OOV: TokenId = TokenId(2);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Splits text into token strings. Implementations must be deterministic.
pub trait Tokenizer: Send + Sync {
    /// Short stable name, persisted alongside trie artifacts.
    fn name(&self) -> &str;

    fn pieces(&self, text: &str) -> Vec<String>;

    /// Inverse of [`Tokenizer::pieces`] up to whitespace.
    fn join(&self, pieces: &[&str]) -> String {
        pieces.join(" ")
    }
}

/// Maximal non-whitespace runs of the normalized text, with every `;`
/// split out as its own token.
#[derive(Debug, Clone, Copy, Default)]
pub struct WordTokenizer;

impl WordTokenizer {
    pub const NAME: &'static str = "word-v1";
}

impl Tokenizer for WordTokenizer {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn pieces(&self, text: &str) -> Vec<String> {
        let normalized = normalize(text);
        let mut out = Vec::new();
        for run in normalized.split_whitespace() {
            let mut rest = run;
            while let Some(pos) = rest.find(';') {
                if pos > 0 {
                    out.push(rest[..pos].to_string());
                }
                out.push(";".to_string());
                rest = &rest[pos + 1..];
            }
            if !rest.is_empty() {
                out.push(rest.to_string());
            }
        }
        out
    }
}

/// Dense token vocabulary. Ids 0..3 are reserved for EOS, the `;`
/// separator and OOV; the remaining tokens are numbered in sorted order so
/// that ids do not depend on insertion order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, TokenId>,
}

impl Vocabulary {
    pub const EOS_TOKEN: &'static str = "</s>";
    pub const OOV_TOKEN: &'static str = "<unk>";

    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut sorted: Vec<String> = tokens
            .into_iter()
            .map(Into::into)
            .filter(|t| t != ";" && t != Self::EOS_TOKEN && t != Self::OOV_TOKEN)
            .collect();
        sorted.sort_unstable();
        sorted.dedup();
        let mut all = vec![
            Self::EOS_TOKEN.to_string(),
            ";".to_string(),
            Self::OOV_TOKEN.to_string(),
        ];
        all.extend(sorted);
        Self::from_ordered(all)
    }

    /// Rebuilds a vocabulary from tokens listed in id order.
    pub(crate) fn from_ordered(tokens: Vec<String>) -> Self {
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), TokenId(i as u32)))
            .collect();
        Self { tokens, ids }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id.index()).map(String::as_str)
    }

    /// Ids in ascending order, reserved ones included.
    pub fn ids(&self) -> impl Iterator<Item = TokenId> + '_ {
        (0..self.tokens.len() as u32).map(TokenId)
    }

    pub(crate) fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Maps token strings to ids, sending unseen strings to OOV.
    pub fn encode<S: AsRef<str>>(&self, pieces: &[S]) -> Vec<TokenId> {
        pieces
            .iter()
            .map(|p| self.id(p.as_ref()).unwrap_or(TokenId::OOV))
            .collect()
    }

    pub fn decode(&self, ids: &[TokenId]) -> Vec<&str> {
        ids.iter()
            .map(|&id| self.token(id).unwrap_or(Self::OOV_TOKEN))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_label_into_words_and_separators() {
        let pieces = WordTokenizer.pieces("Windows 10 ; developer ; Microsoft");
        assert_eq!(
            pieces,
            vec!["windows", "10", ";", "developer", ";", "microsoft"]
        );
    }

    #[test]
    fn empty_text_has_no_tokens() {
        assert!(WordTokenizer.pieces("").is_empty());
        assert!(WordTokenizer.pieces("   \t ").is_empty());
    }

    #[test]
    fn fullwidth_digits_normalize() {
        // U+FF11 U+FF10 is full-width "10"
        assert_eq!(WordTokenizer.pieces("\u{ff11}\u{ff10}"), vec!["10"]);
    }

    #[test]
    fn semicolon_always_isolated() {
        assert_eq!(
            WordTokenizer.pieces("a;b ;c;"),
            vec!["a", ";", "b", ";", "c", ";"]
        );
    }

    #[test]
    fn vocabulary_ids_are_dense_and_sorted() {
        let v = Vocabulary::from_tokens(["zeta", "alpha", ";", "alpha"]);
        assert_eq!(v.len(), 5);
        assert_eq!(v.id(";"), Some(TokenId::SEP));
        assert_eq!(v.id("alpha"), Some(TokenId(3)));
        assert_eq!(v.id("zeta"), Some(TokenId(4)));
        assert_eq!(v.encode(&["zeta", "nope"]), vec![TokenId(4), TokenId::OOV]);
    }

    #[test]
    fn detokenize_roundtrips_up_to_whitespace() {
        let text = "Table  Jura ;country;  Switzerland";
        let pieces = WordTokenizer.pieces(text);
        let v = Vocabulary::from_tokens(pieces.clone());
        let ids = v.encode(&pieces);
        let back = WordTokenizer.join(&v.decode(&ids));
        assert_eq!(back, "table jura ; country ; switzerland");
    }
}
