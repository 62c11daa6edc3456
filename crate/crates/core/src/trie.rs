//! Prefix trie over tokenized labels. Drives constrained decoding: at every
//! step only the children of the current node (plus EOS at terminal nodes)
//! may be generated.
//!
//! Nodes live in a flat array with CSR-style child tables, sorted by token
//! id within a node, so the structure is insertion-order independent and
//! serializes without pointer fix-ups.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::binio::{FormatError, Reader, Writer};
use crate::kg::{FactId, KnowledgeGraph, ENGLISH, NULL_LABEL};
use crate::text::{TokenId, Tokenizer, Vocabulary, WordTokenizer};

const MAGIC: &str = "FTRI";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TrieError {
    #[error("label for {0} is empty after tokenization")]
    EmptyLabel(String),
    #[error("prefix leaves the trie at position {position}")]
    InvalidPrefix { position: usize },
    #[error("trie has {0} nodes, more than the u32 node table allows")]
    TooLarge(usize),
    #[error("unsupported tokenizer {0:?}")]
    UnknownTokenizer(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("trie artifact {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(u32);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);
}

/// Result of [`TokenTrie::allowed_next`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Allowed<'a> {
    /// Child tokens, ascending.
    pub tokens: &'a [TokenId],
    pub eos_allowed: bool,
}

/// A child link that also carries the child's own child range, so a walk
/// reads one array per step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Edge {
    token: TokenId,
    node: u32,
    start: u32,
    end: u32,
    terminal: bool,
}

fn link_edges(
    child_start: &[u32],
    child_tokens: &[TokenId],
    child_nodes: &[u32],
    payload_start: &[u32],
) -> Vec<Edge> {
    child_tokens
        .iter()
        .zip(child_nodes)
        .map(|(&token, &node)| {
            let n = node as usize;
            Edge {
                token,
                node,
                start: child_start[n],
                end: child_start[n + 1],
                terminal: payload_start[n] < payload_start[n + 1],
            }
        })
        .collect()
}

#[derive(Clone)]
pub struct TokenTrie {
    tokenizer: Arc<dyn Tokenizer>,
    vocab: Vocabulary,
    child_start: Vec<u32>,
    child_tokens: Vec<TokenId>,
    edges: Vec<Edge>,
    payload_start: Vec<u32>,
    payload: Vec<u32>,
    ids: Vec<String>,
}

impl std::fmt::Debug for TokenTrie {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TokenTrie")
            .field("tokenizer", &self.tokenizer.name())
            .field("nodes", &self.node_count())
            .field("vocab", &self.vocab.len())
            .field("ids", &self.ids.len())
            .finish()
    }
}

impl PartialEq for TokenTrie {
    fn eq(&self, other: &Self) -> bool {
        self.tokenizer.name() == other.tokenizer.name()
            && self.vocab == other.vocab
            && self.child_start == other.child_start
            && self.child_tokens == other.child_tokens
            && self.edges == other.edges
            && self.payload_start == other.payload_start
            && self.payload == other.payload
            && self.ids == other.ids
    }
}

/// Interns strings into dense temporary ids.
#[derive(Default)]
struct Interner {
    ids: HashMap<String, u32>,
    items: Vec<String>,
}

impl Interner {
    fn intern(&mut self, s: String) -> u32 {
        if let Some(&id) = self.ids.get(&s) {
            return id;
        }
        let id = self.items.len() as u32;
        self.ids.insert(s.clone(), id);
        self.items.push(s);
        id
    }
}

impl TokenTrie {
    /// Builds a word-level trie from `(label, id)` pairs.
    pub fn build<I, S, T>(labels: I) -> Result<Self, TrieError>
    where
        I: IntoIterator<Item = (S, T)>,
        S: AsRef<str>,
        T: Into<String>,
    {
        Self::build_with(Arc::new(WordTokenizer), labels)
    }

    pub fn build_with<I, S, T>(tokenizer: Arc<dyn Tokenizer>, labels: I) -> Result<Self, TrieError>
    where
        I: IntoIterator<Item = (S, T)>,
        S: AsRef<str>,
        T: Into<String>,
    {
        let mut tokens = Interner::default();
        let mut ids = Interner::default();
        let mut seqs: Vec<(Vec<u32>, u32)> = Vec::new();
        for (label, id) in labels {
            let id: String = id.into();
            let pieces = tokenizer.pieces(label.as_ref());
            if pieces.is_empty() {
                return Err(TrieError::EmptyLabel(id));
            }
            let seq = pieces.into_iter().map(|p| tokens.intern(p)).collect();
            seqs.push((seq, ids.intern(id)));
        }

        let vocab = Vocabulary::from_tokens(tokens.items.iter().cloned());
        let token_remap: Vec<u32> = tokens
            .items
            .iter()
            .map(|t| vocab.id(t).expect("interned token in vocabulary").0)
            .collect();
        let mut sorted_ids = ids.items.clone();
        sorted_ids.sort_unstable();
        let id_rank: HashMap<&str, u32> = sorted_ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i as u32))
            .collect();
        let id_remap: Vec<u32> = ids.items.iter().map(|s| id_rank[s.as_str()]).collect();

        for (seq, id) in &mut seqs {
            for t in seq.iter_mut() {
                *t = token_remap[*t as usize];
            }
            *id = id_remap[*id as usize];
        }
        seqs.sort_unstable();
        seqs.dedup();

        let mut children: Vec<Vec<(u32, u32)>> = vec![Vec::new()];
        let mut terminals: Vec<(u32, u32)> = Vec::with_capacity(seqs.len());
        let mut stack: Vec<u32> = vec![0];
        let mut prev: &[u32] = &[];
        for (seq, id) in &seqs {
            let lcp = prev.iter().zip(seq).take_while(|(a, b)| a == b).count();
            stack.truncate(lcp + 1);
            for &tok in &seq[lcp..] {
                let parent = *stack.last().unwrap() as usize;
                let node = children.len() as u32;
                children.push(Vec::new());
                children[parent].push((tok, node));
                stack.push(node);
            }
            terminals.push((*stack.last().unwrap(), *id));
            prev = seq;
        }
        if children.len() > u32::MAX as usize {
            return Err(TrieError::TooLarge(children.len()));
        }

        let nodes = children.len();
        let mut child_start = Vec::with_capacity(nodes + 1);
        let mut child_tokens = Vec::new();
        let mut child_nodes = Vec::new();
        child_start.push(0u32);
        for list in &children {
            for &(tok, node) in list {
                child_tokens.push(TokenId(tok));
                child_nodes.push(node);
            }
            child_start.push(child_tokens.len() as u32);
        }
        drop(children);

        let mut counts = vec![0u32; nodes + 1];
        for &(node, _) in &terminals {
            counts[node as usize + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let payload_start = counts.clone();
        let edges = link_edges(&child_start, &child_tokens, &child_nodes, &payload_start);
        drop(child_nodes);
        let mut payload = vec![0u32; terminals.len()];
        let mut cursor = counts;
        for &(node, id) in &terminals {
            let slot = &mut cursor[node as usize];
            payload[*slot as usize] = id;
            *slot += 1;
        }

        Ok(Self {
            tokenizer,
            vocab,
            child_start,
            child_tokens,
            edges,
            payload_start,
            payload,
            ids: sorted_ids,
        })
    }

    /// Trie over the English labels of all facts plus the NULL label.
    pub fn for_facts(kg: &KnowledgeGraph) -> Result<Self, TrieError> {
        let labels = (0..kg.fact_count())
            .filter_map(|p| kg.label_at(p, ENGLISH))
            .map(|l| (l.text, l.fact.as_str().to_string()))
            .chain(std::iter::once((
                NULL_LABEL.to_string(),
                FactId::NULL.to_string(),
            )));
        Self::build(labels)
    }

    pub fn tokenizer(&self) -> &dyn Tokenizer {
        self.tokenizer.as_ref()
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn node_count(&self) -> usize {
        self.child_start.len() - 1
    }

    /// Distinct payload ids stored anywhere in the trie.
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Tokenizes with the frozen vocabulary; unseen tokens become OOV.
    pub fn tokenize(&self, text: &str) -> Vec<TokenId> {
        self.vocab.encode(&self.tokenizer.pieces(text))
    }

    pub fn detokenize(&self, tokens: &[TokenId]) -> String {
        self.tokenizer.join(&self.vocab.decode(tokens))
    }

    fn child_range(&self, node: NodeId) -> std::ops::Range<usize> {
        let n = node.0 as usize;
        self.child_start[n] as usize..self.child_start[n + 1] as usize
    }

    pub fn children(&self, node: NodeId) -> &[TokenId] {
        &self.child_tokens[self.child_range(node)]
    }

    fn find_edge(&self, range: std::ops::Range<usize>, token: TokenId) -> Option<&Edge> {
        let edges = &self.edges[range];
        edges
            .binary_search_by_key(&token, |e| e.token)
            .ok()
            .map(|i| &edges[i])
    }

    pub fn child(&self, node: NodeId, token: TokenId) -> Option<NodeId> {
        self.find_edge(self.child_range(node), token)
            .map(|e| NodeId(e.node))
    }

    /// Edge into the node reached by `prefix` (`None` for the root), or the
    /// position of the first token that leaves the trie.
    fn descend(&self, prefix: &[TokenId]) -> Result<Option<&Edge>, usize> {
        let mut last: Option<&Edge> = None;
        for (position, &tok) in prefix.iter().enumerate() {
            let range = match last {
                Some(e) => e.start as usize..e.end as usize,
                None => self.child_range(NodeId::ROOT),
            };
            last = Some(self.find_edge(range, tok).ok_or(position)?);
        }
        Ok(last)
    }

    pub fn walk(&self, prefix: &[TokenId]) -> Option<NodeId> {
        match self.descend(prefix).ok()? {
            Some(e) => Some(NodeId(e.node)),
            None => Some(NodeId::ROOT),
        }
    }

    fn payload_range(&self, node: NodeId) -> std::ops::Range<usize> {
        let n = node.0 as usize;
        self.payload_start[n] as usize..self.payload_start[n + 1] as usize
    }

    pub fn is_terminal(&self, node: NodeId) -> bool {
        !self.payload_range(node).is_empty()
    }

    /// Ids stored at `node`, ascending.
    pub fn terminal_ids(&self, node: NodeId) -> impl Iterator<Item = &str> + '_ {
        self.payload[self.payload_range(node)]
            .iter()
            .map(move |&i| self.ids[i as usize].as_str())
    }

    pub fn allowed_at(&self, node: NodeId) -> Allowed<'_> {
        Allowed {
            tokens: self.children(node),
            eos_allowed: self.is_terminal(node),
        }
    }

    /// Tokens that may follow `prefix`, and whether `prefix` is a complete label.
    pub fn allowed_next(&self, prefix: &[TokenId]) -> Result<Allowed<'_>, TrieError> {
        match self
            .descend(prefix)
            .map_err(|position| TrieError::InvalidPrefix { position })?
        {
            Some(e) => Ok(Allowed {
                tokens: &self.child_tokens[e.start as usize..e.end as usize],
                eos_allowed: e.terminal,
            }),
            None => Ok(self.allowed_at(NodeId::ROOT)),
        }
    }

    /// Ids whose label is exactly `tokens`; empty for anything else.
    pub fn resolve(&self, tokens: &[TokenId]) -> Vec<&str> {
        match self.walk(tokens) {
            Some(node) => self.terminal_ids(node).collect(),
            None => Vec::new(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(MAGIC.as_bytes());
        w.u32(VERSION);
        w.u64(self.node_count() as u64);
        w.u32s(&self.child_start);
        w.u64(self.child_tokens.len() as u64);
        for t in &self.child_tokens {
            w.u32(t.0);
        }
        let child_nodes: Vec<u32> = self.edges.iter().map(|e| e.node).collect();
        w.u32s(&child_nodes);
        w.u32s(&self.payload_start);
        w.u64(self.payload.len() as u64);
        w.u32s(&self.payload);
        w.u64(self.ids.len() as u64);
        for id in &self.ids {
            w.str(id);
        }
        w.str(self.tokenizer.name());
        w.u64(self.vocab.len() as u64);
        for t in self.vocab.tokens() {
            w.str(t);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TrieError> {
        let mut r = Reader::new(bytes);
        r.magic(MAGIC)?;
        let version = r.u32()?;
        if version != VERSION {
            return Err(FormatError::Version(version).into());
        }
        let nodes = r.len()?;
        let child_start = r.u32s(nodes + 1)?;
        let edges = r.len()?;
        let child_tokens: Vec<TokenId> = r.u32s(edges)?.into_iter().map(TokenId).collect();
        let child_nodes = r.u32s(edges)?;
        let payload_start = r.u32s(nodes + 1)?;
        let payload_len = r.len()?;
        let payload = r.u32s(payload_len)?;
        let id_count = r.len()?;
        let ids = (0..id_count)
            .map(|_| r.str())
            .collect::<Result<Vec<_>, _>>()?;
        let tokenizer = r.str()?;
        if tokenizer != WordTokenizer::NAME {
            return Err(TrieError::UnknownTokenizer(tokenizer));
        }
        let vocab_len = r.len()?;
        let tokens = (0..vocab_len)
            .map(|_| r.str())
            .collect::<Result<Vec<_>, _>>()?;
        r.finish()?;

        let corrupt = |m: &str| TrieError::Format(FormatError::Corrupt(m.to_string()));
        let monotone = |v: &[u32], end: usize| {
            v.first() == Some(&0)
                && v.windows(2).all(|w| w[0] <= w[1])
                && v.last().map(|&x| x as usize) == Some(end)
        };
        if !monotone(&child_start, edges) || !monotone(&payload_start, payload_len) {
            return Err(corrupt("offset table"));
        }
        if child_nodes.iter().any(|&n| n as usize >= nodes)
            || payload.iter().any(|&i| i as usize >= ids.len())
            || child_tokens.iter().any(|t| t.index() >= tokens.len())
        {
            return Err(corrupt("reference out of range"));
        }
        let edges = link_edges(&child_start, &child_tokens, &child_nodes, &payload_start);
        Ok(Self {
            tokenizer: Arc::new(WordTokenizer),
            vocab: Vocabulary::from_ordered(tokens),
            child_start,
            child_tokens,
            edges,
            payload_start,
            payload,
            ids,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), TrieError> {
        fs::write(path, self.to_bytes()).map_err(|source| TrieError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, TrieError> {
        let bytes = fs::read(path).map_err(|source| TrieError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}
