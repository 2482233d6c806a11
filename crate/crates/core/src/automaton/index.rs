//! The token-level lift of a character DFA.
//!
//! For each live state the index stores the set of tokens whose full text
//! can be read without leaving the live set, and the state each such token
//! leads to. End-of-sequence is allowed exactly in accepting states; other
//! special tokens are never allowed.

use std::sync::Arc;

use super::dfa::Dfa;
use super::mask::TokenMask;
use super::vocab::Vocabulary;
use super::{AutomatonError, StateId};

#[derive(Debug, Clone)]
struct StateRow {
    mask: TokenMask,
    /// Sorted by token id.
    next: Vec<(u32, StateId)>,
}

#[derive(Debug, Clone)]
pub struct TokenIndex {
    dfa: Dfa,
    vocab: Arc<Vocabulary>,
    eos_id: u32,
    vocab_size: usize,
    rows: Vec<Option<StateRow>>,
}

/// Prefix tree over token texts; children are sorted by character.
struct Trie {
    children: Vec<Vec<(char, u32)>>,
    tokens: Vec<Vec<u32>>,
}

impl Trie {
    fn build(vocab: &Vocabulary) -> Self {
        let mut entries: Vec<(&str, u32)> = vocab
            .tokens()
            .iter()
            .filter(|t| !t.special && !t.text.is_empty())
            .map(|t| (t.text.as_str(), t.id))
            .collect();
        entries.sort_unstable();
        let mut trie = Trie {
            children: vec![Vec::new()],
            tokens: vec![Vec::new()],
        };
        for (text, id) in entries {
            let mut node = 0usize;
            for c in text.chars() {
                // Sorted insertion order means an existing child is always the last one.
                node = match trie.children[node].last() {
                    Some(&(last, child)) if last == c => child as usize,
                    _ => {
                        let child = trie.children.len();
                        trie.children.push(Vec::new());
                        trie.tokens.push(Vec::new());
                        trie.children[node].push((c, child as u32));
                        child
                    }
                };
            }
            trie.tokens[node].push(id);
        }
        trie
    }
}

impl TokenIndex {
    pub fn build(dfa: Dfa, vocab: &Vocabulary) -> Self {
        Self::build_shared(dfa, Arc::new(vocab.clone()))
    }

    pub fn build_shared(dfa: Dfa, vocab: Arc<Vocabulary>) -> Self {
        let trie = Trie::build(&vocab);
        let vocab_size = vocab.len();
        let eos_id = vocab.eos_id();
        let mut rows: Vec<Option<StateRow>> = Vec::with_capacity(dfa.len());
        let mut stack: Vec<(u32, StateId)> = Vec::new();
        for q in 0..dfa.len() as StateId {
            if !dfa.is_live(q) {
                rows.push(None);
                continue;
            }
            let mut mask = TokenMask::empty(vocab_size);
            let mut next: Vec<(u32, StateId)> = Vec::new();
            stack.clear();
            stack.push((0, q));
            while let Some((node, s)) = stack.pop() {
                for &id in &trie.tokens[node as usize] {
                    mask.insert(id);
                    next.push((id, s));
                }
                // Merge-walk sorted children against sorted transition ranges.
                let transitions = dfa.transitions(s);
                let mut j = 0;
                for &(c, child) in &trie.children[node as usize] {
                    let code = c as u32;
                    while j < transitions.len() && transitions[j].hi < code {
                        j += 1;
                    }
                    let Some(t) = transitions.get(j) else { break };
                    if t.lo <= code && dfa.is_live(t.to) {
                        stack.push((child, t.to));
                    }
                }
            }
            if dfa.is_accepting(q) {
                mask.insert(eos_id);
            }
            next.sort_unstable();
            rows.push(Some(StateRow { mask, next }));
        }
        Self {
            dfa,
            vocab,
            eos_id,
            vocab_size,
            rows,
        }
    }

    pub fn dfa(&self) -> &Dfa {
        &self.dfa
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn start(&self) -> StateId {
        self.dfa.start()
    }

    pub fn eos_id(&self) -> u32 {
        self.eos_id
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn is_live(&self, state: StateId) -> bool {
        self.rows.get(state as usize).is_some_and(Option::is_some)
    }

    pub fn eos_allowed(&self, state: StateId) -> bool {
        self.is_live(state) && self.dfa.is_accepting(state)
    }

    fn row(&self, state: StateId) -> Result<&StateRow, AutomatonError> {
        self.rows
            .get(state as usize)
            .and_then(Option::as_ref)
            .ok_or(AutomatonError::DeadState(state))
    }

    /// Allowed tokens in `state`, with the eos bit set iff `state` accepts.
    pub fn allowed_mask(&self, state: StateId) -> Result<&TokenMask, AutomatonError> {
        self.row(state).map(|r| &r.mask)
    }

    pub fn next(&self, state: StateId, token: u32) -> Option<StateId> {
        let row = self.row(state).ok()?;
        row.next
            .binary_search_by_key(&token, |&(id, _)| id)
            .ok()
            .map(|i| row.next[i].1)
    }

    /// Advances by one non-eos token.
    pub fn step(&self, state: StateId, token: u32) -> Result<StateId, AutomatonError> {
        self.row(state)?;
        self.next(state, token)
            .ok_or(AutomatonError::TokenNotAllowed { state, token })
    }

    /// Allowed `(token, destination)` pairs for a live state, by token id.
    pub fn transitions(&self, state: StateId) -> Result<&[(u32, StateId)], AutomatonError> {
        self.row(state).map(|r| r.next.as_slice())
    }

    pub fn live_states(&self) -> impl Iterator<Item = StateId> + '_ {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_some())
            .map(|(i, _)| i as StateId)
    }

    /// Total number of stored (state, token) transitions.
    pub fn entry_count(&self) -> usize {
        self.rows.iter().flatten().map(|r| r.next.len()).sum()
    }
}

pub fn build_token_index(dfa: Dfa, vocab: &Vocabulary) -> TokenIndex {
    TokenIndex::build(dfa, vocab)
}
