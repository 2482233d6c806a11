//! The decoding vocabulary: token texts as Unicode scalar sequences.
//!
//! On disk a vocabulary is a JSON object
//! `{"eos_id": <int>, "tokens": [{"id": <int>, "text": <string>, "special": <bool>}, ...]}`.
//! Byte-level tokenizers must be presented pre-decoded to text.

use std::hash::{Hash, Hasher};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("vocabulary is empty")]
    Empty,
    #[error("token ids must be unique and dense in [0, {len}); found {id}")]
    NonDenseIds { id: u32, len: usize },
    #[error("eos id {0} is not in the vocabulary")]
    MissingEos(u32),
    #[error("eos token {0} must be marked special")]
    EosNotSpecial(u32),
    #[error("invalid vocabulary file: {0}")]
    Format(#[from] serde_json::Error),
    #[error("reading vocabulary: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub id: u32,
    pub text: String,
    #[serde(default)]
    pub special: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Vocabulary {
    tokens: Vec<Token>,
    eos_id: u32,
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    eos_id: u32,
    tokens: Vec<Token>,
}

impl Vocabulary {
    pub fn new(mut tokens: Vec<Token>, eos_id: u32) -> Result<Self, VocabError> {
        if tokens.is_empty() {
            return Err(VocabError::Empty);
        }
        tokens.sort_by_key(|t| t.id);
        let len = tokens.len();
        for (i, t) in tokens.iter().enumerate() {
            if t.id as usize != i {
                return Err(VocabError::NonDenseIds { id: t.id, len });
            }
        }
        let eos = tokens.get(eos_id as usize).ok_or(VocabError::MissingEos(eos_id))?;
        if !eos.special {
            return Err(VocabError::EosNotSpecial(eos_id));
        }
        Ok(Self { tokens, eos_id })
    }

    /// Ordinary tokens from `texts` (ids in order), then a special `</s>`
    /// end-of-sequence token.
    pub fn from_texts<S: AsRef<str>>(texts: &[S]) -> Self {
        let mut tokens: Vec<Token> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Token {
                id: i as u32,
                text: t.as_ref().to_string(),
                special: false,
            })
            .collect();
        let eos_id = tokens.len() as u32;
        tokens.push(Token {
            id: eos_id,
            text: "</s>".into(),
            special: true,
        });
        Self::new(tokens, eos_id).expect("constructed densely with special eos")
    }

    /// Every printable ASCII character as its own token, a handful of JSON
    /// fragments and common words, then `</s>`.
    pub fn default_ascii() -> Self {
        let mut texts: Vec<String> = (0x20u8..0x7F).map(|b| (b as char).to_string()).collect();
        for frag in [
            "{\"", "\": ", "\": \"", "\", \"", "\"}", ", \"", "\\n", "\\\"", "\\u00", "1_reasoning",
            "2_answer", "reasoning", "answer", "the", "The", " the", " of", " and", " is", " a",
            " to", " in", "ing", "tion", "er", "ed", " document", " answer", "00", "20",
        ] {
            texts.push(frag.to_string());
        }
        Self::from_texts(&texts)
    }

    pub fn from_json(text: &str) -> Result<Self, VocabError> {
        let file: VocabularyFile = serde_json::from_str(text)?;
        Self::new(file.tokens, file.eos_id)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, VocabError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&VocabularyFile {
            eos_id: self.eos_id,
            tokens: self.tokens.clone(),
        })
        .expect("vocabulary serialization is infallible")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn eos_id(&self) -> u32 {
        self.eos_id
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn get(&self, id: u32) -> Option<&Token> {
        self.tokens.get(id as usize)
    }

    /// Text contributed to the output by `id`; special tokens contribute nothing.
    pub fn text(&self, id: u32) -> &str {
        match self.get(id) {
            Some(t) if !t.special => &t.text,
            _ => "",
        }
    }

    pub fn decode(&self, ids: &[u32]) -> String {
        ids.iter().map(|&id| self.text(id)).collect()
    }

    /// Stable within one build; used as a cache key.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.hash(&mut h);
        h.finish()
    }
}
