use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DialoguePair, Token};
use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const SOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;

/// Reserved surfaces, in index order.
pub const RESERVED: [&str; 4] = ["<pad>", "<sos>", "<eos>", "<unk>"];

/// Shared query/response vocabulary. Reserved tokens occupy the lowest
/// indices; content tokens follow by descending frequency, ties broken
/// lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr")]
pub struct Vocabulary {
    tokens: Vec<String>,
    max_size: usize,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn build(corpus: &[DialoguePair], max_size: usize) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if max_size <= RESERVED.len() {
            return Err(Error::Config(format!(
                "max_size {max_size} leaves no room beyond {} reserved tokens",
                RESERVED.len()
            )));
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for pair in corpus {
            for token in pair.query.iter().chain(&pair.response) {
                *counts.entry(token.as_str()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(t, _)| !Self::is_reserved_surface(t))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(max_size - RESERVED.len());

        let tokens = RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(ranked.into_iter().map(|(t, _)| t.to_owned()))
            .collect();
        Ok(Self::from_tokens(tokens, max_size))
    }

    /// Rebuilds a vocabulary from its full token list (reserved tokens first).
    pub fn from_tokens(tokens: Vec<String>, max_size: usize) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            tokens,
            max_size,
            index,
        }
    }

    pub fn is_reserved_surface(surface: &str) -> bool {
        RESERVED.contains(&surface)
    }

    pub fn is_reserved(id: usize) -> bool {
        id < RESERVED.len()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Content (non-reserved) token ids.
    pub fn content_ids(&self) -> std::ops::Range<usize> {
        RESERVED.len()..self.tokens.len()
    }

    pub fn id(&self, surface: &str) -> usize {
        self.index.get(surface).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, surface: &str) -> bool {
        self.index.contains_key(surface)
    }

    pub fn surface(&self, id: usize) -> &str {
        self.tokens.get(id).map(String::as_str).unwrap_or(RESERVED[UNK])
    }

    pub fn encode(&self, tokens: &[Token]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_str())).collect()
    }

    /// Maps ids back to tokens, dropping every reserved id.
    pub fn decode(&self, ids: &[usize]) -> Vec<Token> {
        ids.iter()
            .filter(|&&id| !Self::is_reserved(id))
            .map(|&id| Token(self.surface(id).to_owned()))
            .collect()
    }

    /// Content digest used to bind checkpoints and lexicons to this vocabulary.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for t in &self.tokens {
            hasher.update(t.as_bytes());
            hasher.update([0u8]);
        }
        hex::encode(hasher.finalize())
    }
}

#[derive(Deserialize)]
struct VocabularyRepr {
    tokens: Vec<String>,
    max_size: usize,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        Vocabulary::from_tokens(r.tokens, r.max_size)
    }
}
