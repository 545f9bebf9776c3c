//! Dialogue data model: tokens, styles, query/response pairs, the shared
//! vocabulary and response bigram statistics.

mod bigram;
mod io;
mod synthetic;
mod vocab;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bigram::BigramTable;
pub use io::{load_corpus, load_style_set, parse_corpus, save_corpus, save_style_set};
pub use synthetic::{generate_synthetic_corpus, style_counts, GroundTruth, SyntheticSpec, SLOT_MARKER};
pub use vocab::{Vocabulary, EOS, PAD, RESERVED, SOS, UNK};

/// One whitespace-delimited word piece.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Token(String);

impl Token {
    pub fn new(surface: impl Into<String>) -> Result<Self> {
        let surface = surface.into();
        if surface.is_empty() || surface.chars().any(char::is_whitespace) {
            return Err(Error::Config(format!("invalid token {surface:?}")));
        }
        Ok(Token(surface))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Splits on runs of whitespace. Case is preserved; empty input yields an
/// empty sequence.
pub fn tokenize(text: &str) -> Vec<Token> {
    text.split_whitespace().map(|s| Token(s.to_owned())).collect()
}

/// Inverse of [`tokenize`] up to whitespace normalization.
pub fn detokenize(tokens: &[Token]) -> String {
    let parts: Vec<&str> = tokens.iter().map(Token::as_str).collect();
    parts.join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StyleLabel {
    pub name: String,
    pub id: usize,
}

/// Ordered set of style names; position defines the style id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StyleSet {
    names: Vec<String>,
}

impl StyleSet {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::Config("style set is empty".into()));
        }
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::Config("empty style name".into()));
            }
            if names[..i].contains(name) {
                return Err(Error::Config(format!("duplicate style name `{name}`")));
            }
        }
        Ok(StyleSet { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn label(&self, id: usize) -> Option<StyleLabel> {
        self.names.get(id).map(|name| StyleLabel {
            name: name.clone(),
            id,
        })
    }

    pub fn by_name(&self, name: &str) -> Result<StyleLabel> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|id| StyleLabel {
                name: name.to_owned(),
                id,
            })
            .ok_or_else(|| Error::UnknownStyle(name.to_owned()))
    }

    pub fn labels(&self) -> impl Iterator<Item = StyleLabel> + '_ {
        (0..self.names.len()).filter_map(|id| self.label(id))
    }
}

/// One training instance: query, reference response and the response's style.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DialoguePair {
    pub query: Vec<Token>,
    pub response: Vec<Token>,
    pub style: StyleLabel,
}

impl DialoguePair {
    pub fn new(query: Vec<Token>, response: Vec<Token>, style: StyleLabel) -> Result<Self> {
        if query.is_empty() {
            return Err(Error::EmptyInput("query"));
        }
        if response.is_empty() {
            return Err(Error::EmptyInput("response"));
        }
        if let Some(t) = response.iter().find(|t| Vocabulary::is_reserved_surface(t.as_str())) {
            return Err(Error::Config(format!("response contains reserved token {t}")));
        }
        Ok(DialoguePair {
            query,
            response,
            style,
        })
    }
}

/// A pair mapped through a [`Vocabulary`]. The response carries a trailing
/// `<eos>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedPair {
    pub query: Vec<usize>,
    pub response: Vec<usize>,
    pub style: usize,
}

impl EncodedPair {
    pub fn encode(pair: &DialoguePair, vocab: &Vocabulary) -> Self {
        let mut response = vocab.encode(&pair.response);
        response.push(EOS);
        EncodedPair {
            query: vocab.encode(&pair.query),
            response,
            style: pair.style.id,
        }
    }
}

pub fn encode_corpus(pairs: &[DialoguePair], vocab: &Vocabulary) -> Vec<EncodedPair> {
    pairs.iter().map(|p| EncodedPair::encode(p, vocab)).collect()
}
