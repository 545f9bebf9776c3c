//! Per-style pointwise mutual information over response tokens and the
//! stylistic/neutral split derived from it.
//!
//! Probabilities are token-occurrence frequencies over response tokens
//! (queries and reserved tokens excluded):
//! `p(x,s) = n(x,s)/n`, `p(x) = n(x)/n`, `p(s) = n(s)/n`, and
//! `PMI(x;s) = ln(p(x,s) / (p(x) p(s)))`. A token is stylistic for `s` when
//! its PMI reaches `t_s = 0.75 * max_x PMI(x;s)`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{EncodedPair, StyleSet, Vocabulary};
use crate::error::{Error, Result};

/// PMI assigned where the joint count is zero (the estimate would be -inf).
pub const PMI_FLOOR: f64 = -20.0;

/// Fraction of the per-style maximum PMI used as the stylistic threshold.
pub const THRESHOLD_FRACTION: f64 = 0.75;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    /// Raw occurrence frequencies; zero joint counts take [`PMI_FLOOR`].
    #[default]
    None,
    /// Add one to every (content token, style) count before forming ratios.
    AddOne,
}

/// Occurrence counts over response tokens, dense over `vocab_size x n_styles`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountStats {
    n_styles: usize,
    token_style: Vec<u64>,
    token: Vec<u64>,
    style_mass: Vec<u64>,
    total: u64,
}

impl CountStats {
    pub fn count(corpus: &[EncodedPair], vocab_size: usize, n_styles: usize) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut stats = CountStats {
            n_styles,
            token_style: vec![0; vocab_size * n_styles],
            token: vec![0; vocab_size],
            style_mass: vec![0; n_styles],
            total: 0,
        };
        for pair in corpus {
            if pair.style >= n_styles {
                return Err(Error::Config(format!("style id {} out of range", pair.style)));
            }
            for &x in &pair.response {
                if Vocabulary::is_reserved(x) {
                    continue;
                }
                if x >= vocab_size {
                    return Err(Error::TokenOutOfRange { id: x, size: vocab_size });
                }
                stats.token_style[x * n_styles + pair.style] += 1;
                stats.token[x] += 1;
                stats.style_mass[pair.style] += 1;
                stats.total += 1;
            }
        }
        Ok(stats)
    }

    pub fn token_style_count(&self, x: usize, s: usize) -> u64 {
        self.token_style[x * self.n_styles + s]
    }

    pub fn token_count(&self, x: usize) -> u64 {
        self.token[x]
    }

    pub fn style_token_mass(&self, s: usize) -> u64 {
        self.style_mass[s]
    }

    pub fn total_tokens(&self) -> u64 {
        self.total
    }

    pub fn p_joint(&self, x: usize, s: usize) -> f64 {
        self.token_style_count(x, s) as f64 / self.total as f64
    }

    pub fn p_token(&self, x: usize) -> f64 {
        self.token_count(x) as f64 / self.total as f64
    }

    pub fn p_style(&self, s: usize) -> f64 {
        self.style_token_mass(s) as f64 / self.total as f64
    }
}

/// Natural-log PMI of content token `x` with style `s`.
pub fn pmi(x: usize, s: usize, stats: &CountStats, smoothing: Smoothing, n_content: usize) -> f64 {
    let (joint, token, mass, total) = match smoothing {
        Smoothing::None => (
            stats.token_style_count(x, s) as f64,
            stats.token_count(x) as f64,
            stats.style_token_mass(s) as f64,
            stats.total_tokens() as f64,
        ),
        Smoothing::AddOne => {
            let k = stats.n_styles as f64;
            (
                stats.token_style_count(x, s) as f64 + 1.0,
                stats.token_count(x) as f64 + k,
                stats.style_token_mass(s) as f64 + n_content as f64,
                stats.total_tokens() as f64 + n_content as f64 * k,
            )
        }
    };
    if joint == 0.0 || token == 0.0 || mass == 0.0 {
        return PMI_FLOOR;
    }
    // p(x,s)/(p(x)p(s)) = n(x,s) n / (n(x) n(s))
    ((joint * total) / (token * mass)).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleLexicon {
    style_names: Vec<String>,
    vocab_size: usize,
    pmi: Vec<f64>,
    threshold: Vec<f64>,
    stylistic: Vec<bool>,
}

impl StyleLexicon {
    pub fn build(corpus: &[EncodedPair], vocab: &Vocabulary, styles: &StyleSet) -> Result<Self> {
        Self::build_with(corpus, vocab, styles, Smoothing::None)
    }

    pub fn build_with(
        corpus: &[EncodedPair],
        vocab: &Vocabulary,
        styles: &StyleSet,
        smoothing: Smoothing,
    ) -> Result<Self> {
        let n_styles = styles.len();
        let stats = CountStats::count(corpus, vocab.len(), n_styles)?;
        let mut responses = vec![0usize; n_styles];
        for p in corpus {
            responses[p.style] += 1;
        }
        if let Some(s) = responses.iter().position(|&n| n == 0) {
            return Err(Error::EmptyStyle(styles.names()[s].clone()));
        }

        let n_content = vocab.content_ids().len();
        let mut pmi_table = vec![PMI_FLOOR; vocab.len() * n_styles];
        for x in vocab.content_ids() {
            for s in 0..n_styles {
                pmi_table[x * n_styles + s] = pmi(x, s, &stats, smoothing, n_content);
            }
        }
        let observed: Vec<usize> = vocab
            .content_ids()
            .filter(|&x| smoothing == Smoothing::AddOne || stats.token_count(x) > 0)
            .collect();
        let threshold = (0..n_styles)
            .map(|s| {
                let max = observed
                    .iter()
                    .map(|&x| pmi_table[x * n_styles + s])
                    .fold(f64::NEG_INFINITY, f64::max);
                THRESHOLD_FRACTION * max
            })
            .collect();
        Ok(Self::from_parts(
            styles.names().to_vec(),
            vocab.len(),
            pmi_table,
            threshold,
        ))
    }

    fn from_parts(
        style_names: Vec<String>,
        vocab_size: usize,
        pmi: Vec<f64>,
        threshold: Vec<f64>,
    ) -> Self {
        let n_styles = style_names.len();
        let stylistic = (0..vocab_size * n_styles)
            .map(|i| !Vocabulary::is_reserved(i / n_styles) && pmi[i] >= threshold[i % n_styles])
            .collect();
        StyleLexicon {
            style_names,
            vocab_size,
            pmi,
            threshold,
            stylistic,
        }
    }

    pub fn n_styles(&self) -> usize {
        self.style_names.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn style_names(&self) -> &[String] {
        &self.style_names
    }

    pub fn pmi(&self, x: usize, s: usize) -> f64 {
        if x >= self.vocab_size || Vocabulary::is_reserved(x) {
            return PMI_FLOOR;
        }
        self.pmi[x * self.n_styles() + s]
    }

    pub fn threshold(&self, s: usize) -> f64 {
        self.threshold[s]
    }

    /// False for reserved and out-of-range ids.
    pub fn is_stylistic(&self, x: usize, s: usize) -> bool {
        x < self.vocab_size && self.stylistic[x * self.n_styles() + s]
    }

    /// Content-token ids flagged stylistic for `s`.
    pub fn stylistic_ids(&self, s: usize) -> Vec<usize> {
        (0..self.vocab_size).filter(|&x| self.is_stylistic(x, s)).collect()
    }

    /// Writes the TSV table and a `{style: t_s}` JSON sidecar.
    pub fn save(&self, vocab: &Vocabulary, tsv: &Path, thresholds: &Path) -> Result<()> {
        let mut out = String::from("token\tstyle_name\tpmi\tis_stylistic\n");
        for x in vocab.content_ids() {
            for (s, name) in self.style_names.iter().enumerate() {
                out.push_str(&format!(
                    "{}\t{}\t{:.9}\t{}\n",
                    vocab.surface(x),
                    name,
                    self.pmi(x, s),
                    u8::from(self.is_stylistic(x, s))
                ));
            }
        }
        fs::write(tsv, out).map_err(|e| Error::io(tsv, e))?;
        let map: BTreeMap<&str, f64> = self
            .style_names
            .iter()
            .map(String::as_str)
            .zip(self.threshold.iter().copied())
            .collect();
        let json = serde_json::to_string_pretty(&map).map_err(|e| Error::json(thresholds, e))?;
        fs::write(thresholds, json).map_err(|e| Error::io(thresholds, e))
    }

    /// Reads a table written by [`StyleLexicon::save`]. Stylistic flags come
    /// from the file; PMI values carry the stored 9-decimal precision.
    pub fn load(
        vocab: &Vocabulary,
        styles: &StyleSet,
        tsv: &Path,
        thresholds: &Path,
    ) -> Result<Self> {
        let text = fs::read_to_string(tsv).map_err(|e| Error::io(tsv, e))?;
        let n_styles = styles.len();
        let mut pmi_table = vec![PMI_FLOOR; vocab.len() * n_styles];
        let mut stylistic = vec![false; vocab.len() * n_styles];
        let mut lines = text.lines().enumerate();
        let row_err = |line: usize, reason: String| Error::Parse {
            path: tsv.to_path_buf(),
            line,
            reason,
        };
        match lines.next() {
            Some((_, "token\tstyle_name\tpmi\tis_stylistic")) => {}
            _ => return Err(row_err(1, "missing or malformed header".into())),
        }
        for (i, line) in lines {
            let fields: Vec<&str> = line.split('\t').collect();
            let [token, style, value, flag] = fields[..] else {
                return Err(row_err(i + 1, format!("expected 4 columns, found {}", fields.len())));
            };
            if !vocab.contains(token) || Vocabulary::is_reserved_surface(token) {
                return Err(row_err(i + 1, format!("token `{token}` not in vocabulary")));
            }
            let s = styles.by_name(style).map_err(|e| row_err(i + 1, e.to_string()))?.id;
            let value: f64 = value
                .parse()
                .map_err(|_| row_err(i + 1, format!("bad pmi `{value}`")))?;
            let flag = match flag {
                "0" => false,
                "1" => true,
                other => return Err(row_err(i + 1, format!("bad flag `{other}`"))),
            };
            let idx = vocab.id(token) * n_styles + s;
            pmi_table[idx] = value;
            stylistic[idx] = flag;
        }

        let json = fs::read_to_string(thresholds).map_err(|e| Error::io(thresholds, e))?;
        let map: BTreeMap<String, f64> =
            serde_json::from_str(&json).map_err(|e| Error::json(thresholds, e))?;
        let threshold = styles
            .names()
            .iter()
            .map(|n| {
                map.get(n)
                    .copied()
                    .ok_or_else(|| Error::UnknownStyle(n.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(StyleLexicon {
            style_names: styles.names().to_vec(),
            vocab_size: vocab.len(),
            pmi: pmi_table,
            threshold,
            stylistic,
        })
    }
}

/// Precision and recall of the flagged stylistic set for one style against
/// a reference set of token ids. `None` when nothing is flagged.
pub fn recovery(lexicon: &StyleLexicon, s: usize, truth: &[usize]) -> (Option<f64>, f64) {
    let flagged = lexicon.stylistic_ids(s);
    let hits = flagged.iter().filter(|x| truth.contains(x)).count() as f64;
    let precision = (!flagged.is_empty()).then(|| hits / flagged.len() as f64);
    let recall = if truth.is_empty() {
        1.0
    } else {
        hits / truth.len() as f64
    };
    (precision, recall)
}
