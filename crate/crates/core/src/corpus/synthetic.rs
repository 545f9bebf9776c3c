//! Synthetic dialogue corpus with a planted, known stylistic vocabulary.
//!
//! Each response is a skeleton template of neutral tokens with slot markers;
//! every slot is filled with a token from the pair's own style with
//! probability `slot_fill_bias`, otherwise from another style. The query is
//! the template's neutral tokens in reverse order behind one random neutral
//! token, so the skeleton is recoverable from the query.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DialoguePair, StyleSet, Token};
use crate::error::{Error, Result};

pub const SLOT_MARKER: &str = "_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_styles: usize,
    pub n_neutral_tokens: usize,
    pub n_stylistic_tokens_per_style: usize,
    /// Whitespace-separated neutral token names (`w00`, `w01`, ...) and
    /// slot markers (`_`).
    pub skeleton_templates: Vec<String>,
    pub slot_fill_bias: f64,
    pub corpus_size: usize,
    pub seed: u64,
}

/// Planted stylistic tokens per style, indexed by style id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub stylistic: Vec<Vec<String>>,
    pub neutral: Vec<String>,
}

impl GroundTruth {
    /// TSV rows `token<TAB>style` where style is a style name or `<neutral>`.
    pub fn to_tsv(&self, styles: &StyleSet) -> String {
        let mut out = String::from("token\tstyle\n");
        for (s, tokens) in self.stylistic.iter().enumerate() {
            for t in tokens {
                out.push_str(&format!("{t}\t{}\n", styles.names()[s]));
            }
        }
        for t in &self.neutral {
            out.push_str(&format!("{t}\t<neutral>\n"));
        }
        out
    }
}

impl SyntheticSpec {
    /// Two styles, 20 neutral and 5 stylistic tokens per style, eight
    /// templates whose neutral bigrams, slot predecessors and slot successors
    /// are all distinct across templates.
    pub fn desk_scale(seed: u64) -> Self {
        SyntheticSpec {
            n_styles: 2,
            n_neutral_tokens: 20,
            n_stylistic_tokens_per_style: 5,
            skeleton_templates: [
                "w17 w07 w03 _ w10 w14 _ w15",
                "w10 w05 w12 _ w08 _ w00",
                "w00 w09 _ w06 _ w12 w05",
                "w06 w00 w19 _ w01 _ w03 w02",
                "w05 _ w18 w14 w16 _ w11",
                "w15 _ w13 _ w14 w02 w05",
                "w02 _ w16 w18 w10 _ w04",
                "w11 _ w07 _ w09 w05 w02 w00",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            slot_fill_bias: 0.9,
            corpus_size: 2000,
            seed,
        }
    }

    pub fn neutral_token(i: usize) -> String {
        format!("w{i:02}")
    }

    pub fn stylistic_token(style_name: &str, j: usize) -> String {
        let stem: String = style_name
            .chars()
            .map(|c| if c.is_whitespace() { '-' } else { c })
            .collect();
        format!("{stem}_{j}")
    }

    pub fn validate(&self, styles: &StyleSet) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.corpus_size == 0 {
            return fail("corpus_size must be positive".into());
        }
        if self.n_styles == 0 || self.n_styles != styles.len() {
            return fail(format!(
                "n_styles {} does not match style set of {}",
                self.n_styles,
                styles.len()
            ));
        }
        if !(self.slot_fill_bias > 0.5 && self.slot_fill_bias <= 1.0) {
            return fail(format!("slot_fill_bias {} not in (0.5, 1]", self.slot_fill_bias));
        }
        if self.n_neutral_tokens == 0 || self.n_stylistic_tokens_per_style == 0 {
            return fail("token inventories must be non-empty".into());
        }
        if self.skeleton_templates.is_empty() {
            return fail("no skeleton templates".into());
        }
        for t in &self.skeleton_templates {
            let mut neutral = 0;
            for tok in t.split_whitespace() {
                if tok == SLOT_MARKER {
                    continue;
                }
                match tok.strip_prefix('w').and_then(|n| n.parse::<usize>().ok()) {
                    Some(i) if i < self.n_neutral_tokens && tok == Self::neutral_token(i) => {
                        neutral += 1
                    }
                    _ => return fail(format!("template token `{tok}` is not a neutral token")),
                }
            }
            if neutral == 0 {
                return fail(format!("template `{t}` has no neutral tokens"));
            }
        }
        // planted names must not collide with neutral names
        for name in styles.names() {
            let probe = Self::stylistic_token(name, 0);
            if probe.starts_with('w') && probe[1..].chars().all(|c| c.is_ascii_digit()) {
                return fail(format!("style name `{name}` collides with neutral tokens"));
            }
        }
        Ok(())
    }
}

/// Deterministic in `(spec, styles)`.
pub fn generate_synthetic_corpus(
    spec: &SyntheticSpec,
    styles: &StyleSet,
) -> Result<(Vec<DialoguePair>, GroundTruth)> {
    spec.validate(styles)?;
    let neutral: Vec<String> = (0..spec.n_neutral_tokens)
        .map(SyntheticSpec::neutral_token)
        .collect();
    let planted: Vec<Vec<String>> = styles
        .names()
        .iter()
        .map(|name| {
            (0..spec.n_stylistic_tokens_per_style)
                .map(|j| SyntheticSpec::stylistic_token(name, j))
                .collect()
        })
        .collect();
    let templates: Vec<Vec<&str>> = spec
        .skeleton_templates
        .iter()
        .map(|t| t.split_whitespace().collect())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut pairs = Vec::with_capacity(spec.corpus_size);
    for _ in 0..spec.corpus_size {
        let style = rng.gen_range(0..spec.n_styles);
        let template = &templates[rng.gen_range(0..templates.len())];

        let mut response = Vec::with_capacity(template.len());
        for &tok in template {
            if tok != SLOT_MARKER {
                response.push(Token(tok.to_owned()));
                continue;
            }
            let fill_style = if spec.n_styles == 1 || rng.gen_bool(spec.slot_fill_bias) {
                style
            } else {
                let other = rng.gen_range(0..spec.n_styles - 1);
                if other >= style {
                    other + 1
                } else {
                    other
                }
            };
            let word = planted[fill_style]
                .choose(&mut rng)
                .expect("non-empty planted set");
            response.push(Token(word.clone()));
        }

        let mut query = vec![Token(neutral.choose(&mut rng).expect("neutral").clone())];
        query.extend(
            template
                .iter()
                .rev()
                .filter(|&&t| t != SLOT_MARKER)
                .map(|&t| Token(t.to_owned())),
        );
        let label = styles.label(style).expect("style id in range");
        pairs.push(DialoguePair::new(query, response, label)?);
    }

    Ok((
        pairs,
        GroundTruth {
            stylistic: planted,
            neutral,
        },
    ))
}

/// Number of pairs per style name, in style-id order.
pub fn style_counts(pairs: &[DialoguePair], styles: &StyleSet) -> BTreeMap<String, usize> {
    let mut counts: BTreeMap<String, usize> =
        styles.names().iter().map(|n| (n.clone(), 0)).collect();
    for p in pairs {
        *counts.entry(p.style.name.clone()).or_default() += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;

    fn styles() -> StyleSet {
        StyleSet::new(["male", "female"]).unwrap()
    }

    #[test]
    fn deterministic_under_seed() {
        let spec = SyntheticSpec::desk_scale(11);
        let a = generate_synthetic_corpus(&spec, &styles()).unwrap();
        let b = generate_synthetic_corpus(&spec, &styles()).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_corpus(&SyntheticSpec::desk_scale(12), &styles()).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn full_bias_fills_slots_with_own_style() {
        let spec = SyntheticSpec {
            slot_fill_bias: 1.0,
            corpus_size: 300,
            ..SyntheticSpec::desk_scale(3)
        };
        let (pairs, truth) = generate_synthetic_corpus(&spec, &styles()).unwrap();
        let neutral: HashSet<&str> = truth.neutral.iter().map(String::as_str).collect();
        for p in &pairs {
            let own: HashSet<&str> = truth.stylistic[p.style.id].iter().map(String::as_str).collect();
            for t in &p.response {
                assert!(neutral.contains(t.as_str()) || own.contains(t.as_str()), "{t} in {p:?}");
            }
        }
    }

    #[test]
    fn planted_sets_are_disjoint() {
        let (_, truth) = generate_synthetic_corpus(&SyntheticSpec::desk_scale(0), &styles()).unwrap();
        let mut all = HashSet::new();
        for t in truth.stylistic.iter().flatten().chain(&truth.neutral) {
            assert!(all.insert(t.clone()), "duplicate {t}");
        }
    }

    #[test]
    fn desk_templates_have_distinct_contexts() {
        let spec = SyntheticSpec::desk_scale(0);
        let mut bigrams = HashSet::new();
        let mut preds = HashSet::new();
        for t in &spec.skeleton_templates {
            let toks: Vec<&str> = t.split_whitespace().collect();
            for w in toks.windows(2) {
                if w[1] == SLOT_MARKER {
                    assert!(preds.insert(w[0]), "slot predecessor {} reused", w[0]);
                } else if w[0] != SLOT_MARKER {
                    assert!(bigrams.insert((w[0], w[1])), "bigram {w:?} reused");
                }
            }
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let s = styles();
        let zero = SyntheticSpec {
            corpus_size: 0,
            ..SyntheticSpec::desk_scale(0)
        };
        assert!(generate_synthetic_corpus(&zero, &s).is_err());
        let weak = SyntheticSpec {
            slot_fill_bias: 0.5,
            ..SyntheticSpec::desk_scale(0)
        };
        assert!(generate_synthetic_corpus(&weak, &s).is_err());
        let bad_template = SyntheticSpec {
            skeleton_templates: vec!["w00 foo _".into()],
            ..SyntheticSpec::desk_scale(0)
        };
        assert!(generate_synthetic_corpus(&bad_template, &s).is_err());
    }

    #[test]
    fn labels_match_generating_style() {
        let (pairs, truth) = generate_synthetic_corpus(
            &SyntheticSpec {
                slot_fill_bias: 1.0,
                ..SyntheticSpec::desk_scale(5)
            },
            &styles(),
        )
        .unwrap();
        for p in pairs.iter().take(100) {
            let slot = p
                .response
                .iter()
                .find(|t| !truth.neutral.iter().any(|n| n == t.as_str()))
                .unwrap();
            assert!(truth.stylistic[p.style.id].iter().any(|s| s == slot.as_str()));
        }
    }
}
