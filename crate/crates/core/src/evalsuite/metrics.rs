use std::collections::HashSet;
use std::hash::Hash;

use super::conflict::ConflictMatrix;
use crate::corpus::{EncodedPair, EOS};
use crate::error::{Error, Result};
use crate::lexicon::StyleLexicon;
use crate::models::{Seq2SeqModel, StyleClassifier};

/// Distinct n-grams over all n-grams in the whole response set.
pub fn distinct_n<T, R>(responses: &[R], n: usize) -> Result<f64>
where
    T: Eq + Hash,
    R: AsRef<[T]>,
{
    if n == 0 {
        return Err(Error::Config("n must be >= 1".into()));
    }
    let mut seen = HashSet::new();
    let mut total = 0usize;
    for r in responses {
        for gram in r.as_ref().windows(n) {
            seen.insert(gram);
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::NoNgrams(n));
    }
    Ok(seen.len() as f64 / total as f64)
}

/// Anything that assigns a style id to a response.
pub trait StylePredictor {
    fn style_names(&self) -> &[String];
    fn predict(&self, response: &[usize]) -> Result<usize>;
}

impl StylePredictor for StyleClassifier {
    fn style_names(&self) -> &[String] {
        StyleClassifier::style_names(self)
    }

    fn predict(&self, response: &[usize]) -> Result<usize> {
        StyleClassifier::predict(self, response)
    }
}

/// Fraction of responses whose predicted style does not conflict with
/// `desired`. A response with no content tokens shows no style and is not
/// accepted.
pub fn a_sar<P: StylePredictor>(
    responses: &[Vec<usize>],
    desired: usize,
    predictor: &P,
    conflicts: &ConflictMatrix,
) -> Result<f64> {
    if responses.is_empty() {
        return Err(Error::EmptyInput("responses"));
    }
    let names = predictor.style_names();
    let desired_name = names
        .get(desired)
        .ok_or_else(|| Error::UnknownStyle(format!("style id {desired}")))?;
    let mut accepted = 0usize;
    for r in responses {
        match predictor.predict(r) {
            Ok(p) => {
                if !conflicts.conflicted(&names[p], desired_name) {
                    accepted += 1;
                }
            }
            Err(Error::EmptyInput(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(accepted as f64 / responses.len() as f64)
}

fn strip_eos(seq: &[usize]) -> &[usize] {
    match seq.split_last() {
        Some((&EOS, rest)) => rest,
        _ => seq,
    }
}

/// Over the neutral positions of each reference (not stylistic for that
/// reference's style), the fraction where the generated token at the same
/// position matches. A trailing `<eos>` is ignored on both sides; positions
/// past the end of a shorter generation count as misses.
pub fn skeleton_retention(
    generated: &[Vec<usize>],
    references: &[Vec<usize>],
    styles: &[usize],
    lexicon: &StyleLexicon,
) -> Result<f64> {
    if references.is_empty() {
        return Err(Error::EmptyInput("references"));
    }
    if generated.len() != references.len() || styles.len() != references.len() {
        return Err(Error::Config(format!(
            "{} generated, {} references and {} styles are not aligned",
            generated.len(),
            references.len(),
            styles.len()
        )));
    }
    let (mut kept, mut total) = (0usize, 0usize);
    for ((g, r), &s) in generated.iter().zip(references).zip(styles) {
        let (g, r) = (strip_eos(g), strip_eos(r));
        for (i, &y) in r.iter().enumerate() {
            if lexicon.is_stylistic(y, s) {
                continue;
            }
            total += 1;
            if g.get(i) == Some(&y) {
                kept += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::EmptyInput("neutral reference positions"));
    }
    Ok(kept as f64 / total as f64)
}

/// `exp(total teacher-forced NLL / total target tokens)`, `<eos>` included.
pub fn perplexity(model: &Seq2SeqModel, corpus: &[EncodedPair]) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let (mut nll, mut tokens) = (0.0, 0usize);
    for pair in corpus {
        nll -= model.sequence_log_prob(&pair.query, &pair.response)?.0;
        tokens += pair.response.len();
    }
    Ok((nll / tokens as f64).exp())
}
