use std::collections::BTreeMap;

use super::EncodedPair;
use crate::error::{Error, Result};

/// Adjacent-pair counts over encoded responses, including the pair that
/// ends at `<eos>`. Pairs never span two responses.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BigramTable {
    rows: BTreeMap<usize, BTreeMap<usize, u64>>,
    row_totals: BTreeMap<usize, u64>,
}

impl BigramTable {
    pub fn build(corpus: &[EncodedPair]) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut table = BigramTable::default();
        for pair in corpus {
            for w in pair.response.windows(2) {
                *table.rows.entry(w[0]).or_default().entry(w[1]).or_default() += 1;
                *table.row_totals.entry(w[0]).or_default() += 1;
            }
        }
        Ok(table)
    }

    pub fn count(&self, u: usize, v: usize) -> u64 {
        self.rows
            .get(&u)
            .and_then(|r| r.get(&v))
            .copied()
            .unwrap_or(0)
    }

    pub fn row_total(&self, u: usize) -> u64 {
        self.row_totals.get(&u).copied().unwrap_or(0)
    }

    /// Normalized successor distribution `f(u, ·)` as sparse `(v, f)` pairs;
    /// empty when `u` never starts a bigram.
    pub fn successor_distribution(&self, u: usize) -> Vec<(usize, f64)> {
        let total = self.row_total(u);
        match self.rows.get(&u) {
            Some(row) if total > 0 => row
                .iter()
                .map(|(&v, &c)| (v, c as f64 / total as f64))
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), u64)> + '_ {
        self.rows
            .iter()
            .flat_map(|(&u, row)| row.iter().map(move |(&v, &c)| ((u, v), c)))
    }
}
