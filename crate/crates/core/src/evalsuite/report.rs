use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const OVERALL: &str = "overall";

const RATIOS: [&str; 4] = ["distinct_1", "distinct_2", "a_sar", "skeleton_retention"];

/// Metrics for one group of generated responses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub distinct_1: f64,
    pub distinct_2: f64,
    pub a_sar: f64,
    pub skeleton_retention: f64,
    pub perplexity: f64,
    pub samples: usize,
}

impl MetricRow {
    fn ratios(&self) -> [f64; 4] {
        [self.distinct_1, self.distinct_2, self.a_sar, self.skeleton_retention]
    }

    fn set_ratio(&mut self, i: usize, v: f64) {
        *[
            &mut self.distinct_1,
            &mut self.distinct_2,
            &mut self.a_sar,
            &mut self.skeleton_retention,
        ][i] = v;
    }
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

/// Per-style rows followed by an `overall` row. Ratios are kept at the four
/// decimal places the CSV carries, so a written report reloads unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub generation_digest: String,
    pub manifest_hash: Option<String>,
    rows: Vec<(String, MetricRow)>,
}

impl EvalReport {
    pub fn new(
        generation_digest: impl Into<String>,
        manifest_hash: Option<String>,
        per_style: Vec<(String, MetricRow)>,
        overall: MetricRow,
    ) -> Result<Self> {
        let mut rows = per_style;
        rows.push((OVERALL.to_string(), overall));
        for (name, row) in &mut rows {
            if name.contains([',', '\n']) {
                return Err(Error::Config(format!("style name {name:?} cannot appear in a report")));
            }
            for (i, v) in row.ratios().into_iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Config(format!("{name}: {} = {v} outside [0, 1]", RATIOS[i])));
                }
                row.set_ratio(i, round4(v));
            }
        }
        Ok(EvalReport {
            generation_digest: generation_digest.into(),
            manifest_hash,
            rows,
        })
    }

    pub fn rows(&self) -> &[(String, MetricRow)] {
        &self.rows
    }

    pub fn row(&self, style: &str) -> Option<&MetricRow> {
        self.rows.iter().find(|(n, _)| n == style).map(|(_, r)| r)
    }

    pub fn overall(&self) -> &MetricRow {
        &self.rows.last().expect("overall row").1
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("style,metric,value\n");
        let _ = writeln!(out, "{OVERALL},generation_digest,{}", self.generation_digest);
        if let Some(h) = &self.manifest_hash {
            let _ = writeln!(out, "{OVERALL},manifest_hash,{h}");
        }
        for (name, row) in &self.rows {
            for (metric, v) in RATIOS.iter().zip(row.ratios()) {
                let _ = writeln!(out, "{name},{metric},{v:.4}");
            }
            let _ = writeln!(out, "{name},perplexity,{}", row.perplexity);
            let _ = writeln!(out, "{name},samples,{}", row.samples);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |line: usize, reason: String| Error::Parse {
            path: PathBuf::from("<report>"),
            line,
            reason,
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "style,metric,value")) => {}
            _ => return Err(bad(1, "missing `style,metric,value` header".into())),
        }
        let mut digest = None;
        let mut manifest_hash = None;
        let mut rows: Vec<(String, MetricRow)> = Vec::new();
        for (i, line) in lines {
            let n = i + 1;
            let mut fields = line.splitn(3, ',');
            let (Some(style), Some(metric), Some(value)) = (fields.next(), fields.next(), fields.next()) else {
                return Err(bad(n, "expected three fields".into()));
            };
            match metric {
                "generation_digest" => digest = Some(value.to_string()),
                "manifest_hash" => manifest_hash = Some(value.to_string()),
                _ => {
                    if rows.last().map(|(s, _)| s.as_str()) != Some(style) {
                        rows.push((style.to_string(), MetricRow {
                            distinct_1: f64::NAN,
                            distinct_2: f64::NAN,
                            a_sar: f64::NAN,
                            skeleton_retention: f64::NAN,
                            perplexity: f64::NAN,
                            samples: 0,
                        }));
                    }
                    let row = &mut rows.last_mut().expect("pushed").1;
                    if metric == "samples" {
                        row.samples = value.parse().map_err(|e| bad(n, format!("samples: {e}")))?;
                        continue;
                    }
                    let v: f64 = value.parse().map_err(|e| bad(n, format!("{metric}: {e}")))?;
                    match metric {
                        "perplexity" => row.perplexity = v,
                        m => match RATIOS.iter().position(|r| *r == m) {
                            Some(k) => row.set_ratio(k, v),
                            None => return Err(bad(n, format!("unknown metric `{m}`"))),
                        },
                    }
                }
            }
        }
        let Some((last, overall)) = rows.pop() else {
            return Err(bad(1, "no metric rows".into()));
        };
        if last != OVERALL {
            return Err(bad(1, "last group must be `overall`".into()));
        }
        let digest = digest.ok_or_else(|| bad(1, "missing generation_digest".into()))?;
        Self::new(digest, manifest_hash, rows, overall)
    }

    /// Fixed-width table with one line per style.
    pub fn to_table(&self) -> String {
        let width = self.rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(5);
        let mut out = format!(
            "{:<width$}  {:>10}  {:>10}  {:>8}  {:>8}  {:>10}  {:>7}\n",
            "style", "distinct-1", "distinct-2", "a-sar", "skeleton", "perplexity", "samples"
        );
        for (name, r) in &self.rows {
            let _ = writeln!(
                out,
                "{name:<width$}  {:>10.4}  {:>10.4}  {:>8.4}  {:>8.4}  {:>10.4}  {:>7}",
                r.distinct_1, r.distinct_2, r.a_sar, r.skeleton_retention, r.perplexity, r.samples
            );
        }
        let _ = writeln!(out, "generation digest: {}", self.generation_digest);
        if let Some(h) = &self.manifest_hash {
            let _ = writeln!(out, "manifest hash: {h}");
        }
        out
    }

    /// Writes the CSV to `path` and the table next to it with a `.txt`
    /// extension.
    pub fn emit(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))?;
        let table = path.with_extension("txt");
        std::fs::write(&table, self.to_table()).map_err(|e| Error::io(&table, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text).map_err(|e| match e {
            Error::Parse { line, reason, .. } => Error::Parse {
                path: path.to_path_buf(),
                line,
                reason,
            },
            e => e,
        })
    }
}
