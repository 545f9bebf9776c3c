use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which predicted styles are unacceptable for a desired style. Conflicts
/// are symmetric; a style never conflicts with itself and the neutral style
/// conflicts with nothing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ConflictRepr", into = "ConflictRepr")]
pub struct ConflictMatrix {
    conflicts: BTreeSet<(String, String)>,
    neutral: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConflictRepr {
    conflicts: Vec<[String; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    neutral: Option<String>,
}

impl TryFrom<ConflictRepr> for ConflictMatrix {
    type Error = Error;

    fn try_from(r: ConflictRepr) -> Result<Self> {
        ConflictMatrix::new(r.conflicts.into_iter().map(|[a, b]| (a, b)), r.neutral)
    }
}

impl From<ConflictMatrix> for ConflictRepr {
    fn from(m: ConflictMatrix) -> Self {
        ConflictRepr {
            conflicts: m.conflicts.into_iter().map(|(a, b)| [a, b]).collect(),
            neutral: m.neutral,
        }
    }
}

impl ConflictMatrix {
    pub fn new<I, S>(pairs: I, neutral: Option<String>) -> Result<Self>
    where
        I: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        let mut conflicts = BTreeSet::new();
        for (a, b) in pairs {
            let (a, b) = (a.into(), b.into());
            if a == b {
                return Err(Error::Config(format!("style `{a}` cannot conflict with itself")));
            }
            if neutral.as_ref().is_some_and(|n| *n == a || *n == b) {
                return Err(Error::Config("the neutral style cannot take part in a conflict".into()));
            }
            conflicts.insert(if a < b { (a, b) } else { (b, a) });
        }
        Ok(ConflictMatrix { conflicts, neutral })
    }

    /// male and female conflict; neutral is acceptable everywhere.
    pub fn gender() -> Self {
        Self::new([("female", "male")], Some("neutral".into())).expect("valid default")
    }

    /// Every positive class conflicts with every negative class.
    pub fn emotion(positive: &[&str], negative: &[&str], neutral: Option<&str>) -> Result<Self> {
        let pairs = positive
            .iter()
            .flat_map(|p| negative.iter().map(move |n| (p.to_string(), n.to_string())));
        Self::new(pairs, neutral.map(str::to_string))
    }

    pub fn neutral(&self) -> Option<&str> {
        self.neutral.as_deref()
    }

    pub fn conflicted(&self, predicted: &str, desired: &str) -> bool {
        let key = if predicted < desired {
            (predicted.to_string(), desired.to_string())
        } else {
            (desired.to_string(), predicted.to_string())
        };
        self.conflicts.contains(&key)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

impl Default for ConflictMatrix {
    fn default() -> Self {
        Self::gender()
    }
}
