use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{detokenize, tokenize, DialoguePair, StyleSet};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    query: String,
    response: String,
    style: String,
}

/// Parses JSONL text; `origin` only labels error messages. Blank lines are
/// skipped.
pub fn parse_corpus(text: &str, styles: &StyleSet, origin: &Path) -> Result<Vec<DialoguePair>> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |reason: String| Error::Parse {
            path: origin.to_path_buf(),
            line: i + 1,
            reason,
        };
        let record: Record = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        let style = styles.by_name(&record.style)?;
        let pair = DialoguePair::new(tokenize(&record.query), tokenize(&record.response), style)
            .map_err(|e| parse_err(e.to_string()))?;
        pairs.push(pair);
    }
    Ok(pairs)
}

pub fn load_corpus(path: &Path, styles: &StyleSet) -> Result<Vec<DialoguePair>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text, styles, path)
}

pub fn save_corpus(pairs: &[DialoguePair], path: &Path) -> Result<()> {
    let mut out = Vec::new();
    for pair in pairs {
        let record = Record {
            query: detokenize(&pair.query),
            response: detokenize(&pair.response),
            style: pair.style.name.clone(),
        };
        serde_json::to_writer(&mut out, &record).map_err(|e| Error::json(path, e))?;
        out.push(b'\n');
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))
}

/// Style-set manifest: a JSON list of names whose order defines the ids.
pub fn load_style_set(path: &Path) -> Result<StyleSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let names: Vec<String> = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    StyleSet::new(names)
}

pub fn save_style_set(styles: &StyleSet, path: &Path) -> Result<()> {
    let text = serde_json::to_string(styles.names()).map_err(|e| Error::json(path, e))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn styles() -> StyleSet {
        StyleSet::new(["male", "female"]).unwrap()
    }

    #[test]
    fn parses_one_line() {
        let text = r#"{"query": "how are you", "response": "fine bro", "style": "male"}"#;
        let pairs = parse_corpus(text, &styles(), Path::new("x.jsonl")).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].style.id, 0);
        assert_eq!(pairs[0].response.len(), 2);
    }

    #[test]
    fn missing_style_names_line() {
        let text = "{\"query\": \"a\", \"response\": \"b\", \"style\": \"male\"}\n{\"query\": \"a\", \"response\": \"b\"}\n";
        let err = parse_corpus(text, &styles(), Path::new("x.jsonl")).unwrap_err();
        match err {
            Error::Parse { line, reason, .. } => {
                assert_eq!(line, 2);
                assert!(reason.contains("style"), "{reason}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_style_is_named() {
        let text = r#"{"query": "a", "response": "b", "style": "robot"}"#;
        let err = parse_corpus(text, &styles(), Path::new("x.jsonl")).unwrap_err();
        assert!(err.to_string().contains("robot"));
    }

    #[test]
    fn save_then_load_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let text = "{\"query\":\"hi  there\",\"response\":\"my wife and her friends\",\"style\":\"female\"}\n{\"query\":\"q\",\"response\":\"r\",\"style\":\"male\"}\n";
        let pairs = parse_corpus(text, &styles(), &path).unwrap();
        save_corpus(&pairs, &path).unwrap();
        let loaded = load_corpus(&path, &styles()).unwrap();
        assert_eq!(loaded, pairs);
        let first = fs::read(&path).unwrap();
        save_corpus(&loaded, &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
    }

    #[test]
    fn style_manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("styles.json");
        save_style_set(&styles(), &path).unwrap();
        assert_eq!(load_style_set(&path).unwrap(), styles());
    }
}
