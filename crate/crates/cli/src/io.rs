use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use causal_simt_core::stream::TimedTranscript;
use serde::de::DeserializeOwned;
use serde::Deserialize;

/// Parses non-blank lines; each item carries its 1-based line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(line)
            .with_context(|| format!("{}:{}: record {}", path.display(), n + 1, out.len()))?;
        out.push((n + 1, item));
    }
    Ok(out)
}

pub fn jsonl<T: serde::Serialize>(items: impl IntoIterator<Item = T>) -> Result<String> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(&item)?);
        out.push('\n');
    }
    Ok(out)
}

/// Writes through a sibling temp file so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Clone, Deserialize)]
struct TestLine {
    id: Option<String>,
    source: String,
    target: Option<String>,
}

/// One test sentence, from a test-set line or a transcript file.
#[derive(Debug, Clone)]
pub struct TestItem {
    pub id: String,
    pub source: String,
    pub reference: Option<String>,
    pub transcript: Option<TimedTranscript>,
}

fn check_id(id: &str, seen: &mut HashSet<String>) -> Result<()> {
    if id.is_empty()
        || !id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "._-".contains(c))
    {
        bail!("id {id:?} must be non-empty and use only ASCII letters, digits, '.', '_' or '-'");
    }
    if !seen.insert(id.to_string()) {
        bail!("duplicate id {id:?}");
    }
    Ok(())
}

pub fn load_test_set(path: &Path) -> Result<Vec<TestItem>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (index, (line, t)) in read_jsonl::<TestLine>(path)?.into_iter().enumerate() {
        let id = t.id.unwrap_or_else(|| format!("{index:05}"));
        check_id(&id, &mut seen).with_context(|| format!("{}:{line}", path.display()))?;
        out.push(TestItem {
            id,
            source: t.source,
            reference: t.target,
            transcript: None,
        });
    }
    Ok(out)
}

/// Every `*.json` file in `dir`, sorted by name; the id is the file stem.
pub fn load_transcripts(dir: &Path) -> Result<Vec<TestItem>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for p in paths {
        let id = p
            .file_stem()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned();
        check_id(&id, &mut seen)?;
        let t = TimedTranscript::load(&p).with_context(|| format!("loading {}", p.display()))?;
        let source = t
            .words
            .iter()
            .map(|w| w.w.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        out.push(TestItem {
            id,
            source,
            reference: t.reference.clone(),
            transcript: Some(t),
        });
    }
    Ok(out)
}

/// A test-set file or a transcript directory.
pub fn load_items(path: &Path) -> Result<Vec<TestItem>> {
    if path.is_dir() {
        load_transcripts(path)
    } else {
        load_test_set(path)
    }
}
