//! Labelled dataset and its JSON-lines manifest.
//!
//! One JSON object per line:
//!
//! ```text
//! {"id":"clean_0001","path":"data/Clean/0001.png","label":"clean","split":"train","parent":null}
//! ```
//!
//! `parent` names the sample an augmented entry was derived from.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::ClassLabel;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),
    #[error("empty sample id")]
    EmptyId,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("class {label} has {count} sample group(s); at least 2 are required")]
    ClassTooSmall { label: ClassLabel, count: usize },
    #[error("invalid test fraction {0}")]
    InvalidFraction(f64),
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    #[default]
    Unassigned,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub id: String,
    pub path: PathBuf,
    pub label: ClassLabel,
    #[serde(default)]
    pub split: Split,
    #[serde(default)]
    pub parent: Option<String>,
}

impl DatasetEntry {
    pub fn new(id: impl Into<String>, path: impl Into<PathBuf>, label: ClassLabel) -> Self {
        Self { id: id.into(), path: path.into(), label, split: Split::Unassigned, parent: None }
    }
}

/// Where a dataset came from. Kept in memory only; the manifest carries per-entry lineage.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Provenance {
    pub source: String,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabeledDataset {
    entries: Vec<DatasetEntry>,
    pub provenance: Provenance,
}

impl LabeledDataset {
    /// Validates ids (non-empty, unique) and wraps the entries.
    pub fn new(entries: Vec<DatasetEntry>) -> Result<Self, DatasetError> {
        let mut seen = HashSet::with_capacity(entries.len());
        for e in &entries {
            if e.id.is_empty() {
                return Err(DatasetError::EmptyId);
            }
            if !seen.insert(e.id.as_str()) {
                return Err(DatasetError::DuplicateId(e.id.clone()));
            }
        }
        Ok(Self { entries, provenance: Provenance::default() })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn entries(&self) -> &[DatasetEntry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<DatasetEntry> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&DatasetEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Entries carrying the given split tag.
    pub fn split_entries(&self, split: Split) -> impl Iterator<Item = &DatasetEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn class_counts(&self) -> BTreeMap<ClassLabel, usize> {
        let mut m = BTreeMap::new();
        for e in &self.entries {
            *m.entry(e.label).or_insert(0) += 1;
        }
        m
    }

    /// Id of the oldest ancestor of each entry, following `parent` links.
    ///
    /// A parent id that is not itself in the dataset is treated as the root.
    pub fn lineage_roots(&self) -> HashMap<&str, String> {
        let parent: HashMap<&str, Option<&str>> = self.entries.iter().map(|e| (e.id.as_str(), e.parent.as_deref())).collect();
        let mut roots = HashMap::with_capacity(self.entries.len());
        for e in &self.entries {
            let mut cur = e.id.as_str();
            let mut hops = 0;
            while let Some(Some(p)) = parent.get(cur) {
                cur = p;
                hops += 1;
                if hops > self.entries.len() {
                    break; // cycle guard
                }
            }
            roots.insert(e.id.as_str(), cur.to_string());
        }
        roots
    }

    pub fn read_manifest(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let file = std::fs::File::open(path.as_ref())?;
        let ds = Self::from_reader(std::io::BufReader::new(file))?;
        Ok(ds.with_provenance(Provenance { source: path.as_ref().display().to_string(), seed: None }))
    }

    pub fn from_reader(reader: impl BufRead) -> Result<Self, DatasetError> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e: DatasetEntry =
                serde_json::from_str(&line).map_err(|err| DatasetError::Manifest { line: i + 1, message: err.to_string() })?;
            entries.push(e);
        }
        Self::new(entries)
    }

    pub fn write_manifest(&self, path: impl AsRef<Path>) -> Result<(), DatasetError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.to_writer(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn to_writer(&self, mut w: impl Write) -> Result<(), DatasetError> {
        for e in &self.entries {
            let line = serde_json::to_string(e).map_err(|err| DatasetError::Manifest { line: 0, message: err.to_string() })?;
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}
