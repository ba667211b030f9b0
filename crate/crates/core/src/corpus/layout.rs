//! On-disk corpus directory:
//!
//! ```text
//! <root>/stripped/<version>/<arch>.json   feature exports
//! <root>/symbols/<version>/<arch>.sym     unstripped symbol tables
//! <root>/manifest.csv                     optional ground truth
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AnalysisFilter, Arch, FeatureExport, SymbolTable, Version};
use crate::error::{Error, Result};

pub type StrippedBinary = FeatureExport;
pub type LabeledBinary = SymbolTable;

/// One emitted stripped function and the identity it was generated from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthRow {
    pub version: String,
    pub arch: String,
    pub address: String,
    pub name: String,
    pub identity: String,
    pub changed: bool,
    pub hot: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub stripped: BTreeMap<(Version, Arch), StrippedBinary>,
    pub labeled: BTreeMap<(Version, Arch), LabeledBinary>,
}

impl Corpus {
    pub fn versions(&self) -> Vec<Version> {
        let mut v: Vec<Version> = self
            .stripped
            .keys()
            .chain(self.labeled.keys())
            .map(|(v, _)| v.clone())
            .collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn arches(&self) -> Vec<Arch> {
        let mut a: Vec<Arch> = self
            .stripped
            .keys()
            .chain(self.labeled.keys())
            .map(|(_, a)| a.clone())
            .collect();
        a.sort();
        a.dedup();
        a
    }

    pub fn insert_stripped(&mut self, export: FeatureExport) -> Result<()> {
        let key = (export.version.clone(), export.arch.clone());
        if self.stripped.contains_key(&key) {
            return Err(Error::SchemaViolation(format!(
                "duplicate stripped binary for {}/{}",
                key.0, key.1
            )));
        }
        self.stripped.insert(key, export);
        Ok(())
    }

    pub fn insert_labeled(&mut self, table: SymbolTable) -> Result<()> {
        let key = (table.version.clone(), table.arch.clone());
        if self.labeled.contains_key(&key) {
            return Err(Error::SchemaViolation(format!(
                "duplicate symbol table for {}/{}",
                key.0, key.1
            )));
        }
        self.labeled.insert(key, table);
        Ok(())
    }

    pub fn load(root: &Path, filter: &AnalysisFilter) -> Result<Self> {
        let mut corpus = Corpus::default();
        for path in files_with_ext(&root.join("stripped"), "json")? {
            corpus.insert_stripped(FeatureExport::load(&path)?)?;
        }
        for path in files_with_ext(&root.join("symbols"), "sym")? {
            corpus.insert_labeled(SymbolTable::load(&path, filter)?)?;
        }
        if corpus.stripped.is_empty() && corpus.labeled.is_empty() {
            return Err(Error::parse(root, "no feature exports or symbol tables found"));
        }
        Ok(corpus)
    }

    /// Scans a flat or nested directory for `*.json` exports and `*.sym`
    /// tables, wherever they live.
    pub fn scan(input: &Path, filter: &AnalysisFilter) -> Result<Self> {
        let mut corpus = Corpus::default();
        for path in files_with_ext(input, "json")? {
            corpus.insert_stripped(FeatureExport::load(&path)?)?;
        }
        for path in files_with_ext(input, "sym")? {
            corpus.insert_labeled(SymbolTable::load(&path, filter)?)?;
        }
        Ok(corpus)
    }

    pub fn write(&self, root: &Path) -> Result<()> {
        for ((version, arch), export) in &self.stripped {
            write_file(
                &stripped_path(root, version, arch),
                export.to_canonical_json().as_bytes(),
            )?;
        }
        for ((version, arch), table) in &self.labeled {
            write_file(&symbols_path(root, version, arch), table.to_text().as_bytes())?;
        }
        Ok(())
    }
}

pub fn stripped_path(root: &Path, version: &Version, arch: &Arch) -> PathBuf {
    root.join("stripped")
        .join(version.as_str())
        .join(format!("{arch}.json"))
}

pub fn symbols_path(root: &Path, version: &Version, arch: &Arch) -> PathBuf {
    root.join("symbols")
        .join(version.as_str())
        .join(format!("{arch}.sym"))
}

pub fn write_ground_truth(path: &Path, rows: &[GroundTruthRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| Error::parse(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::parse(path, e))?;
    write_file(path, &bytes)
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruthRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::parse(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn files_with_ext(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    if !dir.exists() {
        return Ok(out);
    }
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
            let entry = entry.map_err(|e| Error::io(&d, e))?;
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == ext) {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}
