//! Binary-level patch-state proxy: nine whole-binary statistics, a
//! standardized nearest-centroid rule and hold-one-architecture-out folds.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Arch, BinaryId, Branch, Corpus, FeatureExport, SymbolTable, Version};
use crate::error::{Error, Result};

pub const METRIC_NAMES: [&str; 9] = [
    "size_mb", "n_sym", "n_ana", "mean_size", "median_size", "p90_size", "p99_size", "n_sec", "n_debug",
];
pub const BYTES_PER_MB: f64 = 1_048_576.0;
pub const VULNERABLE: u8 = 0;
pub const PATCHED: u8 = 1;

/// Whole-binary facts the proxy reads.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryRecord {
    pub id: BinaryId,
    pub file_size_bytes: u64,
    /// `None` for a stripped target with no unstripped twin.
    pub n_sym: Option<u64>,
    pub function_sizes: Vec<u64>,
    pub section_count: u64,
    pub debug_section_count: u64,
}

impl BinaryRecord {
    /// From an unstripped symbol table: analysis functions with a size.
    pub fn from_symbol_table(table: &SymbolTable) -> Self {
        let id = BinaryId::new(table.version.clone(), table.arch.clone(), Branch::Unstripped);
        BinaryRecord {
            id,
            file_size_bytes: table.file_size,
            n_sym: Some(table.symbols.len() as u64),
            function_sizes: table.alignable().iter().map(|s| s.size).collect(),
            section_count: table.section_count,
            debug_section_count: table.debug_section_count,
        }
    }

    /// From a stripped export, borrowing whole-file facts from its twin
    /// when one exists.
    pub fn from_export(export: &FeatureExport, twin: Option<&SymbolTable>) -> Self {
        BinaryRecord {
            id: export.binary_id(),
            file_size_bytes: twin.map_or(0, |t| t.file_size),
            n_sym: twin.map(|t| t.symbols.len() as u64),
            function_sizes: export.functions.iter().map(|f| f.size).filter(|&s| s > 0).collect(),
            section_count: twin.map_or(0, |t| t.section_count),
            debug_section_count: twin.map_or(0, |t| t.debug_section_count),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub values: [f64; 9],
    /// n_sym was unavailable and recorded as 0.
    pub n_sym_missing: bool,
}

/// Linear interpolation between closest ranks on a sorted sample.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn binary_metrics(b: &BinaryRecord) -> Result<BinaryMetrics> {
    if b.function_sizes.is_empty() {
        return Err(Error::NoFunctions);
    }
    let mut sizes: Vec<f64> = b.function_sizes.iter().map(|&s| s as f64).collect();
    sizes.sort_by(f64::total_cmp);
    let mean = sizes.iter().sum::<f64>() / sizes.len() as f64;
    Ok(BinaryMetrics {
        values: [
            b.file_size_bytes as f64 / BYTES_PER_MB,
            b.n_sym.unwrap_or(0) as f64,
            sizes.len() as f64,
            mean,
            percentile(&sizes, 50.0),
            percentile(&sizes, 90.0),
            percentile(&sizes, 99.0),
            b.section_count as f64,
            b.debug_section_count as f64,
        ],
        n_sym_missing: b.n_sym.is_none(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centroid {
    pub mean: [f64; 9],
    pub std: [f64; 9],
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidModel {
    pub vulnerable: Centroid,
    pub patched: Centroid,
    pub epsilon: f64,
}

fn centroid(rows: &[&[f64; 9]]) -> Centroid {
    let n = rows.len() as f64;
    let mean: [f64; 9] = std::array::from_fn(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n);
    let std = std::array::from_fn(|k| (rows.iter().map(|r| (r[k] - mean[k]).powi(2)).sum::<f64>() / n).sqrt());
    Centroid {
        mean,
        std,
        count: rows.len(),
    }
}

/// Per-class componentwise mean and population standard deviation.
pub fn fit_centroids(train: &[(BinaryMetrics, u8)], epsilon: f64) -> Result<CentroidModel> {
    let class = |y: u8| -> Result<Centroid> {
        let rows: Vec<&[f64; 9]> = train.iter().filter(|(_, l)| *l == y).map(|(m, _)| &m.values).collect();
        if rows.is_empty() {
            return Err(Error::MissingClass(y));
        }
        Ok(centroid(&rows))
    };
    Ok(CentroidModel {
        vulnerable: class(VULNERABLE)?,
        patched: class(PATCHED)?,
        epsilon,
    })
}

impl CentroidModel {
    pub fn distance(&self, c: &Centroid, m: &BinaryMetrics) -> f64 {
        (0..9)
            .map(|k| ((m.values[k] - c.mean[k]) / (c.std[k] + self.epsilon)).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Nearest standardized centroid; ties go to vulnerable.
    pub fn predict(&self, m: &BinaryMetrics) -> u8 {
        if self.distance(&self.patched, m) < self.distance(&self.vulnerable, m) {
            PATCHED
        } else {
            VULNERABLE
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn add(&mut self, truth: u8, predicted: u8) {
        match (truth, predicted) {
            (PATCHED, PATCHED) => self.tp += 1,
            (VULNERABLE, PATCHED) => self.fp += 1,
            (PATCHED, _) => self.fn_ += 1,
            _ => self.tn += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    /// 0 when nothing is predicted positive.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub arch: Arch,
    pub binaries: u64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutReport {
    pub boundary: Version,
    pub folds: Vec<FoldReport>,
    pub mean_accuracy: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f1: f64,
    pub n_sym_missing: usize,
}

pub fn patch_label(version: &Version, boundary: &Version) -> u8 {
    if version >= boundary {
        PATCHED
    } else {
        VULNERABLE
    }
}

/// Trains on every arch but one, tests on the held-out arch.
pub fn holdout_eval(binaries: &[BinaryRecord], boundary: &Version, epsilon: f64) -> Result<HoldoutReport> {
    let rows: Vec<(Arch, BinaryMetrics, u8)> = binaries
        .iter()
        .map(|b| Ok((b.id.arch.clone(), binary_metrics(b)?, patch_label(&b.id.version, boundary))))
        .collect::<Result<_>>()?;
    let mut arches: Vec<Arch> = rows.iter().map(|r| r.0.clone()).collect();
    arches.sort();
    arches.dedup();
    if arches.len() < 2 {
        return Err(Error::InvalidConfig("hold-one-arch-out needs at least two architectures".into()));
    }
    let folds: Vec<FoldReport> = arches
        .par_iter()
        .map(|held| {
            let train: Vec<(BinaryMetrics, u8)> =
                rows.iter().filter(|r| r.0 != *held).map(|r| (r.1, r.2)).collect();
            let model = fit_centroids(&train, epsilon)?;
            let mut c = Confusion::default();
            for (_, m, y) in rows.iter().filter(|r| r.0 == *held) {
                c.add(*y, model.predict(m));
            }
            Ok(FoldReport {
                arch: held.clone(),
                binaries: c.total(),
                accuracy: c.accuracy(),
                precision: c.precision(),
                recall: c.recall(),
                f1: c.f1(),
                tp: c.tp,
                fp: c.fp,
                tn: c.tn,
                fn_: c.fn_,
            })
        })
        .collect::<Result<_>>()?;
    let mean = |f: fn(&FoldReport) -> f64| folds.iter().map(f).sum::<f64>() / folds.len() as f64;
    Ok(HoldoutReport {
        boundary: boundary.clone(),
        mean_accuracy: mean(|f| f.accuracy),
        mean_precision: mean(|f| f.precision),
        mean_recall: mean(|f| f.recall),
        mean_f1: mean(|f| f.f1),
        n_sym_missing: rows.iter().filter(|r| r.1.n_sym_missing).count(),
        folds,
    })
}

/// One record per unstripped binary; stripped-only binaries use their
/// export with n_sym flagged missing.
pub fn corpus_binaries(corpus: &Corpus) -> Vec<BinaryRecord> {
    let mut out: BTreeMap<(Version, Arch), BinaryRecord> = corpus
        .labeled
        .iter()
        .map(|(k, t)| (k.clone(), BinaryRecord::from_symbol_table(t)))
        .collect();
    for (k, e) in &corpus.stripped {
        out.entry(k.clone()).or_insert_with(|| BinaryRecord::from_export(e, None));
    }
    out.into_values().collect()
}

pub fn write_fold_csv(report: &HoldoutReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for f in &report.folds {
        w.serialize(f).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
