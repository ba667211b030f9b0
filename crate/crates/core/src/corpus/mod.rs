//! Domain model for a firmware corpus: architectures, versions, binaries,
//! symbols and recovered functions, plus loaders for every on-disk format
//! the unstripped and stripped branches use.

mod elf;
mod export;
mod layout;
mod symbols;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use elf::{parse_elf, parse_elf_symbols, ElfSummary};
pub use export::{load_feature_export, serialize_feature_export, FeatureExport, SCHEMA_VERSION};
pub use layout::{
    read_ground_truth, stripped_path, symbols_path, write_ground_truth, Corpus, GroundTruthRow,
    LabeledBinary, StrippedBinary,
};
pub(crate) use layout::write_file;
pub use symbols::{
    filter_analysis_functions, normalize_identity, AnalysisFilter, SymbolTable,
};

/// Operation classes counted in `op_class_counts`, in bin order.
pub const OP_CLASSES: [&str; 16] = [
    "arith",
    "logic",
    "shift",
    "muldiv",
    "load",
    "store",
    "stack",
    "cond-branch",
    "uncond-branch",
    "call",
    "ret",
    "compare",
    "move",
    "float",
    "vector",
    "other",
];

/// CFG edge types counted in `edge_type_counts`, in bin order.
pub const EDGE_TYPES: [&str; 9] = [
    "fallthrough",
    "cond-true",
    "cond-false",
    "uncond-jump",
    "call",
    "return",
    "switch",
    "computed",
    "other",
];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Arch {
    Aarch64,
    Arm,
    Mips,
    Mipsel,
    X86_64,
    Other(String),
}

impl Arch {
    pub const KNOWN: [Arch; 5] = [Arch::Aarch64, Arch::Arm, Arch::Mips, Arch::Mipsel, Arch::X86_64];

    pub fn as_str(&self) -> &str {
        match self {
            Arch::Aarch64 => "aarch64",
            Arch::Arm => "arm",
            Arch::Mips => "mips",
            Arch::Mipsel => "mipsel",
            Arch::X86_64 => "x86_64",
            Arch::Other(label) => label,
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Arch {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "aarch64" | "arm64" => Arch::Aarch64,
            "arm" => Arch::Arm,
            "mips" => Arch::Mips,
            "mipsel" => Arch::Mipsel,
            "x86_64" | "x86-64" | "amd64" => Arch::X86_64,
            _ => Arch::Other(s.to_string()),
        })
    }
}

impl From<&str> for Arch {
    fn from(s: &str) -> Self {
        s.parse().unwrap()
    }
}

impl Serialize for Arch {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Arch {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(Arch::from(s.as_str()))
    }
}

/// A dotted numeric release version. Ordering compares segments numerically
/// with missing segments treated as 0; the raw string breaks remaining ties
/// so that ordering stays consistent with equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Version {
    raw: String,
    segments: Vec<u64>,
}

impl Version {
    pub fn parse(raw: &str) -> Result<Self> {
        let invalid = || Error::InvalidVersion(raw.to_string());
        if raw.is_empty() {
            return Err(invalid());
        }
        let segments = raw
            .split('.')
            .map(|seg| seg.parse::<u64>().map_err(|_| invalid()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Version {
            raw: raw.to_string(),
            segments,
        })
    }

    pub fn as_str(&self) -> &str {
        &self.raw
    }

    pub fn segments(&self) -> &[u64] {
        &self.segments
    }
}

impl Ord for Version {
    fn cmp(&self, other: &Self) -> Ordering {
        let n = self.segments.len().max(other.segments.len());
        for i in 0..n {
            let a = self.segments.get(i).copied().unwrap_or(0);
            let b = other.segments.get(i).copied().unwrap_or(0);
            match a.cmp(&b) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.raw.cmp(&other.raw)
    }
}

impl PartialOrd for Version {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

impl FromStr for Version {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Version::parse(s)
    }
}

impl Serialize for Version {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.raw)
    }
}

impl<'de> Deserialize<'de> for Version {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Version::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Stripped,
    Unstripped,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryId {
    pub version: Version,
    pub arch: Arch,
    pub branch: Branch,
    pub label: String,
}

impl BinaryId {
    pub fn new(version: Version, arch: Arch, branch: Branch) -> Self {
        let label = format!("{version}/{arch}/{branch:?}").to_lowercase();
        BinaryId {
            version,
            arch,
            branch,
            label,
        }
    }

    pub fn bucket(&self) -> (Version, Arch) {
        (self.version.clone(), self.arch.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolRecord {
    pub name: String,
    pub address: u64,
    pub size: u64,
    pub is_analysis: bool,
}

/// One function recovered from a stripped binary. Carries no name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionRecord {
    pub address: u64,
    pub size: u64,
    pub instruction_count: u64,
    pub block_count: u64,
    pub edge_count: u64,
    pub call_count: u64,
    pub branch_count: u64,
    pub ret_count: u64,
    pub string_ref_count: u64,
    pub const_ref_count: u64,
    pub op_class_counts: [u64; 16],
    pub edge_type_counts: [u64; 9],
    pub tokens: Vec<String>,
    pub contexts: Vec<String>,
}

impl FunctionRecord {
    /// Checks the count-sum invariants.
    pub fn validate(&self) -> Result<()> {
        let op_sum: u64 = self.op_class_counts.iter().sum();
        if op_sum != self.instruction_count {
            return Err(Error::InvariantViolation {
                address: self.address,
                detail: format!(
                    "op_class_counts sum to {op_sum}, instruction_count is {}",
                    self.instruction_count
                ),
            });
        }
        let edge_sum: u64 = self.edge_type_counts.iter().sum();
        if edge_sum != self.edge_count {
            return Err(Error::InvariantViolation {
                address: self.address,
                detail: format!(
                    "edge_type_counts sum to {edge_sum}, edge_count is {}",
                    self.edge_count
                ),
            });
        }
        Ok(())
    }
}

/// Anything with a start address and a byte size; the input of shape
/// descriptors and alignment.
pub trait Placed {
    fn address(&self) -> u64;
    fn size(&self) -> u64;
}

impl Placed for FunctionRecord {
    fn address(&self) -> u64 {
        self.address
    }
    fn size(&self) -> u64 {
        self.size
    }
}

impl Placed for SymbolRecord {
    fn address(&self) -> u64 {
        self.address
    }
    fn size(&self) -> u64 {
        self.size
    }
}

/// A normalized function identity, the unit of ground truth.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Identity(String);

impl Identity {
    /// Wraps an already-normalized name without re-normalizing it.
    pub fn from_normalized(name: impl Into<String>) -> Self {
        Identity(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn format_addr(addr: u64) -> String {
    format!("{addr:#x}")
}

pub fn parse_addr(s: &str) -> Option<u64> {
    let hex = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X"))?;
    if hex.is_empty() {
        return None;
    }
    u64::from_str_radix(hex, 16).ok()
}
