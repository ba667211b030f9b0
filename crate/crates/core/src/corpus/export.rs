//! The feature-export document: one per stripped binary, no names.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{format_addr, parse_addr, Arch, BinaryId, Branch, FunctionRecord, Version};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExportDoc {
    schema_version: String,
    version: String,
    arch: Arch,
    functions: Vec<ExportFunction>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExportFunction {
    address: String,
    size: u64,
    instruction_count: u64,
    block_count: u64,
    edge_count: u64,
    call_count: u64,
    branch_count: u64,
    ret_count: u64,
    string_ref_count: u64,
    const_ref_count: u64,
    op_class_counts: Vec<u64>,
    edge_type_counts: Vec<u64>,
    tokens: Vec<String>,
    contexts: Vec<String>,
}

/// A validated export: records sorted by ascending address.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureExport {
    pub version: Version,
    pub arch: Arch,
    pub functions: Vec<FunctionRecord>,
}

impl FeatureExport {
    pub fn parse(document: &str) -> Result<Self> {
        let doc: ExportDoc =
            serde_json::from_str(document).map_err(|e| Error::SchemaViolation(e.to_string()))?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaViolation(format!(
                "unsupported schema_version {:?}",
                doc.schema_version
            )));
        }
        let version = Version::parse(&doc.version)
            .map_err(|_| Error::SchemaViolation(format!("bad version {:?}", doc.version)))?;
        let mut functions = doc
            .functions
            .into_iter()
            .map(ExportFunction::into_record)
            .collect::<Result<Vec<_>>>()?;
        for f in &functions {
            f.validate()?;
        }
        functions.sort_by_key(|f| f.address);
        if let Some(w) = functions.windows(2).find(|w| w[0].address == w[1].address) {
            return Err(Error::DuplicateAddress(w[0].address));
        }
        Ok(FeatureExport {
            version,
            arch: doc.arch,
            functions,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        FeatureExport::parse(&text).map_err(|e| Error::parse(path, e))
    }

    pub fn binary_id(&self) -> BinaryId {
        BinaryId::new(self.version.clone(), self.arch.clone(), Branch::Stripped)
    }

    /// Canonical serialization: compact JSON, functions in address order,
    /// trailing newline.
    pub fn to_canonical_json(&self) -> String {
        let mut functions: Vec<&FunctionRecord> = self.functions.iter().collect();
        functions.sort_by_key(|f| f.address);
        let doc = ExportDoc {
            schema_version: SCHEMA_VERSION.to_string(),
            version: self.version.to_string(),
            arch: self.arch.clone(),
            functions: functions.into_iter().map(ExportFunction::from_record).collect(),
        };
        let mut s = serde_json::to_string(&doc).expect("export serialization");
        s.push('\n');
        s
    }
}

impl ExportFunction {
    fn into_record(self) -> Result<FunctionRecord> {
        let address = parse_addr(&self.address)
            .ok_or_else(|| Error::SchemaViolation(format!("bad address {:?}", self.address)))?;
        let op_class_counts: [u64; 16] = self.op_class_counts.try_into().map_err(|v: Vec<u64>| {
            Error::SchemaViolation(format!(
                "op_class_counts at {address:#x} has length {}, expected 16",
                v.len()
            ))
        })?;
        let edge_type_counts: [u64; 9] = self.edge_type_counts.try_into().map_err(|v: Vec<u64>| {
            Error::SchemaViolation(format!(
                "edge_type_counts at {address:#x} has length {}, expected 9",
                v.len()
            ))
        })?;
        Ok(FunctionRecord {
            address,
            size: self.size,
            instruction_count: self.instruction_count,
            block_count: self.block_count,
            edge_count: self.edge_count,
            call_count: self.call_count,
            branch_count: self.branch_count,
            ret_count: self.ret_count,
            string_ref_count: self.string_ref_count,
            const_ref_count: self.const_ref_count,
            op_class_counts,
            edge_type_counts,
            tokens: self.tokens,
            contexts: self.contexts,
        })
    }

    fn from_record(f: &FunctionRecord) -> Self {
        ExportFunction {
            address: format_addr(f.address),
            size: f.size,
            instruction_count: f.instruction_count,
            block_count: f.block_count,
            edge_count: f.edge_count,
            call_count: f.call_count,
            branch_count: f.branch_count,
            ret_count: f.ret_count,
            string_ref_count: f.string_ref_count,
            const_ref_count: f.const_ref_count,
            op_class_counts: f.op_class_counts.to_vec(),
            edge_type_counts: f.edge_type_counts.to_vec(),
            tokens: f.tokens.clone(),
            contexts: f.contexts.clone(),
        }
    }
}

pub fn load_feature_export(document: &str) -> Result<(BinaryId, Vec<FunctionRecord>)> {
    let export = FeatureExport::parse(document)?;
    Ok((export.binary_id(), export.functions))
}

pub fn serialize_feature_export(export: &FeatureExport) -> String {
    export.to_canonical_json()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn func_json(addr: &str, insns: u64, op0: u64) -> String {
        format!(
            r#"{{"address":"{addr}","size":32,"instruction_count":{insns},"block_count":1,"edge_count":0,
            "call_count":0,"branch_count":0,"ret_count":1,"string_ref_count":0,"const_ref_count":0,
            "op_class_counts":[{op0},0,0,0,0,0,0,0,0,0,0,0,0,0,0,0],"edge_type_counts":[0,0,0,0,0,0,0,0,0],
            "tokens":["mov R R"],"contexts":[]}}"#
        )
    }

    fn doc(funcs: &[String]) -> String {
        format!(
            r#"{{"schema_version":"1","version":"1.34.0","arch":"mips","functions":[{}]}}"#,
            funcs.join(",")
        )
    }

    #[test]
    fn minimal_export_loads() {
        let (id, funcs) = load_feature_export(&doc(&[func_json("0x1000", 4, 4)])).unwrap();
        assert_eq!(id.arch, Arch::Mips);
        assert_eq!(id.version.as_str(), "1.34.0");
        assert_eq!(id.branch, Branch::Stripped);
        assert_eq!(funcs.len(), 1);
        assert_eq!(funcs[0].address, 0x1000);
    }

    #[test]
    fn count_mismatch_is_invariant_violation() {
        let err = load_feature_export(&doc(&[func_json("0x1000", 4, 3)])).unwrap_err();
        assert!(matches!(err, Error::InvariantViolation { address: 0x1000, .. }));
    }

    #[test]
    fn shuffled_functions_are_sorted() {
        let d = doc(&[func_json("0x3000", 1, 1), func_json("0x1000", 1, 1), func_json("0x2000", 1, 1)]);
        let (_, funcs) = load_feature_export(&d).unwrap();
        let addrs: Vec<u64> = funcs.iter().map(|f| f.address).collect();
        assert_eq!(addrs, [0x1000, 0x2000, 0x3000]);
    }

    #[test]
    fn duplicates_and_schema_errors() {
        let d = doc(&[func_json("0x1000", 1, 1), func_json("0x1000", 1, 1)]);
        assert!(matches!(load_feature_export(&d), Err(Error::DuplicateAddress(0x1000))));

        let extra = doc(&[func_json("0x1000", 1, 1)]).replace("\"size\":32", "\"size\":32,\"name\":\"main\"");
        assert!(matches!(load_feature_export(&extra), Err(Error::SchemaViolation(_))));

        let missing = doc(&[func_json("0x1000", 1, 1)]).replace("\"block_count\":1,", "");
        assert!(matches!(load_feature_export(&missing), Err(Error::SchemaViolation(_))));

        let short = doc(&[func_json("0x1000", 1, 1)]).replace("[0,0,0,0,0,0,0,0,0]", "[0,0]");
        assert!(matches!(load_feature_export(&short), Err(Error::SchemaViolation(_))));

        let wrong_type = doc(&[func_json("0x1000", 1, 1)]).replace("\"size\":32", "\"size\":\"32\"");
        assert!(matches!(load_feature_export(&wrong_type), Err(Error::SchemaViolation(_))));

        let bad_schema = doc(&[]).replace("\"schema_version\":\"1\"", "\"schema_version\":\"2\"");
        assert!(matches!(load_feature_export(&bad_schema), Err(Error::SchemaViolation(_))));

        let bad_addr = doc(&[func_json("4096", 1, 1)]);
        assert!(matches!(load_feature_export(&bad_addr), Err(Error::SchemaViolation(_))));
    }
}
