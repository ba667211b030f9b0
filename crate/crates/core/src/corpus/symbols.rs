use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{format_addr, parse_addr, Arch, Identity, SymbolRecord, Version};
use crate::error::{Error, Result};

/// Exclusion rules separating analysis functions from toolchain runtime.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisFilter {
    pub exact: Vec<String>,
    pub prefixes: Vec<String>,
}

impl Default for AnalysisFilter {
    fn default() -> Self {
        let exact = [
            "_start",
            "_init",
            "_fini",
            "frame_dummy",
            "register_tm_clones",
            "deregister_tm_clones",
            "__do_global_dtors_aux",
            "call_weak_fn",
            "abort",
        ];
        let prefixes = ["__libc", "__gcc", "__aeabi", "_dl_"];
        AnalysisFilter {
            exact: exact.iter().map(|s| s.to_string()).collect(),
            prefixes: prefixes.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl AnalysisFilter {
    pub fn is_analysis(&self, name: &str) -> bool {
        if name.is_empty() {
            return false;
        }
        let base = normalize_identity(name)
            .map(|id| id.0)
            .unwrap_or_else(|_| name.to_string());
        let excluded = |n: &str| {
            self.exact.iter().any(|e| e == n) || self.prefixes.iter().any(|p| n.starts_with(p.as_str()))
        };
        !(excluded(name) || excluded(&base))
    }

    /// Recomputes `is_analysis` and keeps the analysis subset in order.
    pub fn apply(&self, symbols: Vec<SymbolRecord>) -> Vec<SymbolRecord> {
        symbols
            .into_iter()
            .filter_map(|mut s| {
                s.is_analysis = self.is_analysis(&s.name);
                s.is_analysis.then_some(s)
            })
            .collect()
    }
}

/// Default-rule analysis filter.
pub fn filter_analysis_functions(symbols: Vec<SymbolRecord>) -> Vec<SymbolRecord> {
    AnalysisFilter::default().apply(symbols)
}

const CLONE_SUFFIXES: [&str; 3] = [".isra.", ".part.", ".constprop."];
const PLAIN_SUFFIXES: [&str; 2] = [".cold", ".plt"];

/// Strips compiler clone suffixes until a fixed point.
pub fn normalize_identity(name: &str) -> Result<Identity> {
    if name.is_empty() {
        return Err(Error::EmptyName);
    }
    let mut cur = name;
    while let Some(next) = strip_one_suffix(cur) {
        if next.is_empty() {
            break;
        }
        cur = next;
    }
    Ok(Identity(cur.to_string()))
}

fn strip_one_suffix(s: &str) -> Option<&str> {
    for suf in PLAIN_SUFFIXES {
        if let Some(rest) = s.strip_suffix(suf) {
            return Some(rest);
        }
    }
    // `.isra.N` and friends: trailing digits preceded by the marker.
    let digits = s.len() - s.trim_end_matches(|c: char| c.is_ascii_digit()).len();
    if digits == 0 {
        return None;
    }
    let head = &s[..s.len() - digits];
    CLONE_SUFFIXES
        .iter()
        .find_map(|marker| head.strip_suffix(marker))
}

/// Symbol table of one unstripped binary plus the whole-binary facts the
/// patch proxy needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolTable {
    pub version: Version,
    pub arch: Arch,
    pub file_size: u64,
    pub section_count: u64,
    pub debug_section_count: u64,
    pub symbols: Vec<SymbolRecord>,
}

const SYMTAB_MAGIC: &str = "# evopatch-symbols 1";

impl SymbolTable {
    /// Text form: directive header lines, then `name<TAB>0xaddr<TAB>size`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{SYMTAB_MAGIC}").unwrap();
        writeln!(out, "# version {}", self.version).unwrap();
        writeln!(out, "# arch {}", self.arch).unwrap();
        writeln!(out, "# file_size {}", self.file_size).unwrap();
        writeln!(out, "# sections {}", self.section_count).unwrap();
        writeln!(out, "# debug_sections {}", self.debug_section_count).unwrap();
        for s in &self.symbols {
            writeln!(out, "{}\t{}\t{}", s.name, format_addr(s.address), s.size).unwrap();
        }
        out
    }

    pub fn parse(text: &str, filter: &AnalysisFilter) -> Result<Self> {
        let syntax = |line: usize, detail: &str| Error::SymbolTableSyntax {
            line,
            detail: detail.to_string(),
        };
        let mut version = None;
        let mut arch = None;
        let mut file_size = 0;
        let mut section_count = 0;
        let mut debug_section_count = 0;
        let mut symbols = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            if let Some(directive) = line.strip_prefix('#') {
                let mut parts = directive.split_whitespace();
                let (Some(key), Some(value)) = (parts.next(), parts.next()) else {
                    continue;
                };
                let num = || value.parse::<u64>().map_err(|_| syntax(lineno, "expected integer"));
                match key {
                    "version" => version = Some(Version::parse(value)?),
                    "arch" => arch = Some(Arch::from(value)),
                    "file_size" => file_size = num()?,
                    "sections" => section_count = num()?,
                    "debug_sections" => debug_section_count = num()?,
                    _ => {}
                }
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [name, addr, size] = fields[..] else {
                return Err(syntax(lineno, "expected name, address, size"));
            };
            let address = parse_addr(addr).ok_or_else(|| syntax(lineno, "bad hex address"))?;
            let size = size.parse().map_err(|_| syntax(lineno, "bad size"))?;
            symbols.push(SymbolRecord {
                name: name.to_string(),
                address,
                size,
                is_analysis: filter.is_analysis(name),
            });
        }
        Ok(SymbolTable {
            version: version.ok_or_else(|| syntax(0, "missing '# version' directive"))?,
            arch: arch.ok_or_else(|| syntax(0, "missing '# arch' directive"))?,
            file_size,
            section_count,
            debug_section_count,
            symbols,
        })
    }

    pub fn load(path: &Path, filter: &AnalysisFilter) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SymbolTable::parse(&text, filter).map_err(|e| Error::parse(path, e))
    }

    /// Analysis functions usable for alignment: size > 0, one record per
    /// address (lexicographically smallest name wins for aliases), sorted
    /// by address.
    pub fn alignable(&self) -> Vec<SymbolRecord> {
        let mut v: Vec<SymbolRecord> = self
            .symbols
            .iter()
            .filter(|s| s.is_analysis && s.size > 0)
            .cloned()
            .collect();
        v.sort_by(|a, b| a.address.cmp(&b.address).then_with(|| a.name.cmp(&b.name)));
        v.dedup_by_key(|s| s.address);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(name: &str) -> SymbolRecord {
        SymbolRecord {
            name: name.into(),
            address: 0,
            size: 1,
            is_analysis: true,
        }
    }

    fn names(v: &[SymbolRecord]) -> Vec<&str> {
        v.iter().map(|s| s.name.as_str()).collect()
    }

    #[test]
    fn filter_examples() {
        let out = filter_analysis_functions(vec![sym("main"), sym("_start"), sym("awk_main")]);
        assert_eq!(names(&out), ["main", "awk_main"]);
        assert!(filter_analysis_functions(vec![]).is_empty());
        assert!(filter_analysis_functions(vec![sym("__libc_csu_init")]).is_empty());
        assert!(filter_analysis_functions(vec![sym("frame_dummy.cold")]).is_empty());
        assert!(filter_analysis_functions(vec![sym("")]).is_empty());
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_identity("awk_main.isra.0").unwrap().as_str(), "awk_main");
        assert_eq!(normalize_identity("main").unwrap().as_str(), "main");
        assert_eq!(normalize_identity("f.part.1.isra.2").unwrap().as_str(), "f");
        assert_eq!(normalize_identity("g.constprop.12.cold").unwrap().as_str(), "g");
        assert_eq!(normalize_identity("puts.plt").unwrap().as_str(), "puts");
        assert_eq!(normalize_identity("v2").unwrap().as_str(), "v2");
        assert_eq!(normalize_identity(".cold").unwrap().as_str(), ".cold");
        assert!(matches!(normalize_identity(""), Err(Error::EmptyName)));
    }

    #[test]
    fn symbol_table_text_round_trip() {
        let t = SymbolTable {
            version: Version::parse("1.34.0").unwrap(),
            arch: Arch::Mips,
            file_size: 1234,
            section_count: 27,
            debug_section_count: 2,
            symbols: vec![
                SymbolRecord { name: "main".into(), address: 0x400, size: 10, is_analysis: true },
                SymbolRecord { name: "_start".into(), address: 0x100, size: 4, is_analysis: false },
            ],
        };
        let text = t.to_text();
        let back = SymbolTable::parse(&text, &AnalysisFilter::default()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn symbol_table_rejects_garbage() {
        let text = "# version 1.0\n# arch arm\nmain 0x10 5\n";
        assert!(matches!(
            SymbolTable::parse(text, &AnalysisFilter::default()),
            Err(Error::SymbolTableSyntax { line: 3, .. })
        ));
        assert!(SymbolTable::parse("main\t0x10\t5\n", &AnalysisFilter::default()).is_err());
    }

    #[test]
    fn alignable_drops_zero_size_and_aliases() {
        let t = SymbolTable {
            version: Version::parse("1").unwrap(),
            arch: Arch::Arm,
            file_size: 0,
            section_count: 0,
            debug_section_count: 0,
            symbols: vec![
                SymbolRecord { name: "b".into(), address: 0x20, size: 8, is_analysis: true },
                SymbolRecord { name: "a".into(), address: 0x20, size: 8, is_analysis: true },
                SymbolRecord { name: "z".into(), address: 0x10, size: 0, is_analysis: true },
                SymbolRecord { name: "_init".into(), address: 0x8, size: 4, is_analysis: false },
            ],
        };
        assert_eq!(names(&t.alignable()), ["a"]);
    }
}
