//! Minimal ELF reader: section headers plus the static and dynamic symbol
//! tables. Just enough to list function symbols on the unstripped branch.

use std::collections::HashSet;

use super::symbols::AnalysisFilter;
use super::{Arch, SymbolRecord};
use crate::error::{Error, Result};

const SHT_SYMTAB: u32 = 2;
const SHT_DYNSYM: u32 = 11;
const STT_FUNC: u8 = 2;
const SHN_XINDEX: u32 = 0xffff;

const EM_MIPS: u16 = 8;
const EM_ARM: u16 = 40;
const EM_X86_64: u16 = 62;
const EM_AARCH64: u16 = 183;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    Elf32,
    Elf64,
}

#[derive(Debug, Clone, Copy)]
struct Reader<'a> {
    bytes: &'a [u8],
    big_endian: bool,
    class: Class,
}

impl<'a> Reader<'a> {
    fn slice(&self, offset: u64, len: u64, what: &str) -> Result<&'a [u8]> {
        let end = offset
            .checked_add(len)
            .ok_or_else(|| Error::TruncatedFile(format!("{what} range overflows")))?;
        if end > self.bytes.len() as u64 {
            return Err(Error::TruncatedFile(format!(
                "{what} [{offset:#x}, {end:#x}) exceeds file size {:#x}",
                self.bytes.len()
            )));
        }
        Ok(&self.bytes[offset as usize..end as usize])
    }

    fn u16(&self, b: &[u8], at: usize) -> u16 {
        let raw = [b[at], b[at + 1]];
        if self.big_endian {
            u16::from_be_bytes(raw)
        } else {
            u16::from_le_bytes(raw)
        }
    }

    fn u32(&self, b: &[u8], at: usize) -> u32 {
        let raw: [u8; 4] = b[at..at + 4].try_into().unwrap();
        if self.big_endian {
            u32::from_be_bytes(raw)
        } else {
            u32::from_le_bytes(raw)
        }
    }

    fn u64(&self, b: &[u8], at: usize) -> u64 {
        let raw: [u8; 8] = b[at..at + 8].try_into().unwrap();
        if self.big_endian {
            u64::from_be_bytes(raw)
        } else {
            u64::from_le_bytes(raw)
        }
    }

    /// Class-sized word: 4 bytes on ELF32, 8 on ELF64.
    fn word(&self, b: &[u8], at: usize) -> u64 {
        match self.class {
            Class::Elf32 => self.u32(b, at) as u64,
            Class::Elf64 => self.u64(b, at),
        }
    }
}

#[derive(Debug, Clone)]
struct SectionHeader {
    name: u32,
    kind: u32,
    offset: u64,
    size: u64,
    link: u32,
    entsize: u64,
}

/// Whole-file facts gathered in one pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ElfSummary {
    pub is_64: bool,
    pub big_endian: bool,
    pub machine: u16,
    pub file_size: u64,
    pub section_count: usize,
    /// Sections whose names start with ".debug".
    pub debug_section_count: usize,
    pub symbols: Vec<SymbolRecord>,
}

impl ElfSummary {
    /// Architecture implied by `e_machine` and the data encoding.
    pub fn arch(&self) -> Option<Arch> {
        match (self.machine, self.big_endian) {
            (EM_AARCH64, _) => Some(Arch::Aarch64),
            (EM_ARM, _) => Some(Arch::Arm),
            (EM_MIPS, true) => Some(Arch::Mips),
            (EM_MIPS, false) => Some(Arch::Mipsel),
            (EM_X86_64, _) => Some(Arch::X86_64),
            _ => None,
        }
    }
}

/// Returns every function symbol of `.symtab` and `.dynsym`, with symbol
/// version decorations removed, deduplicated by (name, address), with `is_analysis` set by the default exclusion list.
pub fn parse_elf_symbols(elf_bytes: &[u8]) -> Result<Vec<SymbolRecord>> {
    Ok(parse_elf(elf_bytes, &AnalysisFilter::default())?.symbols)
}

pub fn parse_elf(elf_bytes: &[u8], filter: &AnalysisFilter) -> Result<ElfSummary> {
    if elf_bytes.len() < 4 || &elf_bytes[..4] != b"\x7fELF" {
        return Err(Error::NotElf);
    }
    if elf_bytes.len() < 16 {
        return Err(Error::TruncatedFile("e_ident".into()));
    }
    let class = match elf_bytes[4] {
        1 => Class::Elf32,
        2 => Class::Elf64,
        other => return Err(Error::UnsupportedClass(other)),
    };
    let big_endian = match elf_bytes[5] {
        1 => false,
        2 => true,
        other => return Err(Error::UnsupportedEncoding(other)),
    };
    let r = Reader {
        bytes: elf_bytes,
        big_endian,
        class,
    };

    let ehdr_len = match class {
        Class::Elf32 => 52,
        Class::Elf64 => 64,
    };
    let ehdr = r.slice(0, ehdr_len, "ELF header")?;
    let machine = r.u16(ehdr, 18);
    let (shoff, shentsize, mut shnum, mut shstrndx) = match class {
        Class::Elf32 => (
            r.u32(ehdr, 0x20) as u64,
            r.u16(ehdr, 0x2e) as u64,
            r.u16(ehdr, 0x30) as u64,
            r.u16(ehdr, 0x32) as u32,
        ),
        Class::Elf64 => (
            r.u64(ehdr, 0x28),
            r.u16(ehdr, 0x3a) as u64,
            r.u16(ehdr, 0x3c) as u64,
            r.u16(ehdr, 0x3e) as u32,
        ),
    };

    let min_shentsize = match class {
        Class::Elf32 => 40,
        Class::Elf64 => 64,
    };
    let mut sections = Vec::new();
    if shoff != 0 {
        if shentsize < min_shentsize {
            return Err(Error::TruncatedFile(format!("e_shentsize {shentsize}")));
        }
        // Extended numbering keeps the real counts in section 0.
        let first = read_section_header(&r, shoff)?;
        if shnum == 0 {
            shnum = first.size;
        }
        if shstrndx == SHN_XINDEX {
            shstrndx = first.link;
        }
        for i in 0..shnum {
            let at = i
                .checked_mul(shentsize)
                .and_then(|o| o.checked_add(shoff))
                .ok_or_else(|| Error::TruncatedFile("section header table".into()))?;
            sections.push(read_section_header(&r, at)?);
        }
    }

    let shstrtab = sections
        .get(shstrndx as usize)
        .filter(|_| shstrndx != 0)
        .map(|sh| r.slice(sh.offset, sh.size, "section name table"))
        .transpose()?;
    let debug_section_count = match shstrtab {
        Some(tab) => sections
            .iter()
            .filter(|sh| c_str(tab, sh.name as usize).starts_with(b".debug"))
            .count(),
        None => 0,
    };

    let mut symbols = Vec::new();
    let mut seen = HashSet::new();
    for kind in [SHT_SYMTAB, SHT_DYNSYM] {
        for sh in sections.iter().filter(|sh| sh.kind == kind) {
            let strtab = sections.get(sh.link as usize).ok_or_else(|| {
                Error::TruncatedFile(format!("symbol string table index {}", sh.link))
            })?;
            let strtab = r.slice(strtab.offset, strtab.size, "symbol string table")?;
            let table = r.slice(sh.offset, sh.size, "symbol table")?;
            read_functions(&r, table, sh.entsize, strtab, filter, &mut seen, &mut symbols)?;
        }
    }

    Ok(ElfSummary {
        is_64: class == Class::Elf64,
        big_endian,
        machine,
        file_size: elf_bytes.len() as u64,
        section_count: sections.len(),
        debug_section_count,
        symbols,
    })
}

fn read_section_header(r: &Reader<'_>, at: u64) -> Result<SectionHeader> {
    Ok(match r.class {
        Class::Elf32 => {
            let b = r.slice(at, 40, "section header")?;
            SectionHeader {
                name: r.u32(b, 0),
                kind: r.u32(b, 4),
                offset: r.u32(b, 16) as u64,
                size: r.u32(b, 20) as u64,
                link: r.u32(b, 24),
                entsize: r.u32(b, 36) as u64,
            }
        }
        Class::Elf64 => {
            let b = r.slice(at, 64, "section header")?;
            SectionHeader {
                name: r.u32(b, 0),
                kind: r.u32(b, 4),
                offset: r.u64(b, 24),
                size: r.u64(b, 32),
                link: r.u32(b, 40),
                entsize: r.u64(b, 56),
            }
        }
    })
}

fn read_functions(
    r: &Reader<'_>,
    table: &[u8],
    entsize: u64,
    strtab: &[u8],
    filter: &AnalysisFilter,
    seen: &mut HashSet<(String, u64)>,
    out: &mut Vec<SymbolRecord>,
) -> Result<()> {
    let min = match r.class {
        Class::Elf32 => 16,
        Class::Elf64 => 24,
    };
    let entsize = if entsize == 0 { min } else { entsize };
    if entsize < min {
        return Err(Error::TruncatedFile(format!("symbol entsize {entsize}")));
    }
    for entry in table.chunks_exact(entsize as usize) {
        let (name_off, info, value, size) = match r.class {
            Class::Elf32 => (r.u32(entry, 0), entry[12], r.word(entry, 4), r.word(entry, 8)),
            Class::Elf64 => (r.u32(entry, 0), entry[4], r.word(entry, 8), r.word(entry, 16)),
        };
        if info & 0xf != STT_FUNC {
            continue;
        }
        if name_off as usize >= strtab.len() && name_off != 0 {
            return Err(Error::TruncatedFile(format!("symbol name offset {name_off:#x}")));
        }
        let raw = String::from_utf8_lossy(c_str(strtab, name_off as usize)).into_owned();
        let name = unversioned(&raw).to_string();
        if seen.insert((name.clone(), value)) {
            out.push(SymbolRecord {
                is_analysis: filter.is_analysis(&name),
                name,
                address: value,
                size,
            });
        }
    }
    Ok(())
}

/// `strlen@GLIBC_2.2.5` and `foo@@V2` become `strlen` and `foo`.
fn unversioned(name: &str) -> &str {
    match name.find('@') {
        Some(at) if at > 0 => &name[..at],
        _ => name,
    }
}

fn c_str(tab: &[u8], at: usize) -> &[u8] {
    let Some(rest) = tab.get(at..) else {
        return &[];
    };
    let end = rest.iter().position(|&b| b == 0).unwrap_or(rest.len());
    &rest[..end]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_decorations_are_dropped() {
        assert_eq!(unversioned("strlen@GLIBC_2.2.5"), "strlen");
        assert_eq!(unversioned("foo@@V2"), "foo");
        assert_eq!(unversioned("plain"), "plain");
        assert_eq!(unversioned("@odd"), "@odd");
    }

    #[test]
    fn bad_magic_is_not_elf() {
        assert!(matches!(parse_elf_symbols(b"\x00\x00\x00\x00"), Err(Error::NotElf)));
        assert!(matches!(parse_elf_symbols(b""), Err(Error::NotElf)));
    }

    #[test]
    fn bad_class_is_rejected() {
        let mut b = vec![0u8; 64];
        b[..4].copy_from_slice(b"\x7fELF");
        b[4] = 3;
        b[5] = 1;
        assert!(matches!(parse_elf_symbols(&b), Err(Error::UnsupportedClass(3))));
    }

    #[test]
    fn short_header_is_truncated() {
        let mut b = vec![0u8; 20];
        b[..4].copy_from_slice(b"\x7fELF");
        b[4] = 2;
        b[5] = 1;
        assert!(matches!(parse_elf_symbols(&b), Err(Error::TruncatedFile(_))));
    }

    #[test]
    fn section_table_past_eof_is_truncated() {
        let mut b = vec![0u8; 64];
        b[..4].copy_from_slice(b"\x7fELF");
        b[4] = 2;
        b[5] = 1;
        b[0x28..0x30].copy_from_slice(&0x1000u64.to_le_bytes());
        b[0x3a..0x3c].copy_from_slice(&64u16.to_le_bytes());
        b[0x3c..0x3e].copy_from_slice(&3u16.to_le_bytes());
        assert!(matches!(parse_elf_symbols(&b), Err(Error::TruncatedFile(_))));
    }

    #[test]
    fn header_without_sections_has_no_symbols() {
        let mut b = vec![0u8; 64];
        b[..4].copy_from_slice(b"\x7fELF");
        b[4] = 2;
        b[5] = 1;
        let s = parse_elf(&b, &AnalysisFilter::default()).unwrap();
        assert!(s.symbols.is_empty());
        assert_eq!(s.section_count, 0);
    }
}
