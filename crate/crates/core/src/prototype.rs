//! Historical prototypes: the mean fused embedding of each identity over
//! training anchors from strictly older versions.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::align::MatchAnchor;
use crate::corpus::{format_addr, parse_addr, Arch, Identity, Version};
use crate::embed::store::{decode_vectors, encode_vectors};
use crate::embed::{FusedEmbedding, FUSED_DIM};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeEntry {
    pub vector: Vec<f32>,
    pub member_count: u64,
    pub newest_version: Version,
}

/// A training function that contributed to a prototype.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PrototypeMember {
    pub version: Version,
    pub arch: Arch,
    pub stripped_addr: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PrototypeBank {
    entries: BTreeMap<Identity, PrototypeEntry>,
    members: BTreeMap<Identity, Vec<PrototypeMember>>,
}

/// Averages every anchor embedding whose version is strictly older than
/// `cutoff`, per identity, across all architectures.
pub fn build_prototypes<'a, I>(anchors: I, cutoff: &Version) -> PrototypeBank
where
    I: IntoIterator<Item = (&'a MatchAnchor, &'a FusedEmbedding)>,
{
    let mut sums: BTreeMap<Identity, (Vec<f64>, Vec<PrototypeMember>, Version)> = BTreeMap::new();
    for (anchor, z) in anchors {
        if anchor.version >= *cutoff {
            continue;
        }
        let (sum, members, newest) = sums
            .entry(anchor.identity.clone())
            .or_insert_with(|| (vec![0.0; FUSED_DIM], Vec::new(), anchor.version.clone()));
        for (s, &x) in sum.iter_mut().zip(z.as_slice()) {
            *s += x as f64;
        }
        members.push(PrototypeMember {
            version: anchor.version.clone(),
            arch: anchor.arch.clone(),
            stripped_addr: anchor.stripped_addr,
        });
        if anchor.version > *newest {
            *newest = anchor.version.clone();
        }
    }

    let mut bank = PrototypeBank::default();
    for (identity, (sum, members, newest_version)) in sums {
        let n = members.len() as f64;
        bank.entries.insert(
            identity.clone(),
            PrototypeEntry {
                vector: sum.iter().map(|s| (s / n) as f32).collect(),
                member_count: members.len() as u64,
                newest_version,
            },
        );
        bank.members.insert(identity, members);
    }
    bank
}

impl PrototypeBank {
    /// `None` is the absent marker; scorers map it to a zero prototype term.
    pub fn lookup(&self, identity: &Identity) -> Option<&[f32]> {
        self.entries.get(identity).map(|e| e.vector.as_slice())
    }

    pub fn entry(&self, identity: &Identity) -> Option<&PrototypeEntry> {
        self.entries.get(identity)
    }

    pub fn members(&self, identity: &Identity) -> &[PrototypeMember] {
        self.members.get(identity).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn identities(&self) -> impl Iterator<Item = &Identity> {
        self.entries.keys()
    }

    /// Identity manifest: `identity<TAB>member_count<TAB>newest_version`.
    pub fn manifest_text(&self) -> String {
        let mut out = String::new();
        for (id, e) in &self.entries {
            writeln!(out, "{id}\t{}\t{}", e.member_count, e.newest_version).unwrap();
        }
        out
    }

    /// Prototype vectors in manifest order.
    pub fn vector_bytes(&self) -> Vec<u8> {
        let rows: Vec<&[f32]> = self.entries.values().map(|e| e.vector.as_slice()).collect();
        encode_vectors(FUSED_DIM, &rows).expect("prototype rows have the fused dimension")
    }

    /// Member manifest: `identity<TAB>version<TAB>arch<TAB>stripped_addr`.
    pub fn members_text(&self) -> String {
        let mut out = String::new();
        for (id, members) in &self.members {
            for m in members {
                writeln!(out, "{id}\t{}\t{}\t{}", m.version, m.arch, format_addr(m.stripped_addr)).unwrap();
            }
        }
        out
    }

    pub fn from_parts(manifest: &str, vectors: &[u8], members: &str) -> Result<Self> {
        let (dim, rows) = decode_vectors(vectors)?;
        let lines: Vec<&str> = manifest.lines().filter(|l| !l.is_empty()).collect();
        if (dim != FUSED_DIM && !rows.is_empty()) || rows.len() != lines.len() {
            return Err(Error::IndexIntegrity(format!(
                "prototype manifest lists {} identities, store holds {} rows of dim {dim}",
                lines.len(),
                rows.len()
            )));
        }
        let bad = |what: &str, line: &str| Error::IndexIntegrity(format!("bad {what} line {line:?}"));
        let mut bank = PrototypeBank::default();
        for (line, vector) in lines.into_iter().zip(rows) {
            let [id, count, version] = line.split('\t').collect::<Vec<_>>()[..] else {
                return Err(bad("prototype manifest", line));
            };
            bank.entries.insert(
                Identity::from_normalized(id),
                PrototypeEntry {
                    vector,
                    member_count: count.parse().map_err(|_| bad("prototype manifest", line))?,
                    newest_version: Version::parse(version)?,
                },
            );
        }
        for line in members.lines().filter(|l| !l.is_empty()) {
            let [id, version, arch, addr] = line.split('\t').collect::<Vec<_>>()[..] else {
                return Err(bad("member", line));
            };
            bank.members
                .entry(Identity::from_normalized(id))
                .or_default()
                .push(PrototypeMember {
                    version: Version::parse(version)?,
                    arch: Arch::from(arch),
                    stripped_addr: parse_addr(addr).ok_or_else(|| bad("member", line))?,
                });
        }
        for (id, e) in &bank.entries {
            if bank.members(id).len() as u64 != e.member_count {
                return Err(Error::IndexIntegrity(format!(
                    "prototype {id} declares {} members, manifest lists {}",
                    e.member_count,
                    bank.members(id).len()
                )));
            }
        }
        Ok(bank)
    }
}
