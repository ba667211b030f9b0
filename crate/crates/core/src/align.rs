//! Bidirectional anonymous alignment between the labeled (unstripped) and
//! stripped functions of one (version, arch) bucket.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    format_addr, normalize_identity, parse_addr, Arch, BinaryId, Corpus, FunctionRecord,
    Identity, Placed, SymbolRecord, Version,
};
use crate::error::{Error, Result};
use crate::shape::{shape_descriptors_with, shape_distance, ShapeScale, ShapeVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignConfig {
    pub window: usize,
    pub threshold: f64,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            window: 96,
            threshold: 0.20,
        }
    }
}

impl AlignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::InvalidConfig("alignment window must be >= 1".into()));
        }
        if self.threshold.is_nan() || self.threshold <= 0.0 {
            return Err(Error::InvalidConfig("alignment threshold must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchAnchor {
    pub version: Version,
    pub arch: Arch,
    pub stripped_addr: u64,
    pub labeled_addr: u64,
    pub identity: Identity,
    pub distance: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Alignment {
    pub anchors: Vec<MatchAnchor>,
    /// Shape distances evaluated while scanning windows.
    pub distance_evaluations: u64,
}

/// Indices of the `w` entries whose primary coordinate is nearest `probe`.
///
/// `pool` holds `(s1, address)` sorted ascending by `s1` then address. The
/// window is contiguous; equal gaps on both sides go to the lower address.
pub fn top_window(pool: &[(f64, u64)], probe: f64, w: usize) -> Result<Range<usize>> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    if w >= pool.len() {
        return Ok(0..pool.len());
    }
    let split = pool.partition_point(|&(s1, _)| s1 < probe);
    let (mut lo, mut hi) = (split, split);
    while hi - lo < w {
        let take_left = match (lo.checked_sub(1), hi < pool.len()) {
            (Some(l), true) => {
                let dl = probe - pool[l].0;
                let dr = pool[hi].0 - probe;
                dl < dr || (dl == dr && pool[l].1 < pool[hi].1)
            }
            (Some(_), false) => true,
            (None, _) => false,
        };
        if take_left {
            lo -= 1;
        } else {
            hi += 1;
        }
    }
    Ok(lo..hi)
}

struct Side<'a> {
    shapes: Vec<&'a ShapeVector>,
    addrs: Vec<u64>,
    /// (s1, address) sorted, with the original index alongside.
    sorted: Vec<(f64, u64)>,
    order: Vec<usize>,
}

impl<'a> Side<'a> {
    fn new<T: Placed>(entries: &'a [(T, ShapeVector)]) -> Self {
        let shapes: Vec<&ShapeVector> = entries.iter().map(|(_, s)| s).collect();
        let addrs: Vec<u64> = entries.iter().map(|(f, _)| f.address()).collect();
        let mut order: Vec<usize> = (0..entries.len()).collect();
        order.sort_by(|&a, &b| {
            shapes[a]
                .log_size
                .total_cmp(&shapes[b].log_size)
                .then(addrs[a].cmp(&addrs[b]))
        });
        let sorted = order.iter().map(|&i| (shapes[i].log_size, addrs[i])).collect();
        Side {
            shapes,
            addrs,
            sorted,
            order,
        }
    }

    /// Nearest entry to `probe` within its window; ties by lower address
    /// then lower s1.
    fn nearest(
        &self,
        probe: &ShapeVector,
        w: usize,
        scale: &ShapeScale,
        evals: &mut u64,
    ) -> Option<(usize, f64)> {
        let range = top_window(&self.sorted, probe.log_size, w).ok()?;
        let mut best: Option<(usize, f64)> = None;
        for &idx in &self.order[range] {
            let d = shape_distance(probe, self.shapes[idx], scale);
            *evals += 1;
            let better = match best {
                None => true,
                Some((b, bd)) => {
                    d < bd
                        || (d == bd
                            && (self.addrs[idx], self.shapes[idx].log_size)
                                < (self.addrs[b], self.shapes[b].log_size))
                }
            };
            if better {
                best = Some((idx, d));
            }
        }
        best
    }
}

/// Mutual nearest neighbors within windows, accepted when the reverse
/// neighbor's distance is at most the threshold.
pub fn bidirectional_align<S: Placed>(
    labeled_id: &BinaryId,
    labeled: &[(SymbolRecord, ShapeVector)],
    stripped_id: &BinaryId,
    stripped: &[(S, ShapeVector)],
    config: &AlignConfig,
    scale: &ShapeScale,
) -> Result<Alignment> {
    if labeled_id.arch != stripped_id.arch {
        return Err(Error::ArchMismatch(
            labeled_id.arch.to_string(),
            stripped_id.arch.to_string(),
        ));
    }
    if labeled_id.version != stripped_id.version {
        return Err(Error::VersionMismatch(
            labeled_id.version.to_string(),
            stripped_id.version.to_string(),
        ));
    }
    config.validate()?;
    let mut out = Alignment::default();
    if labeled.is_empty() || stripped.is_empty() {
        return Ok(out);
    }

    let l_side = Side::new(labeled);
    let s_side = Side::new(stripped);
    let w = config.window;
    let mut evals = 0u64;

    let forward: Vec<usize> = labeled
        .iter()
        .map(|(_, shape)| s_side.nearest(shape, w, scale, &mut evals).unwrap().0)
        .collect();
    let reverse: Vec<(usize, f64)> = stripped
        .iter()
        .map(|(_, shape)| l_side.nearest(shape, w, scale, &mut evals).unwrap())
        .collect();

    for (s_idx, &(l_idx, dist)) in reverse.iter().enumerate() {
        if dist <= config.threshold && forward[l_idx] == s_idx {
            out.anchors.push(MatchAnchor {
                version: stripped_id.version.clone(),
                arch: stripped_id.arch.clone(),
                stripped_addr: s_side.addrs[s_idx],
                labeled_addr: l_side.addrs[l_idx],
                identity: normalize_identity(&labeled[l_idx].0.name)?,
                distance: dist,
            });
        }
    }
    out.distance_evaluations = evals;
    Ok(out)
}

/// Alignable stripped functions of a recovered list: non-zero size.
pub fn alignable_functions(functions: &[FunctionRecord]) -> Vec<&FunctionRecord> {
    functions.iter().filter(|f| f.size > 0).collect()
}

impl Placed for &FunctionRecord {
    fn address(&self) -> u64 {
        self.address
    }
    fn size(&self) -> u64 {
        self.size
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketStats {
    pub version: Version,
    pub arch: Arch,
    pub labeled: usize,
    pub stripped: usize,
    pub anchors: usize,
    pub distance_evaluations: u64,
}

#[derive(Debug, Clone, Default)]
pub struct CorpusAlignment {
    pub anchors: Vec<MatchAnchor>,
    pub buckets: Vec<BucketStats>,
    /// Buckets with only one branch present.
    pub unpaired: Vec<(Version, Arch)>,
}

/// Aligns every (version, arch) bucket holding both branches. Buckets run
/// in parallel; output is in bucket order.
pub fn align_corpus(
    corpus: &Corpus,
    config: &AlignConfig,
    scale: &ShapeScale,
    radius: usize,
) -> Result<CorpusAlignment> {
    config.validate()?;
    let keys: Vec<&(Version, Arch)> = corpus
        .stripped
        .keys()
        .filter(|k| corpus.labeled.contains_key(*k))
        .collect();
    let results = keys
        .par_iter()
        .map(|key| {
            let export = &corpus.stripped[*key];
            let table = &corpus.labeled[*key];
            let labeled_fns = table.alignable();
            let stripped_fns = alignable_functions(&export.functions);
            let mut alignment = Alignment::default();
            if !labeled_fns.is_empty() && !stripped_fns.is_empty() {
                let l_shapes = shape_descriptors_with(&labeled_fns, radius)?;
                let s_shapes = shape_descriptors_with(&stripped_fns, radius)?;
                let labeled: Vec<_> = labeled_fns.into_iter().zip(l_shapes).collect();
                let stripped: Vec<_> = stripped_fns.into_iter().zip(s_shapes).collect();
                let l_id = BinaryId::new(table.version.clone(), table.arch.clone(), crate::corpus::Branch::Unstripped);
                alignment = bidirectional_align(&l_id, &labeled, &export.binary_id(), &stripped, config, scale)?;
                return Ok((alignment, labeled.len(), stripped.len()));
            }
            Ok((std::mem::take(&mut alignment), labeled_fns.len(), stripped_fns.len()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = CorpusAlignment::default();
    for (key, (alignment, n_l, n_s)) in keys.iter().zip(results) {
        out.buckets.push(BucketStats {
            version: key.0.clone(),
            arch: key.1.clone(),
            labeled: n_l,
            stripped: n_s,
            anchors: alignment.anchors.len(),
            distance_evaluations: alignment.distance_evaluations,
        });
        out.anchors.extend(alignment.anchors);
    }
    out.unpaired = corpus
        .stripped
        .keys()
        .chain(corpus.labeled.keys())
        .filter(|k| !(corpus.stripped.contains_key(*k) && corpus.labeled.contains_key(*k)))
        .cloned()
        .collect();
    out.unpaired.sort();
    out.unpaired.dedup();
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct AnchorRow {
    version: String,
    arch: String,
    stripped_addr: String,
    labeled_addr: String,
    identity: String,
    distance: f64,
}

const ANCHOR_HEADER: &str = "version,arch,stripped_addr,labeled_addr,identity,distance";

pub fn write_anchor_csv(anchors: &[MatchAnchor]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for a in anchors {
        w.serialize(AnchorRow {
            version: a.version.to_string(),
            arch: a.arch.to_string(),
            stripped_addr: format_addr(a.stripped_addr),
            labeled_addr: format_addr(a.labeled_addr),
            identity: a.identity.to_string(),
            distance: a.distance,
        })
        .expect("in-memory csv");
    }
    let bytes = w.into_inner().expect("in-memory csv");
    if anchors.is_empty() {
        return format!("{ANCHOR_HEADER}\n");
    }
    String::from_utf8(bytes).expect("utf-8 csv")
}

pub fn read_anchor_csv(text: &str) -> Result<Vec<MatchAnchor>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, row) in r.deserialize::<AnchorRow>().enumerate() {
        let bad = |d: &str| Error::SchemaViolation(format!("anchor row {}: {d}", i + 1));
        let row = row.map_err(|e| bad(&e.to_string()))?;
        out.push(MatchAnchor {
            version: Version::parse(&row.version)?,
            arch: Arch::from(row.arch.as_str()),
            stripped_addr: parse_addr(&row.stripped_addr).ok_or_else(|| bad("stripped_addr"))?,
            labeled_addr: parse_addr(&row.labeled_addr).ok_or_else(|| bad("labeled_addr"))?,
            identity: Identity::from_normalized(row.identity),
            distance: row.distance,
        });
    }
    Ok(out)
}

pub fn load_anchor_csv(path: &Path) -> Result<Vec<MatchAnchor>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_anchor_csv(&text).map_err(|e| Error::parse(path, e))
}

/// Lookup from a stripped function to its anchor.
#[derive(Debug, Clone, Default)]
pub struct AnchorIndex {
    by_stripped: BTreeMap<(Version, Arch, u64), usize>,
    anchors: Vec<MatchAnchor>,
}

impl AnchorIndex {
    pub fn new(anchors: Vec<MatchAnchor>) -> Self {
        let by_stripped = anchors
            .iter()
            .enumerate()
            .map(|(i, a)| ((a.version.clone(), a.arch.clone(), a.stripped_addr), i))
            .collect();
        AnchorIndex {
            by_stripped,
            anchors,
        }
    }

    pub fn get(&self, version: &Version, arch: &Arch, stripped_addr: u64) -> Option<&MatchAnchor> {
        self.by_stripped
            .get(&(version.clone(), arch.clone(), stripped_addr))
            .map(|&i| &self.anchors[i])
    }

    pub fn identity(&self, version: &Version, arch: &Arch, stripped_addr: u64) -> Option<&Identity> {
        self.get(version, arch, stripped_addr).map(|a| &a.identity)
    }

    pub fn anchors(&self) -> &[MatchAnchor] {
        &self.anchors
    }
}
