//! Task-1 retrieval evaluation: for every version and directed arch pair,
//! rank each anchored source function against the whole target binary and
//! record where the first same-identity candidate lands.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Arch, Corpus, Identity, Version};
use crate::error::{Error, Result};
use crate::index::{stripped_shapes, Index};
use crate::retrieve::{rank, EvoScorer, FunctionView, RankedList, ScoreWeights, Scorer, ShapeStat, SizeStat};

/// Ranks beyond the top-10 window collapse to this value.
pub const MISS_RANK: usize = 11;

pub fn first_hit_rank(ranked: &RankedList, truth: &BTreeSet<u64>) -> Result<usize> {
    let hit = ranked.candidates.iter().find(|c| truth.contains(&c.address));
    match hit {
        Some(c) => Ok(c.rank.min(MISS_RANK)),
        None => Err(Error::TruthNotInPool(truth.first().copied().unwrap_or(0))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    pub identity: Identity,
    pub query_address: u64,
    pub rank: usize,
    pub pool_size: usize,
}

fn nonempty(ranks: &[usize]) -> Result<f64> {
    if ranks.is_empty() {
        Err(Error::EmptyQuerySet)
    } else {
        Ok(ranks.len() as f64)
    }
}

pub fn mrr_at_10(ranks: &[usize]) -> Result<f64> {
    let n = nonempty(ranks)?;
    Ok(ranks
        .iter()
        .map(|&r| if r < MISS_RANK { 1.0 / r as f64 } else { 0.0 })
        .sum::<f64>()
        / n)
}

pub fn hit_at_k(ranks: &[usize], k: usize) -> Result<f64> {
    if !(1..MISS_RANK).contains(&k) {
        return Err(Error::InvalidK(k));
    }
    let n = nonempty(ranks)?;
    Ok(ranks.iter().filter(|&&r| r <= k).count() as f64 / n)
}

pub fn mean_inspected_at_10(ranks: &[usize]) -> Result<f64> {
    let n = nonempty(ranks)?;
    Ok(ranks.iter().map(|&r| r.min(MISS_RANK) as f64).sum::<f64>() / n)
}

pub fn inspection_reduction(mean_rank: f64, mean_pool: f64) -> Result<f64> {
    if mean_pool <= 0.0 {
        return Err(Error::ZeroPool);
    }
    Ok(1.0 - mean_rank / mean_pool)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    EvoPatch,
    ShapeStat,
    SizeStat,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::EvoPatch, Method::ShapeStat, Method::SizeStat];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::EvoPatch => "EvoPatch",
            Method::ShapeStat => "ShapeStat",
            Method::SizeStat => "SizeStat",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub method: Method,
    pub version: Version,
    pub source: Arch,
    pub target: Arch,
    pub query_count: usize,
    pub hit_at_1: f64,
    pub hit_at_5: f64,
    pub hit_at_10: f64,
    pub mrr_at_10: f64,
    pub mean_inspected_at_10: f64,
    pub mean_pool: f64,
}

impl PairReport {
    pub fn from_outcomes(
        method: Method,
        version: Version,
        source: Arch,
        target: Arch,
        outcomes: &[QueryOutcome],
    ) -> Result<Self> {
        let ranks: Vec<usize> = outcomes.iter().map(|o| o.rank).collect();
        Ok(PairReport {
            method,
            version,
            source,
            target,
            query_count: ranks.len(),
            hit_at_1: hit_at_k(&ranks, 1)?,
            hit_at_5: hit_at_k(&ranks, 5)?,
            hit_at_10: hit_at_k(&ranks, 10)?,
            mrr_at_10: mrr_at_10(&ranks)?,
            mean_inspected_at_10: mean_inspected_at_10(&ranks)?,
            mean_pool: outcomes.iter().map(|o| o.pool_size as f64).sum::<f64>() / ranks.len() as f64,
        })
    }
}

/// Query-count-weighted aggregate over pair reports of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub method: Method,
    pub pairs: usize,
    pub queries: usize,
    pub hit_at_1: f64,
    pub hit_at_5: f64,
    pub hit_at_10: f64,
    pub mrr_at_10: f64,
    pub mean_inspected_at_10: f64,
    pub mean_pool: f64,
    pub inspection_reduction: f64,
}

pub fn summarize(method: Method, reports: &[PairReport]) -> Result<Summary> {
    let mine: Vec<&PairReport> = reports.iter().filter(|r| r.method == method).collect();
    let queries: usize = mine.iter().map(|r| r.query_count).sum();
    if queries == 0 {
        return Err(Error::EmptyQuerySet);
    }
    let w = |f: fn(&PairReport) -> f64| {
        mine.iter().map(|r| r.query_count as f64 * f(r)).sum::<f64>() / queries as f64
    };
    let mean_inspected = w(|r| r.mean_inspected_at_10);
    let mean_pool = w(|r| r.mean_pool);
    Ok(Summary {
        method,
        pairs: mine.len(),
        queries,
        hit_at_1: w(|r| r.hit_at_1),
        hit_at_5: w(|r| r.hit_at_5),
        hit_at_10: w(|r| r.hit_at_10),
        mrr_at_10: w(|r| r.mrr_at_10),
        mean_inspected_at_10: mean_inspected,
        mean_pool,
        inspection_reduction: inspection_reduction(mean_inspected, mean_pool)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPair {
    pub version: Version,
    pub source: Arch,
    pub target: Arch,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub skipped_pairs: Vec<SkippedPair>,
    /// Queries dropped because the target held no same-identity anchor.
    pub queries_without_truth: usize,
    /// Anchored source functions below the size filter.
    pub queries_below_size_filter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub methods: Vec<Method>,
    pub weights: ScoreWeights,
    pub min_bytes: u64,
    pub min_instructions: u64,
    /// Restrict to these versions; all must be at or after the cutoff.
    pub versions: Option<Vec<Version>>,
    /// Restrict queries to these identities.
    pub identities: Option<BTreeSet<Identity>>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            methods: Method::ALL.to_vec(),
            weights: ScoreWeights::default(),
            min_bytes: 16,
            min_instructions: 4,
            versions: None,
            identities: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task1Result {
    pub cutoff: Version,
    pub reports: Vec<PairReport>,
    pub summaries: Vec<Summary>,
    pub diagnostics: Diagnostics,
}

/// Versions the index may be evaluated on: at or after its cutoff.
pub fn evaluation_versions(corpus: &Corpus, index: &Index, requested: Option<&[Version]>) -> Result<Vec<Version>> {
    let available: Vec<Version> = corpus.versions().into_iter().filter(|v| *v >= index.cutoff).collect();
    match requested {
        Some(req) => {
            if let Some(v) = req.iter().find(|v| **v < index.cutoff) {
                return Err(Error::Leakage(format!(
                    "version {v} is older than the index cutoff {} and was used for training",
                    index.cutoff
                )));
            }
            Ok(req.to_vec())
        }
        None if available.is_empty() => Err(Error::Leakage(format!(
            "index cutoff {} excludes no corpus version; every version was available to training",
            index.cutoff
        ))),
        None => Ok(available),
    }
}

struct Prepared<'a> {
    addrs: Vec<u64>,
    sizes: Vec<u64>,
    insns: Vec<u64>,
    shapes: Vec<crate::shape::ShapeVector>,
    vectors: Vec<&'a [f32]>,
    identities: Vec<Option<&'a Identity>>,
}

impl Prepared<'_> {
    fn view(&self, i: usize) -> FunctionView<'_> {
        FunctionView {
            address: self.addrs[i],
            size: self.sizes[i],
            shape: &self.shapes[i],
            embedding: self.vectors[i],
        }
    }
}

fn prepare<'a>(corpus: &'a Corpus, index: &'a Index, key: &(Version, Arch)) -> Result<Option<Prepared<'a>>> {
    let (Some(export), Some(vectors)) = (corpus.stripped.get(key), index.vectors.get(key)) else {
        return Ok(None);
    };
    let shaped = stripped_shapes(export, index.settings.neighborhood)?;
    let mut p = Prepared {
        addrs: Vec::with_capacity(shaped.len()),
        sizes: Vec::new(),
        insns: Vec::new(),
        shapes: Vec::new(),
        vectors: Vec::new(),
        identities: Vec::new(),
    };
    for s in &shaped {
        let a = s.record.address;
        let z = vectors.get(a).ok_or_else(|| {
            Error::IndexIntegrity(format!("no fused vector for {}/{} at {a:#x}", key.0, key.1))
        })?;
        p.addrs.push(a);
        p.sizes.push(s.record.size);
        p.insns.push(s.record.instruction_count);
        p.shapes.push(s.shape);
        p.vectors.push(z);
        p.identities.push(index.anchors.identity(&key.0, &key.1, a));
    }
    Ok(Some(p))
}

fn make_scorer<'a>(
    method: Method,
    query: FunctionView<'a>,
    identity: &Identity,
    index: &'a Index,
    weights: ScoreWeights,
) -> Box<dyn Scorer + 'a> {
    let scale = index.settings.shape_scale;
    match method {
        Method::EvoPatch => Box::new(EvoScorer::new(query, &index.prototypes, Some(identity), weights, scale)),
        Method::ShapeStat => Box::new(ShapeStat { query, scale }),
        Method::SizeStat => Box::new(SizeStat { query }),
    }
}

pub fn run_task1(corpus: &Corpus, index: &Index, options: &EvalOptions) -> Result<Task1Result> {
    options.weights.validate()?;
    let versions = evaluation_versions(corpus, index, options.versions.as_deref())?;
    let arches = corpus.arches();

    let keys: Vec<(Version, Arch)> = versions
        .iter()
        .flat_map(|v| arches.iter().map(move |a| (v.clone(), a.clone())))
        .collect();
    let prepared: BTreeMap<&(Version, Arch), Option<Prepared<'_>>> = keys
        .par_iter()
        .map(|k| Ok((k, prepare(corpus, index, k)?)))
        .collect::<Result<_>>()?;

    let mut pairs = Vec::new();
    let mut diagnostics = Diagnostics::default();
    for v in &versions {
        for src in &arches {
            for tgt in arches.iter().filter(|t| *t != src) {
                let s = prepared.get(&(v.clone(), src.clone())).and_then(Option::as_ref);
                let t = prepared.get(&(v.clone(), tgt.clone())).and_then(Option::as_ref);
                match (s, t) {
                    (Some(s), Some(t)) if !t.addrs.is_empty() => pairs.push((v, src, tgt, s, t)),
                    _ => diagnostics.skipped_pairs.push(SkippedPair {
                        version: v.clone(),
                        source: src.clone(),
                        target: tgt.clone(),
                        reason: "missing bucket".into(),
                    }),
                }
            }
        }
    }

    type PairOut = (Vec<PairReport>, Option<SkippedPair>, usize, usize);
    let results: Vec<PairOut> = pairs
        .par_iter()
        .map(|(v, src, tgt, s, t)| -> Result<PairOut> {
            let mut truth_of: BTreeMap<&Identity, BTreeSet<u64>> = BTreeMap::new();
            for (i, id) in t.identities.iter().enumerate() {
                if let Some(id) = id {
                    truth_of.entry(id).or_default().insert(t.addrs[i]);
                }
            }
            let pool: Vec<FunctionView<'_>> = (0..t.addrs.len()).map(|i| t.view(i)).collect();
            let (mut no_truth, mut small) = (0, 0);
            let mut outcomes: BTreeMap<Method, Vec<QueryOutcome>> = BTreeMap::new();
            for (i, id) in s.identities.iter().enumerate() {
                let Some(id) = id else { continue };
                if options.identities.as_ref().is_some_and(|keep| !keep.contains(*id)) {
                    continue;
                }
                if s.sizes[i] < options.min_bytes || s.insns[i] < options.min_instructions {
                    small += 1;
                    continue;
                }
                let Some(truth) = truth_of.get(id) else {
                    no_truth += 1;
                    continue;
                };
                for &m in &options.methods {
                    let scorer = make_scorer(m, s.view(i), id, index, options.weights);
                    let ranked = rank(&pool, scorer.as_ref())?;
                    outcomes.entry(m).or_default().push(QueryOutcome {
                        identity: (*id).clone(),
                        query_address: s.addrs[i],
                        rank: first_hit_rank(&ranked, truth)?,
                        pool_size: pool.len(),
                    });
                }
            }
            if outcomes.is_empty() {
                let skipped = SkippedPair {
                    version: (*v).clone(),
                    source: (*src).clone(),
                    target: (*tgt).clone(),
                    reason: "no eligible queries".into(),
                };
                return Ok((Vec::new(), Some(skipped), no_truth, small));
            }
            let reports = outcomes
                .into_iter()
                .map(|(m, o)| PairReport::from_outcomes(m, (*v).clone(), (*src).clone(), (*tgt).clone(), &o))
                .collect::<Result<_>>()?;
            Ok((reports, None, no_truth, small))
        })
        .collect::<Result<_>>()?;

    let mut reports = Vec::new();
    for (r, skipped, no_truth, small) in results {
        reports.extend(r);
        diagnostics.skipped_pairs.extend(skipped);
        diagnostics.queries_without_truth += no_truth;
        diagnostics.queries_below_size_filter += small;
    }
    reports.sort_by(|a, b| {
        (&a.version, &a.source, &a.target, a.method).cmp(&(&b.version, &b.source, &b.target, b.method))
    });
    diagnostics
        .skipped_pairs
        .sort_by(|a, b| (&a.version, &a.source, &a.target).cmp(&(&b.version, &b.source, &b.target)));
    let summaries = options
        .methods
        .iter()
        .filter(|m| reports.iter().any(|r| r.method == **m))
        .map(|&m| summarize(m, &reports))
        .collect::<Result<_>>()?;
    Ok(Task1Result {
        cutoff: index.cutoff.clone(),
        reports,
        summaries,
        diagnostics,
    })
}

impl Task1Result {
    pub fn summary(&self, method: Method) -> Option<&Summary> {
        self.summaries.iter().find(|s| s.method == method)
    }
}

pub fn write_pair_csv(reports: &[PairReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in reports {
        w.serialize(r).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn read_pair_csv(text: &str) -> Result<Vec<PairReport>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|row| row.map_err(|e| Error::SchemaViolation(e.to_string())))
        .collect()
}
