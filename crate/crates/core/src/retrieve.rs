//! Candidate scoring and ranking: the evolution-aware score plus the
//! size-only and shape-only baselines.

use serde::{Deserialize, Serialize};

use crate::corpus::Identity;
use crate::embed::cosine;
use crate::error::{Error, Result};
use crate::prototype::PrototypeBank;
use crate::shape::{log_size, shape_distance, ShapeScale, ShapeVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreWeights {
    pub lambda_s: f64,
    pub lambda_f: f64,
    pub lambda_p: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights {
            lambda_s: 0.70,
            lambda_f: 0.10,
            lambda_p: 0.20,
        }
    }
}

impl ScoreWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.lambda_s, self.lambda_f, self.lambda_p];
        if w.iter().all(|&x| x >= 0.0 && x.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("score weights must be >= 0, got {w:?}")))
        }
    }
}

/// What a scorer sees of one function.
#[derive(Debug, Clone, Copy)]
pub struct FunctionView<'a> {
    pub address: u64,
    pub size: u64,
    pub shape: &'a ShapeVector,
    pub embedding: &'a [f32],
}

/// Per-term evidence behind a score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub r_s: f64,
    pub r_f: f64,
    pub r_p: f64,
    pub total: f64,
}

impl ScoreBreakdown {
    fn single(total: f64) -> Self {
        ScoreBreakdown {
            r_s: 0.0,
            r_f: 0.0,
            r_p: 0.0,
            total,
        }
    }
}

/// Scores candidates against a query fixed at construction.
pub trait Scorer: Sync {
    fn query_address(&self) -> Option<u64>;
    fn score(&self, candidate: &FunctionView<'_>) -> ScoreBreakdown;
}

/// R = λs·(−D_s) + λf·cos(z(q), z(c)) + λp·cos(z(c), p_u).
pub fn evo_score(
    q: &FunctionView<'_>,
    c: &FunctionView<'_>,
    prototype: Option<&[f32]>,
    weights: &ScoreWeights,
    scale: &ShapeScale,
) -> ScoreBreakdown {
    let r_s = -shape_distance(q.shape, c.shape, scale);
    let r_f = cosine(q.embedding, c.embedding);
    let r_p = prototype.map_or(0.0, |p| cosine(c.embedding, p));
    ScoreBreakdown {
        r_s,
        r_f,
        r_p,
        total: weights.lambda_s * r_s + weights.lambda_f * r_f + weights.lambda_p * r_p,
    }
}

pub fn size_score(query_size: u64, candidate_size: u64) -> f64 {
    -(log_size(query_size) - log_size(candidate_size)).abs()
}

pub fn shape_score(q: &ShapeVector, c: &ShapeVector, scale: &ShapeScale) -> f64 {
    -shape_distance(q, c, scale)
}

pub struct EvoScorer<'a> {
    pub query: FunctionView<'a>,
    pub prototype: Option<&'a [f32]>,
    pub weights: ScoreWeights,
    pub scale: ShapeScale,
}

impl<'a> EvoScorer<'a> {
    /// Resolves the query identity's prototype from the bank.
    pub fn new(
        query: FunctionView<'a>,
        bank: &'a PrototypeBank,
        identity: Option<&Identity>,
        weights: ScoreWeights,
        scale: ShapeScale,
    ) -> Self {
        EvoScorer {
            query,
            prototype: identity.and_then(|u| bank.lookup(u)),
            weights,
            scale,
        }
    }
}

impl Scorer for EvoScorer<'_> {
    fn query_address(&self) -> Option<u64> {
        Some(self.query.address)
    }
    fn score(&self, c: &FunctionView<'_>) -> ScoreBreakdown {
        evo_score(&self.query, c, self.prototype, &self.weights, &self.scale)
    }
}

pub struct ShapeStat<'a> {
    pub query: FunctionView<'a>,
    pub scale: ShapeScale,
}

impl Scorer for ShapeStat<'_> {
    fn query_address(&self) -> Option<u64> {
        Some(self.query.address)
    }
    fn score(&self, c: &FunctionView<'_>) -> ScoreBreakdown {
        let r_s = shape_score(self.query.shape, c.shape, &self.scale);
        ScoreBreakdown {
            r_s,
            ..ScoreBreakdown::single(r_s)
        }
    }
}

pub struct SizeStat<'a> {
    pub query: FunctionView<'a>,
}

impl Scorer for SizeStat<'_> {
    fn query_address(&self) -> Option<u64> {
        Some(self.query.address)
    }
    fn score(&self, c: &FunctionView<'_>) -> ScoreBreakdown {
        ScoreBreakdown::single(size_score(self.query.size, c.size))
    }
}

/// Ranks by the prototype term alone, for hunts that know the identity but
/// have no reference function features.
pub struct PrototypeOnly<'a> {
    pub prototype: Option<&'a [f32]>,
    pub lambda_p: f64,
}

impl Scorer for PrototypeOnly<'_> {
    fn query_address(&self) -> Option<u64> {
        None
    }
    fn score(&self, c: &FunctionView<'_>) -> ScoreBreakdown {
        let r_p = self.prototype.map_or(0.0, |p| cosine(c.embedding, p));
        ScoreBreakdown {
            r_p,
            ..ScoreBreakdown::single(self.lambda_p * r_p)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedCandidate {
    pub rank: usize,
    pub address: u64,
    #[serde(flatten)]
    pub score: ScoreBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedList {
    pub query_address: Option<u64>,
    pub pool_size: usize,
    pub candidates: Vec<RankedCandidate>,
}

impl RankedList {
    pub fn addresses(&self) -> impl Iterator<Item = u64> + '_ {
        self.candidates.iter().map(|c| c.address)
    }
}

/// Descending score; ties by ascending address, then pool order.
pub fn rank(pool: &[FunctionView<'_>], scorer: &dyn Scorer) -> Result<RankedList> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    let mut scored: Vec<(usize, ScoreBreakdown)> =
        pool.iter().map(|c| scorer.score(c)).enumerate().collect();
    scored.sort_by(|(i, a), (j, b)| {
        b.total
            .total_cmp(&a.total)
            .then(pool[*i].address.cmp(&pool[*j].address))
    });
    Ok(RankedList {
        query_address: scorer.query_address(),
        pool_size: pool.len(),
        candidates: scored
            .into_iter()
            .enumerate()
            .map(|(r, (i, score))| RankedCandidate {
                rank: r + 1,
                address: pool[i].address,
                score,
            })
            .collect(),
    })
}
