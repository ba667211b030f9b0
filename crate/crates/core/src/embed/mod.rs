//! Fixed multi-view function representation.
//!
//! Layout of a fused vector (offsets are part of the on-disk contract):
//!
//! | range     | view                                   |
//! |-----------|----------------------------------------|
//! | 0..256    | hashed TF-IDF instruction tokens       |
//! | 256..292  | per-arch normalized graph statistics   |
//! | 292..356  | hashed TF-IDF context events           |
//! | 356..361  | per-arch normalized shape descriptor   |

mod graph;
mod hash;
mod idf;
mod moments;
pub mod store;

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::corpus::{Arch, FunctionRecord};
use crate::shape::ShapeVector;

pub use graph::{graph_vector, GraphVector, GRAPH_DIM};
pub use hash::{fnv1a64, hashed_embedding, term_slot};
pub use idf::{fit_idf, IdfTable, Space};
pub use moments::{fit_arch_moments, ArchMoments, Moments, DEFAULT_EPSILON};

#[cfg(test)]
pub(crate) use graph::bare_record;

pub const TOKEN_DIM: usize = 256;
pub const CONTEXT_DIM: usize = 64;
pub const SHAPE_DIM: usize = 5;
pub const FUSED_DIM: usize = TOKEN_DIM + GRAPH_DIM + CONTEXT_DIM + SHAPE_DIM;

pub const TOKEN_RANGE: Range<usize> = 0..256;
pub const GRAPH_RANGE: Range<usize> = 256..292;
pub const CONTEXT_RANGE: Range<usize> = 292..356;
pub const SHAPE_RANGE: Range<usize> = 356..361;

#[derive(Debug, Clone, PartialEq)]
pub struct FusedEmbedding(Vec<f32>);

impl FusedEmbedding {
    pub fn from_vec(v: Vec<f32>) -> Option<Self> {
        (v.len() == FUSED_DIM).then_some(FusedEmbedding(v))
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.0
    }
}

/// Cosine similarity accumulated in f64; 0 when either side is all-zero.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

/// The training-split statistics needed to fuse any function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedder {
    pub token_idf: IdfTable,
    pub context_idf: IdfTable,
    pub moments: ArchMoments,
}

impl Embedder {
    pub fn fuse(&self, arch: &Arch, f: &FunctionRecord, shape: &ShapeVector) -> FusedEmbedding {
        let mut z = Vec::with_capacity(FUSED_DIM);
        let tokens = hashed_embedding(&f.tokens, &self.token_idf, TOKEN_DIM);
        let graph = self.moments.normalize_graph(arch, &graph_vector(f));
        let contexts = hashed_embedding(&f.contexts, &self.context_idf, CONTEXT_DIM);
        let shape = self.moments.normalize_shape(arch, shape);
        z.extend(tokens.iter().map(|&x| x as f32));
        z.extend(graph.iter().map(|&x| x as f32));
        z.extend(contexts.iter().map(|&x| x as f32));
        z.extend(shape.iter().map(|&x| x as f32));
        debug_assert_eq!(z.len(), FUSED_DIM);
        FusedEmbedding(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn embedder(records: &[(FunctionRecord, ShapeVector)], arch: &Arch) -> Embedder {
        let token_idf = fit_idf(records.iter().map(|(f, _)| &f.tokens), Space::Token).unwrap();
        let context_idf = fit_idf(records.iter().map(|(f, _)| &f.contexts), Space::Context).unwrap();
        let graphs: Vec<GraphVector> = records.iter().map(|(f, _)| graph_vector(f)).collect();
        let moments = fit_arch_moments(
            graphs.iter().zip(records).map(|(g, (_, s))| (arch, g, s)),
            DEFAULT_EPSILON,
        )
        .unwrap();
        Embedder {
            token_idf,
            context_idf,
            moments,
        }
    }

    fn record(size: u64, insns: u64, tokens: &[&str]) -> FunctionRecord {
        let mut f = bare_record(size);
        f.instruction_count = insns;
        f.op_class_counts[0] = insns;
        f.block_count = 1;
        f.tokens = tokens.iter().map(|s| s.to_string()).collect();
        f.contexts = vec!["call:1".into()];
        f
    }

    #[test]
    fn layout_constants() {
        assert_eq!(FUSED_DIM, 361);
        assert_eq!(TOKEN_RANGE.len() + GRAPH_RANGE.len() + CONTEXT_RANGE.len() + SHAPE_RANGE.len(), 361);
        assert_eq!(GRAPH_RANGE.start, TOKEN_RANGE.end);
        assert_eq!(CONTEXT_RANGE.start, GRAPH_RANGE.end);
        assert_eq!(SHAPE_RANGE.start, CONTEXT_RANGE.end);
        assert_eq!(SHAPE_RANGE.end, FUSED_DIM);
    }

    #[test]
    fn mean_function_has_zero_graph_and_shape_sections() {
        let arch = Arch::Arm;
        let a = (record(100, 10, &["x"]), ShapeVector::from_array([1.0, 0.0, 0.0, 1.0, 0.0]));
        let b = (record(300, 30, &["y"]), ShapeVector::from_array([3.0, 1.0, 1.0, 3.0, 0.0]));
        let e = embedder(&[a.clone(), b.clone()], &arch);
        let mut mid = record(0, 0, &["x"]);
        // construct a record whose graph vector equals the training mean
        let ga = graph_vector(&a.0).0;
        let gb = graph_vector(&b.0).0;
        let mean: [f64; 36] = std::array::from_fn(|k| (ga[k] + gb[k]) / 2.0);
        let shape_mid = ShapeVector::from_array([2.0, 0.5, 0.5, 2.0, 0.0]);
        let z_shape = e.moments.normalize_shape(&arch, &shape_mid);
        assert!(z_shape.iter().all(|&x| x.abs() < 1e-12));
        let g_norm = e.moments.normalize_graph(&arch, &GraphVector(mean));
        assert!(g_norm.iter().all(|&x| x.abs() < 1e-9));

        mid.size = 100;
        let z = e.fuse(&arch, &mid, &shape_mid);
        assert_eq!(z.as_slice().len(), FUSED_DIM);
        assert!(z.as_slice()[SHAPE_RANGE].iter().all(|&x| x.abs() < 1e-6));
    }

    #[test]
    fn fusion_is_deterministic() {
        let arch = Arch::Mips;
        let a = (record(100, 10, &["x", "y"]), ShapeVector::from_array([1.0, 0.0, 0.0, 1.0, 0.0]));
        let b = (record(300, 30, &["y"]), ShapeVector::from_array([3.0, 1.0, 1.0, 3.0, 0.0]));
        let e = embedder(&[a.clone(), b], &arch);
        assert_eq!(e.fuse(&arch, &a.0, &a.1), e.fuse(&arch, &a.0.clone(), &a.1));
    }

    #[test]
    fn cosine_conventions() {
        let z = [0.0f32; 4];
        let x = [1.0f32, 2.0, 0.0, -1.0];
        assert_eq!(cosine(&z, &x), 0.0);
        assert!((cosine(&x, &x) - 1.0).abs() < 1e-12);
        let neg: Vec<f32> = x.iter().map(|v| -v).collect();
        assert!((cosine(&x, &neg) + 1.0).abs() < 1e-12);
    }
}
