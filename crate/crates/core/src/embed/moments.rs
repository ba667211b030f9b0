use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::GraphVector;
use crate::corpus::Arch;
use crate::error::{Error, Result};
use crate::shape::ShapeVector;

pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Componentwise mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub count: u64,
    pub graph_mean: Vec<f64>,
    pub graph_std: Vec<f64>,
    pub shape_mean: Vec<f64>,
    pub shape_std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchMoments {
    pub epsilon: f64,
    pub per_arch: BTreeMap<Arch, Moments>,
    pub global: Moments,
}

impl ArchMoments {
    /// Per-arch moments, or the global ones for an arch with fewer than two
    /// training functions.
    pub fn for_arch(&self, arch: &Arch) -> &Moments {
        self.per_arch.get(arch).unwrap_or(&self.global)
    }

    pub fn normalize_graph(&self, arch: &Arch, g: &GraphVector) -> [f64; 36] {
        let m = self.for_arch(arch);
        std::array::from_fn(|k| (g.0[k] - m.graph_mean[k]) / (m.graph_std[k] + self.epsilon))
    }

    pub fn normalize_shape(&self, arch: &Arch, s: &ShapeVector) -> [f64; 5] {
        let m = self.for_arch(arch);
        let s = s.to_array();
        std::array::from_fn(|k| (s[k] - m.shape_mean[k]) / (m.shape_std[k] + self.epsilon))
    }
}

fn stats(rows: &[&[f64]], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let mut mean = vec![0.0; dim];
    for r in rows {
        for k in 0..dim {
            mean[k] += r[k];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for r in rows {
        for k in 0..dim {
            let d = r[k] - mean[k];
            var[k] += d * d;
        }
    }
    let std = var.into_iter().map(|v| (v / n).sqrt()).collect();
    (mean, std)
}

fn moments_of(rows: &[(&GraphVector, [f64; 5])]) -> Moments {
    let graphs: Vec<&[f64]> = rows.iter().map(|(g, _)| g.as_slice()).collect();
    let shapes: Vec<&[f64]> = rows.iter().map(|(_, s)| s.as_slice()).collect();
    let (graph_mean, graph_std) = stats(&graphs, 36);
    let (shape_mean, shape_std) = stats(&shapes, 5);
    Moments {
        count: rows.len() as u64,
        graph_mean,
        graph_std,
        shape_mean,
        shape_std,
    }
}

/// Fits per-architecture moments over the training anchors.
pub fn fit_arch_moments<'a, I>(training: I, epsilon: f64) -> Result<ArchMoments>
where
    I: IntoIterator<Item = (&'a Arch, &'a GraphVector, &'a ShapeVector)>,
{
    let mut by_arch: BTreeMap<&Arch, Vec<(&GraphVector, [f64; 5])>> = BTreeMap::new();
    let mut all = Vec::new();
    for (arch, g, s) in training {
        by_arch.entry(arch).or_default().push((g, s.to_array()));
        all.push((g, s.to_array()));
    }
    if all.is_empty() {
        return Err(Error::EmptyTraining);
    }
    let per_arch = by_arch
        .into_iter()
        .filter(|(_, rows)| rows.len() >= 2)
        .map(|(arch, rows)| (arch.clone(), moments_of(&rows)))
        .collect();
    Ok(ArchMoments {
        epsilon,
        per_arch,
        global: moments_of(&all),
    })
}
