//! Per-binary geometric descriptors and the scaled shape distance.
//!
//! A function's shape is where it sits in its binary: log size, normalized
//! address, normalized rank, mean log size of its address neighbors, and its
//! own deviation from that mean. Shapes are only comparable through
//! [`shape_distance`], which divides each coordinate gap by a per-dimension
//! scale before squaring.

use serde::{Deserialize, Serialize};

use crate::corpus::Placed;
use crate::error::{Error, Result};

/// Neighbors taken on each side when averaging log sizes.
pub const DEFAULT_NEIGHBORHOOD: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeVector {
    pub log_size: f64,
    pub addr_norm: f64,
    pub rank_norm: f64,
    pub neighborhood_mean: f64,
    pub delta: f64,
}

impl ShapeVector {
    pub const DIM: usize = 5;

    pub fn to_array(&self) -> [f64; 5] {
        [
            self.log_size,
            self.addr_norm,
            self.rank_norm,
            self.neighborhood_mean,
            self.delta,
        ]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        ShapeVector {
            log_size: a[0],
            addr_norm: a[1],
            rank_norm: a[2],
            neighborhood_mean: a[3],
            delta: a[4],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 5]", into = "[f64; 5]")]
pub struct ShapeScale([f64; 5]);

impl ShapeScale {
    pub fn new(alpha: [f64; 5]) -> Result<Self> {
        if alpha.iter().all(|&a| a > 0.0 && a.is_finite()) {
            Ok(ShapeScale(alpha))
        } else {
            Err(Error::InvalidConfig(format!("shape scale must be positive, got {alpha:?}")))
        }
    }

    pub fn alpha(&self) -> [f64; 5] {
        self.0
    }
}

impl Default for ShapeScale {
    fn default() -> Self {
        ShapeScale([1.0, 0.20, 0.20, 1.0, 1.0])
    }
}

impl TryFrom<[f64; 5]> for ShapeScale {
    type Error = Error;
    fn try_from(a: [f64; 5]) -> Result<Self> {
        ShapeScale::new(a)
    }
}

impl From<ShapeScale> for [f64; 5] {
    fn from(s: ShapeScale) -> Self {
        s.0
    }
}

pub fn log_size(size: u64) -> f64 {
    (size as f64).ln_1p()
}

/// Shape descriptors with the default ±2 neighborhood.
pub fn shape_descriptors<T: Placed>(functions: &[T]) -> Result<Vec<ShapeVector>> {
    shape_descriptors_with(functions, DEFAULT_NEIGHBORHOOD)
}

/// `functions` must be sorted by strictly ascending address with non-zero
/// sizes.
pub fn shape_descriptors_with<T: Placed>(functions: &[T], radius: usize) -> Result<Vec<ShapeVector>> {
    let n = functions.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    for w in functions.windows(2) {
        if w[1].address() <= w[0].address() {
            return Err(Error::UnsortedInput(w[1].address()));
        }
    }
    if let Some(f) = functions.iter().find(|f| f.size() == 0) {
        return Err(Error::ZeroSize(f.address()));
    }

    let logs: Vec<f64> = functions.iter().map(|f| log_size(f.size())).collect();
    let a_min = functions[0].address();
    let a_max = functions[n - 1].address();
    let span = (a_max - a_min) as f64;

    Ok((0..n)
        .map(|i| {
            let addr_norm = if a_max > a_min {
                (functions[i].address() - a_min) as f64 / span
            } else {
                0.5
            };
            let rank_norm = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
            let lo = i.saturating_sub(radius);
            let hi = (i + radius).min(n - 1);
            let (sum, count) = (lo..=hi)
                .filter(|&j| j != i)
                .fold((0.0, 0usize), |(s, c), j| (s + logs[j], c + 1));
            let neighborhood_mean = if count == 0 { logs[i] } else { sum / count as f64 };
            ShapeVector {
                log_size: logs[i],
                addr_norm,
                rank_norm,
                neighborhood_mean,
                delta: logs[i] - neighborhood_mean,
            }
        })
        .collect())
}

pub fn shape_distance(a: &ShapeVector, b: &ShapeVector, scale: &ShapeScale) -> f64 {
    let (a, b) = (a.to_array(), b.to_array());
    (0..5)
        .map(|k| {
            let d = (a[k] - b[k]) / scale.0[k];
            d * d
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SymbolRecord;
    use proptest::prelude::*;

    fn f(address: u64, size: u64) -> SymbolRecord {
        SymbolRecord {
            name: String::new(),
            address,
            size,
            is_analysis: true,
        }
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 5e-6
    }

    #[test]
    fn three_function_middle_vector() {
        let v = shape_descriptors(&[f(0x1000, 100), f(0x2000, 200), f(0x3000, 300)]).unwrap();
        let m = v[1].to_array();
        let want = [5.30330, 0.5, 0.5, 5.16112, 0.14218];
        // hand values carry five decimals
        for k in 0..5 {
            assert!((m[k] - want[k]).abs() < 1e-5, "dim {k}: {} vs {}", m[k], want[k]);
        }
    }

    #[test]
    fn single_function_conventions() {
        let v = shape_descriptors(&[f(0x400, 100)]).unwrap();
        let want = [4.61512, 0.5, 0.0, 4.61512, 0.0];
        for (k, w) in want.iter().enumerate() {
            assert!(close(v[0].to_array()[k], *w));
        }
    }

    #[test]
    fn equal_spacing_symmetry() {
        let fs: Vec<_> = (0..5).map(|i| f(0x1000 + 0x100 * i, 64)).collect();
        let v = shape_descriptors(&fs).unwrap();
        let ranks: Vec<f64> = v.iter().map(|s| s.rank_norm).collect();
        assert_eq!(ranks, [0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(v.iter().all(|s| s.delta == 0.0));
    }

    #[test]
    fn precondition_errors() {
        assert!(matches!(shape_descriptors::<SymbolRecord>(&[]), Err(Error::EmptyInput)));
        assert!(matches!(
            shape_descriptors(&[f(0x2000, 1), f(0x1000, 1)]),
            Err(Error::UnsortedInput(0x1000))
        ));
        assert!(matches!(
            shape_descriptors(&[f(0x1000, 1), f(0x1000, 1)]),
            Err(Error::UnsortedInput(_))
        ));
        assert!(matches!(shape_descriptors(&[f(0x1000, 0)]), Err(Error::ZeroSize(0x1000))));
    }

    #[test]
    fn distance_examples() {
        let a = ShapeVector::from_array([1.0, 0.3, 0.5, 1.0, 0.0]);
        let mut b = a;
        assert_eq!(shape_distance(&a, &b, &ShapeScale::default()), 0.0);
        b.addr_norm = 0.5;
        assert!(close(shape_distance(&a, &b, &ShapeScale::default()), 1.0));
        assert_eq!(ShapeScale::default().alpha(), [1.0, 0.20, 0.20, 1.0, 1.0]);
        assert!(ShapeScale::new([1.0, 0.0, 1.0, 1.0, 1.0]).is_err());
    }

    fn vec5() -> impl Strategy<Value = [f64; 5]> {
        prop::array::uniform5(-10.0f64..10.0)
    }

    fn layout() -> impl Strategy<Value = Vec<(u64, u64)>> {
        prop::collection::vec((1u64..5000, 1u64..20000), 1..40).prop_map(|gaps| {
            let mut addr = 0x1000;
            gaps.into_iter()
                .map(|(gap, size)| {
                    addr += gap;
                    (addr, size)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn distance_is_symmetric_and_separating(a in vec5(), b in vec5()) {
            let (a, b) = (ShapeVector::from_array(a), ShapeVector::from_array(b));
            let s = ShapeScale::default();
            prop_assert_eq!(shape_distance(&a, &b, &s), shape_distance(&b, &a, &s));
            prop_assert_eq!(shape_distance(&a, &a, &s), 0.0);
            if a != b {
                prop_assert!(shape_distance(&a, &b, &s) > 0.0);
            }
        }

        #[test]
        fn affine_address_maps_leave_shapes_unchanged(
            fs in layout(), shift in 0u64..1_000_000, scale in 1u64..16,
        ) {
            let base: Vec<_> = fs.iter().map(|&(a, s)| f(a, s)).collect();
            let moved: Vec<_> = fs.iter().map(|&(a, s)| f(a * scale + shift, s)).collect();
            let (x, y) = (shape_descriptors(&base).unwrap(), shape_descriptors(&moved).unwrap());
            for (p, q) in x.iter().zip(&y) {
                for k in 0..5 {
                    prop_assert!((p.to_array()[k] - q.to_array()[k]).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn size_scaling_preserves_log_size_order(fs in layout(), c in 2u64..8) {
            let base: Vec<_> = fs.iter().map(|&(a, s)| f(a, s)).collect();
            let scaled: Vec<_> = fs.iter().map(|&(a, s)| f(a, s * c)).collect();
            let (x, y) = (shape_descriptors(&base).unwrap(), shape_descriptors(&scaled).unwrap());
            for i in 0..x.len() {
                for j in 0..x.len() {
                    if x[i].log_size < x[j].log_size {
                        prop_assert!(y[i].log_size < y[j].log_size);
                    }
                }
            }
        }

        #[test]
        fn descriptor_invariants(fs in layout()) {
            let base: Vec<_> = fs.iter().map(|&(a, s)| f(a, s)).collect();
            for s in shape_descriptors(&base).unwrap() {
                prop_assert_eq!(s.delta, s.log_size - s.neighborhood_mean);
                prop_assert!((0.0..=1.0).contains(&s.addr_norm));
                prop_assert!((0.0..=1.0).contains(&s.rank_norm));
                prop_assert!(s.log_size >= 0.0);
            }
        }
    }
}
