use std::collections::BTreeMap;

use super::IdfTable;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Bucket and sign of a term: index = h(t) mod dim, sign from bit 63 of
/// h("s:" + t).
pub fn term_slot(term: &str, dim: usize) -> (usize, f64) {
    let index = (fnv1a64(term.as_bytes()) % dim as u64) as usize;
    let mut salted = Vec::with_capacity(term.len() + 2);
    salted.extend_from_slice(b"s:");
    salted.extend_from_slice(term.as_bytes());
    let sign = if fnv1a64(&salted) >> 63 == 0 { 1.0 } else { -1.0 };
    (index, sign)
}

/// Signed feature hashing of raw-count TF times IDF, L2-normalized.
pub fn hashed_embedding(terms: &[String], idf: &IdfTable, dim: usize) -> Vec<f64> {
    assert!(dim > 0, "embedding dimension must be positive");
    let mut tf: BTreeMap<&str, u64> = BTreeMap::new();
    for t in terms {
        *tf.entry(t.as_str()).or_default() += 1;
    }
    let mut v = vec![0.0; dim];
    for (term, count) in tf {
        let (index, sign) = term_slot(term, dim);
        v[index] += sign * count as f64 * idf.idf(term);
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::super::{fit_idf, Space};
    use super::*;
    use proptest::prelude::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn embedding_examples() {
        let idf = fit_idf(&[strings(&["a", "b"])], Space::Token).unwrap();
        assert!(hashed_embedding(&[], &idf, 256).iter().all(|&x| x == 0.0));
        assert_eq!(hashed_embedding(&[], &idf, 64).len(), 64);

        let one = hashed_embedding(&strings(&["a", "a", "a"]), &idf, 256);
        let nonzero: Vec<f64> = one.iter().copied().filter(|&x| x != 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        assert!((nonzero[0].abs() - 1.0).abs() < 1e-12);

        let x = hashed_embedding(&strings(&["a", "b", "zz"]), &idf, 64);
        let y = hashed_embedding(&strings(&["a", "b", "zz"]), &idf, 64);
        assert_eq!(x, y);
    }

    proptest! {
        #[test]
        fn permutation_invariant(mut terms in prop::collection::vec("[a-e]{1,3}", 0..30), seed in any::<u64>()) {
            let idf = fit_idf(&[terms.clone()], Space::Token).unwrap();
            let a = hashed_embedding(&terms, &idf, 256);
            // deterministic shuffle
            let n = terms.len();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
                terms.swap(i, (s >> 33) as usize % (i + 1));
            }
            prop_assert_eq!(a, hashed_embedding(&terms, &idf, 256));
        }
    }
}
