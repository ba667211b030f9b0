use crate::corpus::FunctionRecord;

pub const GRAPH_DIM: usize = 36;

/// Log terms (4), densities (6), instructions per block (1), op-class
/// histogram (16), edge-type histogram (9).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphVector(pub [f64; GRAPH_DIM]);

impl GraphVector {
    pub const LOG_TERMS: std::ops::Range<usize> = 0..4;
    pub const DENSITIES: std::ops::Range<usize> = 4..10;
    pub const INSNS_PER_BLOCK: usize = 10;
    pub const OP_HISTOGRAM: std::ops::Range<usize> = 11..27;
    pub const EDGE_HISTOGRAM: std::ops::Range<usize> = 27..36;

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn graph_vector(f: &FunctionRecord) -> GraphVector {
    let mut g = [0.0; GRAPH_DIM];
    let ln1p = |x: u64| (x as f64).ln_1p();
    g[0] = ln1p(f.size);
    g[1] = ln1p(f.instruction_count);
    g[2] = ln1p(f.block_count);
    g[3] = ln1p(f.edge_count);

    let insns = f.instruction_count.max(1) as f64;
    let blocks = f.block_count.max(1) as f64;
    g[4] = f.call_count as f64 / insns;
    g[5] = f.branch_count as f64 / insns;
    g[6] = f.ret_count as f64 / insns;
    g[7] = f.string_ref_count as f64 / insns;
    g[8] = f.const_ref_count as f64 / insns;
    // at most two CFG successors per block
    g[9] = (f.edge_count as f64 / (2.0 * blocks)).clamp(0.0, 1.0);
    g[10] = f.instruction_count as f64 / blocks;

    if f.instruction_count > 0 {
        for (slot, &c) in g[GraphVector::OP_HISTOGRAM].iter_mut().zip(&f.op_class_counts) {
            *slot = c as f64 / f.instruction_count as f64;
        }
    }
    if f.edge_count > 0 {
        for (slot, &c) in g[GraphVector::EDGE_HISTOGRAM].iter_mut().zip(&f.edge_type_counts) {
            *slot = c as f64 / f.edge_count as f64;
        }
    }
    GraphVector(g)
}

#[cfg(test)]
pub(crate) fn bare_record(size: u64) -> FunctionRecord {
    FunctionRecord {
        address: 0x1000,
        size,
        instruction_count: 0,
        block_count: 0,
        edge_count: 0,
        call_count: 0,
        branch_count: 0,
        ret_count: 0,
        string_ref_count: 0,
        const_ref_count: 0,
        op_class_counts: [0; 16],
        edge_type_counts: [0; 9],
        tokens: vec![],
        contexts: vec![],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_evaluated_record() {
        let mut f = bare_record(100);
        f.instruction_count = 10;
        f.block_count = 2;
        f.edge_count = 1;
        f.call_count = 1;
        f.op_class_counts[0] = 10;
        f.edge_type_counts[0] = 1;
        let g = graph_vector(&f).0;
        #[allow(clippy::approx_constant)]
        let want = [4.61512, 2.39790, 1.09861, 0.69315];
        for k in 0..4 {
            assert!((g[k] - want[k]).abs() < 5e-6);
        }
        assert_eq!(g[4], 0.1);
        assert_eq!(g[10], 5.0);
        assert_eq!(g[9], 0.25);
        assert_eq!(g[11], 1.0);
        assert!(g[12..27].iter().all(|&x| x == 0.0));
        assert_eq!(g[27], 1.0);
    }

    #[test]
    fn degenerate_record() {
        let g = graph_vector(&bare_record(100)).0;
        assert!((g[0] - 101f64.ln()).abs() < 1e-12);
        assert!(g[1..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn edge_density_is_clamped() {
        let mut f = bare_record(10);
        f.block_count = 1;
        f.edge_count = 5;
        f.edge_type_counts[8] = 5;
        assert_eq!(graph_vector(&f).0[9], 1.0);
    }
}
