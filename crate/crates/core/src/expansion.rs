//! Graph expansion: every non-loop edge `j -> i` is routed through a new
//! node with diagonal `-1`, splitting the weight `m_ij` into two edges of
//! weight `sqrt(m_ij)`. Eliminating the new nodes by Schur complements gives
//! back the original matrix, and each cycle keeps its sum gain.

use serde::Serialize;

use crate::matrix::{MetzlerMatrix, SquareMatrix};

/// Where an added node came from. Indices are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeOrigin {
    pub node: usize,
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpandedMatrix {
    pub matrix: MetzlerMatrix,
    pub original: MetzlerMatrix,
    /// One entry per added node, in node order.
    pub origins: Vec<EdgeOrigin>,
}

impl ExpandedMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn added_nodes(&self) -> usize {
        self.origins.len()
    }

    /// Eliminates the added nodes, last first.
    pub fn contract(&self) -> crate::error::Result<SquareMatrix> {
        let mut work = self.matrix.as_matrix().clone();
        for _ in 0..self.added_nodes() {
            work = work.schur_complement_last()?;
        }
        Ok(work)
    }
}

/// Expands every nonzero off-diagonal entry, scanning rows then columns.
pub fn expand(m: &MetzlerMatrix) -> ExpandedMatrix {
    let n = m.dim();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let w = m.get(i, j);
            if i != j && w != 0.0 {
                edges.push((j, i, w));
            }
        }
    }
    let size = n + edges.len();
    let mut e = SquareMatrix::zeros(size);
    for i in 0..n {
        e.set(i, i, m.get(i, i));
    }
    let mut origins = Vec::with_capacity(edges.len());
    for (k, &(source, target, w)) in edges.iter().enumerate() {
        let node = n + k;
        let root = w.sqrt();
        e.set(node, source, root);
        e.set(target, node, root);
        e.set(node, node, -1.0);
        origins.push(EdgeOrigin {
            node: node + 1,
            source: source + 1,
            target: target + 1,
            weight: w,
        });
    }
    ExpandedMatrix {
        matrix: MetzlerMatrix::new(e).expect("square roots of nonnegative entries"),
        original: m.clone(),
        origins,
    }
}

pub const CONTRACT_TOL: f64 = 1e-10;

/// True when contracting the expansion reproduces the original matrix
/// entrywise within [`CONTRACT_TOL`].
pub fn contract_check(e: &ExpandedMatrix) -> bool {
    match e.contract() {
        Ok(back) => back.dim() == e.original.dim() && back.max_abs_diff(&e.original) <= CONTRACT_TOL,
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::AnalysisConfig;
    use crate::gains::{all_cycle_sum_gains, edge_sum_gains};
    use crate::graph::{enumerate_simple_cycles, WeightedDigraph};
    use crate::sampling::MetzlerSampler;
    use crate::stability::full_report;
    use crate::test_support::*;

    fn sorted_gains(m: &MetzlerMatrix) -> Vec<f64> {
        let cycles = enumerate_simple_cycles(&WeightedDigraph::from_matrix(m), 100_000).unwrap();
        let mut g = all_cycle_sum_gains(&cycles, &edge_sum_gains(m, 0.0).unwrap()).unwrap();
        g.sort_by(f64::total_cmp);
        g
    }

    #[test]
    fn two_cycle_expansion() {
        let m = MetzlerMatrix::from_rows(vec![vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        let e = expand(&m);
        assert_eq!(e.dim(), 4);
        // entry (1,2) first: edge 2 -> 1 through node 3
        assert_eq!(e.origins[0], EdgeOrigin { node: 3, source: 2, target: 1, weight: 1.0 });
        assert_eq!(e.matrix.get(2, 1), 1.0);
        assert_eq!(e.matrix.get(0, 2), 1.0);
        assert_eq!(e.matrix.get(0, 1), 0.0);
        assert_eq!(sorted_gains(&e.matrix), vec![1.0]);
        assert!(contract_check(&e));
    }

    #[test]
    fn four_node_expansion_keeps_gains() {
        let m = MetzlerMatrix::new(four_node_example()).unwrap();
        let e = expand(&m);
        assert_eq!(e.dim(), 10);
        let (a, b) = (sorted_gains(&m), sorted_gains(&e.matrix));
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12);
        }
        let cycles = enumerate_simple_cycles(&WeightedDigraph::from_matrix(&e.matrix), 100).unwrap();
        assert!(cycles.iter().all(|c| c.len() == 4));
    }

    #[test]
    fn single_node_is_unchanged() {
        let m = MetzlerMatrix::from_rows(vec![vec![-2.0]]).unwrap();
        let e = expand(&m);
        assert_eq!(e.matrix, m);
        assert!(e.origins.is_empty());
        assert!(contract_check(&e));
    }

    #[test]
    fn three_node_contracts_back() {
        let e = expand(&MetzlerMatrix::new(three_node_example()).unwrap());
        assert!(contract_check(&e));
        let back = e.contract().unwrap();
        assert!(back.max_abs_diff(&three_node_example()) < 1e-15);
    }

    #[test]
    fn corrupted_weight_fails_check() {
        let mut e = expand(&MetzlerMatrix::new(four_node_example()).unwrap());
        let mut raw = e.matrix.as_matrix().clone();
        raw.set(4, 1, raw.get(4, 1) * 1.01);
        e.matrix = MetzlerMatrix::new(raw).unwrap();
        assert!(!contract_check(&e));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn expansion_laws(seed in any::<u64>(), n in 1usize..=5) {
                let mut rng = seeded(seed);
                let p = rng.random_range(0.1..0.6);
                let m = MetzlerSampler::boundary(n, p).sample(&mut rng);
                let edges = (0..n).flat_map(|i| (0..n).map(move |j| (i, j)))
                    .filter(|&(i, j)| i != j && m.get(i, j) != 0.0)
                    .count();
                let e = expand(&m);
                prop_assert_eq!(e.dim(), n + edges);
                prop_assert!(contract_check(&e));
                let (a, b) = (sorted_gains(&m), sorted_gains(&e.matrix));
                prop_assert_eq!(a.len(), b.len());
                for (x, y) in a.iter().zip(&b) {
                    prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
                }
                let cfg = AnalysisConfig::default();
                let before = full_report(&m, &cfg).unwrap();
                prop_assume!(!before.oracle.is_marginal());
                let after = full_report(&e.matrix, &cfg).unwrap();
                prop_assert_eq!(before.verdict, after.verdict);
            }
        }
    }
}
