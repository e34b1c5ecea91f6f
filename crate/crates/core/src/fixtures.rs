//! Reference matrices with known cycle structure, used by tests, the
//! acceptance harness and benchmarks.

use crate::matrix::SquareMatrix;

/// Three nodes on a path, two 2-cycles of gain 1/2 each, singular.
pub fn three_node_example() -> SquareMatrix {
    SquareMatrix::from_rows(vec![
        vec![-1.0, 1.0, 0.0],
        vec![1.0, -2.0, 1.0],
        vec![0.0, 1.0, -1.0],
    ])
    .expect("static matrix")
}

/// Four nodes on a path with cycle gains 3/5, 1/5, 1/5; Hurwitz.
pub fn four_node_example() -> SquareMatrix {
    SquareMatrix::from_rows(vec![
        vec![-5.0, 1.0, 0.0, 0.0],
        vec![3.0, -1.0, 1.0, 0.0],
        vec![0.0, 1.0, -5.0, 1.0],
        vec![0.0, 0.0, 1.0, -1.0],
    ])
    .expect("static matrix")
}

/// Off-diagonal entries of the six-node example, as 1-based `(row, col)`.
pub const SIX_NODE_PATTERN: [(usize, usize); 10] = [
    (1, 2),
    (1, 6),
    (2, 1),
    (2, 3),
    (3, 2),
    (4, 3),
    (4, 5),
    (5, 4),
    (6, 1),
    (6, 5),
];

/// Six nodes with five simple cycles: (1,2), (2,3), (4,5), (1,6) and the
/// Hamiltonian cycle 1 -> 2 -> 3 -> 4 -> 5 -> 6 -> 1.
pub fn six_node_example() -> SquareMatrix {
    six_node_with(
        &[-2.0; 6],
        &[0.5, 0.3, 0.4, 0.5, 0.6, 0.7, 0.5, 0.6, 0.3, 0.4],
    )
}

/// Six-node pattern with the given diagonal and the off-diagonal values in
/// [`SIX_NODE_PATTERN`] order.
pub fn six_node_with(diagonal: &[f64; 6], off_diagonal: &[f64; 10]) -> SquareMatrix {
    let mut m = SquareMatrix::from_diagonal(diagonal);
    for (&(i, j), &v) in SIX_NODE_PATTERN.iter().zip(off_diagonal) {
        m.set(i - 1, j - 1, v);
    }
    m
}

/// Two-node flow system with flow rate `f`, growth `g` at node 1 and decay
/// `d` at node 2.
pub fn flow_system(f: f64, g: f64, d: f64) -> SquareMatrix {
    SquareMatrix::from_rows(vec![vec![g - f, f], vec![f, -d - f]]).expect("finite inputs")
}
