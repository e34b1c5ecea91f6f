//! Random matrix and network generators for property suites and benches.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::matrix::{MetzlerMatrix, SquareMatrix};
use crate::nonlinear::{MonotoneNetworkSpec, Nonlinearity};

/// How diagonal entries are drawn once the off-diagonal pattern is fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiagonalMode {
    /// `-(row sum) - U[0, 1)`: strictly row diagonally dominant, always Hurwitz.
    Dominant,
    /// `-U(0, 1)`.
    Uniform,
    /// `-(row sum) * U[lo, hi) - U[0, 0.1)`; straddles the stability boundary
    /// when `lo < 1 < hi`.
    RowScaled { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetzlerSampler {
    pub n: usize,
    /// Probability of each off-diagonal edge.
    pub p: f64,
    pub diagonal: DiagonalMode,
    /// Overlay a random Hamiltonian cycle so the graph is strongly connected.
    pub irreducible: bool,
}

impl MetzlerSampler {
    pub fn hurwitz(n: usize, p: f64) -> Self {
        MetzlerSampler { n, p, diagonal: DiagonalMode::Dominant, irreducible: false }
    }

    pub fn mixed(n: usize, p: f64) -> Self {
        MetzlerSampler { n, p, diagonal: DiagonalMode::Uniform, irreducible: false }
    }

    pub fn boundary(n: usize, p: f64) -> Self {
        MetzlerSampler {
            n,
            p,
            diagonal: DiagonalMode::RowScaled { lo: 0.5, hi: 1.6 },
            irreducible: false,
        }
    }

    pub fn irreducible(mut self) -> Self {
        self.irreducible = true;
        self
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> MetzlerMatrix {
        let n = self.n;
        let mut m = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.random_bool(self.p) {
                    m.set(i, j, rng.random::<f64>());
                }
            }
        }
        if self.irreducible && n > 1 {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(rng);
            for k in 0..n {
                let (from, to) = (order[k], order[(k + 1) % n]);
                if m.get(to, from) == 0.0 {
                    m.set(to, from, rng.random_range(0.05..1.0));
                }
            }
        }
        set_diagonal(&mut m, self.diagonal, rng);
        MetzlerMatrix::new(m).expect("nonnegative off-diagonals")
    }
}

fn set_diagonal<R: Rng + ?Sized>(m: &mut SquareMatrix, mode: DiagonalMode, rng: &mut R) {
    for i in 0..m.dim() {
        let row_sum: f64 = (0..m.dim()).filter(|&j| j != i).map(|j| m.get(i, j)).sum();
        let d = match mode {
            DiagonalMode::Dominant => -row_sum - rng.random::<f64>(),
            DiagonalMode::Uniform => -(1.0 - rng.random::<f64>()),
            DiagonalMode::RowScaled { lo, hi } => {
                -row_sum * rng.random_range(lo..hi) - 0.1 * rng.random::<f64>()
            }
        };
        m.set(i, i, d);
    }
}

/// Dense matrix with entries `U(-1, 1)` present with probability `p`.
pub fn random_general<R: Rng + ?Sized>(rng: &mut R, n: usize, p: f64) -> SquareMatrix {
    SquareMatrix::from_fn(n, |_, _| {
        if rng.random_bool(p) {
            rng.random_range(-1.0..1.0)
        } else {
            0.0
        }
    })
}

/// Metzler matrix whose graph is a cactus: cycles of length 2 to 4 glued one
/// at a time through a single existing node, with random orientation.
pub fn random_cactus<R: Rng + ?Sized>(rng: &mut R, n: usize, diagonal: DiagonalMode) -> MetzlerMatrix {
    assert!(n >= 2, "a cactus needs at least two nodes");
    let mut m = SquareMatrix::zeros(n);
    let mut next = 1;
    while next < n {
        let anchor = rng.random_range(0..next);
        let extra = rng.random_range(1..=3).min(n - next);
        let mut cycle = vec![anchor];
        cycle.extend(next..next + extra);
        next += extra;
        if rng.random_bool(0.5) {
            cycle[1..].reverse();
        }
        for k in 0..cycle.len() {
            let (from, to) = (cycle[k], cycle[(k + 1) % cycle.len()]);
            m.set(to, from, rng.random_range(0.05..1.0));
        }
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut m = m.permuted(&perm);
    set_diagonal(&mut m, diagonal, rng);
    MetzlerMatrix::new(m).expect("nonnegative off-diagonals")
}

/// Built-in monotone network with decays in `[0.5, 2)` and coupling scaled
/// so the gain row sums `sum_j b_ij / a_i` are drawn from `[lo, hi)`.
pub fn random_network<R: Rng + ?Sized>(rng: &mut R, n: usize, p: f64, lo: f64, hi: f64) -> MonotoneNetworkSpec {
    let decay: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    let mut coupling = vec![vec![0.0; n]; n];
    for (i, row) in coupling.iter_mut().enumerate() {
        for (j, b) in row.iter_mut().enumerate() {
            if i != j && rng.random_bool(p) {
                *b = rng.random_range(0.05..1.0);
            }
        }
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            let target = rng.random_range(lo..hi) * decay[i];
            for b in row.iter_mut() {
                *b *= target / total;
            }
        }
    }
    let sigma = if rng.random_bool(0.5) {
        Nonlinearity::Tanh
    } else {
        Nonlinearity::Rational
    };
    MonotoneNetworkSpec::new(decay, coupling, sigma).expect("sampler produces valid specs")
}
