//! Interconnection gains of a Metzler system and the cycle gains built from
//! them.
//!
//! Edge `j -> i` (entry `m_ij`) carries the sum gain `m_ij / -m_ii`. A cycle's
//! sum gain is the product of its edge gains; the total cycle gain of a
//! leading block is the inclusion-exclusion sum over disjoint cycle families
//! inside that block, and satisfies `det(M_I) = (1 - gain) * prod m_jj`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{for_each_disjoint_family, SimpleCycle};
use crate::matrix::MetzlerMatrix;

/// Per-edge gains keyed by `(row i, column j)`, i.e. by edge `j -> i`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EdgeGainTable {
    gamma: BTreeMap<(usize, usize), f64>,
    psi: Option<BTreeMap<(usize, usize), f64>>,
}

/// 1-based wire form of one table entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeGainEntry {
    pub row: usize,
    pub col: usize,
    pub gamma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi: Option<f64>,
}

impl EdgeGainTable {
    pub fn gamma(&self, row: usize, col: usize) -> Option<f64> {
        self.gamma.get(&(row, col)).copied()
    }

    pub fn psi(&self, row: usize, col: usize) -> Option<f64> {
        self.psi.as_ref()?.get(&(row, col)).copied()
    }

    pub fn has_psi(&self) -> bool {
        self.psi.is_some()
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    /// `((row, col), gamma)` in row-major order.
    pub fn gammas(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.gamma.iter().map(|(&k, &v)| (k, v))
    }

    pub fn entries(&self) -> Vec<EdgeGainEntry> {
        self.gamma
            .iter()
            .map(|(&(i, j), &g)| EdgeGainEntry {
                row: i + 1,
                col: j + 1,
                gamma: g,
                psi: self.psi(i, j),
            })
            .collect()
    }
}

impl Serialize for EdgeGainTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.entries().serialize(s)
    }
}

fn check_negative_diagonal(m: &MetzlerMatrix, tol: f64) -> Result<()> {
    for i in 0..m.dim() {
        if m.get(i, i) >= -tol {
            return Err(Error::NonNegativeDiagonal { node: i + 1 });
        }
    }
    Ok(())
}

/// Sum-interconnection gains `gamma_ij = m_ij / -m_ii` on every edge.
pub fn edge_sum_gains(m: &MetzlerMatrix, tol: f64) -> Result<EdgeGainTable> {
    check_negative_diagonal(m, tol)?;
    let n = m.dim();
    let mut gamma = BTreeMap::new();
    for i in 0..n {
        let d = -m.get(i, i);
        for j in 0..n {
            let v = m.get(i, j);
            if i != j && v != 0.0 {
                gamma.insert((i, j), v / d);
            }
        }
    }
    Ok(EdgeGainTable { gamma, psi: None })
}

/// Product of `gamma` along the cycle.
pub fn cycle_sum_gain(c: &SimpleCycle, table: &EdgeGainTable) -> Result<f64> {
    c.edges().try_fold(1.0, |acc, (from, to)| {
        table
            .gamma(to, from)
            .map(|g| acc * g)
            .ok_or(Error::MissingEdge {
                from: from + 1,
                to: to + 1,
            })
    })
}

/// Product of `psi` along the cycle.
pub fn cycle_max_gain(c: &SimpleCycle, table: &EdgeGainTable) -> Result<f64> {
    c.edges().try_fold(1.0, |acc, (from, to)| {
        table
            .psi(to, from)
            .map(|g| acc * g)
            .ok_or(Error::MissingEdge {
                from: from + 1,
                to: to + 1,
            })
    })
}

pub fn all_cycle_sum_gains(cycles: &[SimpleCycle], table: &EdgeGainTable) -> Result<Vec<f64>> {
    cycles.iter().map(|c| cycle_sum_gain(c, table)).collect()
}

/// Total cycle gain of every leading block `M_I`, `I = {1..i}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TotalGains {
    /// Entry `i - 1` is the total gain of the `i x i` leading block.
    pub prefix: Vec<f64>,
    /// `|det(M_I) - (1 - gain_I) prod m_jj| / (1 + |det(M_I)|)` with the
    /// determinant taken by LU.
    pub identity_residual: Vec<f64>,
}

impl TotalGains {
    pub fn max_identity_residual(&self) -> f64 {
        self.identity_residual.iter().fold(0.0, |a, &b| a.max(b))
    }
}

/// Inclusion-exclusion total cycle gains for all leading blocks.
///
/// A family of disjoint cycles belongs to block `I` exactly when all of its
/// nodes lie in `I`, so one pass over the families of the whole matrix,
/// keyed by each family's largest node, yields every prefix at once.
pub fn total_cycle_gains(m: &MetzlerMatrix, cycles: &[SimpleCycle], cycle_gains: &[f64], family_cap: usize) -> Result<TotalGains> {
    let n = m.dim();
    assert_eq!(cycles.len(), cycle_gains.len());
    let mut by_top = vec![0.0; n];
    for_each_disjoint_family(cycles, family_cap, false, |family, _| {
        let mut top = 0;
        let mut product = 1.0;
        for &idx in family {
            top = top.max(cycles[idx].max_node());
            product *= cycle_gains[idx];
        }
        let sign = if family.len() % 2 == 1 { 1.0 } else { -1.0 };
        by_top[top] += sign * product;
    })?;

    let mut prefix = Vec::with_capacity(n);
    let mut identity_residual = Vec::with_capacity(n);
    let mut running = 0.0;
    let mut diag_product = 1.0;
    for (i, contribution) in by_top.into_iter().enumerate() {
        running += contribution;
        diag_product *= m.get(i, i);
        prefix.push(running);
        let det = m
            .leading_submatrix(i + 1)
            .expect("prefix within range")
            .determinant_lu();
        identity_residual.push((det - (1.0 - running) * diag_product).abs() / (1.0 + det.abs()));
    }
    Ok(TotalGains {
        prefix,
        identity_residual,
    })
}

/// Positive vector with `M xi < 0`, from `xi = -M^{-1} 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityWitness {
    pub xi: Vec<f64>,
    /// `max_i sum_j (m_ij / -m_ii) xi_j / xi_i`, always below one.
    pub delta: f64,
    /// Scale `s` in `psi_ij = s * xi_i / xi_j`; strictly between `delta`
    /// and one so both max-gain conditions hold strictly.
    pub psi_scale: f64,
    /// `max_i (M xi)_i`.
    pub max_row_value: f64,
}

/// Why no witness exists.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Infeasible {
    /// 1-based node whose diagonal entry is not negative.
    NonNegativeDiagonal { node: usize, value: f64 },
    Singular,
    /// 1-based node where `-M^{-1} 1` is not positive.
    NonPositiveEntry { node: usize, value: f64 },
    DeltaNotBelowOne { delta: f64 },
    ResidualTooLarge { max_row_value: f64 },
}

impl std::fmt::Display for Infeasible {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Infeasible::NonNegativeDiagonal { node, value } => {
                write!(f, "diagonal entry {node} = {value} is not negative")
            }
            Infeasible::Singular => f.write_str("matrix is singular"),
            Infeasible::NonPositiveEntry { node, value } => {
                write!(f, "entry {node} of -M^-1 1 is {value}")
            }
            Infeasible::DeltaNotBelowOne { delta } => write!(f, "delta = {delta} is not below one"),
            Infeasible::ResidualTooLarge { max_row_value } => {
                write!(f, "max (M xi)_i = {max_row_value} is not negative")
            }
        }
    }
}

/// Solves `M xi = -1` and checks `xi > tol`, `M xi < -tol` and `delta < 1 - tol`.
/// Succeeds exactly when `M` is Hurwitz (up to the tolerance band).
pub fn feasibility_witness(m: &MetzlerMatrix, tol: f64) -> std::result::Result<FeasibilityWitness, Infeasible> {
    let n = m.dim();
    for i in 0..n {
        let d = m.get(i, i);
        if d >= -tol {
            return Err(Infeasible::NonNegativeDiagonal { node: i + 1, value: d });
        }
    }
    let xi = m.solve(&vec![-1.0; n]).map_err(|_| Infeasible::Singular)?;
    if let Some((i, &v)) = xi
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .filter(|(_, &v)| v <= tol)
    {
        return Err(Infeasible::NonPositiveEntry { node: i + 1, value: v });
    }
    let max_row_value = m.mul_vec(&xi).into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max_row_value >= -tol {
        return Err(Infeasible::ResidualTooLarge { max_row_value });
    }
    let delta = (0..n)
        .map(|i| {
            let d = -m.get(i, i);
            (0..n)
                .filter(|&j| j != i)
                .map(|j| m.get(i, j) / d * xi[j] / xi[i])
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    if delta >= 1.0 - tol {
        return Err(Infeasible::DeltaNotBelowOne { delta });
    }
    Ok(FeasibilityWitness {
        xi,
        delta,
        psi_scale: 0.5 * (1.0 + delta),
        max_row_value,
    })
}

/// Max-interconnection gains `psi_ij = s * xi_i / xi_j` from a witness.
/// Around any cycle the ratios telescope, so `psi_c = s^len < 1`.
pub fn max_gains_from_witness(m: &MetzlerMatrix, w: &FeasibilityWitness) -> Result<EdgeGainTable> {
    let n = m.dim();
    if w.xi.len() != n {
        return Err(Error::InvalidWitness(format!(
            "witness has length {}, matrix dimension is {n}",
            w.xi.len()
        )));
    }
    if !(w.delta < 1.0 && w.psi_scale > w.delta && w.psi_scale < 1.0) {
        return Err(Error::InvalidWitness(format!(
            "need delta < scale < 1, got delta = {}, scale = {}",
            w.delta, w.psi_scale
        )));
    }
    if w.xi.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidWitness("xi is not positive".into()));
    }
    let mut table = edge_sum_gains(m, 0.0)?;
    let psi = table
        .gamma
        .keys()
        .map(|&(i, j)| ((i, j), w.psi_scale * w.xi[i] / w.xi[j]))
        .collect();
    table.psi = Some(psi);
    Ok(table)
}

/// Both max-gain conditions evaluated on a table with `psi`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxGainCheck {
    /// `sum_j (m_ij / -m_ii) / psi_ij` per node.
    pub row_sums: Vec<f64>,
    /// `psi_c` per cycle.
    pub cycle_products: Vec<f64>,
    pub satisfied: bool,
}

pub fn check_max_gain_conditions(m: &MetzlerMatrix, table: &EdgeGainTable, cycles: &[SimpleCycle], tol: f64) -> Result<MaxGainCheck> {
    let n = m.dim();
    let mut row_sums = vec![0.0; n];
    for ((i, j), g) in table.gammas() {
        let psi = table.psi(i, j).ok_or(Error::MissingEdge {
            from: j + 1,
            to: i + 1,
        })?;
        row_sums[i] += g / psi;
    }
    let cycle_products = cycles
        .iter()
        .map(|c| cycle_max_gain(c, table))
        .collect::<Result<Vec<_>>>()?;
    let satisfied = row_sums.iter().chain(&cycle_products).all(|&v| v < 1.0 - tol);
    Ok(MaxGainCheck {
        row_sums,
        cycle_products,
        satisfied,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{enumerate_simple_cycles, WeightedDigraph};
    use crate::matrix::SquareMatrix;
    use crate::test_support::*;

    const TOL: f64 = 1e-9;

    fn metzler(m: SquareMatrix) -> MetzlerMatrix {
        MetzlerMatrix::new(m).unwrap()
    }

    fn cycles(m: &SquareMatrix) -> Vec<SimpleCycle> {
        enumerate_simple_cycles(&WeightedDigraph::from_matrix(m), 100_000).unwrap()
    }

    #[test]
    fn three_node_edge_and_cycle_gains() {
        let m = metzler(three_node_example());
        let t = edge_sum_gains(&m, TOL).unwrap();
        // gamma_ij = m_ij / -m_ii
        assert_eq!(t.gamma(1, 0), Some(0.5));
        assert_eq!(t.gamma(0, 1), Some(1.0));
        assert_eq!(t.gamma(2, 1), Some(1.0));
        assert_eq!(t.gamma(1, 2), Some(0.5));
        let g = all_cycle_sum_gains(&cycles(&m), &t).unwrap();
        assert_eq!(g, vec![0.5, 0.5]);
    }

    #[test]
    fn four_node_cycle_gains() {
        let m = metzler(four_node_example());
        let t = edge_sum_gains(&m, TOL).unwrap();
        let g = all_cycle_sum_gains(&cycles(&m), &t).unwrap();
        assert!((g[0] - 0.6).abs() < 1e-15);
        assert!((g[1] - 0.2).abs() < 1e-15);
        assert!((g[2] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn trivial_tables() {
        let m = metzler(SquareMatrix::from_diagonal(&[-2.0]));
        assert!(edge_sum_gains(&m, TOL).unwrap().is_empty());
        let m = metzler(SquareMatrix::from_rows(vec![vec![-1.0, 1.0], vec![1.0, 0.0]]).unwrap());
        assert_eq!(
            edge_sum_gains(&m, TOL),
            Err(Error::NonNegativeDiagonal { node: 2 })
        );
    }

    #[test]
    fn flow_cycle_gain() {
        let (f, g, d) = (2.0, 0.5, 1.5);
        let m = metzler(flow_system(f, g, d));
        let t = edge_sum_gains(&m, TOL).unwrap();
        let c = SimpleCycle::new(vec![0, 1]).unwrap();
        let got = cycle_sum_gain(&c, &t).unwrap();
        let expected = f * f / ((f - g) * (d + f));
        assert!((got - expected).abs() < 1e-15);

        let unit = metzler(SquareMatrix::from_rows(vec![
            vec![-2.0, 0.0, 2.0],
            vec![3.0, -3.0, 0.0],
            vec![0.0, 0.5, -0.5],
        ]).unwrap());
        let t = edge_sum_gains(&unit, TOL).unwrap();
        let c = SimpleCycle::new(vec![0, 1, 2]).unwrap();
        assert_eq!(cycle_sum_gain(&c, &t).unwrap(), 1.0);

        let missing = SimpleCycle::new(vec![0, 2]).unwrap();
        assert!(matches!(
            cycle_sum_gain(&missing, &t),
            Err(Error::MissingEdge { .. })
        ));
    }

    #[test]
    fn six_node_total_gains_follow_inclusion_exclusion() {
        let m = metzler(six_node_example());
        let cs = cycles(&m);
        let t = edge_sum_gains(&m, TOL).unwrap();
        let g = all_cycle_sum_gains(&cs, &t).unwrap();
        let by = |nodes: &[usize]| g[cs.iter().position(|c| c.one_based() == nodes).unwrap()];
        let (c1, c2, c3, c4, c5) = (
            by(&[1, 2]),
            by(&[2, 3]),
            by(&[4, 5]),
            by(&[1, 6]),
            by(&[1, 2, 3, 4, 5, 6]),
        );
        let totals = total_cycle_gains(&m, &cs, &g, 1000).unwrap();
        let expected = [
            0.0,
            c1,
            c1 + c2,
            c1 + c2,
            c1 + c2 + c3 - c1 * c3 - c2 * c3,
            c1 + c2 + c3 + c4 + c5 - c1 * c3 - c2 * c3 - c2 * c4 - c3 * c4 + c2 * c3 * c4,
        ];
        for (got, want) in totals.prefix.iter().zip(expected) {
            assert!((got - want).abs() < 1e-14, "{got} vs {want}");
        }
        assert!(totals.max_identity_residual() < 1e-12);
    }

    #[test]
    fn acyclic_totals_vanish() {
        let m = metzler(SquareMatrix::from_rows(vec![
            vec![-1.0, 2.0, 3.0],
            vec![0.0, -1.0, 4.0],
            vec![0.0, 0.0, -2.0],
        ]).unwrap());
        let totals = total_cycle_gains(&m, &[], &[], 10).unwrap();
        assert_eq!(totals.prefix, vec![0.0; 3]);
        assert!(totals.max_identity_residual() < 1e-15);
    }

    #[test]
    fn random_totals_match_lu_determinants() {
        let mut rng = seeded(5);
        for _ in 0..100 {
            let m = crate::sampling::MetzlerSampler::mixed(5, 0.5).irreducible().sample(&mut rng);
            let cs = cycles(&m);
            let t = edge_sum_gains(&m, TOL).unwrap();
            let g = all_cycle_sum_gains(&cs, &t).unwrap();
            let totals = total_cycle_gains(&m, &cs, &g, 1_000_000).unwrap();
            assert!(totals.max_identity_residual() <= 1e-9);
        }
    }

    #[test]
    fn witness_on_examples() {
        let m = metzler(four_node_example());
        let w = feasibility_witness(&m, TOL).unwrap();
        assert!(w.xi.iter().all(|&v| v > 0.0));
        let r = m.mul_vec(&w.xi);
        assert!(r.iter().all(|v| (v + 1.0).abs() < 1e-12));
        assert!(w.delta < 1.0);

        assert_eq!(
            feasibility_witness(&metzler(three_node_example()), TOL),
            Err(Infeasible::Singular)
        );

        let w = feasibility_witness(&metzler(SquareMatrix::from_diagonal(&[-1.0; 4])), TOL).unwrap();
        assert_eq!(w.xi, vec![1.0; 4]);
        assert_eq!(w.delta, 0.0);

        let unstable = metzler(SquareMatrix::from_rows(vec![vec![-1.0, 2.0], vec![2.0, -1.0]]).unwrap());
        assert!(matches!(
            feasibility_witness(&unstable, TOL),
            Err(Infeasible::NonPositiveEntry { .. })
        ));
    }

    #[test]
    fn max_gains_on_two_by_two() {
        let m = metzler(SquareMatrix::from_rows(vec![vec![-2.0, 1.0], vec![1.0, -2.0]]).unwrap());
        let w = feasibility_witness(&m, TOL).unwrap();
        // -M^{-1} 1 solved by hand: (1, 1)
        assert!((w.xi[0] - 1.0).abs() < 1e-15 && (w.xi[1] - 1.0).abs() < 1e-15);
        assert!((w.delta - 0.5).abs() < 1e-15);
        assert!((w.psi_scale - 0.75).abs() < 1e-15);
        let t = max_gains_from_witness(&m, &w).unwrap();
        assert!((t.psi(0, 1).unwrap() - 0.75).abs() < 1e-15);
        assert!((t.psi(1, 0).unwrap() - 0.75).abs() < 1e-15);
        let cs = cycles(&m);
        let check = check_max_gain_conditions(&m, &t, &cs, TOL).unwrap();
        assert!(check.satisfied);
        assert!((check.cycle_products[0] - 0.5625).abs() < 1e-15);
        assert!(check.row_sums.iter().all(|&r| (r - 2.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn max_gains_on_four_node_example() {
        let m = metzler(four_node_example());
        let w = feasibility_witness(&m, TOL).unwrap();
        let t = max_gains_from_witness(&m, &w).unwrap();
        let check = check_max_gain_conditions(&m, &t, &cycles(&m), TOL).unwrap();
        assert!(check.satisfied);
        assert!(check.cycle_products.iter().all(|&p| p < 1.0));
    }

    #[test]
    fn invalid_witness_is_rejected() {
        let m = metzler(four_node_example());
        let mut w = feasibility_witness(&m, TOL).unwrap();
        w.delta = 1.2;
        assert!(matches!(
            max_gains_from_witness(&m, &w),
            Err(Error::InvalidWitness(_))
        ));
    }

    mod props {
        use super::*;
        use crate::sampling::MetzlerSampler;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(200))]

            #[test]
            fn determinant_identity(seed in any::<u64>(), n in 2usize..=7) {
                let mut rng = seeded(seed);
                let m = MetzlerSampler::mixed(n, 0.5).irreducible().sample(&mut rng);
                let cs = cycles(&m);
                let t = edge_sum_gains(&m, 0.0).unwrap();
                let g = all_cycle_sum_gains(&cs, &t).unwrap();
                let totals = total_cycle_gains(&m, &cs, &g, 1_000_000).unwrap();
                prop_assert!(totals.max_identity_residual() <= 1e-9);
            }

            #[test]
            fn witness_gives_valid_max_gains(seed in any::<u64>(), n in 1usize..=7) {
                let mut rng = seeded(seed);
                let m = MetzlerSampler::mixed(n, 0.4).sample(&mut rng);
                if let Ok(w) = feasibility_witness(&m, TOL) {
                    let t = max_gains_from_witness(&m, &w).unwrap();
                    let check = check_max_gain_conditions(&m, &t, &cycles(&m), 0.0).unwrap();
                    prop_assert!(check.satisfied);
                }
            }

            #[test]
            fn diagonal_similarity_preserves_cycle_gains(seed in any::<u64>(), n in 2usize..=6) {
                use rand::Rng;
                let mut rng = seeded(seed);
                let m = MetzlerSampler::mixed(n, 0.5).irreducible().sample(&mut rng);
                let d: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..10.0)).collect();
                let scaled = metzler(SquareMatrix::from_fn(n, |i, j| d[i] * m.get(i, j) / d[j]));
                let cs = cycles(&m);
                let g0 = all_cycle_sum_gains(&cs, &edge_sum_gains(&m, 0.0).unwrap()).unwrap();
                let g1 = all_cycle_sum_gains(&cs, &edge_sum_gains(&scaled, 0.0).unwrap()).unwrap();
                for (a, b) in g0.iter().zip(&g1) {
                    prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
                }
            }

            #[test]
            fn single_cycle_gain_below_one_iff_witness(seed in any::<u64>(), n in 2usize..=7) {
                use rand::Rng;
                let mut rng = seeded(seed);
                let mut m = SquareMatrix::from_fn(n, |i, _| if i == 0 { 0.0 } else { 0.0 });
                for i in 0..n {
                    m.set(i, i, -rng.random_range(0.2..2.0));
                    m.set((i + 1) % n, i, rng.random_range(0.2..2.0));
                }
                let m = metzler(m);
                let cs = cycles(&m);
                prop_assert_eq!(cs.len(), 1);
                let gain = cycle_sum_gain(&cs[0], &edge_sum_gains(&m, 0.0).unwrap()).unwrap();
                prop_assume!((gain - 1.0).abs() > 1e-6);
                prop_assert_eq!(gain < 1.0, feasibility_witness(&m, TOL).is_ok());
            }
        }
    }
}
