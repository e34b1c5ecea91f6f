//! Hurwitz tests for Metzler matrices and the aggregated stability report.
//!
//! Every test returns a [`Verdict`]; [`full_report`] runs all of them,
//! compares each against the leading-minor verdict and against a Perron
//! root estimate computed by power iteration.

use serde::Serialize;

use crate::config::{AnalysisConfig, Verdict};
use crate::error::{Error, Result};
use crate::gains::{
    all_cycle_sum_gains, check_max_gain_conditions, edge_sum_gains, feasibility_witness, max_gains_from_witness,
    total_cycle_gains, EdgeGainTable, FeasibilityWitness, Infeasible, MaxGainCheck,
};
use crate::graph::{cactus_violation, enumerate_simple_cycles, strongly_connected_components, SimpleCycle, WeightedDigraph};
use crate::matrix::{MetzlerMatrix, SquareMatrix};

/// Abscissa values closer to zero than this are reported as marginal by the
/// oracle.
pub const ORACLE_BAND: f64 = 1e-7;
/// Collatz-Wielandt bracket width at which power iteration stops.
pub const ORACLE_TOL: f64 = 1e-12;
pub const ORACLE_MAX_ITER: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinorsResult {
    /// `det(-M_I)` for `I = {1}, {1,2}, ..., {1..n}`.
    pub minors: Vec<f64>,
    pub verdict: Verdict,
}

/// Hurwitz iff every leading principal minor of `-M` is positive.
pub fn hurwitz_by_minors(m: &SquareMatrix, tol: f64) -> MinorsResult {
    let minors: Vec<f64> = (1..=m.dim())
        .map(|i| m.leading_submatrix(i).expect("prefix in range").neg().determinant_lu())
        .collect();
    // compare each minor with its Hadamard bound so the tolerance is scale free
    let verdict = Verdict::all(minors.iter().enumerate().map(|(k, &d)| {
        let bound: f64 = (0..=k)
            .map(|i| m.row(i)[..=k].iter().map(|v| v * v).sum::<f64>().sqrt())
            .product();
        let relative = if bound > 0.0 { d / bound } else { 0.0 };
        Verdict::below(-relative, 0.0, tol)
    }));
    MinorsResult { minors, verdict }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchurResult {
    /// Diagonal of each working matrix `M[n], M[n-1], ...` up to the first
    /// violation.
    pub diagonals: Vec<Vec<f64>>,
    /// Dimension `k` of the first `M[k]` with a diagonal entry that is not
    /// negative.
    pub failed_at: Option<usize>,
    /// Dimension of the working matrix whose pivot vanished.
    pub zero_pivot: Option<usize>,
    pub verdict: Verdict,
}

/// Hurwitz iff every Schur iterate `M[k]` has a negative diagonal.
pub fn hurwitz_by_schur(m: &SquareMatrix, tol: f64) -> SchurResult {
    let mut work = m.clone();
    let mut diagonals = Vec::new();
    loop {
        let k = work.dim();
        let diag = work.diagonal();
        let verdict = Verdict::all(diag.iter().map(|&d| Verdict::below(d, 0.0, tol)));
        diagonals.push(diag);
        if verdict != Verdict::Hurwitz {
            return SchurResult { diagonals, failed_at: Some(k), zero_pivot: None, verdict };
        }
        if k == 1 {
            return SchurResult { diagonals, failed_at: None, zero_pivot: None, verdict };
        }
        match work.schur_complement_last() {
            Ok(next) => work = next,
            Err(_) => {
                return SchurResult {
                    diagonals,
                    failed_at: None,
                    zero_pivot: Some(k),
                    verdict: Verdict::NotHurwitz,
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentVerdict {
    /// 1-based node indices.
    pub nodes: Vec<usize>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CondensationResult {
    /// Strongly connected components in reverse topological order.
    pub components: Vec<ComponentVerdict>,
    /// True when every component is a single node (no simple cycles).
    pub acyclic: bool,
    /// Position in `components` of the first component that fails.
    pub culprit: Option<usize>,
    pub verdict: Verdict,
}

/// Hurwitz iff the principal submatrix of every strongly connected component
/// is Hurwitz; singleton components only need a negative diagonal.
pub fn hurwitz_by_condensation(m: &SquareMatrix, tol: f64) -> CondensationResult {
    let g = WeightedDigraph::from_matrix(m);
    let sccs = strongly_connected_components(&g);
    let acyclic = sccs.iter().all(|c| c.is_singleton());
    let components: Vec<ComponentVerdict> = sccs
        .iter()
        .map(|c| {
            let verdict = if c.is_singleton() {
                let v = c.nodes[0];
                Verdict::below(m.get(v, v), 0.0, tol)
            } else {
                hurwitz_by_minors(&m.principal_submatrix(&c.nodes), tol).verdict
            };
            ComponentVerdict {
                nodes: c.nodes.iter().map(|v| v + 1).collect(),
                verdict,
            }
        })
        .collect();
    let verdict = Verdict::all(components.iter().map(|c| c.verdict));
    let culprit = components.iter().position(|c| c.verdict != Verdict::Hurwitz);
    CondensationResult { components, acyclic, culprit, verdict }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SumGainResult {
    pub cycle_gains: Vec<f64>,
    pub gain_sum: f64,
    /// Total cycle gain of each leading block.
    pub prefix_gains: Vec<f64>,
    pub identity_residual: Vec<f64>,
    /// Every cycle gain below one (necessary condition).
    pub necessary: Verdict,
    /// Sum of cycle gains below one (sufficient condition).
    pub sufficient: Verdict,
    /// Every prefix total gain below one (exact condition).
    pub exact: Verdict,
}

pub fn sum_gain_verdicts(cycle_gains: Vec<f64>, prefix_gains: Vec<f64>, identity_residual: Vec<f64>, tol: f64) -> SumGainResult {
    let gain_sum: f64 = cycle_gains.iter().sum();
    let necessary = Verdict::all(cycle_gains.iter().map(|&g| Verdict::below(g, 1.0, tol)));
    let sufficient = Verdict::below(gain_sum, 1.0, tol);
    let exact = Verdict::all(prefix_gains.iter().map(|&g| Verdict::below(g, 1.0, tol)));
    SumGainResult {
        cycle_gains,
        gain_sum,
        prefix_gains,
        identity_residual,
        necessary,
        sufficient,
        exact,
    }
}

/// Cycle gains, prefix totals and the three sum-gain verdicts in one go.
pub fn sum_gain_analysis(m: &MetzlerMatrix, cycles: &[SimpleCycle], cfg: &AnalysisConfig) -> Result<SumGainResult> {
    let table = edge_sum_gains(m, cfg.tol)?;
    let gains = all_cycle_sum_gains(cycles, &table)?;
    let totals = total_cycle_gains(m, cycles, &gains, cfg.family_cap)?;
    Ok(sum_gain_verdicts(gains, totals.prefix, totals.identity_residual, cfg.tol))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxGainResult {
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<FeasibilityWitness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub infeasible: Option<Infeasible>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi: Option<EdgeGainTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check: Option<MaxGainCheck>,
}

fn infeasible_verdict(reason: &Infeasible, tol: f64) -> Verdict {
    match *reason {
        Infeasible::NonNegativeDiagonal { value, .. } => Verdict::below(value, 0.0, tol),
        Infeasible::NonPositiveEntry { value, .. } => Verdict::below(-value, 0.0, tol),
        Infeasible::Singular | Infeasible::DeltaNotBelowOne { .. } | Infeasible::ResidualTooLarge { .. } => {
            Verdict::Marginal
        }
    }
}

/// Hurwitz iff a max-gain table satisfying both conditions exists; the
/// table is built from `xi = -M^{-1} 1`.
pub fn max_gain_verdict(m: &MetzlerMatrix, cycles: &[SimpleCycle], tol: f64) -> MaxGainResult {
    match feasibility_witness(m, tol) {
        Ok(w) => {
            let table = max_gains_from_witness(m, &w).expect("witness validated on construction");
            let check = check_max_gain_conditions(m, &table, cycles, tol).expect("table covers every cycle edge");
            let verdict = if check.satisfied { Verdict::Hurwitz } else { Verdict::Marginal };
            MaxGainResult {
                verdict,
                witness: Some(w),
                infeasible: None,
                psi: Some(table),
                check: Some(check),
            }
        }
        Err(reason) => MaxGainResult {
            verdict: infeasible_verdict(&reason, tol),
            witness: None,
            infeasible: Some(reason),
            psi: None,
            check: None,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovResult {
    /// Diagonal of `P = diag(eta_i / xi_i)`.
    pub p: Vec<f64>,
    /// Pivots of the `L D L^T` factorisation of `-(M^T P + P M)`.
    pub pivots: Vec<f64>,
    pub verdict: Verdict,
}

/// Diagonal Lyapunov check from the right and left witnesses
/// `xi = -M^{-1} 1`, `eta = -M^{-T} 1`. `None` when either solve fails.
pub fn lyapunov_check(m: &MetzlerMatrix, xi: &[f64], tol: f64) -> Option<LyapunovResult> {
    let n = m.dim();
    let eta = m.transpose().solve(&vec![-1.0; n]).ok()?;
    if eta.iter().any(|&v| v <= 0.0) {
        return None;
    }
    let p: Vec<f64> = eta.iter().zip(xi).map(|(e, x)| e / x).collect();
    let q = SquareMatrix::from_fn(n, |i, j| -(m.get(j, i) * p[j] + p[i] * m.get(i, j)));
    let scale = q.max_abs().max(f64::MIN_POSITIVE);
    let pivots = ldl_pivots(&q);
    let verdict = Verdict::all(pivots.iter().map(|&d| Verdict::below(-d / scale, 0.0, tol)));
    Some(LyapunovResult { p, pivots, verdict })
}

/// Pivots of symmetric Gaussian elimination without pivoting; all positive
/// iff the matrix is positive definite.
fn ldl_pivots(a: &SquareMatrix) -> Vec<f64> {
    let n = a.dim();
    let mut w = a.rows();
    let mut pivots = Vec::with_capacity(n);
    for k in 0..n {
        let d = w[k][k];
        pivots.push(d);
        if d <= 0.0 {
            break;
        }
        for i in k + 1..n {
            let f = w[i][k] / d;
            for j in k + 1..n {
                w[i][j] -= f * w[k][j];
            }
        }
    }
    pivots
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleTheta {
    /// 1-based cycle nodes.
    pub nodes: Vec<usize>,
    /// `theta_i^c` aligned with `nodes`.
    pub theta: Vec<f64>,
    pub product: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaCertificate {
    pub cycles: Vec<CycleTheta>,
    /// `max_i |sum_{c containing i} theta_i^c - 1|` over nodes on cycles.
    pub max_sum_error: f64,
    /// `min_c (prod theta / gamma_c) - 1`.
    pub min_product_margin: f64,
}

impl ThetaCertificate {
    pub fn is_valid(&self, sum_tol: f64, margin_tol: f64) -> bool {
        self.max_sum_error <= sum_tol && self.min_product_margin > margin_tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CactusResult {
    /// 1-based indices into the cycle list of two cycles sharing two or more nodes.
    NotApplicable { overlap: (usize, usize) },
    Infeasible { verdict: Verdict },
    Certified { certificate: ThetaCertificate },
}

/// Constants `theta_i^c` with `prod_{i in c} theta_i^c > gamma_c` and
/// `sum_{c containing i} theta_i^c = 1`, for cactus graphs.
///
/// Starts from `theta_i^c = gamma_{i,p} / psi_{i,p}`, where `p` precedes `i`
/// on `c` and `psi` comes from the max-gain witness; in a cactus distinct
/// cycles through `i` enter it through distinct edges, so these sum to less
/// than one at each node. Dividing by the node sum brings every sum to
/// exactly one and can only increase the products.
pub fn cactus_certificate(m: &MetzlerMatrix, cycles: &[SimpleCycle], tol: f64) -> CactusResult {
    if let Some((a, b)) = cactus_violation(cycles) {
        return CactusResult::NotApplicable { overlap: (a + 1, b + 1) };
    }
    let witness = match feasibility_witness(m, tol) {
        Ok(w) => w,
        Err(reason) => {
            return CactusResult::Infeasible {
                verdict: infeasible_verdict(&reason, tol),
            }
        }
    };
    let table = max_gains_from_witness(m, &witness).expect("witness validated on construction");
    let n = m.dim();
    let raw: Vec<Vec<f64>> = cycles
        .iter()
        .map(|c| {
            c.nodes()
                .iter()
                .map(|&i| {
                    let p = c.predecessor(i).expect("node on cycle");
                    table.gamma(i, p).expect("cycle edge") / table.psi(i, p).expect("cycle edge")
                })
                .collect()
        })
        .collect();
    let mut node_sum = vec![0.0; n];
    for (c, th) in cycles.iter().zip(&raw) {
        for (&i, &t) in c.nodes().iter().zip(th) {
            node_sum[i] += t;
        }
    }
    let edge_table = edge_sum_gains(m, tol).expect("witness implies negative diagonal");
    let mut out = Vec::with_capacity(cycles.len());
    let mut check_sum = vec![0.0; n];
    let mut min_margin = f64::INFINITY;
    for (c, th) in cycles.iter().zip(raw) {
        let theta: Vec<f64> = c.nodes().iter().zip(th).map(|(&i, t)| t / node_sum[i]).collect();
        for (&i, &t) in c.nodes().iter().zip(&theta) {
            check_sum[i] += t;
        }
        let product: f64 = theta.iter().product();
        let gain = crate::gains::cycle_sum_gain(c, &edge_table).expect("cycle edges present");
        min_margin = min_margin.min(product / gain - 1.0);
        out.push(CycleTheta {
            nodes: c.one_based(),
            theta,
            product,
            gain,
        });
    }
    let max_sum_error = check_sum
        .iter()
        .filter(|&&s| s != 0.0)
        .fold(0.0f64, |a, &s| a.max((s - 1.0).abs()));
    CactusResult::Certified {
        certificate: ThetaCertificate {
            cycles: out,
            max_sum_error,
            min_product_margin: if cycles.is_empty() { f64::INFINITY } else { min_margin },
        },
    }
}

/// Perron root estimate of an irreducible block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerronEstimate {
    /// Estimated spectral abscissa of the block.
    pub abscissa: f64,
    /// Collatz-Wielandt bracket on the abscissa.
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
    /// Positive eigenvector estimate, normalised to max entry one.
    pub vector: Vec<f64>,
}

/// Power iteration on `M + cI` with `c = 1 + max |m_ii|`, which is
/// nonnegative with a positive diagonal (primitive when `M` is irreducible).
pub fn perron_root(m: &SquareMatrix, max_iter: usize) -> Result<PerronEstimate> {
    let n = m.dim();
    let c = 1.0 + m.diagonal().iter().fold(0.0f64, |a, d| a.max(d.abs()));
    let a = SquareMatrix::from_fn(n, |i, j| m.get(i, j) + if i == j { c } else { 0.0 });
    let mut x = vec![1.0; n];
    let (mut lower, mut upper) = (f64::NEG_INFINITY, f64::INFINITY);
    for it in 1..=max_iter {
        let y = a.mul_vec(&x);
        lower = f64::INFINITY;
        upper = f64::NEG_INFINITY;
        for (yi, xi) in y.iter().zip(&x) {
            let r = yi / xi;
            lower = lower.min(r);
            upper = upper.max(r);
        }
        let top = y.iter().fold(0.0f64, |acc, v| acc.max(*v));
        if top == 0.0 || !top.is_finite() {
            break;
        }
        x = y.into_iter().map(|v| (v / top).max(f64::MIN_POSITIVE)).collect();
        if upper - lower <= ORACLE_TOL * upper.abs().max(1.0) {
            return Ok(PerronEstimate {
                abscissa: 0.5 * (lower + upper) - c,
                lower: lower - c,
                upper: upper - c,
                iterations: it,
                vector: x,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        estimate: 0.5 * (lower + upper) - c,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub abscissa: f64,
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
    pub converged: bool,
    pub verdict: Verdict,
}

impl OracleResult {
    pub fn is_marginal(&self) -> bool {
        self.verdict == Verdict::Marginal
    }
}

/// Spectral abscissa as the largest Perron root over the strongly
/// connected components; singleton components contribute their diagonal.
pub fn spectral_abscissa_oracle(m: &SquareMatrix) -> OracleResult {
    let g = WeightedDigraph::from_matrix(m);
    let mut best = OracleResult {
        abscissa: f64::NEG_INFINITY,
        lower: f64::NEG_INFINITY,
        upper: f64::NEG_INFINITY,
        iterations: 0,
        converged: true,
        verdict: Verdict::Hurwitz,
    };
    for comp in strongly_connected_components(&g) {
        let (est, lo, hi) = if comp.is_singleton() {
            let d = m.get(comp.nodes[0], comp.nodes[0]);
            (d, d, d)
        } else {
            match perron_root(&m.principal_submatrix(&comp.nodes), ORACLE_MAX_ITER) {
                Ok(p) => {
                    best.iterations += p.iterations;
                    (p.abscissa, p.lower, p.upper)
                }
                Err(Error::NoConvergence { iterations, estimate }) => {
                    best.iterations += iterations;
                    best.converged = false;
                    (estimate, estimate, estimate)
                }
                Err(_) => unreachable!("perron_root only fails to converge"),
            }
        };
        best.abscissa = best.abscissa.max(est);
        best.lower = best.lower.max(lo);
        best.upper = best.upper.max(hi);
    }
    best.verdict = Verdict::below(best.abscissa, 0.0, ORACLE_BAND);
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub n: usize,
    pub verdict: Verdict,
    /// Every applicable test agrees with `verdict` (marginal results agree
    /// with anything).
    pub consistency: bool,
    pub tolerance: f64,
    pub irreducible: bool,
    pub minors: MinorsResult,
    pub schur: SchurResult,
    pub condensation: CondensationResult,
    pub max_conditions: MaxGainResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lyapunov: Option<LyapunovResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycles: Option<Vec<SimpleCycle>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sum_conditions: Option<SumGainResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cactus: Option<CactusResult>,
    pub oracle: OracleResult,
    /// Tests that could not run, with the reason.
    pub diagnostics: Vec<String>,
}

impl StabilityReport {
    /// Verdicts of the individual Hurwitz characterisations, by name.
    pub fn test_verdicts(&self) -> Vec<(&'static str, Verdict)> {
        let mut out = vec![
            ("minors", self.minors.verdict),
            ("schur", self.schur.verdict),
            ("condensation", self.condensation.verdict),
            ("max_gain", self.max_conditions.verdict),
        ];
        if let Some(s) = &self.sum_conditions {
            out.push(("sum_gain_exact", s.exact));
        }
        if let Some(l) = &self.lyapunov {
            out.push(("lyapunov", l.verdict));
        }
        out.push(("oracle", self.oracle.verdict));
        out
    }
}

/// Runs every test on `m`. Fails only when `m` is not Metzler or the
/// configuration is invalid; caps hit during cycle work are recorded in
/// `diagnostics`.
pub fn full_report(m: &SquareMatrix, cfg: &AnalysisConfig) -> Result<StabilityReport> {
    cfg.validate()?;
    let mm = MetzlerMatrix::new(m.clone())?;
    let tol = cfg.tol;
    let g = WeightedDigraph::from_matrix(m);
    let irreducible = strongly_connected_components(&g).len() == 1;
    let mut diagnostics = Vec::new();

    let minors = hurwitz_by_minors(m, tol);
    let schur = hurwitz_by_schur(m, tol);
    let condensation = hurwitz_by_condensation(m, tol);
    let oracle = spectral_abscissa_oracle(m);
    if !oracle.converged {
        diagnostics.push("oracle: power iteration did not converge".to_string());
    }

    let cycles = match enumerate_simple_cycles(&g, cfg.cycle_cap) {
        Ok(c) => Some(c),
        Err(e) => {
            diagnostics.push(format!("cycles: {e}"));
            None
        }
    };
    let max_conditions = max_gain_verdict(&mm, cycles.as_deref().unwrap_or(&[]), tol);
    let lyapunov = max_conditions
        .witness
        .as_ref()
        .and_then(|w| lyapunov_check(&mm, &w.xi, tol));

    let mut sum_conditions = None;
    let mut cactus = None;
    if let Some(cs) = &cycles {
        match sum_gain_analysis(&mm, cs, cfg) {
            Ok(s) => sum_conditions = Some(s),
            Err(e) => diagnostics.push(format!("sum conditions: {e}")),
        }
        cactus = Some(cactus_certificate(&mm, cs, tol));
    }

    let verdict = minors.verdict;
    let mut consistency = [schur.verdict, condensation.verdict, max_conditions.verdict, oracle.verdict]
        .into_iter()
        .chain(sum_conditions.as_ref().map(|s| s.exact))
        .chain(lyapunov.as_ref().map(|l| l.verdict))
        .all(|v| v.compatible_with(verdict));
    if let Some(s) = &sum_conditions {
        if verdict == Verdict::Hurwitz && s.necessary == Verdict::NotHurwitz {
            consistency = false;
        }
        if irreducible && s.sufficient == Verdict::Hurwitz && verdict == Verdict::NotHurwitz {
            consistency = false;
        }
    }
    if let Some(CactusResult::Certified { certificate }) = &cactus {
        if verdict == Verdict::NotHurwitz || !certificate.is_valid(1e-12, tol) {
            consistency = false;
        }
    }

    Ok(StabilityReport {
        n: m.dim(),
        verdict,
        consistency,
        tolerance: tol,
        irreducible,
        minors,
        schur,
        condensation,
        max_conditions,
        lyapunov,
        cycles,
        sum_conditions,
        cactus,
        oracle,
        diagnostics,
    })
}
