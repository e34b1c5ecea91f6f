//! Global asymptotic stability certificates for monotone networks
//! `x_i' = -a_i x_i + sum_j b_ij sigma(x_j)`.
//!
//! With `0 < sigma' <= 1` the Jacobian ratios `J_ij / -J_ii` are bounded by
//! `gamma_ij = b_ij / a_i`. Both certificates analyse the comparison matrix
//! with `-1` on the diagonal and `gamma_ij` off it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::{AnalysisConfig, Verdict};
use crate::error::{Error, Result};
use crate::gains::{EdgeGainTable, Infeasible, MaxGainCheck};
use crate::graph::{enumerate_simple_cycles, SimpleCycle, WeightedDigraph};
use crate::matrix::{MetzlerMatrix, SquareMatrix};
use crate::stability::{max_gain_verdict, sum_gain_analysis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    /// `tanh(s)`
    Tanh,
    /// `s / (1 + |s|)`
    Rational,
}

impl Nonlinearity {
    pub fn eval(self, s: f64) -> f64 {
        match self {
            Nonlinearity::Tanh => s.tanh(),
            Nonlinearity::Rational => s / (1.0 + s.abs()),
        }
    }

    pub fn derivative(self, s: f64) -> f64 {
        match self {
            Nonlinearity::Tanh => 1.0 - s.tanh().powi(2),
            Nonlinearity::Rational => 1.0 / (1.0 + s.abs()).powi(2),
        }
    }
}

#[derive(Deserialize)]
struct RawSpec {
    n: usize,
    decay: Vec<f64>,
    coupling: Vec<Vec<f64>>,
    sigma: Nonlinearity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct MonotoneNetworkSpec {
    pub n: usize,
    pub decay: Vec<f64>,
    pub coupling: Vec<Vec<f64>>,
    pub sigma: Nonlinearity,
}

impl TryFrom<RawSpec> for MonotoneNetworkSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        if raw.decay.len() != raw.n {
            return Err(Error::InvalidNetwork(format!(
                "decay has {} entries, n = {}",
                raw.decay.len(),
                raw.n
            )));
        }
        if raw.coupling.len() != raw.n {
            return Err(Error::InvalidNetwork(format!(
                "coupling has {} rows, n = {}",
                raw.coupling.len(),
                raw.n
            )));
        }
        Self::new(raw.decay, raw.coupling, raw.sigma)
    }
}

impl MonotoneNetworkSpec {
    pub fn new(decay: Vec<f64>, coupling: Vec<Vec<f64>>, sigma: Nonlinearity) -> Result<Self> {
        let n = decay.len();
        if n == 0 {
            return Err(Error::InvalidNetwork("network has no nodes".into()));
        }
        for (i, &a) in decay.iter().enumerate() {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::InvalidNetwork(format!("decay {} = {a} must be positive", i + 1)));
            }
        }
        if coupling.len() != n {
            return Err(Error::InvalidNetwork(format!("coupling has {} rows, expected {n}", coupling.len())));
        }
        for (i, row) in coupling.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidNetwork(format!(
                    "coupling row {} has {} entries, expected {n}",
                    i + 1,
                    row.len()
                )));
            }
            for (j, &b) in row.iter().enumerate() {
                if !(b.is_finite() && b >= 0.0) {
                    return Err(Error::InvalidNetwork(format!(
                        "coupling ({}, {}) = {b} must be nonnegative",
                        i + 1,
                        j + 1
                    )));
                }
                if i == j && b != 0.0 {
                    return Err(Error::InvalidNetwork(format!("coupling ({0}, {0}) must be zero", i + 1)));
                }
            }
        }
        Ok(Self { n, decay, coupling, sigma })
    }

    pub fn rhs(&self, x: &[f64], out: &mut [f64]) {
        let s: Vec<f64> = x.iter().map(|&v| self.sigma.eval(v)).collect();
        for i in 0..self.n {
            let mut acc = -self.decay[i] * x[i];
            for (b, sj) in self.coupling[i].iter().zip(&s) {
                acc += b * sj;
            }
            out[i] = acc;
        }
    }

    pub fn jacobian(&self, x: &[f64]) -> SquareMatrix {
        SquareMatrix::from_fn(self.n, |i, j| {
            if i == j {
                -self.decay[i]
            } else {
                self.coupling[i][j] * self.sigma.derivative(x[j])
            }
        })
    }

    /// The linear system `-diag(a) + B` that bounds the network from above
    /// on the nonnegative orthant.
    pub fn linearization(&self) -> MetzlerMatrix {
        let m = SquareMatrix::from_fn(self.n, |i, j| if i == j { -self.decay[i] } else { self.coupling[i][j] });
        MetzlerMatrix::new(m).expect("validated coupling")
    }
}

/// Upper bounds `gamma_ij >= J_ij(x) / -J_ii(x)` for all `x >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianRatioBounds {
    pub n: usize,
    pub gamma: BTreeMap<(usize, usize), f64>,
}

#[derive(Serialize)]
struct BoundEntry {
    row: usize,
    col: usize,
    gamma: f64,
}

impl Serialize for JacobianRatioBounds {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.gamma
            .iter()
            .map(|(&(i, j), &g)| BoundEntry { row: i + 1, col: j + 1, gamma: g })
            .collect::<Vec<_>>()
            .serialize(s)
    }
}

impl JacobianRatioBounds {
    /// `-1` on the diagonal, `gamma_ij` off it.
    pub fn comparison_matrix(&self) -> MetzlerMatrix {
        let mut m = SquareMatrix::from_diagonal(&vec![-1.0; self.n]);
        for (&(i, j), &g) in &self.gamma {
            m.set(i, j, g);
        }
        MetzlerMatrix::new(m).expect("bounds are nonnegative")
    }
}

/// `gamma_ij = b_ij / a_i`, valid because `sigma' <= 1` for both built-in
/// nonlinearities.
pub fn ratio_bounds(spec: &MonotoneNetworkSpec) -> JacobianRatioBounds {
    let mut gamma = BTreeMap::new();
    for i in 0..spec.n {
        for j in 0..spec.n {
            let b = spec.coupling[i][j];
            if i != j && b != 0.0 {
                gamma.insert((i, j), b / spec.decay[i]);
            }
        }
    }
    JacobianRatioBounds { n: spec.n, gamma }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sum,
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GasCertificate {
    pub method: Method,
    pub certified: bool,
    pub verdict: Verdict,
    pub bounds: JacobianRatioBounds,
    pub comparison_matrix: SquareMatrix,
    pub cycles: Vec<SimpleCycle>,
    /// Sum method: gain of each cycle and total gain of each leading block.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycle_gains: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prefix_gains: Option<Vec<f64>>,
    /// Max method: the `psi` table and both conditions evaluated on it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi: Option<EdgeGainTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check: Option<MaxGainCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub infeasible: Option<Infeasible>,
}

fn comparison_cycles(c: &MetzlerMatrix, cfg: &AnalysisConfig) -> Result<Vec<SimpleCycle>> {
    enumerate_simple_cycles(&WeightedDigraph::from_matrix(c), cfg.cycle_cap)
}

/// Certified when every leading block of the comparison matrix has total
/// cycle gain below one.
pub fn certify_sum(bounds: &JacobianRatioBounds, cfg: &AnalysisConfig) -> Result<GasCertificate> {
    let c = bounds.comparison_matrix();
    let cycles = comparison_cycles(&c, cfg)?;
    let s = sum_gain_analysis(&c, &cycles, cfg)?;
    Ok(GasCertificate {
        method: Method::Sum,
        certified: s.exact == Verdict::Hurwitz,
        verdict: s.exact,
        bounds: bounds.clone(),
        comparison_matrix: c.into_inner(),
        cycles,
        cycle_gains: Some(s.cycle_gains),
        prefix_gains: Some(s.prefix_gains),
        psi: None,
        check: None,
        infeasible: None,
    })
}

/// Certified when a `psi` table with `sum_j gamma_ij / psi_ij < 1` per node
/// and `psi_c < 1` per cycle exists; built from the comparison matrix's
/// feasibility witness.
pub fn certify_max(bounds: &JacobianRatioBounds, cfg: &AnalysisConfig) -> Result<GasCertificate> {
    let c = bounds.comparison_matrix();
    let cycles = comparison_cycles(&c, cfg)?;
    let r = max_gain_verdict(&c, &cycles, cfg.tol);
    Ok(GasCertificate {
        method: Method::Max,
        certified: r.verdict == Verdict::Hurwitz,
        verdict: r.verdict,
        bounds: bounds.clone(),
        comparison_matrix: c.into_inner(),
        cycles,
        cycle_gains: None,
        prefix_gains: None,
        psi: r.psi,
        check: r.check,
        infeasible: r.infeasible,
    })
}

pub fn certify(spec: &MonotoneNetworkSpec, method: Method, cfg: &AnalysisConfig) -> Result<GasCertificate> {
    let bounds = ratio_bounds(spec);
    match method {
        Method::Sum => certify_sum(&bounds, cfg),
        Method::Max => certify_max(&bounds, cfg),
    }
}
