//! Fixed-step RK4 integration of `x' = M x + u` and of monotone networks,
//! plus the per-node ISS trajectory bound for linear systems.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::MetzlerMatrix;
use crate::nonlinear::MonotoneNetworkSpec;

pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_HORIZON: f64 = 50.0;
/// States with an entry beyond this magnitude abort the integration.
pub const OVERFLOW_GUARD: f64 = 1e12;
pub const ISS_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub enum System<'a> {
    Linear(&'a MetzlerMatrix),
    Network(&'a MonotoneNetworkSpec),
}

impl System<'_> {
    pub fn dim(&self) -> usize {
        match self {
            System::Linear(m) => m.dim(),
            System::Network(s) => s.n,
        }
    }

    fn rhs(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        match self {
            System::Linear(m) => {
                let n = m.dim();
                for i in 0..n {
                    out[i] = m.row(i).iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            System::Network(s) => s.rhs(x, out),
        }
        for (o, ui) in out.iter_mut().zip(u) {
            *o += ui;
        }
    }
}

/// Piecewise-constant nonnegative input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSignal {
    Zero,
    Constant { value: Vec<f64> },
    /// `levels[k]` is applied on `[times[k], times[k + 1])`; the last level
    /// holds forever. Zero before `times[0]`.
    Steps { times: Vec<f64>, levels: Vec<Vec<f64>> },
}

impl InputSignal {
    pub fn at(&self, t: f64, n: usize) -> Vec<f64> {
        match self {
            InputSignal::Zero => vec![0.0; n],
            InputSignal::Constant { value } => value.clone(),
            InputSignal::Steps { times, levels } => match times.iter().rposition(|&s| s <= t) {
                Some(k) => levels[k].clone(),
                None => vec![0.0; n],
            },
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let check = |v: &[f64]| -> Result<()> {
            if v.len() != n {
                return Err(Error::InvalidSimulation(format!("input has {} entries, expected {n}", v.len())));
            }
            if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::InvalidSimulation("inputs must be finite and nonnegative".into()));
            }
            Ok(())
        };
        match self {
            InputSignal::Zero => Ok(()),
            InputSignal::Constant { value } => check(value),
            InputSignal::Steps { times, levels } => {
                if times.len() != levels.len() {
                    return Err(Error::InvalidSimulation("step times and levels differ in length".into()));
                }
                if times.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::InvalidSimulation("step times must increase".into()));
                }
                levels.iter().try_for_each(|l| check(l))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Input applied at each grid time.
    pub inputs: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectories hold the initial state")
    }

    /// Most negative state entry seen, or zero.
    pub fn min_entry(&self) -> f64 {
        self.states.iter().flatten().fold(0.0f64, |a, &v| a.min(v))
    }

    /// CSV with header `t,x1,...,xn`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let io_err = |e: csv::Error| Error::InvalidSimulation(format!("csv output failed: {e}"));
        let mut out = csv::Writer::from_writer(w);
        let n = self.states.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        out.write_record(&header).map_err(io_err)?;
        for (t, x) in self.times.iter().zip(&self.states) {
            let mut row = vec![t.to_string()];
            row.extend(x.iter().map(f64::to_string));
            out.write_record(&row).map_err(io_err)?;
        }
        out.flush()
            .map_err(|e| Error::InvalidSimulation(format!("csv output failed: {e}")))
    }
}

pub fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// Classical RK4 on a uniform grid of step `h`; the last step is shortened
/// to land on `horizon` exactly.
pub fn integrate(system: System<'_>, x0: &[f64], input: &InputSignal, horizon: f64, h: f64) -> Result<Trajectory> {
    let n = system.dim();
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidSimulation(format!("step {h} must be positive")));
    }
    if !(horizon >= h && horizon.is_finite()) {
        return Err(Error::InvalidSimulation(format!("horizon {horizon} must be at least the step {h}")));
    }
    if x0.len() != n {
        return Err(Error::InvalidSimulation(format!("initial state has {} entries, expected {n}", x0.len())));
    }
    if x0.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidSimulation("initial state must be finite and nonnegative".into()));
    }
    input.validate(n)?;

    let steps = (horizon / h - 1e-9).ceil() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut inputs = Vec::with_capacity(steps + 1);
    let mut x = x0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    times.push(0.0);
    states.push(x.clone());
    inputs.push(input.at(0.0, n));
    for k in 0..steps {
        let t = k as f64 * h;
        let dt = if k + 1 == steps { horizon - t } else { h };
        let (u0, um, u1) = (input.at(t, n), input.at(t + 0.5 * dt, n), input.at(t + dt, n));
        system.rhs(&x, &u0, &mut k1);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * dt * k1[i];
        }
        system.rhs(&tmp, &um, &mut k2);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * dt * k2[i];
        }
        system.rhs(&tmp, &um, &mut k3);
        for i in 0..n {
            tmp[i] = x[i] + dt * k3[i];
        }
        system.rhs(&tmp, &u1, &mut k4);
        for i in 0..n {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t_next = t + dt;
        if x.iter().any(|v| !v.is_finite() || v.abs() > OVERFLOW_GUARD) {
            return Err(Error::StepRejected { time: t_next });
        }
        times.push(t_next);
        states.push(x.clone());
        inputs.push(u1);
    }
    Ok(Trajectory { times, states, inputs })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeBound {
    /// 1-based node.
    pub node: usize,
    pub holds: bool,
    /// Smallest `bound + slack - |x_i(t)|` over the grid.
    pub worst_margin: f64,
    /// Grid time of the worst margin.
    pub worst_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IssCheck {
    pub nodes: Vec<NodeBound>,
    pub holds: bool,
}

/// Checks at every grid time `t`
/// `|x_i(t)| <= e^{m_ii t} |x_i(0)| + sum_j (m_ij / -m_ii) sup_{[0,t]} |x_j|
///             + sup_{[0,t]} |u_i| / -m_ii + slack`,
/// with the suprema taken as running maxima over grid points.
pub fn check_sum_iss_bound(traj: &Trajectory, m: &MetzlerMatrix, slack: f64) -> Result<IssCheck> {
    let n = m.dim();
    if traj.states.first().map_or(0, Vec::len) != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: traj.states.first().map_or(0, Vec::len),
        });
    }
    for i in 0..n {
        if m.get(i, i) >= 0.0 {
            return Err(Error::NonNegativeDiagonal { node: i + 1 });
        }
    }
    let x0 = &traj.states[0];
    let mut sup_x = vec![0.0f64; n];
    let mut sup_u = vec![0.0f64; n];
    let mut nodes: Vec<NodeBound> = (0..n)
        .map(|i| NodeBound {
            node: i + 1,
            holds: true,
            worst_margin: f64::INFINITY,
            worst_time: 0.0,
        })
        .collect();
    for ((&t, x), u) in traj.times.iter().zip(&traj.states).zip(&traj.inputs) {
        for i in 0..n {
            sup_x[i] = sup_x[i].max(x[i].abs());
            sup_u[i] = sup_u[i].max(u[i].abs());
        }
        for (i, nb) in nodes.iter_mut().enumerate() {
            let d = -m.get(i, i);
            let coupling: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| m.get(i, j) / d * sup_x[j])
                .sum();
            let bound = (-d * t).exp() * x0[i].abs() + coupling + sup_u[i] / d;
            let margin = bound + slack - x[i].abs();
            if margin < nb.worst_margin {
                nb.worst_margin = margin;
                nb.worst_time = t;
            }
        }
    }
    for nb in &mut nodes {
        nb.holds = nb.worst_margin >= 0.0;
    }
    let holds = nodes.iter().all(|nb| nb.holds);
    Ok(IssCheck { nodes, holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SquareMatrix;
    use crate::sampling::MetzlerSampler;
    use crate::test_support::*;
    use rand::Rng;

    fn metzler(m: SquareMatrix) -> MetzlerMatrix {
        MetzlerMatrix::new(m).unwrap()
    }

    #[test]
    fn scalar_decay_matches_exponential() {
        let m = metzler(SquareMatrix::from_diagonal(&[-1.0]));
        let tr = integrate(System::Linear(&m), &[1.0], &InputSignal::Zero, 5.0, 0.01).unwrap();
        assert_eq!(tr.times.len(), 501);
        assert!((tr.times[500] - 5.0).abs() < 1e-12);
        assert!((tr.final_state()[0] - (-5.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn fourth_order_convergence() {
        let m = metzler(SquareMatrix::from_diagonal(&[-2.0]));
        let err = |h: f64| {
            let tr = integrate(System::Linear(&m), &[1.0], &InputSignal::Zero, 1.0, h).unwrap();
            (tr.final_state()[0] - (-2.0f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!(ratio > 14.0 && ratio < 18.0, "{ratio}");
    }

    #[test]
    fn partial_last_step() {
        let m = metzler(SquareMatrix::from_diagonal(&[-1.0]));
        let tr = integrate(System::Linear(&m), &[1.0], &InputSignal::Zero, 1.05, 0.1).unwrap();
        assert_eq!(tr.times.len(), 12);
        assert!((tr.times[11] - 1.05).abs() < 1e-15);
    }

    #[test]
    fn zero_eigenvalue_neither_decays_nor_grows() {
        let m = metzler(three_node_example());
        let tr = integrate(System::Linear(&m), &[1.0; 3], &InputSignal::Zero, 50.0, 0.01).unwrap();
        let x = tr.final_state();
        // columns sum to zero, so the total mass is conserved
        let total: f64 = x.iter().sum();
        assert!((total - 3.0).abs() < 1e-8);
        assert!(x.iter().all(|&v| v > 0.5 && v < 1.5));
    }

    #[test]
    fn divergence_is_rejected() {
        let m = metzler(SquareMatrix::from_diagonal(&[5.0]));
        assert!(matches!(
            integrate(System::Linear(&m), &[1.0], &InputSignal::Zero, 10.0, 0.01),
            Err(Error::StepRejected { .. })
        ));
    }

    #[test]
    fn bad_setups() {
        let m = metzler(SquareMatrix::from_diagonal(&[-1.0]));
        let sys = System::Linear(&m);
        assert!(integrate(sys, &[1.0], &InputSignal::Zero, 1.0, 0.0).is_err());
        assert!(integrate(sys, &[1.0], &InputSignal::Zero, 0.001, 0.01).is_err());
        assert!(integrate(sys, &[-1.0], &InputSignal::Zero, 1.0, 0.1).is_err());
        assert!(integrate(sys, &[1.0, 2.0], &InputSignal::Zero, 1.0, 0.1).is_err());
        let neg = InputSignal::Constant { value: vec![-1.0] };
        assert!(integrate(sys, &[1.0], &neg, 1.0, 0.1).is_err());
    }

    #[test]
    fn step_input_lookup() {
        let u = InputSignal::Steps { times: vec![1.0, 2.0], levels: vec![vec![3.0], vec![1.0]] };
        assert_eq!(u.at(0.5, 1), vec![0.0]);
        assert_eq!(u.at(1.0, 1), vec![3.0]);
        assert_eq!(u.at(1.99, 1), vec![3.0]);
        assert_eq!(u.at(7.0, 1), vec![1.0]);
    }

    #[test]
    fn decoupled_bound_is_tight() {
        let m = metzler(SquareMatrix::from_diagonal(&[-1.0, -2.0]));
        let tr = integrate(System::Linear(&m), &[1.0, 2.0], &InputSignal::Zero, 3.0, 0.001).unwrap();
        let c = check_sum_iss_bound(&tr, &m, ISS_SLACK).unwrap();
        assert!(c.holds);
        for nb in &c.nodes {
            assert!(nb.worst_margin < 2e-6);
        }
    }

    #[test]
    fn four_node_bound_with_inputs() {
        let m = metzler(four_node_example());
        let mut rng = seeded(10);
        let times: Vec<f64> = (0..5).map(|k| 2.0 * k as f64).collect();
        let levels = (0..5).map(|_| (0..4).map(|_| rng.random_range(0.0..2.0)).collect()).collect();
        let u = InputSignal::Steps { times, levels };
        let tr = integrate(System::Linear(&m), &[1.0, 0.5, 2.0, 0.0], &u, 20.0, 0.01).unwrap();
        assert!(check_sum_iss_bound(&tr, &m, ISS_SLACK).unwrap().holds);
        assert!(tr.min_entry() > -1e-9);
    }

    #[test]
    fn csv_export() {
        let m = metzler(SquareMatrix::from_diagonal(&[-1.0, -1.0]));
        let tr = integrate(System::Linear(&m), &[1.0, 0.0], &InputSignal::Zero, 0.2, 0.1).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x1,x2");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,1,0"));
    }

    #[test]
    fn network_trajectories_are_ordered() {
        let mut rng = seeded(12);
        for _ in 0..20 {
            let spec = crate::sampling::random_network(&mut rng, 4, 0.6, 0.3, 1.5);
            let lo: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..2.0)).collect();
            let hi: Vec<f64> = lo.iter().map(|v| v + rng.random_range(0.0..1.0)).collect();
            let a = integrate(System::Network(&spec), &lo, &InputSignal::Zero, 5.0, 0.01).unwrap();
            let b = integrate(System::Network(&spec), &hi, &InputSignal::Zero, 5.0, 0.01).unwrap();
            for (xa, xb) in a.states.iter().zip(&b.states) {
                for (p, q) in xa.iter().zip(xb) {
                    assert!(p <= &(q + 1e-7));
                }
            }
            assert!(a.min_entry() > -1e-9);
        }
    }

    mod props {
        use super::*;
        use crate::stability::spectral_abscissa_oracle;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn iss_bound_holds_for_hurwitz_samples(seed in any::<u64>(), n in 1usize..=5) {
                let mut rng = seeded(seed);
                let m = MetzlerSampler::hurwitz(n, 0.5).sample(&mut rng);
                let x0: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
                let u = InputSignal::Constant { value: (0..n).map(|_| rng.random_range(0.0..1.0)).collect() };
                let tr = integrate(System::Linear(&m), &x0, &u, 10.0, 0.01).unwrap();
                prop_assert!(check_sum_iss_bound(&tr, &m, ISS_SLACK).unwrap().holds);
                prop_assert!(tr.min_entry() > -1e-9);
            }

            #[test]
            fn tail_slope_tracks_abscissa(seed in any::<u64>(), n in 2usize..=5) {
                let mut rng = seeded(seed);
                let m = MetzlerSampler::hurwitz(n, 0.6).irreducible().sample(&mut rng);
                let alpha = spectral_abscissa_oracle(&m).abscissa;
                let tr = integrate(System::Linear(&m), &vec![1.0; n], &InputSignal::Zero, 20.0, 0.01).unwrap();
                let k = tr.times.len();
                let (a, b) = (k / 2, k - 1);
                let slope = (inf_norm(&tr.states[b]).ln() - inf_norm(&tr.states[a]).ln())
                    / (tr.times[b] - tr.times[a]);
                prop_assert!(slope <= alpha + 0.05, "slope {} alpha {}", slope, alpha);
            }
        }
    }
}
