use metzler::fixtures::{flow_system, four_node_example, six_node_example, three_node_example};
use metzler::graph::{disjoint_cycle_sets, enumerate_simple_cycles, is_cactus, WeightedDigraph};
use metzler::io::{format_matrix_text, parse_matrix};
use metzler::nonlinear::certify;
use metzler::simulate::{integrate, inf_norm};
use metzler::stability::CactusResult;
use metzler::{
    expand, full_report, AnalysisConfig, InputSignal, Method, MetzlerMatrix, MonotoneNetworkSpec, Nonlinearity,
    System, Verdict,
};

#[test]
fn four_node_report() {
    let r = full_report(&four_node_example(), &AnalysisConfig::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Hurwitz);
    assert!(r.consistency);
    let s = r.sum_conditions.as_ref().unwrap();
    assert_eq!(s.cycle_gains.len(), 3);
    assert!((s.gain_sum - 1.0).abs() < 1e-15);
    assert_ne!(s.sufficient, Verdict::Hurwitz);
    assert_eq!(s.exact, Verdict::Hurwitz);
    // last prefix total gain is 1 - det(-M)/prod(-m_ii)
    assert!((s.prefix_gains[3] - 0.88).abs() < 1e-12);
}

#[test]
fn three_node_is_marginal() {
    let r = full_report(&three_node_example(), &AnalysisConfig::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Marginal);
    assert!(r.oracle.is_marginal());
    assert_eq!(r.sum_conditions.unwrap().necessary, Verdict::Hurwitz);
}

#[test]
fn six_node_families() {
    let m = six_node_example();
    let cycles = enumerate_simple_cycles(&WeightedDigraph::from_matrix(&m), 1000).unwrap();
    assert_eq!(cycles.len(), 5);
    assert!(!is_cactus(&cycles));
    let sets = disjoint_cycle_sets(&cycles, 1000).unwrap();
    let sizes: Vec<usize> = sets.iter().map(|(_, fams)| fams.len()).collect();
    assert_eq!(sizes, vec![5, 4, 1, 0, 0]);
    let r = full_report(&m, &AnalysisConfig::default()).unwrap();
    assert!(r.consistency);
    assert!(matches!(r.cactus, Some(CactusResult::NotApplicable { .. })));
}

#[test]
fn flow_system_boundary() {
    let cfg = AnalysisConfig::default();
    // d > g and f > dg / (d - g) = 2
    assert_eq!(full_report(&flow_system(2.5, 1.0, 2.0), &cfg).unwrap().verdict, Verdict::Hurwitz);
    assert_eq!(full_report(&flow_system(1.5, 1.0, 2.0), &cfg).unwrap().verdict, Verdict::NotHurwitz);
    assert_eq!(full_report(&flow_system(2.0, 1.0, 2.0), &cfg).unwrap().verdict, Verdict::Marginal);
    assert_eq!(full_report(&flow_system(9.0, 2.0, 2.0), &cfg).unwrap().verdict, Verdict::NotHurwitz);
}

#[test]
fn expansion_keeps_verdict() {
    let m = MetzlerMatrix::new(four_node_example()).unwrap();
    let e = expand(&m);
    assert_eq!(e.dim(), m.dim() + e.added_nodes());
    let cfg = AnalysisConfig::default();
    assert_eq!(full_report(&e.matrix, &cfg).unwrap().verdict, Verdict::Hurwitz);
    let back = e.contract().unwrap();
    for i in 0..m.dim() {
        for j in 0..m.dim() {
            assert!((back.get(i, j) - m.get(i, j)).abs() < 1e-10);
        }
    }
}

#[test]
fn text_round_trip_through_report() {
    let m = six_node_example();
    let parsed = parse_matrix(&format_matrix_text(&m)).unwrap();
    let cfg = AnalysisConfig::default();
    let a = serde_json::to_string(&full_report(&m, &cfg).unwrap()).unwrap();
    let b = serde_json::to_string(&full_report(&parsed, &cfg).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn ring_network_certified_and_decays() {
    let spec = MonotoneNetworkSpec::new(
        vec![2.0, 2.0, 2.0],
        vec![vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
        Nonlinearity::Rational,
    )
    .unwrap();
    let cfg = AnalysisConfig::default();
    for method in [Method::Sum, Method::Max] {
        assert!(certify(&spec, method, &cfg).unwrap().certified);
    }
    let tr = integrate(System::Network(&spec), &[1.0, 4.0, 2.0], &InputSignal::Zero, 40.0, 0.01).unwrap();
    assert!(inf_norm(tr.final_state()) < 1e-5);
    assert!(tr.min_entry() >= 0.0);
}

#[test]
fn strong_coupling_not_certified() {
    let spec = MonotoneNetworkSpec::new(
        vec![1.0, 1.0],
        vec![vec![0.0, 2.0], vec![1.0, 0.0]],
        Nonlinearity::Tanh,
    )
    .unwrap();
    let cfg = AnalysisConfig::default();
    let c = certify(&spec, Method::Sum, &cfg).unwrap();
    assert!(!c.certified);
    assert_eq!(c.verdict, Verdict::NotHurwitz);
    assert!(!certify(&spec, Method::Max, &cfg).unwrap().certified);
}
