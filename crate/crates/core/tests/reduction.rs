use friedrichs_core::discretization::space_for;
use friedrichs_core::reduction::*;
use friedrichs_core::system::registry_get;
use serde_json::Value;

fn run(id: &str, cells: usize) -> (GreedyResult, DecayReport) {
    let sys = registry_get(id, &Value::Null).unwrap();
    let space = space_for(&sys, cells, 0).unwrap();
    let mus = sys.params.uniform_samples(40);
    let s = sweep(&sys, &space, &mus, SweepOptions::default()).unwrap();
    (strong_greedy(&s, 15, 0.0).unwrap(), nwidth_estimate(&s, 15).unwrap())
}

#[test]
fn reaction_parametrized_transport_decays_fast() {
    let (g, w) = run("advection-reaction-2d-case1", 16);
    assert!(g.errors.iter().any(|&e| e <= 1e-6));
    assert_eq!(w.fit.status, FitStatus::Fitted);
    assert!(w.fit.beta > 0.0 && w.fit.r_squared >= 0.9);
    assert_eq!(w.q_b, 2);
}

#[test]
fn rotating_transport_decays_slower() {
    let (g1, _) = run("advection-reaction-2d-case1", 16);
    let (g3, _) = run("advection-reaction-2d-case3", 16);
    let at = |g: &GreedyResult, n: usize| g.errors[(n - 1).min(g.errors.len() - 1)];
    assert!(at(&g3, 10) >= 10.0 * at(&g1, 10));
}

#[test]
fn greedy_tolerance_stops_early() {
    let sys = registry_get("advection-reaction-1d", &Value::Null).unwrap();
    let space = space_for(&sys, 32, 1).unwrap();
    let s = sweep(&sys, &space, &sys.params.uniform_samples(30), SweepOptions::default()).unwrap();
    let g = strong_greedy(&s, 30, 1e-4).unwrap();
    assert_eq!(g.stop, StopReason::Tolerance);
    assert!(*g.errors.last().unwrap() <= 1e-4);
    assert!(g.errors[..g.errors.len() - 1].iter().all(|&e| e > 1e-4));
}
