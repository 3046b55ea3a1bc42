//! Acceptance suite: one line per criterion on stderr, then a single
//! assertion that every criterion passed.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use friedrichs_core::analysis::{convergence_study, discrete_infsup, norm_equivalence, Formulation};
use friedrichs_core::discretization::{assemble, ibp_residual_assembled, space_for, build_space, StructuredMesh};
use friedrichs_core::numerics::{cholesky, least_squares, DenseMatrix, SparseMatrix};
use friedrichs_core::reduction::{
    fit_decay, nwidth_estimate, strong_greedy, sweep, ErrorNorm, FitStatus, GreedyResult, SweepOptions,
};
use friedrichs_core::sections::{
    identity_check, sectional_greedy, shift_dictionary, ProfileRule, SearchMode, Section, SectionDictionary,
    SectionKind, SectionalOptions, ShiftTransform,
};
use friedrichs_core::system::{
    registry_get, registry_ids, validate_friedrichs, CoefficientField, FriedrichsSystem, SamplePlan, Smoothness,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn report(line: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

// 1
fn structural_validation() -> Outcome {
    let mut worst = 0.0_f64;
    for id in registry_ids() {
        let sys = ok(registry_get(&id, &Value::Null))?;
        let plan = SamplePlan {
            per_axis: 2,
            random_points: 256,
            random_params: Some(10),
            seed: 17,
        };
        let t = Instant::now();
        let r = ok(validate_friedrichs(&sys, &plan))?;
        let secs = t.elapsed().as_secs_f64();
        ensure(r.fs1_pass && r.fs2_pass && r.m1_pass, format!("{id}: {:?}", r.failures()))?;
        ensure(secs < 5.0, format!("{id}: {secs:.2} s"))?;
        worst = worst.max(secs);
    }
    Ok(format!("{} systems, slowest {worst:.3} s", registry_ids().len()))
}

// 2
fn scalar(v: f64) -> DenseMatrix {
    DenseMatrix::from_diag(&[v])
}

/// Case 1 with `b(x) = (1 + x y, 1/2 + x²)` and `c(x) = 3 + x`.
fn polynomial_system() -> Result<FriedrichsSystem, String> {
    let mut sys = ok(registry_get("advection-reaction-2d-case1", &Value::Null))?;
    sys.id = "polynomial-advection".into();
    sys.a = vec![
        CoefficientField::new(2, 1, Smoothness::Polynomial, |_, x| scalar(1.0 + x[0] * x[1])),
        CoefficientField::new(2, 1, Smoothness::Polynomial, |_, x| scalar(0.5 + x[0] * x[0])),
    ];
    sys.divergence = Some(CoefficientField::new(2, 1, Smoothness::Polynomial, |_, x| scalar(x[1])));
    sys.a0 = CoefficientField::new(2, 1, Smoothness::Polynomial, |mu, x| scalar(mu[0] + 2.0 + x[0]));
    sys.n1 = None;
    sys.expansion = None;
    Ok(sys)
}

/// The cdr system with every `A^i` scaled by `p(x) = 1 + x y`.
fn polynomial_cdr() -> Result<FriedrichsSystem, String> {
    let base = ok(registry_get("cdr-2d", &Value::Null))?;
    let mut sys = base.clone();
    sys.id = "polynomial-cdr".into();
    let a = base.a.clone();
    sys.a = a
        .iter()
        .cloned()
        .map(|ai| {
            CoefficientField::new(2, base.m, Smoothness::Polynomial, move |mu, x| {
                ai.eval(mu, x).scaled(1.0 + x[0] * x[1])
            })
        })
        .collect();
    let (a1, a2) = (a[0].clone(), a[1].clone());
    sys.divergence = Some(CoefficientField::new(2, base.m, Smoothness::Polynomial, move |mu, x| {
        a1.eval(mu, x).scaled(x[1]).add(&a2.eval(mu, x).scaled(x[0])).unwrap()
    }));
    sys.n1 = None;
    sys.expansion = None;
    Ok(sys)
}

fn integration_by_parts() -> Outcome {
    let mut worst = 0.0_f64;
    for sys in [polynomial_system()?, polynomial_cdr()?] {
        let space = ok(space_for(&sys, 16, 1))?;
        let mu = sys.params.center();
        let ap = ok(assemble(&sys, &space, &mu))?;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let nv = space.n_vertices() * sys.m;
        for _ in 0..50 {
            let mut field = || {
                let nodal: Vec<f64> = (0..nv).map(|_| rng.random_range(-1.0..1.0)).collect();
                space.continuous_field(&nodal)
            };
            let (u, v) = (ok(field())?, ok(field())?);
            let r = ok(ibp_residual_assembled(&ap, &u, &v))?;
            ensure(r <= 1e-10, format!("{}: residual {r:e}", sys.id))?;
            worst = worst.max(r);
        }
    }
    Ok(format!("2 systems x 50 pairs, max residual {worst:.2e}"))
}

// 3
fn manufactured_solution() -> Outcome {
    let sys = ok(registry_get("advection-reaction-1d", &Value::Null))?;
    let t = Instant::now();
    let exact = |x: &[f64]| vec![1.0 - (-x[0]).exp()];
    let cells = [32, 64, 128, 256];
    let mut out = Vec::new();
    for (k, floor) in [(0, 0.8), (1, 1.4)] {
        let s = ok(convergence_study(&sys, &[1.0], k, &cells, &exact))?;
        let min = s.eoc.iter().copied().fold(f64::INFINITY, f64::min);
        ensure(min >= floor, format!("k = {k}: EOC {:?}", s.eoc))?;
        out.push(format!("k={k} min EOC {min:.3}"));
    }
    let secs = t.elapsed().as_secs_f64();
    ensure(secs < 10.0, format!("{secs:.2} s"))?;
    Ok(format!("{}, {secs:.2} s", out.join(", ")))
}

// 4
fn norm_equivalence_case1() -> Outcome {
    let sys = ok(registry_get("advection-reaction-2d-case1", &Value::Null))?;
    let space = ok(space_for(&sys, 8, 1))?;
    let mus = sys.params.random_samples(10, &mut ChaCha8Rng::seed_from_u64(31));
    let r = ok(norm_equivalence(&sys, &space, &mus, 100, 37))?;
    ensure(r.violations == 0 && r.pass, format!("{} violations", r.violations))?;
    Ok(format!(
        "ratios in [{:.3}, {:.3}] within [{:.3}, {:.3}]",
        r.empirical_lower, r.empirical_upper, r.theoretical_lower, r.theoretical_upper
    ))
}

// 5, 6
fn greedy_for(id: &str, cells: usize, n_max: usize) -> Result<(GreedyResult, f64, f64), String> {
    let sys = ok(registry_get(id, &Value::Null))?;
    let space = ok(space_for(&sys, cells, 0))?;
    let mus = sys.params.uniform_samples(100);
    let snaps = ok(sweep(&sys, &space, &mus, SweepOptions::default()))?;
    let g = ok(strong_greedy(&snaps, n_max, 0.0))?;
    let n: Vec<usize> = (1..=g.errors.len()).collect();
    let gfit = fit_decay(&n, &g.errors, snaps.q_b);
    ensure(gfit.status == FitStatus::Fitted, format!("{id}: greedy fit {:?}", gfit.status))?;
    let pod = ok(nwidth_estimate(&snaps, n_max))?;
    Ok((g, gfit.r_squared, pod.fit.r_squared))
}

fn error_at(g: &GreedyResult, n: usize) -> f64 {
    g.errors[(n - 1).min(g.errors.len() - 1)]
}

fn exponential_decay() -> Outcome {
    let t = Instant::now();
    let (g, r2_greedy, r2_pod) = greedy_for("advection-reaction-2d-case1", 128, 15)?;
    let secs = t.elapsed().as_secs_f64();
    let hit = g.errors.iter().position(|&e| e <= 1e-6).map(|i| i + 1);
    ensure(hit.is_some(), format!("errors {:?}", g.errors))?;
    ensure(r2_greedy >= 0.9 && r2_pod >= 0.9, format!("fit quality greedy {r2_greedy:.3}, POD {r2_pod:.3}"))?;
    ensure(secs < 60.0, format!("{secs:.1} s"))?;
    Ok(format!(
        "e <= 1e-6 at N = {}, R^2 greedy {r2_greedy:.3} POD {r2_pod:.3}, {secs:.1} s",
        hit.unwrap()
    ))
}

fn comparative_decay() -> Outcome {
    let (g1, _, _) = greedy_for("advection-reaction-2d-case1", 32, 15)?;
    let sys = ok(registry_get("advection-reaction-2d-case3", &Value::Null))?;
    let space = ok(space_for(&sys, 32, 0))?;
    let snaps = ok(sweep(&sys, &space, &sys.params.uniform_samples(100), SweepOptions::default()))?;
    let g3 = ok(strong_greedy(&snaps, 15, 0.0))?;
    let (e1, e3) = (error_at(&g1, 10), error_at(&g3, 10));
    ensure(e3 >= 10.0 * e1, format!("case 3 {e3:e} vs case 1 {e1:e}"))?;
    Ok(format!("e_10: case 3 {e3:.3e}, case 1 {e1:.3e}, ratio {:.1e}", e3 / e1))
}

// 7
fn sectional_identity() -> Outcome {
    let mut worst = 0.0_f64;
    for (id, cells, k) in [("advection-reaction-1d", 32, 1), ("advection-reaction-2d-case1", 8, 1), ("cdr-1d", 16, 1)] {
        let sys = ok(registry_get(id, &Value::Null))?;
        let space = ok(space_for(&sys, cells, k))?;
        let opts = SweepOptions { reference: None, error_norm: ErrorNorm::Reference };
        let snaps = ok(sweep(&sys, &space, &sys.params.uniform_samples(16), opts))?;
        let c = ok(identity_check(&snaps, 8))?;
        ensure(c.pass && c.max_delta <= 1e-10, format!("{id}: delta {:e}", c.max_delta))?;
        worst = worst.max(c.max_delta);
    }
    Ok(format!("3 configurations, max delta {worst:.2e}"))
}

// 8
fn gaussian(c: f64, w: f64) -> ProfileRule {
    Arc::new(move |x| (-(x - c).powi(2) / (2.0 * w * w)).exp())
}

fn transport_demo() -> Outcome {
    let mesh = ok(StructuredMesh::new(vec![256], &[(0.0, 1.0)], vec![true]))?;
    let space = ok(build_space(mesh, 0, 1))?;
    let mass = Arc::new(space.mass_matrix());
    let t = ok(ShiftTransform::new(space.clone(), Arc::new(|mu: &[f64]| mu[0])))?;
    let target = Section::shifted("u0", t.clone(), gaussian(0.5, 0.05));
    let training: Vec<Vec<f64>> = (0..64).map(|j| vec![j as f64 / 64.0]).collect();
    let grams = vec![mass; training.len()];
    let shifts = ok(shift_dictionary("shift", t, vec![("u0".into(), gaussian(0.5, 0.05))]))?;
    let snapshots = training
        .iter()
        .enumerate()
        .map(|(j, mu)| Ok(Section::constant(format!("snapshot-{j}"), ok(target.evaluate(mu))?.to_vec())))
        .collect::<Result<Vec<_>, String>>()?;
    let consts = ok(SectionDictionary::new("constant", snapshots))?;
    let opts = SectionalOptions { n_max: 10, ..Default::default() };
    let rs = ok(sectional_greedy(&target, &shifts, &training, &grams, opts))?;
    let mut e10 = f64::INFINITY;
    for rule in [friedrichs_core::sections::SelectionRule::MaxErrorReduction, friedrichs_core::sections::SelectionRule::WorstApproximated] {
        let rc = ok(sectional_greedy(&target, &consts, &training, &grams, SectionalOptions { rule, ..opts }))?;
        ensure(rc.errors.len() == 10, "constant dictionary stopped early")?;
        e10 = e10.min(rc.errors[9]);
    }
    ensure(rs.errors[0] <= 1e-8, format!("shift e_1 = {:e}", rs.errors[0]))?;
    ensure(e10 >= 1e-2, format!("constant e_10 = {e10:e}"))?;
    Ok(format!("shift e_1 = {:.2e}, constant e_10 = {e10:.3e}", rs.errors[0]))
}

// 9
struct Instance {
    target: Section,
    dict: SectionDictionary,
    training: Vec<Vec<f64>>,
    grams: Vec<Arc<SparseMatrix>>,
}

fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, s, sections) = (12, 7, 10);
    let smooth = |label: String, rng: &mut ChaCha8Rng| {
        let c: Vec<(f64, f64, f64)> = (0..n)
            .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-3.0..3.0), rng.random_range(-1.0..1.0)))
            .collect();
        Section::from_rule(
            label,
            SectionKind::Solution,
            n,
            Arc::new(move |mu: &[f64]| Ok(c.iter().map(|(a, w, b)| a * (w * mu[0]).sin() + b).collect())),
        )
    };
    let target = smooth("target".into(), &mut rng);
    let dict = SectionDictionary::new("random", (0..sections).map(|k| smooth(format!("s{k}"), &mut rng)).collect())
        .unwrap();
    let training = (0..s).map(|j| vec![j as f64 / (s - 1) as f64]).collect();
    let grams = (0..s)
        .map(|_| {
            let mut g = DenseMatrix::identity(n).scaled(0.5);
            let b: Vec<f64> = (0..n * n).map(|_| rng.random_range(-0.5..0.5)).collect();
            for i in 0..n {
                for j in 0..n {
                    g[(i, j)] += (0..n).map(|k| b[i * n + k] * b[j * n + k]).sum::<f64>();
                }
            }
            Arc::new(SparseMatrix::from_dense(&g))
        })
        .collect();
    Instance { target, dict, training, grams }
}

/// All subsets of the given size, each parameter solved by Cholesky
/// whitening and least squares.
fn brute_force(inst: &Instance, size: usize) -> f64 {
    let m = inst.dict.len();
    let factors: Vec<DenseMatrix> = inst.grams.iter().map(|g| cholesky(&g.to_dense()).unwrap().transpose()).collect();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << m) {
        if mask.count_ones() as usize != size {
            continue;
        }
        let subset: Vec<usize> = (0..m).filter(|k| mask & (1 << k) != 0).collect();
        let mut worst = 0.0_f64;
        for (j, mu) in inst.training.iter().enumerate() {
            let lt = &factors[j];
            let cols: Vec<Vec<f64>> = subset
                .iter()
                .map(|&k| lt.matvec(&inst.dict.sections[k].evaluate(mu).unwrap()).unwrap())
                .collect();
            let t = lt.matvec(&inst.target.evaluate(mu).unwrap()).unwrap();
            worst = worst.max(least_squares(&DenseMatrix::from_columns(&cols), &t).unwrap().residual_norm);
        }
        best = best.min(worst);
    }
    let scale = inst
        .training
        .iter()
        .zip(&inst.grams)
        .map(|(mu, g)| g.quadratic(&inst.target.evaluate(mu).unwrap()).sqrt())
        .fold(0.0, f64::max);
    best / scale
}

fn sectional_brute_force() -> Outcome {
    let mut worst_gap = 0.0_f64;
    let mut worst_ratio = 0.0_f64;
    for seed in 0..5 {
        let inst = random_instance(500 + seed);
        let ex = SectionalOptions { n_max: 3, mode: SearchMode::Exhaustive, ..Default::default() };
        let gr = SectionalOptions { n_max: 3, ..Default::default() };
        let e = ok(sectional_greedy(&inst.target, &inst.dict, &inst.training, &inst.grams, ex))?;
        let g = ok(sectional_greedy(&inst.target, &inst.dict, &inst.training, &inst.grams, gr))?;
        for n in 1..=3 {
            let oracle = brute_force(&inst, n);
            let gap = (e.errors[n - 1] - oracle).abs() / oracle.max(1e-300);
            ensure(gap <= 1e-10, format!("seed {seed} N {n}: {} vs {oracle}", e.errors[n - 1]))?;
            let ratio = g.errors[n - 1] / e.errors[n - 1];
            ensure(ratio <= 2.0, format!("seed {seed} N {n}: greedy/exhaustive {ratio}"))?;
            worst_gap = worst_gap.max(gap);
            worst_ratio = worst_ratio.max(ratio);
        }
    }
    Ok(format!("5 instances, max relative gap {worst_gap:.1e}, greedy/exhaustive <= {worst_ratio:.3}"))
}

// 10, 12
fn binary(args: &[&str]) -> Result<std::process::Output, String> {
    ok(Command::new(env!("CARGO_BIN_EXE_friedrichs")).args(args).output())
}

fn write_config(dir: &Path, name: &str, text: &str) -> Result<String, String> {
    let p = dir.join(name);
    ok(std::fs::write(&p, text))?;
    Ok(p.to_string_lossy().into_owned())
}

fn classification_table() -> Outcome {
    let dir = ok(tempfile::tempdir())?;
    let expected = [
        ("advection-reaction-2d-case1", "exponential-certified"),
        ("advection-reaction-2d-case3", "uncertified"),
        ("cdr-2d", "exponential-certified"),
        ("elasticity-2d", "exponential-certified"),
    ];
    let mut got = Vec::new();
    for (id, verdict) in expected {
        let cfg = write_config(dir.path(), &format!("{id}.json"), &format!(r#"{{"system": {{"id": "{id}"}}, "mesh": {{"cells": 4}}}}"#))?;
        let out = dir.path().join(id);
        let o = binary(&["classify", "--config", &cfg, "--out", &out.to_string_lossy()])?;
        ensure(o.status.code() == Some(0), format!("{id}: exit {:?}", o.status.code()))?;
        let json: Value = ok(serde_json::from_str(&ok(std::fs::read_to_string(out.join("classification.json")))?))?;
        let v = json["verdict"].as_str().unwrap_or_default().to_string();
        ensure(v == verdict, format!("{id}: {v} instead of {verdict}"))?;
        if id == "elasticity-2d" {
            ensure(json["solve_supported"] == Value::Bool(false), "elasticity should note solve_supported = false")?;
        }
        got.push(format!("{id}={v}"));
    }
    Ok(got.join(", "))
}

fn determinism() -> Outcome {
    let dir = ok(tempfile::tempdir())?;
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let runs = [
        ("nwidth", "advection-1d.json"),
        ("solve", "advection-1d.json"),
        ("sectional", "transport-sectional.json"),
        ("sectional", "cdr-identity.json"),
        ("report", "advection-1d.json"),
    ];
    let mut files = 0;
    for (i, (cmd, cfg)) in runs.iter().enumerate() {
        let cfg = root.join(cfg).to_string_lossy().into_owned();
        let a = dir.path().join(format!("{i}-a"));
        let b = dir.path().join(format!("{i}-b"));
        for (out, threads) in [(&a, "1"), (&b, "4")] {
            let o = binary(&[cmd, "--config", &cfg, "--out", &out.to_string_lossy(), "--seed", "42", "--threads", threads])?;
            ensure(o.status.code() == Some(0), format!("{cmd} {cfg}: {}", String::from_utf8_lossy(&o.stderr)))?;
        }
        for entry in ok(std::fs::read_dir(&a))? {
            let p = ok(entry)?.path();
            if p.extension().and_then(|e| e.to_str()) != Some("csv") {
                continue;
            }
            let name = p.file_name().unwrap();
            let (x, y) = (ok(std::fs::read(&p))?, ok(std::fs::read(b.join(name)))?);
            ensure(x == y, format!("{cmd}: {} differs", name.to_string_lossy()))?;
            files += 1;
        }
    }
    ensure(files >= runs.len(), "too few CSV files compared")?;
    Ok(format!("{files} CSV files identical across runs with 1 and 4 threads"))
}

// 11
fn infsup_positivity() -> Outcome {
    let mut lo = f64::INFINITY;
    let mut drift = 0.0_f64;
    for id in registry_ids() {
        let sys = ok(registry_get(&id, &Value::Null))?;
        if !sys.solve_supported {
            continue;
        }
        let cells = if sys.d == 1 { 32 } else { 8 };
        let coarse = ok(space_for(&sys, cells, 0))?;
        let fine = ok(space_for(&sys, 2 * cells, 0))?;
        let mus = sys.params.random_samples(10, &mut ChaCha8Rng::seed_from_u64(41));
        for mu in &mus {
            let (ac, af) = (ok(assemble(&sys, &coarse, mu))?, ok(assemble(&sys, &fine, mu))?);
            for form in [Formulation::Weak, Formulation::Ultraweak] {
                let bc = ok(discrete_infsup(&ac, form))?.beta_h;
                let bf = ok(discrete_infsup(&af, form))?.beta_h;
                ensure(bc > 1e-6 && bf > 1e-6, format!("{id} {form:?} {mu:?}: {bc:e}, {bf:e}"))?;
                let rel = (bf / bc - 1.0).abs();
                ensure(rel <= 0.2, format!("{id} {form:?} {mu:?}: {bc:.4} -> {bf:.4}"))?;
                lo = lo.min(bc.min(bf));
                drift = drift.max(rel);
            }
        }
    }
    Ok(format!("min beta_h {lo:.3e}, max change under refinement {:.1}%", 100.0 * drift))
}

#[test]
fn acceptance_criteria() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("structural validation", structural_validation),
        ("integration-by-parts identity", integration_by_parts),
        ("manufactured solution", manufactured_solution),
        ("norm equivalence", norm_equivalence_case1),
        ("exponential decay", exponential_decay),
        ("comparative decay", comparative_decay),
        ("sectional/classic identity", sectional_identity),
        ("transport demo", transport_demo),
        ("sectional greedy vs brute force", sectional_brute_force),
        ("classification table", classification_table),
        ("inf-sup positivity", infsup_positivity),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        let n = i + 1;
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => report(&format!("criterion {n}: PASS {name} ({detail})")),
            Err(why) => {
                report(&format!("criterion {n}: FAIL {name} ({why})"));
                failed.push(n);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
