use std::sync::Arc;

use friedrichs_core::analysis::{
    coercivity_estimate, m_admissibility_check, AdmissibilityReport, CoercivityReport,
};
use friedrichs_core::discretization::{
    assemble, assemble_operator, build_space, graph_gram, solve, DGSpace, StructuredMesh,
};
use friedrichs_core::numerics::{cholesky, DenseMatrix, SparseMatrix};
use friedrichs_core::reduction::{
    csv_float, fit_decay, nwidth_estimate, strong_greedy, sweep, DecayFit, DecayReport, ErrorNorm,
    ReferenceKind, SnapshotSet, StopReason, SweepOptions, SNAPSHOT_RESIDUAL_TOL,
};
use friedrichs_core::sections::{
    constant_dictionary, dictionary_compare, identity_check, sectional_greedy, shift_dictionary,
    ConstantGenerator, IdentityCheck, InclusionCheck, ProfileRule, Section, SectionDictionary,
    SectionalDecayReport, SectionalOptions, ShiftTransform,
};
use friedrichs_core::system::{
    classify_system, registry_get, validate_friedrichs, FriedrichsSystem, ValidationReport, Verdict,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{
    Cells, ConstantSource, DictionarySpec, ExperimentConfig, ProfileSpec, SectionalSpec, ShiftSpec,
    TargetSpec,
};
use crate::error::CliError;
use crate::manifest::OutputWriter;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandKind {
    Validate,
    Classify,
    Solve,
    Sweep,
    Nwidth,
    Sectional,
    Report,
}

impl CommandKind {
    pub fn name(&self) -> &'static str {
        match self {
            CommandKind::Validate => "validate",
            CommandKind::Classify => "classify",
            CommandKind::Solve => "solve",
            CommandKind::Sweep => "sweep",
            CommandKind::Nwidth => "nwidth",
            CommandKind::Sectional => "sectional",
            CommandKind::Report => "report",
        }
    }
}

pub struct Context<'a> {
    pub cfg: &'a ExperimentConfig,
    pub seed: u64,
    pub debug_matrices: bool,
    pub out: OutputWriter,
}

pub fn dispatch(kind: CommandKind, ctx: &mut Context) -> Result<(), CliError> {
    match kind {
        CommandKind::Validate => cmd_validate(ctx),
        CommandKind::Classify => cmd_classify(ctx),
        CommandKind::Solve => cmd_solve(ctx),
        CommandKind::Sweep => cmd_sweep(ctx),
        CommandKind::Nwidth => cmd_nwidth(ctx),
        CommandKind::Sectional => cmd_sectional(ctx),
        CommandKind::Report => cmd_report(ctx),
    }
}

fn system(cfg: &ExperimentConfig) -> Result<FriedrichsSystem, CliError> {
    let spec = cfg
        .system
        .as_ref()
        .ok_or_else(|| CliError::Config("this command needs a system".into()))?;
    Ok(registry_get(&spec.id, &spec.raw)?)
}

fn mesh(cfg: &ExperimentConfig, sys: Option<&FriedrichsSystem>) -> Result<StructuredMesh, CliError> {
    let domain = match (&cfg.mesh.domain, sys) {
        (Some(d), _) => d.clone(),
        (None, Some(s)) => s.domain.clone(),
        (None, None) => return Err(CliError::Config("mesh.domain is required without a system".into())),
    };
    let d = domain.len();
    if let Some(s) = sys {
        if s.d != d {
            return Err(CliError::Config(format!("mesh.domain has {d} axes, the system {}", s.d)));
        }
    }
    let cells = match &cfg.mesh.cells {
        Cells::Uniform(n) => vec![*n; d],
        Cells::PerAxis(v) => v.clone(),
    };
    let periodic = if cfg.mesh.periodic.is_empty() {
        vec![false; d]
    } else {
        cfg.mesh.periodic.clone()
    };
    if cells.len() != d || periodic.len() != d {
        return Err(CliError::Config(format!("mesh.cells and mesh.periodic need {d} entries")));
    }
    Ok(StructuredMesh::new(cells, &domain, periodic)?)
}

fn space(cfg: &ExperimentConfig, sys: &FriedrichsSystem) -> Result<DGSpace, CliError> {
    Ok(build_space(mesh(cfg, Some(sys))?, cfg.mesh.order, sys.m)?)
}

fn training(cfg: &ExperimentConfig, sys: Option<&FriedrichsSystem>, seed: u64) -> Result<Vec<Vec<f64>>, CliError> {
    let domain = cfg.parameter_box(sys.map(|s| &s.params))?;
    let mus = cfg.samples(&domain, seed);
    for mu in &mus {
        if mu.len() != domain.dim() {
            return Err(CliError::Config(format!(
                "parameter {mu:?} has {} entries, expected {}",
                mu.len(),
                domain.dim()
            )));
        }
    }
    Ok(mus)
}

fn sweep_options(cfg: &ExperimentConfig) -> SweepOptions {
    SweepOptions {
        reference: cfg.reduction.reference,
        error_norm: cfg.reduction.error_norm,
    }
}

fn fmt_mu(mu: &[f64]) -> String {
    mu.iter().map(|&x| csv_float(x)).collect::<Vec<_>>().join(";")
}

fn dump_matrices(
    ctx: &mut Context,
    sys: &FriedrichsSystem,
    sp: &DGSpace,
    mus: &[Vec<f64>],
) -> Result<(), CliError> {
    if !ctx.debug_matrices {
        return Ok(());
    }
    for (j, mu) in mus.iter().enumerate() {
        let b = assemble_operator(sys, sp, mu)?;
        let g = graph_gram(sys, sp, mu)?;
        ctx.out.write(&format!("debug/operator_{j}.mtx"), b.to_matrix_market().as_bytes())?;
        ctx.out.write(&format!("debug/gram_{j}.mtx"), g.to_matrix_market().as_bytes())?;
    }
    Ok(())
}

// ---------------------------------------------------------------- validate

#[derive(Serialize)]
struct GramCheck {
    blocks: usize,
    failed_blocks: usize,
    pass: bool,
}

#[derive(Serialize)]
struct MeshCheck {
    mu: Vec<f64>,
    admissibility: AdmissibilityReport,
    gram: GramCheck,
    coercivity: Option<CoercivityReport>,
}

#[derive(Serialize)]
struct ValidationOutput {
    system: String,
    cells: Vec<usize>,
    order: usize,
    n_dofs: usize,
    structural: ValidationReport,
    mesh_checks: Vec<MeshCheck>,
    failures: Vec<String>,
    pass: bool,
}

/// Cholesky of every diagonal block of the block-diagonal graph Gram.
fn gram_check(g: &SparseMatrix, block: usize) -> GramCheck {
    let blocks = g.rows() / block;
    let failed_blocks = (0..blocks)
        .into_par_iter()
        .filter(|&c| {
            let o = c * block;
            let mut m = DenseMatrix::zeros(block, block);
            for i in 0..block {
                for j in 0..block {
                    m[(i, j)] = g.get(o + i, o + j);
                }
            }
            cholesky(&m).is_err()
        })
        .count();
    GramCheck {
        blocks,
        failed_blocks,
        pass: failed_blocks == 0 && blocks * block == g.rows(),
    }
}

fn cmd_validate(ctx: &mut Context) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let sys = system(cfg)?;
    let plan = cfg.validation.plan(ctx.seed);
    let structural = ctx.out.stage("structural", || Ok(validate_friedrichs(&sys, &plan)?))?;
    let sp = space(cfg, &sys)?;
    let mus = sys.params.uniform_samples(cfg.validation.parameters);
    let trials = cfg.validation.coercivity_trials;
    let seed = ctx.seed;
    let run_mesh_checks = structural.pass;
    let checks = ctx.out.stage("mesh-checks", || {
        if !run_mesh_checks {
            return Ok(Vec::new());
        }
        mus.iter()
            .map(|mu| {
                let admissibility = m_admissibility_check(&sys, &sp, mu)?;
                let gram = gram_check(&graph_gram(&sys, &sp, mu)?, sp.block());
                let coercivity = if trials > 0 {
                    Some(coercivity_estimate(&assemble(&sys, &sp, mu)?, trials, seed)?)
                } else {
                    None
                };
                Ok(MeshCheck {
                    mu: mu.clone(),
                    admissibility,
                    gram,
                    coercivity,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    let mut failures = structural.failures();
    if !run_mesh_checks {
        failures.push("mesh-level checks skipped after structural failure".into());
    }
    for c in &checks {
        if !c.admissibility.m1_pass {
            failures.push(format!(
                "M1: discrete boundary matrix has eigenvalue {:.6e} at mu = {:?}",
                c.admissibility.m1_min_eigenvalue, c.mu
            ));
        }
        if !c.gram.pass {
            failures.push(format!(
                "graph Gram not SPD in {} of {} blocks at mu = {:?}",
                c.gram.failed_blocks, c.gram.blocks, c.mu
            ));
        }
    }
    let pass = failures.is_empty();
    let report = ValidationOutput {
        system: sys.id.clone(),
        cells: sp.mesh().cells_per_axis().to_vec(),
        order: sp.order(),
        n_dofs: sp.n_dofs(),
        structural,
        mesh_checks: checks,
        failures: failures.clone(),
        pass,
    };
    ctx.out.write_json("validation.json", &report)?;
    if pass {
        println!("{}: valid", sys.id);
        Ok(())
    } else {
        Err(CliError::Validation(failures.join("; ")))
    }
}

// ---------------------------------------------------------------- classify

fn cmd_classify(ctx: &mut Context) -> Result<(), CliError> {
    let sys = system(ctx.cfg)?;
    let c = ctx.out.stage("classify", || Ok(classify_system(&sys)?))?;
    ctx.out.write_json("classification.json", &c)?;
    println!("{}: {}", c.system, c.verdict);
    for k in &c.criteria {
        println!("  [{}] {}: {}", if k.passed { "x" } else { " " }, k.name, k.detail);
    }
    Ok(())
}

// ---------------------------------------------------------------- solve / sweep

fn cmd_solve(ctx: &mut Context) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let sys = system(cfg)?;
    let sp = space(cfg, &sys)?;
    let mus = training(cfg, Some(&sys), ctx.seed)?;
    for mu in &mus {
        sys.params.check_point(mu)?;
    }
    let sols = ctx.out.stage("solve", || {
        mus.par_iter()
            .map(|mu| Ok(solve(&sys, &sp, mu)?))
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    let mut fields = String::from("j,mu,dof,u\n");
    let mut summary = String::from("j,mu,residual\n");
    for (j, (mu, s)) in mus.iter().zip(&sols).enumerate() {
        let m = fmt_mu(mu);
        for (i, v) in s.u.iter().enumerate() {
            fields.push_str(&format!("{j},{m},{i},{}\n", csv_float(*v)));
        }
        summary.push_str(&format!("{j},{m},{}\n", csv_float(s.residual)));
    }
    ctx.out.write("solutions.csv", fields.as_bytes())?;
    ctx.out.write("solve_summary.csv", summary.as_bytes())?;
    dump_matrices(ctx, &sys, &sp, &mus)?;
    if let Some((mu, s)) = mus.iter().zip(&sols).find(|(_, s)| !(s.residual <= SNAPSHOT_RESIDUAL_TOL)) {
        return Err(CliError::Numerical(format!(
            "relative residual {:e} at mu = {mu:?}",
            s.residual
        )));
    }
    Ok(())
}

fn run_sweep(ctx: &mut Context, sys: &FriedrichsSystem, sp: &DGSpace) -> Result<SnapshotSet, CliError> {
    let mus = training(ctx.cfg, Some(sys), ctx.seed)?;
    let opts = sweep_options(ctx.cfg);
    let snaps = ctx.out.stage("sweep", || Ok(sweep(sys, sp, &mus, opts)?))?;
    dump_matrices(ctx, sys, sp, &mus[..1])?;
    Ok(snaps)
}

fn cmd_sweep(ctx: &mut Context) -> Result<(), CliError> {
    let sys = system(ctx.cfg)?;
    let sp = space(ctx.cfg, &sys)?;
    let snaps = run_sweep(ctx, &sys, &sp)?;
    let mut csv = String::from("j,mu,residual,norm\n");
    for j in 0..snaps.len() {
        csv.push_str(&format!(
            "{j},{},{},{}\n",
            fmt_mu(&snaps.params[j]),
            csv_float(snaps.residuals[j]),
            csv_float(snaps.norm(j))
        ));
    }
    ctx.out.write("sweep.csv", csv.as_bytes())?;
    Ok(())
}

// ---------------------------------------------------------------- nwidth

#[derive(Serialize)]
struct GreedySummary {
    errors: Vec<f64>,
    selected_params: Vec<Vec<f64>>,
    stop: StopReason,
    fit: DecayFit,
}

#[derive(Serialize)]
struct NwidthOutput {
    system: String,
    training_size: usize,
    n_max: usize,
    q_b: usize,
    reference: ReferenceKind,
    error_norm: ErrorNorm,
    pod: DecayReport,
    greedy: GreedySummary,
    verdict: Verdict,
    note: Option<String>,
}

fn compute_nwidth(ctx: &mut Context) -> Result<NwidthOutput, CliError> {
    let cfg = ctx.cfg;
    let sys = system(cfg)?;
    let sp = space(cfg, &sys)?;
    let snaps = run_sweep(ctx, &sys, &sp)?;
    let n = cfg.reduction.n_max.min(snaps.len());
    let pod = ctx.out.stage("pod", || Ok(nwidth_estimate(&snaps, n)?))?;
    let greedy = ctx.out.stage("greedy", || Ok(strong_greedy(&snaps, n, cfg.reduction.tol)?))?;
    let gn: Vec<usize> = (1..=greedy.errors.len()).collect();
    let classification = ctx.out.stage("classify", || Ok(classify_system(&sys)?))?;
    let note = (classification.verdict == Verdict::Uncertified).then(|| {
        let failed: Vec<&str> = classification.failed().iter().map(|c| c.name.as_str()).collect();
        format!(
            "uncertified system: measured decay carries no exponential guarantee (failed: {})",
            failed.join(", ")
        )
    });
    Ok(NwidthOutput {
        system: sys.id.clone(),
        training_size: snaps.len(),
        n_max: n,
        q_b: snaps.q_b,
        reference: snaps.reference_kind,
        error_norm: cfg.reduction.error_norm,
        greedy: GreedySummary {
            fit: fit_decay(&gn, &greedy.errors, snaps.q_b),
            errors: greedy.errors,
            selected_params: greedy.selected_params,
            stop: greedy.stop,
        },
        pod,
        verdict: classification.verdict,
        note,
    })
}

/// Greedy error for `N`: after an exhausted stop the span no longer grows,
/// after a tolerance stop the value is unknown.
fn greedy_at(g: &GreedySummary, n: usize) -> Option<f64> {
    match g.errors.get(n - 1) {
        Some(&e) => Some(e),
        None if g.stop == StopReason::Exhausted => g.errors.last().copied(),
        None => None,
    }
}

fn nwidth_csv(r: &NwidthOutput) -> String {
    let mut csv = String::from("N,pod_err,greedy_err,selected_mu\n");
    for (i, &n) in r.pod.n.iter().enumerate() {
        let g = greedy_at(&r.greedy, n).map(csv_float).unwrap_or_default();
        let mu = r.greedy.selected_params.get(n - 1).map(|m| fmt_mu(m)).unwrap_or_default();
        csv.push_str(&format!("{n},{},{g},{mu}\n", csv_float(r.pod.errors[i])));
    }
    csv
}

fn cmd_nwidth(ctx: &mut Context) -> Result<(), CliError> {
    let r = compute_nwidth(ctx)?;
    ctx.out.write("nwidth.csv", nwidth_csv(&r).as_bytes())?;
    ctx.out.write_json("nwidth.json", &r)?;
    println!(
        "{}: {} ({}), greedy e_{} = {:.3e}",
        r.system,
        r.verdict,
        r.note.as_deref().unwrap_or("certified"),
        r.greedy.errors.len(),
        r.greedy.errors.last().copied().unwrap_or(0.0)
    );
    Ok(())
}

// ---------------------------------------------------------------- sectional

fn profile_rule(p: &ProfileSpec) -> Result<ProfileRule, CliError> {
    match *p {
        ProfileSpec::Gaussian { center, width, amplitude } => {
            if !(width > 0.0) {
                return Err(CliError::Config("gaussian width must be positive".into()));
            }
            Ok(Arc::new(move |x| amplitude * (-(x - center).powi(2) / (2.0 * width * width)).exp()))
        }
        ProfileSpec::Sine { frequency, amplitude } => {
            Ok(Arc::new(move |x| amplitude * (2.0 * std::f64::consts::PI * frequency * x).sin()))
        }
    }
}

struct SectionalSetup {
    target: Section,
    /// Evaluates the target away from the training set.
    evaluator: Section,
    space: DGSpace,
    transform: Option<Arc<ShiftTransform>>,
    snaps: SnapshotSet,
    norm: &'static str,
}

fn sectional_setup(ctx: &mut Context, target: &TargetSpec) -> Result<SectionalSetup, CliError> {
    let cfg = ctx.cfg;
    match target {
        TargetSpec::Solution => {
            let sys = system(cfg)?;
            let sp = space(cfg, &sys)?;
            let snaps = run_sweep(ctx, &sys, &sp)?;
            let target = Section::tabulated("target", snaps.params.clone(), snaps.snapshots.clone())?;
            Ok(SectionalSetup {
                target,
                evaluator: Section::solution(&sys, &sp),
                space: sp,
                transform: None,
                norm: match cfg.reduction.error_norm {
                    ErrorNorm::PerParameter => "graph",
                    ErrorNorm::Reference => "reference",
                },
                snaps,
            })
        }
        TargetSpec::ShiftedProfile { profile, shift } => {
            let sys = cfg.system.as_ref().map(|_| system(cfg)).transpose()?;
            let m = mesh(cfg, sys.as_ref())?;
            if m.d() != 1 || !m.periodic()[0] {
                return Err(CliError::Config("shifted-profile targets need a periodic 1D mesh".into()));
            }
            let sp = build_space(m, cfg.mesh.order, 1)?;
            let params = training(cfg, sys.as_ref(), ctx.seed)?;
            let ShiftSpec { scale, axis } = *shift;
            if params.iter().any(|mu| axis >= mu.len()) {
                return Err(CliError::Config(format!("shift axis {axis} exceeds the parameter dimension")));
            }
            let transform = ShiftTransform::new(sp.clone(), Arc::new(move |mu: &[f64]| scale * mu[axis]))?;
            let target = Section::shifted("target", transform.clone(), profile_rule(profile)?);
            let fields = ctx.out.stage("tabulate", || {
                params
                    .par_iter()
                    .map(|mu| Ok(target.evaluate(mu)?.as_ref().clone()))
                    .collect::<Result<Vec<_>, CliError>>()
            })?;
            let mass = Arc::new(sp.mass_matrix());
            let grams = vec![mass.clone(); params.len()];
            let snaps = SnapshotSet::new(params, fields, grams, mass, ReferenceKind::L2, 1)?;
            Ok(SectionalSetup {
                evaluator: target.clone(),
                target,
                space: sp,
                transform: Some(transform),
                snaps,
                norm: "l2",
            })
        }
    }
}

fn build_dictionaries(spec: &SectionalSpec, setup: &SectionalSetup) -> Result<Vec<SectionDictionary>, CliError> {
    spec.dictionaries
        .iter()
        .map(|d| match d {
            DictionarySpec::Constant { id, source } => match source {
                ConstantSource::Training => {
                    let sections = setup
                        .snaps
                        .snapshots
                        .iter()
                        .enumerate()
                        .map(|(j, u)| Section::constant(format!("snapshot-{j}"), u.clone()))
                        .collect();
                    Ok(SectionDictionary::new(id.clone(), sections)?)
                }
                ConstantSource::Samples(points) => {
                    let sections = points
                        .par_iter()
                        .enumerate()
                        .map(|(i, mu)| {
                            Ok(Section::constant(
                                format!("sample-{i}"),
                                setup.evaluator.evaluate(mu)?.as_ref().clone(),
                            ))
                        })
                        .collect::<Result<Vec<_>, CliError>>()?;
                    Ok(SectionDictionary::new(id.clone(), sections)?)
                }
                ConstantSource::DofBasis => {
                    Ok(constant_dictionary(id.clone(), &setup.space, ConstantGenerator::DofBasis)?)
                }
            },
            DictionarySpec::Shift { id, profiles } => {
                let transform = setup.transform.clone().ok_or_else(|| {
                    CliError::Config(format!("shift dictionary '{id}' needs a shifted-profile target"))
                })?;
                let rules = profiles
                    .iter()
                    .map(|p| Ok((p.label.clone(), profile_rule(&p.profile)?)))
                    .collect::<Result<Vec<_>, CliError>>()?;
                Ok(shift_dictionary(id.clone(), transform, rules)?)
            }
        })
        .collect()
}

#[derive(Serialize)]
struct SectionalOutput {
    training_size: usize,
    norm: &'static str,
    options: SectionalOptions,
    reports: Vec<SectionalDecayReport>,
    inclusions: Vec<InclusionCheck>,
    identity: Option<IdentityCheck>,
    identity_note: Option<String>,
    pass: bool,
}

fn compute_sectional(ctx: &mut Context) -> Result<SectionalOutput, CliError> {
    let cfg = ctx.cfg;
    let spec = cfg
        .sectional
        .as_ref()
        .ok_or_else(|| CliError::Config("this command needs a sectional block".into()))?;
    let setup = sectional_setup(ctx, &spec.target)?;
    let dicts = ctx.out.stage("dictionaries", || build_dictionaries(spec, &setup))?;
    let opts = SectionalOptions {
        n_max: spec.n_max,
        tol: spec.tol,
        rule: spec.rule,
        mode: spec.mode,
        q_b: setup.snaps.q_b,
    };
    let snaps = &setup.snaps;
    let (reports, inclusions) = ctx.out.stage("sectional", || {
        if dicts.len() >= 2 {
            let c = dictionary_compare(&setup.target, &dicts, &snaps.params, &snaps.grams, opts)?;
            Ok((c.reports, c.inclusions))
        } else {
            let r = sectional_greedy(&setup.target, &dicts[0], &snaps.params, &snaps.grams, opts)?;
            Ok((vec![r], Vec::new()))
        }
    })?;
    let has_training = spec
        .dictionaries
        .iter()
        .any(|d| matches!(d, DictionarySpec::Constant { source: ConstantSource::Training, .. }));
    let (identity, identity_note) = if !has_training {
        (None, Some("no constant dictionary of training snapshots".to_string()))
    } else if !snaps.parameter_independent_norm() {
        (None, Some("the error norm depends on the parameter".to_string()))
    } else {
        let n = spec.n_max.min(snaps.len());
        (Some(ctx.out.stage("identity", || Ok(identity_check(snaps, n)?))?), None)
    };
    let pass = inclusions.iter().all(|c| c.pass) && identity.as_ref().is_none_or(|i| i.pass);
    Ok(SectionalOutput {
        training_size: snaps.len(),
        norm: setup.norm,
        options: opts,
        reports,
        inclusions,
        identity,
        identity_note,
        pass,
    })
}

fn sectional_csv(r: &SectionalOutput) -> String {
    let mut csv = String::from("dictionary,N,e_N,selected\n");
    for rep in &r.reports {
        for (i, (&n, &e)) in rep.n.iter().zip(&rep.errors).enumerate() {
            let sel = match rep.selection.len() {
                1 => rep.selection[0].get(i).cloned().unwrap_or_default(),
                _ => rep.selection.get(i).map(|s| s.join(";")).unwrap_or_default(),
            };
            csv.push_str(&format!("{},{n},{},{sel}\n", rep.dictionary, csv_float(e)));
        }
    }
    csv
}

fn comparison_csv(r: &SectionalOutput) -> String {
    let mut csv = String::from("row,N,e_N,beta,r_squared,fit_status,delta\n");
    for rep in &r.reports {
        let n = rep.n.last().copied().unwrap_or(0);
        let e = rep.errors.last().copied().map(csv_float).unwrap_or_default();
        let status = serde_json::to_value(rep.fit.status)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default();
        csv.push_str(&format!(
            "{},{n},{e},{},{},{status},\n",
            rep.dictionary,
            csv_float(rep.fit.beta),
            csv_float(rep.fit.r_squared)
        ));
    }
    if let Some(id) = &r.identity {
        let n = id.greedy_errors.len();
        let e = id.greedy_errors.last().copied().map(csv_float).unwrap_or_default();
        csv.push_str(&format!("identity-check,{n},{e},,,,{}\n", csv_float(id.max_delta)));
    }
    csv
}

fn cmd_sectional(ctx: &mut Context) -> Result<(), CliError> {
    let r = compute_sectional(ctx)?;
    ctx.out.write("sectional.csv", sectional_csv(&r).as_bytes())?;
    ctx.out.write("comparison.csv", comparison_csv(&r).as_bytes())?;
    ctx.out.write_json("sectional.json", &r)?;
    for rep in &r.reports {
        println!(
            "{}: e_{} = {:.3e}",
            rep.dictionary,
            rep.errors.len(),
            rep.errors.last().copied().unwrap_or(0.0)
        );
    }
    if let Some(id) = &r.identity {
        println!("identity check: max delta {:.3e}", id.max_delta);
    }
    if r.pass {
        Ok(())
    } else {
        Err(CliError::Validation(
            "sectional cross-checks failed (see sectional.json)".into(),
        ))
    }
}

// ---------------------------------------------------------------- report

fn cmd_report(ctx: &mut Context) -> Result<(), CliError> {
    let mut series: Vec<(String, Vec<(usize, f64)>)> = Vec::new();
    if ctx.cfg.system.is_some() && !matches!(
        ctx.cfg.sectional.as_ref().map(|s| &s.target),
        Some(TargetSpec::ShiftedProfile { .. })
    ) {
        let r = compute_nwidth(ctx)?;
        series.push(("pod".into(), r.pod.n.iter().copied().zip(r.pod.errors.iter().copied()).collect()));
        let g = &r.greedy.errors;
        series.push(("greedy".into(), g.iter().enumerate().map(|(i, &e)| (i + 1, e)).collect()));
    }
    if ctx.cfg.sectional.is_some() {
        let r = compute_sectional(ctx)?;
        for rep in r.reports {
            let pts = rep.n.iter().copied().zip(rep.errors.iter().copied()).collect();
            series.push((format!("sectional:{}", rep.dictionary), pts));
        }
    }
    if series.is_empty() {
        return Err(CliError::Config("report needs a system or a sectional block".into()));
    }
    let mut csv = String::from("series,N,value\n");
    for (name, pts) in &series {
        for (n, v) in pts {
            csv.push_str(&format!("{name},{n},{}\n", csv_float(*v)));
        }
    }
    ctx.out.write("plot_data.csv", csv.as_bytes())?;
    ctx.out.write("plot.gp", gnuplot_script(&series).as_bytes())?;
    Ok(())
}

fn gnuplot_script(series: &[(String, Vec<(usize, f64)>)]) -> String {
    let mut s = String::from(
        "set datafile separator ','\n\
         set logscale y\n\
         set format y '%.0e'\n\
         set xlabel 'N'\n\
         set ylabel 'relative error'\n\
         set key outside\n\
         set terminal pngcairo size 900,600\n\
         set output 'decay.png'\n\
         plot \\\n",
    );
    let lines: Vec<String> = series
        .iter()
        .map(|(name, _)| {
            format!(
                "  'plot_data.csv' using 2:(strcol(1) eq '{name}' && $3 > 0 ? $3 : NaN) \
                 skip 1 with linespoints title '{name}'"
            )
        })
        .collect();
    s.push_str(&lines.join(", \\\n"));
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_check_flags_indefinite_blocks() {
        let mut d = DenseMatrix::zeros(4, 4);
        for i in 0..4 {
            d[(i, i)] = if i == 3 { -1.0 } else { 2.0 };
        }
        let c = gram_check(&SparseMatrix::from_dense(&d), 2);
        assert_eq!((c.blocks, c.failed_blocks, c.pass), (2, 1, false));
    }

    #[test]
    fn greedy_rows_after_stops() {
        let fit = fit_decay(&[1], &[0.5], 1);
        let mut g = GreedySummary {
            errors: vec![0.5, 0.1],
            selected_params: Vec::new(),
            stop: StopReason::Exhausted,
            fit,
        };
        assert_eq!(greedy_at(&g, 4), Some(0.1));
        g.stop = StopReason::Tolerance;
        assert_eq!(greedy_at(&g, 3), None);
    }

    #[test]
    fn gnuplot_plots_every_series() {
        let s = gnuplot_script(&[("pod".into(), vec![(1, 0.5)]), ("greedy".into(), vec![(1, 0.4)])]);
        assert!(s.contains("eq 'pod'") && s.contains("eq 'greedy'"));
    }
}
