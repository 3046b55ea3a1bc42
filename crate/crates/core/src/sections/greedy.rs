use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Section, SectionDictionary};
use crate::error::{Error, Result};
use crate::numerics::{vecops, SparseMatrix};
use crate::reduction::{fit_decay, g_orthogonalize, strong_greedy, DecayFit, SnapshotSet};

/// Section evaluations whose new component is below this fraction of their
/// norm add nothing at that parameter.
const DEPENDENCE_TOL: f64 = 1e-12;
/// Largest `N` and dictionary size for exhaustive subset search.
pub const EXHAUSTIVE_MAX_N: usize = 3;
pub const EXHAUSTIVE_MAX_DICT: usize = 12;
/// Allowed slack in the inclusion and identity checks.
pub const CHECK_TOL: f64 = 1e-10;
const TIE_RTOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionRule {
    /// Add the section minimizing the new worst-case error.
    #[default]
    MaxErrorReduction,
    /// Add the section that best approximates the currently worst parameter.
    WorstApproximated,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMode {
    #[default]
    Greedy,
    /// Best subset of each size `N ≤ 3` out of at most 12 sections.
    Exhaustive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SectionalOptions {
    pub n_max: usize,
    pub tol: f64,
    pub rule: SelectionRule,
    pub mode: SearchMode,
    pub q_b: usize,
}

impl Default for SectionalOptions {
    fn default() -> Self {
        SectionalOptions {
            n_max: 10,
            tol: 0.0,
            rule: SelectionRule::default(),
            mode: SearchMode::default(),
            q_b: 1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SectionalDecayReport {
    pub dictionary: String,
    pub rule: SelectionRule,
    pub mode: SearchMode,
    pub n: Vec<usize>,
    /// `e_N / e₀` with `e₀ = max_μ ‖target(μ)‖_μ`.
    pub errors: Vec<f64>,
    pub scale: f64,
    /// Greedy: labels in selection order. Exhaustive: best subset per `N`.
    pub selection: Vec<Vec<String>>,
    /// The dictionary ran out before the tolerance was met.
    pub exhausted: bool,
    /// Parameter/section pairs that were numerically dependent.
    pub degenerate_evaluations: usize,
    pub q_b: usize,
    pub fit: DecayFit,
}

/// Per-parameter state: a `G_μ`-orthonormal basis of the selected
/// evaluations and the current residual of the target.
#[derive(Clone)]
struct Fiber {
    q: Vec<Vec<f64>>,
    gq: Vec<Vec<f64>>,
    r: Vec<f64>,
    err: f64,
}

struct Step {
    err: f64,
    update: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
}

impl Fiber {
    fn new(t: &[f64], g: &SparseMatrix) -> Self {
        Fiber {
            q: Vec::new(),
            gq: Vec::new(),
            r: t.to_vec(),
            err: g.quadratic(t).max(0.0).sqrt(),
        }
    }

    fn trial(&self, v: &[f64], g: &SparseMatrix) -> Result<Step> {
        let o = g_orthogonalize(v, &self.q, &self.gq, g, DEPENDENCE_TOL)?;
        let Some(q) = o.q else {
            return Ok(Step { err: self.err, update: None });
        };
        let gq = g.matvec(&q)?;
        let a = vecops::dot(&gq, &self.r);
        let mut r = self.r.clone();
        vecops::axpy(-a, &q, &mut r);
        Ok(Step {
            err: g.quadratic(&r).max(0.0).sqrt(),
            update: Some((q, gq, r)),
        })
    }

    fn commit(&mut self, step: Step) -> bool {
        self.err = step.err;
        match step.update {
            Some((q, gq, r)) => {
                self.q.push(q);
                self.gq.push(gq);
                self.r = r;
                true
            }
            None => false,
        }
    }
}

struct Tabulation {
    targets: Vec<Arc<Vec<f64>>>,
    /// `values[k][j]` is section `k` at training parameter `j`.
    values: Vec<Vec<Arc<Vec<f64>>>>,
    scale: f64,
}

fn tabulate(
    target: &Section,
    dict: &SectionDictionary,
    training: &[Vec<f64>],
    grams: &[Arc<SparseMatrix>],
) -> Result<Tabulation> {
    if training.is_empty() {
        return Err(Error::invalid("sectional estimate needs at least one training parameter"));
    }
    if grams.len() != training.len() {
        return Err(Error::DimensionMismatch {
            context: "training grams",
            expected: training.len(),
            found: grams.len(),
        });
    }
    if target.n_dofs() != dict.n_dofs() || grams.iter().any(|g| g.rows() != dict.n_dofs()) {
        return Err(Error::invalid("target, dictionary and norms have different dof counts"));
    }
    let targets = training
        .par_iter()
        .map(|mu| target.evaluate(mu))
        .collect::<Result<Vec<_>>>()?;
    let values = dict
        .sections
        .iter()
        .map(|s| {
            if s.is_constant() {
                let v = s.evaluate(&training[0])?;
                Ok(vec![v; training.len()])
            } else {
                training.par_iter().map(|mu| s.evaluate(mu)).collect::<Result<Vec<_>>>()
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let scale = targets
        .iter()
        .zip(grams)
        .map(|(t, g)| g.quadratic(t).max(0.0).sqrt())
        .fold(0.0, f64::max);
    Ok(Tabulation { targets, values, scale })
}

fn relative(err: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}

fn worst(fibers: &[Fiber]) -> f64 {
    fibers.iter().map(|f| f.err).fold(0.0, f64::max)
}

/// Greedy (or exhaustive) estimate of the sectional width of `target` over
/// `dict` restricted to the training parameters, each parameter measured in
/// its own Gram.
pub fn sectional_greedy(
    target: &Section,
    dict: &SectionDictionary,
    training: &[Vec<f64>],
    grams: &[Arc<SparseMatrix>],
    opts: SectionalOptions,
) -> Result<SectionalDecayReport> {
    if opts.n_max == 0 {
        return Err(Error::invalid("sectional estimate needs N_max >= 1"));
    }
    let tab = tabulate(target, dict, training, grams)?;
    match opts.mode {
        SearchMode::Greedy => run_greedy(dict, grams, &tab, opts),
        SearchMode::Exhaustive => run_exhaustive(dict, grams, &tab, opts),
    }
}

fn run_greedy(
    dict: &SectionDictionary,
    grams: &[Arc<SparseMatrix>],
    tab: &Tabulation,
    opts: SectionalOptions,
) -> Result<SectionalDecayReport> {
    let mut fibers: Vec<Fiber> = tab
        .targets
        .iter()
        .zip(grams)
        .map(|(t, g)| Fiber::new(t, g))
        .collect();
    let mut chosen: Vec<usize> = Vec::new();
    let mut errors = Vec::new();
    let mut degenerate = 0;
    let mut exhausted = false;
    while chosen.len() < opts.n_max {
        if relative(worst(&fibers), tab.scale) <= opts.tol {
            break;
        }
        let candidates: Vec<usize> = (0..dict.len()).filter(|k| !chosen.contains(k)).collect();
        if candidates.is_empty() {
            exhausted = true;
            break;
        }
        let scores: Vec<(f64, f64)> = match opts.rule {
            SelectionRule::MaxErrorReduction => candidates
                .iter()
                .map(|&k| {
                    let errs = fibers
                        .par_iter()
                        .enumerate()
                        .map(|(j, f)| Ok(f.trial(&tab.values[k][j], &grams[j])?.err))
                        .collect::<Result<Vec<f64>>>()?;
                    let max = errs.iter().copied().fold(0.0, f64::max);
                    Ok((max, errs.iter().map(|e| e * e).sum()))
                })
                .collect::<Result<Vec<_>>>()?,
            SelectionRule::WorstApproximated => {
                let mut jw = 0;
                for (j, f) in fibers.iter().enumerate() {
                    if f.err > fibers[jw].err {
                        jw = j;
                    }
                }
                candidates
                    .par_iter()
                    .map(|&k| Ok((fibers[jw].trial(&tab.values[k][jw], &grams[jw])?.err, 0.0)))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        let mut best = 0;
        for (i, s) in scores.iter().enumerate() {
            if better(*s, scores[best]) {
                best = i;
            }
        }
        let k = candidates[best];
        let steps = fibers
            .par_iter()
            .enumerate()
            .map(|(j, f)| f.trial(&tab.values[k][j], &grams[j]))
            .collect::<Result<Vec<_>>>()?;
        for (f, s) in fibers.iter_mut().zip(steps) {
            if !f.commit(s) {
                degenerate += 1;
            }
        }
        chosen.push(k);
        errors.push(relative(worst(&fibers), tab.scale));
    }
    if chosen.len() < opts.n_max && chosen.len() == dict.len() && relative(worst(&fibers), tab.scale) > opts.tol {
        exhausted = true;
    }
    let labels: Vec<String> = chosen.iter().map(|&k| dict.sections[k].label.clone()).collect();
    let n: Vec<usize> = (1..=errors.len()).collect();
    Ok(SectionalDecayReport {
        dictionary: dict.id.clone(),
        rule: opts.rule,
        mode: SearchMode::Greedy,
        fit: fit_decay(&n, &errors, opts.q_b),
        n,
        errors,
        scale: tab.scale,
        selection: vec![labels],
        exhausted,
        degenerate_evaluations: degenerate,
        q_b: opts.q_b,
    })
}

/// Smaller worst-case error wins; worst-case errors equal to round-off are
/// decided by the total squared error.
fn better(a: (f64, f64), b: (f64, f64)) -> bool {
    if (a.0 - b.0).abs() <= TIE_RTOL * a.0.max(b.0) {
        a.1 < b.1
    } else {
        a.0 < b.0
    }
}

/// Worst error over the training set for one subset.
fn subset_error(subset: &[usize], grams: &[Arc<SparseMatrix>], tab: &Tabulation) -> Result<(f64, usize)> {
    let per: Vec<(f64, usize)> = (0..tab.targets.len())
        .into_par_iter()
        .map(|j| {
            let mut f = Fiber::new(&tab.targets[j], &grams[j]);
            let mut deg = 0;
            for &k in subset {
                let s = f.trial(&tab.values[k][j], &grams[j])?;
                if !f.commit(s) {
                    deg += 1;
                }
            }
            Ok((f.err, deg))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((
        per.iter().map(|p| p.0).fold(0.0, f64::max),
        per.iter().map(|p| p.1).sum(),
    ))
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub(crate) fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let mut i = k;
        while i > 0 && cur[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        cur[i - 1] += 1;
        for j in i..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

fn run_exhaustive(
    dict: &SectionDictionary,
    grams: &[Arc<SparseMatrix>],
    tab: &Tabulation,
    opts: SectionalOptions,
) -> Result<SectionalDecayReport> {
    if opts.n_max > EXHAUSTIVE_MAX_N || dict.len() > EXHAUSTIVE_MAX_DICT {
        return Err(Error::invalid(format!(
            "exhaustive search needs N <= {EXHAUSTIVE_MAX_N} and at most {EXHAUSTIVE_MAX_DICT} sections, got N = {} and {}",
            opts.n_max,
            dict.len()
        )));
    }
    let top = opts.n_max.min(dict.len());
    let mut errors = Vec::with_capacity(top);
    let mut selection = Vec::with_capacity(top);
    let mut degenerate = 0;
    for size in 1..=top {
        let mut best: Option<(f64, Vec<usize>, usize)> = None;
        for subset in combinations(dict.len(), size) {
            let (e, deg) = subset_error(&subset, grams, tab)?;
            if best.as_ref().is_none_or(|b| e < b.0) {
                best = Some((e, subset, deg));
            }
        }
        let (e, subset, deg) = best.expect("at least one subset");
        degenerate += deg;
        errors.push(relative(e, tab.scale));
        selection.push(subset.iter().map(|&k| dict.sections[k].label.clone()).collect());
    }
    let n: Vec<usize> = (1..=errors.len()).collect();
    Ok(SectionalDecayReport {
        dictionary: dict.id.clone(),
        rule: opts.rule,
        mode: SearchMode::Exhaustive,
        fit: fit_decay(&n, &errors, opts.q_b),
        exhausted: top < opts.n_max && errors.last().is_some_and(|&e| e > opts.tol),
        n,
        errors,
        scale: tab.scale,
        selection,
        degenerate_evaluations: degenerate,
        q_b: opts.q_b,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InclusionCheck {
    pub smaller: String,
    pub larger: String,
    /// `max_N (e_N(larger) − e_N(smaller))`, positive when violated.
    pub max_violation: f64,
    /// Only exhaustive runs are asserted.
    pub asserted: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub reports: Vec<SectionalDecayReport>,
    pub inclusions: Vec<InclusionCheck>,
    pub pass: bool,
}

/// Runs the estimator for every dictionary and checks that nested
/// dictionaries give ordered widths.
pub fn dictionary_compare(
    target: &Section,
    dicts: &[SectionDictionary],
    training: &[Vec<f64>],
    grams: &[Arc<SparseMatrix>],
    opts: SectionalOptions,
) -> Result<ComparisonReport> {
    if dicts.len() < 2 {
        return Err(Error::invalid("dictionary comparison needs at least two dictionaries"));
    }
    let reports = dicts
        .iter()
        .map(|d| sectional_greedy(target, d, training, grams, opts))
        .collect::<Result<Vec<_>>>()?;
    let asserted = opts.mode == SearchMode::Exhaustive;
    let mut inclusions = Vec::new();
    for (a, da) in dicts.iter().enumerate() {
        for (b, db) in dicts.iter().enumerate() {
            if a == b || !db.contains_all(da) {
                continue;
            }
            let (ea, eb) = (&reports[a].errors, &reports[b].errors);
            let mut viol = f64::NEG_INFINITY;
            for n in 0..ea.len().min(eb.len()) {
                viol = viol.max(eb[n] - ea[n]);
            }
            inclusions.push(InclusionCheck {
                smaller: da.id.clone(),
                larger: db.id.clone(),
                max_violation: viol,
                asserted,
                pass: !asserted || viol <= CHECK_TOL,
            });
        }
    }
    let pass = inclusions.iter().all(|c| c.pass);
    Ok(ComparisonReport {
        reports,
        inclusions,
        pass,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub greedy_errors: Vec<f64>,
    pub sectional_errors: Vec<f64>,
    pub max_delta: f64,
    pub pass: bool,
}

/// Strong greedy on the snapshots against the sectional estimate with the
/// constant dictionary of the same snapshots. Needs a parameter-independent
/// norm.
pub fn identity_check(snaps: &SnapshotSet, n_max: usize) -> Result<IdentityCheck> {
    if !snaps.parameter_independent_norm() {
        return Err(Error::invalid("the identity check needs a parameter-independent norm"));
    }
    let greedy = strong_greedy(snaps, n_max, 0.0)?;
    let dict = SectionDictionary::new(
        "snapshots",
        snaps
            .snapshots
            .iter()
            .enumerate()
            .map(|(i, u)| Section::constant(format!("const-{i}"), u.clone()))
            .collect(),
    )?;
    let target = Section::tabulated("target", snaps.params.clone(), snaps.snapshots.clone())?;
    let opts = SectionalOptions {
        n_max: greedy.errors.len().max(1),
        tol: 0.0,
        rule: SelectionRule::WorstApproximated,
        mode: SearchMode::Greedy,
        q_b: snaps.q_b,
    };
    let sect = sectional_greedy(&target, &dict, &snaps.params, &snaps.grams, opts)?;
    let common = greedy.errors.len().min(sect.errors.len());
    let max_delta = (0..common)
        .map(|n| (greedy.errors[n] - sect.errors[n]).abs())
        .fold(0.0, f64::max);
    Ok(IdentityCheck {
        pass: max_delta <= CHECK_TOL && common == greedy.errors.len(),
        greedy_errors: greedy.errors,
        sectional_errors: sect.errors,
        max_delta,
    })
}
