//! Sections over the parameter domain and the sectional N-width estimator.
//!
//! A section assigns a dof vector to every parameter. Dictionaries are
//! finite families of sections; the estimator approximates a target section
//! by spans of dictionary members, measuring each parameter in its own norm.

mod greedy;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::discretization::{solve, DGSpace};
use crate::error::{Error, Result};
use crate::system::FriedrichsSystem;

pub use greedy::{
    dictionary_compare, identity_check, sectional_greedy, ComparisonReport, IdentityCheck,
    InclusionCheck, SearchMode, SectionalDecayReport, SectionalOptions, SelectionRule,
};

pub type SectionRule = Arc<dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync>;
pub type ProfileRule = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type ShiftRule = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SectionKind {
    Constant,
    Transformed,
    Solution,
    Composite,
}

/// Translation `x ↦ x − s(μ)` on a periodic 1D scalar DG space.
pub struct ShiftTransform {
    space: DGSpace,
    shift: ShiftRule,
    quadrature_points: usize,
}

impl fmt::Debug for ShiftTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ShiftTransform")
            .field("cells", &self.space.mesh().n_cells())
            .field("order", &self.space.order())
            .finish_non_exhaustive()
    }
}

impl ShiftTransform {
    pub fn new(space: DGSpace, shift: ShiftRule) -> Result<Arc<Self>> {
        if space.d() != 1 || !space.mesh().periodic()[0] {
            return Err(Error::invalid("shift sections need a periodic 1D mesh"));
        }
        if space.m() != 1 {
            return Err(Error::invalid("shift sections need a scalar space"));
        }
        let quadrature_points = space.order() + 6;
        Ok(Arc::new(ShiftTransform {
            space,
            shift,
            quadrature_points,
        }))
    }

    pub fn space(&self) -> &DGSpace {
        &self.space
    }

    /// Cellwise L² projection of `φ(x − s(μ))` with periodic wraparound.
    pub fn apply(&self, profile: &dyn Fn(f64) -> f64, mu: &[f64]) -> Vec<f64> {
        let s = (self.shift)(mu);
        let (a, b) = self.space.mesh().domain()[0];
        let len = b - a;
        self.space.project(
            &|x| vec![profile(a + (x[0] - s - a).rem_euclid(len))],
            self.quadrature_points,
        )
    }
}

#[derive(Clone)]
enum Rule {
    Fixed(Arc<Vec<f64>>),
    Shift {
        transform: Arc<ShiftTransform>,
        profile: ProfileRule,
    },
    Map(SectionRule),
    Sum(Vec<Section>),
}

#[derive(Clone)]
pub struct Section {
    pub label: String,
    pub kind: SectionKind,
    /// Free-form origin note carried into reports.
    pub provenance: String,
    n_dofs: usize,
    rule: Rule,
}

impl fmt::Debug for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Section")
            .field("label", &self.label)
            .field("kind", &self.kind)
            .field("n_dofs", &self.n_dofs)
            .finish_non_exhaustive()
    }
}

impl Section {
    pub fn constant(label: impl Into<String>, field: Vec<f64>) -> Self {
        Section {
            label: label.into(),
            kind: SectionKind::Constant,
            provenance: "constant field".into(),
            n_dofs: field.len(),
            rule: Rule::Fixed(Arc::new(field)),
        }
    }

    pub fn shifted(label: impl Into<String>, transform: Arc<ShiftTransform>, profile: ProfileRule) -> Self {
        Section {
            label: label.into(),
            kind: SectionKind::Transformed,
            provenance: "shifted profile".into(),
            n_dofs: transform.space.n_dofs(),
            rule: Rule::Shift { transform, profile },
        }
    }

    pub fn from_rule(label: impl Into<String>, kind: SectionKind, n_dofs: usize, rule: SectionRule) -> Self {
        Section {
            label: label.into(),
            kind,
            provenance: "user rule".into(),
            n_dofs,
            rule: Rule::Map(rule),
        }
    }

    /// `μ ↦ u_μ` by a discrete solve.
    pub fn solution(sys: &FriedrichsSystem, space: &DGSpace) -> Self {
        let sys = sys.clone();
        let sp = space.clone();
        let mut s = Section::from_rule(
            format!("solution:{}", sys.id),
            SectionKind::Solution,
            space.n_dofs(),
            Arc::new(move |mu| Ok(solve(&sys, &sp, mu)?.u)),
        );
        s.provenance = "discrete solve".into();
        s
    }

    /// Section known only at tabulated parameters.
    pub fn tabulated(label: impl Into<String>, params: Vec<Vec<f64>>, fields: Vec<Vec<f64>>) -> Result<Self> {
        if params.len() != fields.len() || fields.is_empty() {
            return Err(Error::invalid("tabulated section needs one field per parameter"));
        }
        let n = fields[0].len();
        if fields.iter().any(|f| f.len() != n) {
            return Err(Error::invalid("tabulated fields differ in length"));
        }
        let table: Arc<Vec<(Vec<f64>, Vec<f64>)>> = Arc::new(params.into_iter().zip(fields).collect());
        let mut s = Section::from_rule(
            label,
            SectionKind::Solution,
            n,
            Arc::new(move |mu| {
                table
                    .iter()
                    .find(|(p, _)| p.as_slice() == mu)
                    .map(|(_, f)| f.clone())
                    .ok_or_else(|| Error::invalid(format!("parameter {mu:?} is not tabulated")))
            }),
        );
        s.provenance = "tabulated snapshots".into();
        Ok(s)
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.rule, Rule::Fixed(_))
    }

    pub fn evaluate(&self, mu: &[f64]) -> Result<Arc<Vec<f64>>> {
        let v = match &self.rule {
            Rule::Fixed(v) => return Ok(v.clone()),
            Rule::Shift { transform, profile } => transform.apply(profile.as_ref(), mu),
            Rule::Map(f) => f(mu)?,
            Rule::Sum(parts) => {
                let mut acc = vec![0.0; self.n_dofs];
                for p in parts {
                    crate::numerics::vecops::axpy(1.0, &p.evaluate(mu)?, &mut acc);
                }
                acc
            }
        };
        if v.len() != self.n_dofs {
            return Err(Error::DimensionMismatch {
                context: "section evaluation",
                expected: self.n_dofs,
                found: v.len(),
            });
        }
        Ok(Arc::new(v))
    }

    /// Pointwise sum. Constants add their fields; shifts sharing a transform
    /// add their profiles.
    pub fn oplus(&self, other: &Section) -> Result<Section> {
        if self.n_dofs != other.n_dofs {
            return Err(Error::DimensionMismatch {
                context: "section sum",
                expected: self.n_dofs,
                found: other.n_dofs,
            });
        }
        let label = format!("{}+{}", self.label, other.label);
        match (&self.rule, &other.rule) {
            (Rule::Fixed(a), Rule::Fixed(b)) => {
                let mut v = a.as_ref().clone();
                crate::numerics::vecops::axpy(1.0, b, &mut v);
                Ok(Section::constant(label, v))
            }
            (
                Rule::Shift { transform: ta, profile: pa },
                Rule::Shift { transform: tb, profile: pb },
            ) if Arc::ptr_eq(ta, tb) => {
                let (pa, pb) = (pa.clone(), pb.clone());
                Ok(Section::shifted(label, ta.clone(), Arc::new(move |x| pa(x) + pb(x))))
            }
            _ => Ok(Section {
                label,
                kind: SectionKind::Composite,
                provenance: "pointwise sum".into(),
                n_dofs: self.n_dofs,
                rule: Rule::Sum(vec![self.clone(), other.clone()]),
            }),
        }
    }
}

/// Finite family of sections with unique labels. Sections in different
/// dictionaries are identified by label.
#[derive(Clone, Debug)]
pub struct SectionDictionary {
    pub id: String,
    pub sections: Vec<Section>,
}

impl SectionDictionary {
    pub fn new(id: impl Into<String>, sections: Vec<Section>) -> Result<Self> {
        let id = id.into();
        if sections.is_empty() {
            return Err(Error::invalid(format!("dictionary '{id}' is empty")));
        }
        let n = sections[0].n_dofs;
        for (i, s) in sections.iter().enumerate() {
            if s.n_dofs != n {
                return Err(Error::invalid(format!("dictionary '{id}': section '{}' has {} dofs, expected {n}", s.label, s.n_dofs)));
            }
            if sections[..i].iter().any(|t| t.label == s.label) {
                return Err(Error::invalid(format!("dictionary '{id}': duplicate label '{}'", s.label)));
            }
        }
        Ok(SectionDictionary { id, sections })
    }

    pub fn len(&self) -> usize {
        self.sections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sections.is_empty()
    }

    pub fn n_dofs(&self) -> usize {
        self.sections[0].n_dofs
    }

    pub fn labels(&self) -> Vec<&str> {
        self.sections.iter().map(|s| s.label.as_str()).collect()
    }

    /// Every label of `other` is a label here.
    pub fn contains_all(&self, other: &SectionDictionary) -> bool {
        let mine = self.labels();
        other.labels().iter().all(|l| mine.contains(l))
    }

    /// This dictionary extended by the sections of `other` whose labels are
    /// new.
    pub fn union(&self, other: &SectionDictionary, id: impl Into<String>) -> Result<Self> {
        let mut sections = self.sections.clone();
        for s in &other.sections {
            if !sections.iter().any(|t| t.label == s.label) {
                sections.push(s.clone());
            }
        }
        SectionDictionary::new(id, sections)
    }
}

/// Source of constant sections.
#[derive(Clone, Debug)]
pub enum ConstantGenerator {
    /// One section per unit dof vector.
    DofBasis,
    Fields(Vec<Vec<f64>>),
}

/// Largest space for which the dof basis is expanded into sections.
pub const DOF_BASIS_LIMIT: usize = 4096;

pub fn constant_dictionary(
    id: impl Into<String>,
    space: &DGSpace,
    generator: ConstantGenerator,
) -> Result<SectionDictionary> {
    let n = space.n_dofs();
    let fields = match generator {
        ConstantGenerator::DofBasis => {
            if n > DOF_BASIS_LIMIT {
                return Err(Error::invalid(format!(
                    "dof basis dictionary with {n} sections exceeds {DOF_BASIS_LIMIT}"
                )));
            }
            (0..n)
                .map(|i| {
                    let mut e = vec![0.0; n];
                    e[i] = 1.0;
                    e
                })
                .collect()
        }
        ConstantGenerator::Fields(f) => f,
    };
    if fields.is_empty() {
        return Err(Error::invalid("constant dictionary generator produced no fields"));
    }
    let sections = fields
        .into_iter()
        .enumerate()
        .map(|(i, f)| {
            if f.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "constant section field",
                    expected: n,
                    found: f.len(),
                });
            }
            Ok(Section::constant(format!("const-{i}"), f))
        })
        .collect::<Result<Vec<_>>>()?;
    SectionDictionary::new(id, sections)
}

pub fn shift_dictionary(
    id: impl Into<String>,
    transform: Arc<ShiftTransform>,
    profiles: Vec<(String, ProfileRule)>,
) -> Result<SectionDictionary> {
    if profiles.is_empty() {
        return Err(Error::invalid("shift dictionary needs at least one profile"));
    }
    let sections = profiles
        .into_iter()
        .map(|(label, p)| Section::shifted(label, transform.clone(), p))
        .collect();
    SectionDictionary::new(id, sections)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{build_space, StructuredMesh};

    fn periodic(cells: usize, k: usize) -> DGSpace {
        build_space(StructuredMesh::new(vec![cells], &[(0.0, 1.0)], vec![true]).unwrap(), k, 1).unwrap()
    }

    fn gaussian() -> ProfileRule {
        Arc::new(|x| (-(x - 0.5).powi(2) / (2.0 * 0.05f64.powi(2))).exp())
    }

    #[test]
    fn constant_sections_ignore_the_parameter() {
        let s = Section::constant("c", vec![1.0, 2.0]);
        assert_eq!(s.evaluate(&[0.1]).unwrap(), s.evaluate(&[7.0]).unwrap());
        let sum = s.oplus(&Section::constant("d", vec![0.5, 0.5])).unwrap();
        assert!(sum.is_constant());
        assert_eq!(*sum.evaluate(&[3.0]).unwrap(), vec![1.5, 2.5]);
    }

    #[test]
    fn constant_dictionary_from_fields() {
        let space = periodic(4, 0);
        let fields: Vec<Vec<f64>> = (0..3).map(|i| vec![i as f64; 4]).collect();
        let d = constant_dictionary("snap", &space, ConstantGenerator::Fields(fields)).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(constant_dictionary("dof", &space, ConstantGenerator::DofBasis).unwrap().len(), 4);
        assert!(constant_dictionary("e", &space, ConstantGenerator::Fields(vec![])).is_err());
        assert!(constant_dictionary("w", &space, ConstantGenerator::Fields(vec![vec![1.0]])).is_err());
    }

    #[test]
    fn zero_shift_matches_constant_projection() {
        let space = periodic(32, 1);
        let t = ShiftTransform::new(space.clone(), Arc::new(|_| 0.0)).unwrap();
        let g = gaussian();
        let s = Section::shifted("g", t, g.clone());
        let direct = space.project(&|x| vec![g(x[0])], space.order() + 6);
        assert_eq!(*s.evaluate(&[0.3]).unwrap(), direct);
    }

    #[test]
    fn one_cell_shift_is_a_cyclic_permutation() {
        let n = 16;
        let space = periodic(n, 0);
        let h = 1.0 / n as f64;
        let t = ShiftTransform::new(space, Arc::new(move |mu: &[f64]| mu[0] * h)).unwrap();
        let s = Section::shifted("g", t, gaussian());
        let u0 = s.evaluate(&[0.0]).unwrap();
        let u1 = s.evaluate(&[1.0]).unwrap();
        for i in 0..n {
            assert!((u1[(i + 1) % n] - u0[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn shifted_gaussian_keeps_its_norm() {
        let space = periodic(256, 0);
        let m = space.mass_matrix();
        let t = ShiftTransform::new(space, Arc::new(|mu: &[f64]| mu[0])).unwrap();
        let s = Section::shifted("g", t, gaussian());
        let norms: Vec<f64> = (0..20)
            .map(|i| m.quadratic(&s.evaluate(&[i as f64 / 20.0]).unwrap()).sqrt())
            .collect();
        let exact = (0.05 * std::f64::consts::PI.sqrt()).sqrt();
        for nrm in norms {
            assert!((nrm - exact).abs() < 1e-3 * exact);
        }
    }

    #[test]
    fn shift_requires_periodic_1d() {
        let open = build_space(StructuredMesh::uniform(4, &[(0.0, 1.0)]).unwrap(), 0, 1).unwrap();
        assert!(ShiftTransform::new(open, Arc::new(|_| 0.0)).is_err());
    }

    #[test]
    fn shifts_with_common_transform_add_profiles() {
        let space = periodic(32, 1);
        let t = ShiftTransform::new(space, Arc::new(|mu: &[f64]| mu[0])).unwrap();
        let a = Section::shifted("a", t.clone(), gaussian());
        let b = Section::shifted("b", t.clone(), Arc::new(|x: f64| x * (1.0 - x)));
        let ab = a.oplus(&b).unwrap();
        assert_eq!(ab.kind, SectionKind::Transformed);
        let mu = [0.37];
        let lhs = ab.evaluate(&mu).unwrap();
        let (ea, eb) = (a.evaluate(&mu).unwrap(), b.evaluate(&mu).unwrap());
        for i in 0..lhs.len() {
            assert!((lhs[i] - ea[i] - eb[i]).abs() < 1e-13);
        }
        let mixed = a.oplus(&Section::constant("c", vec![1.0; 64])).unwrap();
        assert_eq!(mixed.kind, SectionKind::Composite);
        assert!((mixed.evaluate(&mu).unwrap()[5] - ea[5] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tabulated_lookup() {
        let s = Section::tabulated("t", vec![vec![1.0], vec![2.0]], vec![vec![1.0], vec![4.0]]).unwrap();
        assert_eq!(*s.evaluate(&[2.0]).unwrap(), vec![4.0]);
        assert!(s.evaluate(&[3.0]).is_err());
    }

    #[test]
    fn dictionary_labels_are_unique() {
        let a = Section::constant("x", vec![1.0]);
        assert!(SectionDictionary::new("d", vec![a.clone(), a.clone()]).is_err());
        let d1 = SectionDictionary::new("d1", vec![a.clone()]).unwrap();
        let d2 = d1.union(&SectionDictionary::new("o", vec![Section::constant("y", vec![2.0])]).unwrap(), "d2").unwrap();
        assert!(d2.contains_all(&d1) && !d1.contains_all(&d2));
    }
}
