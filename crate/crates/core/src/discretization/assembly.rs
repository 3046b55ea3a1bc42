use rayon::prelude::*;

use super::quadrature::{gauss_legendre, tensor_rule};
use super::DGSpace;
use crate::error::{Error, Result};
use crate::numerics::{sparse_solve, sym_eig, vecops, DenseMatrix, SparseMatrix, TripletBuilder};
use crate::system::{
    adjoint_coefficients, BoundaryOperatorSpec, CoefficientField, FriedrichsSystem,
    ParamScalarRule, Smoothness, VectorRule,
};

/// The pieces of a first-order operator that assembly needs. Missing parts
/// are zero.
#[derive(Clone, Copy)]
pub(crate) struct OperatorParts<'a> {
    pub a0: Option<&'a CoefficientField>,
    pub a: Option<&'a [CoefficientField]>,
    pub boundary: &'a BoundaryOperatorSpec,
    pub smoothness: Smoothness,
}

impl<'a> OperatorParts<'a> {
    pub fn of(sys: &'a FriedrichsSystem) -> Self {
        Self {
            a0: Some(&sys.a0),
            a: Some(&sys.a),
            boundary: &sys.boundary,
            smoothness: sys.smoothness(),
        }
    }
}

/// Gauss points per axis: exact for degree `2k+2` integrands, one more for
/// general coefficients.
pub(crate) fn points_per_axis(k: usize, smoothness: Smoothness) -> usize {
    match smoothness {
        Smoothness::General => k + 3,
        _ => k + 2,
    }
}

struct VolumeTables {
    pts: Vec<Vec<f64>>,
    wts: Vec<f64>,
    phi: Vec<Vec<f64>>,
    /// `dphi[q][b][i]` in physical coordinates.
    dphi: Vec<Vec<Vec<f64>>>,
}

impl VolumeTables {
    fn new(space: &DGSpace, nq: usize) -> Self {
        let (pts, wts) = tensor_rule(space.d(), nq);
        let jac = space.jacobian();
        let scale: Vec<f64> = (0..space.d()).map(|i| 2.0 / space.mesh().h(i)).collect();
        let phi = pts
            .iter()
            .map(|xi| (0..space.nb()).map(|b| space.basis_value(b, xi)).collect())
            .collect();
        let dphi = pts
            .iter()
            .map(|xi| {
                (0..space.nb())
                    .map(|b| {
                        space
                            .basis_grad_ref(b, xi)
                            .iter()
                            .zip(&scale)
                            .map(|(g, s)| g * s)
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            pts,
            wts: wts.iter().map(|w| w * jac).collect(),
            phi,
            dphi,
        }
    }
}

/// Reference points on the face `ξ_axis = side` with physical weights.
struct FaceTables {
    pts: Vec<Vec<f64>>,
    wts: Vec<f64>,
    phi: Vec<Vec<f64>>,
}

impl FaceTables {
    fn new(space: &DGSpace, nq: usize, axis: usize, side: f64) -> Self {
        let d = space.d();
        let (pts, wts) = if d == 1 {
            (vec![vec![side]], vec![1.0])
        } else {
            let (x, w) = gauss_legendre(nq);
            let other = 1 - axis;
            let h = space.mesh().h(other);
            let pts = x
                .iter()
                .map(|&t| {
                    let mut p = vec![0.0; 2];
                    p[axis] = side;
                    p[other] = t;
                    p
                })
                .collect();
            (pts, w.iter().map(|wi| wi * 0.5 * h).collect())
        };
        let phi = pts
            .iter()
            .map(|xi: &Vec<f64>| (0..space.nb()).map(|b| space.basis_value(b, xi)).collect())
            .collect();
        Self { pts, wts, phi }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum VolumeKind {
    /// `(A u, v)_T`
    Operator,
    /// `(A u, A v)_T`
    Graph,
}

/// `Φ[r][(s,b)] = (A φ_{s,b})_r` at one quadrature point.
fn apply_to_basis(
    m: usize,
    nb: usize,
    a0: Option<&DenseMatrix>,
    ai: &[DenseMatrix],
    phi: &[f64],
    dphi: &[Vec<f64>],
) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(m, m * nb);
    for s in 0..m {
        for b in 0..nb {
            let col = s * nb + b;
            for r in 0..m {
                let mut v = 0.0;
                if let Some(a0) = a0 {
                    v += a0[(r, s)] * phi[b];
                }
                for (i, a) in ai.iter().enumerate() {
                    v += a[(r, s)] * dphi[b][i];
                }
                out[(r, col)] = v;
            }
        }
    }
    out
}

fn volume_matrix(
    space: &DGSpace,
    parts: OperatorParts<'_>,
    mu: &[f64],
    kind: VolumeKind,
) -> SparseMatrix {
    let nq = points_per_axis(space.order(), parts.smoothness);
    let tab = VolumeTables::new(space, nq);
    let (m, nb, bs) = (space.m(), space.nb(), space.block());
    let blocks: Vec<DenseMatrix> = (0..space.mesh().n_cells())
        .into_par_iter()
        .map(|c| {
            let mut local = DenseMatrix::zeros(bs, bs);
            for (q, xi) in tab.pts.iter().enumerate() {
                let x = space.mesh().map_to_physical(c, xi);
                let a0 = parts.a0.map(|f| f.eval(mu, &x));
                let ai: Vec<DenseMatrix> = parts
                    .a
                    .map(|a| a.iter().map(|f| f.eval(mu, &x)).collect())
                    .unwrap_or_default();
                let phi_mat = apply_to_basis(m, nb, a0.as_ref(), &ai, &tab.phi[q], &tab.dphi[q]);
                let w = tab.wts[q];
                match kind {
                    VolumeKind::Operator => {
                        for r in 0..m {
                            for a in 0..nb {
                                let row = r * nb + a;
                                let wa = w * tab.phi[q][a];
                                if wa == 0.0 {
                                    continue;
                                }
                                for col in 0..bs {
                                    local[(row, col)] += wa * phi_mat[(r, col)];
                                }
                            }
                        }
                    }
                    VolumeKind::Graph => {
                        for i in 0..bs {
                            for j in 0..bs {
                                let mut s = 0.0;
                                for r in 0..m {
                                    s += phi_mat[(r, i)] * phi_mat[(r, j)];
                                }
                                local[(i, j)] += w * s;
                            }
                        }
                    }
                }
            }
            local
        })
        .collect();
    let mut tb = TripletBuilder::with_capacity(space.n_dofs(), space.n_dofs(), blocks.len() * bs * bs);
    for (c, blk) in blocks.iter().enumerate() {
        tb.push_block(c * bs, c * bs, blk);
    }
    tb.finalize()
}

/// Adds `w · coef[r][s] · φ^v_a φ^u_b` for all `(r, a)`, `(s, b)`.
#[allow(clippy::too_many_arguments)]
fn push_face_block(
    tb: &mut TripletBuilder,
    space: &DGSpace,
    row_cell: usize,
    col_cell: usize,
    coef: &DenseMatrix,
    w: f64,
    phi_v: &[f64],
    phi_u: &[f64],
) {
    let (m, nb) = (space.m(), space.nb());
    for r in 0..m {
        for s in 0..m {
            let c = coef[(r, s)];
            if c == 0.0 {
                continue;
            }
            for a in 0..nb {
                for b in 0..nb {
                    tb.push(
                        space.dof(row_cell, r, a),
                        space.dof(col_cell, s, b),
                        w * c * phi_v[a] * phi_u[b],
                    );
                }
            }
        }
    }
}

/// Interior upwind flux `−(D[[u]], {{v}}) + ½(|D| [[u]], [[v]])` with
/// `[[u]] = u⁻ − u⁺` and the normal pointing from `−` to `+`.
fn interior_flux(
    space: &DGSpace,
    parts: OperatorParts<'_>,
    mu: &[f64],
    tb: &mut TripletBuilder,
) -> Result<()> {
    let Some(a) = parts.a else {
        return Ok(());
    };
    let nq = points_per_axis(space.order(), parts.smoothness);
    let d = space.d();
    let tabs: Vec<(FaceTables, FaceTables)> = (0..d)
        .map(|axis| {
            (
                FaceTables::new(space, nq, axis, 1.0),
                FaceTables::new(space, nq, axis, -1.0),
            )
        })
        .collect();
    let faces = space.mesh().interior_faces();
    let contributions: Vec<Result<Vec<(f64, DenseMatrix, DenseMatrix, usize)>>> = faces
        .par_iter()
        .map(|f| {
            let (minus_tab, _) = &tabs[f.axis];
            let mut out = Vec::with_capacity(minus_tab.pts.len());
            for (q, xi) in minus_tab.pts.iter().enumerate() {
                let x = space.mesh().map_to_physical(f.minus, xi);
                let dmat = a[f.axis].eval(mu, &x);
                let abs = sym_eig(&dmat.symmetric_part())?.abs_matrix();
                out.push((minus_tab.wts[q], dmat, abs, q));
            }
            Ok(out)
        })
        .collect();
    for (f, contrib) in faces.iter().zip(contributions) {
        let (minus_tab, plus_tab) = &tabs[f.axis];
        for (w, dmat, abs, q) in contrib? {
            let cells = [f.minus, f.plus];
            let phis = [&minus_tab.phi[q], &plus_tab.phi[q]];
            let sgn = [1.0, -1.0];
            for s in 0..2 {
                for t in 0..2 {
                    let coef = dmat
                        .scaled(-0.5 * sgn[t])
                        .add(&abs.scaled(0.5 * sgn[s] * sgn[t]))?;
                    push_face_block(tb, space, cells[s], cells[t], &coef, w, phis[s], phis[t]);
                }
            }
        }
    }
    Ok(())
}

/// Boundary face data: `(cell, weight, phi, D̲, M)` per face quadrature point.
type BoundarySample = (usize, f64, Vec<f64>, DenseMatrix, DenseMatrix);

fn boundary_samples(
    space: &DGSpace,
    parts: OperatorParts<'_>,
    mu: &[f64],
) -> Result<Vec<BoundarySample>> {
    let nq = points_per_axis(space.order(), parts.smoothness);
    let d = space.d();
    let m = space.m();
    let mut out = Vec::new();
    for f in space.mesh().boundary_faces() {
        let side = if f.upper { 1.0 } else { -1.0 };
        let tab = FaceTables::new(space, nq, f.axis, side);
        let n = f.normal(d);
        for (q, xi) in tab.pts.iter().enumerate() {
            let x = space.mesh().map_to_physical(f.cell, xi);
            let dmat = match parts.a {
                Some(a) => a[f.axis].eval(mu, &x).scaled(side),
                None => DenseMatrix::zeros(m, m),
            };
            let mmat = parts.boundary.eval(mu, &x, &n, &dmat);
            if !mmat.is_finite() {
                return Err(Error::NonFinite(format!("boundary operator at mu = {mu:?}, x = {x:?}")));
            }
            out.push((f.cell, tab.wts[q], tab.phi[q].clone(), dmat, mmat));
        }
    }
    Ok(out)
}

fn boundary_penalty(
    space: &DGSpace,
    parts: OperatorParts<'_>,
    mu: &[f64],
    tb: &mut TripletBuilder,
) -> Result<()> {
    if parts.a.is_none() {
        return Ok(());
    }
    for (cell, w, phi, dmat, mmat) in boundary_samples(space, parts, mu)? {
        let coef = mmat.sub(&dmat)?.scaled(0.5);
        push_face_block(tb, space, cell, cell, &coef, w, &phi, &phi);
    }
    Ok(())
}

pub(crate) fn operator_from_parts(
    space: &DGSpace,
    parts: OperatorParts<'_>,
    mu: &[f64],
) -> Result<SparseMatrix> {
    let vol = volume_matrix(space, parts, mu, VolumeKind::Operator);
    let mut tb = TripletBuilder::new(space.n_dofs(), space.n_dofs());
    for (i, j, v) in vol.triplets() {
        tb.push(i, j, v);
    }
    interior_flux(space, parts, mu, &mut tb)?;
    boundary_penalty(space, parts, mu, &mut tb)?;
    let out = tb.finalize();
    if !out.is_finite() {
        return Err(Error::NonFinite(format!("operator matrix at mu = {mu:?}")));
    }
    Ok(out)
}

fn rhs_from_rule(space: &DGSpace, rule: &VectorRule, mu: &[f64], smoothness: Smoothness) -> Vec<f64> {
    let nq = points_per_axis(space.order(), smoothness);
    let tab = VolumeTables::new(space, nq);
    let (m, nb) = (space.m(), space.nb());
    let per_cell: Vec<Vec<f64>> = (0..space.mesh().n_cells())
        .into_par_iter()
        .map(|c| {
            let mut local = vec![0.0; m * nb];
            for (q, xi) in tab.pts.iter().enumerate() {
                let x = space.mesh().map_to_physical(c, xi);
                let f = rule(mu, &x);
                for r in 0..m {
                    for b in 0..nb {
                        local[r * nb + b] += tab.wts[q] * f[r] * tab.phi[q][b];
                    }
                }
            }
            local
        })
        .collect();
    per_cell.concat()
}

pub(crate) fn check_inputs(sys: &FriedrichsSystem, space: &DGSpace, mu: &[f64]) -> Result<()> {
    check_shape(sys, space, mu)?;
    if !(sys.declared_epsilon > 0.0) {
        return Err(Error::Validation(format!(
            "system '{}' has epsilon {} <= 0 (FS2)",
            sys.id, sys.declared_epsilon
        )));
    }
    Ok(())
}

pub(crate) fn check_shape(sys: &FriedrichsSystem, space: &DGSpace, mu: &[f64]) -> Result<()> {
    if space.m() != sys.m || space.d() != sys.d {
        return Err(Error::invalid(format!(
            "space (d = {}, m = {}) does not fit system '{}' (d = {}, m = {})",
            space.d(),
            space.m(),
            sys.id,
            sys.d,
            sys.m
        )));
    }
    for ((a, b), (c, e)) in space.mesh().domain().iter().zip(&sys.domain) {
        if (a - c).abs() > 1e-12 || (b - e).abs() > 1e-12 {
            return Err(Error::invalid("mesh box differs from the system's domain"));
        }
    }
    sys.params.check_point(mu)

}

/// Upwind DG matrix `B_μ`.
pub fn assemble_operator(sys: &FriedrichsSystem, space: &DGSpace, mu: &[f64]) -> Result<SparseMatrix> {
    check_inputs(sys, space, mu)?;
    operator_from_parts(space, OperatorParts::of(sys), mu)
}

/// Load vector `F_μ = (f_μ, φ)`.
pub fn assemble_rhs(sys: &FriedrichsSystem, space: &DGSpace, mu: &[f64]) -> Result<Vec<f64>> {
    check_inputs(sys, space, mu)?;
    let f = rhs_from_rule(space, &sys.rhs, mu, sys.smoothness());
    if !vecops::all_finite(&f) {
        return Err(Error::NonFinite(format!("right-hand side at mu = {mu:?}")));
    }
    Ok(f)
}

/// Broken operator `A_h`: `(A_h)_{ij} = (A φ_j, φ_i)` summed over cells.
pub fn volume_operator(sys: &FriedrichsSystem, space: &DGSpace, mu: &[f64]) -> Result<SparseMatrix> {
    check_shape(sys, space, mu)?;
    Ok(volume_matrix(space, OperatorParts::of(sys), mu, VolumeKind::Operator))
}

/// Broken graph-norm Gram `G_μ = M + K_μ`, `(K_μ)_{ij} = Σ_T (A φ_i, A φ_j)_T`.
pub fn graph_gram(sys: &FriedrichsSystem, space: &DGSpace, mu: &[f64]) -> Result<SparseMatrix> {
    check_shape(sys, space, mu)?;
    let k = volume_matrix(space, OperatorParts::of(sys), mu, VolumeKind::Graph);
    k.linear_combination(1.0, &space.mass_matrix(), 1.0)
}

/// Graph Gram of the formal adjoint.
pub fn adjoint_graph_gram(sys: &FriedrichsSystem, space: &DGSpace, mu: &[f64]) -> Result<SparseMatrix> {
    check_shape(sys, space, mu)?;
    let adj = adjoint_coefficients(sys);
    let k = volume_matrix(space, OperatorParts::of(&adj), mu, VolumeKind::Graph);
    k.linear_combination(1.0, &space.mass_matrix(), 1.0)
}

/// Parameter-independent Gram `G₀ = M + K₀` with
/// `(K₀)_{ij} = Σ_T (Σᵢ Ã^i ∂ᵢφ_i, Σᵢ Ã^i ∂ᵢφ_j)_T`.
pub fn reference_gram(sys: &FriedrichsSystem, space: &DGSpace) -> Result<SparseMatrix> {
    let n1 = sys.n1.as_ref().ok_or_else(|| {
        Error::Unsupported(format!("system '{}' has no N1 structure; G0 is undefined", sys.id))
    })?;
    let mu = sys.params.center();
    check_shape(sys, space, &mu)?;
    let smooth = n1
        .a_tilde
        .iter()
        .map(|f| f.smoothness())
        .max()
        .unwrap_or(Smoothness::Constant);
    let parts = OperatorParts {
        a0: None,
        a: Some(&n1.a_tilde),
        boundary: &sys.boundary,
        smoothness: smooth,
    };
    let k = volume_matrix(space, parts, &mu, VolumeKind::Graph);
    k.linear_combination(1.0, &space.mass_matrix(), 1.0)
}

/// Boundary matrices `(D_h)_{ij} = ∫_{∂Ω} D̲ φ_j·φ_i` and the same for `M`.
pub fn boundary_matrices(
    sys: &FriedrichsSystem,
    space: &DGSpace,
    mu: &[f64],
) -> Result<(SparseMatrix, SparseMatrix)> {
    check_shape(sys, space, mu)?;
    let n = space.n_dofs();
    let mut db = TripletBuilder::new(n, n);
    let mut mb = TripletBuilder::new(n, n);
    for (cell, w, phi, dmat, mmat) in boundary_samples(space, OperatorParts::of(sys), mu)? {
        push_face_block(&mut db, space, cell, cell, &dmat, w, &phi, &phi);
        push_face_block(&mut mb, space, cell, cell, &mmat, w, &phi, &phi);
    }
    Ok((db.finalize(), mb.finalize()))
}

/// Everything assembled at one parameter.
#[derive(Clone, Debug)]
pub struct AssembledProblem {
    pub mu: Vec<f64>,
    pub system: SparseMatrix,
    pub rhs: Vec<f64>,
    pub mass: SparseMatrix,
    pub gram: SparseMatrix,
    pub adjoint_gram: SparseMatrix,
    pub operator: SparseMatrix,
    pub adjoint_operator: SparseMatrix,
    pub boundary_d: SparseMatrix,
    pub boundary_m: SparseMatrix,
    pub declared_epsilon: f64,
}

pub fn assemble(sys: &FriedrichsSystem, space: &DGSpace, mu: &[f64]) -> Result<AssembledProblem> {
    check_inputs(sys, space, mu)?;
    let adj = adjoint_coefficients(sys);
    let (boundary_d, boundary_m) = boundary_matrices(sys, space, mu)?;
    Ok(AssembledProblem {
        mu: mu.to_vec(),
        system: assemble_operator(sys, space, mu)?,
        rhs: assemble_rhs(sys, space, mu)?,
        mass: space.mass_matrix(),
        gram: graph_gram(sys, space, mu)?,
        adjoint_gram: adjoint_graph_gram(sys, space, mu)?,
        operator: volume_operator(sys, space, mu)?,
        adjoint_operator: volume_matrix(space, OperatorParts::of(&adj), mu, VolumeKind::Operator),
        boundary_d,
        boundary_m,
        declared_epsilon: sys.declared_epsilon,
    })
}

/// Discrete integration-by-parts defect
/// `|(A_h u, v) − (u, A*_h v) − vᵀ D_h u| / (‖u‖_G ‖v‖_G)`.
pub fn ibp_residual(
    sys: &FriedrichsSystem,
    space: &DGSpace,
    mu: &[f64],
    u: &[f64],
    v: &[f64],
) -> Result<f64> {
    let ap = assemble(sys, space, mu)?;
    ibp_residual_assembled(&ap, u, v)
}

pub fn ibp_residual_assembled(ap: &AssembledProblem, u: &[f64], v: &[f64]) -> Result<f64> {
    let n = ap.mass.rows();
    for w in [u, v] {
        if w.len() != n {
            return Err(Error::DimensionMismatch {
                context: "ibp_residual field",
                expected: n,
                found: w.len(),
            });
        }
    }
    let lhs = ap.operator.bilinear(v, u);
    let rhs = ap.adjoint_operator.bilinear(u, v);
    let bnd = ap.boundary_d.bilinear(v, u);
    let nu = ap.gram.quadratic(u).max(0.0).sqrt();
    let nv = ap.gram.quadratic(v).max(0.0).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::invalid("ibp_residual needs nonzero fields"));
    }
    Ok((lhs - rhs - bnd).abs() / (nu * nv))
}

/// Discrete solution with its relative residual `‖B u − F‖ / ‖F‖`.
#[derive(Clone, Debug)]
pub struct Solution {
    pub u: Vec<f64>,
    pub residual: f64,
}

pub fn solve(sys: &FriedrichsSystem, space: &DGSpace, mu: &[f64]) -> Result<Solution> {
    if !sys.solve_supported {
        return Err(Error::Unsupported(format!("solving '{}' is not supported", sys.id)));
    }
    let b = assemble_operator(sys, space, mu)?;
    let f = assemble_rhs(sys, space, mu)?;
    solve_assembled(&b, &f).map_err(|e| Error::SolveFailed {
        mu: mu.to_vec(),
        source: Box::new(e),
    })
}

pub(crate) fn solve_assembled(b: &SparseMatrix, f: &[f64]) -> Result<Solution> {
    let u = sparse_solve(b, f)?;
    let r = b.matvec(&u)?;
    let fnorm = vecops::norm2(f);
    let res = vecops::norm2(&vecops::sub(&r, f));
    let residual = if fnorm > 0.0 { res / fnorm } else { res };
    Ok(Solution { u, residual })
}

/// `B_μ = Σ_q θ_q(μ) B_q`, `F_μ = Σ_q θ_q(μ) F_q` from a separable expansion.
#[derive(Clone)]
pub struct AffineDecomposition {
    pub labels: Vec<String>,
    thetas: Vec<ParamScalarRule>,
    pub matrices: Vec<SparseMatrix>,
    rhs_thetas: Vec<ParamScalarRule>,
    pub vectors: Vec<Vec<f64>>,
}

impl std::fmt::Debug for AffineDecomposition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AffineDecomposition")
            .field("labels", &self.labels)
            .finish_non_exhaustive()
    }
}

impl AffineDecomposition {
    pub fn evaluate(&self, mu: &[f64]) -> Result<(SparseMatrix, Vec<f64>)> {
        let n = self.vectors.first().map_or_else(
            || self.matrices.first().map_or(0, |m| m.rows()),
            |v| v.len(),
        );
        let mut b = SparseMatrix::zeros(n, n);
        for (th, m) in self.thetas.iter().zip(&self.matrices) {
            b = b.linear_combination(1.0, m, th(mu))?;
        }
        let mut f = vec![0.0; n];
        for (th, v) in self.rhs_thetas.iter().zip(&self.vectors) {
            vecops::axpy(th(mu), v, &mut f);
        }
        Ok((b, f))
    }
}

/// Precomputes one matrix per operator term. Terms carrying first-order
/// parts get the face and boundary contributions, which assumes their `θ`
/// is positive.
pub fn assemble_affine(sys: &FriedrichsSystem, space: &DGSpace) -> Result<AffineDecomposition> {
    let exp = sys.expansion.as_ref().ok_or_else(|| {
        Error::Unsupported(format!("system '{}' declares no separable expansion", sys.id))
    })?;
    let mu_ref = sys.params.center();
    check_inputs(sys, space, &mu_ref)?;
    let mut out = AffineDecomposition {
        labels: Vec::new(),
        thetas: Vec::new(),
        matrices: Vec::new(),
        rhs_thetas: Vec::new(),
        vectors: Vec::new(),
    };
    for term in &exp.terms {
        if term.is_operator() {
            let mut smooth = Smoothness::Constant;
            if let Some(z) = &term.zeroth {
                smooth = smooth.max(z.smoothness());
            }
            if let Some(fo) = &term.first_order {
                for f in fo {
                    smooth = smooth.max(f.smoothness());
                }
            }
            let parts = OperatorParts {
                a0: term.zeroth.as_ref(),
                a: term.first_order.as_deref(),
                boundary: &sys.boundary,
                smoothness: smooth,
            };
            out.labels.push(term.label.clone());
            out.thetas.push(term.theta.clone());
            out.matrices.push(operator_from_parts(space, parts, &mu_ref)?);
        }
        if let Some(r) = &term.rhs {
            out.rhs_thetas.push(term.theta.clone());
            out.vectors.push(rhs_from_rule(space, r, &mu_ref, sys.smoothness()));
        }
    }
    Ok(out)
}
