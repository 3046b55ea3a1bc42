//! Structured meshes, DG(k) spaces and upwind assembly.
//!
//! The discrete bilinear form is
//!
//! ```text
//! Σ_T (A u, v)_T − Σ_F (D̲_F [[u]], {{v}})_F + ½ Σ_F (|D̲_F| [[u]], [[v]])_F
//!     + ½ ((M − D̲) u, v)_{∂Ω}
//! ```
//!
//! with `|D̲_F|` the spectral absolute value of the face matrix.

mod assembly;
mod mesh;
pub mod quadrature;
mod space;

pub use assembly::{
    adjoint_graph_gram, assemble, assemble_affine, assemble_operator, assemble_rhs,
    boundary_matrices, graph_gram, ibp_residual, ibp_residual_assembled, reference_gram, solve,
    volume_operator, AffineDecomposition, AssembledProblem, Solution,
};
pub(crate) use assembly::{check_shape, solve_assembled};
pub use mesh::{BoundaryFace, InteriorFace, StructuredMesh};
pub use space::{build_space, DGSpace};

use crate::error::Result;
use crate::system::FriedrichsSystem;

/// DG space on a uniform non-periodic mesh of the system's domain.
pub fn space_for(sys: &FriedrichsSystem, cells: usize, k: usize) -> Result<DGSpace> {
    let mesh = StructuredMesh::uniform(cells, &sys.domain)?;
    build_space(mesh, k, sys.m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{cholesky, DenseMatrix};
    use crate::system::{registry_get, registry_ids};
    use serde_json::{json, Value};

    #[test]
    fn one_dimensional_upwind_stencil() {
        let sys = registry_get("advection-reaction-1d", &json!({"c": 1.0})).unwrap();
        let space = space_for(&sys, 3, 0).unwrap();
        let b = assemble_operator(&sys, &space, &[1.0]).unwrap().to_dense();
        let h = 1.0 / 3.0;
        let expect = DenseMatrix::from_rows(&[
            &[1.0 + h, 0.0, 0.0],
            &[-1.0, 1.0 + h, 0.0],
            &[0.0, -1.0, 1.0 + h],
        ]);
        assert!(b.sub(&expect).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn no_transport_gives_reaction_mass() {
        let sys = registry_get("advection-reaction-2d-case1", &json!({"b": [0.0, 0.0], "c": 2.0})).unwrap();
        let space = space_for(&sys, 3, 1).unwrap();
        let b = assemble_operator(&sys, &space, &[2.0]).unwrap();
        let m = space.mass_matrix().scaled(2.0);
        assert!(b.linear_combination(1.0, &m, -1.0).unwrap().max_abs() < 1e-15);
        assert!(b.is_symmetric(1e-15));
        // A u = 2u ⇒ G = M + 4M
        let g = graph_gram(&sys, &space, &[2.0]).unwrap();
        let five_m = space.mass_matrix().scaled(5.0);
        assert!(g.linear_combination(1.0, &five_m, -1.0).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn rejects_nonpositive_epsilon() {
        let sys = registry_get("advection-reaction-1d", &json!({"c": 0.0})).unwrap();
        let space = space_for(&sys, 4, 0).unwrap();
        assert!(matches!(
            assemble_operator(&sys, &space, &[0.0]),
            Err(crate::Error::Validation(_))
        ));
    }

    #[test]
    fn rejects_parameter_outside_box() {
        let sys = registry_get("advection-reaction-1d", &Value::Null).unwrap();
        let space = space_for(&sys, 4, 0).unwrap();
        assert!(assemble_operator(&sys, &space, &[0.5]).is_err());
    }

    #[test]
    fn graph_norm_of_constant_and_sine() {
        // A = d/dx
        let sys = registry_get("advection-reaction-1d", &json!({"c": 0.0})).unwrap();
        let space = space_for(&sys, 8, 1).unwrap();
        let one = space.project(&|_| vec![1.0], 3);
        let g = graph_gram(&sys, &space, &[0.0]).unwrap();
        assert!((g.quadratic(&one) - 1.0).abs() < 1e-14);

        let space = space_for(&sys, 256, 1).unwrap();
        let pi = std::f64::consts::PI;
        let u = space.project(&|x| vec![(pi * x[0]).sin()], 4);
        let g = graph_gram(&sys, &space, &[0.0]).unwrap();
        let exact = 0.5 * (1.0 + pi * pi);
        assert!((g.quadratic(&u) - exact).abs() / exact < 1e-3);
    }

    #[test]
    fn grams_are_spd() {
        for id in registry_ids() {
            let sys = registry_get(&id, &Value::Null).unwrap();
            let cells = if sys.d == 1 { 6 } else { 3 };
            let space = space_for(&sys, cells, 1).unwrap();
            let mu = sys.params.center();
            let g = graph_gram(&sys, &space, &mu).unwrap();
            assert!(g.is_symmetric(1e-13), "{id}");
            cholesky(&g.to_dense()).unwrap();
            cholesky(&adjoint_graph_gram(&sys, &space, &mu).unwrap().to_dense()).unwrap();
        }
    }

    #[test]
    fn affine_assembly_matches_direct() {
        for id in registry_ids() {
            let sys = registry_get(&id, &Value::Null).unwrap();
            if sys.expansion.is_none() {
                continue;
            }
            let cells = if sys.d == 1 { 5 } else { 3 };
            let space = space_for(&sys, cells, 1).unwrap();
            let affine = assemble_affine(&sys, &space).unwrap();
            for mu in sys.params.uniform_samples(4) {
                let (b, f) = affine.evaluate(&mu).unwrap();
                let direct = assemble_operator(&sys, &space, &mu).unwrap();
                let diff = b.linear_combination(1.0, &direct, -1.0).unwrap().max_abs();
                assert!(diff <= 1e-12 * direct.max_abs(), "{id}: {diff}");
                let fd = assemble_rhs(&sys, &space, &mu).unwrap();
                for (a, c) in f.iter().zip(&fd) {
                    assert!((a - c).abs() <= 1e-12 * (1.0 + c.abs()));
                }
            }
        }
    }

    #[test]
    fn continuous_fields_have_no_jump_contribution() {
        let sys = registry_get("advection-reaction-2d-case1", &Value::Null).unwrap();
        let space = space_for(&sys, 4, 1).unwrap();
        let mu = [3.0];
        let nodal: Vec<f64> = (0..space.n_vertices())
            .map(|i| ((i * 37 % 11) as f64) / 11.0)
            .collect();
        let u = space.continuous_field(&nodal).unwrap();
        let ap = assemble(&sys, &space, &mu).unwrap();
        // B u = A_h u + ½(M − D) u on the boundary only
        let bu = ap.system.matvec(&u).unwrap();
        let au = ap.operator.matvec(&u).unwrap();
        let mu_u = ap.boundary_m.matvec(&u).unwrap();
        let du = ap.boundary_d.matvec(&u).unwrap();
        for i in 0..u.len() {
            let expect = au[i] + 0.5 * (mu_u[i] - du[i]);
            assert!((bu[i] - expect).abs() < 1e-13, "dof {i}");
        }
    }

    #[test]
    fn solves_cdr() {
        let sys = registry_get("cdr-1d", &Value::Null).unwrap();
        let space = space_for(&sys, 32, 1).unwrap();
        let s = solve(&sys, &space, &[1.0, 2.0]).unwrap();
        assert!(s.residual < 1e-10);
        let el = registry_get("elasticity-2d", &Value::Null).unwrap();
        let space = space_for(&el, 2, 0).unwrap();
        assert!(matches!(solve(&el, &space, &[2.0, 2.0]), Err(crate::Error::Unsupported(_))));
    }
}
