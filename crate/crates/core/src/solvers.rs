//! Newton's method for nonlinear variational equations.

use serde::{Deserialize, Serialize};

use crate::assembly::{apply_bc, assemble_matrix, assemble_vector, BcMode, DirichletBC};
use crate::error::{Error, Result};
use crate::forms::{gateaux_derivative, Bindings, Coefficient, FormExpr};
use crate::linalg::{norm2, BandedLu};

pub use crate::linalg::solve_linear;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonParams {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonParams {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_iter: 30,
        }
    }
}

impl NewtonParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidParams("Newton tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParams("Newton max_iter must be at least 1".into()));
        }
        Ok(())
    }

    /// Tighter tolerances, for runs whose outputs are differenced.
    pub fn strict() -> Self {
        Self {
            rel_tol: 1e-14,
            abs_tol: 1e-15,
            max_iter: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    /// Number of Newton updates applied.
    pub iterations: usize,
    /// `||F||_2` after each update, starting with the initial residual.
    pub residual_history: Vec<f64>,
}

impl NewtonReport {
    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().unwrap()
    }
}

fn zero_rows(v: &mut [f64], dofs: &[usize]) {
    for &d in dofs {
        v[d] = 0.0;
    }
}

/// Solve `residual(unknown; context) = 0` for `unknown`, starting from
/// `initial`.
///
/// Conditions in `bcs` are imposed on the initial guess and kept fixed by
/// homogenised updates; residual rows at constrained dofs are ignored.
/// Converges when `||F|| <= abs_tol` or `||F|| <= rel_tol * ||F_0||`. An
/// iterate whose update is at rounding level and no longer reduces the
/// residual is also accepted.
pub fn newton_solve(
    residual: &FormExpr,
    unknown: &Coefficient,
    initial: &[f64],
    context: &Bindings,
    bcs: &[DirichletBC],
    params: &NewtonParams,
) -> Result<(Vec<f64>, NewtonReport)> {
    params.validate()?;
    let space = unknown.space();
    if initial.len() != space.dof_count() {
        return Err(Error::DimensionMismatch {
            expected: space.dof_count(),
            got: initial.len(),
            context: "Newton initial guess",
        });
    }
    if residual.arity()? != 1 {
        return Err(Error::Arity("Newton residual must be a linear form".into()));
    }
    if let (Some(test), _) = residual.argument_spaces() {
        if &test != space {
            return Err(Error::SpaceMismatch(format!(
                "residual is tested in {test} but the unknown lives in {space}"
            )));
        }
    }
    for bc in bcs {
        if bc.space() != space {
            return Err(Error::InvalidBc("boundary condition space differs from the unknown".into()));
        }
    }
    let jacobian = gateaux_derivative(residual, unknown, &FormExpr::trial(space))?;
    let constrained = crate::assembly::constrained_dofs(bcs);

    let mut u = initial.to_vec();
    for bc in bcs {
        for (d, v) in bc.dof_values() {
            u[d] = v;
        }
    }

    let eval_residual = |u: &[f64]| -> Result<Vec<f64>> {
        let mut b = context.clone();
        b.bind(unknown, u)?;
        let mut f = assemble_vector(residual, space, &b)?;
        zero_rows(&mut f, &constrained);
        Ok(f)
    };

    let mut f = eval_residual(&u)?;
    let f0 = norm2(&f);
    let mut history = vec![f0];
    let mut iterations = 0;
    loop {
        let fnorm = *history.last().unwrap();
        if !fnorm.is_finite() {
            return Err(Error::NonConvergence {
                iterations,
                residual: fnorm,
            });
        }
        if fnorm <= params.abs_tol || fnorm <= params.rel_tol * f0 {
            break;
        }
        if iterations == params.max_iter {
            return Err(Error::NonConvergence {
                iterations,
                residual: fnorm,
            });
        }
        let mut b = context.clone();
        b.bind(unknown, &u)?;
        let mut j = assemble_matrix(&jacobian, space, space, &b)?;
        let mut rhs = f.clone();
        for bc in bcs {
            (j, rhs) = apply_bc(&j, &rhs, bc, BcMode::Homogenised)?;
        }
        let delta = BandedLu::factor(&j)?.solve(&rhs)?;
        u.iter_mut().zip(&delta).for_each(|(ui, di)| *ui -= di);
        iterations += 1;
        f = eval_residual(&u)?;
        let new_norm = norm2(&f);
        history.push(new_norm);
        let stagnated = new_norm >= 0.5 * fnorm && norm2(&delta) <= 1e-13 * norm2(&u).max(1e-300);
        if stagnated {
            break;
        }
    }
    Ok((
        u,
        NewtonReport {
            iterations,
            residual_history: history,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{mass_matrix, Boundary};
    use crate::mesh::{Element, FunctionSpace, IntervalMesh};
    use std::sync::Arc;

    fn space(el: Element, n: usize) -> FunctionSpace {
        FunctionSpace::scalar(Arc::new(IntervalMesh::unit(n).unwrap()), el)
    }

    #[test]
    fn linear_problem_takes_one_iteration() {
        let v = space(Element::P1, 20);
        let u = Coefficient::new("u", &v);
        let u0 = Coefficient::new("u0", &v);
        let dt = 0.01;
        let prev = v.interpolate_scalar(|x| (std::f64::consts::PI * x).sin());
        let phi = FormExpr::test(&v);
        let f = (u.expr() - u0.expr()) / dt * &phi + u.expr().dx() * phi.dx();
        let ctx = Bindings::new().with(&u0, &prev).unwrap();
        let bc = DirichletBC::constant(&v, Boundary::Both, 0.0).unwrap();
        let (_, rep) = newton_solve(&f, &u, &prev, &ctx, &[bc], &NewtonParams::default()).unwrap();
        assert_eq!(rep.iterations, 1);
    }

    #[test]
    fn cubic_root_on_global_constant_space() {
        let v = FunctionSpace::scalar(Arc::new(IntervalMesh::unit(1).unwrap()), Element::Real);
        let u = Coefficient::new("u", &v);
        let f = (u.expr().powi(3) - 8.0) * FormExpr::test(&v);
        let (x, rep) = newton_solve(&f, &u, &[1.0], &Bindings::new(), &[], &NewtonParams::default()).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-10);
        // Quadratic convergence: e_{k+1} / e_k^2 stays bounded near the root.
        let mut xs = vec![1.0f64];
        for _ in 0..8 {
            let x = *xs.last().unwrap();
            xs.push(x - (x.powi(3) - 8.0) / (3.0 * x * x));
        }
        let errs: Vec<f64> = xs.iter().map(|x| (x - 2.0).abs()).collect();
        for k in 3..6 {
            if errs[k + 1] > 1e-15 {
                assert!(errs[k + 1] / (errs[k] * errs[k]) < 2.0);
            }
        }
        let hist = &rep.residual_history;
        assert!(hist.len() >= 3);
    }

    #[test]
    fn nonconvergence_carries_residual() {
        let v = FunctionSpace::scalar(Arc::new(IntervalMesh::unit(1).unwrap()), Element::Real);
        let u = Coefficient::new("u", &v);
        let f = (u.expr().powi(2) + 1.0) * FormExpr::test(&v);
        let params = NewtonParams {
            max_iter: 5,
            ..Default::default()
        };
        match newton_solve(&f, &u, &[0.3], &Bindings::new(), &[], &params) {
            Err(Error::NonConvergence { iterations, residual }) => {
                assert_eq!(iterations, 5);
                assert!(residual > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn poisson_with_dirichlet_data_is_linear() {
        let v = space(Element::P1, 8);
        let k = FormExpr::trial(&v).dx() * FormExpr::test(&v).dx();
        let a = assemble_matrix(&k, &v, &v, &Bindings::new()).unwrap();
        let left = DirichletBC::constant(&v, Boundary::Left, 0.0).unwrap();
        let right = DirichletBC::constant(&v, Boundary::Right, 1.0).unwrap();
        let (a, b) = apply_bc(&a, &[0.0; 9], &left, BcMode::Full).unwrap();
        let (a, b) = apply_bc(&a, &b, &right, BcMode::Full).unwrap();
        let x = solve_linear(&a, &b).unwrap();
        for (i, xi) in x.iter().enumerate() {
            assert!((xi - v.node_coordinate(i)).abs() < 1e-14);
        }
    }

    #[test]
    fn full_bc_value_is_exact() {
        let v = space(Element::P2, 4);
        let m = mass_matrix(&v);
        let bc = DirichletBC::constant(&v, Boundary::Left, 3.0).unwrap();
        let (a, b) = apply_bc(&m, &vec![1.0; v.dof_count()], &bc, BcMode::Full).unwrap();
        assert_eq!(solve_linear(&a, &b).unwrap()[0], 3.0);
    }

    #[test]
    fn manufactured_poisson_converges_at_second_order() {
        let pi = std::f64::consts::PI;
        let mut errors = Vec::new();
        for n in [8, 16, 32] {
            let v = space(Element::P1, n);
            let k = FormExpr::trial(&v).dx() * FormExpr::test(&v).dx();
            let g = Coefficient::new("g", &v);
            let gv = v.interpolate_scalar(|x| pi * pi * (pi * x).sin());
            let l = g.expr() * FormExpr::test(&v);
            let b = Bindings::new().with(&g, &gv).unwrap();
            let a = assemble_matrix(&k, &v, &v, &b).unwrap();
            let rhs = assemble_vector(&l, &v, &b).unwrap();
            let bc = DirichletBC::constant(&v, Boundary::Both, 0.0).unwrap();
            let (a, rhs) = apply_bc(&a, &rhs, &bc, BcMode::Full).unwrap();
            let x = solve_linear(&a, &rhs).unwrap();
            let err = (0..=n)
                .map(|i| (x[i] - (pi * v.node_coordinate(i)).sin()).abs())
                .fold(0.0, f64::max);
            errors.push(err);
        }
        for w in errors.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 1.8, "order {order}");
        }
    }
}
