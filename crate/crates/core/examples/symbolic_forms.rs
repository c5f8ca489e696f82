//! Build a Burgers residual, differentiate it symbolically and check the
//! Jacobian and its adjoint against assembled matrices.

use std::sync::Arc;

use autogst::assembly::{assemble_matrix, assemble_vector};
use autogst::forms::{adjoint_form, gateaux_derivative, Bindings, Coefficient, FormExpr};
use autogst::{Element, FunctionSpace, IntervalMesh, Result};

fn main() -> Result<()> {
    let space = FunctionSpace::scalar(Arc::new(IntervalMesh::unit(8)?), Element::P2);
    let u = Coefficient::new("u", &space);
    let u_old = Coefficient::new("u_old", &space);
    let phi = FormExpr::test(&space);
    let (dt, nu) = (0.05, 0.01);

    let f = (u.expr() - u_old.expr()) / dt * &phi + u.expr() * u.expr().dx() * &phi + nu * u.expr().dx() * phi.dx();
    let jac = gateaux_derivative(&f, &u, &FormExpr::trial(&space))?;
    let adj = adjoint_form(&jac)?;
    println!("F      = {f}");
    println!("dF/du  = {jac}");
    println!("adjoint= {adj}");
    println!("arities: {} {} {}", f.arity()?, jac.arity()?, adj.arity()?);

    let uv = space.interpolate_scalar(|x| (3.0 * x).sin());
    let b = Bindings::new().with(&u, &uv)?.with(&u_old, &uv)?;
    let j = assemble_matrix(&jac, &space, &space, &b)?;
    let ja = assemble_matrix(&adj, &space, &space, &b)?;
    let mismatch = ja
        .to_dense()
        .iter()
        .zip(j.transpose().to_dense())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("max |A_adj - J^T| = {mismatch:e}");

    // central differences of the assembled residual, one column at a time
    let h = 1e-6;
    let mut worst = 0.0f64;
    for col in 0..space.dof_count() {
        let mut plus = uv.clone();
        let mut minus = uv.clone();
        plus[col] += h;
        minus[col] -= h;
        let fp = assemble_vector(&f, &space, &Bindings::new().with(&u, &plus)?.with(&u_old, &uv)?)?;
        let fm = assemble_vector(&f, &space, &Bindings::new().with(&u, &minus)?.with(&u_old, &uv)?)?;
        for row in 0..space.dof_count() {
            let fd = (fp[row] - fm[row]) / (2.0 * h);
            worst = worst.max((fd - j.get(row, col)).abs() / j.max_abs());
        }
    }
    println!("max relative |J - J_fd| = {worst:e}");
    Ok(())
}
