//! Build the propagator densely, one tangent-linear solve per column, and
//! check the matrix-free actions against its SVD.

use autogst::models::{burgers_model, heat_model, BurgersParams, HeatParams, ModelSpec};
use autogst::verification::{dense_oracle_check, dot_product_test};
use autogst::{Element, NewtonParams, Result, TapePropagator};

fn report(model: &ModelSpec, probes: usize) -> Result<()> {
    let op = TapePropagator::new(model.run()?.tape)?;
    let rep = dense_oracle_check(&op, probes, 1e-7, 5)?;
    let dots = dot_product_test(&op, 100, 21)?;
    println!(
        "{}: {} probes (max {:.1e}), {} singular vectors (max {:.1e}), dot product {:.1e}",
        model.name, rep.probes, rep.max_probe_error, rep.vectors_checked, rep.max_vector_error, dots.max_relative_error
    );
    println!("  largest singular values {:?}", &rep.singular_values[..3]);
    Ok(())
}

fn main() -> Result<()> {
    let burgers = burgers_model(&BurgersParams {
        n_cells: 32,
        element: Element::P1,
        ..Default::default()
    })?
    .with_newton(NewtonParams::strict());
    report(&burgers, 100)?;
    report(&heat_model(&HeatParams::default())?, 300)
}
