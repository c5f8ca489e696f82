//! Sensitivity of the optimal perturbation to the horizon, and transient
//! growth followed by decay in the nonlinear model.

use autogst::assembly::mass_matrix;
use autogst::eigensolver::{gst_from_tape, LanczosParams};
use autogst::models::{cahn_hilliard_model, CahnHilliardParams};
use autogst::verification::{correlation, default_amplitude, growth_curve};
use autogst::{NewtonParams, Result};

fn main() -> Result<()> {
    let base = cahn_hilliard_model(&CahnHilliardParams::default())?.with_newton(NewtonParams::strict());
    let x = mass_matrix(&base.input_space);
    let mut leading = Vec::new();
    for n in [10, 20, 40] {
        let model = base.with_steps(n);
        let out = gst_from_tape(model.run()?.tape, None, None, &LanczosParams::with_nev(1))?;
        println!("T = {n:2} dt  sigma = {:.4}", out.triplets[0].sigma);
        leading.push(out.triplets.into_iter().next().expect("one triplet"));
    }
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        println!("corr(v_{i}, v_{j}) = {:.4}", correlation(&leading[i].v, &leading[j].v, &x).abs());
    }

    let curve = growth_curve(&base, &leading[0].v, default_amplitude(&base), 200)?;
    let (k, (t, g)) = curve
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("nonempty curve");
    println!("growth peaks at step {k} (t = {t:.2e}) with ratio {g:.4}; sigma at 10 dt was {:.4}", leading[0].sigma);
    for (t, g) in curve.iter().step_by(20) {
        println!("  t = {t:.2e}  ratio = {g:.4}");
    }
    Ok(())
}
