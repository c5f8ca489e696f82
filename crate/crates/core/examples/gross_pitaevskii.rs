//! Optimal perturbations of the travelling soliton: growth against the
//! horizon, and the shape of the leading perturbation.

use autogst::assembly::mass_matrix;
use autogst::eigensolver::{gst_from_tape, LanczosParams};
use autogst::models::{gross_pitaevskii_model, soliton, soliton_amplitude_direction, GrossPitaevskiiParams};
use autogst::verification::{correlation, linear_fit};
use autogst::Result;

fn main() -> Result<()> {
    let base = GrossPitaevskiiParams::default();
    let horizons = [10, 20, 30, 40, 50];
    let mut sigmas = Vec::new();
    let mut last = None;
    for &n in &horizons {
        let model = gross_pitaevskii_model(&GrossPitaevskiiParams { n_steps: n, ..base.clone() })?;
        let out = gst_from_tape(model.run()?.tape, None, None, &LanczosParams::with_nev(1))?;
        println!("T = {:6.4}  sigma = {:.6}", model.final_time(), out.triplets[0].sigma);
        sigmas.push(out.triplets[0].sigma);
        last = Some((model, out));
    }
    let t: Vec<f64> = horizons.iter().map(|&n| n as f64 * base.dt).collect();
    let (a, b, r2) = linear_fit(&t, &sigmas);
    println!("sigma(T) ~ {a:.4} + {b:.4} T, R^2 = {r2:.5}");

    let (model, out) = last.expect("at least one horizon");
    let x = mass_matrix(&model.input_space);
    let v = &out.triplets[0].v;
    let along_amplitude = soliton_amplitude_direction(&model.input_space, 1e-4);
    let psi = model.input_space.interpolate(|s| {
        let (re, im) = soliton(s, 0.0);
        vec![re, im]
    });
    println!("|corr(v, d psi / da)| = {:.4}", correlation(v, &along_amplitude, &x).abs());
    println!("|corr(v, psi)|        = {:.4}", correlation(v, &psi, &x).abs());
    Ok(())
}
