//! A model written from scratch: Fisher-KPP reaction-diffusion with
//! implicit Euler steps, analysed with the same machinery as the bundled
//! models.

use std::collections::BTreeMap;
use std::sync::Arc;

use autogst::eigensolver::{gst_from_tape, LanczosParams};
use autogst::models::{ForwardRun, ModelSpec, Stepper};
use autogst::verification::{default_amplitude, nonlinear_growth_check, run_suite, SuiteSettings};
use autogst::{Boundary, Coefficient, DirichletBC, Element, FormExpr, FunctionSpace, IntervalMesh, NewtonParams, Result};

struct Fisher {
    space: FunctionSpace,
    diffusion: f64,
    rate: f64,
    dt: f64,
    bc: DirichletBC,
}

impl Stepper for Fisher {
    fn step(&self, run: &mut ForwardRun, prev: &Coefficient, k: usize) -> Result<Coefficient> {
        let u = Coefficient::new(format!("u{}", k + 1), &self.space);
        let phi = FormExpr::test(&self.space);
        let residual = (u.expr() - prev.expr()) / self.dt * &phi + self.diffusion * u.expr().dx() * phi.dx()
            - self.rate * u.expr() * (1.0 - u.expr()) * &phi;
        run.solve(&u, &residual, std::slice::from_ref(&self.bc))?;
        Ok(u)
    }
}

fn main() -> Result<()> {
    let space = FunctionSpace::scalar(Arc::new(IntervalMesh::new(0.0, 10.0, 60)?), Element::P1);
    let bc = DirichletBC::constant(&space, Boundary::Both, 0.0)?;
    let model = ModelSpec {
        name: "fisher".into(),
        input_space: space.clone(),
        output_space: space.clone(),
        params: BTreeMap::from([("rate".to_string(), 1.0)]),
        dt: 0.1,
        n_steps: 20,
        initial_condition: space.interpolate_scalar(|x| 0.5 * (-(x - 5.0).powi(2)).exp()),
        newton: NewtonParams::strict(),
        stepper: Arc::new(Fisher {
            space,
            diffusion: 0.05,
            rate: 1.0,
            dt: 0.1,
            bc,
        }),
    };

    let suite = run_suite(&model, &SuiteSettings::default(), 0)?;
    println!("verification {}: {:?}", if suite.passed { "passed" } else { "failed" }, suite.failures);

    let out = gst_from_tape(model.run()?.tape, None, None, &LanczosParams::with_nev(3))?;
    for t in &out.triplets {
        println!("sigma = {:.6}", t.sigma);
    }
    let g = nonlinear_growth_check(&model, &out.triplets[0], default_amplitude(&model))?;
    println!("nonlinear growth {:.6} vs sigma {:.6}", g.observed, g.predicted);
    Ok(())
}
