//! Leading singular triplets of the Burgers propagator and a nonlinear
//! check of the predicted growth.

use autogst::eigensolver::{gst_from_tape, LanczosParams};
use autogst::models::{burgers_model, BurgersParams};
use autogst::verification::{default_amplitude, nonlinear_growth_check};
use autogst::{NewtonParams, Result};

fn main() -> Result<()> {
    let model = burgers_model(&BurgersParams::default())?.with_newton(NewtonParams::strict());
    let run = model.run()?;
    println!("{} dofs, T = {}, Newton iterations {:?}", model.input_space.dof_count(), model.final_time(), run.newton_iterations);

    let out = gst_from_tape(run.tape, None, None, &LanczosParams::with_nev(4))?;
    for (i, t) in out.triplets.iter().enumerate() {
        println!("sigma_{i} = {:.10}  residual {:.1e}", t.sigma, t.residual);
    }
    println!(
        "{} restarts, {} operator applications",
        out.report.restarts, out.report.operator_applications
    );

    let check = nonlinear_growth_check(&model, &out.triplets[0], default_amplitude(&model))?;
    println!(
        "predicted {:.8}, observed {:.8}, relative error {:.2e}",
        check.predicted,
        check.observed,
        check.relative_error()
    );
    Ok(())
}
