//! What a forward run records, and the two sweeps over the record.

use autogst::models::{heat_model, HeatParams};
use autogst::verification::random_direction;
use autogst::{LinearOperator, Result, TapePropagator};

fn main() -> Result<()> {
    let model = heat_model(&HeatParams {
        n_cells: 8,
        n_steps: 3,
        ..Default::default()
    })?;
    let run = model.run()?;
    print!("{}", run.tape.dump());
    println!("checksum {}", run.tape.checksum());

    let op = TapePropagator::new(run.tape.clone())?;
    let dm = random_direction(op.in_dim(), 1);
    let w = random_direction(op.out_dim(), 2);
    let lhs: f64 = op.apply(&dm)?.iter().zip(&w).map(|(a, b)| a * b).sum();
    let rhs: f64 = dm.iter().zip(op.apply_hermitian(&w)?).map(|(a, b)| a * b).sum();
    println!("<L dm, w> = {lhs:.15}\n<dm, L* w> = {rhs:.15}");
    println!("replay drift {:e}", run.tape.replay()?);
    Ok(())
}
