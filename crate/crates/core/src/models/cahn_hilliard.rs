//! One-dimensional Cahn–Hilliard equation in mixed form on `[0, 2]`:
//! `c_t = (M mu_x)_x`, `mu = f'(c) - lambda c_xx`, `f = 100 c^2 (1 - c)^2`,
//! with zero-flux ends.
//!
//! The control is the concentration `c_0` in scalar P1. A setup solve lifts it
//! to the mixed state `(c, mu)`, and the output is the final concentration
//! projected back onto scalar P1.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{require_cells, require_positive, ForwardRun, ModelSpec, Stepper};
use crate::error::{Error, Result};
use crate::forms::{Coefficient, FormExpr};
use crate::mesh::{Element, FunctionSpace, IntervalMesh};
use crate::solvers::NewtonParams;

pub const DOMAIN: (f64, f64) = (0.0, 2.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CahnHilliardParams {
    pub lambda: f64,
    pub mobility: f64,
    pub n_cells: usize,
    pub dt: f64,
    pub n_steps: usize,
    /// Time weighting of the chemical potential in the flux term.
    pub theta: f64,
}

impl Default for CahnHilliardParams {
    fn default() -> Self {
        Self {
            lambda: 1e-2,
            mobility: 1.0,
            n_cells: 200,
            dt: 5e-6,
            n_steps: 10,
            theta: 0.5,
        }
    }
}

impl CahnHilliardParams {
    pub fn validate(&self) -> Result<()> {
        require_positive("lambda", self.lambda)?;
        require_positive("mobility", self.mobility)?;
        require_positive("dt", self.dt)?;
        require_cells(self.n_cells)?;
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::Config(format!("`theta` must lie in [0, 1], got {}", self.theta)));
        }
        Ok(())
    }
}

/// `f'(c)` for the double well `100 c^2 (1 - c)^2`.
fn chemical_force(c: &FormExpr) -> FormExpr {
    200.0 * (c - 3.0 * c.powi(2) + 2.0 * c.powi(3))
}

struct ChStepper {
    scalar: FunctionSpace,
    mixed: FunctionSpace,
    lambda: f64,
    mobility: f64,
    dt: f64,
    theta: f64,
}

impl ChStepper {
    fn potential_residual(&self, c: &FormExpr, mu: &FormExpr) -> FormExpr {
        let v = FormExpr::test(&self.mixed).comp(1);
        (mu - chemical_force(c)) * &v - self.lambda * c.dx() * v.dx()
    }

    fn step_residual(&self, w0: &Coefficient, w1: &Coefficient) -> FormExpr {
        let q = FormExpr::test(&self.mixed).comp(0);
        let (c0, mu0) = (w0.expr().comp(0), w0.expr().comp(1));
        let (c1, mu1) = (w1.expr().comp(0), w1.expr().comp(1));
        let mu_theta = self.theta * &mu1 + (1.0 - self.theta) * mu0;
        (&c1 - c0) / self.dt * &q + self.mobility * mu_theta.dx() * q.dx() + self.potential_residual(&c1, &mu1)
    }
}

impl Stepper for ChStepper {
    fn prepare(&self, run: &mut ForwardRun, m: &Coefficient) -> Result<Coefficient> {
        let w = Coefficient::new("w0", &self.mixed);
        let q = FormExpr::test(&self.mixed).comp(0);
        let (c, mu) = (w.expr().comp(0), w.expr().comp(1));
        let residual = (&c - m.expr()) * q + self.potential_residual(&c, &mu);
        let c0 = run.state(m)?.to_vec();
        let mut guess = vec![0.0; self.mixed.dof_count()];
        for (node, v) in c0.iter().enumerate() {
            guess[self.mixed.dof(node, 0)] = *v;
        }
        run.solve_from(&w, &residual, &[], &guess)?;
        Ok(w)
    }

    fn step(&self, run: &mut ForwardRun, prev: &Coefficient, k: usize) -> Result<Coefficient> {
        let next = Coefficient::new(format!("w{}", k + 1), &self.mixed);
        run.solve(&next, &self.step_residual(prev, &next), &[])?;
        Ok(next)
    }

    fn finish(&self, run: &mut ForwardRun, last: &Coefficient) -> Result<Coefficient> {
        let y = Coefficient::new("c_T", &self.scalar);
        let q = FormExpr::test(&self.scalar);
        run.solve(&y, &((y.expr() - last.expr().comp(0)) * q), &[])?;
        Ok(y)
    }

    fn observe(&self, state: &[f64]) -> Vec<f64> {
        state.iter().step_by(2).copied().collect()
    }
}

pub fn cahn_hilliard_model(params: &CahnHilliardParams) -> Result<ModelSpec> {
    params.validate()?;
    let mesh = Arc::new(IntervalMesh::new(DOMAIN.0, DOMAIN.1, params.n_cells)?);
    let scalar = FunctionSpace::scalar(mesh.clone(), Element::P1);
    let mixed = FunctionSpace::new(mesh, Element::P1, 2)?;
    let initial_condition = scalar.interpolate_scalar(|x| (-30.0 * (x - 1.0).powi(2)).exp());
    let stepper = ChStepper {
        scalar: scalar.clone(),
        mixed,
        lambda: params.lambda,
        mobility: params.mobility,
        dt: params.dt,
        theta: params.theta,
    };
    Ok(ModelSpec {
        name: "cahn_hilliard".into(),
        input_space: scalar.clone(),
        output_space: scalar,
        params: BTreeMap::from([
            ("lambda".to_string(), params.lambda),
            ("mobility".to_string(), params.mobility),
            ("theta".to_string(), params.theta),
        ]),
        dt: params.dt,
        n_steps: params.n_steps,
        initial_condition,
        newton: NewtonParams::default(),
        stepper: Arc::new(stepper),
    })
}
