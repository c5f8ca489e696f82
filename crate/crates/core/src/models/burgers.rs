//! Viscous Burgers' equation `u_t + u u_x - nu u_xx = 0` on `[0, 1]`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{require_cells, require_positive, ForwardRun, ModelSpec, Stepper};
use crate::assembly::{Boundary, DirichletBC};
use crate::error::{Error, Result};
use crate::forms::{Coefficient, FormExpr};
use crate::mesh::{Element, FunctionSpace, IntervalMesh};
use crate::solvers::NewtonParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScheme {
    ImplicitEuler,
    Trapezoidal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BurgersParams {
    pub nu: f64,
    pub n_cells: usize,
    pub dt: f64,
    pub n_steps: usize,
    pub element: Element,
    pub scheme: TimeScheme,
}

impl Default for BurgersParams {
    fn default() -> Self {
        Self {
            nu: 1e-4,
            n_cells: 30,
            dt: 1.0 / 30.0,
            n_steps: 6,
            element: Element::P2,
            scheme: TimeScheme::Trapezoidal,
        }
    }
}

impl BurgersParams {
    pub fn validate(&self) -> Result<()> {
        require_positive("nu", self.nu)?;
        require_positive("dt", self.dt)?;
        require_cells(self.n_cells)?;
        if self.element == Element::Real {
            return Err(Error::Config("Burgers needs element P1 or P2".into()));
        }
        Ok(())
    }
}

struct BurgersStepper {
    space: FunctionSpace,
    nu: f64,
    dt: f64,
    scheme: TimeScheme,
    bc: DirichletBC,
}

impl BurgersStepper {
    fn residual(&self, u0: &Coefficient, u1: &Coefficient) -> FormExpr {
        let phi = FormExpr::test(&self.space);
        let ustar = match self.scheme {
            TimeScheme::ImplicitEuler => u1.expr(),
            TimeScheme::Trapezoidal => 0.5 * (u0.expr() + u1.expr()),
        };
        (u1.expr() - u0.expr()) / self.dt * &phi + &ustar * ustar.dx() * &phi + self.nu * ustar.dx() * phi.dx()
    }
}

impl Stepper for BurgersStepper {
    fn step(&self, run: &mut ForwardRun, prev: &Coefficient, k: usize) -> Result<Coefficient> {
        let next = Coefficient::new(format!("u{}", k + 1), &self.space);
        run.solve(&next, &self.residual(prev, &next), std::slice::from_ref(&self.bc))?;
        Ok(next)
    }
}

/// Burgers with homogeneous Dirichlet ends and initial condition `sin(2 pi x)`.
pub fn burgers_model(params: &BurgersParams) -> Result<ModelSpec> {
    params.validate()?;
    let mesh = Arc::new(IntervalMesh::unit(params.n_cells)?);
    let space = FunctionSpace::scalar(mesh, params.element);
    let bc = DirichletBC::constant(&space, Boundary::Both, 0.0)?;
    let initial_condition = space.interpolate_scalar(|x| (2.0 * PI * x).sin());
    let stepper = BurgersStepper {
        space: space.clone(),
        nu: params.nu,
        dt: params.dt,
        scheme: params.scheme,
        bc,
    };
    Ok(ModelSpec {
        name: "burgers".into(),
        input_space: space.clone(),
        output_space: space,
        params: BTreeMap::from([("nu".to_string(), params.nu)]),
        dt: params.dt,
        n_steps: params.n_steps,
        initial_condition,
        newton: NewtonParams::default(),
        stepper: Arc::new(stepper),
    })
}
