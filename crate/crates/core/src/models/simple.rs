//! Small linear models with known propagators, used as oracles.

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

/// Heat equation `u_t = kappa u_xx` on `[0, 1]`, implicit Euler, zero ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatParams {
    pub kappa: f64,
    pub n_cells: usize,
    pub dt: f64,
    pub n_steps: usize,
    pub element: Element,
}

impl Default for HeatParams {
    fn default() -> Self {
        Self {
            kappa: 0.01,
            n_cells: 32,
            dt: 0.01,
            n_steps: 10,
            element: Element::P1,
        }
    }
}

struct HeatStepper {
    space: FunctionSpace,
    kappa: f64,
    dt: f64,
    bc: DirichletBC,
}

impl Stepper for HeatStepper {
    fn step(&self, run: &mut ForwardRun, prev: &Coefficient, k: usize) -> Result<Coefficient> {
        let next = Coefficient::new(format!("u{}", k + 1), &self.space);
        let phi = FormExpr::test(&self.space);
        let residual = (next.expr() - prev.expr()) / self.dt * &phi + self.kappa * next.expr().dx() * phi.dx();
        run.solve(&next, &residual, std::slice::from_ref(&self.bc))?;
        Ok(next)
    }
}

pub fn heat_model(params: &HeatParams) -> Result<ModelSpec> {
    require_positive("kappa", params.kappa)?;
    require_positive("dt", params.dt)?;
    require_cells(params.n_cells)?;
    if params.element == Element::Real {
        return Err(Error::Config("heat needs element P1 or P2".into()));
    }
    let mesh = Arc::new(IntervalMesh::unit(params.n_cells)?);
    let space = FunctionSpace::scalar(mesh, params.element);
    let bc = DirichletBC::constant(&space, Boundary::Both, 0.0)?;
    let initial_condition = space.interpolate_scalar(|x| (PI * x).sin());
    Ok(ModelSpec {
        name: "heat".into(),
        input_space: space.clone(),
        output_space: space.clone(),
        params: BTreeMap::from([("kappa".to_string(), params.kappa)]),
        dt: params.dt,
        n_steps: params.n_steps,
        initial_condition,
        newton: NewtonParams::default(),
        stepper: Arc::new(HeatStepper {
            space,
            kappa: params.kappa,
            dt: params.dt,
            bc,
        }),
    })
}

/// No dynamics: the output is the control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentityParams {
    pub n_cells: usize,
    pub element: Element,
}

impl Default for IdentityParams {
    fn default() -> Self {
        Self {
            n_cells: 16,
            element: Element::P1,
        }
    }
}

struct NoStep;

impl Stepper for NoStep {
    fn step(&self, _run: &mut ForwardRun, prev: &Coefficient, _k: usize) -> Result<Coefficient> {
        Ok(prev.clone())
    }
}

pub fn identity_model(params: &IdentityParams) -> Result<ModelSpec> {
    require_cells(params.n_cells)?;
    let mesh = Arc::new(IntervalMesh::unit(params.n_cells)?);
    let space = FunctionSpace::scalar(mesh, params.element);
    let initial_condition = space.interpolate_scalar(|x| 1.0 + x);
    Ok(ModelSpec {
        name: "identity".into(),
        input_space: space.clone(),
        output_space: space,
        params: BTreeMap::new(),
        dt: 1.0,
        n_steps: 0,
        initial_condition,
        newton: NewtonParams::default(),
        stepper: Arc::new(NoStep),
    })
}

/// `u' = a u` on the space of global constants, implicit Euler, so that the
/// propagator is `(1 - a dt)^{-n}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalarOdeParams {
    pub a: f64,
    pub u0: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl Default for ScalarOdeParams {
    fn default() -> Self {
        Self {
            a: 1.0,
            u0: 1.0,
            dt: 0.1,
            n_steps: 5,
        }
    }
}

struct OdeStepper {
    space: FunctionSpace,
    a: f64,
    dt: f64,
}

impl Stepper for OdeStepper {
    fn step(&self, run: &mut ForwardRun, prev: &Coefficient, k: usize) -> Result<Coefficient> {
        let next = Coefficient::new(format!("u{}", k + 1), &self.space);
        let phi = FormExpr::test(&self.space);
        let residual = ((next.expr() - prev.expr()) / self.dt - self.a * next.expr()) * phi;
        run.solve(&next, &residual, &[])?;
        Ok(next)
    }
}

pub fn scalar_ode_model(params: &ScalarOdeParams) -> Result<ModelSpec> {
    require_positive("dt", params.dt)?;
    if !params.a.is_finite() || (1.0 - params.a * params.dt).abs() < 1e-12 {
        return Err(Error::Config("`a * dt` must differ from 1".into()));
    }
    let space = FunctionSpace::scalar(Arc::new(IntervalMesh::unit(1)?), Element::Real);
    Ok(ModelSpec {
        name: "scalar_ode".into(),
        input_space: space.clone(),
        output_space: space.clone(),
        params: BTreeMap::from([("a".to_string(), params.a)]),
        dt: params.dt,
        n_steps: params.n_steps,
        initial_condition: vec![params.u0],
        newton: NewtonParams::default(),
        stepper: Arc::new(OdeStepper {
            space,
            a: params.a,
            dt: params.dt,
        }),
    })
}
