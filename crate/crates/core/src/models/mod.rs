//! Forward models: a time loop of variational solves recorded on a tape.

mod burgers;
mod cahn_hilliard;
mod gross_pitaevskii;
mod simple;

pub use burgers::{burgers_model, BurgersParams, TimeScheme};
pub use cahn_hilliard::{cahn_hilliard_model, CahnHilliardParams};
pub use gross_pitaevskii::{gross_pitaevskii_model, soliton, soliton_amplitude_direction, GrossPitaevskiiParams};
pub use simple::{heat_model, identity_model, scalar_ode_model, HeatParams, IdentityParams, ScalarOdeParams};

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::assembly::DirichletBC;
use crate::error::{Error, Result};
use crate::forms::{Coefficient, FormExpr};
use crate::mesh::FunctionSpace;
use crate::solvers::{NewtonParams, NewtonReport};
use crate::tape::Tape;

/// A forward run in progress: the tape being built plus solver settings.
pub struct ForwardRun {
    tape: Tape,
    newton: NewtonParams,
    iterations: Vec<usize>,
}

impl ForwardRun {
    pub fn new(newton: NewtonParams) -> Self {
        Self {
            tape: Tape::new(),
            newton,
            iterations: Vec::new(),
        }
    }

    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    pub fn state(&self, c: &Coefficient) -> Result<&[f64]> {
        self.tape
            .state(c)
            .ok_or_else(|| Error::InvalidTape(format!("`{}` has not been computed", c.name())))
    }

    /// Solve and record `residual(unknown) = 0`.
    pub fn solve(&mut self, unknown: &Coefficient, residual: &FormExpr, bcs: &[DirichletBC]) -> Result<NewtonReport> {
        let report = self.tape.solve(unknown, residual, bcs, None, &self.newton)?;
        self.iterations.push(report.iterations);
        Ok(report)
    }

    /// As [`ForwardRun::solve`] with an explicit initial guess.
    pub fn solve_from(
        &mut self,
        unknown: &Coefficient,
        residual: &FormExpr,
        bcs: &[DirichletBC],
        guess: &[f64],
    ) -> Result<NewtonReport> {
        let report = self.tape.solve(unknown, residual, bcs, Some(guess), &self.newton)?;
        self.iterations.push(report.iterations);
        Ok(report)
    }

    pub fn record_constant(&mut self, c: &Coefficient, values: Vec<f64>) -> Result<()> {
        self.tape.record_constant(c, values)
    }
}

/// The time-stepping logic of a model.
pub trait Stepper: Send + Sync {
    /// Records solved before the time loop. Returns the initial state, which
    /// defaults to the control itself.
    fn prepare(&self, _run: &mut ForwardRun, m: &Coefficient) -> Result<Coefficient> {
        Ok(m.clone())
    }

    /// Advance one step from `prev`; `k` counts from zero.
    fn step(&self, run: &mut ForwardRun, prev: &Coefficient, k: usize) -> Result<Coefficient>;

    /// Records solved after the time loop. Returns the output variable.
    fn finish(&self, _run: &mut ForwardRun, last: &Coefficient) -> Result<Coefficient> {
        Ok(last.clone())
    }

    /// Map a state vector to the output space, for trajectories.
    fn observe(&self, state: &[f64]) -> Vec<f64> {
        state.to_vec()
    }
}

#[derive(Clone)]
pub struct ModelSpec {
    pub name: String,
    /// Space of the control `m` (the initial condition).
    pub input_space: FunctionSpace,
    /// Space of the output `u_T`.
    pub output_space: FunctionSpace,
    pub params: BTreeMap<String, f64>,
    pub dt: f64,
    pub n_steps: usize,
    /// Default control `m_0`.
    pub initial_condition: Vec<f64>,
    pub newton: NewtonParams,
    pub stepper: Arc<dyn Stepper>,
}

impl std::fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("input_space", &self.input_space)
            .field("output_space", &self.output_space)
            .field("params", &self.params)
            .field("dt", &self.dt)
            .field("n_steps", &self.n_steps)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub struct ForwardResult {
    pub tape: Arc<Tape>,
    /// `u_T`.
    pub output: Vec<f64>,
    /// Observed state after each step, starting with the initial state.
    pub trajectory: Vec<Vec<f64>>,
    /// Newton iterations of every solve, in tape order.
    pub newton_iterations: Vec<usize>,
}

impl ModelSpec {
    /// Final time `n_steps * dt`.
    pub fn final_time(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    pub fn with_steps(&self, n_steps: usize) -> Self {
        Self {
            n_steps,
            ..self.clone()
        }
    }

    pub fn with_newton(&self, newton: NewtonParams) -> Self {
        Self {
            newton,
            ..self.clone()
        }
    }

    /// Run from the default initial condition.
    pub fn run(&self) -> Result<ForwardResult> {
        self.run_from(&self.initial_condition)
    }

    /// Run from the control `m`, recording every solve.
    pub fn run_from(&self, m: &[f64]) -> Result<ForwardResult> {
        if m.len() != self.input_space.dof_count() {
            return Err(Error::DimensionMismatch {
                expected: self.input_space.dof_count(),
                got: m.len(),
                context: "initial condition",
            });
        }
        let mut run = ForwardRun::new(self.newton);
        let control = Coefficient::new("m", &self.input_space);
        run.tape.record_input(&control, m.to_vec())?;
        let mut state = self.stepper.prepare(&mut run, &control)?;
        let mut trajectory = vec![self.stepper.observe(run.state(&state)?)];
        for k in 0..self.n_steps {
            state = self.stepper.step(&mut run, &state, k)?;
            trajectory.push(self.stepper.observe(run.state(&state)?));
        }
        let out = self.stepper.finish(&mut run, &state)?;
        let output = run.state(&out)?.to_vec();
        if output.len() != self.output_space.dof_count() {
            return Err(Error::DimensionMismatch {
                expected: self.output_space.dof_count(),
                got: output.len(),
                context: "model output",
            });
        }
        run.tape.seal(&out)?;
        Ok(ForwardResult {
            tape: Arc::new(run.tape),
            output,
            trajectory,
            newton_iterations: run.iterations,
        })
    }
}

pub(crate) fn require_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Config(format!("`{name}` must be positive, got {v}")));
    }
    Ok(())
}

pub(crate) fn require_cells(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Config("`n_cells` must be at least 1".into()));
    }
    Ok(())
}
