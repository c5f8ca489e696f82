//! One-dimensional Gross–Pitaevskii (cubic Schrödinger) equation
//! `i Psi_t + Psi_xx + s |Psi|^2 Psi = 0` on the periodic interval `[-10, 10]`,
//! split as `Psi = p + i q`.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{require_cells, require_positive, ForwardRun, ModelSpec, Stepper};
use crate::error::{Error, Result};
use crate::forms::{Coefficient, FormExpr};
use crate::mesh::{Element, FunctionSpace, IntervalMesh};
use crate::solvers::NewtonParams;

pub const DOMAIN: (f64, f64) = (-10.0, 10.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrossPitaevskiiParams {
    /// `+1` focusing, `-1` defocusing.
    pub s: f64,
    pub n_cells: usize,
    pub dt: f64,
    pub n_steps: usize,
}

impl Default for GrossPitaevskiiParams {
    fn default() -> Self {
        Self {
            s: 1.0,
            n_cells: 480,
            dt: 0.03125,
            n_steps: 50,
        }
    }
}

impl GrossPitaevskiiParams {
    pub fn validate(&self) -> Result<()> {
        if self.s != 1.0 && self.s != -1.0 {
            return Err(Error::Config(format!("`s` must be +1 or -1, got {}", self.s)));
        }
        require_positive("dt", self.dt)?;
        require_cells(self.n_cells)
    }
}

/// Travelling soliton `sqrt(2) exp(i x/2 + 3 i t/4) / cosh(x - t)` as `(Re, Im)`.
pub fn soliton(x: f64, t: f64) -> (f64, f64) {
    let amp = SQRT_2 / (x - t).cosh();
    let phase = 0.5 * x + 0.75 * t;
    (amp * phase.cos(), amp * phase.sin())
}

/// Stationary member of the amplitude family `a sech(a x / sqrt 2) e^{i x/2}`.
fn amplitude_family(a: f64, x: f64) -> (f64, f64) {
    let amp = a / (a * x / SQRT_2).cosh();
    (amp * (0.5 * x).cos(), amp * (0.5 * x).sin())
}

/// Central difference of the amplitude family at `a = sqrt 2`, interpolated
/// in `space` (two components).
pub fn soliton_amplitude_direction(space: &FunctionSpace, h: f64) -> Vec<f64> {
    space.interpolate(|x| {
        let (pp, qp) = amplitude_family(SQRT_2 + h, x);
        let (pm, qm) = amplitude_family(SQRT_2 - h, x);
        vec![(pp - pm) / (2.0 * h), (qp - qm) / (2.0 * h)]
    })
}

struct GpStepper {
    space: FunctionSpace,
    s: f64,
    dt: f64,
}

impl GpStepper {
    fn residual(&self, w0: &Coefficient, w1: &Coefficient) -> FormExpr {
        let phi = FormExpr::test(&self.space);
        let (phr, phi_i) = (phi.comp(0), phi.comp(1));
        let (p0, q0) = (w0.expr().comp(0), w0.expr().comp(1));
        let (p1, q1) = (w1.expr().comp(0), w1.expr().comp(1));
        let pm = 0.5 * (&p0 + &p1);
        let qm = 0.5 * (&q0 + &q1);
        let dens = &pm * &pm + &qm * &qm;
        let real = -((&q1 - &q0) / self.dt) * &phr - pm.dx() * phr.dx() + self.s * &dens * &pm * &phr;
        let imag = (&p1 - &p0) / self.dt * &phi_i - qm.dx() * phi_i.dx() + self.s * &dens * &qm * &phi_i;
        real + imag
    }
}

impl Stepper for GpStepper {
    fn step(&self, run: &mut ForwardRun, prev: &Coefficient, k: usize) -> Result<Coefficient> {
        let next = Coefficient::new(format!("psi{}", k + 1), &self.space);
        run.solve(&next, &self.residual(prev, &next), &[])?;
        Ok(next)
    }
}

pub fn gross_pitaevskii_model(params: &GrossPitaevskiiParams) -> Result<ModelSpec> {
    params.validate()?;
    let mesh = Arc::new(IntervalMesh::periodic(DOMAIN.0, DOMAIN.1, params.n_cells)?);
    let space = FunctionSpace::new(mesh, Element::P1, 2)?;
    let initial_condition = space.interpolate(|x| {
        let (p, q) = soliton(x, 0.0);
        vec![p, q]
    });
    let stepper = GpStepper {
        space: space.clone(),
        s: params.s,
        dt: params.dt,
    };
    Ok(ModelSpec {
        name: "gross_pitaevskii".into(),
        input_space: space.clone(),
        output_space: space,
        params: BTreeMap::from([("s".to_string(), params.s)]),
        dt: params.dt,
        n_steps: params.n_steps,
        initial_condition,
        newton: NewtonParams::default(),
        stepper: Arc::new(stepper),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::mass_matrix;
    use crate::linalg::dot;

    #[test]
    fn midpoint_rule_conserves_mass() {
        let p = GrossPitaevskiiParams {
            n_cells: 120,
            ..Default::default()
        };
        let model = gross_pitaevskii_model(&p).unwrap();
        let r = model.run().unwrap();
        let m = mass_matrix(&model.input_space);
        let mass = |w: &[f64]| dot(w, &m.matvec(w));
        let m0 = mass(&r.trajectory[0]);
        for w in &r.trajectory {
            assert!(((mass(w) - m0) / m0).abs() < 1e-6);
        }
    }

    #[test]
    fn soliton_has_unit_modulus_scale() {
        let (p, q) = soliton(0.0, 0.0);
        assert!((p - SQRT_2).abs() < 1e-15 && q == 0.0);
        let (p, q) = soliton(1.0, 1.0);
        assert!(((p * p + q * q).sqrt() - SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn amplitude_direction_matches_analytic_derivative() {
        let mesh = Arc::new(IntervalMesh::periodic(-10.0, 10.0, 40).unwrap());
        let space = FunctionSpace::new(mesh, Element::P1, 2).unwrap();
        let d = soliton_amplitude_direction(&space, 1e-4);
        let a = SQRT_2;
        let exact = space.interpolate(|x| {
            let z = a * x / SQRT_2;
            let amp = 1.0 / z.cosh() - z * z.tanh() / z.cosh();
            vec![amp * (0.5 * x).cos(), amp * (0.5 * x).sin()]
        });
        for (u, v) in d.iter().zip(&exact) {
            assert!((u - v).abs() < 1e-7);
        }
    }

    #[test]
    fn rejects_bad_sign() {
        let p = GrossPitaevskiiParams {
            s: 0.5,
            ..Default::default()
        };
        assert!(matches!(gross_pitaevskii_model(&p), Err(Error::Config(_))));
    }
}
