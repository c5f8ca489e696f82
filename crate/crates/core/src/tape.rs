//! Runtime tape of equation solves, with tangent-linear and adjoint sweeps
//! derived from the recorded residuals.
//!
//! Every record is an equation `F_k(u_k, u_{k_1}, ..., u_{k_N}) = 0` whose
//! dependencies are earlier records. Differentiating `F_k` symbolically with
//! respect to `u_k` and to each dependency gives the linear systems solved by
//! the sweeps:
//!
//! ```text
//! tangent linear:  A_k du_k = -sum_i B_ki du_ki        (forward order)
//! adjoint:         A_k^T l_k = ubar_k,  ubar_ki -= B_ki^T l_k   (reverse order)
//! ```
//!
//! Strong boundary rows are homogenised in both sweeps. The adjoint system
//! is the transposed operator with the constrained rows replaced by identity
//! rows and a zeroed right-hand side there, which is the exact transpose of
//! the row-replaced tangent-linear solve.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::OnceLock;

use sha2::{Digest, Sha256};

use crate::assembly::{assemble_matrix, assemble_scalar, assemble_vector, constrained_dofs, DirichletBC};
use crate::error::{Error, Result};
use crate::forms::{adjoint_form, gateaux_derivative, Bindings, Coefficient, CoefficientId, FormExpr};
use crate::linalg::{dot, norm2, BandedLu};
use crate::solvers::{newton_solve, NewtonParams, NewtonReport};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone)]
pub enum RecordKind {
    /// Direct dof assignment of the control `m`.
    Input,
    /// Direct dof assignment of data that does not depend on the control.
    Constant,
    /// A variational solve `F(u) = 0`.
    Solve {
        residual: FormExpr,
        bcs: Vec<DirichletBC>,
        params: NewtonParams,
    },
}

#[derive(Debug, Clone)]
pub struct TapeRecord {
    pub index: usize,
    pub unknown: Coefficient,
    pub kind: RecordKind,
    /// Earlier unknowns the residual depends on, in first-use order.
    pub dependencies: Vec<Coefficient>,
    pub state: Vec<f64>,
}

struct LinearisedSolve {
    forward: BandedLu,
    adjoint: BandedLu,
    /// `(record index of dependency, dF/du_dep)`; zero couplings are omitted.
    couplings: Vec<(usize, SparseMatrix)>,
    constrained: Vec<usize>,
}

enum Linearised {
    Input,
    Constant,
    Solve(Box<LinearisedSolve>),
}

#[derive(Default)]
pub struct Tape {
    records: Vec<TapeRecord>,
    index_of: HashMap<CoefficientId, usize>,
    input: Option<usize>,
    output: Option<usize>,
    sealed: bool,
    linearisation: OnceLock<Vec<Linearised>>,
}

impl std::fmt::Debug for Tape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tape")
            .field("records", &self.records.len())
            .field("input", &self.input)
            .field("output", &self.output)
            .field("sealed", &self.sealed)
            .finish()
    }
}

/// Gradient evaluation route for [`Tape::functional_gradient`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    Tlm,
    Adjoint,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_sealed(&self) -> bool {
        self.sealed
    }

    pub fn records(&self) -> &[TapeRecord] {
        &self.records
    }

    pub fn state(&self, c: &Coefficient) -> Option<&[f64]> {
        self.index_of.get(&c.id()).map(|&i| self.records[i].state.as_slice())
    }

    pub fn input(&self) -> Result<&TapeRecord> {
        self.input
            .map(|i| &self.records[i])
            .ok_or_else(|| Error::InvalidTape("no input variable recorded".into()))
    }

    pub fn output(&self) -> Result<&TapeRecord> {
        self.output
            .map(|i| &self.records[i])
            .ok_or_else(|| Error::InvalidTape("no output variable designated".into()))
    }

    fn check_open(&self, unknown: &Coefficient, values: &[f64]) -> Result<()> {
        if self.sealed {
            return Err(Error::TapeSealed);
        }
        if self.index_of.contains_key(&unknown.id()) {
            return Err(Error::InvalidTape(format!(
                "`{}` is already on the tape; each unknown is solved once",
                unknown.name()
            )));
        }
        if values.len() != unknown.space().dof_count() {
            return Err(Error::DimensionMismatch {
                expected: unknown.space().dof_count(),
                got: values.len(),
                context: "recorded state",
            });
        }
        Ok(())
    }

    fn push(&mut self, unknown: &Coefficient, kind: RecordKind, dependencies: Vec<Coefficient>, state: Vec<f64>) -> usize {
        let index = self.records.len();
        self.index_of.insert(unknown.id(), index);
        self.records.push(TapeRecord {
            index,
            unknown: unknown.clone(),
            kind,
            dependencies,
            state,
        });
        index
    }

    /// Record the control variable `m` by direct assignment.
    pub fn record_input(&mut self, unknown: &Coefficient, values: Vec<f64>) -> Result<()> {
        self.check_open(unknown, &values)?;
        if self.input.is_some() {
            return Err(Error::InvalidTape("the tape already has an input variable".into()));
        }
        self.input = Some(self.push(unknown, RecordKind::Input, Vec::new(), values));
        Ok(())
    }

    /// Record data independent of the control (forcing fields, parameters).
    pub fn record_constant(&mut self, unknown: &Coefficient, values: Vec<f64>) -> Result<()> {
        self.check_open(unknown, &values)?;
        self.push(unknown, RecordKind::Constant, Vec::new(), values);
        Ok(())
    }

    fn dependencies_of(&self, unknown: &Coefficient, residual: &FormExpr) -> Result<Vec<Coefficient>> {
        let mut deps = Vec::new();
        for c in residual.coefficients() {
            if &c == unknown {
                continue;
            }
            if !self.index_of.contains_key(&c.id()) {
                return Err(Error::InvalidTape(format!(
                    "`{}` is used by the residual for `{}` before being recorded",
                    c.name(),
                    unknown.name()
                )));
            }
            deps.push(c);
        }
        Ok(deps)
    }

    fn bindings<'a>(&'a self, deps: &[Coefficient]) -> Bindings<'a> {
        let mut b = Bindings::new();
        for d in deps {
            let i = self.index_of[&d.id()];
            b.bind(d, &self.records[i].state).expect("recorded states have matching length");
        }
        b
    }

    /// Append an already-solved equation with its solution `state`.
    pub fn record_solve(
        &mut self,
        unknown: &Coefficient,
        residual: &FormExpr,
        bcs: &[DirichletBC],
        state: Vec<f64>,
        params: NewtonParams,
    ) -> Result<()> {
        self.check_open(unknown, &state)?;
        let deps = self.dependencies_of(unknown, residual)?;
        let kind = RecordKind::Solve {
            residual: residual.clone(),
            bcs: bcs.to_vec(),
            params,
        };
        self.push(unknown, kind, deps, state);
        Ok(())
    }

    /// Solve `residual = 0` for `unknown` with Newton's method and record it.
    /// Without an explicit guess, the state of the first dependency in the
    /// same space is used, falling back to zero.
    pub fn solve(
        &mut self,
        unknown: &Coefficient,
        residual: &FormExpr,
        bcs: &[DirichletBC],
        guess: Option<&[f64]>,
        params: &NewtonParams,
    ) -> Result<NewtonReport> {
        self.check_open(unknown, &vec![0.0; unknown.space().dof_count()])?;
        let deps = self.dependencies_of(unknown, residual)?;
        let initial = match guess {
            Some(g) => g.to_vec(),
            None => self.default_guess(unknown, &deps),
        };
        let (state, report) = {
            let ctx = self.bindings(&deps);
            newton_solve(residual, unknown, &initial, &ctx, bcs, params)?
        };
        self.record_solve(unknown, residual, bcs, state, *params)?;
        Ok(report)
    }

    fn default_guess(&self, unknown: &Coefficient, deps: &[Coefficient]) -> Vec<f64> {
        deps.iter()
            .find(|d| d.space() == unknown.space())
            .and_then(|d| self.state(d))
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; unknown.space().dof_count()])
    }

    /// Designate the output variable and freeze the tape.
    pub fn seal(&mut self, output: &Coefficient) -> Result<()> {
        if self.sealed {
            return Err(Error::TapeSealed);
        }
        if self.input.is_none() {
            return Err(Error::InvalidTape("no input variable recorded".into()));
        }
        let idx = *self.index_of.get(&output.id()).ok_or_else(|| {
            Error::InvalidTape(format!("output `{}` is not on the tape", output.name()))
        })?;
        self.output = Some(idx);
        self.sealed = true;
        Ok(())
    }

    fn require_sealed(&self) -> Result<()> {
        if !self.sealed {
            return Err(Error::TapeNotSealed);
        }
        Ok(())
    }

    fn linearise_record(&self, rec: &TapeRecord) -> Result<Linearised> {
        let (residual, bcs) = match &rec.kind {
            RecordKind::Input => return Ok(Linearised::Input),
            RecordKind::Constant => return Ok(Linearised::Constant),
            RecordKind::Solve { residual, bcs, .. } => (residual, bcs),
        };
        let space = rec.unknown.space();
        let mut b = self.bindings(&rec.dependencies);
        b.bind(&rec.unknown, &rec.state)?;
        let jac = gateaux_derivative(residual, &rec.unknown, &FormExpr::trial(space))?;
        let constrained = constrained_dofs(bcs);
        let a = assemble_matrix(&jac, space, space, &b)?;
        let at = assemble_matrix(&adjoint_form(&jac)?, space, space, &b)?;
        let forward = BandedLu::factor(&a.replace_rows_with_identity(&constrained))?;
        let adjoint = BandedLu::factor(&at.replace_rows_with_identity(&constrained))?;
        let mut couplings = Vec::new();
        for dep in &rec.dependencies {
            let j = self.index_of[&dep.id()];
            if matches!(self.records[j].kind, RecordKind::Constant) {
                continue;
            }
            let form = gateaux_derivative(residual, dep, &FormExpr::trial(dep.space()))?;
            if form.is_zero() {
                continue;
            }
            couplings.push((j, assemble_matrix(&form, space, dep.space(), &b)?));
        }
        Ok(Linearised::Solve(Box::new(LinearisedSolve {
            forward,
            adjoint,
            couplings,
            constrained,
        })))
    }

    /// Factorised linearised operators for every record, built on first use.
    fn linearisation(&self) -> Result<&[Linearised]> {
        self.require_sealed()?;
        if let Some(l) = self.linearisation.get() {
            return Ok(l);
        }
        let lin = self
            .records
            .iter()
            .map(|r| self.linearise_record(r))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.linearisation.get_or_init(|| lin))
    }

    /// Force construction of the linearised operators.
    pub fn linearise(&self) -> Result<()> {
        self.linearisation().map(|_| ())
    }

    pub fn input_dim(&self) -> Result<usize> {
        Ok(self.input()?.state.len())
    }

    pub fn output_dim(&self) -> Result<usize> {
        Ok(self.output()?.state.len())
    }

    /// Tangent-linear sweep: `L dm`.
    pub fn tlm_sweep(&self, dm: &[f64]) -> Result<Vec<f64>> {
        let lin = self.linearisation()?;
        let (input, output) = (self.input.unwrap(), self.output.unwrap());
        if dm.len() != self.records[input].state.len() {
            return Err(Error::DimensionMismatch {
                expected: self.records[input].state.len(),
                got: dm.len(),
                context: "tangent-linear direction",
            });
        }
        let mut dots: Vec<Option<Vec<f64>>> = vec![None; self.records.len()];
        for (k, l) in lin.iter().enumerate().take(output + 1) {
            dots[k] = match l {
                Linearised::Input => Some(dm.to_vec()),
                Linearised::Constant => None,
                Linearised::Solve(s) => {
                    let n = self.records[k].state.len();
                    let mut rhs = vec![0.0; n];
                    let mut active = false;
                    for (j, b) in &s.couplings {
                        if let Some(dj) = &dots[*j] {
                            let bd = b.matvec(dj);
                            rhs.iter_mut().zip(&bd).for_each(|(r, v)| *r -= v);
                            active = true;
                        }
                    }
                    if active {
                        for &d in &s.constrained {
                            rhs[d] = 0.0;
                        }
                        Some(s.forward.solve(&rhs)?)
                    } else {
                        None
                    }
                }
            };
        }
        Ok(dots[output]
            .take()
            .unwrap_or_else(|| vec![0.0; self.records[output].state.len()]))
    }

    /// Adjoint sweep: `L^T w`.
    pub fn adjoint_sweep(&self, w: &[f64]) -> Result<Vec<f64>> {
        let lin = self.linearisation()?;
        let (input, output) = (self.input.unwrap(), self.output.unwrap());
        if w.len() != self.records[output].state.len() {
            return Err(Error::DimensionMismatch {
                expected: self.records[output].state.len(),
                got: w.len(),
                context: "adjoint seed",
            });
        }
        let mut bars: Vec<Option<Vec<f64>>> = vec![None; self.records.len()];
        bars[output] = Some(w.to_vec());
        for k in (0..=output).rev() {
            let Linearised::Solve(s) = &lin[k] else {
                continue;
            };
            let Some(mut rhs) = bars[k].take() else {
                continue;
            };
            for &d in &s.constrained {
                rhs[d] = 0.0;
            }
            let lambda = s.adjoint.solve(&rhs)?;
            for (j, b) in &s.couplings {
                let contrib = b.matvec_transpose(&lambda);
                let slot = bars[*j].get_or_insert_with(|| vec![0.0; contrib.len()]);
                slot.iter_mut().zip(&contrib).for_each(|(s, c)| *s -= c);
            }
        }
        Ok(bars[input]
            .take()
            .unwrap_or_else(|| vec![0.0; self.records[input].state.len()]))
    }

    fn functional_seed(&self, functional: &FormExpr) -> Result<Vec<f64>> {
        let out = &self.output()?.unknown;
        for c in functional.coefficients() {
            if &c != out {
                return Err(Error::UnsupportedFunctional(format!(
                    "functional depends on `{}`, which is not the output variable",
                    c.name()
                )));
            }
        }
        if functional.arity()? != 0 {
            return Err(Error::Arity("functional must have arity 0".into()));
        }
        let d = gateaux_derivative(functional, out, &FormExpr::test(out.space()))?;
        let b = Bindings::new().with(out, &self.records[self.output.unwrap()].state)?;
        assemble_vector(&d, out.space(), &b)
    }

    /// Value of a functional of the output variable at the recorded state.
    pub fn evaluate_functional(&self, functional: &FormExpr) -> Result<f64> {
        let out = self.output()?;
        for c in functional.coefficients() {
            if c != out.unknown {
                return Err(Error::UnsupportedFunctional(format!(
                    "functional depends on `{}`, which is not the output variable",
                    c.name()
                )));
            }
        }
        let b = Bindings::new().with(&out.unknown, &out.state)?;
        assemble_scalar(functional, out.unknown.space().mesh(), &b)
    }

    /// `dJ/dm`. The adjoint route costs one reverse sweep; the tangent-linear
    /// route costs one forward sweep per input dof.
    pub fn functional_gradient(&self, functional: &FormExpr, mode: GradientMode) -> Result<Vec<f64>> {
        let seed = self.functional_seed(functional)?;
        match mode {
            GradientMode::Adjoint => self.adjoint_sweep(&seed),
            GradientMode::Tlm => {
                let n = self.input_dim()?;
                let mut e = vec![0.0; n];
                (0..n)
                    .map(|i| {
                        e[i] = 1.0;
                        let col = self.tlm_sweep(&e);
                        e[i] = 0.0;
                        Ok(dot(&seed, &col?))
                    })
                    .collect()
            }
        }
    }

    /// `dJ/dm . dm` through a single tangent-linear or adjoint sweep.
    pub fn functional_derivative(&self, functional: &FormExpr, dm: &[f64], mode: GradientMode) -> Result<f64> {
        let seed = self.functional_seed(functional)?;
        match mode {
            GradientMode::Tlm => Ok(dot(&seed, &self.tlm_sweep(dm)?)),
            GradientMode::Adjoint => Ok(dot(&self.adjoint_sweep(&seed)?, dm)),
        }
    }

    /// Re-solve every record from the stored states of its dependencies and
    /// return the largest relative deviation from the stored solutions.
    pub fn replay(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for rec in &self.records {
            let RecordKind::Solve { residual, bcs, params } = &rec.kind else {
                continue;
            };
            let ctx = self.bindings(&rec.dependencies);
            let guess = self.default_guess(&rec.unknown, &rec.dependencies);
            let (state, _) = newton_solve(residual, &rec.unknown, &guess, &ctx, bcs, params)?;
            let diff: Vec<f64> = state.iter().zip(&rec.state).map(|(a, b)| a - b).collect();
            worst = worst.max(norm2(&diff) / norm2(&rec.state).max(f64::MIN_POSITIVE));
        }
        Ok(worst)
    }

    /// SHA-256 over every recorded state, for immutability checks.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for r in &self.records {
            h.update((r.index as u64).to_le_bytes());
            for v in &r.state {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// Human-readable listing, one record per block, in tape order.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            let role = match (self.input, self.output) {
                (Some(i), _) if i == r.index => " [input]",
                (_, Some(o)) if o == r.index => " [output]",
                _ => "",
            };
            let deps: Vec<&str> = r.dependencies.iter().map(Coefficient::name).collect();
            let _ = writeln!(s, "record {}: {}{}", r.index, r.unknown.name(), role);
            match &r.kind {
                RecordKind::Input => s.push_str("  assign control\n"),
                RecordKind::Constant => s.push_str("  assign constant\n"),
                RecordKind::Solve { residual, bcs, .. } => {
                    let _ = writeln!(s, "  depends on: [{}]", deps.join(", "));
                    let _ = writeln!(s, "  residual: {residual}");
                    for bc in bcs {
                        let _ = writeln!(s, "  bc: {bc}");
                    }
                }
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{mass_matrix, Boundary};
    use crate::mesh::{Element, FunctionSpace, IntervalMesh};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn burgers_like(n_steps: usize) -> (Tape, FunctionSpace) {
        let v = FunctionSpace::scalar(Arc::new(IntervalMesh::unit(10).unwrap()), Element::P2);
        let mut tape = Tape::new();
        let m = Coefficient::new("m", &v);
        tape.record_input(&m, v.interpolate_scalar(|x| (2.0 * std::f64::consts::PI * x).sin()))
            .unwrap();
        let bc = DirichletBC::constant(&v, Boundary::Both, 0.0).unwrap();
        let phi = FormExpr::test(&v);
        let mut prev = m;
        for k in 0..n_steps {
            let u = Coefficient::new(format!("u{}", k + 1), &v);
            let f = (u.expr() - prev.expr()) / 0.05 * &phi
                + u.expr() * u.expr().dx() * &phi
                + 0.01 * u.expr().dx() * phi.dx();
            tape.solve(&u, &f, std::slice::from_ref(&bc), None, &NewtonParams::default())
                .unwrap();
            prev = u;
        }
        tape.seal(&prev).unwrap();
        (tape, v)
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn record_count_and_replay() {
        let (tape, _) = burgers_like(4);
        assert_eq!(tape.len(), 5);
        assert!(tape.replay().unwrap() < 1e-9);
    }

    #[test]
    fn dot_product_identity() {
        let (tape, v) = burgers_like(3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let x = random_vec(&mut rng, v.dof_count());
            let y = random_vec(&mut rng, v.dof_count());
            let lhs = dot(&tape.tlm_sweep(&x).unwrap(), &y);
            let rhs = dot(&x, &tape.adjoint_sweep(&y).unwrap());
            assert!((lhs - rhs).abs() <= 1e-10 * norm2(&x) * norm2(&y));
        }
    }

    #[test]
    fn sweeps_vanish_on_constrained_dofs() {
        let (tape, v) = burgers_like(2);
        let (l, r) = v.boundary_nodes();
        let (dl, dr) = (v.dof(l, 0), v.dof(r, 0));
        let out = tape.tlm_sweep(&vec![1.0; v.dof_count()]).unwrap();
        assert_eq!((out[dl], out[dr]), (0.0, 0.0));
        // The adjoint systems are homogenised too, so a seed supported only
        // on constrained dofs has no effect.
        let mut w = vec![0.0; v.dof_count()];
        w[dl] = 1.0;
        w[dr] = -2.0;
        assert!(tape.adjoint_sweep(&w).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn empty_model_is_identity() {
        let v = FunctionSpace::scalar(Arc::new(IntervalMesh::unit(3).unwrap()), Element::P1);
        let m = Coefficient::new("m", &v);
        let mut tape = Tape::new();
        tape.record_input(&m, vec![0.0; 4]).unwrap();
        tape.seal(&m).unwrap();
        let x = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(tape.tlm_sweep(&x).unwrap(), x);
        assert_eq!(tape.adjoint_sweep(&x).unwrap(), x);
    }

    #[test]
    fn single_linear_solve_matches_dense_oracle() {
        // F(u, m) = <u' , phi'> + <u, phi> - <(1 + x) m, phi>, i.e. A u = B m.
        let v = FunctionSpace::scalar(Arc::new(IntervalMesh::unit(12).unwrap()), Element::P1);
        let m = Coefficient::new("m", &v);
        let u = Coefficient::new("u", &v);
        let phi = FormExpr::test(&v);
        let f = u.expr().dx() * phi.dx() + u.expr() * &phi - (FormExpr::coordinate() + 1.0) * m.expr() * &phi;
        let mut tape = Tape::new();
        tape.record_input(&m, vec![0.5; 13]).unwrap();
        tape.solve(&u, &f, &[], None, &NewtonParams::default()).unwrap();
        tape.seal(&u).unwrap();

        let n = 13;
        let trial = FormExpr::trial(&v);
        let a = assemble_matrix(&(trial.dx() * phi.dx() + trial.clone() * &phi), &v, &v, &Bindings::new()).unwrap();
        let b = assemble_matrix(&((FormExpr::coordinate() + 1.0) * trial * &phi), &v, &v, &Bindings::new()).unwrap();
        let ad = nalgebra::DMatrix::from_row_slice(n, n, &a.to_dense());
        let bd = nalgebra::DMatrix::from_row_slice(n, n, &b.to_dense());
        let l = ad.lu().solve(&bd).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_vec(&mut rng, n);
        let lx = tape.tlm_sweep(&x).unwrap();
        let ltx = tape.adjoint_sweep(&x).unwrap();
        let xv = nalgebra::DVector::from_column_slice(&x);
        let (want, want_t) = (&l * &xv, l.transpose() * &xv);
        for i in 0..n {
            assert!((lx[i] - want[i]).abs() < 1e-12);
            assert!((ltx[i] - want_t[i]).abs() < 1e-12);
        }
        assert_eq!(tape.tlm_sweep(&vec![0.0; n]).unwrap(), vec![0.0; n]);

        // J = int u dx: gradient is B^T A^{-T} (dJ/du).
        let j = u.expr();
        let g = tape.functional_gradient(&j, GradientMode::Adjoint).unwrap();
        let dj = nalgebra::DVector::from_column_slice(&mass_matrix(&v).matvec(&vec![1.0; n]));
        let want = l.transpose() * dj;
        for i in 0..n {
            assert!((g[i] - want[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_modes_agree() {
        let (tape, _) = burgers_like(3);
        let out = tape.output().unwrap().unknown.clone();
        let j = out.expr() * out.expr();
        let ga = tape.functional_gradient(&j, GradientMode::Adjoint).unwrap();
        let gt = tape.functional_gradient(&j, GradientMode::Tlm).unwrap();
        let diff: Vec<f64> = ga.iter().zip(&gt).map(|(a, b)| a - b).collect();
        assert!(norm2(&diff) <= 1e-8 * norm2(&ga));
    }

    #[test]
    fn functional_of_other_variable_is_rejected() {
        let (tape, v) = burgers_like(1);
        let other = Coefficient::new("z", &v);
        assert!(matches!(
            tape.functional_gradient(&other.expr(), GradientMode::Adjoint),
            Err(Error::UnsupportedFunctional(_))
        ));
        let g = tape
            .functional_gradient(&FormExpr::constant(2.0), GradientMode::Adjoint)
            .unwrap();
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sealed_tape_rejects_records_and_keeps_checksum() {
        let (mut tape, v) = burgers_like(2);
        let before = tape.checksum();
        tape.tlm_sweep(&vec![1.0; v.dof_count()]).unwrap();
        tape.adjoint_sweep(&vec![1.0; v.dof_count()]).unwrap();
        assert_eq!(tape.checksum(), before);
        let c = Coefficient::new("late", &v);
        assert!(matches!(
            tape.record_constant(&c, vec![0.0; v.dof_count()]),
            Err(Error::TapeSealed)
        ));
    }

    #[test]
    fn unsealed_tape_refuses_sweeps() {
        let v = FunctionSpace::scalar(Arc::new(IntervalMesh::unit(2).unwrap()), Element::P1);
        let m = Coefficient::new("m", &v);
        let mut tape = Tape::new();
        tape.record_input(&m, vec![0.0; 3]).unwrap();
        assert!(matches!(tape.tlm_sweep(&[0.0; 3]), Err(Error::TapeNotSealed)));
    }

    #[test]
    fn dump_lists_records_in_order() {
        let (tape, _) = burgers_like(2);
        let d = tape.dump();
        let i0 = d.find("record 0: m [input]").unwrap();
        let i2 = d.find("record 2: u2 [output]").unwrap();
        assert!(i0 < i2);
        assert!(d.contains("depends on: [u1]"));
    }
}
