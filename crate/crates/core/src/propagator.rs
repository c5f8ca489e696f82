//! Matrix-free linear operators: the tape propagator and the operator
//! `G = X_I^{-1} L^T X_F L` whose eigenpairs give the singular triplets of `L`.

use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::assembly::mass_matrix;
use crate::error::{Error, Result};
use crate::linalg::{dot, BandedCholesky};
use crate::mesh::FunctionSpace;
use crate::sparse::SparseMatrix;
use crate::tape::Tape;

pub trait LinearOperator: Send + Sync {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Action of the transpose. Operators without one return `UnsupportedExpression`.
    fn apply_hermitian(&self, _y: &[f64]) -> Result<Vec<f64>> {
        Err(Error::UnsupportedExpression("operator has no transpose action".into()))
    }
}

fn check_len(expected: usize, got: usize, context: &'static str) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got, context });
    }
    Ok(())
}

/// `L`: tangent-linear sweep forward, adjoint sweep for the transpose.
#[derive(Debug, Clone)]
pub struct TapePropagator {
    tape: Arc<Tape>,
    in_dim: usize,
    out_dim: usize,
}

impl TapePropagator {
    /// Linearises the tape up front so that later applications only solve.
    pub fn new(tape: Arc<Tape>) -> Result<Self> {
        if !tape.is_sealed() {
            return Err(Error::TapeNotSealed);
        }
        tape.linearise()?;
        Ok(Self {
            in_dim: tape.input_dim()?,
            out_dim: tape.output_dim()?,
            tape,
        })
    }

    pub fn tape(&self) -> &Arc<Tape> {
        &self.tape
    }
}

pub fn propagator_from_tape(tape: Arc<Tape>) -> Result<TapePropagator> {
    TapePropagator::new(tape)
}

impl LinearOperator for TapePropagator {
    fn in_dim(&self) -> usize {
        self.in_dim
    }

    fn out_dim(&self) -> usize {
        self.out_dim
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.tape.tlm_sweep(x)
    }

    fn apply_hermitian(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.tape.adjoint_sweep(y)
    }
}

/// An explicit sparse matrix viewed as an operator.
#[derive(Debug, Clone)]
pub struct MatrixOperator(pub SparseMatrix);

impl LinearOperator for MatrixOperator {
    fn in_dim(&self) -> usize {
        self.0.cols()
    }

    fn out_dim(&self) -> usize {
        self.0.rows()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.0.cols(), x.len(), "operator input")?;
        Ok(self.0.matvec(x))
    }

    fn apply_hermitian(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.0.rows(), y.len(), "operator transpose input")?;
        Ok(self.0.matvec_transpose(y))
    }
}

/// Dense matrix of an operator, built one column per basis vector.
pub fn dense_matrix(op: &dyn LinearOperator) -> Result<DMatrix<f64>> {
    let (m, n) = (op.out_dim(), op.in_dim());
    let mut out = DMatrix::zeros(m, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = op.apply(&e)?;
        check_len(m, col.len(), "operator output")?;
        out.column_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    Ok(out)
}

/// Largest operator size for which a dense dump is allowed.
pub const DENSE_DUMP_LIMIT: usize = 200;

/// Write the dense matrix of `op` as coordinate-list text.
pub fn write_dense_dump(op: &dyn LinearOperator, w: impl Write) -> Result<()> {
    if op.in_dim() > DENSE_DUMP_LIMIT || op.out_dim() > DENSE_DUMP_LIMIT {
        return Err(Error::InvalidParams(format!(
            "dense dump is limited to {DENSE_DUMP_LIMIT} dofs"
        )));
    }
    let d = dense_matrix(op)?;
    let mut data = Vec::with_capacity(d.len());
    for r in 0..d.nrows() {
        data.extend(d.row(r).iter().copied());
    }
    SparseMatrix::from_dense(d.nrows(), d.ncols(), &data).write_coo(w)?;
    Ok(())
}

/// A generalised symmetric eigenproblem `G v = mu v`, with `G` self-adjoint
/// in the inner product `<x, y>_B = x^T B y`.
pub trait SymmetricProblem {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;
    /// `B x`.
    fn apply_inner(&self, x: &[f64]) -> Vec<f64>;
}

/// `G = X_I^{-1} L^T X_F L`.
pub struct GstOperator {
    l: Arc<dyn LinearOperator>,
    x_i: SparseMatrix,
    x_f: SparseMatrix,
    x_i_factor: BandedCholesky,
}

impl std::fmt::Debug for GstOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GstOperator")
            .field("in_dim", &self.l.in_dim())
            .field("out_dim", &self.l.out_dim())
            .finish()
    }
}

impl GstOperator {
    /// Both inner-product matrices must be symmetric positive-definite;
    /// `X_I` is factorised once here.
    pub fn new(l: Arc<dyn LinearOperator>, x_i: SparseMatrix, x_f: SparseMatrix) -> Result<Self> {
        check_len(l.in_dim(), x_i.rows(), "input inner product")?;
        check_len(l.in_dim(), x_i.cols(), "input inner product")?;
        check_len(l.out_dim(), x_f.rows(), "output inner product")?;
        check_len(l.out_dim(), x_f.cols(), "output inner product")?;
        let x_i_factor = BandedCholesky::factor(&x_i)?;
        BandedCholesky::factor(&x_f)?;
        Ok(Self { l, x_i, x_f, x_i_factor })
    }

    /// Mass matrices of the input and output spaces unless given explicitly.
    pub fn with_defaults(
        l: Arc<dyn LinearOperator>,
        input_space: &FunctionSpace,
        output_space: &FunctionSpace,
        x_i: Option<SparseMatrix>,
        x_f: Option<SparseMatrix>,
    ) -> Result<Self> {
        let x_i = x_i.unwrap_or_else(|| mass_matrix(input_space));
        let x_f = x_f.unwrap_or_else(|| mass_matrix(output_space));
        Self::new(l, x_i, x_f)
    }

    pub fn propagator(&self) -> &Arc<dyn LinearOperator> {
        &self.l
    }

    pub fn x_i(&self) -> &SparseMatrix {
        &self.x_i
    }

    pub fn x_f(&self) -> &SparseMatrix {
        &self.x_f
    }

    pub fn input_norm(&self, x: &[f64]) -> f64 {
        dot(x, &self.x_i.matvec(x)).max(0.0).sqrt()
    }

    pub fn output_norm(&self, y: &[f64]) -> f64 {
        dot(y, &self.x_f.matvec(y)).max(0.0).sqrt()
    }

    /// `X_I^{-1} L^T X_F L x`, composed right to left.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.l.in_dim(), x.len(), "GST operator input")?;
        let lx = self.l.apply(x)?;
        let w = self.x_f.matvec(&lx);
        let ltw = self.l.apply_hermitian(&w)?;
        self.x_i_factor.solve(&ltw)
    }
}

impl SymmetricProblem for GstOperator {
    fn dim(&self) -> usize {
        self.l.in_dim()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        GstOperator::apply(self, x)
    }

    fn apply_inner(&self, x: &[f64]) -> Vec<f64> {
        self.x_i.matvec(x)
    }
}
