//! Tangent-linear and adjoint models derived from a tape of variational
//! solves, and matrix-free generalised stability analysis built on them.
//!
//! A forward model is a sequence of nonlinear variational problems written in
//! the small form language of [`forms`]. Each solve is recorded on a
//! [`tape::Tape`] together with its symbolic residual. Differentiating those
//! residuals gives the tangent-linear and adjoint sweeps, which act as the
//! propagator `L` and its transpose. [`eigensolver`] finds the leading
//! singular triplets of `L` in mass-matrix norms without forming it.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assembly;
pub mod cli;
pub mod config;
pub mod eigensolver;
pub mod error;
pub mod forms;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod models;
pub mod propagator;
pub mod solvers;
pub mod sparse;
pub mod tape;
pub mod verification;

pub use assembly::{assemble, mass_matrix, Boundary, DirichletBC};
pub use config::Config;
pub use eigensolver::{gst_from_tape, singular_triplets, LanczosParams, SingularTriplet};
pub use error::{Error, Result};
pub use forms::{adjoint_form, gateaux_derivative, Bindings, Coefficient, FormExpr};
pub use mesh::{Element, FunctionSpace, IntervalMesh};
pub use models::{ForwardResult, ModelSpec};
pub use propagator::{GstOperator, LinearOperator, TapePropagator};
pub use solvers::{newton_solve, NewtonParams};
pub use tape::{GradientMode, Tape};
