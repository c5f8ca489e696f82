//! Checks on derived models: Taylor remainders, a dense SVD oracle for the
//! propagator, the adjoint dot-product identity and nonlinear growth.

use std::fmt::Write as _;
use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assembly::mass_matrix;
use crate::eigensolver::SingularTriplet;
use crate::error::{Error, Result};
use crate::forms::FormExpr;
use crate::linalg::{dot, norm2, sub, weighted_norm};
use crate::mesh::FunctionSpace;
use crate::models::{ForwardResult, ModelSpec};
use crate::propagator::{dense_matrix, LinearOperator, TapePropagator, DENSE_DUMP_LIMIT};
use crate::sparse::SparseMatrix;
use crate::tape::{GradientMode, Tape};

/// Pseudorandom vector with entries from `U(-1, 1)`.
pub fn random_direction(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// `J(u) = integral of |u|^2`, summed over components.
pub fn squared_l2(u: &FormExpr, space: &FunctionSpace) -> FormExpr {
    if space.components() == 1 {
        return u * u;
    }
    FormExpr::sum((0..space.components()).map(|i| u.comp(i) * u.comp(i)))
}

/// Functional of the output of a run, built from the symbol of that output.
/// Each forward run has its own output symbol, so the functional is rebuilt
/// per run.
pub fn functional_on(tape: &Tape, functional: &dyn Fn(&FormExpr) -> FormExpr) -> Result<FormExpr> {
    Ok(functional(&tape.output()?.unknown.expr()))
}

fn evaluate(result: &ForwardResult, functional: &dyn Fn(&FormExpr) -> FormExpr) -> Result<f64> {
    result.tape.evaluate_functional(&functional_on(&result.tape, functional)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct TaylorReport {
    pub mode: GradientMode,
    pub functional_value: f64,
    pub h_values: Vec<f64>,
    pub remainders_first: Vec<f64>,
    pub remainders_corrected: Vec<f64>,
    /// `log2` of the ratio of adjacent rows; one entry fewer than `h_values`.
    pub orders_first: Vec<f64>,
    pub orders_corrected: Vec<f64>,
    /// Rows whose corrected remainder is below `1e-12 |J|`.
    pub at_floor: Vec<bool>,
}

impl TaylorReport {
    /// Orders between adjacent rows that are both above the rounding floor.
    pub fn asserted_orders_corrected(&self) -> Vec<f64> {
        self.orders_corrected
            .iter()
            .enumerate()
            .filter(|(k, _)| !self.at_floor[*k] && !self.at_floor[k + 1])
            .map(|(_, o)| *o)
            .collect()
    }

    /// True when every first-order order lies in `first` and every asserted
    /// corrected order lies in `corrected`.
    pub fn orders_within(&self, first: (f64, f64), corrected: (f64, f64)) -> bool {
        let inside = |o: f64, (lo, hi): (f64, f64)| o >= lo && o <= hi;
        let asserted = self.asserted_orders_corrected();
        self.orders_first.iter().all(|&o| inside(o, first))
            && !asserted.is_empty()
            && asserted.iter().all(|&o| inside(o, corrected))
    }

    /// Fixed-width table: h, remainder, order, corrected remainder, order.
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:>10}  {:>12}  {:>7}  {:>12}  {:>7}\n",
            "h", "|dJ|", "order", "|dJ - h g|", "order"
        );
        for k in 0..self.h_values.len() {
            let (o1, o2) = if k == 0 {
                (String::new(), String::new())
            } else {
                (
                    format!("{:.4}", self.orders_first[k - 1]),
                    format!("{:.4}", self.orders_corrected[k - 1]),
                )
            };
            let floor = if self.at_floor[k] { " (floor)" } else { "" };
            let _ = writeln!(
                s,
                "{:>10.3e}  {:>12.4e}  {:>7}  {:>12.4e}  {:>7}{floor}",
                self.h_values[k], self.remainders_first[k], o1, self.remainders_corrected[k], o2
            );
        }
        s
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["h", "remainder_first", "order_first", "remainder_corrected", "order_corrected", "at_floor"])?;
        for k in 0..self.h_values.len() {
            let order = |v: &[f64]| if k == 0 { String::new() } else { format!("{:.17e}", v[k - 1]) };
            out.write_record([
                format!("{:.17e}", self.h_values[k]),
                format!("{:.17e}", self.remainders_first[k]),
                order(&self.orders_first),
                format!("{:.17e}", self.remainders_corrected[k]),
                order(&self.orders_corrected),
                self.at_floor[k].to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Taylor remainder test of `J(u_T(m))` at the model's default control, along
/// `dm`, for `h = h0 2^-k`, `k = 0 .. n_levels`.
pub fn taylor_test(
    model: &ModelSpec,
    functional: &dyn Fn(&FormExpr) -> FormExpr,
    mode: GradientMode,
    dm: &[f64],
    h0: f64,
    n_levels: usize,
) -> Result<TaylorReport> {
    if n_levels < 2 {
        return Err(Error::InvalidParams("a Taylor test needs at least two levels".into()));
    }
    if !(h0 > 0.0) {
        return Err(Error::InvalidParams("h0 must be positive".into()));
    }
    if norm2(dm) == 0.0 {
        return Err(Error::InvalidParams("perturbation direction is zero".into()));
    }
    let m0 = &model.initial_condition;
    let base = model.run_from(m0)?;
    let j0 = evaluate(&base, functional)?;
    let dj = base
        .tape
        .functional_derivative(&functional_on(&base.tape, functional)?, dm, mode)?;

    let mut h_values = Vec::with_capacity(n_levels);
    let mut first = Vec::with_capacity(n_levels);
    let mut corrected = Vec::with_capacity(n_levels);
    for k in 0..n_levels {
        let h = h0 * 0.5f64.powi(k as i32);
        let m: Vec<f64> = m0.iter().zip(dm).map(|(a, d)| a + h * d).collect();
        let jh = evaluate(&model.run_from(&m)?, functional)?;
        h_values.push(h);
        first.push((jh - j0).abs());
        corrected.push((jh - j0 - h * dj).abs());
    }
    let orders = |r: &[f64]| r.windows(2).map(|w| (w[0] / w[1]).log2()).collect::<Vec<_>>();
    let floor = 1e-12 * j0.abs();
    Ok(TaylorReport {
        mode,
        functional_value: j0,
        orders_first: orders(&first),
        orders_corrected: orders(&corrected),
        at_floor: corrected.iter().map(|&r| r < floor).collect(),
        h_values,
        remainders_first: first,
        remainders_corrected: corrected,
    })
}

/// Relative singular value below which [`dense_oracle_check`] skips the
/// left-vector comparison.
pub const VECTOR_CUTOFF: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub probes: usize,
    pub max_probe_error: f64,
    pub vectors_checked: usize,
    pub max_vector_error: f64,
    /// Euclidean singular values of the dense propagator, descending.
    pub singular_values: Vec<f64>,
}

/// Build `L` densely, take its full SVD and compare `U S V^T t` with the
/// matrix-free `L t` on `n_probes` vectors with `U(0, 1)` entries, and each
/// left vector `u` with `L v / sigma`.
///
/// Rounding in `L v` is of order `eps_mach * sigma_max`, so `L v / sigma`
/// carries an error near `eps_mach * sigma_max / sigma`. Left vectors are
/// therefore compared only for `sigma > VECTOR_CUTOFF * sigma_max`; the
/// rest are below what double precision resolves at tolerance `eps`.
pub fn dense_oracle_check(op: &dyn LinearOperator, n_probes: usize, eps: f64, seed: u64) -> Result<OracleReport> {
    if op.in_dim() > DENSE_DUMP_LIMIT || op.out_dim() > DENSE_DUMP_LIMIT {
        return Err(Error::InvalidParams(format!(
            "dense oracle is limited to {DENSE_DUMP_LIMIT} dofs"
        )));
    }
    let l = dense_matrix(op)?;
    let svd = l.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested V^T");
    let sigma = &svd.singular_values;
    let rebuilt = u * DMatrix::from_diagonal(sigma) * vt;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_probe_error = 0.0f64;
    for probe in 0..n_probes {
        let t: Vec<f64> = (0..op.in_dim()).map(|_| rng.random_range(0.0..1.0)).collect();
        let dense = &rebuilt * DVector::from_column_slice(&t);
        let free = op.apply(&t)?;
        let err = norm2(&sub(dense.as_slice(), &free));
        max_probe_error = max_probe_error.max(err);
        if !(err < eps) {
            return Err(Error::OracleMismatch {
                probe,
                error: err,
                tolerance: eps,
                what: "U S V^T t against L t",
            });
        }
    }

    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
    let sigma_max = order.first().map_or(0.0, |&i| sigma[i]);
    let mut max_vector_error = 0.0f64;
    let mut vectors_checked = 0;
    for (rank, &i) in order.iter().enumerate() {
        let s = sigma[i];
        if s <= 1e-10 || s <= VECTOR_CUTOFF * sigma_max {
            continue;
        }
        let v: Vec<f64> = vt.row(i).iter().copied().collect();
        let lv = op.apply(&v)?;
        let predicted: Vec<f64> = lv.iter().map(|x| x / s).collect();
        let err = norm2(&sub(u.column(i).as_slice(), &predicted));
        max_vector_error = max_vector_error.max(err);
        vectors_checked += 1;
        if !(err < eps) {
            return Err(Error::OracleMismatch {
                probe: rank,
                error: err,
                tolerance: eps,
                what: "left vector u against L v / sigma",
            });
        }
    }
    Ok(OracleReport {
        probes: n_probes,
        max_probe_error,
        vectors_checked,
        max_vector_error,
        singular_values: order.iter().map(|&i| sigma[i]).collect(),
    })
}

/// Singular values and right vectors of `L` measured in the `X_I`/`X_F`
/// norms, from a dense factorisation. Right vectors are `X_I`-orthonormal.
#[derive(Debug, Clone)]
pub struct DenseWeightedSvd {
    pub sigma: Vec<f64>,
    pub v: Vec<Vec<f64>>,
}

pub fn dense_weighted_svd(op: &dyn LinearOperator, x_i: &SparseMatrix, x_f: &SparseMatrix) -> Result<DenseWeightedSvd> {
    let l = dense_matrix(op)?;
    let chol = |m: &SparseMatrix, what: &str| {
        let d = DMatrix::from_row_slice(m.rows(), m.cols(), &m.to_dense());
        d.cholesky()
            .map(|c| c.l().transpose())
            .ok_or_else(|| Error::InvalidInnerProduct(format!("{what} is not positive-definite")))
    };
    let r_i = chol(x_i, "X_I")?;
    let r_f = chol(x_f, "X_F")?;
    let r_i_inv = r_i
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidInnerProduct("X_I factor is singular".into()))?;
    let weighted = &r_f * &l * &r_i_inv;
    let svd = weighted.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let v = order
        .iter()
        .map(|&i| {
            let w = DVector::from_iterator(vt.ncols(), vt.row(i).iter().copied());
            (&r_i_inv * w).iter().copied().collect()
        })
        .collect();
    Ok(DenseWeightedSvd {
        sigma: order.iter().map(|&i| svd.singular_values[i]).collect(),
        v,
    })
}

/// `<a, b>_X / (||a||_X ||b||_X)`.
pub fn correlation(a: &[f64], b: &[f64], x: &SparseMatrix) -> f64 {
    let xb = x.matvec(b);
    dot(a, &xb) / (weighted_norm(x, a) * weighted_norm(x, b))
}

/// Largest principal angle between the span of the smaller of two
/// `X`-orthonormal sets and the span of the larger one.
pub fn subspace_angle(a: &[Vec<f64>], b: &[Vec<f64>], x: &SparseMatrix) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let xb: Vec<Vec<f64>> = b.iter().map(|v| x.matvec(v)).collect();
    let m = DMatrix::from_fn(a.len(), b.len(), |i, j| dot(&a[i], &xb[j]));
    let cos_min = m.singular_values().iter().copied().fold(f64::INFINITY, f64::min).min(1.0);
    (1.0 - cos_min * cos_min).max(0.0).sqrt().asin()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DotProductReport {
    pub pairs: usize,
    /// Largest `|<Lx, y> - <x, L^T y>| / (||x|| ||y||)`.
    pub max_relative_error: f64,
}

/// The adjoint identity `<L x, y> = <x, L^T y>` on random pairs.
pub fn dot_product_test(op: &dyn LinearOperator, pairs: usize, seed: u64) -> Result<DotProductReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let x: Vec<f64> = (0..op.in_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..op.out_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lhs = dot(&op.apply(&x)?, &y);
        let rhs = dot(&x, &op.apply_hermitian(&y)?);
        worst = worst.max((lhs - rhs).abs() / (norm2(&x) * norm2(&y)));
    }
    Ok(DotProductReport {
        pairs,
        max_relative_error: worst,
    })
}

/// Relative difference between the tangent-linear and adjoint gradients of
/// `functional`. The full gradient is compared for inputs up to
/// `DENSE_DUMP_LIMIT` dofs, otherwise directional derivatives along
/// `directions` random vectors.
pub fn gradient_mode_agreement(
    tape: &Tape,
    functional: &dyn Fn(&FormExpr) -> FormExpr,
    directions: usize,
    seed: u64,
) -> Result<f64> {
    let j = functional_on(tape, functional)?;
    let n = tape.input_dim()?;
    if n <= DENSE_DUMP_LIMIT {
        let g_tlm = tape.functional_gradient(&j, GradientMode::Tlm)?;
        let g_adj = tape.functional_gradient(&j, GradientMode::Adjoint)?;
        let scale = norm2(&g_adj).max(f64::MIN_POSITIVE);
        return Ok(norm2(&sub(&g_tlm, &g_adj)) / scale);
    }
    let mut worst = 0.0f64;
    for k in 0..directions {
        let dm = random_direction(n, seed.wrapping_add(k as u64));
        let a = tape.functional_derivative(&j, &dm, GradientMode::Tlm)?;
        let b = tape.functional_derivative(&j, &dm, GradientMode::Adjoint)?;
        worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

/// Perturbation size `1e-7 ||m_0||_{X_I}` used for growth checks.
pub fn default_amplitude(model: &ModelSpec) -> f64 {
    1e-7 * weighted_norm(&mass_matrix(&model.input_space), &model.initial_condition)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GrowthCheck {
    pub predicted: f64,
    pub observed: f64,
}

impl GrowthCheck {
    pub fn relative_error(&self) -> f64 {
        (self.observed / self.predicted - 1.0).abs()
    }
}

/// Compare `sigma` with the growth of `amplitude * v` through the nonlinear
/// model, both norms being the mass norms of the model spaces.
pub fn nonlinear_growth_check(model: &ModelSpec, triplet: &SingularTriplet, amplitude: f64) -> Result<GrowthCheck> {
    let x_i = mass_matrix(&model.input_space);
    let x_f = mass_matrix(&model.output_space);
    let base = model.run()?;
    let m: Vec<f64> = model
        .initial_condition
        .iter()
        .zip(&triplet.v)
        .map(|(a, v)| a + amplitude * v)
        .collect();
    let perturbed = model.run_from(&m)?;
    let observed = weighted_norm(&x_f, &sub(&perturbed.output, &base.output)) / (amplitude * weighted_norm(&x_i, &triplet.v));
    Ok(GrowthCheck {
        predicted: triplet.sigma,
        observed,
    })
}

/// `(t_k, ||du(t_k)|| / ||du(0)||)` for the nonlinear evolution of the
/// perturbation `amplitude * v` over `n_steps` steps.
pub fn growth_curve(model: &ModelSpec, v: &[f64], amplitude: f64, n_steps: usize) -> Result<Vec<(f64, f64)>> {
    let model = model.with_steps(n_steps);
    let x_i = mass_matrix(&model.input_space);
    let x_f = mass_matrix(&model.output_space);
    let base = model.run()?;
    let m: Vec<f64> = model.initial_condition.iter().zip(v).map(|(a, d)| a + amplitude * d).collect();
    let perturbed = model.run_from(&m)?;
    let start = amplitude * weighted_norm(&x_i, v);
    Ok(base
        .trajectory
        .iter()
        .zip(&perturbed.trajectory)
        .enumerate()
        .map(|(k, (a, b))| {
            let norm = weighted_norm(&x_f, &sub(b, a));
            (k as f64 * model.dt, norm / start)
        })
        .collect())
}

/// True when the largest sample lies strictly inside the curve and both ends
/// are below it.
pub fn has_interior_maximum(curve: &[(f64, f64)]) -> bool {
    let Some((imax, _)) = curve.iter().enumerate().max_by(|a, b| a.1 .1.total_cmp(&b.1 .1)) else {
        return false;
    };
    imax > 0 && imax + 1 < curve.len()
}

/// Least-squares line `y = a + b x`: returns `(a, b, R^2)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    (intercept, slope, r2)
}

/// Settings of [`run_suite`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteSettings {
    /// Largest Taylor step; later steps halve it.
    pub taylor_h0: f64,
    pub taylor_levels: usize,
    /// Random pairs for the adjoint dot-product test.
    pub dot_pairs: usize,
    /// Random `U(0, 1)` probes for the dense oracle.
    pub oracle_probes: usize,
    pub oracle_tol: f64,
}

impl Default for SuiteSettings {
    fn default() -> Self {
        Self {
            taylor_h0: 1e-3,
            taylor_levels: 5,
            dot_pairs: 100,
            oracle_probes: 100,
            oracle_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub model: String,
    pub dot_product: DotProductReport,
    pub gradient_agreement: f64,
    pub taylor: Vec<TaylorReport>,
    pub oracle: Option<OracleReport>,
    pub passed: bool,
    pub failures: Vec<String>,
}

/// Dot-product test, gradient-mode agreement, Taylor tests in both modes
/// and, for small models, the dense oracle. `J` is the squared L2 norm of
/// the output.
pub fn run_suite(model: &ModelSpec, settings: &SuiteSettings, seed: u64) -> Result<SuiteReport> {
    let space = model.output_space.clone();
    let functional = move |u: &FormExpr| squared_l2(u, &space);
    let base = model.run()?;
    let op = TapePropagator::new(Arc::clone(&base.tape))?;
    let mut failures = Vec::new();

    let dot_product = dot_product_test(&op, settings.dot_pairs, seed)?;
    if dot_product.max_relative_error > 1e-10 {
        failures.push(format!("dot product error {:.3e}", dot_product.max_relative_error));
    }
    let gradient_agreement = gradient_mode_agreement(&base.tape, &functional, 5, seed)?;
    if gradient_agreement > 1e-8 {
        failures.push(format!("gradient modes differ by {gradient_agreement:.3e}"));
    }

    let dm = random_direction(model.input_space.dof_count(), seed);
    let mut taylor = Vec::new();
    for mode in [GradientMode::Tlm, GradientMode::Adjoint] {
        let report = taylor_test(model, &functional, mode, &dm, settings.taylor_h0, settings.taylor_levels)?;
        let asserted = report.asserted_orders_corrected();
        // A linear model makes J exactly quadratic in m, and then the
        // corrected remainder can sit at the floor on every row.
        if asserted.iter().any(|&o| o < 1.9) {
            failures.push(format!("{mode:?} corrected Taylor orders {asserted:?}"));
        }
        taylor.push(report);
    }

    let oracle = if op.in_dim() <= DENSE_DUMP_LIMIT && op.out_dim() <= DENSE_DUMP_LIMIT {
        match dense_oracle_check(&op, settings.oracle_probes, settings.oracle_tol, seed) {
            Ok(r) => Some(r),
            Err(e @ Error::OracleMismatch { .. }) => {
                failures.push(e.to_string());
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    Ok(SuiteReport {
        model: model.name.clone(),
        dot_product,
        gradient_agreement,
        taylor,
        oracle,
        passed: failures.is_empty(),
        failures,
    })
}
