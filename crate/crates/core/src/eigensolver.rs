//! Thick-restart Lanczos for operators self-adjoint in a `B` inner product,
//! and the singular triplets of a propagator built on top of it.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot};
use crate::propagator::{GstOperator, LinearOperator, SymmetricProblem, TapePropagator};
use crate::sparse::SparseMatrix;
use crate::tape::Tape;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LanczosParams {
    pub nev: usize,
    /// Subspace size; `None` means `max(2 nev + 2, 12)`.
    pub ncv: Option<usize>,
    pub tol: f64,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for LanczosParams {
    fn default() -> Self {
        Self {
            nev: 1,
            ncv: None,
            tol: 1e-8,
            max_restarts: 200,
            seed: 0,
        }
    }
}

impl LanczosParams {
    pub fn with_nev(nev: usize) -> Self {
        Self {
            nev,
            ..Self::default()
        }
    }

    pub fn subspace_size(&self) -> usize {
        self.ncv.unwrap_or((2 * self.nev + 2).max(12))
    }

    pub fn validate(&self) -> Result<()> {
        if self.nev == 0 {
            return Err(Error::InvalidParams("nev must be at least 1".into()));
        }
        if self.subspace_size() <= self.nev {
            return Err(Error::InvalidParams("ncv must exceed nev".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParams("tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub mu: f64,
    pub vector: Vec<f64>,
    /// `||G v - mu v||_B`.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct LanczosReport {
    /// Sorted by `mu`, descending; `B`-orthonormal vectors.
    pub pairs: Vec<EigenPair>,
    pub restarts: usize,
    pub operator_applications: usize,
    /// Largest `|<v_i, v_j>_B - delta_ij|` over the returned vectors.
    pub orthogonality_loss: f64,
}

const MAX_UNPRODUCTIVE_BREAKDOWNS: usize = 3;

struct Basis {
    v: Vec<Vec<f64>>,
    bv: Vec<Vec<f64>>,
}

impl Basis {
    fn new() -> Self {
        Self { v: Vec::new(), bv: Vec::new() }
    }

    fn len(&self) -> usize {
        self.v.len()
    }

    fn push(&mut self, v: Vec<f64>, bv: Vec<f64>) {
        self.v.push(v);
        self.bv.push(bv);
    }
}

/// Two passes of classical Gram–Schmidt in the `B` inner product against the
/// locked vectors and the active basis. Returns the accumulated coefficients
/// against the active basis.
fn orthogonalise(w: &mut [f64], locked: &Basis, active: &Basis) -> Vec<f64> {
    let mut h = vec![0.0; active.len()];
    for _ in 0..2 {
        let cl: Vec<f64> = locked.bv.iter().map(|b| dot(b, w)).collect();
        let ca: Vec<f64> = active.bv.iter().map(|b| dot(b, w)).collect();
        for (c, v) in cl.iter().zip(&locked.v) {
            axpy(-c, v, w);
        }
        for (i, (c, v)) in ca.iter().zip(&active.v).enumerate() {
            axpy(-c, v, w);
            h[i] += c;
        }
    }
    h
}

fn b_norm<P: SymmetricProblem + ?Sized>(problem: &P, x: &[f64]) -> (f64, Vec<f64>) {
    let bx = problem.apply_inner(x);
    (dot(x, &bx).max(0.0).sqrt(), bx)
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn combine(basis: &Basis, y: &[f64], n: usize) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for (c, v) in y.iter().zip(&basis.v) {
        axpy(*c, v, &mut x);
    }
    x
}

/// Leading eigenpairs of `problem` by thick-restart Lanczos with full
/// reorthogonalisation and locking.
///
/// A pair is accepted when `||G v - mu v||_B <= tol * max(|mu|, 1)`, using the
/// residual estimate from the projected problem. When the Krylov space
/// becomes invariant, its Ritz pairs are exact; they are locked and the
/// iteration restarts from a fresh random vector until a restart finds
/// nothing above the current `nev`-th eigenvalue, so that multiplicities
/// hidden from the first start vector are recovered.
pub fn lanczos_thick_restart<P: SymmetricProblem + ?Sized>(problem: &P, params: &LanczosParams) -> Result<LanczosReport> {
    params.validate()?;
    let n = problem.dim();
    if params.nev > n {
        return Err(Error::InvalidParams(format!(
            "nev = {} exceeds the problem dimension {n}",
            params.nev
        )));
    }
    let ncv = params.subspace_size().min(n);
    let nev = params.nev;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut locked = Basis::new();
    let mut locked_info: Vec<(f64, f64)> = Vec::new();
    let mut t = DMatrix::<f64>::zeros(ncv, ncv);
    let mut applications = 0usize;
    let mut restarts = 0usize;
    let mut unproductive = 0usize;
    let mut checking = false;
    let mut best: Vec<EigenPair>;

    // Fresh unit start vector, B-orthogonal to everything locked.
    let fresh = |rng: &mut ChaCha8Rng, locked: &Basis| -> Option<(Vec<f64>, Vec<f64>)> {
        for _ in 0..3 {
            let mut r = random_unit(rng, n);
            let (r0, _) = b_norm(problem, &r);
            orthogonalise(&mut r, locked, &Basis::new());
            let (rn, br) = b_norm(problem, &r);
            if rn > 1e-8 * r0 {
                return Some((r.iter().map(|x| x / rn).collect(), br.iter().map(|x| x / rn).collect()));
            }
        }
        None
    };
    let exhausted = |locked: &Basis| Error::Breakdown {
        converged: locked.len().min(nev),
        requested: nev,
    };

    let mut active = Basis::new();
    let (v0, bv0) = fresh(&mut rng, &locked).ok_or_else(|| exhausted(&locked))?;
    active.push(v0, bv0);

    loop {
        let m_max = ncv.saturating_sub(locked.len()).max(1);
        let mut j = active.len() - 1;
        let (f, beta, breakdown) = loop {
            let mut w = problem.apply(&active.v[j])?;
            applications += 1;
            let (wnorm, _) = b_norm(problem, &w);
            let h = orthogonalise(&mut w, &locked, &active);
            for (i, hi) in h.iter().enumerate().take(j + 1) {
                t[(i, j)] = *hi;
                t[(j, i)] = *hi;
            }
            let (beta, bw) = b_norm(problem, &w);
            if beta < 1e-14 * wnorm.max(1.0) || locked.len() + active.len() == n {
                break (w, 0.0, true);
            }
            if active.len() == m_max {
                break (w, beta, false);
            }
            active.push(w.iter().map(|x| x / beta).collect(), bw.iter().map(|x| x / beta).collect());
            j += 1;
        };
        let m = active.len();
        let eig = SymmetricEigen::new(t.view((0, 0), (m, m)).into_owned());
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let ritz = |i: usize| -> (f64, Vec<f64>, f64) {
            let y: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            let est = (beta * y[m - 1]).abs();
            (eig.eigenvalues[i], y, est)
        };

        // Eigenvalues above this are still wanted once nev pairs are locked.
        let threshold = {
            let mut mus: Vec<f64> = locked_info.iter().map(|p| p.0).collect();
            mus.sort_by(|a, b| b.total_cmp(a));
            if mus.len() >= nev {
                mus[nev - 1]
            } else {
                f64::INFINITY
            }
        };
        let missing = nev.saturating_sub(locked.len());
        let mut to_lock = Vec::new();
        let mut unconverged = Vec::new();
        let mut any_wanted = false;
        // Only a leading run of converged pairs is locked, so that a pair is
        // never accepted ahead of a larger one that is still converging.
        let mut leading = true;
        for (rank, &i) in order.iter().enumerate() {
            let (theta, _, est) = ritz(i);
            let margin = params.tol * theta.abs().max(1.0);
            let wanted = rank < missing || theta > threshold + margin;
            any_wanted |= wanted;
            leading &= wanted && est <= margin;
            if leading {
                to_lock.push(i);
            } else {
                unconverged.push(i);
            }
        }

        best = order
            .iter()
            .take(missing.max(1))
            .map(|&i| {
                let (mu, y, residual) = ritz(i);
                EigenPair {
                    mu,
                    vector: combine(&active, &y, n),
                    residual,
                }
            })
            .collect();

        if checking && !any_wanted {
            break;
        }

        for &i in &to_lock {
            let (theta, y, est) = ritz(i);
            let mut x = combine(&active, &y, n);
            orthogonalise(&mut x, &locked, &Basis::new());
            let (xn, bx) = b_norm(problem, &x);
            locked.push(x.iter().map(|v| v / xn).collect(), bx.iter().map(|v| v / xn).collect());
            locked_info.push((theta, est));
        }

        if locked.len() >= nev && !breakdown && !checking {
            break;
        }

        restarts += 1;
        if restarts > params.max_restarts {
            break;
        }

        if breakdown {
            if to_lock.is_empty() {
                unproductive += 1;
                if unproductive > MAX_UNPRODUCTIVE_BREAKDOWNS {
                    return Err(exhausted(&locked));
                }
            }
            checking = locked.len() >= nev || checking;
            t.fill(0.0);
            active = Basis::new();
            match fresh(&mut rng, &locked) {
                Some((v, bv)) => active.push(v, bv),
                None if locked.len() >= nev => break,
                None => return Err(exhausted(&locked)),
            }
            continue;
        }

        // Thick restart: keep the leading unconverged Ritz vectors and append
        // the normalised residual. The arrowhead coupling between them is
        // recovered when the residual direction is expanded next.
        let m_next = ncv.saturating_sub(locked.len()).max(1);
        let still = nev.saturating_sub(locked.len()).max(1);
        let keep = (still + m_next.saturating_sub(still) / 2)
            .min(m_next.saturating_sub(1))
            .min(unconverged.len());
        let mut next = Basis::new();
        t.fill(0.0);
        for (slot, &i) in unconverged.iter().take(keep).enumerate() {
            let (theta, y, _) = ritz(i);
            let mut x = combine(&active, &y, n);
            orthogonalise(&mut x, &locked, &next);
            let (xn, bx) = b_norm(problem, &x);
            next.push(x.iter().map(|v| v / xn).collect(), bx.iter().map(|v| v / xn).collect());
            t[(slot, slot)] = theta;
        }
        let mut r: Vec<f64> = f.iter().map(|x| x / beta).collect();
        orthogonalise(&mut r, &locked, &next);
        let (rn, br) = b_norm(problem, &r);
        if rn > 1e-8 {
            next.push(r.iter().map(|x| x / rn).collect(), br.iter().map(|x| x / rn).collect());
        } else {
            let Some((mut v, _)) = fresh(&mut rng, &locked) else {
                return Err(exhausted(&locked));
            };
            orthogonalise(&mut v, &locked, &next);
            let (vn, bv) = b_norm(problem, &v);
            next.push(v.iter().map(|x| x / vn).collect(), bv.iter().map(|x| x / vn).collect());
        }
        active = next;
    }

    let mut pairs = assemble_pairs(&locked, &locked_info);
    pairs.sort_by(|a, b| b.mu.total_cmp(&a.mu));
    if pairs.len() < nev {
        pairs.extend(best);
        pairs.sort_by(|a, b| b.mu.total_cmp(&a.mu));
        return Err(Error::EigenNonConvergence {
            restarts,
            best: Box::new(pairs),
        });
    }
    pairs.truncate(nev);
    let mut loss = 0.0f64;
    for (i, p) in pairs.iter().enumerate() {
        let bp = problem.apply_inner(&p.vector);
        for (j, q) in pairs.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            loss = loss.max((dot(&bp, &q.vector) - target).abs());
        }
    }
    Ok(LanczosReport {
        pairs,
        restarts,
        operator_applications: applications,
        orthogonality_loss: loss,
    })
}

fn assemble_pairs(locked: &Basis, info: &[(f64, f64)]) -> Vec<EigenPair> {
    locked
        .v
        .iter()
        .zip(info)
        .map(|(v, &(mu, residual))| EigenPair {
            mu,
            vector: v.clone(),
            residual,
        })
        .collect()
}

/// `(sigma, v, u)`: growth factor, optimal initial perturbation and the
/// resulting final perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularTriplet {
    pub sigma: f64,
    /// Unit vector in the `X_I` norm.
    pub v: Vec<f64>,
    /// `L v / ||L v||_{X_F}`.
    pub u: Vec<f64>,
    /// Eigen-residual `||G v - mu v||_{X_I}`.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct GstOutcome {
    pub triplets: Vec<SingularTriplet>,
    pub report: LanczosReport,
    pub warnings: Vec<String>,
}

/// Singular triplets of the propagator inside `gst`.
pub fn singular_triplets(gst: &GstOperator, params: &LanczosParams) -> Result<GstOutcome> {
    let report = lanczos_thick_restart(gst, params)?;
    let mut warnings = Vec::new();
    let mut triplets = Vec::with_capacity(report.pairs.len());
    for (i, p) in report.pairs.iter().enumerate() {
        if p.mu < -params.tol * report.pairs[0].mu.abs().max(1.0) {
            warnings.push(format!(
                "eigenvalue {i} is negative ({:.3e}); clamped to zero",
                p.mu
            ));
        }
        let sigma = p.mu.max(0.0).sqrt();
        let lv = gst.propagator().apply(&p.vector)?;
        let norm = gst.output_norm(&lv);
        let u = if norm > 0.0 {
            lv.iter().map(|x| x / norm).collect()
        } else {
            vec![0.0; lv.len()]
        };
        triplets.push(SingularTriplet {
            sigma,
            v: p.vector.clone(),
            u,
            residual: p.residual,
        });
    }
    triplets.sort_by(|a, b| b.sigma.total_cmp(&a.sigma));
    Ok(GstOutcome {
        triplets,
        report,
        warnings,
    })
}

/// GST of a sealed tape. Inner products default to the mass matrices of the
/// input and output spaces.
pub fn gst_from_tape(
    tape: Arc<Tape>,
    x_i: Option<SparseMatrix>,
    x_f: Option<SparseMatrix>,
    params: &LanczosParams,
) -> Result<GstOutcome> {
    let input_space = tape.input()?.unknown.space().clone();
    let output_space = tape.output()?.unknown.space().clone();
    let l: Arc<dyn LinearOperator> = Arc::new(TapePropagator::new(tape)?);
    let gst = GstOperator::with_defaults(l, &input_space, &output_space, x_i, x_f)?;
    singular_triplets(&gst, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::MatrixOperator;

    struct Dense {
        g: DMatrix<f64>,
    }

    impl SymmetricProblem for Dense {
        fn dim(&self) -> usize {
            self.g.nrows()
        }
        fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
            Ok((&self.g * nalgebra::DVector::from_column_slice(x)).iter().copied().collect())
        }
        fn apply_inner(&self, x: &[f64]) -> Vec<f64> {
            x.to_vec()
        }
    }

    #[test]
    fn diagonal_spectrum() {
        let g = Dense {
            g: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 1.0, 0.25])),
        };
        let r = lanczos_thick_restart(&g, &LanczosParams::with_nev(2)).unwrap();
        let mus: Vec<f64> = r.pairs.iter().map(|p| p.mu).collect();
        assert!((mus[0] - 4.0).abs() < 1e-12 && (mus[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_spd_matches_dense_eigensolve_with_restarts() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 40;
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let g = &a * a.transpose();
        let mut dense: Vec<f64> = SymmetricEigen::new(g.clone()).eigenvalues.iter().copied().collect();
        dense.sort_by(|a, b| b.total_cmp(a));
        let params = LanczosParams {
            nev: 5,
            ncv: Some(12),
            ..Default::default()
        };
        let r = lanczos_thick_restart(&Dense { g }, &params).unwrap();
        for (p, d) in r.pairs.iter().zip(&dense) {
            assert!((p.mu - d).abs() <= 1e-8 * d, "{} vs {}", p.mu, d);
        }
        assert!(r.orthogonality_loss < 1e-10);
        assert!(r.restarts > 0);
    }

    #[test]
    fn repeated_eigenvalues_are_all_found() {
        let d = vec![3.0, 3.0, 3.0, 1.0, 0.5, 0.2, 0.1, 0.05, 0.01, 0.0, 0.0, 0.0, 0.0, 0.0];
        let g = Dense {
            g: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d)),
        };
        let params = LanczosParams {
            nev: 4,
            ncv: Some(10),
            ..Default::default()
        };
        let r = lanczos_thick_restart(&g, &params).unwrap();
        let mus: Vec<f64> = r.pairs.iter().map(|p| p.mu).collect();
        for (m, want) in mus.iter().zip([3.0, 3.0, 3.0, 1.0]) {
            assert!((m - want).abs() < 1e-10, "{mus:?}");
        }
    }

    #[test]
    fn invalid_params_are_rejected() {
        let g = Dense { g: DMatrix::identity(3, 3) };
        let p = LanczosParams {
            nev: 3,
            ncv: Some(3),
            ..Default::default()
        };
        assert!(matches!(lanczos_thick_restart(&g, &p), Err(Error::InvalidParams(_))));
        assert!(matches!(
            lanczos_thick_restart(&g, &LanczosParams::with_nev(4)),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn restart_budget_exhaustion_reports_best_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 60;
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let params = LanczosParams {
            nev: 3,
            ncv: Some(5),
            tol: 1e-14,
            max_restarts: 1,
            ..Default::default()
        };
        match lanczos_thick_restart(&Dense { g: &a * a.transpose() }, &params) {
            Err(Error::EigenNonConvergence { restarts, best }) => {
                assert!(restarts >= 1);
                assert!(!best.is_empty());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn identity_propagator_gives_unit_sigmas() {
        let n = 6;
        let l: Arc<dyn LinearOperator> = Arc::new(MatrixOperator(SparseMatrix::identity(n)));
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = 2.0;
            if i + 1 < n {
                m[i * n + i + 1] = 0.5;
                m[(i + 1) * n + i] = 0.5;
            }
        }
        let x = SparseMatrix::from_dense(n, n, &m);
        let gst = GstOperator::new(l, x.clone(), x).unwrap();
        let out = singular_triplets(&gst, &LanczosParams::with_nev(3)).unwrap();
        for t in &out.triplets {
            assert!((t.sigma - 1.0).abs() < 1e-10);
        }
    }
}
