//! Dense vector helpers and direct solvers for narrow-banded sparse systems.
//!
//! Matrices are reordered with reverse Cuthill–McKee before factorisation,
//! which turns the periodic wrap-around coupling of 1D meshes into a band of
//! roughly twice the natural width.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// `y += a * x`.
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

pub fn scaled(a: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| a * v).collect()
}

pub fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

pub fn add(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a + b).collect()
}

/// `sqrt(x^T M x)`.
pub fn weighted_norm(m: &SparseMatrix, x: &[f64]) -> f64 {
    dot(x, &m.matvec(x)).max(0.0).sqrt()
}

/// Reverse Cuthill–McKee ordering of the symmetrised pattern of `a`.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &SparseMatrix) -> Vec<usize> {
    let n = a.rows();
    let mut adj = vec![Vec::new(); n];
    for (r, c, _) in a.triplets() {
        if r != c {
            adj[r].push(c);
            adj[c].push(r);
        }
    }
    for list in adj.iter_mut() {
        list.sort_unstable();
        list.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();

    // Breadth-first levels from `start`, restricted to unvisited nodes.
    let bfs = |start: usize, visited: &[bool]| -> Vec<usize> {
        let mut seen = visited.to_vec();
        let mut order = vec![start];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !seen[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                seen[w] = true;
                order.push(w);
                queue.push_back(w);
            }
        }
        order
    };

    let mut visited = vec![false; n];
    let mut perm = Vec::with_capacity(n);
    while perm.len() < n {
        let seed = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (degree[i], i))
            .unwrap();
        // A couple of sweeps towards a pseudo-peripheral start node.
        let mut start = seed;
        for _ in 0..2 {
            let order = bfs(start, &visited);
            let last = *order.last().unwrap();
            if last == start {
                break;
            }
            start = last;
        }
        for v in bfs(start, &visited) {
            visited[v] = true;
            perm.push(v);
        }
    }
    perm.reverse();
    perm
}

fn invert(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    inv
}

fn permuted(a: &SparseMatrix, inv: &[usize]) -> SparseMatrix {
    let t: Vec<_> = a.triplets().map(|(r, c, v)| (inv[r], inv[c], v)).collect();
    SparseMatrix::from_triplets(a.rows(), a.cols(), &t)
}

fn check_square(a: &SparseMatrix, context: &'static str) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            got: a.cols(),
            context,
        });
    }
    Ok(())
}

/// LU factorisation with partial pivoting of a band matrix, after RCM
/// reordering. Multipliers of step `k` stay in place; row swaps are replayed
/// during the solve.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    width: usize,
    perm: Vec<usize>,
    inv: Vec<usize>,
    data: Vec<f64>,
    pivots: Vec<usize>,
    original: SparseMatrix,
}

impl BandedLu {
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        check_square(a, "LU factorisation")?;
        let n = a.rows();
        let perm = reverse_cuthill_mckee(a);
        let inv = invert(&perm);
        let p = permuted(a, &inv);
        let (kl, ku) = p.bandwidth();
        let width = 2 * kl + ku + 1;
        let mut lu = Self {
            n,
            kl,
            width,
            perm,
            inv,
            data: vec![0.0; n * width],
            pivots: vec![0; n],
            original: a.clone(),
        };
        for (r, c, v) in p.triplets() {
            *lu.at(r, c) = v;
        }
        let scale = a.max_abs();
        let upper = kl + ku;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let (mut piv, mut best) = (k, lu.get(k, k).abs());
            for i in k + 1..=last {
                let v = lu.get(i, k).abs();
                if v > best {
                    piv = i;
                    best = v;
                }
            }
            if best <= f64::EPSILON * scale || best == 0.0 {
                return Err(Error::SingularSystem(format!(
                    "zero pivot at step {k} of {n}"
                )));
            }
            lu.pivots[k] = piv;
            let cmax = (k + upper).min(n - 1);
            if piv != k {
                for j in k..=cmax {
                    let t = lu.get(k, j);
                    *lu.at(k, j) = lu.get(piv, j);
                    *lu.at(piv, j) = t;
                }
            }
            let d = lu.get(k, k);
            for i in k + 1..=last {
                let l = lu.get(i, k) / d;
                *lu.at(i, k) = l;
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..=cmax {
                    let u = lu.get(k, j);
                    if u != 0.0 {
                        *lu.at(i, j) -= l * u;
                    }
                }
            }
        }
        Ok(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j + self.kl - i < self.width);
        i * self.width + (j + self.kl - i)
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.idx(i, j)]
    }

    #[inline]
    fn at(&mut self, i: usize, j: usize) -> &mut f64 {
        let k = self.idx(i, j);
        &mut self.data[k]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn solve_once(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != 0.0 {
                for i in k + 1..=(k + self.kl).min(n - 1) {
                    x[i] -= self.get(i, k) * xk;
                }
            }
        }
        let upper = self.width - self.kl - 1;
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..=(k + upper).min(n - 1) {
                s -= self.get(k, j) * x[j];
            }
            x[k] = s / self.get(k, k);
        }
        (0..n).map(|old| x[self.inv[old]]).collect()
    }

    /// Solve `A x = b`, with up to two steps of iterative refinement.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: b.len(),
                context: "right-hand side",
            });
        }
        let mut x = self.solve_once(b);
        let bnorm = norm2(b);
        for _ in 0..2 {
            let r = sub(b, &self.original.matvec(&x));
            if norm2(&r) <= 1e-14 * bnorm {
                break;
            }
            axpy(1.0, &self.solve_once(&r), &mut x);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem("non-finite solution".into()));
        }
        Ok(x)
    }
}

/// Cholesky factorisation `P A P^T = L L^T` of a symmetric positive-definite
/// band matrix after RCM reordering.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    k: usize,
    perm: Vec<usize>,
    inv: Vec<usize>,
    /// Row `i` holds `L[i, i-k..=i]`.
    data: Vec<f64>,
}

impl BandedCholesky {
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        check_square(a, "Cholesky factorisation")?;
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        if a.asymmetry() > 1e-12 * scale {
            return Err(Error::InvalidInnerProduct("matrix is not symmetric".into()));
        }
        let n = a.rows();
        let perm = reverse_cuthill_mckee(a);
        let inv = invert(&perm);
        let p = permuted(a, &inv);
        let k = p.bandwidth().0;
        let w = k + 1;
        let mut data = vec![0.0; n * w];
        for (r, c, v) in p.triplets() {
            if c <= r {
                data[r * w + (c + k - r)] = v;
            }
        }
        for i in 0..n {
            let lo = i.saturating_sub(k);
            for j in lo..=i {
                let mut s = data[i * w + (j + k - i)];
                let jlo = j.saturating_sub(k).max(lo);
                for m in jlo..j {
                    s -= data[i * w + (m + k - i)] * data[j * w + (m + k - j)];
                }
                if j == i {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::InvalidInnerProduct(format!(
                            "non-positive pivot {s:.3e} at row {i}"
                        )));
                    }
                    data[i * w + k] = s.sqrt();
                } else {
                    data[i * w + (j + k - i)] = s / data[j * w + k];
                }
            }
        }
        Ok(Self { n, k, perm, inv, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: b.len(),
                context: "right-hand side",
            });
        }
        let (n, k, w) = (self.n, self.k, self.k + 1);
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let mut s = y[i];
            for m in i.saturating_sub(k)..i {
                s -= self.data[i * w + (m + k - i)] * y[m];
            }
            y[i] = s / self.data[i * w + k];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for m in i + 1..=(i + k).min(n - 1) {
                s -= self.data[m * w + (i + k - m)] * y[m];
            }
            y[i] = s / self.data[i * w + k];
        }
        Ok((0..n).map(|old| y[self.inv[old]]).collect())
    }
}

/// One-shot solve of `A x = b`; the residual is checked against `1e-10 ||b||`.
pub fn solve_linear(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let x = BandedLu::factor(a)?.solve(b)?;
    let r = norm2(&sub(b, &a.matvec(&x)));
    if r > 1e-10 * norm2(b) {
        return Err(Error::SingularSystem(format!(
            "residual {r:.3e} after refinement"
        )));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn periodic_laplacian(n: usize, shift: f64) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + shift));
            t.push((i, (i + 1) % n, -1.0));
            t.push((i, (i + n - 1) % n, -1.0));
        }
        SparseMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn identity_solve() {
        let b = vec![1.0, -2.0, 3.5];
        assert_eq!(solve_linear(&SparseMatrix::identity(3), &b).unwrap(), b);
    }

    #[test]
    fn rcm_narrows_periodic_band() {
        let a = periodic_laplacian(50, 0.1);
        let perm = reverse_cuthill_mckee(&a);
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
        let p = permuted(&a, &invert(&perm));
        assert!(p.bandwidth().0 <= 2);
    }

    #[test]
    fn lu_matches_dense_on_nonsymmetric_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 40;
        let mut t = Vec::new();
        for i in 0..n {
            // Weak diagonal so that pivoting actually happens.
            t.push((i, i, rng.random_range(-0.1..0.1)));
            t.push((i, (i + 1) % n, rng.random_range(-1.0..1.0)));
            t.push(((i + 2) % n, i, rng.random_range(-1.0..1.0)));
        }
        let a = SparseMatrix::from_triplets(n, n, &t);
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = solve_linear(&a, &b).unwrap();
        let dense = nalgebra::DMatrix::from_row_slice(n, n, &a.to_dense());
        let xd = dense.lu().solve(&nalgebra::DVector::from_column_slice(&b)).unwrap();
        for i in 0..n {
            assert!((x[i] - xd[i]).abs() < 1e-9 * (1.0 + xd[i].abs()));
        }
    }

    #[test]
    fn singular_is_detected() {
        let a = SparseMatrix::from_dense(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(solve_linear(&a, &[1.0, 1.0]), Err(Error::SingularSystem(_))));
    }

    #[test]
    fn cholesky_solves_and_rejects_indefinite() {
        let a = periodic_laplacian(30, 0.5);
        let b: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let x = BandedCholesky::factor(&a).unwrap().solve(&b).unwrap();
        assert!(norm2(&sub(&a.matvec(&x), &b)) < 1e-12);
        let bad = periodic_laplacian(30, -0.5);
        assert!(matches!(
            BandedCholesky::factor(&bad),
            Err(Error::InvalidInnerProduct(_))
        ));
    }

    #[test]
    fn random_tridiagonal_spd_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200;
        let off: Vec<f64> = (0..n - 1).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut t = Vec::new();
        for i in 0..n {
            let mut d = 0.1;
            if i > 0 {
                d += off[i - 1].abs();
                t.push((i, i - 1, off[i - 1]));
            }
            if i + 1 < n {
                d += off[i].abs();
                t.push((i, i + 1, off[i]));
            }
            t.push((i, i, d));
        }
        let a = SparseMatrix::from_triplets(n, n, &t);
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = solve_linear(&a, &b).unwrap();
        assert!(norm2(&sub(&a.matvec(&x), &b)) <= 1e-10 * norm2(&b));
    }
}
