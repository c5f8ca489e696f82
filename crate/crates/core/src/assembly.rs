//! Element-loop assembly of forms, strong Dirichlet conditions and mass matrices.
//!
//! Integrands are interpreted directly at each quadrature point. Every node of
//! the tree evaluates to a [`LinVal`]: a scalar part plus the coefficients
//! multiplying each local test basis function, each local trial basis
//! function, and each (test, trial) pair. Because a valid form is multilinear
//! in its arguments, one pass over the tree per quadrature point yields the
//! whole element tensor.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::forms::{Bindings, FormExpr, Node};
use crate::mesh::{FunctionSpace, IntervalMesh, QuadratureRule};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub enum Assembled {
    Scalar(f64),
    Vector(Vec<f64>),
    Matrix(SparseMatrix),
}

impl Assembled {
    pub fn into_scalar(self) -> Result<f64> {
        match self {
            Assembled::Scalar(v) => Ok(v),
            _ => Err(Error::Arity("expected a functional".into())),
        }
    }

    pub fn into_vector(self) -> Result<Vec<f64>> {
        match self {
            Assembled::Vector(v) => Ok(v),
            _ => Err(Error::Arity("expected a linear form".into())),
        }
    }

    pub fn into_matrix(self) -> Result<SparseMatrix> {
        match self {
            Assembled::Matrix(m) => Ok(m),
            _ => Err(Error::Arity("expected a bilinear form".into())),
        }
    }
}

/// Value of a subexpression at one quadrature point, split by argument
/// dependence. `None` parts are identically zero.
#[derive(Debug, Clone)]
struct LinVal {
    s: f64,
    t: Option<Vec<f64>>,
    r: Option<Vec<f64>>,
    tr: Option<Vec<f64>>,
}

fn axpy_opt(a: f64, x: &Option<Vec<f64>>, b: f64, y: &Option<Vec<f64>>) -> Option<Vec<f64>> {
    match (x, y) {
        (None, None) => None,
        (Some(x), None) => Some(x.iter().map(|v| a * v).collect()),
        (None, Some(y)) => Some(y.iter().map(|v| b * v).collect()),
        (Some(x), Some(y)) => Some(x.iter().zip(y).map(|(p, q)| a * p + b * q).collect()),
    }
}

impl LinVal {
    fn scalar(s: f64) -> Self {
        Self {
            s,
            t: None,
            r: None,
            tr: None,
        }
    }

    fn has_args(&self) -> bool {
        self.t.is_some() || self.r.is_some() || self.tr.is_some()
    }

    fn scaled(&self, a: f64) -> Self {
        Self {
            s: a * self.s,
            t: self.t.as_ref().map(|v| v.iter().map(|x| a * x).collect()),
            r: self.r.as_ref().map(|v| v.iter().map(|x| a * x).collect()),
            tr: self.tr.as_ref().map(|v| v.iter().map(|x| a * x).collect()),
        }
    }

    fn add(&self, other: &Self) -> Self {
        Self {
            s: self.s + other.s,
            t: axpy_opt(1.0, &self.t, 1.0, &other.t),
            r: axpy_opt(1.0, &self.r, 1.0, &other.r),
            tr: axpy_opt(1.0, &self.tr, 1.0, &other.tr),
        }
    }

    fn mul(&self, b: &Self, nr: usize) -> Result<Self> {
        let a = self;
        let clash = (a.t.is_some() && b.t.is_some())
            || (a.r.is_some() && b.r.is_some())
            || (a.tr.is_some() && b.has_args())
            || (b.tr.is_some() && a.has_args());
        if clash {
            return Err(Error::Arity("integrand is not multilinear in its arguments".into()));
        }
        let mut tr = axpy_opt(a.s, &b.tr, b.s, &a.tr);
        for (tv, rv) in [(&a.t, &b.r), (&b.t, &a.r)] {
            if let (Some(tv), Some(rv)) = (tv, rv) {
                let m = tr.get_or_insert_with(|| vec![0.0; tv.len() * nr]);
                for (i, ti) in tv.iter().enumerate() {
                    if *ti == 0.0 {
                        continue;
                    }
                    for (j, rj) in rv.iter().enumerate() {
                        m[i * nr + j] += ti * rj;
                    }
                }
            }
        }
        Ok(Self {
            s: a.s * b.s,
            t: axpy_opt(a.s, &b.t, b.s, &a.t),
            r: axpy_opt(a.s, &b.r, b.s, &a.r),
            tr,
        })
    }

    fn require_scalar(&self, what: &str) -> Result<f64> {
        if self.has_args() {
            return Err(Error::Arity(format!("argument appears inside {what}")));
        }
        Ok(self.s)
    }
}

/// Local layout of one function space on the current cell.
struct LocalSpace {
    space: FunctionSpace,
    dofs: Vec<usize>,
}

impl LocalSpace {
    fn new(space: &FunctionSpace) -> Self {
        Self {
            space: space.clone(),
            dofs: Vec::new(),
        }
    }

    fn len(&self) -> usize {
        self.space.element().nodes_per_cell() * self.space.components()
    }

    fn update(&mut self, cell: usize) {
        self.dofs.clear();
        let comps = self.space.components();
        for local in 0..self.space.element().nodes_per_cell() {
            let node = self.space.cell_node(cell, local);
            for c in 0..comps {
                self.dofs.push(self.space.dof(node, c));
            }
        }
    }
}

struct PointContext<'a> {
    xi: f64,
    x: f64,
    h: f64,
    test: Option<&'a LocalSpace>,
    trial: Option<&'a LocalSpace>,
    coefficient_dofs: &'a [(crate::forms::CoefficientId, LocalSpace, &'a [f64])],
}

fn basis_deriv(space: &FunctionSpace, local_node: usize, xi: f64, order: usize, h: f64) -> f64 {
    let el = space.element();
    if el == crate::mesh::Element::Real {
        return el.basis(local_node, xi, order);
    }
    el.basis(local_node, xi, order) / h.powi(order as i32)
}

fn select_component(space: &FunctionSpace, comp: Option<usize>) -> Result<usize> {
    let n = space.components();
    match comp {
        None if n == 1 => Ok(0),
        None => Err(Error::UnsupportedExpression(format!(
            "vector-valued function in {space} used without selecting a component"
        ))),
        Some(c) if c < n => Ok(c),
        Some(c) => Err(Error::UnsupportedExpression(format!(
            "component {c} out of range for {space}"
        ))),
    }
}

fn argument_values(local: &LocalSpace, ctx: &PointContext, order: usize, comp: Option<usize>) -> Result<Vec<f64>> {
    let c = select_component(&local.space, comp)?;
    let comps = local.space.components();
    let mut out = vec![0.0; local.len()];
    for node in 0..local.space.element().nodes_per_cell() {
        out[node * comps + c] = basis_deriv(&local.space, node, ctx.xi, order, ctx.h);
    }
    Ok(out)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

const MAX_DERIVATIVE_ORDER: usize = 3;

fn eval(e: &FormExpr, ctx: &PointContext, order: usize, comp: Option<usize>) -> Result<LinVal> {
    if order > MAX_DERIVATIVE_ORDER {
        return Err(Error::UnsupportedExpression(format!(
            "spatial derivatives beyond order {MAX_DERIVATIVE_ORDER}"
        )));
    }
    let nr = ctx.trial.map_or(0, |l| l.len());
    match e.node() {
        Node::Constant(v) => Ok(LinVal::scalar(if order == 0 { *v } else { 0.0 })),
        Node::Coordinate => Ok(LinVal::scalar(match order {
            0 => ctx.x,
            1 => 1.0,
            _ => 0.0,
        })),
        Node::Test(_) => {
            let local = ctx
                .test
                .ok_or_else(|| Error::Arity("test function without test space".into()))?;
            Ok(LinVal {
                s: 0.0,
                t: Some(argument_values(local, ctx, order, comp)?),
                r: None,
                tr: None,
            })
        }
        Node::Trial(_) => {
            let local = ctx
                .trial
                .ok_or_else(|| Error::Arity("trial function without trial space".into()))?;
            Ok(LinVal {
                s: 0.0,
                t: None,
                r: Some(argument_values(local, ctx, order, comp)?),
                tr: None,
            })
        }
        Node::Coefficient(coef) => {
            let (_, local, values) = ctx
                .coefficient_dofs
                .iter()
                .find(|(id, _, _)| *id == coef.id())
                .ok_or_else(|| Error::UnboundSymbol(coef.name().to_string()))?;
            let c = select_component(&local.space, comp)?;
            let comps = local.space.components();
            let mut s = 0.0;
            for node in 0..local.space.element().nodes_per_cell() {
                let dof = local.dofs[node * comps + c];
                s += values[dof] * basis_deriv(&local.space, node, ctx.xi, order, ctx.h);
            }
            Ok(LinVal::scalar(s))
        }
        Node::Derivative(child) => eval(child, ctx, order + 1, comp),
        Node::Component(child, i) => {
            if comp.is_some() {
                return Err(Error::UnsupportedExpression("nested component selection".into()));
            }
            eval(child, ctx, order, Some(*i))
        }
        Node::Negation(child) => Ok(eval(child, ctx, order, comp)?.scaled(-1.0)),
        Node::Sum(children) => {
            let mut acc = eval(&children[0], ctx, order, comp)?;
            for c in &children[1..] {
                acc = acc.add(&eval(c, ctx, order, comp)?);
            }
            Ok(acc)
        }
        Node::Product(a, b) => {
            // Leibniz rule for d^order(a*b).
            let mut acc: Option<LinVal> = None;
            for k in 0..=order {
                let da = eval(a, ctx, k, comp)?;
                let db = eval(b, ctx, order - k, comp)?;
                let term = da.mul(&db, nr)?.scaled(binomial(order, k));
                acc = Some(match acc {
                    None => term,
                    Some(prev) => prev.add(&term),
                });
            }
            Ok(acc.unwrap())
        }
        Node::Power(base, n) => {
            let n = *n;
            let b0 = eval(base, ctx, 0, comp)?;
            if n == 1 {
                return eval(base, ctx, order, comp);
            }
            let v = b0.require_scalar("a power")?;
            let nf = n as f64;
            let s = match order {
                0 => v.powi(n),
                1 => nf * v.powi(n - 1) * eval(base, ctx, 1, comp)?.s,
                2 => {
                    let d1 = eval(base, ctx, 1, comp)?.s;
                    let d2 = eval(base, ctx, 2, comp)?.s;
                    nf * (nf - 1.0) * v.powi(n - 2) * d1 * d1 + nf * v.powi(n - 1) * d2
                }
                _ => {
                    return Err(Error::UnsupportedExpression(
                        "third derivative of a power".into(),
                    ))
                }
            };
            Ok(LinVal::scalar(s))
        }
        Node::Quotient(a, b) => {
            let bv = eval(b, ctx, 0, comp)?.require_scalar("a denominator")?;
            match order {
                0 => Ok(eval(a, ctx, 0, comp)?.scaled(1.0 / bv)),
                1 => {
                    let db = eval(b, ctx, 1, comp)?.require_scalar("a denominator")?;
                    let a0 = eval(a, ctx, 0, comp)?;
                    let a1 = eval(a, ctx, 1, comp)?;
                    Ok(a1.scaled(1.0 / bv).add(&a0.scaled(-db / (bv * bv))))
                }
                _ => Err(Error::UnsupportedExpression(
                    "higher derivatives of a quotient".into(),
                )),
            }
        }
    }
}

/// Collect every function space touched by a form and check that they share `mesh`.
fn check_spaces(form: &FormExpr, mesh: &IntervalMesh) -> Result<usize> {
    let mut max_degree = 0;
    let mut err = None;
    let mut check = |s: &FunctionSpace| {
        max_degree = max_degree.max(s.element().degree());
        if s.mesh() != mesh && err.is_none() {
            err = Some(Error::SpaceMismatch(format!(
                "space {s} is defined on a different mesh"
            )));
        }
    };
    let mut test_space: Option<FunctionSpace> = None;
    let mut trial_space: Option<FunctionSpace> = None;
    let mut arg_err = None;
    form.walk(&mut |e| match e.node() {
        Node::Test(s) => {
            check(s);
            match &test_space {
                None => test_space = Some(s.clone()),
                Some(t) if t != s => arg_err = Some(Error::SpaceMismatch("two different test spaces".into())),
                _ => {}
            }
        }
        Node::Trial(s) => {
            check(s);
            match &trial_space {
                None => trial_space = Some(s.clone()),
                Some(t) if t != s => arg_err = Some(Error::SpaceMismatch("two different trial spaces".into())),
                _ => {}
            }
        }
        Node::Coefficient(c) => check(c.space()),
        _ => {}
    });
    if let Some(e) = err.or(arg_err) {
        return Err(e);
    }
    Ok(max_degree)
}

/// Assemble a form over `mesh`. Arity 2 gives a matrix with rows indexed by
/// test dofs and columns by trial dofs, arity 1 a vector, arity 0 a scalar.
///
/// Quadrature is Gauss–Legendre of degree `2p + 1`, where `p` is the highest
/// polynomial degree among the spaces in the form.
pub fn assemble(form: &FormExpr, mesh: &IntervalMesh, bindings: &Bindings) -> Result<Assembled> {
    let arity = form.arity()?;
    let max_degree = check_spaces(form, mesh)?;
    let (test_space, trial_space) = form.argument_spaces();
    let rule = QuadratureRule::for_degree(2 * max_degree + 1);

    let mut test = test_space.as_ref().map(LocalSpace::new);
    let mut trial = trial_space.as_ref().map(LocalSpace::new);

    let mut coefficient_dofs = Vec::new();
    for c in form.coefficients() {
        let values = bindings
            .get(c.id())
            .ok_or_else(|| Error::UnboundSymbol(c.name().to_string()))?;
        coefficient_dofs.push((c.id(), LocalSpace::new(c.space()), values));
    }

    let n_rows = test_space.as_ref().map_or(0, |s| s.dof_count());
    let n_cols = trial_space.as_ref().map_or(0, |s| s.dof_count());
    let nt = test.as_ref().map_or(0, |l| l.len());
    let nr = trial.as_ref().map_or(0, |l| l.len());

    let mut scalar = 0.0;
    let mut vector = vec![0.0; n_rows];
    let mut triplets = Vec::new();
    let mut local_vec = vec![0.0; nt];
    let mut local_mat = vec![0.0; nt * nr];

    let h = mesh.cell_width();
    for cell in 0..mesh.n_cells() {
        let (x0, _) = mesh.cell(cell);
        if let Some(l) = test.as_mut() {
            l.update(cell);
        }
        if let Some(l) = trial.as_mut() {
            l.update(cell);
        }
        for (_, l, _) in coefficient_dofs.iter_mut() {
            l.update(cell);
        }
        local_vec.iter_mut().for_each(|v| *v = 0.0);
        local_mat.iter_mut().for_each(|v| *v = 0.0);
        for (xi, w) in rule.points.iter().zip(&rule.weights) {
            let ctx = PointContext {
                xi: *xi,
                x: x0 + xi * h,
                h,
                test: test.as_ref(),
                trial: trial.as_ref(),
                coefficient_dofs: &coefficient_dofs,
            };
            let val = eval(form, &ctx, 0, None)?;
            let wq = w * h;
            match arity {
                0 => scalar += wq * val.s,
                1 => {
                    if let Some(t) = &val.t {
                        local_vec.iter_mut().zip(t).for_each(|(l, v)| *l += wq * v);
                    }
                }
                _ => {
                    if let Some(m) = &val.tr {
                        local_mat.iter_mut().zip(m).for_each(|(l, v)| *l += wq * v);
                    }
                }
            }
        }
        match arity {
            0 => {}
            1 => {
                let dofs = &test.as_ref().unwrap().dofs;
                for (i, v) in local_vec.iter().enumerate() {
                    vector[dofs[i]] += v;
                }
            }
            _ => {
                let rows = &test.as_ref().unwrap().dofs;
                let cols = &trial.as_ref().unwrap().dofs;
                for i in 0..nt {
                    for j in 0..nr {
                        let v = local_mat[i * nr + j];
                        if v != 0.0 {
                            triplets.push((rows[i], cols[j], v));
                        }
                    }
                }
            }
        }
    }
    Ok(match arity {
        0 => Assembled::Scalar(scalar),
        1 => Assembled::Vector(vector),
        _ => Assembled::Matrix(SparseMatrix::from_triplets(n_rows, n_cols, &triplets)),
    })
}

pub fn assemble_scalar(form: &FormExpr, mesh: &IntervalMesh, bindings: &Bindings) -> Result<f64> {
    if form.is_zero() {
        return Ok(0.0);
    }
    assemble(form, mesh, bindings)?.into_scalar()
}

/// Assemble a linear form whose test space is `test`; the zero form gives a zero vector.
pub fn assemble_vector(form: &FormExpr, test: &FunctionSpace, bindings: &Bindings) -> Result<Vec<f64>> {
    if form.is_zero() {
        return Ok(vec![0.0; test.dof_count()]);
    }
    let v = assemble(form, test.mesh(), bindings)?.into_vector()?;
    if v.len() != test.dof_count() {
        return Err(Error::SpaceMismatch("linear form has an unexpected test space".into()));
    }
    Ok(v)
}

/// Assemble a bilinear form; the zero form gives an empty matrix of the right shape.
pub fn assemble_matrix(
    form: &FormExpr,
    test: &FunctionSpace,
    trial: &FunctionSpace,
    bindings: &Bindings,
) -> Result<SparseMatrix> {
    if form.is_zero() {
        return Ok(SparseMatrix::from_triplets(test.dof_count(), trial.dof_count(), &[]));
    }
    let m = assemble(form, test.mesh(), bindings)?.into_matrix()?;
    if m.rows() != test.dof_count() || m.cols() != trial.dof_count() {
        return Err(Error::SpaceMismatch("bilinear form has unexpected argument spaces".into()));
    }
    Ok(m)
}

/// `sum_c <trial_c, test_c>`: the L2 Gram matrix of the space.
pub fn mass_form(space: &FunctionSpace) -> FormExpr {
    let (u, v) = (FormExpr::trial(space), FormExpr::test(space));
    if space.components() == 1 {
        u * v
    } else {
        FormExpr::sum((0..space.components()).map(|c| u.comp(c) * v.comp(c)).collect::<Vec<_>>())
    }
}

pub fn mass_matrix(space: &FunctionSpace) -> SparseMatrix {
    assemble_matrix(&mass_form(space), space, space, &Bindings::new())
        .expect("mass form is always assemblable")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Left,
    Right,
    Both,
}

#[derive(Clone)]
pub enum BcValue {
    Constant(f64),
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for BcValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BcValue::Constant(v) => write!(f, "{v}"),
            BcValue::Function(_) => f.write_str("<fn>"),
        }
    }
}

/// Strongly imposed Dirichlet condition on one component of a space.
#[derive(Debug, Clone)]
pub struct DirichletBC {
    space: FunctionSpace,
    boundary: Boundary,
    component: usize,
    value: BcValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcMode {
    Full,
    Homogenised,
}

impl DirichletBC {
    pub fn new(space: &FunctionSpace, boundary: Boundary, component: usize, value: BcValue) -> Result<Self> {
        if space.mesh().is_periodic() {
            return Err(Error::InvalidBc("Dirichlet condition on a periodic mesh".into()));
        }
        if space.element() == crate::mesh::Element::Real {
            return Err(Error::InvalidBc("Dirichlet condition on a global-constant space".into()));
        }
        if component >= space.components() {
            return Err(Error::InvalidBc(format!(
                "component {component} out of range for {space}"
            )));
        }
        Ok(Self {
            space: space.clone(),
            boundary,
            component,
            value,
        })
    }

    pub fn constant(space: &FunctionSpace, boundary: Boundary, value: f64) -> Result<Self> {
        Self::new(space, boundary, 0, BcValue::Constant(value))
    }

    pub fn space(&self) -> &FunctionSpace {
        &self.space
    }

    pub fn homogenised(&self) -> Self {
        Self {
            value: BcValue::Constant(0.0),
            ..self.clone()
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        matches!(self.value, BcValue::Constant(v) if v == 0.0)
    }

    /// `(dof, value)` pairs in ascending dof order.
    pub fn dof_values(&self) -> Vec<(usize, f64)> {
        let (l, r) = self.space.boundary_nodes();
        let nodes: &[usize] = match self.boundary {
            Boundary::Left => &[l][..],
            Boundary::Right => &[r][..],
            Boundary::Both => &[l, r][..],
        };
        nodes
            .iter()
            .map(|&n| {
                let x = self.space.node_coordinate(n);
                let v = match &self.value {
                    BcValue::Constant(c) => *c,
                    BcValue::Function(f) => f(x),
                };
                (self.space.dof(n, self.component), v)
            })
            .collect()
    }

    pub fn dofs(&self) -> Vec<usize> {
        self.dof_values().into_iter().map(|(d, _)| d).collect()
    }
}

impl fmt::Display for DirichletBC {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}[{}] = {:?}", self.boundary, self.component, self.value)
    }
}

/// Row-replacement imposition of a Dirichlet condition on `matrix * x = rhs`:
/// constrained rows become identity rows and their right-hand side entries
/// become the condition value (or zero when homogenised).
pub fn apply_bc(
    matrix: &SparseMatrix,
    rhs: &[f64],
    bc: &DirichletBC,
    mode: BcMode,
) -> Result<(SparseMatrix, Vec<f64>)> {
    let dv = bc.dof_values();
    if let Some(&(d, _)) = dv.iter().find(|(d, _)| *d >= matrix.rows() || *d >= rhs.len()) {
        return Err(Error::InvalidBc(format!("dof {d} out of range")));
    }
    let dofs: Vec<usize> = dv.iter().map(|(d, _)| *d).collect();
    let m = matrix.replace_rows_with_identity(&dofs);
    let mut b = rhs.to_vec();
    for (d, v) in dv {
        b[d] = match mode {
            BcMode::Full => v,
            BcMode::Homogenised => 0.0,
        };
    }
    Ok((m, b))
}

/// All dofs constrained by a set of conditions, sorted and deduplicated.
pub fn constrained_dofs(bcs: &[DirichletBC]) -> Vec<usize> {
    let mut d: Vec<usize> = bcs.iter().flat_map(|b| b.dofs()).collect();
    d.sort_unstable();
    d.dedup();
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::Coefficient;
    use crate::mesh::Element;

    fn p1(a: f64, b: f64, n: usize) -> FunctionSpace {
        FunctionSpace::scalar(Arc::new(IntervalMesh::new(a, b, n).unwrap()), Element::P1)
    }

    #[test]
    fn p1_mass_matrix_two_cells() {
        // Hand-integrated element mass matrix h/6 [[2,1],[1,2]], h = 1/2.
        let v = p1(0.0, 1.0, 2);
        let m = mass_matrix(&v).to_dense();
        let h = 0.5;
        let expected = [2.0, 1.0, 0.0, 1.0, 4.0, 1.0, 0.0, 1.0, 2.0].map(|x| x * h / 6.0);
        for (a, b) in m.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn measure_of_domain() {
        let mesh = IntervalMesh::new(0.0, 2.0, 5).unwrap();
        let v = assemble(&FormExpr::constant(1.0), &mesh, &Bindings::new())
            .unwrap()
            .into_scalar()
            .unwrap();
        assert!((v - 2.0).abs() < 1e-15);
    }

    #[test]
    fn p1_stiffness_single_cell() {
        let v = p1(0.0, 1.0, 1);
        let k = FormExpr::trial(&v).dx() * FormExpr::test(&v).dx();
        let m = assemble_matrix(&k, &v, &v, &Bindings::new()).unwrap().to_dense();
        for (a, b) in m.iter().zip([1.0, -1.0, -1.0, 1.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn mass_matrix_properties() {
        for el in [Element::P1, Element::P2] {
            let v = FunctionSpace::scalar(Arc::new(IntervalMesh::new(-1.0, 2.0, 7).unwrap()), el);
            let m = mass_matrix(&v);
            assert_eq!(m.asymmetry(), 0.0);
            let total: f64 = m.triplets().map(|(_, _, x)| x).sum();
            assert!((total - 3.0).abs() < 1e-13);
        }
    }

    #[test]
    fn quadrature_exact_for_stated_degree() {
        // P2 space: rule of degree 5; integrate x^k for k <= 5 over [0.5, 2].
        let v = FunctionSpace::scalar(Arc::new(IntervalMesh::new(0.5, 2.0, 3).unwrap()), Element::P2);
        let c = Coefficient::new("c", &v);
        let zeros = vec![0.0; v.dof_count()];
        let b = Bindings::new().with(&c, &zeros).unwrap();
        for k in 0..=5 {
            let form = FormExpr::coordinate().powi(k) + c.expr();
            let approx = assemble(&form, v.mesh(), &b).unwrap().into_scalar().unwrap();
            let exact = (2.0f64.powi(k + 1) - 0.5f64.powi(k + 1)) / (k + 1) as f64;
            assert!(((approx - exact) / exact).abs() < 1e-13, "k={k}");
        }
    }

    #[test]
    fn unbound_coefficient_is_reported() {
        let v = p1(0.0, 1.0, 3);
        let c = Coefficient::new("ghost", &v);
        let err = assemble(&(c.expr() * FormExpr::test(&v)), v.mesh(), &Bindings::new()).unwrap_err();
        assert!(matches!(err, Error::UnboundSymbol(ref n) if n == "ghost"));
    }

    #[test]
    fn advection_adjoint_assembles_to_transpose() {
        let v = FunctionSpace::scalar(Arc::new(IntervalMesh::new(0.0, 1.0, 6).unwrap()), Element::P2);
        let c = Coefficient::new("c", &v);
        let cv = v.interpolate_scalar(|x| 1.0 + x * x);
        let b = Bindings::new().with(&c, &cv).unwrap();
        let a = c.expr() * FormExpr::trial(&v).dx() * FormExpr::test(&v);
        let adj = crate::forms::adjoint_form(&a).unwrap();
        let ma = assemble_matrix(&a, &v, &v, &b).unwrap();
        let madj = assemble_matrix(&adj, &v, &v, &b).unwrap();
        assert_eq!(madj.to_dense(), ma.transpose().to_dense());
    }

    #[test]
    fn bc_on_periodic_mesh_is_rejected() {
        let v = FunctionSpace::scalar(Arc::new(IntervalMesh::periodic(0.0, 1.0, 4).unwrap()), Element::P1);
        assert!(matches!(
            DirichletBC::constant(&v, Boundary::Left, 0.0),
            Err(Error::InvalidBc(_))
        ));
    }

    #[test]
    fn homogenised_bc_zeroes_rhs() {
        let v = p1(0.0, 1.0, 4);
        let m = mass_matrix(&v);
        let bc = DirichletBC::constant(&v, Boundary::Both, 3.0).unwrap();
        let (_, b) = apply_bc(&m, &[1.0; 5], &bc, BcMode::Homogenised).unwrap();
        assert_eq!(b, vec![0.0, 1.0, 1.0, 1.0, 0.0]);
        let (mf, bf) = apply_bc(&m, &[1.0; 5], &bc, BcMode::Full).unwrap();
        assert_eq!(bf[0], 3.0);
        assert_eq!(mf.get(0, 0), 1.0);
        assert_eq!(mf.get(0, 1), 0.0);
    }
}
