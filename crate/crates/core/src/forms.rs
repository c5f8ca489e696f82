//! A small language of variational forms.
//!
//! A [`FormExpr`] is the integrand of a form integrated over the whole mesh.
//! Its arity is the number of distinct argument kinds it contains: a test
//! function makes it linear, a test and a trial function make it bilinear.
//! Trees are immutable and cheap to clone; every transformation returns a new
//! tree.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::FunctionSpace;

static NEXT_COEFFICIENT_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CoefficientId(u64);

impl fmt::Display for CoefficientId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A symbolic finite-element function. Its dof values are held separately
/// (on the tape or in a [`Bindings`] map) so that a single symbol can be
/// evaluated at many states.
#[derive(Debug, Clone)]
pub struct Coefficient {
    id: CoefficientId,
    name: Arc<str>,
    space: FunctionSpace,
}

impl PartialEq for Coefficient {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Eq for Coefficient {}

impl std::hash::Hash for Coefficient {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.id.hash(state)
    }
}

impl Coefficient {
    pub fn new(name: impl Into<Arc<str>>, space: &FunctionSpace) -> Self {
        Self {
            id: CoefficientId(NEXT_COEFFICIENT_ID.fetch_add(1, Ordering::Relaxed)),
            name: name.into(),
            space: space.clone(),
        }
    }

    pub fn id(&self) -> CoefficientId {
        self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> &FunctionSpace {
        &self.space
    }

    pub fn expr(&self) -> FormExpr {
        FormExpr::new(Node::Coefficient(self.clone()))
    }
}

/// Dof values for the coefficients referenced by a form.
#[derive(Debug, Clone, Default)]
pub struct Bindings<'a> {
    values: HashMap<CoefficientId, &'a [f64]>,
}

impl<'a> Bindings<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&mut self, c: &Coefficient, values: &'a [f64]) -> Result<&mut Self> {
        if values.len() != c.space().dof_count() {
            return Err(Error::DimensionMismatch {
                expected: c.space().dof_count(),
                got: values.len(),
                context: "coefficient binding",
            });
        }
        self.values.insert(c.id(), values);
        Ok(self)
    }

    pub fn with(mut self, c: &Coefficient, values: &'a [f64]) -> Result<Self> {
        self.bind(c, values)?;
        Ok(self)
    }

    pub fn get(&self, id: CoefficientId) -> Option<&'a [f64]> {
        self.values.get(&id).copied()
    }
}

#[derive(Debug)]
pub enum Node {
    Trial(FunctionSpace),
    Test(FunctionSpace),
    Coefficient(Coefficient),
    Constant(f64),
    /// The spatial coordinate `x`.
    Coordinate,
    /// d/dx of the child.
    Derivative(FormExpr),
    /// Component `i` of a vector-valued child.
    Component(FormExpr, usize),
    Sum(Vec<FormExpr>),
    Product(FormExpr, FormExpr),
    Quotient(FormExpr, FormExpr),
    Power(FormExpr, i32),
    Negation(FormExpr),
}

#[derive(Debug, Clone)]
pub struct FormExpr(Arc<Node>);

/// What kind of argument a subtree depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Args {
    test: bool,
    trial: bool,
}

impl Args {
    fn count(self) -> usize {
        self.test as usize + self.trial as usize
    }
}

impl FormExpr {
    fn new(node: Node) -> Self {
        FormExpr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn constant(value: f64) -> Self {
        FormExpr::new(Node::Constant(value))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn coordinate() -> Self {
        FormExpr::new(Node::Coordinate)
    }

    pub fn trial(space: &FunctionSpace) -> Self {
        FormExpr::new(Node::Trial(space.clone()))
    }

    pub fn test(space: &FunctionSpace) -> Self {
        FormExpr::new(Node::Test(space.clone()))
    }

    pub fn is_zero(&self) -> bool {
        matches!(*self.0, Node::Constant(v) if v == 0.0)
    }

    fn as_constant(&self) -> Option<f64> {
        match *self.0 {
            Node::Constant(v) => Some(v),
            _ => None,
        }
    }

    /// Spatial derivative d/dx.
    pub fn dx(&self) -> Self {
        match *self.0 {
            Node::Constant(_) => Self::zero(),
            _ => FormExpr::new(Node::Derivative(self.clone())),
        }
    }

    pub fn comp(&self, i: usize) -> Self {
        if self.as_constant().is_some() {
            return self.clone();
        }
        FormExpr::new(Node::Component(self.clone(), i))
    }

    pub fn powi(&self, n: i32) -> Self {
        match n {
            0 => Self::constant(1.0),
            1 => self.clone(),
            _ => match self.as_constant() {
                Some(c) => Self::constant(c.powi(n)),
                None => FormExpr::new(Node::Power(self.clone(), n)),
            },
        }
    }

    pub fn sum(terms: impl IntoIterator<Item = FormExpr>) -> Self {
        let mut flat = Vec::new();
        let mut constant = 0.0;
        for t in terms {
            match &*t.0 {
                Node::Constant(c) => constant += c,
                Node::Sum(children) => {
                    for c in children {
                        match c.as_constant() {
                            Some(v) => constant += v,
                            None => flat.push(c.clone()),
                        }
                    }
                }
                _ => flat.push(t.clone()),
            }
        }
        if constant != 0.0 {
            flat.push(Self::constant(constant));
        }
        match flat.len() {
            0 => Self::zero(),
            1 => flat.pop().unwrap(),
            _ => FormExpr::new(Node::Sum(flat)),
        }
    }

    pub fn product(a: FormExpr, b: FormExpr) -> Self {
        match (a.as_constant(), b.as_constant()) {
            (Some(x), Some(y)) => Self::constant(x * y),
            (Some(0.0), _) => Self::zero(),
            (_, Some(0.0)) => Self::zero(),
            (Some(1.0), _) => b,
            (_, Some(1.0)) => a,
            (Some(-1.0), _) => -b,
            (_, Some(-1.0)) => -a,
            _ => FormExpr::new(Node::Product(a, b)),
        }
    }

    pub fn quotient(a: FormExpr, b: FormExpr) -> Self {
        match (a.as_constant(), b.as_constant()) {
            (Some(0.0), _) => Self::zero(),
            (Some(x), Some(y)) => Self::constant(x / y),
            (_, Some(1.0)) => a,
            (_, Some(y)) => Self::product(a, Self::constant(1.0 / y)),
            _ => FormExpr::new(Node::Quotient(a, b)),
        }
    }

    /// Visit every node, parents before children.
    pub fn walk(&self, f: &mut impl FnMut(&FormExpr)) {
        f(self);
        match &*self.0 {
            Node::Trial(_) | Node::Test(_) | Node::Coefficient(_) | Node::Constant(_) | Node::Coordinate => {}
            Node::Derivative(c) | Node::Component(c, _) | Node::Power(c, _) | Node::Negation(c) => {
                c.walk(f)
            }
            Node::Sum(children) => children.iter().for_each(|c| c.walk(f)),
            Node::Product(a, b) | Node::Quotient(a, b) => {
                a.walk(f);
                b.walk(f);
            }
        }
    }

    /// Distinct coefficients appearing in the form, in first-seen order.
    pub fn coefficients(&self) -> Vec<Coefficient> {
        let mut seen = Vec::<Coefficient>::new();
        self.walk(&mut |e| {
            if let Node::Coefficient(c) = e.node() {
                if !seen.contains(c) {
                    seen.push(c.clone());
                }
            }
        });
        seen
    }

    pub fn contains(&self, c: &Coefficient) -> bool {
        let mut found = false;
        self.walk(&mut |e| {
            if let Node::Coefficient(d) = e.node() {
                found |= d == c;
            }
        });
        found
    }

    /// The (test, trial) spaces of the form's arguments, if present.
    pub fn argument_spaces(&self) -> (Option<FunctionSpace>, Option<FunctionSpace>) {
        let mut test = None;
        let mut trial = None;
        self.walk(&mut |e| match e.node() {
            Node::Test(s) if test.is_none() => test = Some(s.clone()),
            Node::Trial(s) if trial.is_none() => trial = Some(s.clone()),
            _ => {}
        });
        (test, trial)
    }

    fn args(&self) -> Result<Args> {
        match &*self.0 {
            Node::Trial(_) => Ok(Args {
                test: false,
                trial: true,
            }),
            Node::Test(_) => Ok(Args {
                test: true,
                trial: false,
            }),
            Node::Coefficient(_) | Node::Constant(_) | Node::Coordinate => Ok(Args::default()),
            Node::Derivative(c) | Node::Component(c, _) | Node::Negation(c) => c.args(),
            Node::Power(c, n) => {
                let a = c.args()?;
                if a.count() > 0 && *n != 1 {
                    return Err(Error::Arity(format!(
                        "argument raised to power {n} is not multilinear"
                    )));
                }
                Ok(a)
            }
            Node::Sum(children) => {
                let mut out: Option<Args> = None;
                for c in children {
                    if c.is_zero() {
                        continue;
                    }
                    let a = c.args()?;
                    match out {
                        None => out = Some(a),
                        Some(prev) if prev != a => {
                            return Err(Error::Arity(format!(
                                "sum mixes terms of arity {} and {}",
                                prev.count(),
                                a.count()
                            )))
                        }
                        _ => {}
                    }
                }
                Ok(out.unwrap_or_default())
            }
            Node::Product(a, b) => {
                let (x, y) = (a.args()?, b.args()?);
                if (x.test && y.test) || (x.trial && y.trial) {
                    return Err(Error::Arity(
                        "product of two copies of the same argument is not multilinear".into(),
                    ));
                }
                Ok(Args {
                    test: x.test || y.test,
                    trial: x.trial || y.trial,
                })
            }
            Node::Quotient(a, b) => {
                if b.args()?.count() > 0 {
                    return Err(Error::Arity("argument in a denominator".into()));
                }
                a.args()
            }
        }
    }

    /// 0 for a functional, 1 for a linear form, 2 for a bilinear form.
    pub fn arity(&self) -> Result<usize> {
        let a = self.args()?;
        if a.trial && !a.test {
            return Err(Error::Arity(
                "form contains a trial function but no test function".into(),
            ));
        }
        Ok(a.count())
    }
}

impl PartialEq for FormExpr {
    /// Structural equality.
    fn eq(&self, other: &Self) -> bool {
        if Arc::ptr_eq(&self.0, &other.0) {
            return true;
        }
        match (&*self.0, &*other.0) {
            (Node::Trial(a), Node::Trial(b)) | (Node::Test(a), Node::Test(b)) => a == b,
            (Node::Coefficient(a), Node::Coefficient(b)) => a == b,
            (Node::Constant(a), Node::Constant(b)) => a.to_bits() == b.to_bits(),
            (Node::Coordinate, Node::Coordinate) => true,
            (Node::Derivative(a), Node::Derivative(b)) | (Node::Negation(a), Node::Negation(b)) => a == b,
            (Node::Component(a, i), Node::Component(b, j)) => i == j && a == b,
            (Node::Power(a, i), Node::Power(b, j)) => i == j && a == b,
            (Node::Sum(a), Node::Sum(b)) => a == b,
            (Node::Product(a1, a2), Node::Product(b1, b2))
            | (Node::Quotient(a1, a2), Node::Quotient(b1, b2)) => a1 == b1 && a2 == b2,
            _ => false,
        }
    }
}

/// Direction of a Gateaux derivative.
fn check_direction(wrt: &Coefficient, direction: &FormExpr) -> Result<()> {
    let space = match direction.node() {
        Node::Trial(s) | Node::Test(s) => s,
        Node::Coefficient(c) => c.space(),
        _ => {
            return Err(Error::UnsupportedExpression(
                "derivative direction must be a trial function, test function or coefficient".into(),
            ))
        }
    };
    if space != wrt.space() {
        return Err(Error::SpaceMismatch(format!(
            "direction lives in {space} but `{}` lives in {}",
            wrt.name(),
            wrt.space()
        )));
    }
    Ok(())
}

/// Linearisation of `form` with respect to `wrt` in the direction `direction`.
///
/// `direction` must be a trial function, test function or coefficient in the
/// space of `wrt`. Returns the zero form if `wrt` does not occur.
pub fn gateaux_derivative(form: &FormExpr, wrt: &Coefficient, direction: &FormExpr) -> Result<FormExpr> {
    check_direction(wrt, direction)?;
    derive(form, wrt, direction)
}

fn derive(e: &FormExpr, wrt: &Coefficient, dir: &FormExpr) -> Result<FormExpr> {
    Ok(match e.node() {
        Node::Coefficient(c) if c == wrt => dir.clone(),
        Node::Trial(_) | Node::Test(_) | Node::Coefficient(_) | Node::Constant(_) | Node::Coordinate => {
            FormExpr::zero()
        }
        Node::Derivative(c) => {
            let d = derive(c, wrt, dir)?;
            if d.is_zero() {
                d
            } else {
                d.dx()
            }
        }
        Node::Component(c, i) => {
            let d = derive(c, wrt, dir)?;
            if d.is_zero() {
                d
            } else {
                d.comp(*i)
            }
        }
        Node::Negation(c) => -derive(c, wrt, dir)?,
        Node::Sum(children) => {
            let mut terms = Vec::with_capacity(children.len());
            for c in children {
                terms.push(derive(c, wrt, dir)?);
            }
            FormExpr::sum(terms)
        }
        Node::Product(a, b) => {
            let da = derive(a, wrt, dir)?;
            let db = derive(b, wrt, dir)?;
            FormExpr::sum([
                FormExpr::product(da, b.clone()),
                FormExpr::product(a.clone(), db),
            ])
        }
        Node::Quotient(a, b) => {
            let da = derive(a, wrt, dir)?;
            let db = derive(b, wrt, dir)?;
            if db.is_zero() {
                FormExpr::quotient(da, b.clone())
            } else {
                FormExpr::quotient(
                    FormExpr::sum([
                        FormExpr::product(da, b.clone()),
                        -FormExpr::product(a.clone(), db),
                    ]),
                    b.powi(2),
                )
            }
        }
        Node::Power(c, n) => {
            let dc = derive(c, wrt, dir)?;
            if dc.is_zero() {
                FormExpr::zero()
            } else {
                FormExpr::product(
                    FormExpr::product(FormExpr::constant(*n as f64), c.powi(n - 1)),
                    dc,
                )
            }
        }
    })
}

/// Swap test and trial functions of a bilinear form. The assembled matrix of
/// the result is the transpose of the assembled matrix of the input.
pub fn adjoint_form(bilinear: &FormExpr) -> Result<FormExpr> {
    if bilinear.is_zero() {
        return Ok(bilinear.clone());
    }
    let arity = bilinear.arity()?;
    if arity != 2 {
        return Err(Error::Arity(format!(
            "adjoint requires a bilinear form, got arity {arity}"
        )));
    }
    Ok(swap_arguments(bilinear))
}

fn swap_arguments(e: &FormExpr) -> FormExpr {
    map_tree(e, &mut |node| match node {
        Node::Trial(s) => Some(FormExpr::test(s)),
        Node::Test(s) => Some(FormExpr::trial(s)),
        _ => None,
    })
}

/// Rebuild a tree, replacing every node for which `f` returns `Some`.
fn map_tree(e: &FormExpr, f: &mut impl FnMut(&Node) -> Option<FormExpr>) -> FormExpr {
    if let Some(r) = f(e.node()) {
        return r;
    }
    match e.node() {
        Node::Trial(_) | Node::Test(_) | Node::Coefficient(_) | Node::Constant(_) | Node::Coordinate => e.clone(),
        Node::Derivative(c) => map_tree(c, f).dx(),
        Node::Component(c, i) => map_tree(c, f).comp(*i),
        Node::Negation(c) => -map_tree(c, f),
        Node::Power(c, n) => map_tree(c, f).powi(*n),
        Node::Sum(children) => FormExpr::sum(children.iter().map(|c| map_tree(c, f)).collect::<Vec<_>>()),
        Node::Product(a, b) => FormExpr::product(map_tree(a, f), map_tree(b, f)),
        Node::Quotient(a, b) => FormExpr::quotient(map_tree(a, f), map_tree(b, f)),
    }
}

/// Structural substitution of coefficients. Replacements must be
/// coefficients or trial/test functions in the same space as the symbol
/// they replace.
pub fn replace(form: &FormExpr, mapping: &[(Coefficient, FormExpr)]) -> Result<FormExpr> {
    for (from, to) in mapping {
        check_direction(from, to)?;
    }
    Ok(map_tree(form, &mut |node| match node {
        Node::Coefficient(c) => mapping.iter().find(|(from, _)| from == c).map(|(_, to)| to.clone()),
        _ => None,
    }))
}

impl fmt::Display for FormExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Trial(s) => write!(f, "trial[{s}]"),
            Node::Test(s) => write!(f, "test[{s}]"),
            Node::Coefficient(c) => f.write_str(c.name()),
            Node::Constant(v) => write!(f, "{v}"),
            Node::Coordinate => f.write_str("x"),
            Node::Derivative(c) => write!(f, "d/dx({c})"),
            Node::Component(c, i) => write!(f, "{c}[{i}]"),
            Node::Negation(c) => write!(f, "-({c})"),
            Node::Power(c, n) => write!(f, "({c})^{n}"),
            Node::Sum(children) => {
                f.write_str("(")?;
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" + ")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str(")")
            }
            Node::Product(a, b) => write!(f, "{a}*{b}"),
            Node::Quotient(a, b) => write!(f, "({a})/({b})"),
        }
    }
}

impl Neg for FormExpr {
    type Output = FormExpr;
    fn neg(self) -> FormExpr {
        match self.node() {
            Node::Constant(v) => FormExpr::constant(-v),
            Node::Negation(c) => c.clone(),
            _ => FormExpr::new(Node::Negation(self)),
        }
    }
}

impl Neg for &FormExpr {
    type Output = FormExpr;
    fn neg(self) -> FormExpr {
        -self.clone()
    }
}

macro_rules! binary_ops {
    ($($trait:ident $method:ident => $build:expr;)*) => {$(
        impl $trait<FormExpr> for FormExpr {
            type Output = FormExpr;
            fn $method(self, rhs: FormExpr) -> FormExpr {
                ($build)(self, rhs)
            }
        }
        impl $trait<&FormExpr> for FormExpr {
            type Output = FormExpr;
            fn $method(self, rhs: &FormExpr) -> FormExpr {
                ($build)(self, rhs.clone())
            }
        }
        impl $trait<FormExpr> for &FormExpr {
            type Output = FormExpr;
            fn $method(self, rhs: FormExpr) -> FormExpr {
                ($build)(self.clone(), rhs)
            }
        }
        impl $trait<&FormExpr> for &FormExpr {
            type Output = FormExpr;
            fn $method(self, rhs: &FormExpr) -> FormExpr {
                ($build)(self.clone(), rhs.clone())
            }
        }
        impl $trait<f64> for FormExpr {
            type Output = FormExpr;
            fn $method(self, rhs: f64) -> FormExpr {
                ($build)(self, FormExpr::constant(rhs))
            }
        }
        impl $trait<f64> for &FormExpr {
            type Output = FormExpr;
            fn $method(self, rhs: f64) -> FormExpr {
                ($build)(self.clone(), FormExpr::constant(rhs))
            }
        }
        impl $trait<FormExpr> for f64 {
            type Output = FormExpr;
            fn $method(self, rhs: FormExpr) -> FormExpr {
                ($build)(FormExpr::constant(self), rhs)
            }
        }
        impl $trait<&FormExpr> for f64 {
            type Output = FormExpr;
            fn $method(self, rhs: &FormExpr) -> FormExpr {
                ($build)(FormExpr::constant(self), rhs.clone())
            }
        }
    )*};
}

binary_ops! {
    Add add => |a: FormExpr, b: FormExpr| FormExpr::sum([a, b]);
    Sub sub => |a: FormExpr, b: FormExpr| FormExpr::sum([a, -b]);
    Mul mul => FormExpr::product;
    Div div => FormExpr::quotient;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Element, IntervalMesh};

    fn space() -> FunctionSpace {
        FunctionSpace::scalar(Arc::new(IntervalMesh::unit(4).unwrap()), Element::P1)
    }

    #[test]
    fn arity_of_basic_forms() {
        let v = space();
        let u = Coefficient::new("u", &v);
        let phi = FormExpr::test(&v);
        let w = FormExpr::trial(&v);
        assert_eq!((u.expr() * u.expr()).arity().unwrap(), 0);
        assert_eq!((u.expr() * &phi).arity().unwrap(), 1);
        assert_eq!((w.dx() * phi.dx()).arity().unwrap(), 2);
        assert!((u.expr() * &phi + u.expr()).arity().is_err());
        assert!((phi.clone() * &phi).arity().is_err());
        assert!(w.arity().is_err());
    }

    #[test]
    fn derivative_of_square_is_product_rule() {
        let v = space();
        let u = Coefficient::new("u", &v);
        let du = Coefficient::new("du", &v);
        let phi = FormExpr::test(&v);
        let form = u.expr() * u.expr() * &phi;
        let d = gateaux_derivative(&form, &u, &du.expr()).unwrap();
        assert_eq!(d.arity().unwrap(), 1);
        assert!(d.contains(&du));
        assert_eq!(format!("{d}"), "(du*u + u*du)*test[P1]");
    }

    #[test]
    fn derivative_of_absent_coefficient_is_zero() {
        let v = space();
        let u = Coefficient::new("u", &v);
        let w = Coefficient::new("w", &v);
        let form = w.expr().dx() * FormExpr::test(&v).dx();
        let d = gateaux_derivative(&form, &u, &FormExpr::trial(&v)).unwrap();
        assert!(d.is_zero());
    }

    #[test]
    fn derivative_direction_must_share_space() {
        let v = space();
        let v2 = FunctionSpace::scalar(v.mesh_arc().clone(), Element::P2);
        let u = Coefficient::new("u", &v);
        let err = gateaux_derivative(&u.expr(), &u, &FormExpr::trial(&v2)).unwrap_err();
        assert!(matches!(err, Error::SpaceMismatch(_)));
    }

    #[test]
    fn linear_operator_derivative_is_itself() {
        let v = space();
        let u = Coefficient::new("u", &v);
        let form = 0.5 * u.expr().dx() * FormExpr::test(&v).dx();
        let d = gateaux_derivative(&form, &u, &FormExpr::trial(&v)).unwrap();
        let expected = 0.5 * FormExpr::trial(&v).dx() * FormExpr::test(&v).dx();
        assert_eq!(d, expected);
    }

    #[test]
    fn adjoint_swaps_arguments_and_is_involution() {
        let v = space();
        let c = Coefficient::new("c", &v);
        let a = c.expr() * FormExpr::trial(&v).dx() * FormExpr::test(&v);
        let adj = adjoint_form(&a).unwrap();
        assert_eq!(format!("{adj}"), "c*d/dx(test[P1])*trial[P1]");
        assert_eq!(adjoint_form(&adj).unwrap(), a);
        assert!(adjoint_form(&FormExpr::zero()).unwrap().is_zero());
        assert!(matches!(
            adjoint_form(&(c.expr() * FormExpr::test(&v))),
            Err(Error::Arity(_))
        ));
    }

    #[test]
    fn replace_rebinds_symbols() {
        let v = space();
        let u = Coefficient::new("u", &v);
        let w = Coefficient::new("w", &v);
        let form = u.expr() * FormExpr::test(&v);
        assert_eq!(replace(&form, &[(u.clone(), u.expr())]).unwrap(), form);
        let r = replace(&form, &[(u.clone(), w.expr())]).unwrap();
        assert_eq!(r, w.expr() * FormExpr::test(&v));
        let r = replace(&form, &[(u.clone(), FormExpr::trial(&v))]).unwrap();
        assert_eq!(form.arity().unwrap(), 1);
        assert_eq!(r.arity().unwrap(), 2);
        let other = Coefficient::new("p2", &FunctionSpace::scalar(v.mesh_arc().clone(), Element::P2));
        assert!(replace(&form, &[(u, other.expr())]).is_err());
    }

    #[test]
    fn smart_constructors_fold_constants() {
        let v = space();
        let u = Coefficient::new("u", &v);
        assert!((u.expr() * 0.0).is_zero());
        assert_eq!(u.expr() * 1.0, u.expr());
        assert_eq!(FormExpr::constant(2.0) * 3.0, FormExpr::constant(6.0));
        assert!(FormExpr::constant(4.0).dx().is_zero());
        assert_eq!(u.expr().powi(1), u.expr());
    }
}
