//! Interval meshes, Lagrange elements and Gauss quadrature.
//!
//! Degrees of freedom are numbered node-major with components interleaved:
//! `dof = node * components + component`. Nodes are ordered by coordinate;
//! for P2 the midpoint of cell `c` sits between vertices `c` and `c + 1`.
//! On a periodic mesh the node at `x = b` is identified with the node at `x = a`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMesh {
    a: f64,
    b: f64,
    n_cells: usize,
    periodic: bool,
}

impl IntervalMesh {
    pub fn new(a: f64, b: f64, n_cells: usize) -> Result<Self> {
        Self::build(a, b, n_cells, false)
    }

    pub fn periodic(a: f64, b: f64, n_cells: usize) -> Result<Self> {
        Self::build(a, b, n_cells, true)
    }

    pub fn unit(n_cells: usize) -> Result<Self> {
        Self::new(0.0, 1.0, n_cells)
    }

    fn build(a: f64, b: f64, n_cells: usize, periodic: bool) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || b <= a {
            return Err(Error::InvalidParams(format!(
                "interval endpoints must satisfy a < b (got a = {a}, b = {b})"
            )));
        }
        if n_cells == 0 {
            return Err(Error::InvalidParams("n_cells must be at least 1".into()));
        }
        if periodic && n_cells < 2 {
            return Err(Error::InvalidParams(
                "a periodic mesh needs at least 2 cells".into(),
            ));
        }
        Ok(Self {
            a,
            b,
            n_cells,
            periodic,
        })
    }

    pub fn left(&self) -> f64 {
        self.a
    }

    pub fn right(&self) -> f64 {
        self.b
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn cell_width(&self) -> f64 {
        (self.b - self.a) / self.n_cells as f64
    }

    pub fn vertex(&self, i: usize) -> f64 {
        if i == self.n_cells {
            self.b
        } else {
            self.a + self.length() * i as f64 / self.n_cells as f64
        }
    }

    /// Endpoints of cell `c`.
    pub fn cell(&self, c: usize) -> (f64, f64) {
        (self.vertex(c), self.vertex(c + 1))
    }
}

/// Lagrange element family on intervals. `Real` is the space of global
/// constants (one node shared by every cell), used for 0-D models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Element {
    P1,
    P2,
    Real,
}

impl Element {
    pub fn degree(self) -> usize {
        match self {
            Element::P1 => 1,
            Element::P2 => 2,
            Element::Real => 0,
        }
    }

    pub fn nodes_per_cell(self) -> usize {
        match self {
            Element::P1 => 2,
            Element::P2 => 3,
            Element::Real => 1,
        }
    }

    /// Value (or `order`-th derivative with respect to the reference coordinate)
    /// of local basis function `i` at reference point `xi` in `[0, 1]`.
    pub fn basis(self, i: usize, xi: f64, order: usize) -> f64 {
        match (self, order) {
            (Element::Real, 0) => 1.0,
            (Element::Real, _) => 0.0,
            (Element::P1, 0) => [1.0 - xi, xi][i],
            (Element::P1, 1) => [-1.0, 1.0][i],
            (Element::P1, _) => 0.0,
            (Element::P2, 0) => [
                (1.0 - xi) * (1.0 - 2.0 * xi),
                4.0 * xi * (1.0 - xi),
                xi * (2.0 * xi - 1.0),
            ][i],
            (Element::P2, 1) => [4.0 * xi - 3.0, 4.0 - 8.0 * xi, 4.0 * xi - 1.0][i],
            (Element::P2, 2) => [4.0, -8.0, 4.0][i],
            (Element::P2, _) => 0.0,
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::P1 => f.write_str("P1"),
            Element::P2 => f.write_str("P2"),
            Element::Real => f.write_str("R"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FunctionSpace {
    mesh: Arc<IntervalMesh>,
    element: Element,
    components: usize,
}

impl PartialEq for FunctionSpace {
    fn eq(&self, other: &Self) -> bool {
        self.element == other.element
            && self.components == other.components
            && (Arc::ptr_eq(&self.mesh, &other.mesh) || *self.mesh == *other.mesh)
    }
}

impl FunctionSpace {
    pub fn new(mesh: Arc<IntervalMesh>, element: Element, components: usize) -> Result<Self> {
        if components == 0 {
            return Err(Error::InvalidParams(
                "a function space needs at least one component".into(),
            ));
        }
        Ok(Self {
            mesh,
            element,
            components,
        })
    }

    pub fn scalar(mesh: Arc<IntervalMesh>, element: Element) -> Self {
        Self {
            mesh,
            element,
            components: 1,
        }
    }

    pub fn mesh(&self) -> &IntervalMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<IntervalMesh> {
        &self.mesh
    }

    pub fn element(&self) -> Element {
        self.element
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn node_count(&self) -> usize {
        let n = self.mesh.n_cells;
        match (self.element, self.mesh.periodic) {
            (Element::Real, _) => 1,
            (Element::P1, false) => n + 1,
            (Element::P1, true) => n,
            (Element::P2, false) => 2 * n + 1,
            (Element::P2, true) => 2 * n,
        }
    }

    pub fn dof_count(&self) -> usize {
        self.node_count() * self.components
    }

    pub fn dof(&self, node: usize, component: usize) -> usize {
        node * self.components + component
    }

    /// Global node index of local node `local` in cell `cell`.
    pub fn cell_node(&self, cell: usize, local: usize) -> usize {
        let raw = match self.element {
            Element::Real => return 0,
            Element::P1 => cell + local,
            Element::P2 => 2 * cell + local,
        };
        let count = self.node_count();
        if raw == count {
            0
        } else {
            raw
        }
    }

    pub fn node_coordinate(&self, node: usize) -> f64 {
        match self.element {
            Element::Real => 0.5 * (self.mesh.a + self.mesh.b),
            Element::P1 => self.mesh.vertex(node),
            Element::P2 => {
                if node.is_multiple_of(2) {
                    self.mesh.vertex(node / 2)
                } else {
                    let (x0, x1) = self.mesh.cell(node / 2);
                    0.5 * (x0 + x1)
                }
            }
        }
    }

    /// Nodes located on the left/right end of a non-periodic mesh.
    pub fn boundary_nodes(&self) -> (usize, usize) {
        (0, self.node_count() - 1)
    }

    /// Nodal interpolation of a pointwise expression. `f(x)` returns one
    /// value per component.
    pub fn interpolate(&self, f: impl Fn(f64) -> Vec<f64>) -> Vec<f64> {
        let mut values = vec![0.0; self.dof_count()];
        for node in 0..self.node_count() {
            let v = f(self.node_coordinate(node));
            for c in 0..self.components {
                values[self.dof(node, c)] = v.get(c).copied().unwrap_or(0.0);
            }
        }
        values
    }

    pub fn interpolate_scalar(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.interpolate(|x| vec![f(x); 1])
    }
}

impl fmt::Display for FunctionSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.components == 1 {
            write!(f, "{}", self.element)
        } else {
            write!(f, "{}^{}", self.element, self.components)
        }
    }
}

/// Gauss–Legendre rule on the reference interval `[0, 1]`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Rule with `n` points; exact for polynomials of degree `2n - 1`.
    pub fn gauss_legendre(n: usize) -> Self {
        assert!(n >= 1);
        let mut points = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            // Newton iteration on P_n from the Chebyshev-like initial guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            points.push(0.5 * (1.0 - x));
            weights.push(0.5 * w);
        }
        Self { points, weights }
    }

    /// Rule exact for polynomials of degree `degree`.
    pub fn for_degree(degree: usize) -> Self {
        Self::gauss_legendre(degree / 2 + 1)
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
