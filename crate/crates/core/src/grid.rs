//! Planar grids, scalar fields, and membrane stacks.
//!
//! A [`GridDomain`] is an `n x n` lattice of mesh width `h` covering the square
//! `[-R, R]^2`. For the disk shape the lattice is masked: a cell is *crossing*
//! when it meets the open disk of radius `R` without lying inside the closed
//! disk, every corner of a crossing cell is a boundary node, the remaining nodes
//! of the closed disk are interior, and everything else is exterior. With this
//! convention every cell touched by an interior node lies fully inside the disk
//! and every cell meeting the disk has only non-exterior corners.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sym::Sym2;

/// Grid node addressed by `(i, j)`: `i` along `x`, `j` along `y`.
pub type Node = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainShape {
    Disk,
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeClass {
    Interior,
    Boundary,
    Exterior,
}

impl NodeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeClass::Interior => "interior",
            NodeClass::Boundary => "boundary",
            NodeClass::Exterior => "exterior",
        }
    }
}

/// Relation between a grid cell and a disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum CellCover {
    Inside,
    Crossing,
    Outside,
}

pub(crate) fn cell_cover(x0: f64, y0: f64, h: f64, cx: f64, cy: f64, r: f64) -> CellCover {
    let r2 = r * r * (1.0 + 1e-12);
    let corners = [(x0, y0), (x0 + h, y0), (x0, y0 + h), (x0 + h, y0 + h)];
    if corners
        .iter()
        .all(|&(x, y)| (x - cx).powi(2) + (y - cy).powi(2) <= r2)
    {
        return CellCover::Inside;
    }
    let nx = cx.clamp(x0, x0 + h);
    let ny = cy.clamp(y0, y0 + h);
    if (nx - cx).powi(2) + (ny - cy).powi(2) < r * r {
        CellCover::Crossing
    } else {
        CellCover::Outside
    }
}

#[derive(Debug, Clone)]
pub struct GridDomain {
    n: usize,
    radius: f64,
    h: f64,
    shape: DomainShape,
    class: Vec<NodeClass>,
    interior: Vec<usize>,
}

/// Builds a grid with `n` nodes per side on `[-R, R]^2`.
pub fn build_domain(n: usize, radius: f64, shape: DomainShape) -> Result<Arc<GridDomain>> {
    GridDomain::new(n, radius, shape).map(Arc::new)
}

impl GridDomain {
    pub fn new(n: usize, radius: f64, shape: DomainShape) -> Result<Self> {
        if n % 2 == 0 {
            return Err(Error::InvalidGrid(format!(
                "n must be odd so that the origin is a node (got {n})"
            )));
        }
        if n < 9 {
            return Err(Error::InvalidGrid(format!("n must be at least 9 (got {n})")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidGrid(format!("R must be positive (got {radius})")));
        }
        let h = 2.0 * radius / (n - 1) as f64;
        let mut class = vec![NodeClass::Exterior; n * n];
        match shape {
            DomainShape::Square => {
                for j in 0..n {
                    for i in 0..n {
                        let edge = i == 0 || j == 0 || i == n - 1 || j == n - 1;
                        class[j * n + i] =
                            if edge { NodeClass::Boundary } else { NodeClass::Interior };
                    }
                }
            }
            DomainShape::Disk => {
                let r2 = radius * radius * (1.0 + 1e-12);
                for j in 0..n {
                    for i in 0..n {
                        let x = -radius + i as f64 * h;
                        let y = -radius + j as f64 * h;
                        if x * x + y * y <= r2 {
                            class[j * n + i] = NodeClass::Interior;
                        }
                    }
                }
                for j in 0..n - 1 {
                    for i in 0..n - 1 {
                        let x0 = -radius + i as f64 * h;
                        let y0 = -radius + j as f64 * h;
                        if cell_cover(x0, y0, h, 0.0, 0.0, radius) == CellCover::Crossing {
                            for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                                class[(j + dj) * n + i + di] = NodeClass::Boundary;
                            }
                        }
                    }
                }
                // Nodes on the lattice edge have no outer cells to cross.
                for j in 0..n {
                    for i in 0..n {
                        let edge = i == 0 || j == 0 || i == n - 1 || j == n - 1;
                        if edge && class[j * n + i] == NodeClass::Interior {
                            class[j * n + i] = NodeClass::Boundary;
                        }
                    }
                }
            }
        }
        let interior = (0..n * n).filter(|&k| class[k] == NodeClass::Interior).collect();
        Ok(Self { n, radius, h, shape, class, interior })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn shape(&self) -> DomainShape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn origin(&self) -> Node {
        (self.n / 2, self.n / 2)
    }

    #[inline]
    pub fn index(&self, (i, j): Node) -> usize {
        j * self.n + i
    }

    #[inline]
    pub fn node(&self, k: usize) -> Node {
        (k % self.n, k / self.n)
    }

    #[inline]
    pub fn coords(&self, (i, j): Node) -> (f64, f64) {
        (-self.radius + i as f64 * self.h, -self.radius + j as f64 * self.h)
    }

    #[inline]
    pub fn coords_of(&self, k: usize) -> (f64, f64) {
        self.coords(self.node(k))
    }

    #[inline]
    pub fn class(&self, k: usize) -> NodeClass {
        self.class[k]
    }

    pub fn classes(&self) -> &[NodeClass] {
        &self.class
    }

    #[inline]
    pub fn is_active(&self, k: usize) -> bool {
        self.class[k] != NodeClass::Exterior
    }

    /// Interior nodes in lexicographic (row-major) order.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    pub fn active_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&k| self.is_active(k))
    }

    /// Nearest lattice node to a point (clamped to the lattice).
    pub fn nearest_node(&self, x: f64, y: f64) -> Node {
        let f = |v: f64| {
            let t = ((v + self.radius) / self.h).round();
            t.clamp(0.0, (self.n - 1) as f64) as usize
        };
        (f(x), f(y))
    }

    /// Distance from the node to the domain boundary curve.
    pub fn distance_to_boundary(&self, k: usize) -> f64 {
        let (x, y) = self.coords_of(k);
        match self.shape {
            DomainShape::Disk => self.radius - (x * x + y * y).sqrt(),
            DomainShape::Square => (self.radius - x.abs()).min(self.radius - y.abs()),
        }
    }

    pub(crate) fn check_interior(&self, node: Node) -> Result<usize> {
        let (i, j) = node;
        if i >= self.n || j >= self.n {
            return Err(Error::NotInterior { i, j });
        }
        let k = self.index(node);
        if self.class[k] != NodeClass::Interior {
            return Err(Error::NotInterior { i, j });
        }
        Ok(k)
    }

    /// Lower-left corner index of the cell containing `(x, y)` and the local
    /// coordinates inside it, provided all four corners are non-exterior.
    pub(crate) fn locate(&self, x: f64, y: f64) -> Result<(usize, usize, f64, f64)> {
        let out = || Error::PointOutside { x, y };
        if !(x.is_finite() && y.is_finite()) {
            return Err(out());
        }
        let fx = (x + self.radius) / self.h;
        let fy = (y + self.radius) / self.h;
        let last = (self.n - 1) as f64;
        let slack = 1e-9;
        if fx < -slack || fy < -slack || fx > last + slack || fy > last + slack {
            return Err(out());
        }
        let ci = (fx.floor().max(0.0) as usize).min(self.n - 2);
        let cj = (fy.floor().max(0.0) as usize).min(self.n - 2);
        let xi = (fx - ci as f64).clamp(0.0, 1.0);
        let eta = (fy - cj as f64).clamp(0.0, 1.0);
        let n = self.n;
        let base = cj * n + ci;
        for k in [base, base + 1, base + n, base + n + 1] {
            if !self.is_active(k) {
                return Err(out());
            }
        }
        Ok((ci, cj, xi, eta))
    }

    pub fn same_lattice(&self, other: &GridDomain) -> bool {
        self.n == other.n && self.radius == other.radius && self.shape == other.shape
    }
}

/// Real values on the nodes of a grid. Exterior values carry no meaning.
#[derive(Debug, Clone)]
pub struct ScalarField {
    domain: Arc<GridDomain>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(domain: Arc<GridDomain>) -> Self {
        let len = domain.len();
        Self { domain, values: vec![0.0; len] }
    }

    pub fn from_values(domain: Arc<GridDomain>, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values for {} nodes",
                values.len(),
                domain.len()
            )));
        }
        Ok(Self { domain, values })
    }

    pub fn from_fn(domain: Arc<GridDomain>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..domain.len())
            .map(|k| {
                let (x, y) = domain.coords_of(k);
                f(x, y)
            })
            .collect();
        Self { domain, values }
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, node: Node) -> f64 {
        self.values[self.domain.index(node)]
    }

    /// Largest magnitude over non-exterior nodes.
    pub fn max_abs(&self) -> f64 {
        self.domain
            .active_nodes()
            .map(|k| self.values[k].abs())
            .fold(0.0, f64::max)
    }
}

/// Five-point Laplacian at an interior node.
pub fn discrete_laplacian(field: &ScalarField, node: Node) -> Result<f64> {
    let d = field.domain();
    let k = d.check_interior(node)?;
    Ok(laplacian_at(field.values(), d.n(), d.h(), k))
}

#[inline]
pub(crate) fn laplacian_at(u: &[f64], n: usize, h: f64, k: usize) -> f64 {
    (u[k + 1] + u[k - 1] + u[k + n] + u[k - n] - 4.0 * u[k]) / (h * h)
}

/// Central second differences with a four-point diagonal stencil for the
/// mixed derivative. Needs the node and its eight neighbours to be active.
pub fn discrete_hessian(field: &ScalarField, node: Node) -> Result<Sym2> {
    let d = field.domain();
    let (i, j) = node;
    let n = d.n();
    if i == 0 || j == 0 || i + 1 >= n || j + 1 >= n {
        return Err(Error::StencilOutside { i, j });
    }
    for dj in -1i64..=1 {
        for di in -1i64..=1 {
            let k = d.index(((i as i64 + di) as usize, (j as i64 + dj) as usize));
            if !d.is_active(k) {
                return Err(Error::StencilOutside { i, j });
            }
        }
    }
    Ok(hessian_at(field.values(), n, d.h(), d.index(node)))
}

#[inline]
pub(crate) fn hessian_at(u: &[f64], n: usize, h: f64, k: usize) -> Sym2 {
    let h2 = h * h;
    let uxx = (u[k + 1] + u[k - 1] - 2.0 * u[k]) / h2;
    let uyy = (u[k + n] + u[k - n] - 2.0 * u[k]) / h2;
    let uxy = (u[k + n + 1] - u[k + n - 1] - u[k - n + 1] + u[k - n - 1]) / (4.0 * h2);
    Sym2::new(uxx, uxy, uyy)
}

/// Bilinear interpolation on the cell containing `(x, y)`.
pub fn interpolate(field: &ScalarField, x: f64, y: f64) -> Result<f64> {
    let d = field.domain();
    let (ci, cj, xi, eta) = d.locate(x, y)?;
    Ok(bilinear(field.values(), d.n(), ci, cj, xi, eta))
}

/// Bilinear interpolation with a curvature correction from second differences;
/// reproduces quadratics exactly. Falls back to bilinear where the stencil
/// leaves the active set.
pub fn interpolate_quadratic(field: &ScalarField, x: f64, y: f64) -> Result<f64> {
    let d = field.domain();
    let (ci, cj, xi, eta) = d.locate(x, y)?;
    Ok(quadratic_cell(field.values(), d, ci, cj, xi, eta).0)
}

/// Second difference (times `h^2`) along `step` at line position `a`, on the
/// line `b` (`step = 1`: `a` is the column, `b` the row; `step = n`: swapped).
fn second_at(u: &[f64], d: &GridDomain, a: i64, b: usize, step: usize) -> Option<f64> {
    let n = d.n();
    if a < 1 || a + 1 >= n as i64 {
        return None;
    }
    let q = if step == 1 { b * n + a as usize } else { a as usize * n + b };
    let ok = d.is_active(q) && d.is_active(q - step) && d.is_active(q + step);
    ok.then(|| u[q + step] + u[q - step] - 2.0 * u[q])
}

/// Second difference for the cell `[a, a + 1]` on line `b`, taken from the
/// side whose neighbouring stencil agrees best.
fn pick_second(u: &[f64], d: &GridDomain, a: usize, b: usize, step: usize) -> f64 {
    let a = a as i64;
    let at = |k: i64| second_at(u, d, k, b, step);
    let (left, right) = (at(a), at(a + 1));
    let score = |c: Option<f64>, nb: Option<f64>| match (c, nb) {
        (Some(c), Some(nb)) => (c - nb).abs(),
        _ => f64::INFINITY,
    };
    let (sl, sr) = (score(left, at(a - 1)), score(right, at(a + 2)));
    match (left, right) {
        (Some(l), Some(_)) if sl < sr => l,
        (Some(_), Some(r)) if sr < sl => r,
        (Some(l), Some(r)) => 0.5 * (l + r),
        (Some(l), None) => l,
        (None, Some(r)) => r,
        (None, None) => 0.0,
    }
}

/// Value and gradient of the corrected interpolant at `(xi, eta)` in cell `(ci, cj)`.
pub(crate) fn quadratic_cell(u: &[f64], d: &GridDomain, ci: usize, cj: usize, xi: f64, eta: f64) -> (f64, f64, f64) {
    let n = d.n();
    let h = d.h();
    let k = cj * n + ci;
    let (u00, u10, u01, u11) = (u[k], u[k + 1], u[k + n], u[k + n + 1]);
    let val = u00 * (1.0 - xi) * (1.0 - eta) + u10 * xi * (1.0 - eta) + u01 * (1.0 - xi) * eta + u11 * xi * eta;
    let ux = ((u10 - u00) * (1.0 - eta) + (u11 - u01) * eta) / h;
    let uy = ((u01 - u00) * (1.0 - xi) + (u11 - u10) * xi) / h;
    let dxx = 0.5 * (pick_second(u, d, ci, cj, 1) + pick_second(u, d, ci, cj + 1, 1));
    let dyy = 0.5 * (pick_second(u, d, cj, ci, n) + pick_second(u, d, cj, ci + 1, n));
    (
        val - 0.5 * (xi * (1.0 - xi) * dxx + eta * (1.0 - eta) * dyy),
        ux - 0.5 * (1.0 - 2.0 * xi) * dxx / h,
        uy - 0.5 * (1.0 - 2.0 * eta) * dyy / h,
    )
}

#[inline]
pub(crate) fn bilinear(u: &[f64], n: usize, ci: usize, cj: usize, xi: f64, eta: f64) -> f64 {
    let k = cj * n + ci;
    let (u00, u10, u01, u11) = (u[k], u[k + 1], u[k + n], u[k + n + 1]);
    u00 * (1.0 - xi) * (1.0 - eta) + u10 * xi * (1.0 - eta) + u01 * (1.0 - xi) * eta + u11 * xi * eta
}

/// `N >= 2` fields on one grid, ordered `u_1 >= u_2 >= ... >= u_N`.
#[derive(Debug, Clone)]
pub struct MembraneStack {
    domain: Arc<GridDomain>,
    fields: Vec<ScalarField>,
}

/// Relative ordering slack: `eps_ord = ORDER_REL_TOL * max |u|`.
pub const ORDER_REL_TOL: f64 = 1e-12;

impl MembraneStack {
    /// Builds a stack and checks the ordering invariant.
    pub fn new(domain: Arc<GridDomain>, values: Vec<Vec<f64>>) -> Result<Self> {
        let stack = Self::new_unchecked(domain, values)?;
        if let Some((k, j, gap)) = stack.ordering_violation() {
            let (x, y) = stack.domain.coords_of(k);
            return Err(Error::Ordering(format!(
                "u_{} - u_{} = {gap:e} at ({x}, {y})",
                j + 1,
                j + 2
            )));
        }
        Ok(stack)
    }

    /// Builds a stack without checking the ordering.
    pub fn new_unchecked(domain: Arc<GridDomain>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "a stack needs at least 2 membranes (got {})",
                values.len()
            )));
        }
        let fields = values
            .into_iter()
            .map(|v| ScalarField::from_values(domain.clone(), v))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { domain, fields })
    }

    pub fn zeros(domain: Arc<GridDomain>, n_membranes: usize) -> Result<Self> {
        let len = domain.len();
        Self::new_unchecked(domain, vec![vec![0.0; len]; n_membranes])
    }

    pub fn from_fn(
        domain: Arc<GridDomain>,
        n_membranes: usize,
        f: impl Fn(f64, f64, &mut [f64]),
    ) -> Result<Self> {
        let len = domain.len();
        let mut values = vec![vec![0.0; len]; n_membranes];
        let mut buf = vec![0.0; n_membranes];
        for k in 0..len {
            let (x, y) = domain.coords_of(k);
            f(x, y, &mut buf);
            for (j, v) in buf.iter().enumerate() {
                values[j][k] = *v;
            }
        }
        Self::new(domain, values)
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn fields(&self) -> &[ScalarField] {
        &self.fields
    }

    pub fn field(&self, j: usize) -> &ScalarField {
        &self.fields[j]
    }

    pub fn field_mut(&mut self, j: usize) -> &mut ScalarField {
        &mut self.fields[j]
    }

    pub(crate) fn fields_mut(&mut self) -> &mut [ScalarField] {
        &mut self.fields
    }

    /// Node vector `(u_1, ..., u_N)` at node index `k`.
    pub fn node_values(&self, k: usize) -> Vec<f64> {
        self.fields.iter().map(|f| f.values[k]).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.fields.iter().map(ScalarField::max_abs).fold(0.0, f64::max)
    }

    pub fn ordering_tolerance(&self) -> f64 {
        ORDER_REL_TOL * self.max_abs()
    }

    /// First `(node, pair, gap)` with `u_j - u_{j+1} < -eps_ord`.
    pub fn ordering_violation(&self) -> Option<(usize, usize, f64)> {
        let tol = self.ordering_tolerance();
        for k in self.domain.active_nodes() {
            for j in 0..self.len() - 1 {
                let gap = self.fields[j].values[k] - self.fields[j + 1].values[k];
                if gap < -tol || gap.is_nan() {
                    return Some((k, j, gap));
                }
            }
        }
        None
    }

    pub fn is_ordered(&self) -> bool {
        self.ordering_violation().is_none()
    }

    /// Largest `|sum_j u_j|` over non-exterior nodes.
    pub fn null_average_defect(&self) -> f64 {
        self.domain
            .active_nodes()
            .map(|k| self.fields.iter().map(|f| f.values[k]).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    /// Pointwise difference `u_j - u_{j+1}` as a field.
    pub fn pair_difference(&self, j: usize) -> ScalarField {
        let a = &self.fields[j].values;
        let b = &self.fields[j + 1].values;
        ScalarField {
            domain: self.domain.clone(),
            values: a.iter().zip(b).map(|(x, y)| x - y).collect(),
        }
    }

    pub fn sum_field(&self) -> ScalarField {
        let mut values = vec![0.0; self.domain.len()];
        for f in &self.fields {
            for (s, v) in values.iter_mut().zip(&f.values) {
                *s += v;
            }
        }
        ScalarField { domain: self.domain.clone(), values }
    }

    /// Adds the same function to every membrane.
    pub fn add_common(&self, g: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = self.clone();
        for k in 0..self.domain.len() {
            let (x, y) = self.domain.coords_of(k);
            let v = g(x, y);
            for f in &mut out.fields {
                f.values[k] += v;
            }
        }
        out
    }
}

/// Subtracts the pointwise mean `(1/N) sum_j u_j` from every membrane.
pub fn normalize_average(stack: &MembraneStack) -> MembraneStack {
    let mut out = stack.clone();
    let n = stack.len() as f64;
    for k in 0..stack.domain.len() {
        let mean = stack.fields.iter().map(|f| f.values[k]).sum::<f64>() / n;
        for f in &mut out.fields {
            f.values[k] -= mean;
        }
    }
    out
}

/// Forcing constants `f_1..f_N`, optional per-node fields, and the declared
/// separation `theta` of `f_j - f_{j+1} >= theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forcing {
    constants: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    fields: Option<Vec<Vec<f64>>>,
    theta: f64,
}

impl Forcing {
    pub fn constant(constants: Vec<f64>) -> Self {
        Self { constants, fields: None, theta: 0.0 }
    }

    /// Constant forcing declaring (ND) with separation `theta`.
    pub fn with_separation(constants: Vec<f64>, theta: f64) -> Result<Self> {
        if !(theta >= 0.0) {
            return Err(Error::Forcing(format!("theta must be non-negative (got {theta})")));
        }
        if theta > 0.0 {
            for (j, w) in constants.windows(2).enumerate() {
                if w[0] - w[1] < theta {
                    return Err(Error::Forcing(format!(
                        "f_{} - f_{} = {} < theta = {theta}",
                        j + 1,
                        j + 2,
                        w[0] - w[1]
                    )));
                }
            }
        }
        Ok(Self { constants, fields: None, theta })
    }

    /// Per-node forcing, accepted by the solver only.
    pub fn with_fields(constants: Vec<f64>, fields: Vec<Vec<f64>>) -> Result<Self> {
        if fields.len() != constants.len() {
            return Err(Error::Forcing("one field per membrane required".into()));
        }
        Ok(Self { constants, fields: Some(fields), theta: 0.0 })
    }

    pub fn constants(&self) -> &[f64] {
        &self.constants
    }

    pub fn len(&self) -> usize {
        self.constants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constants.is_empty()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn is_constant(&self) -> bool {
        self.fields.is_none()
    }

    #[inline]
    pub fn at(&self, j: usize, k: usize) -> f64 {
        match &self.fields {
            Some(f) => f[j][k],
            None => self.constants[j],
        }
    }

    pub fn max_abs(&self) -> f64 {
        let c = self.constants.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        match &self.fields {
            Some(f) => f.iter().flatten().fold(c, |m, v| m.max(v.abs())),
            None => c,
        }
    }

    pub fn sum(&self) -> f64 {
        self.constants.iter().sum()
    }

    pub(crate) fn check_len(&self, n_membranes: usize) -> Result<()> {
        if self.len() != n_membranes {
            return Err(Error::Forcing(format!(
                "{} forcing terms for {} membranes",
                self.len(),
                n_membranes
            )));
        }
        if let Some(f) = &self.fields {
            if f.iter().any(|v| v.is_empty()) {
                return Err(Error::Forcing("empty forcing field".into()));
            }
        }
        Ok(())
    }
}

/// Dirichlet values for every membrane at the boundary nodes.
#[derive(Debug, Clone)]
pub struct BoundaryData {
    domain: Arc<GridDomain>,
    values: Vec<Vec<f64>>,
}

impl BoundaryData {
    pub fn from_fn(
        domain: Arc<GridDomain>,
        n_membranes: usize,
        f: impl Fn(f64, f64, &mut [f64]),
    ) -> Result<Self> {
        let mut values = vec![vec![f64::NAN; domain.len()]; n_membranes];
        let mut buf = vec![0.0; n_membranes];
        for k in 0..domain.len() {
            if domain.class(k) == NodeClass::Boundary {
                let (x, y) = domain.coords_of(k);
                f(x, y, &mut buf);
                for (j, v) in buf.iter().enumerate() {
                    values[j][k] = *v;
                }
            }
        }
        Self::checked(domain, values)
    }

    /// Boundary values read off an existing stack.
    pub fn from_stack(stack: &MembraneStack) -> Result<Self> {
        let d = stack.domain().clone();
        let values = stack
            .fields()
            .iter()
            .map(|f| {
                (0..d.len())
                    .map(|k| if d.class(k) == NodeClass::Boundary { f.values[k] } else { f64::NAN })
                    .collect()
            })
            .collect();
        Self::checked(d, values)
    }

    fn checked(domain: Arc<GridDomain>, values: Vec<Vec<f64>>) -> Result<Self> {
        let bd = Self { domain, values };
        let tol = ORDER_REL_TOL * bd.max_abs();
        for k in bd.boundary_nodes() {
            for j in 0..bd.values.len().saturating_sub(1) {
                let gap = bd.values[j][k] - bd.values[j + 1][k];
                if !(gap >= -tol) {
                    let (x, y) = bd.domain.coords_of(k);
                    return Err(Error::Ordering(format!(
                        "boundary data g_{} < g_{} at ({x}, {y})",
                        j + 1,
                        j + 2
                    )));
                }
            }
        }
        Ok(bd)
    }

    fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.domain.len()).filter(move |&k| self.domain.class(k) == NodeClass::Boundary)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn value(&self, j: usize, k: usize) -> f64 {
        self.values[j][k]
    }

    pub fn max_abs(&self) -> f64 {
        self.boundary_nodes()
            .flat_map(|k| self.values.iter().map(move |v| v[k].abs()))
            .fold(0.0, f64::max)
    }

    /// Writes the boundary values into the stack.
    pub fn apply(&self, stack: &mut MembraneStack) -> Result<()> {
        if stack.len() != self.len() || !stack.domain().same_lattice(&self.domain) {
            return Err(Error::InvalidArgument(
                "boundary data does not match the stack".into(),
            ));
        }
        let nodes: Vec<usize> = self.boundary_nodes().collect();
        for (j, f) in stack.fields_mut().iter_mut().enumerate() {
            for &k in &nodes {
                f.values[k] = self.values[j][k];
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(n: usize) -> Arc<GridDomain> {
        build_domain(n, 1.0, DomainShape::Disk).unwrap()
    }

    #[test]
    fn build_domain_reports_mesh_width_and_origin() {
        let d = disk(9);
        assert_eq!(d.h(), 0.25);
        assert_eq!(d.origin(), (4, 4));
        assert_eq!(d.coords(d.origin()), (0.0, 0.0));
        assert_eq!(disk(129).h(), 1.0 / 64.0);
    }

    #[test]
    fn build_domain_rejects_even_and_small_n() {
        let err = build_domain(8, 1.0, DomainShape::Disk).unwrap_err();
        assert!(err.to_string().contains("n must be odd"));
        assert!(build_domain(7, 1.0, DomainShape::Disk).is_err());
        assert!(build_domain(9, 0.0, DomainShape::Disk).is_err());
    }

    #[test]
    fn interior_nodes_have_active_eight_neighbourhoods() {
        for n in [9, 17, 33, 65] {
            let d = disk(n);
            for &k in d.interior_nodes() {
                let (i, j) = d.node(k);
                for dj in -1i64..=1 {
                    for di in -1i64..=1 {
                        let q = d.index(((i as i64 + di) as usize, (j as i64 + dj) as usize));
                        assert!(d.is_active(q));
                    }
                }
            }
            // partition: every node has exactly one class
            let counts = d.classes().iter().fold([0usize; 3], |mut c, cl| {
                c[*cl as usize] += 1;
                c
            });
            assert_eq!(counts.iter().sum::<usize>(), n * n);
            assert!(counts[0] > 0 && counts[1] > 0);
        }
    }

    #[test]
    fn laplacian_examples() {
        let d = disk(9);
        let q = ScalarField::from_fn(d.clone(), |x, y| x * x + y * y);
        let c = ScalarField::from_fn(d.clone(), |_, _| 3.5);
        let quartic = ScalarField::from_fn(d.clone(), |x, _| x.powi(4));
        for &k in d.interior_nodes() {
            let node = d.node(k);
            assert!((discrete_laplacian(&q, node).unwrap() - 4.0).abs() < 1e-12);
            assert_eq!(discrete_laplacian(&c, node).unwrap(), 0.0);
        }
        // x = 0.5 is node i = 6 at h = 0.25: 12 x^2 + 2 h^2 = 3.125
        let v = discrete_laplacian(&quartic, (6, 4)).unwrap();
        assert!((v - 3.125).abs() < 1e-12);
        assert!(matches!(
            discrete_laplacian(&q, (0, 4)),
            Err(Error::NotInterior { .. })
        ));
    }

    #[test]
    fn hessian_examples() {
        let d = disk(17);
        let xy = ScalarField::from_fn(d.clone(), |x, y| x * y);
        let half = ScalarField::from_fn(d.clone(), |x, y| 0.5 * (x * x + y * y));
        let kink = ScalarField::from_fn(d.clone(), |x, _| x.max(0.0).powi(2));
        let o = d.origin();
        let hxy = discrete_hessian(&xy, o).unwrap();
        assert!((hxy.xx).abs() < 1e-12 && (hxy.xy - 1.0).abs() < 1e-12 && hxy.yy.abs() < 1e-12);
        let hi = discrete_hessian(&half, (5, 9)).unwrap();
        assert!((hi.xx - 1.0).abs() < 1e-12 && hi.xy.abs() < 1e-12 && (hi.yy - 1.0).abs() < 1e-12);
        // x = -0.5 is i = 4 at h = 1/8
        assert_eq!(discrete_hessian(&kink, (4, 8)).unwrap(), Sym2::ZERO);
        assert!(discrete_hessian(&xy, (0, 8)).is_err());
    }

    #[test]
    fn interpolation_examples() {
        let d = disk(17);
        let lin = ScalarField::from_fn(d.clone(), |x, y| 2.0 * x - 3.0 * y + 0.5);
        let v = interpolate(&lin, 0.123, -0.377).unwrap();
        assert!((v - (2.0 * 0.123 + 3.0 * 0.377 + 0.5)).abs() < 1e-13);
        let xy = ScalarField::from_fn(d.clone(), |x, y| x * y);
        let h = d.h();
        let (x0, y0) = (0.25, 0.375);
        let mid = interpolate(&xy, x0 + h / 2.0, y0 + h / 2.0).unwrap();
        let avg = (x0 * y0 + (x0 + h) * y0 + x0 * (y0 + h) + (x0 + h) * (y0 + h)) / 4.0;
        assert!((mid - avg).abs() < 1e-15);
        let node = interpolate(&xy, x0, y0).unwrap();
        assert!((node - x0 * y0).abs() < 1e-15);
        assert!(interpolate(&xy, 0.99, 0.99).is_err());
        assert!(interpolate(&xy, 3.0, 0.0).is_err());
    }

    #[test]
    fn normalize_average_examples() {
        let d = disk(9);
        let len = d.len();
        let c = MembraneStack::new(d.clone(), vec![vec![2.0; len]; 3]).unwrap();
        assert_eq!(normalize_average(&c).max_abs(), 0.0);
        let s = MembraneStack::new(d.clone(), vec![vec![1.0; len], vec![0.0; len]]).unwrap();
        let z = normalize_average(&s);
        assert!(z.field(0).values().iter().all(|&v| v == 0.5));
        assert!(z.field(1).values().iter().all(|&v| v == -0.5));
        let again = normalize_average(&z);
        assert_eq!(again.field(0).values(), z.field(0).values());
    }

    #[test]
    fn forcing_validates_separation() {
        assert!(Forcing::with_separation(vec![1.0, 0.0, -1.0], 1.0).is_ok());
        assert!(Forcing::with_separation(vec![1.0, 0.5, -1.0], 1.0).is_err());
    }

    #[test]
    fn boundary_data_must_be_ordered() {
        let d = disk(9);
        assert!(BoundaryData::from_fn(d.clone(), 2, |_, _, g| g.copy_from_slice(&[1.0, 0.0])).is_ok());
        assert!(BoundaryData::from_fn(d, 2, |_, _, g| g.copy_from_slice(&[0.0, 1.0])).is_err());
    }

    #[test]
    fn corrected_interpolant_reproduces_quadratics() {
        let d = disk(33);
        let q = |x: f64, y: f64| 0.7 * x * x - 0.4 * x * y + 1.3 * y * y + 0.2 * x - 1.0;
        let f = ScalarField::from_fn(d.clone(), q);
        for &(x, y) in &[(0.013, -0.41), (0.5, 0.5), (-0.77, 0.1), (0.0, 0.0)] {
            assert!((interpolate_quadratic(&f, x, y).unwrap() - q(x, y)).abs() < 1e-13);
        }
        // a kink on a grid line is reproduced on both neighbouring cells
        let k = ScalarField::from_fn(d.clone(), |x, _| 0.5 * x.max(0.0).powi(2));
        for &x in &[-0.05, -0.01, 0.01, 0.05] {
            let exact = 0.5 * f64::max(x, 0.0).powi(2);
            assert!((interpolate_quadratic(&k, x, 0.2).unwrap() - exact).abs() < 1e-14, "{x}");
        }
    }
}
