//! Closed-form homogeneous solutions used as fixtures and oracles.
//!
//! Every profile here is a sum of a quadratic form and ramps
//! `c (x.e + o)_+^2`, stored as [`PiecewiseQuadratic`].

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridDomain, MembraneStack};
use crate::quadrature::composite_gauss;
use crate::sym::{unit, Sym2};

/// Forcing of the planar three-membrane classification.
pub const CANONICAL_FORCING: [f64; 3] = [1.0, 0.0, -1.0];

/// `coeff * (x.e + offset)_+^2`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ramp {
    pub e: [f64; 2],
    pub offset: f64,
    pub coeff: f64,
}

impl Ramp {
    pub fn new(e: [f64; 2], offset: f64, coeff: f64) -> Self {
        Self { e, offset, coeff }
    }

    #[inline]
    fn arg(&self, x: f64, y: f64) -> f64 {
        self.e[0] * x + self.e[1] * y + self.offset
    }
}

/// Membranes `u_j = 1/2 <M_j x, x> + sum_k ramp_{jk}(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseQuadratic {
    pub quadratic: Vec<Sym2>,
    pub ramps: Vec<Vec<Ramp>>,
}

/// Membrane stacks given in closed form.
pub trait AnalyticStack {
    fn pieces(&self) -> PiecewiseQuadratic;

    fn len(&self) -> usize {
        self.pieces().quadratic.len()
    }
}

impl AnalyticStack for PiecewiseQuadratic {
    fn pieces(&self) -> PiecewiseQuadratic {
        self.clone()
    }
}

impl PiecewiseQuadratic {
    pub fn len(&self) -> usize {
        self.quadratic.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quadratic.is_empty()
    }

    pub fn value(&self, x: f64, y: f64, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let mut v = 0.5 * self.quadratic[j].quad(x, y);
            for r in &self.ramps[j] {
                let t = r.arg(x, y).max(0.0);
                v += r.coeff * t * t;
            }
            *o = v;
        }
    }

    pub fn values(&self, x: f64, y: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.value(x, y, &mut out);
        out
    }

    pub fn gradient(&self, x: f64, y: f64) -> Vec<[f64; 2]> {
        (0..self.len())
            .map(|j| {
                let mut g = self.quadratic[j].apply(x, y);
                for r in &self.ramps[j] {
                    let t = r.arg(x, y).max(0.0);
                    g[0] += 2.0 * r.coeff * t * r.e[0];
                    g[1] += 2.0 * r.coeff * t * r.e[1];
                }
                g
            })
            .collect()
    }

    /// One-sided at kinks: a ramp counts as active when its argument is `> 0`.
    pub fn hessian(&self, x: f64, y: f64) -> Vec<Sym2> {
        (0..self.len())
            .map(|j| {
                let mut h = self.quadratic[j];
                for r in &self.ramps[j] {
                    if r.arg(x, y) > 0.0 {
                        h = h.add(&Sym2::outer(r.e).scale(2.0 * r.coeff));
                    }
                }
                h
            })
            .collect()
    }

    pub fn laplacian(&self, x: f64, y: f64) -> Vec<f64> {
        self.hessian(x, y).iter().map(Sym2::trace).collect()
    }

    /// Distance from `(x, y)` to the nearest ramp kink line.
    pub fn kink_distance(&self, x: f64, y: f64) -> f64 {
        self.ramps
            .iter()
            .flatten()
            .map(|r| r.arg(x, y).abs() / (r.e[0].hypot(r.e[1])))
            .fold(f64::INFINITY, f64::min)
    }

    /// Angles in `[0, 2 pi)` of kink rays through the origin.
    pub fn kink_angles(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for r in self.ramps.iter().flatten() {
            if r.offset == 0.0 {
                let a = r.e[1].atan2(r.e[0]);
                for t in [a + PI / 2.0, a - PI / 2.0] {
                    out.push(t.rem_euclid(2.0 * PI));
                }
            }
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        out
    }
}

/// Samples a closed-form stack on the grid (ordering checked).
pub fn sample_stack(profile: &impl AnalyticStack, domain: Arc<GridDomain>) -> Result<MembraneStack> {
    let p = profile.pieces();
    MembraneStack::from_fn(domain, p.len(), |x, y, u| p.value(x, y, u))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    I,
    Ii,
    Iii,
    Iv,
    V,
}

impl Category {
    pub const ALL: [Category; 5] = [Category::I, Category::Ii, Category::Iii, Category::Iv, Category::V];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::I => "i",
            Category::Ii => "ii",
            Category::Iii => "iii",
            Category::Iv => "iv",
            Category::V => "v",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "i" | "1" => Ok(Category::I),
            "ii" | "2" => Ok(Category::Ii),
            "iii" | "3" => Ok(Category::Iii),
            "iv" | "4" => Ok(Category::Iv),
            "v" | "5" => Ok(Category::V),
            other => Err(Error::InvalidArgument(format!("unknown category '{other}'"))),
        }
    }
}

/// The five planar homogeneous three-membrane solutions with forcing
/// `(1, 0, -1)`. `angle` fixes `e`; `a` is the matrix with trace 1 of
/// categories iii and iv; `a1`, `a2` are the matrices of category v
/// (`A_3 = -A_1 - A_2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "category", rename_all = "lowercase")]
pub enum Example46 {
    I { angle: f64 },
    Ii { angle: f64 },
    Iii { angle: f64, a: Sym2 },
    Iv { angle: f64, a: Sym2 },
    V { a1: Sym2, a2: Sym2 },
}

const PARAM_TOL: f64 = 1e-12;

impl Example46 {
    /// Default parameters: `A = I/2` for iii and iv, `A_1 = diag(1, 0)`,
    /// `A_2 = 0` for v.
    pub fn canonical(category: Category, angle: f64) -> Self {
        match category {
            Category::I => Example46::I { angle },
            Category::Ii => Example46::Ii { angle },
            Category::Iii => Example46::Iii { angle, a: Sym2::IDENTITY.scale(0.5) },
            Category::Iv => Example46::Iv { angle, a: Sym2::IDENTITY.scale(0.5) },
            Category::V => Example46::V { a1: Sym2::diag(1.0, 0.0), a2: Sym2::ZERO },
        }
    }

    pub fn category(&self) -> Category {
        match self {
            Example46::I { .. } => Category::I,
            Example46::Ii { .. } => Category::Ii,
            Example46::Iii { .. } => Category::Iii,
            Example46::Iv { .. } => Category::Iv,
            Example46::V { .. } => Category::V,
        }
    }

    pub fn e(&self) -> Option<[f64; 2]> {
        match *self {
            Example46::I { angle }
            | Example46::Ii { angle }
            | Example46::Iii { angle, .. }
            | Example46::Iv { angle, .. } => Some(unit(angle)),
            Example46::V { .. } => None,
        }
    }

    /// Checks the trace constraints and the ordering of the membranes.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Example46::I { angle } | Example46::Ii { angle } => finite_angle(angle),
            Example46::Iii { angle, a } | Example46::Iv { angle, a } => {
                finite_angle(angle)?;
                if (a.trace() - 1.0).abs() > PARAM_TOL {
                    return Err(Error::InvalidProfile(format!("tr(A) must be 1 (got {})", a.trace())));
                }
                let gap = a.scale(3.0).sub(&Sym2::outer(unit(angle)));
                if !gap.is_psd(PARAM_TOL) {
                    return Err(Error::InvalidProfile("3A - e e^T must be positive semidefinite".into()));
                }
                Ok(())
            }
            Example46::V { a1, a2 } => {
                if (a1.trace() - 1.0).abs() > PARAM_TOL || a2.trace().abs() > PARAM_TOL {
                    return Err(Error::InvalidProfile(format!(
                        "traces must be (1, 0, -1) (got ({}, {}, {}))",
                        a1.trace(),
                        a2.trace(),
                        -a1.trace() - a2.trace()
                    )));
                }
                let a3 = a1.add(&a2).scale(-1.0);
                if !a1.sub(&a2).is_psd(PARAM_TOL) || !a2.sub(&a3).is_psd(PARAM_TOL) {
                    return Err(Error::InvalidProfile("A_1 >= A_2 >= A_3 required for ordering".into()));
                }
                Ok(())
            }
        }
    }

    /// Validated closed form.
    pub fn build(&self) -> Result<PiecewiseQuadratic> {
        self.validate()?;
        Ok(self.pieces())
    }
}

fn finite_angle(angle: f64) -> Result<()> {
    if angle.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidProfile("angle must be finite".into()))
    }
}

impl AnalyticStack for Example46 {
    fn pieces(&self) -> PiecewiseQuadratic {
        let plus = |e: [f64; 2], c: f64| Ramp::new(e, 0.0, c);
        let minus = |e: [f64; 2], c: f64| Ramp::new([-e[0], -e[1]], 0.0, c);
        match *self {
            Example46::I { angle } => {
                let e = unit(angle);
                PiecewiseQuadratic {
                    quadratic: vec![Sym2::ZERO; 3],
                    ramps: vec![vec![plus(e, 0.5)], vec![], vec![plus(e, -0.5)]],
                }
            }
            Example46::Ii { angle } => {
                let e = unit(angle);
                PiecewiseQuadratic {
                    quadratic: vec![Sym2::ZERO; 3],
                    ramps: vec![
                        vec![plus(e, 0.5), minus(e, 0.25)],
                        vec![plus(e, -0.25), minus(e, 0.25)],
                        vec![plus(e, -0.25), minus(e, -0.5)],
                    ],
                }
            }
            // <Ax,x>/4 = 1/2 <(A/2) x, x>
            Example46::Iii { angle, a } => {
                let e = unit(angle);
                PiecewiseQuadratic {
                    quadratic: vec![a.scale(0.5), a.scale(0.5), a.scale(-1.0)],
                    ramps: vec![vec![plus(e, 0.25)], vec![plus(e, -0.25)], vec![]],
                }
            }
            Example46::Iv { angle, a } => {
                let e = unit(angle);
                PiecewiseQuadratic {
                    quadratic: vec![a, a.scale(-0.5), a.scale(-0.5)],
                    ramps: vec![vec![], vec![plus(e, 0.25)], vec![plus(e, -0.25)]],
                }
            }
            Example46::V { a1, a2 } => PiecewiseQuadratic {
                quadratic: vec![a1, a2, a1.add(&a2).scale(-1.0)],
                ramps: vec![vec![], vec![], vec![]],
            },
        }
    }
}

/// Samples a category on the grid.
pub fn example46_stack(params: &Example46, domain: Arc<GridDomain>) -> Result<MembraneStack> {
    let p = params.build()?;
    sample_stack(&p, domain)
}

/// `u_j = P(x) + a_j (x.e)_+^2 - b_j (x.e)_-^2` with `P = 1/2 <Ax, x>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpaceProfile {
    pub e: [f64; 2],
    pub a_matrix: Sym2,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl HalfSpaceProfile {
    /// Requires `a` non-increasing and `b` non-decreasing.
    pub fn new(angle: f64, a_matrix: Sym2, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        finite_angle(angle)?;
        if a.len() != b.len() || a.len() < 2 {
            return Err(Error::InvalidProfile("a and b need the same length >= 2".into()));
        }
        if a.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidProfile("a must be non-increasing".into()));
        }
        if b.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidProfile("b must be non-decreasing".into()));
        }
        Ok(Self { e: unit(angle), a_matrix, a, b })
    }

    /// Null-average member of the family: needs `sum a + sum b = 0` and then
    /// takes `A = (2 sum b / N) e e^T`.
    pub fn null_average(angle: f64, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let sa: f64 = a.iter().sum();
        let sb: f64 = b.iter().sum();
        let scale = a.iter().chain(&b).fold(1.0f64, |m, v| m.max(v.abs()));
        if (sa + sb).abs() > 1e-12 * scale {
            return Err(Error::InvalidProfile(format!(
                "null average needs sum(a) + sum(b) = 0 (got {})",
                sa + sb
            )));
        }
        let n = a.len() as f64;
        let e = unit(angle);
        Self::new(angle, Sym2::outer(e).scale(2.0 * sb / n), a, b)
    }

    /// Whether `sum_j u_j` vanishes identically.
    pub fn is_null_average(&self, tol: f64) -> bool {
        let sa: f64 = self.a.iter().sum();
        let sb: f64 = self.b.iter().sum();
        let n = self.a.len() as f64;
        let want = Sym2::outer(self.e).scale(2.0 * sb / n);
        (sa + sb).abs() <= tol && self.a_matrix.sub(&want).max_abs_entry() <= tol
    }
}

impl AnalyticStack for HalfSpaceProfile {
    fn pieces(&self) -> PiecewiseQuadratic {
        let e = self.e;
        let ne = [-e[0], -e[1]];
        PiecewiseQuadratic {
            quadratic: vec![self.a_matrix; self.a.len()],
            ramps: self
                .a
                .iter()
                .zip(&self.b)
                .map(|(&a, &b)| vec![Ramp::new(e, 0.0, a), Ramp::new(ne, 0.0, -b)])
                .collect(),
        }
    }
}

pub fn halfspace_stack(profile: &HalfSpaceProfile, domain: Arc<GridDomain>) -> Result<MembraneStack> {
    sample_stack(profile, domain)
}

/// Non-homogeneous three-membrane solution with forcing `(1, 0, -1)` and two
/// parallel free boundaries `x.e = 0` and `x.e = -width`:
/// separated for `t > 0`, fully in contact on `[-width, 0]`, and
/// `(s^2/4, s^2/4, -s^2/2)` with `s = t + width` below.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayeredProfile {
    pub angle: f64,
    pub width: f64,
}

impl LayeredProfile {
    pub fn new(angle: f64, width: f64) -> Result<Self> {
        finite_angle(angle)?;
        if !(width >= 0.0 && width.is_finite()) {
            return Err(Error::InvalidProfile(format!("width must be non-negative (got {width})")));
        }
        Ok(Self { angle, width })
    }
}

impl AnalyticStack for LayeredProfile {
    fn pieces(&self) -> PiecewiseQuadratic {
        let e = unit(self.angle);
        let ne = [-e[0], -e[1]];
        let w = -self.width;
        PiecewiseQuadratic {
            quadratic: vec![Sym2::ZERO; 3],
            ramps: vec![
                vec![Ramp::new(e, 0.0, 0.5), Ramp::new(ne, w, 0.25)],
                vec![Ramp::new(ne, w, 0.25)],
                vec![Ramp::new(e, 0.0, -0.5), Ramp::new(ne, w, -0.5)],
            ],
        }
    }
}

/// Solution on the cone `{0 < omega < alpha}` with piecewise constant
/// Laplacian `sigma_k` on `(alpha_k, alpha_{k+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeProfile {
    /// `0 = alpha_0 < alpha_1 < ... < alpha_s = alpha <= pi`.
    pub breakpoints: Vec<f64>,
    /// `sigma_0, ..., sigma_{s-1}`.
    pub steps: Vec<f64>,
}

impl ConeProfile {
    pub fn new(breakpoints: Vec<f64>, steps: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 || steps.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidProfile("need s >= 1 steps and s + 1 breakpoints".into()));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::InvalidProfile("first breakpoint must be 0".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidProfile("breakpoints must increase strictly".into()));
        }
        let alpha = *breakpoints.last().unwrap();
        if alpha > PI * (1.0 + 1e-15) {
            return Err(Error::InvalidProfile(format!("cone opening must be at most pi (got {alpha})")));
        }
        if steps.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidProfile("step values must be finite".into()));
        }
        Ok(Self { breakpoints, steps })
    }

    pub fn opening(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    /// `g(omega)`; `None` outside the cone or on a breakpoint ray.
    pub fn step_at(&self, omega: f64) -> Option<f64> {
        (0..self.steps.len())
            .find(|&k| omega > self.breakpoints[k] && omega < self.breakpoints[k + 1])
            .map(|k| self.steps[k])
    }

    /// `e_k` at angle `alpha_k + pi/2`.
    pub fn directions(&self) -> Vec<[f64; 2]> {
        self.breakpoints[..self.steps.len()].iter().map(|&a| unit(a + PI / 2.0)).collect()
    }
}

impl AnalyticStack for ConeProfile {
    fn pieces(&self) -> PiecewiseQuadratic {
        let dirs = self.directions();
        let mut ramps = Vec::with_capacity(self.steps.len());
        for (k, &e) in dirs.iter().enumerate() {
            let jump = if k == 0 { self.steps[0] } else { self.steps[k] - self.steps[k - 1] };
            ramps.push(Ramp::new(e, 0.0, 0.5 * jump));
        }
        PiecewiseQuadratic { quadratic: vec![Sym2::ZERO], ramps: vec![ramps] }
    }
}

/// The cone solution `v`; exposes value, gradient, Hessian and Laplacian.
pub fn cone_solution(profile: &ConeProfile) -> PiecewiseQuadratic {
    profile.pieces()
}

/// Weiss energy `W(u, p, r)` of a closed form, by polar Gauss-Legendre
/// quadrature with the angular interval split at kink rays through `p`.
pub fn weiss_of_pieces(pieces: &PiecewiseQuadratic, forcing: &[f64], p: (f64, f64), r: f64) -> f64 {
    let mut cuts = vec![0.0, 2.0 * PI];
    for ramp in pieces.ramps.iter().flatten() {
        let arg0 = ramp.arg(p.0, p.1);
        if arg0.abs() < 1e-14 {
            let a = ramp.e[1].atan2(ramp.e[0]);
            cuts.push((a + PI / 2.0).rem_euclid(2.0 * PI));
            cuts.push((a - PI / 2.0).rem_euclid(2.0 * PI));
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    let radial = composite_gauss(0.0, r, 64, 8);
    let mut angular = Vec::new();
    for w in cuts.windows(2) {
        if w[1] - w[0] > 1e-15 {
            angular.extend(composite_gauss(w[0], w[1], 32, 8));
        }
    }
    let n = pieces.len();
    let mut vals = vec![0.0; n];
    let mut bulk = 0.0;
    let mut boundary = 0.0;
    for &(t, wt) in &angular {
        let (c, s) = (t.cos(), t.sin());
        for &(rho, wr) in &radial {
            let (x, y) = (p.0 + rho * c, p.1 + rho * s);
            pieces.value(x, y, &mut vals);
            let g = pieces.gradient(x, y);
            let mut acc = 0.0;
            for j in 0..n {
                acc += g[j][0] * g[j][0] + g[j][1] * g[j][1] + 2.0 * forcing[j] * vals[j];
            }
            bulk += wt * wr * rho * acc;
        }
        pieces.value(p.0 + r * c, p.1 + r * s, &mut vals);
        boundary += wt * r * vals.iter().map(|v| v * v).sum::<f64>();
    }
    bulk / r.powi(4) - 2.0 * boundary / r.powi(5)
}

/// `W` at `p = 0`, `r = 1` for a category of the planar classification.
pub fn weiss_of_category(params: &Example46) -> Result<f64> {
    let p = params.build()?;
    Ok(weiss_of_pieces(&p, &CANONICAL_FORCING, (0.0, 0.0), 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_domain, DomainShape};

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn category_point_values() {
        let i = Example46::canonical(Category::I, 0.0).build().unwrap();
        assert!(close(&i.values(0.5, 0.0), &[0.125, 0.0, -0.125], 1e-15));
        let ii = Example46::canonical(Category::Ii, 0.0).build().unwrap();
        assert!(close(&ii.values(-1.0, 0.0), &[0.25, 0.25, -0.5], 1e-15));
        for c in Category::ALL {
            let p = Example46::canonical(c, 0.3).build().unwrap();
            assert_eq!(p.values(0.0, 0.0), vec![0.0; 3]);
        }
    }

    #[test]
    fn category_laplacians_match_forcing_where_separated() {
        for c in Category::ALL {
            let p = Example46::canonical(c, 0.7).build().unwrap();
            for &(x, y) in &[(0.3, 0.2), (-0.4, 0.1), (0.05, -0.6), (-0.2, -0.3)] {
                let u = p.values(x, y);
                let lap = p.laplacian(x, y);
                // separated membranes carry their own forcing; a contact
                // group carries the group mean
                let mut j = 0;
                while j < 3 {
                    let mut k = j;
                    while k + 1 < 3 && (u[k] - u[k + 1]).abs() < 1e-14 {
                        k += 1;
                    }
                    let mean = CANONICAL_FORCING[j..=k].iter().sum::<f64>() / (k - j + 1) as f64;
                    for m in j..=k {
                        assert!((lap[m] - mean).abs() < 1e-12, "{c} at ({x},{y}): {lap:?}");
                    }
                    j = k + 1;
                }
            }
        }
    }

    #[test]
    fn invalid_traces_rejected() {
        let bad = Example46::Iii { angle: 0.0, a: Sym2::IDENTITY };
        assert!(bad.build().is_err());
        let bad = Example46::V { a1: Sym2::diag(1.0, 0.0), a2: Sym2::diag(0.5, 0.0) };
        assert!(bad.build().is_err());
        let unordered = Example46::Iv { angle: 0.0, a: Sym2::diag(0.0, 1.0) };
        assert!(unordered.build().is_err());
    }

    #[test]
    fn halfspace_examples() {
        let p = HalfSpaceProfile::new(0.0, Sym2::new(0.3, 0.1, 0.2), vec![0.0; 3], vec![0.0; 3]).unwrap();
        let v = p.pieces().values(0.4, -0.7);
        assert!(v.iter().all(|&x| x == v[0]));
        let p = HalfSpaceProfile::new(0.0, Sym2::ZERO, vec![0.25, -0.25], vec![-0.25, 0.25]).unwrap();
        let q = p.pieces();
        for &(x, y) in &[(0.3, 0.5), (-0.8, 0.1)] {
            let u = q.values(x, y);
            assert!((u[0] - u[1] - 0.5 * x * x).abs() < 1e-15);
        }
        assert!(HalfSpaceProfile::new(0.0, Sym2::ZERO, vec![0.0, 1.0], vec![0.0, 0.0]).is_err());
        assert!(HalfSpaceProfile::null_average(0.0, vec![1.0, 0.0], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn categories_i_and_ii_are_halfspace_members() {
        let d = build_domain(33, 1.0, DomainShape::Disk).unwrap();
        let i = HalfSpaceProfile::null_average(0.4, vec![0.5, 0.0, -0.5], vec![0.0; 3]).unwrap();
        let ii = HalfSpaceProfile::null_average(0.4, vec![0.5, -0.25, -0.25], vec![-0.25, -0.25, 0.5]).unwrap();
        for (hs, c) in [(i, Category::I), (ii, Category::Ii)] {
            let a = halfspace_stack(&hs, d.clone()).unwrap();
            let b = example46_stack(&Example46::canonical(c, 0.4), d.clone()).unwrap();
            for j in 0..3 {
                assert!(close(a.field(j).values(), b.field(j).values(), 1e-15));
            }
        }
    }

    #[test]
    fn layered_profile_is_c1_and_ordered() {
        let p = LayeredProfile::new(0.0, 0.25).unwrap().pieces();
        assert_eq!(p.values(-0.1, 0.3), vec![0.0; 3]);
        let s = -0.5 + 0.25;
        assert!(close(&p.values(-0.5, 0.0), &[0.25 * s * s, 0.25 * s * s, -0.5 * s * s], 1e-15));
        let d = build_domain(33, 1.0, DomainShape::Disk).unwrap();
        assert!(sample_stack(&p, d).is_ok());
    }

    #[test]
    fn cone_examples() {
        let c = ConeProfile::new(vec![0.0, PI / 2.0], vec![1.0]).unwrap();
        let v = cone_solution(&c);
        let (x, y) = (0.3, 0.4);
        assert!((v.values(x, y)[0] - 0.5 * y * y).abs() < 1e-15);
        let c = ConeProfile::new(vec![0.0, PI / 4.0, PI / 2.0], vec![1.0, 2.0]).unwrap();
        let v = cone_solution(&c);
        let w = 0.4 * PI;
        assert!((v.laplacian(w.cos(), w.sin())[0] - 2.0).abs() < 1e-12);
        for rho in [0.1, 0.5, 1.0] {
            assert!(v.values(rho, 0.0)[0].abs() < 1e-15);
            let g = v.gradient(rho, 0.0)[0];
            assert!(g[0].abs() < 1e-15 && g[1].abs() < 1e-15);
        }
        assert!(ConeProfile::new(vec![0.0, 3.5], vec![1.0]).is_err());
    }

    #[test]
    fn weiss_values_of_categories() {
        let want = [PI / 8.0, 3.0 * PI / 16.0, 7.0 * PI / 32.0, 7.0 * PI / 32.0, PI / 4.0];
        for (c, w) in Category::ALL.iter().zip(want) {
            let got = weiss_of_category(&Example46::canonical(*c, 0.2)).unwrap();
            assert!((got - w).abs() < 1e-10, "{c}: {got} vs {w}");
        }
    }

    #[test]
    fn category_parse_roundtrip() {
        for c in Category::ALL {
            assert_eq!(c.as_str().parse::<Category>().unwrap(), c);
        }
        assert!("vi".parse::<Category>().is_err());
    }
}
