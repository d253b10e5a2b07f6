//! Rescaled stacks `u_j(p + r x) / r^2`, homogeneity defects, and the fit of
//! planar homogeneous profiles.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{circle_restriction, MultiplicityMap};
use crate::grid::{build_domain, interpolate_quadratic as interpolate, DomainShape, Forcing, GridDomain, MembraneStack, NodeClass};
use crate::profiles::{Category, Example46, CANONICAL_FORCING};
use crate::sym::{unit, Sym2};

/// Default reference lattice size.
pub const N_REF: usize = 257;
/// Relative classification tolerance.
pub const TAU_CAT: f64 = 1e-2;

#[derive(Debug, Clone)]
pub struct BlowupProfile {
    pub reference: Arc<GridDomain>,
    pub stack: MembraneStack,
    pub p: (f64, f64),
    pub r: f64,
    pub source: String,
    /// Value subtracted from each rescaled membrane so that it vanishes at 0.
    pub offsets: Vec<f64>,
    /// Minmod origin gradient of each rescaled membrane (recorded, not subtracted).
    pub gradients: Vec<(f64, f64)>,
    /// Largest origin gradient before the correction.
    pub origin_gradient: f64,
}

fn null_average_tol(stack: &MembraneStack) -> f64 {
    1e-9 * stack.max_abs().max(1.0)
}

/// Blow-up at a highest-multiplicity node of a null-averaged stack.
///
/// The origin value of each rescaled membrane is subtracted and recorded.
/// The minmod origin gradient is recorded and must stay below `10 h_ref`.
pub fn rescale(
    stack: &MembraneStack,
    fb: &MultiplicityMap,
    p: usize,
    r: f64,
    n_ref: usize,
) -> Result<BlowupProfile> {
    let d = stack.domain();
    let defect = stack.null_average_defect();
    if defect > null_average_tol(stack) {
        return Err(Error::NotNullAverage(defect));
    }
    if !fb.is_highest_multiplicity(p) {
        let (i, j) = d.node(p);
        return Err(Error::NotHighestMultiplicity { i, j });
    }
    let mut prof = rescale_unchecked(stack, d.coords_of(p), r, n_ref)?;
    if prof.origin_gradient > 10.0 * prof.reference.h() {
        let (i, j) = d.node(p);
        return Err(Error::NotHighestMultiplicity { i, j });
    }
    let reference = prof.reference.clone();
    let o = reference.index(reference.origin());
    let offsets: Vec<f64> = prof.stack.fields().iter().map(|f| f.values()[o]).collect();
    let gradients = origin_gradients(&prof.stack);
    for (j, &c) in offsets.iter().enumerate() {
        if c != 0.0 {
            let v = prof.stack.field_mut(j).values_mut();
            for k in reference.active_nodes() {
                v[k] -= c;
            }
        }
    }
    prof.offsets = offsets;
    prof.gradients = gradients;
    Ok(prof)
}

/// `u_j(p + r x) / r^2` on the reference unit disk, without the
/// multiplicity and null-average checks and without value correction.
pub fn rescale_unchecked(stack: &MembraneStack, p: (f64, f64), r: f64, n_ref: usize) -> Result<BlowupProfile> {
    let d = stack.domain();
    let reach = match d.shape() {
        DomainShape::Disk => p.0.hypot(p.1) + r,
        DomainShape::Square => p.0.abs().max(p.1.abs()) + r,
    };
    if !(r > 0.0) || reach > d.radius() * (1.0 + 1e-12) {
        return Err(Error::BallNotContained { x: p.0, y: p.1, r });
    }
    let reference = build_domain(n_ref, 1.0, DomainShape::Disk)?;
    let identity = r == 1.0 && p == (0.0, 0.0) && d.same_lattice(&reference);
    let stack_out = if identity {
        MembraneStack::new_unchecked(
            d.clone(),
            stack.fields().iter().map(|f| f.values().to_vec()).collect(),
        )?
    } else {
        let m = stack.len();
        let mut values = vec![vec![0.0; reference.len()]; m];
        let r2 = r * r;
        for k in reference.active_nodes() {
            let (x, y) = reference.coords_of(k);
            let (mut sx, mut sy) = (p.0 + r * x, p.1 + r * y);
            let first = interpolate(stack.field(0), sx, sy);
            if first.is_err() && x.hypot(y) > 1.0 {
                // boundary nodes just outside the unit circle
                let s = 1.0 / x.hypot(y);
                sx = p.0 + r * x * s;
                sy = p.1 + r * y * s;
            }
            for j in 0..m {
                let v = interpolate(stack.field(j), sx, sy)
                    .map_err(|_| Error::BallNotContained { x: p.0, y: p.1, r })?;
                values[j][k] = v / r2;
            }
        }
        MembraneStack::new_unchecked(reference.clone(), values)?
    };
    let grad = max_norm(&origin_gradients(&stack_out));
    Ok(BlowupProfile {
        reference: stack_out.domain().clone(),
        stack: stack_out,
        p,
        r,
        source: String::new(),
        offsets: vec![0.0; stack.len()],
        gradients: vec![(0.0, 0.0); stack.len()],
        origin_gradient: grad,
    })
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Origin gradient per membrane from minmod one-sided differences, which
/// vanish across a kink through the origin.
fn origin_gradients(stack: &MembraneStack) -> Vec<(f64, f64)> {
    let d = stack.domain();
    let k = d.index(d.origin());
    let n = d.n();
    let h = d.h();
    stack
        .fields()
        .iter()
        .map(|f| {
            let u = f.values();
            let gx = minmod(u[k + 1] - u[k], u[k] - u[k - 1]) / h;
            let gy = minmod(u[k + n] - u[k], u[k] - u[k - n]) / h;
            (gx, gy)
        })
        .collect()
}

fn max_norm(g: &[(f64, f64)]) -> f64 {
    g.iter().map(|v| v.0.hypot(v.1)).fold(0.0, f64::max)
}

impl BlowupProfile {
    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }

    pub fn len(&self) -> usize {
        self.stack.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stack.is_empty()
    }
}

/// `max |u_j(lambda x) / lambda^2 - u_j(x)|` over reference nodes with `|x|`
/// and `|lambda x|` in `[0.1, 0.9]`.
pub fn homogeneity_defect(profile: &BlowupProfile, lambdas: &[f64]) -> Result<f64> {
    let d = &profile.reference;
    let mut worst = 0.0f64;
    for &l in lambdas {
        if !(l > 0.0 && l <= 1.0) {
            return Err(Error::InvalidArgument(format!("lambda must lie in (0, 1] (got {l})")));
        }
        for &k in d.interior_nodes() {
            let (x, y) = d.coords_of(k);
            let rho = x.hypot(y);
            if !(0.1..=0.9).contains(&rho) || !(0.1..=0.9).contains(&(l * rho)) {
                continue;
            }
            for f in profile.stack.fields() {
                let v = interpolate(f, l * x, l * y)?;
                worst = worst.max((v / (l * l) - f.values()[k]).abs());
            }
        }
    }
    Ok(worst)
}

/// Per-membrane fit `u_j ~ 1/2 <M_j x, x> + alpha_j (x.e)_+^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembraneFit {
    pub m: Sym2,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    /// Angle of `e`; `None` when the profile has no kink.
    pub e_angle: Option<f64>,
    pub e: Option<[f64; 2]>,
    /// Common quadratic part `P = 1/2 <A x, x>`.
    pub a_matrix: Sym2,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// RMS fit residual divided by the largest profile magnitude.
    pub misfit: f64,
    /// Frobenius norm of the part of each `M_j` outside the common family.
    pub quadratic_deviation: Vec<f64>,
    pub fits: Vec<MembraneFit>,
    /// Fitted free-boundary line angle per pair, when the pair has a kink.
    pub pair_lines: Vec<Option<f64>>,
    /// Largest `|sin|` of the angle between two fitted pair lines.
    pub alignment_defect: f64,
    pub degenerate: bool,
    pub label: Option<Category>,
}

/// Sample points and values used by the fit.
struct FitData {
    xs: Vec<f64>,
    ys: Vec<f64>,
    us: Vec<Vec<f64>>,
    scale: f64,
}

impl FitData {
    fn from_profile(profile: &BlowupProfile) -> Self {
        let d = &profile.reference;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut us = vec![Vec::new(); profile.len()];
        for &k in d.interior_nodes() {
            let (x, y) = d.coords_of(k);
            if x.hypot(y) > 0.9 {
                continue;
            }
            xs.push(x);
            ys.push(y);
            for (j, f) in profile.stack.fields().iter().enumerate() {
                us[j].push(f.values()[k]);
            }
        }
        let scale = us.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        Self { xs, ys, us, scale }
    }

    fn strided(&self, stride: usize) -> Self {
        let idx: Vec<usize> = (0..self.xs.len()).step_by(stride).collect();
        Self {
            xs: idx.iter().map(|&i| self.xs[i]).collect(),
            ys: idx.iter().map(|&i| self.ys[i]).collect(),
            us: self.us.iter().map(|u| idx.iter().map(|&i| u[i]).collect()).collect(),
            scale: self.scale,
        }
    }

    fn basis(&self, i: usize, e: [f64; 2], ramp: bool, out: &mut [f64; 4]) -> usize {
        let (x, y) = (self.xs[i], self.ys[i]);
        out[0] = 0.5 * x * x;
        out[1] = x * y;
        out[2] = 0.5 * y * y;
        if ramp {
            let t = (e[0] * x + e[1] * y).max(0.0);
            out[3] = t * t;
            4
        } else {
            3
        }
    }

    /// Least-squares coefficients and total squared residual for the fields
    /// `us` (given as closures over sample index).
    fn fit(&self, fields: &[Vec<f64>], e: [f64; 2], ramp: bool) -> (Vec<[f64; 4]>, f64) {
        let mut ata = [[0.0; 4]; 4];
        let mut atb = vec![[0.0; 4]; fields.len()];
        let mut phi = [0.0; 4];
        let mut dim = 3;
        for i in 0..self.xs.len() {
            dim = self.basis(i, e, ramp, &mut phi);
            for a in 0..dim {
                for b in 0..dim {
                    ata[a][b] += phi[a] * phi[b];
                }
                for (j, u) in fields.iter().enumerate() {
                    atb[j][a] += phi[a] * u[i];
                }
            }
        }
        let coeffs: Vec<[f64; 4]> = atb.iter().map(|rhs| solve_small(&ata, rhs, dim)).collect();
        let mut res = 0.0;
        for i in 0..self.xs.len() {
            self.basis(i, e, ramp, &mut phi);
            for (j, u) in fields.iter().enumerate() {
                let c = &coeffs[j];
                let v: f64 = (0..dim).map(|a| c[a] * phi[a]).sum();
                res += (u[i] - v).powi(2);
            }
        }
        (coeffs, res)
    }

    fn misfit(&self, fields: &[Vec<f64>], angle: f64) -> f64 {
        self.fit(fields, unit(angle), true).1
    }
}

/// Gaussian elimination with partial pivoting on the leading `dim` block.
fn solve_small(a: &[[f64; 4]; 4], b: &[f64; 4], dim: usize) -> [f64; 4] {
    let mut m = *a;
    let mut v = *b;
    for c in 0..dim {
        let p = (c..dim).max_by(|&i, &j| m[i][c].abs().partial_cmp(&m[j][c].abs()).unwrap()).unwrap();
        m.swap(c, p);
        v.swap(c, p);
        let piv = m[c][c];
        if piv.abs() < 1e-300 {
            continue;
        }
        for r in c + 1..dim {
            let f = m[r][c] / piv;
            for k in c..dim {
                m[r][k] -= f * m[c][k];
            }
            v[r] -= f * v[c];
        }
    }
    let mut x = [0.0; 4];
    for c in (0..dim).rev() {
        let s: f64 = (c + 1..dim).map(|k| m[c][k] * x[k]).sum();
        x[c] = if m[c][c].abs() < 1e-300 { 0.0 } else { (v[c] - s) / m[c][c] };
    }
    x
}

/// Coarse search over `m_e` angles in `[0, pi)` on a subsample, then golden
/// section on all samples.
fn search_angle(data: &FitData, fields: &[Vec<f64>], m_e: usize) -> f64 {
    let stride = 7;
    let coarse = data.strided(stride);
    let coarse_fields: Vec<Vec<f64>> =
        fields.iter().map(|u| u.iter().step_by(stride).copied().collect()).collect();
    let step = PI / m_e as f64;
    let (mut best, mut best_val) = (0.0, f64::INFINITY);
    for i in 0..m_e {
        let t = i as f64 * step;
        let v = coarse.misfit(&coarse_fields, t);
        if v < best_val {
            best = t;
            best_val = v;
        }
    }
    let (mut a, mut b) = (best - step, best + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = data.misfit(fields, c);
    let mut fd = data.misfit(fields, d);
    while b - a > 1e-12 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = data.misfit(fields, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = data.misfit(fields, d);
        }
    }
    (0.5 * (a + b)).rem_euclid(PI)
}

fn rms(res: f64, count: usize, scale: f64) -> f64 {
    if scale == 0.0 {
        0.0
    } else {
        (res / count.max(1) as f64).sqrt() / scale
    }
}

/// Fits `u_j = P + a_j (x.e)_+^2 - b_j (x.e)_-^2` with a common `P` chosen as
/// the mean quadratic part; the residual quadratic parts are reported in
/// `quadratic_deviation`. The sign of `e` makes the first nonzero kink
/// coefficient `a_j + b_j` positive.
pub fn classify_halfspace(profile: &BlowupProfile) -> ClassificationResult {
    classify_halfspace_with(profile, 360)
}

pub fn classify_halfspace_with(profile: &BlowupProfile, m_e: usize) -> ClassificationResult {
    let data = FitData::from_profile(profile);
    let n = profile.len();
    let count = data.xs.len() * n;
    let kink_tol = 1e-9 * data.scale.max(1e-300);
    let pair_fields: Vec<Vec<f64>> =
        (0..n - 1).map(|j| data.us[j].iter().zip(&data.us[j + 1]).map(|(a, b)| a - b).collect()).collect();
    let pair_scale = pair_fields.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let degenerate = pair_scale <= 1e-12 * data.scale.max(1e-300) || data.scale == 0.0;

    let (poly, poly_res) = data.fit(&data.us, [1.0, 0.0], false);
    let poly_fits: Vec<MembraneFit> =
        poly.iter().map(|c| MembraneFit { m: Sym2::new(c[0], c[1], c[2]), alpha: 0.0 }).collect();
    let mut result = ClassificationResult {
        e_angle: None,
        e: None,
        a_matrix: mean_sym(poly_fits.iter().map(|f| f.m)),
        a: vec![0.0; n],
        b: vec![0.0; n],
        misfit: rms(poly_res, count, data.scale),
        quadratic_deviation: Vec::new(),
        fits: poly_fits,
        pair_lines: vec![None; n - 1],
        alignment_defect: 0.0,
        degenerate,
        label: None,
    };
    result.quadratic_deviation = result.fits.iter().map(|f| f.m.sub(&result.a_matrix).norm()).collect();
    if degenerate {
        return result;
    }

    let angle = search_angle(&data, &data.us, m_e);
    let (coeffs, res) = data.fit(&data.us, unit(angle), true);
    let max_alpha = coeffs.iter().fold(0.0f64, |m, c| m.max(c[3].abs()));
    if max_alpha <= kink_tol || rms(res, count, data.scale) >= result.misfit {
        return result;
    }
    let mut fits: Vec<MembraneFit> =
        coeffs.iter().map(|c| MembraneFit { m: Sym2::new(c[0], c[1], c[2]), alpha: c[3] }).collect();
    let mut angle = angle;
    let flip = fits.iter().find(|f| f.alpha.abs() > kink_tol).map_or(false, |f| f.alpha < 0.0);
    if flip {
        // (-t)_+^2 = t^2 - t_+^2
        angle += PI;
        let e = unit(angle);
        for f in &mut fits {
            f.m = f.m.add(&Sym2::outer(e).scale(2.0 * f.alpha));
            f.alpha = -f.alpha;
        }
    }
    let angle = angle.rem_euclid(2.0 * PI);
    let e = unit(angle);
    let ee = Sym2::outer(e);
    let a_matrix = mean_sym(fits.iter().map(|f| f.m));
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut dev = Vec::with_capacity(n);
    for f in &fits {
        let diff = f.m.sub(&a_matrix);
        let beta = 0.5 * diff.quad(e[0], e[1]);
        a.push(f.alpha + beta);
        b.push(-beta);
        dev.push(diff.sub(&ee.scale(2.0 * beta)).norm());
    }

    let mut pair_lines = vec![None; n - 1];
    for j in 0..n - 1 {
        if (fits[j].alpha - fits[j + 1].alpha).abs() > kink_tol {
            let t = search_angle(&data, std::slice::from_ref(&pair_fields[j]), m_e);
            pair_lines[j] = Some(t);
        }
    }
    let lines: Vec<f64> = pair_lines.iter().flatten().copied().collect();
    let mut alignment = 0.0f64;
    for (i, &s) in lines.iter().enumerate() {
        for &t in &lines[i + 1..] {
            alignment = alignment.max((s - t).sin().abs());
        }
    }
    ClassificationResult {
        e_angle: Some(angle),
        e: Some(e),
        a_matrix,
        a,
        b,
        misfit: rms(res, count, data.scale),
        quadratic_deviation: dev,
        fits,
        pair_lines,
        alignment_defect: alignment,
        degenerate: false,
        label: None,
    }
}

fn mean_sym(it: impl Iterator<Item = Sym2>) -> Sym2 {
    let mut s = Sym2::ZERO;
    let mut c = 0.0;
    for m in it {
        s = s.add(&m);
        c += 1.0;
    }
    if c > 0.0 {
        s.scale(1.0 / c)
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMatch {
    pub label: Option<Category>,
    /// Coefficient-space distance to each template, in the order i..v.
    pub template_misfits: Vec<(Category, f64)>,
    /// Parameters of the best template.
    pub params: Option<Example46>,
    pub misfit: f64,
}

/// Matches the per-membrane fit against the five three-membrane templates.
pub fn classify_example46(result: &ClassificationResult, forcing: &Forcing) -> Result<CategoryMatch> {
    if result.fits.len() != 3 {
        return Err(Error::InvalidArgument(format!(
            "classification needs N = 3 (got {})",
            result.fits.len()
        )));
    }
    if !forcing.is_constant() || forcing.constants() != CANONICAL_FORCING {
        return Err(Error::Forcing("classification needs forcing (1, 0, -1)".into()));
    }
    let m: Vec<Sym2> = result.fits.iter().map(|f| f.m).collect();
    let al: Vec<f64> = result.fits.iter().map(|f| f.alpha).collect();
    let angle = result.e_angle.unwrap_or(0.0);
    let ee = Sym2::outer(unit(angle));
    let trace_fix = |a: Sym2| a.add(&Sym2::IDENTITY.scale(0.5 * (1.0 - a.trace())));
    let dist = |tm: [Sym2; 3], ta: [f64; 3]| -> f64 {
        let mut s = 0.0;
        for j in 0..3 {
            s += m[j].sub(&tm[j]).norm().powi(2) + (al[j] - ta[j]).powi(2);
        }
        s.sqrt()
    };
    let mut out = Vec::new();
    let mut params = Vec::new();

    let t = dist([Sym2::ZERO; 3], [0.5, 0.0, -0.5]);
    out.push((Category::I, t));
    params.push(Example46::I { angle });

    let t = dist([ee.scale(0.5), ee.scale(0.5), ee.scale(-1.0)], [0.25, -0.5, 0.25]);
    out.push((Category::Ii, t));
    params.push(Example46::Ii { angle });

    let a3 = trace_fix(m[0].add(&m[1]).scale(0.5).sub(&m[2]).scale(1.0 / 1.5));
    let t = dist([a3.scale(0.5), a3.scale(0.5), a3.scale(-1.0)], [0.25, -0.25, 0.0]);
    out.push((Category::Iii, t));
    params.push(Example46::Iii { angle, a: a3 });

    let a4 = trace_fix(m[0].sub(&m[1].add(&m[2]).scale(0.5)).scale(1.0 / 1.5));
    let t = dist([a4, a4.scale(-0.5), a4.scale(-0.5)], [0.0, 0.25, -0.25]);
    out.push((Category::Iv, t));
    params.push(Example46::Iv { angle, a: a4 });

    let mean = mean_sym(m.iter().copied());
    let targets = [1.0, 0.0, -1.0];
    let av: Vec<Sym2> = (0..3)
        .map(|j| {
            let c = m[j].sub(&mean);
            c.add(&Sym2::IDENTITY.scale(0.5 * (targets[j] - c.trace())))
        })
        .collect();
    let t = dist([av[0], av[1], av[2]], [0.0; 3]);
    out.push((Category::V, t));
    params.push(Example46::V { a1: av[0], a2: av[1] });

    let (best, &(cat, mis)) = out
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap())
        .unwrap();
    let ok = mis <= TAU_CAT && result.misfit <= TAU_CAT;
    Ok(CategoryMatch {
        label: ok.then_some(cat),
        template_misfits: out,
        params: ok.then_some(params[best]),
        misfit: mis,
    })
}

/// Fit followed by template matching; the label is stored in the result.
pub fn classify(profile: &BlowupProfile, forcing: &Forcing) -> Result<(ClassificationResult, CategoryMatch)> {
    let mut r = classify_halfspace(profile);
    let m = classify_example46(&r, forcing)?;
    r.label = m.label;
    Ok((r, m))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Connectedness {
    pub pair: usize,
    pub connected: bool,
    /// Longest contact arc on the probe circle.
    pub longest_contact_arc: f64,
    pub contact_arcs: usize,
}

/// Contact set of each pair on the circle `|x| = r_probe`: connected when it
/// contains an arc of at least four samples.
pub fn connectedness_check(profile: &BlowupProfile, r_probe: f64, eps: f64) -> Result<Vec<Connectedness>> {
    if !(r_probe > 0.2 && r_probe < 0.9) {
        return Err(Error::InvalidArgument(format!("r_probe must lie in (0.2, 0.9) (got {r_probe})")));
    }
    let h = profile.reference.h();
    let m = (4.0 * (2.0 * PI * r_probe / h).ceil()) as usize;
    let c = circle_restriction(&profile.stack, (0.0, 0.0), r_probe, m.max(256), eps)?;
    Ok(c.contact_arcs
        .iter()
        .enumerate()
        .map(|(pair, arcs)| {
            let longest = arcs.iter().map(|a| a.samples).max().unwrap_or(0);
            Connectedness {
                pair,
                connected: longest >= 4,
                longest_contact_arc: longest as f64 * 2.0 * PI / c.m as f64,
                contact_arcs: arcs.len(),
            }
        })
        .collect())
}

/// Reference-grid contact threshold for profiles built with forcing `f`.
pub fn profile_contact_eps(profile: &BlowupProfile, forcing: &Forcing) -> f64 {
    crate::geometry::default_contact_eps(&profile.reference, forcing)
}

/// Wraps an analytic stack sampled on the reference lattice as a profile.
pub fn profile_from_stack(stack: MembraneStack, source: impl Into<String>) -> Result<BlowupProfile> {
    let d = stack.domain().clone();
    if d.radius() != 1.0 || d.shape() != DomainShape::Disk {
        return Err(Error::InvalidArgument("profiles live on the unit disk".into()));
    }
    if d.class(d.index(d.origin())) != NodeClass::Interior {
        return Err(Error::InvalidGrid("origin must be interior".into()));
    }
    let grad = max_norm(&origin_gradients(&stack));
    let n = stack.len();
    Ok(BlowupProfile {
        reference: d,
        stack,
        p: (0.0, 0.0),
        r: 1.0,
        source: source.into(),
        offsets: vec![0.0; n],
        gradients: vec![(0.0, 0.0); n],
        origin_gradient: grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{contact_sets, default_contact_eps, free_boundary_nodes};
    use crate::profiles::example46_stack;

    fn cat_profile(p: Example46, n: usize) -> BlowupProfile {
        let d = build_domain(n, 1.0, DomainShape::Disk).unwrap();
        profile_from_stack(example46_stack(&p, d).unwrap(), "test").unwrap()
    }

    #[test]
    fn identity_rescale_copies_values() {
        let d = build_domain(65, 1.0, DomainShape::Disk).unwrap();
        let s = example46_stack(&Example46::canonical(Category::Ii, 0.3), d.clone()).unwrap();
        let f = Forcing::constant(CANONICAL_FORCING.to_vec());
        let fb = free_boundary_nodes(&contact_sets(&s, default_contact_eps(&d, &f)));
        let prof = rescale(&s, &fb, d.index(d.origin()), 1.0, 65).unwrap();
        for j in 0..3 {
            assert_eq!(prof.stack.field(j).values(), s.field(j).values());
        }
    }

    #[test]
    fn category_i_rescales_to_itself() {
        let d = build_domain(129, 1.0, DomainShape::Disk).unwrap();
        let s = example46_stack(&Example46::canonical(Category::I, 0.0), d.clone()).unwrap();
        let f = Forcing::constant(CANONICAL_FORCING.to_vec());
        let fb = free_boundary_nodes(&contact_sets(&s, default_contact_eps(&d, &f)));
        let o = d.index(d.origin());
        for r in [0.25, 0.5] {
            let prof = rescale(&s, &fb, o, r, 129).unwrap();
            for j in 0..3 {
                for k in d.active_nodes() {
                    let (a, b) = (prof.stack.field(j).values()[k], s.field(j).values()[k]);
                    // linear interpolation error of x^2/2, scaled by 1/r^2
                    assert!((a - b).abs() <= d.h() * d.h() / (8.0 * r * r) + 1e-14, "{a} {b} {r}");
                }
            }
        }
        let away = d.index(d.nearest_node(0.5, 0.0));
        assert!(matches!(rescale(&s, &fb, away, 0.25, 129), Err(Error::NotHighestMultiplicity { .. })));
        assert!(matches!(rescale(&s, &fb, o, 1.5, 129), Err(Error::BallNotContained { .. })));
    }

    #[test]
    fn homogeneity_defect_of_cubic() {
        let d = build_domain(129, 1.0, DomainShape::Disk).unwrap();
        let s = MembraneStack::from_fn(d, 2, |x, y, u| u.copy_from_slice(&[x.hypot(y).powi(3), 0.0])).unwrap();
        let p = profile_from_stack(s, "cubic").unwrap();
        let def = homogeneity_defect(&p, &[0.5]).unwrap();
        // (1 - lambda) |x|^3 at the largest admissible node radius
        assert!(def > 0.3 && def <= 0.5 * 0.729 + 1e-3, "{def}");
        let q = cat_profile(Example46::canonical(Category::Iii, 0.2), 129);
        assert!(homogeneity_defect(&q, &[0.5, 0.25]).unwrap() < 1e-3);
        assert!(homogeneity_defect(&q, &[1.5]).is_err());
    }

    #[test]
    fn classify_roundtrip_all_categories() {
        for c in Category::ALL {
            for angle in [0.0, PI / 6.0] {
                let p = Example46::canonical(c, angle);
                let prof = cat_profile(p, 65);
                let f = Forcing::constant(CANONICAL_FORCING.to_vec());
                let (r, m) = classify(&prof, &f).unwrap();
                assert!(r.misfit <= 1e-8, "{c} {angle}: misfit {}", r.misfit);
                assert_eq!(m.label, Some(c), "{c} {angle}: {:?}", m.template_misfits);
                if let Some(t) = r.e_angle {
                    let err = (t - angle).rem_euclid(2.0 * PI);
                    assert!(err.min(2.0 * PI - err) < 0.5f64.to_radians(), "{c}: {t}");
                }
                assert!(r.alignment_defect <= prof.reference.h());
            }
        }
    }

    #[test]
    fn category_i_coefficients() {
        let prof = cat_profile(Example46::canonical(Category::I, 0.0), 65);
        let r = classify_halfspace(&prof);
        for (x, y) in r.a.iter().zip([0.5, 0.0, -0.5]) {
            assert!((x - y).abs() < 1e-9);
        }
        assert!(r.b.iter().all(|b| b.abs() < 1e-9));
        assert!(r.a_matrix.max_abs_entry() < 1e-9);
    }

    #[test]
    fn degenerate_profile() {
        let d = build_domain(33, 1.0, DomainShape::Disk).unwrap();
        let prof = profile_from_stack(MembraneStack::zeros(d, 3).unwrap(), "zero").unwrap();
        let r = classify_halfspace(&prof);
        assert!(r.degenerate && r.e.is_none());
        assert!(r.a.iter().chain(&r.b).all(|&v| v == 0.0));
    }

    #[test]
    fn classify_rejects_wrong_forcing() {
        let prof = cat_profile(Example46::canonical(Category::I, 0.0), 33);
        let r = classify_halfspace(&prof);
        assert!(classify_example46(&r, &Forcing::constant(vec![1.0, 0.0, -2.0])).is_err());
    }

    #[test]
    fn connectedness_of_categories() {
        let f = Forcing::constant(CANONICAL_FORCING.to_vec());
        let p = cat_profile(Example46::canonical(Category::I, 0.0), 129);
        let eps = profile_contact_eps(&p, &f);
        let v = connectedness_check(&p, 0.5, eps).unwrap();
        assert!(v[0].connected);
        assert!((v[0].longest_contact_arc - PI).abs() < 0.1);
        let p = cat_profile(Example46::canonical(Category::V, 0.0), 129);
        let v = connectedness_check(&p, 0.5, eps).unwrap();
        assert!(v.iter().all(|c| !c.connected));
        let z = profile_from_stack(MembraneStack::zeros(p.reference.clone(), 3).unwrap(), "z").unwrap();
        assert!(connectedness_check(&z, 0.5, eps).unwrap().iter().all(|c| c.connected));
        assert!(connectedness_check(&z, 0.95, eps).is_err());
    }
}
