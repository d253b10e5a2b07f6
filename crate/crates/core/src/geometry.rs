//! Contact sets, free boundaries, growth scans and circle restrictions.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{hessian_at, interpolate, interpolate_quadratic, Forcing, GridDomain, MembraneStack, NodeClass};

/// Per-pair contact indicators `u_j - u_{j+1} <= eps`.
#[derive(Debug, Clone)]
pub struct ContactMask {
    domain: Arc<GridDomain>,
    eps: f64,
    mask: Vec<Vec<bool>>,
}

impl ContactMask {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn pairs(&self) -> usize {
        self.mask.len()
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    #[inline]
    pub fn in_contact(&self, pair: usize, k: usize) -> bool {
        self.mask[pair][k]
    }

    pub fn pair_mask(&self, pair: usize) -> &[bool] {
        &self.mask[pair]
    }

    /// Number of contact nodes of `pair` among interior nodes.
    pub fn count(&self, pair: usize) -> usize {
        self.domain.interior_nodes().iter().filter(|&&k| self.mask[pair][k]).count()
    }
}

/// Default threshold `0.01 h^2 max(1, max |f_j|)`.
pub fn default_contact_eps(domain: &GridDomain, forcing: &Forcing) -> f64 {
    0.01 * domain.h() * domain.h() * forcing.max_abs().max(1.0)
}

/// Thresholded contact masks. Exterior nodes are never in contact.
pub fn contact_sets(stack: &MembraneStack, eps: f64) -> ContactMask {
    let d = stack.domain().clone();
    let mask = (0..stack.len() - 1)
        .map(|j| {
            let a = stack.field(j).values();
            let b = stack.field(j + 1).values();
            (0..d.len()).map(|k| d.is_active(k) && a[k] - b[k] <= eps).collect()
        })
        .collect();
    ContactMask { domain: d, eps, mask }
}

/// Contact multiplicity and free-boundary nodes.
///
/// A free-boundary node of pair `j` is an interior node with an interior axis
/// neighbour of the opposite contact state; both sides of a transition edge
/// are included.
#[derive(Debug, Clone)]
pub struct MultiplicityMap {
    domain: Arc<GridDomain>,
    multiplicity: Vec<u8>,
    fb: Vec<Vec<usize>>,
    fb_mask: Vec<Vec<bool>>,
}

pub fn free_boundary_nodes(mask: &ContactMask) -> MultiplicityMap {
    let d = mask.domain.clone();
    let n = d.n();
    let mut multiplicity = vec![0u8; d.len()];
    let mut fb = vec![Vec::new(); mask.pairs()];
    let mut fb_mask = vec![vec![false; d.len()]; mask.pairs()];
    for j in 0..mask.pairs() {
        let m = &mask.mask[j];
        for &k in d.interior_nodes() {
            if m[k] {
                multiplicity[k] += 1;
            }
            let on_fb = [k + 1, k - 1, k + n, k - n]
                .iter()
                .any(|&q| d.class(q) == NodeClass::Interior && m[q] != m[k]);
            if on_fb {
                fb[j].push(k);
                fb_mask[j][k] = true;
            }
        }
    }
    MultiplicityMap { domain: d, multiplicity, fb, fb_mask }
}

impl MultiplicityMap {
    pub fn multiplicity(&self, k: usize) -> u8 {
        self.multiplicity[k]
    }

    pub fn free_boundary(&self, pair: usize) -> &[usize] {
        &self.fb[pair]
    }

    pub fn pairs(&self) -> usize {
        self.fb.len()
    }

    pub fn is_free_boundary(&self, pair: usize, k: usize) -> bool {
        self.fb_mask[pair][k]
    }

    /// On the free boundary of every pair.
    pub fn is_highest_multiplicity(&self, k: usize) -> bool {
        !self.fb.is_empty() && self.fb_mask.iter().all(|m| m[k])
    }

    pub fn highest_multiplicity_nodes(&self) -> Vec<usize> {
        self.domain.interior_nodes().iter().copied().filter(|&k| self.is_highest_multiplicity(k)).collect()
    }

    /// Highest-multiplicity node closest to `(x, y)`.
    pub fn nearest_highest_multiplicity(&self, x: f64, y: f64) -> Option<usize> {
        self.highest_multiplicity_nodes().into_iter().min_by(|&a, &b| {
            let da = dist2(self.domain.coords_of(a), (x, y));
            let db = dist2(self.domain.coords_of(b), (x, y));
            da.partial_cmp(&db).unwrap().then(a.cmp(&b))
        })
    }

    /// Nodes within `radius` of a free-boundary node of any pair.
    pub fn near_free_boundary(&self, domain: &GridDomain, radius: f64) -> Vec<bool> {
        let n = domain.n();
        let h = domain.h();
        let w = (radius / h + 1e-9).floor() as i64;
        let r2 = (radius + 1e-9 * h).powi(2);
        let mut out = vec![false; domain.len()];
        for fb in &self.fb {
            for &k in fb {
                let (i, j) = domain.node(k);
                for dj in -w..=w {
                    for di in -w..=w {
                        let (ii, jj) = (i as i64 + di, j as i64 + dj);
                        if ii < 0 || jj < 0 || ii >= n as i64 || jj >= n as i64 {
                            continue;
                        }
                        if ((di * di + dj * dj) as f64) * h * h <= r2 {
                            out[jj as usize * n + ii as usize] = true;
                        }
                    }
                }
            }
        }
        out
    }
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthScan {
    pub p: (f64, f64),
    pub radii: Vec<f64>,
    /// `sups[j][i]` is `sup_{B_{r_i}(p)} (u_j - u_{j+1})` over grid nodes and
    /// interpolated samples on the circle.
    pub sups: Vec<Vec<f64>>,
    /// Least-squares slope of `log sup` against `log r`; `None` when degenerate.
    pub slopes: Vec<Option<f64>>,
    pub c_upper: Vec<f64>,
    pub c_lower: Vec<f64>,
    /// Set by [`nondegeneracy_scan`] when `c_lower < c_min`.
    pub flagged: Vec<bool>,
    pub c_min: Option<f64>,
}

impl GrowthScan {
    pub fn any_flagged(&self) -> bool {
        self.flagged.iter().any(|&f| f)
    }
}

/// Growth of the pairwise gaps around a highest-multiplicity node.
///
/// The slope is fitted over radii in `[4h, R/4]` only.
pub fn quadratic_growth_scan(
    stack: &MembraneStack,
    fb: &MultiplicityMap,
    p: usize,
    radii: &[f64],
) -> Result<GrowthScan> {
    let d = stack.domain();
    if !fb.is_highest_multiplicity(p) {
        let (i, j) = d.node(p);
        return Err(Error::NotHighestMultiplicity { i, j });
    }
    let (px, py) = d.coords_of(p);
    for &r in radii {
        check_ball(d, px, py, r)?;
    }
    let pairs = stack.len() - 1;
    let mut sups = vec![vec![0.0; radii.len()]; pairs];
    let diffs: Vec<_> = (0..pairs).map(|j| stack.pair_difference(j)).collect();
    let gaps: Vec<&[f64]> = diffs.iter().map(|f| f.values()).collect();
    let n = d.n();
    let h = d.h();
    let (pi, pj) = d.node(p);
    for (ri, &r) in radii.iter().enumerate() {
        let w = (r / h + 1e-9).floor() as i64;
        let r2 = r * r * (1.0 + 1e-12);
        for dj in -w..=w {
            for di in -w..=w {
                let (ii, jj) = (pi as i64 + di, pj as i64 + dj);
                if ii < 0 || jj < 0 || ii >= n as i64 || jj >= n as i64 {
                    continue;
                }
                if ((di * di + dj * dj) as f64) * h * h > r2 {
                    continue;
                }
                let k = jj as usize * n + ii as usize;
                if !d.is_active(k) {
                    continue;
                }
                for j in 0..pairs {
                    sups[j][ri] = f64::max(sups[j][ri], gaps[j][k]);
                }
            }
        }
        // the sphere itself, between lattice nodes
        let m = ((8.0 * PI * r / h).ceil() as usize).max(64);
        for a in 0..m {
            let t = 2.0 * PI * a as f64 / m as f64;
            let (x, y) = (px + r * t.cos(), py + r * t.sin());
            for j in 0..pairs {
                if let Ok(v) = interpolate_quadratic(&diffs[j], x, y) {
                    sups[j][ri] = f64::max(sups[j][ri], v);
                }
            }
        }
    }
    let lo = 4.0 * h * (1.0 - 1e-9);
    let hi = d.radius() / 4.0 * (1.0 + 1e-9);
    let mut slopes = Vec::with_capacity(pairs);
    let mut c_upper = Vec::with_capacity(pairs);
    let mut c_lower = Vec::with_capacity(pairs);
    for s in &sups {
        let pts: Vec<(f64, f64)> = radii
            .iter()
            .zip(s)
            .filter(|(&r, _)| r >= lo && r <= hi)
            .map(|(&r, &v)| (r, v))
            .collect();
        slopes.push(loglog_slope(&pts));
        let q = radii.iter().zip(s).map(|(&r, &v)| v / (r * r));
        c_upper.push(q.clone().fold(0.0, f64::max));
        c_lower.push(q.fold(f64::INFINITY, f64::min));
    }
    Ok(GrowthScan { p: (px, py), radii: radii.to_vec(), sups, slopes, c_upper, c_lower, flagged: vec![false; pairs], c_min: None })
}

fn loglog_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 || pts.iter().any(|&(_, v)| !(v > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

/// Growth scan with the non-degeneracy floor `c_min` (default `0.05 theta`).
pub fn nondegeneracy_scan(
    stack: &MembraneStack,
    fb: &MultiplicityMap,
    p: usize,
    radii: &[f64],
    theta: f64,
    c_min: Option<f64>,
) -> Result<GrowthScan> {
    if !(theta > 0.0) {
        return Err(Error::Forcing(format!(
            "non-degeneracy scan needs theta > 0 (got {theta})"
        )));
    }
    let mut scan = quadratic_growth_scan(stack, fb, p, radii)?;
    let floor = c_min.unwrap_or(0.05 * theta);
    scan.flagged = scan.c_lower.iter().map(|&c| c < floor).collect();
    scan.c_min = Some(floor);
    Ok(scan)
}

fn check_ball(d: &GridDomain, x: f64, y: f64, r: f64) -> Result<()> {
    let reach = match d.shape() {
        crate::grid::DomainShape::Disk => (x * x + y * y).sqrt() + r,
        crate::grid::DomainShape::Square => x.abs().max(y.abs()) + r,
    };
    if !(r > 0.0) || reach > d.radius() * (1.0 + 1e-12) {
        return Err(Error::BallNotContained { x, y, r });
    }
    Ok(())
}

/// Largest Hessian entry over interior nodes at distance `>= margin` from the
/// domain boundary.
pub fn hessian_bound_report(stack: &MembraneStack, margin: f64) -> f64 {
    let d = stack.domain();
    let n = d.n();
    let h = d.h();
    let mut bound = 0.0f64;
    for &k in d.interior_nodes() {
        if d.distance_to_boundary(k) < margin {
            continue;
        }
        let diag = [k + n + 1, k + n - 1, k - n + 1, k - n - 1];
        if diag.iter().any(|&q| !d.is_active(q)) {
            continue;
        }
        for f in stack.fields() {
            bound = bound.max(hessian_at(f.values(), n, h, k).max_abs_entry());
        }
    }
    bound
}

/// Run of consecutive circle samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleArc {
    /// Angle of the first sample in the run.
    pub start: f64,
    /// `samples * 2 pi / m`.
    pub length: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleRestriction {
    pub center: (f64, f64),
    pub r: f64,
    pub m: usize,
    pub eps: f64,
    /// `values[j][i]` is `u_j` at angle `2 pi i / m`.
    pub values: Vec<Vec<f64>>,
    /// Arcs where `u_j - u_{j+1} > eps`, per pair.
    pub positive_arcs: Vec<Vec<CircleArc>>,
    /// Complementary arcs where the pair is in contact.
    pub contact_arcs: Vec<Vec<CircleArc>>,
}

impl CircleRestriction {
    pub fn angle(&self, i: usize) -> f64 {
        2.0 * PI * i as f64 / self.m as f64
    }
}

pub fn circle_restriction(
    stack: &MembraneStack,
    center: (f64, f64),
    r: f64,
    m: usize,
    eps: f64,
) -> Result<CircleRestriction> {
    if m < 64 {
        return Err(Error::InvalidArgument(format!("need at least 64 circle samples (got {m})")));
    }
    let (cx, cy) = center;
    let mut values = vec![vec![0.0; m]; stack.len()];
    for i in 0..m {
        let t = 2.0 * PI * i as f64 / m as f64;
        let (x, y) = (cx + r * t.cos(), cy + r * t.sin());
        for (j, f) in stack.fields().iter().enumerate() {
            values[j][i] = interpolate(f, x, y).map_err(|_| Error::BallNotContained { x: cx, y: cy, r })?;
        }
    }
    let mut positive_arcs = Vec::new();
    let mut contact_arcs = Vec::new();
    for j in 0..stack.len() - 1 {
        let pos: Vec<bool> = (0..m).map(|i| values[j][i] - values[j + 1][i] > eps).collect();
        positive_arcs.push(runs(&pos, true, m));
        contact_arcs.push(runs(&pos, false, m));
    }
    Ok(CircleRestriction { center, r, m, eps, values, positive_arcs, contact_arcs })
}

/// Maximal periodic runs of `flags[i] == state`.
fn runs(flags: &[bool], state: bool, m: usize) -> Vec<CircleArc> {
    let step = 2.0 * PI / m as f64;
    if flags.iter().all(|&f| f == state) {
        return vec![CircleArc { start: 0.0, length: 2.0 * PI, samples: m }];
    }
    // start scanning just after a sample of the other state
    let first = (0..m).find(|&i| flags[i] != state).unwrap();
    let mut out = Vec::new();
    let mut i = 1;
    while i <= m {
        let k = (first + i) % m;
        if flags[k] == state {
            let start = k;
            let mut len = 0;
            while i <= m && flags[(first + i) % m] == state {
                len += 1;
                i += 1;
            }
            out.push(CircleArc { start: start as f64 * step, length: len as f64 * step, samples: len });
        } else {
            i += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_domain, DomainShape};

    fn category_i(n: usize) -> MembraneStack {
        let d = build_domain(n, 1.0, DomainShape::Disk).unwrap();
        MembraneStack::from_fn(d, 3, |x, _, u| {
            let t = 0.5 * x.max(0.0).powi(2);
            u.copy_from_slice(&[t, 0.0, -t]);
        })
        .unwrap()
    }

    #[test]
    fn category_i_contact_and_free_boundary() {
        let s = category_i(65);
        let d = s.domain().clone();
        let f = Forcing::constant(vec![1.0, 0.0, -1.0]);
        let mask = contact_sets(&s, default_contact_eps(&d, &f));
        let h = d.h();
        for &k in d.interior_nodes() {
            let (x, _) = d.coords_of(k);
            for j in 0..2 {
                if x <= 0.0 {
                    assert!(mask.in_contact(j, k));
                } else if x > h * 1.5 {
                    assert!(!mask.in_contact(j, k));
                }
            }
        }
        let fb = free_boundary_nodes(&mask);
        for j in 0..2 {
            assert!(!fb.free_boundary(j).is_empty());
            for &k in fb.free_boundary(j) {
                assert!(d.coords_of(k).0.abs() <= h * 1.0001);
            }
        }
        assert!(fb.is_highest_multiplicity(d.index(d.origin())));
    }

    #[test]
    fn trivial_masks() {
        let d = build_domain(17, 1.0, DomainShape::Disk).unwrap();
        let eq = MembraneStack::zeros(d.clone(), 3).unwrap();
        let m = contact_sets(&eq, 1e-6);
        assert_eq!(m.count(0), d.interior_nodes().len());
        let fb = free_boundary_nodes(&m);
        assert!(fb.free_boundary(0).is_empty() && fb.free_boundary(1).is_empty());
        let sep = MembraneStack::from_fn(d.clone(), 3, |_, _, u| u.copy_from_slice(&[1.0, 0.0, -1.0])).unwrap();
        let m = contact_sets(&sep, 1e-6);
        assert_eq!(m.count(0) + m.count(1), 0);
        assert!(free_boundary_nodes(&m).free_boundary(0).is_empty());
    }

    #[test]
    fn nondegeneracy_on_category_i() {
        let s = category_i(65);
        let d = s.domain().clone();
        let f = Forcing::with_separation(vec![1.0, 0.0, -1.0], 1.0).unwrap();
        let fb = free_boundary_nodes(&contact_sets(&s, default_contact_eps(&d, &f)));
        let o = d.index(d.origin());
        let radii: Vec<f64> = (1..=8).map(|i| i as f64 * 0.125).collect();
        let scan = nondegeneracy_scan(&s, &fb, o, &radii, 1.0, None).unwrap();
        assert!((scan.c_lower[0] - 0.5).abs() < 1e-12);
        assert!(!scan.any_flagged());
        assert!(nondegeneracy_scan(&s, &fb, o, &radii, 0.0, None).is_err());
        let growth = quadratic_growth_scan(&s, &fb, o, &[0.125, 0.1875, 0.25]).unwrap();
        assert!((growth.slopes[0].unwrap() - 2.0).abs() < 1e-9);
        for w in scan.sups[0].windows(2) {
            assert!(w[1] >= w[0]);
        }
        // a node well inside the separated region is not highest multiplicity
        let away = d.index(d.nearest_node(0.5, 0.0));
        assert!(quadratic_growth_scan(&s, &fb, away, &radii).is_err());
    }

    #[test]
    fn circle_arcs_of_category_i() {
        let s = category_i(129);
        let c = circle_restriction(&s, (0.0, 0.0), 0.5, 256, 1e-6).unwrap();
        assert_eq!(c.positive_arcs[0].len(), 1);
        let step = 2.0 * PI / 256.0;
        assert!((c.positive_arcs[0][0].length - PI).abs() <= 2.0 * step);
        assert_eq!(c.contact_arcs[0].len(), 1);
        let eq = MembraneStack::zeros(s.domain().clone(), 3).unwrap();
        let c = circle_restriction(&eq, (0.0, 0.0), 0.5, 64, 1e-6).unwrap();
        assert!(c.positive_arcs.iter().all(|a| a.is_empty()));
        assert_eq!(c.contact_arcs[0][0].length, 2.0 * PI);
        assert!(circle_restriction(&s, (0.0, 0.0), 1.2, 64, 1e-6).is_err());
        assert!(circle_restriction(&s, (0.0, 0.0), 0.5, 32, 1e-6).is_err());
    }

    #[test]
    fn runs_wrap_around() {
        let flags = [true, true, false, false, true, true, true, false];
        let r = runs(&flags, true, 8);
        assert_eq!(r.len(), 2);
        let mut lens: Vec<usize> = r.iter().map(|a| a.samples).collect();
        lens.sort();
        assert_eq!(lens, vec![2, 3]);
    }

    #[test]
    fn hessian_bound_of_quadratic_stack() {
        let d = build_domain(33, 1.0, DomainShape::Disk).unwrap();
        let s = MembraneStack::from_fn(d.clone(), 2, |x, y, u| {
            u.copy_from_slice(&[0.5 * (x * x + y * y) + 0.25 * x * y, 0.0])
        })
        .unwrap();
        let b = hessian_bound_report(&s, 0.1);
        assert!((b - 1.0).abs() < 1e-10);
        assert_eq!(hessian_bound_report(&MembraneStack::zeros(d, 2).unwrap(), 0.1), 0.0);
    }
}
