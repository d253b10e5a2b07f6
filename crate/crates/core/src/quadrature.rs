//! Cell quadrature on clipped disks and Gauss-Legendre rules.

use crate::error::{Error, Result};
use crate::grid::{bilinear, cell_cover, quadratic_cell, CellCover, Forcing, GridDomain, MembraneStack};

/// Sub-cells per side used on partially covered cells.
const SUBCELLS: usize = 8;

/// `int (|grad u_j|^2 + 2 f_j u_j)` summed over membranes, on the disk
/// `B_r(c)` intersected with the lattice.
///
/// Cells inside the disk use the edge-difference gradient
/// `(d_bottom^2 + d_top^2 + d_left^2 + d_right^2) / (2 h^2)` and the corner
/// average of `f u`; this is the quadratic form whose node-wise minimiser is the
/// five-point Gauss-Seidel value. Crossing cells are split into sub-cells
/// weighted by their exact clipped area and evaluated on the bilinear
/// interpolant.
pub fn bulk_energy(
    stack: &MembraneStack,
    forcing: &Forcing,
    center: (f64, f64),
    r: f64,
) -> Result<f64> {
    let d = stack.domain();
    let n = d.n();
    let h = d.h();
    let (cx, cy) = center;
    let (i_lo, i_hi) = cell_range(d, cx, r);
    let (j_lo, j_hi) = cell_range(d, cy, r);
    let mut total = 0.0;
    for cj in j_lo..j_hi {
        for ci in i_lo..i_hi {
            let (x0, y0) = d.coords((ci, cj));
            let cover = cell_cover(x0, y0, h, cx, cy, r);
            if cover == CellCover::Outside {
                continue;
            }
            let base = cj * n + ci;
            let corners = [base, base + 1, base + n, base + n + 1];
            if corners.iter().any(|&k| !d.is_active(k)) {
                return Err(Error::BallNotContained { x: cx, y: cy, r });
            }
            total += match cover {
                CellCover::Inside => full_cell(stack, forcing, base, n, h),
                _ => clipped_cell(stack, forcing, base, n, h, x0, y0, cx, cy, r),
            };
        }
    }
    Ok(total)
}

fn cell_range(d: &GridDomain, c: f64, r: f64) -> (usize, usize) {
    let h = d.h();
    let lo = ((c - r + d.radius()) / h).floor() - 1.0;
    let hi = ((c + r + d.radius()) / h).ceil() + 1.0;
    let last = (d.n() - 1) as f64;
    (lo.clamp(0.0, last) as usize, hi.clamp(0.0, last) as usize)
}

fn full_cell(stack: &MembraneStack, forcing: &Forcing, base: usize, n: usize, h: f64) -> f64 {
    let mut acc = 0.0;
    for (j, f) in stack.fields().iter().enumerate() {
        let u = f.values();
        let (u00, u10, u01, u11) = (u[base], u[base + 1], u[base + n], u[base + n + 1]);
        let grad = ((u10 - u00).powi(2) + (u11 - u01).powi(2) + (u01 - u00).powi(2)
            + (u11 - u10).powi(2))
            / 2.0;
        let fu = (forcing.at(j, base) * u00
            + forcing.at(j, base + 1) * u10
            + forcing.at(j, base + n) * u01
            + forcing.at(j, base + n + 1) * u11)
            / 4.0;
        acc += grad + 2.0 * h * h * fu;
    }
    acc
}

#[allow(clippy::too_many_arguments)]
fn clipped_cell(
    stack: &MembraneStack,
    forcing: &Forcing,
    base: usize,
    n: usize,
    h: f64,
    x0: f64,
    y0: f64,
    cx: f64,
    cy: f64,
    r: f64,
) -> f64 {
    let s = h / SUBCELLS as f64;
    let mut acc = 0.0;
    for b in 0..SUBCELLS {
        for a in 0..SUBCELLS {
            let sx = x0 + a as f64 * s;
            let sy = y0 + b as f64 * s;
            let area = disk_rect_area(cx, cy, r, sx, sx + s, sy, sy + s);
            if area <= 0.0 {
                continue;
            }
            let xi = (a as f64 + 0.5) / SUBCELLS as f64;
            let eta = (b as f64 + 0.5) / SUBCELLS as f64;
            for (j, f) in stack.fields().iter().enumerate() {
                let u = f.values();
                let (u00, u10, u01, u11) = (u[base], u[base + 1], u[base + n], u[base + n + 1]);
                let ux = ((u10 - u00) * (1.0 - eta) + (u11 - u01) * eta) / h;
                let uy = ((u01 - u00) * (1.0 - xi) + (u11 - u10) * xi) / h;
                let val = bilinear(u, n, base % n, base / n, xi, eta);
                let fv = if forcing.is_constant() {
                    forcing.at(j, base)
                } else {
                    let fv: Vec<f64> = [base, base + 1, base + n, base + n + 1]
                        .iter()
                        .map(|&k| forcing.at(j, k))
                        .collect();
                    fv[0] * (1.0 - xi) * (1.0 - eta)
                        + fv[1] * xi * (1.0 - eta)
                        + fv[2] * (1.0 - xi) * eta
                        + fv[3] * xi * eta
                };
                acc += area * (ux * ux + uy * uy + 2.0 * fv * val);
            }
        }
    }
    acc
}

/// Subdivision depth for cut cells in [`smooth_bulk_energy`].
const CUT_DEPTH: u32 = 7;

/// Bulk integral on `B_r(c)` for constant forcing, using the curvature-corrected
/// interpolant so that piecewise quadratics on the lattice integrate exactly.
///
/// Cut cells are split as a quadtree; fully covered pieces use a 2x2 Gauss
/// rule, cut leaves their exact clipped area at the centre.
pub fn smooth_bulk_energy(stack: &MembraneStack, forcing: &[f64], center: (f64, f64), r: f64) -> Result<f64> {
    let d = stack.domain();
    let n = d.n();
    let h = d.h();
    let (cx, cy) = center;
    let (i_lo, i_hi) = cell_range(d, cx, r);
    let (j_lo, j_hi) = cell_range(d, cy, r);
    let g = 0.5 / 3f64.sqrt();
    let gauss = [(0.5 - g, 0.5 - g), (0.5 + g, 0.5 - g), (0.5 - g, 0.5 + g), (0.5 + g, 0.5 + g)];
    let eval = |ci: usize, cj: usize, xi: f64, eta: f64| -> f64 {
        stack
            .fields()
            .iter()
            .zip(forcing)
            .map(|(f, &fj)| {
                let (v, ux, uy) = quadratic_cell(f.values(), d, ci, cj, xi, eta);
                ux * ux + uy * uy + 2.0 * fj * v
            })
            .sum()
    };
    let mut total = 0.0;
    for cj in j_lo..j_hi {
        for ci in i_lo..i_hi {
            let (x0, y0) = d.coords((ci, cj));
            if cell_cover(x0, y0, h, cx, cy, r) == CellCover::Outside {
                continue;
            }
            let base = cj * n + ci;
            if [base, base + 1, base + n, base + n + 1].iter().any(|&k| !d.is_active(k)) {
                return Err(Error::BallNotContained { x: cx, y: cy, r });
            }
            // (offset xi, offset eta, side in cell units, depth)
            let mut stack_q = vec![(0.0, 0.0, 1.0, 0u32)];
            while let Some((a, b, s, depth)) = stack_q.pop() {
                let (sx, sy) = (x0 + a * h, y0 + b * h);
                match cell_cover(sx, sy, s * h, cx, cy, r) {
                    CellCover::Outside => {}
                    CellCover::Inside => {
                        let w = s * s * h * h / 4.0;
                        total += gauss.iter().map(|&(p, q)| w * eval(ci, cj, a + p * s, b + q * s)).sum::<f64>();
                    }
                    CellCover::Crossing if depth >= CUT_DEPTH => {
                        let area = disk_rect_area(cx, cy, r, sx, sx + s * h, sy, sy + s * h);
                        if area > 0.0 {
                            total += area * eval(ci, cj, a + 0.5 * s, b + 0.5 * s);
                        }
                    }
                    CellCover::Crossing => {
                        let t = 0.5 * s;
                        for (da, db) in [(0.0, 0.0), (t, 0.0), (0.0, t), (t, t)] {
                            stack_q.push((a + da, b + db, t, depth + 1));
                        }
                    }
                }
            }
        }
    }
    Ok(total)
}

/// Exact area of `[x0, x1] x [y0, y1]` intersected with the disk `B_r(c)`.
pub fn disk_rect_area(cx: f64, cy: f64, r: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let (x0, x1) = ((x0 - cx).max(-r), (x1 - cx).min(r));
    let (y0, y1) = (y0 - cy, y1 - cy);
    if x1 <= x0 || y1 <= y0 {
        return 0.0;
    }
    // Breakpoints where the chord half-height crosses y0 or y1.
    let mut pts = vec![x0, x1];
    for y in [y0, y1] {
        if y.abs() < r {
            let s = (r * r - y * y).sqrt();
            for p in [-s, s] {
                if p > x0 && p < x1 {
                    pts.push(p);
                }
            }
        }
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let half = |s: f64| (r * r - s * s).max(0.0).sqrt();
    // Antiderivative of the half chord height.
    let prim = |s: f64| {
        let s = s.clamp(-r, r);
        0.5 * (s * half(s) + r * r * (s / r).clamp(-1.0, 1.0).asin())
    };
    let mut area = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let m = 0.5 * (a + b);
        let hm = half(m);
        let top_is_circle = hm < y1;
        let bottom_is_circle = -hm > y0;
        let top = if top_is_circle { hm } else { y1 };
        let bottom = if bottom_is_circle { -hm } else { y0 };
        if top <= bottom {
            continue;
        }
        let int_top = if top_is_circle { prim(b) - prim(a) } else { y1 * (b - a) };
        let int_bottom = if bottom_is_circle { -(prim(b) - prim(a)) } else { y0 * (b - a) };
        area += int_top - int_bottom;
    }
    area.max(0.0)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    for i in 0..order {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if order == 0 { 1.0 } else { p1 };
            dp = order as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre rule on `[a, b]` with `panels` equal panels.
pub fn composite_gauss(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let len = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * len;
        for (xi, wi) in x.iter().zip(&w) {
            out.push((lo + 0.5 * len * (xi + 1.0), 0.5 * len * wi));
        }
    }
    out
}
