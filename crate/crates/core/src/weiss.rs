//! Weiss energy `W(u, p, r)` in the plane and its monotonicity diagnostics.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::blowup::{homogeneity_defect, rescale_unchecked};
use crate::error::{Error, Result};
use crate::grid::{interpolate_quadratic as interpolate, Forcing, MembraneStack};
use crate::quadrature::smooth_bulk_energy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeissSample {
    pub p: (f64, f64),
    pub r: f64,
    /// `r^-4 int_{B_r(p)} sum (|grad u_j|^2 + 2 f_j u_j)`
    pub bulk: f64,
    /// `2 r^-5 int_{dB_r(p)} sum u_j^2`
    pub boundary: f64,
    pub w: f64,
    pub m_angles: usize,
}

/// `max(128, 4 ceil(2 pi r / h))`
pub fn default_angles(r: f64, h: f64) -> usize {
    ((4.0 * (2.0 * PI * r / h).ceil()) as usize).max(128)
}

fn check_constant(forcing: &Forcing) -> Result<()> {
    if forcing.is_constant() {
        Ok(())
    } else {
        Err(Error::VariableForcing)
    }
}

pub fn weiss_energy(
    stack: &MembraneStack,
    forcing: &Forcing,
    p: (f64, f64),
    r: f64,
    m_angles: Option<usize>,
) -> Result<WeissSample> {
    check_constant(forcing)?;
    forcing.check_len(stack.len())?;
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive (got {r})")));
    }
    let m = m_angles.unwrap_or_else(|| default_angles(r, stack.domain().h()));
    if m < 128 {
        return Err(Error::InvalidArgument(format!("need at least 128 angles (got {m})")));
    }
    let bulk = smooth_bulk_energy(stack, forcing.constants(), p, r)? / r.powi(4);
    let mut sq = 0.0;
    for i in 0..m {
        let t = 2.0 * PI * i as f64 / m as f64;
        let (x, y) = (p.0 + r * t.cos(), p.1 + r * t.sin());
        for f in stack.fields() {
            let v = interpolate(f, x, y).map_err(|_| Error::BallNotContained { x: p.0, y: p.1, r })?;
            sq += v * v;
        }
    }
    let circle = sq * r * 2.0 * PI / m as f64;
    let boundary = 2.0 * circle / r.powi(5);
    Ok(WeissSample { p, r, bulk, boundary, w: bulk - boundary, m_angles: m })
}

/// Central difference in the radial direction with step `h/2`.
pub fn radial_derivative(stack: &MembraneStack, p: (f64, f64), r: f64, angle: f64) -> Result<Vec<f64>> {
    let delta = 0.5 * stack.domain().h();
    let (c, s) = (angle.cos(), angle.sin());
    let at = |rho: f64| (p.0 + rho * c, p.1 + rho * s);
    let (xo, yo) = at(r + delta);
    let (xi, yi) = at(r - delta);
    stack
        .fields()
        .iter()
        .map(|f| {
            let outer = interpolate(f, xo, yo).map_err(|_| Error::StencilOutside { i: 0, j: 0 })?;
            let inner = interpolate(f, xi, yi).map_err(|_| Error::StencilOutside { i: 0, j: 0 })?;
            Ok((outer - inner) / (2.0 * delta))
        })
        .collect()
}

/// `r^-4 int_{dB_r(p)} sum (d_r u_j - 2 u_j / r)^2`
pub fn lower_bound_integral(stack: &MembraneStack, p: (f64, f64), r: f64, m: usize) -> Result<f64> {
    let mut acc = 0.0;
    for i in 0..m {
        let t = 2.0 * PI * i as f64 / m as f64;
        let dr = radial_derivative(stack, p, r, t)?;
        let (x, y) = (p.0 + r * t.cos(), p.1 + r * t.sin());
        for (j, f) in stack.fields().iter().enumerate() {
            let u = interpolate(f, x, y)?;
            acc += (dr[j] - 2.0 * u / r).powi(2);
        }
    }
    Ok(acc * r * 2.0 * PI / m as f64 / r.powi(4))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeissSweep {
    pub p: (f64, f64),
    pub radii: Vec<f64>,
    pub samples: Vec<WeissSample>,
    /// `(W(r_{k+1}) - W(r_k)) / (r_{k+1} - r_k)` per gap.
    pub derivatives: Vec<f64>,
    /// Lower-bound integral at each gap midpoint.
    pub lower_bounds: Vec<f64>,
    /// `0.05 (1 + |W|)` with the larger `|W|` of the gap.
    pub tolerances: Vec<f64>,
    /// Gap violates monotonicity or the derivative bound.
    pub flagged: Vec<bool>,
}

impl WeissSweep {
    pub fn flagged_gaps(&self) -> usize {
        self.flagged.iter().filter(|&&f| f).count()
    }
}

pub const TOL_W_REL: f64 = 0.05;

pub fn weiss_sweep(
    stack: &MembraneStack,
    forcing: &Forcing,
    p: (f64, f64),
    radii: &[f64],
    m_angles: Option<usize>,
) -> Result<WeissSweep> {
    if radii.len() < 3 {
        return Err(Error::InvalidArgument(format!("a sweep needs at least 3 radii (got {})", radii.len())));
    }
    if radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("radii must increase strictly".into()));
    }
    let h = stack.domain().h();
    let samples = radii
        .iter()
        .map(|&r| weiss_energy(stack, forcing, p, r, m_angles))
        .collect::<Result<Vec<_>>>()?;
    let mut derivatives = Vec::new();
    let mut lower_bounds = Vec::new();
    let mut tolerances = Vec::new();
    let mut flagged = Vec::new();
    for w in samples.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let dw = (b.w - a.w) / (b.r - a.r);
        let mid = 0.5 * (a.r + b.r);
        let m = m_angles.unwrap_or_else(|| default_angles(mid, h));
        let l = lower_bound_integral(stack, p, mid, m)?;
        let tol = TOL_W_REL * (1.0 + a.w.abs().max(b.w.abs()));
        flagged.push(dw < l - tol || b.w < a.w - tol);
        derivatives.push(dw);
        lower_bounds.push(l);
        tolerances.push(tol);
    }
    Ok(WeissSweep { p, radii: radii.to_vec(), samples, derivatives, lower_bounds, tolerances, flagged })
}

/// `|W(u, 0, r) - W(T_{0,r} u, 0, 1)|` with the rescaled stack on an
/// `n_ref` reference lattice.
pub fn scaling_symmetry_check(stack: &MembraneStack, forcing: &Forcing, r: f64, n_ref: usize) -> Result<f64> {
    let direct = weiss_energy(stack, forcing, (0.0, 0.0), r, None)?;
    let prof = rescale_unchecked(stack, (0.0, 0.0), r, n_ref)?;
    let scaled = weiss_energy(&prof.stack, forcing, (0.0, 0.0), 1.0, None)?;
    Ok((direct.w - scaled.w).abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstancyReport {
    pub w_values: Vec<f64>,
    pub w_spread: f64,
    pub constant: bool,
    pub homogeneity_defect: f64,
    pub homogeneous: bool,
    /// `!constant || homogeneous`
    pub implication_holds: bool,
    pub tau_const: f64,
    pub tau_hom: f64,
}

/// If `W` is constant over `radii` (spread `<= tau_const`), the homogeneity
/// defect of the blow-up at the largest radius must be `<= tau_hom`.
#[allow(clippy::too_many_arguments)]
pub fn constancy_homogeneity_check(
    stack: &MembraneStack,
    forcing: &Forcing,
    p: (f64, f64),
    radii: &[f64],
    tau_const: f64,
    tau_hom: f64,
    n_ref: usize,
) -> Result<ConstancyReport> {
    let sweep = weiss_sweep(stack, forcing, p, radii, None)?;
    let w_values: Vec<f64> = sweep.samples.iter().map(|s| s.w).collect();
    let max = w_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = w_values.iter().copied().fold(f64::INFINITY, f64::min);
    let r_max = *radii.last().unwrap();
    let prof = rescale_unchecked(stack, p, r_max, n_ref)?;
    let lambdas: Vec<f64> = radii.iter().map(|r| r / r_max).collect();
    let defect = homogeneity_defect(&prof, &lambdas)?;
    let constant = max - min <= tau_const;
    let homogeneous = defect <= tau_hom;
    Ok(ConstancyReport {
        w_values,
        w_spread: max - min,
        constant,
        homogeneity_defect: defect,
        homogeneous,
        implication_holds: !constant || homogeneous,
        tau_const,
        tau_hom,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_domain, DomainShape};
    use crate::profiles::{example46_stack, Category, Example46, CANONICAL_FORCING};

    fn forcing() -> Forcing {
        Forcing::constant(CANONICAL_FORCING.to_vec())
    }

    #[test]
    fn zero_stack_has_zero_energy() {
        let d = build_domain(33, 1.0, DomainShape::Disk).unwrap();
        let z = MembraneStack::zeros(d, 3).unwrap();
        let f = Forcing::constant(vec![0.0; 3]);
        let s = weiss_energy(&z, &f, (0.1, 0.0), 0.5, None).unwrap();
        assert_eq!(s.w, 0.0);
        let sw = weiss_sweep(&z, &f, (0.0, 0.0), &[0.2, 0.4, 0.6], None).unwrap();
        assert!(sw.derivatives.iter().chain(&sw.lower_bounds).all(|&v| v == 0.0));
        assert_eq!(scaling_symmetry_check(&z, &f, 0.5, 33).unwrap(), 0.0);
    }

    #[test]
    fn variable_forcing_rejected() {
        let d = build_domain(17, 1.0, DomainShape::Disk).unwrap();
        let z = MembraneStack::zeros(d.clone(), 2).unwrap();
        let f = Forcing::with_fields(vec![0.0, 0.0], vec![vec![0.0; d.len()]; 2]).unwrap();
        let err = weiss_energy(&z, &f, (0.0, 0.0), 0.5, None).unwrap_err();
        assert!(err.to_string().contains("Weiss module requires (CF)"));
    }

    #[test]
    fn category_i_value_and_constancy() {
        let d = build_domain(129, 1.0, DomainShape::Disk).unwrap();
        let s = example46_stack(&Example46::canonical(Category::I, 0.0), d).unwrap();
        for r in [0.25, 0.5, 1.0] {
            let w = weiss_energy(&s, &forcing(), (0.0, 0.0), r, None).unwrap();
            assert!((w.w - PI / 8.0).abs() < 3e-3, "{r}: {}", w.w);
            assert_eq!(w.w, w.bulk - w.boundary);
        }
        assert!(weiss_energy(&s, &forcing(), (0.0, 0.0), 1.2, None).is_err());
        assert!(weiss_energy(&s, &forcing(), (0.0, 0.0), 0.5, Some(64)).is_err());
        assert!(weiss_sweep(&s, &forcing(), (0.0, 0.0), &[0.2, 0.4], None).is_err());
    }

    #[test]
    fn radial_derivative_examples() {
        let d = build_domain(65, 1.0, DomainShape::Disk).unwrap();
        let c = MembraneStack::from_fn(d.clone(), 2, |_, _, u| u.copy_from_slice(&[1.0, -1.0])).unwrap();
        assert!(radial_derivative(&c, (0.0, 0.0), 0.5, 0.3).unwrap().iter().all(|v| v.abs() < 1e-12));
        let l = MembraneStack::from_fn(d.clone(), 2, |x, y, u| {
            let v = 0.6 * x + 0.8 * y;
            u.copy_from_slice(&[v, v]);
        })
        .unwrap();
        for r in [0.2, 0.6] {
            let t: f64 = 1.1;
            let want = 0.6 * t.cos() + 0.8 * t.sin();
            let g = radial_derivative(&l, (0.0, 0.0), r, t).unwrap();
            assert!((g[0] - want).abs() < 1e-12);
        }
        assert!(radial_derivative(&l, (0.0, 0.0), 1.0, 0.0).is_err());
    }

    #[test]
    fn scaling_identity_at_unit_radius() {
        let d = build_domain(65, 1.0, DomainShape::Disk).unwrap();
        let s = example46_stack(&Example46::canonical(Category::Ii, 0.4), d).unwrap();
        assert_eq!(scaling_symmetry_check(&s, &forcing(), 1.0, 65).unwrap(), 0.0);
    }

    #[test]
    fn category_ii_constancy_implies_homogeneity() {
        let d = build_domain(129, 1.0, DomainShape::Disk).unwrap();
        let s = example46_stack(&Example46::canonical(Category::Ii, 0.2), d).unwrap();
        let rep = constancy_homogeneity_check(&s, &forcing(), (0.0, 0.0), &[0.25, 0.5, 0.75], 3e-3, 1e-3, 129).unwrap();
        assert!(rep.constant && rep.homogeneous && rep.implication_holds, "{rep:?}");
    }
}
