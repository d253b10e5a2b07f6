//! Projected Gauss-Seidel relaxation for the N-membranes energy.
//!
//! Each interior node update computes the unconstrained five-point value for
//! every membrane, relaxes towards it, and projects the node vector back onto
//! `v_1 >= ... >= v_N` with pool-adjacent-violators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{free_boundary_nodes, ContactMask};
use crate::grid::{
    laplacian_at, normalize_average, BoundaryData, Forcing, GridDomain, MembraneStack, Node,
    NodeClass,
};
use crate::quadrature::bulk_energy;

/// Euclidean projection of `a` onto the non-increasing cone.
pub fn pava_project(a: &[f64]) -> Vec<f64> {
    let mut v = a.to_vec();
    let mut scratch = PavaScratch::with_capacity(a.len());
    pava_in_place(&mut v, &mut scratch);
    v
}

/// Reusable block storage for [`pava_in_place`].
#[derive(Debug, Default)]
pub struct PavaScratch {
    sums: Vec<f64>,
    counts: Vec<usize>,
}

impl PavaScratch {
    pub fn with_capacity(n: usize) -> Self {
        Self { sums: Vec::with_capacity(n), counts: Vec::with_capacity(n) }
    }
}

/// In-place projection; feasible input is left bitwise unchanged.
pub fn pava_in_place(v: &mut [f64], scratch: &mut PavaScratch) {
    if v.windows(2).all(|w| w[0] >= w[1]) {
        return;
    }
    let sums = &mut scratch.sums;
    let counts = &mut scratch.counts;
    sums.clear();
    counts.clear();
    for &x in v.iter() {
        sums.push(x);
        counts.push(1);
        while sums.len() > 1 {
            let m = sums.len();
            // mean(prev) < mean(last) violates the ordering
            if sums[m - 2] * (counts[m - 1] as f64) < sums[m - 1] * (counts[m - 2] as f64) {
                let s = sums.pop().unwrap();
                let c = counts.pop().unwrap();
                sums[m - 2] += s;
                counts[m - 2] += c;
            } else {
                break;
            }
        }
    }
    let mut pos = 0;
    for (s, &c) in sums.iter().zip(counts.iter()) {
        let mean = s / c as f64;
        for x in &mut v[pos..pos + c] {
            *x = mean;
        }
        pos += c;
    }
}

/// Unconstrained Gauss-Seidel value `(u_E + u_W + u_N + u_S - h^2 f_j) / 4`.
pub fn gs_candidate(stack: &MembraneStack, forcing: &Forcing, node: Node, j: usize) -> Result<f64> {
    let d = stack.domain();
    let k = d.check_interior(node)?;
    Ok(candidate(stack.field(j).values(), d.n(), d.h(), k, forcing.at(j, k)))
}

#[inline]
fn candidate(u: &[f64], n: usize, h: f64, k: usize, f: f64) -> f64 {
    (u[k + 1] + u[k - 1] + u[k + n] + u[k - n] - h * h * f) * 0.25
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    /// Relaxation factor in `[1, 2)`.
    pub omega: f64,
    /// Stopping threshold on the max node change of a sweep. `None` selects
    /// `1e-10 * max(|bc|, h^2 max |f_j|)`.
    pub tol: Option<f64>,
    pub max_sweeps: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self { omega: 1.5, tol: None, max_sweeps: 200_000 }
    }
}

impl SolveConfig {
    /// Unrelaxed configuration for audited runs (energy is monotone).
    pub fn audited() -> Self {
        Self { omega: 1.0, ..Self::default() }
    }

    /// Over-relaxation close to the optimal SOR factor for the lattice.
    pub fn tuned(domain: &GridDomain) -> Self {
        let s = (std::f64::consts::PI * domain.h() / (2.0 * domain.radius())).sin();
        Self { omega: (2.0 / (1.0 + s)).min(1.99), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega >= 1.0 && self.omega < 2.0) {
            return Err(Error::InvalidArgument(format!("omega must be in [1, 2) (got {})", self.omega)));
        }
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                return Err(Error::InvalidArgument(format!("tol must be positive (got {t})")));
            }
        }
        Ok(())
    }
}

/// Default stopping threshold `1e-10 * max(|bc|, h^2 max |f_j|)`.
pub fn default_tol(bc: &BoundaryData, forcing: &Forcing, h: f64) -> f64 {
    let scale = bc.max_abs().max(h * h * forcing.max_abs());
    if scale > 0.0 {
        1e-10 * scale
    } else {
        1e-14
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub sweeps: usize,
    pub residual: f64,
    pub energy: f64,
    /// Discrete energy after each sweep.
    pub energy_trace: Vec<f64>,
    pub converged: bool,
    pub omega: f64,
    pub tol: f64,
}

/// One lexicographic projected relaxation pass. Returns the max node change.
pub fn psor_sweep(stack: &mut MembraneStack, forcing: &Forcing, config: &SolveConfig) -> f64 {
    let mut scratch = SweepScratch::new(stack.len());
    sweep(stack, forcing, config.omega, &mut scratch).0
}

struct SweepScratch {
    cand: Vec<f64>,
    old: Vec<f64>,
    v: Vec<f64>,
    pava: PavaScratch,
}

impl SweepScratch {
    fn new(n: usize) -> Self {
        Self { cand: vec![0.0; n], old: vec![0.0; n], v: vec![0.0; n], pava: PavaScratch::with_capacity(n) }
    }
}

/// Returns `(max change, energy change)`. The node energy is
/// `4 (v - c)^2 + const` in each membrane, which gives the exact change.
fn sweep(stack: &mut MembraneStack, forcing: &Forcing, omega: f64, s: &mut SweepScratch) -> (f64, f64) {
    let domain = stack.domain().clone();
    let n = domain.n();
    let h = domain.h();
    let m = stack.len();
    let fields = stack.fields_mut();
    let mut max_change = 0.0f64;
    let mut d_energy = 0.0;
    for &k in domain.interior_nodes() {
        for j in 0..m {
            let u = fields[j].values();
            let c = candidate(u, n, h, k, forcing.at(j, k));
            s.cand[j] = c;
            s.old[j] = u[k];
            s.v[j] = u[k] + omega * (c - u[k]);
        }
        pava_in_place(&mut s.v, &mut s.pava);
        for j in 0..m {
            let new = s.v[j];
            let old = s.old[j];
            let c = s.cand[j];
            max_change = max_change.max((new - old).abs());
            d_energy += 4.0 * ((new - c) * (new - c) - (old - c) * (old - c));
            fields[j].values_mut()[k] = new;
        }
    }
    (max_change, d_energy)
}

/// Projects every non-exterior node vector onto the ordering cone.
pub fn project_nodewise(stack: &mut MembraneStack) {
    let domain = stack.domain().clone();
    let m = stack.len();
    let mut v = vec![0.0; m];
    let mut scratch = PavaScratch::with_capacity(m);
    for k in domain.active_nodes() {
        for j in 0..m {
            v[j] = stack.field(j).values()[k];
        }
        pava_in_place(&mut v, &mut scratch);
        for j in 0..m {
            stack.field_mut(j).values_mut()[k] = v[j];
        }
    }
}

/// Iterates [`psor_sweep`] until the max node change drops below the
/// tolerance. Non-convergence is reported, not raised.
pub fn solve(
    stack0: &MembraneStack,
    forcing: &Forcing,
    bc: &BoundaryData,
    config: &SolveConfig,
) -> Result<(MembraneStack, SolveReport)> {
    config.validate()?;
    forcing.check_len(stack0.len())?;
    let mut stack = stack0.clone();
    bc.apply(&mut stack)?;
    if !stack.is_ordered() {
        project_nodewise(&mut stack);
    }
    let h = stack.domain().h();
    let tol = config.tol.unwrap_or_else(|| default_tol(bc, forcing, h));
    let mut e = energy(&stack, forcing)?;
    let mut trace = vec![e];
    let mut scratch = SweepScratch::new(stack.len());
    let mut residual = f64::INFINITY;
    let mut sweeps = 0;
    while sweeps < config.max_sweeps {
        let (change, de) = sweep(&mut stack, forcing, config.omega, &mut scratch);
        sweeps += 1;
        e += de;
        trace.push(e);
        residual = change;
        if residual <= tol {
            break;
        }
    }
    let energy = energy(&stack, forcing)?;
    Ok((
        stack,
        SolveReport {
            sweeps,
            residual,
            energy,
            energy_trace: trace,
            converged: residual <= tol,
            omega: config.omega,
            tol,
        },
    ))
}

/// Harmonic extension of each membrane's boundary data, projected nodewise.
pub fn harmonic_initial_guess(bc: &BoundaryData) -> Result<MembraneStack> {
    let domain = bc.domain().clone();
    let m = bc.len();
    let boundary: Vec<usize> =
        (0..domain.len()).filter(|&k| domain.class(k) == NodeClass::Boundary).collect();
    let mut stack = MembraneStack::zeros(domain.clone(), m)?;
    for j in 0..m {
        let mean = boundary.iter().map(|&k| bc.value(j, k)).sum::<f64>() / boundary.len() as f64;
        stack.field_mut(j).values_mut().iter_mut().for_each(|v| *v = mean);
    }
    bc.apply(&mut stack)?;
    let zero = Forcing::constant(vec![0.0; m]);
    let omega = SolveConfig::tuned(&domain).omega;
    let tol = 1e-9 * bc.max_abs().max(1e-300);
    let n = domain.n();
    let h = domain.h();
    // membranes decouple without the projection
    for j in 0..m {
        let u = stack.field_mut(j).values_mut();
        for _ in 0..100_000 {
            let mut change = 0.0f64;
            for &k in domain.interior_nodes() {
                let c = candidate(u, n, h, k, zero.at(j, k));
                let new = u[k] + omega * (c - u[k]);
                change = change.max((new - u[k]).abs());
                u[k] = new;
            }
            if change <= tol {
                break;
            }
        }
    }
    project_nodewise(&mut stack);
    Ok(stack)
}

/// Discrete energy `int sum (|grad u_j|^2 + 2 f_j u_j)` over the domain.
pub fn energy(stack: &MembraneStack, forcing: &Forcing) -> Result<f64> {
    forcing.check_len(stack.len())?;
    let d = stack.domain();
    // the clipped-disk quadrature covers the square too once r reaches the corners
    let r = match d.shape() {
        crate::grid::DomainShape::Disk => d.radius(),
        crate::grid::DomainShape::Square => d.radius() * 2.0,
    };
    bulk_energy(stack, forcing, (0.0, 0.0), r)
}

/// Max-norm Euler-Lagrange residuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElResidual {
    /// `|Delta_h u_j - f_j|` where `u_j` is strictly separated from its neighbours.
    pub separated: f64,
    /// `|Delta_h u_j - Delta_h u_{j+1}|` on contact nodes.
    pub contact: f64,
    /// `|Delta_h sum u_j - sum f_j|` over all interior nodes.
    pub sum: f64,
    pub separated_nodes: usize,
    pub contact_nodes: usize,
}

/// Residuals (a) and (b) skip nodes within `2h` of any free-boundary node.
pub fn el_residual(stack: &MembraneStack, forcing: &Forcing, contact: &ContactMask) -> Result<ElResidual> {
    forcing.check_len(stack.len())?;
    let d = stack.domain();
    let n = d.n();
    let h = d.h();
    let m = stack.len();
    let fb = free_boundary_nodes(contact);
    let near = fb.near_free_boundary(d, 2.0 * h);
    let mut out = ElResidual { separated: 0.0, contact: 0.0, sum: 0.0, separated_nodes: 0, contact_nodes: 0 };
    let sum = stack.sum_field();
    for &k in d.interior_nodes() {
        let fsum: f64 = (0..m).map(|j| forcing.at(j, k)).sum();
        out.sum = out.sum.max((laplacian_at(sum.values(), n, h, k) - fsum).abs());
        if near[k] {
            continue;
        }
        let lap: Vec<f64> = (0..m).map(|j| laplacian_at(stack.field(j).values(), n, h, k)).collect();
        for j in 0..m {
            let above = j > 0 && contact.in_contact(j - 1, k);
            let below = j + 1 < m && contact.in_contact(j, k);
            if !above && !below {
                out.separated = out.separated.max((lap[j] - forcing.at(j, k)).abs());
                out.separated_nodes += 1;
            }
            if j + 1 < m && below {
                out.contact = out.contact.max((lap[j] - lap[j + 1]).abs());
                out.contact_nodes += 1;
            }
        }
    }
    Ok(out)
}

/// Solves after replacing the stack by its null-average version; returns both.
pub fn solve_null_average(
    stack0: &MembraneStack,
    forcing: &Forcing,
    bc: &BoundaryData,
    config: &SolveConfig,
) -> Result<(MembraneStack, SolveReport)> {
    let (s, r) = solve(stack0, forcing, bc, config)?;
    Ok((normalize_average(&s), r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_domain, DomainShape};

    /// Block-mean enumeration over all contiguous partitions.
    fn brute_projection(a: &[f64]) -> Vec<f64> {
        let n = a.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mask in 0u32..(1 << (n - 1)) {
            let mut v = vec![0.0; n];
            let mut start = 0;
            for end in 1..=n {
                if end == n || mask & (1 << (end - 1)) != 0 {
                    let mean = a[start..end].iter().sum::<f64>() / (end - start) as f64;
                    v[start..end].iter_mut().for_each(|x| *x = mean);
                    start = end;
                }
            }
            if v.windows(2).all(|w| w[0] >= w[1] - 1e-15) {
                let dist: f64 = v.iter().zip(a).map(|(x, y)| (x - y).powi(2)).sum();
                if best.as_ref().map_or(true, |(b, _)| dist < *b) {
                    best = Some((dist, v));
                }
            }
        }
        best.unwrap().1
    }

    #[test]
    fn pava_examples() {
        assert_eq!(pava_project(&[3.0, 2.0, 1.0]), vec![3.0, 2.0, 1.0]);
        assert_eq!(brute_projection(&[1.0, 3.0, 2.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(pava_project(&[1.0, 3.0, 2.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(brute_projection(&[0.0, 4.0]), vec![2.0, 2.0]);
        assert_eq!(pava_project(&[0.0, 4.0]), vec![2.0, 2.0]);
        assert_eq!(pava_project(&[5.0]), vec![5.0]);
    }

    #[test]
    fn gs_candidate_examples() {
        let d = build_domain(9, 1.0, DomainShape::Disk).unwrap();
        let o = d.origin();
        let z = MembraneStack::zeros(d.clone(), 2).unwrap();
        let f0 = Forcing::constant(vec![0.0, 0.0]);
        let f1 = Forcing::constant(vec![1.0, 1.0]);
        assert_eq!(gs_candidate(&z, &f0, o, 0).unwrap(), 0.0);
        assert_eq!(gs_candidate(&z, &f1, o, 0).unwrap(), -0.015625);
        let mut ones = z.clone();
        for j in 0..2 {
            ones.field_mut(j).values_mut().iter_mut().for_each(|v| *v = 1.0);
        }
        assert_eq!(gs_candidate(&ones, &f0, o, 1).unwrap(), 1.0);
        assert!(gs_candidate(&z, &f0, (0, 0), 0).is_err());
    }

    #[test]
    fn constant_boundary_data_gives_constant_solution() {
        let d = build_domain(17, 1.0, DomainShape::Disk).unwrap();
        let bc = BoundaryData::from_fn(d.clone(), 3, |_, _, g| g.copy_from_slice(&[2.0, 1.0, -0.5])).unwrap();
        let init = harmonic_initial_guess(&bc).unwrap();
        let f = Forcing::constant(vec![0.0; 3]);
        let (s, rep) = solve(&init, &f, &bc, &SolveConfig::default()).unwrap();
        assert!(rep.converged);
        for &k in d.interior_nodes() {
            assert!((s.field(0).values()[k] - 2.0).abs() < 1e-12);
            assert!((s.field(2).values()[k] + 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn single_membrane_sweeps_reduce_residual() {
        // with a single membrane the projection is the identity
        let d = build_domain(17, 1.0, DomainShape::Disk).unwrap();
        let mut u = vec![0.0; d.len()];
        let mut prev = f64::INFINITY;
        let n = d.n();
        let h = d.h();
        for _ in 0..30 {
            let mut change = 0.0f64;
            for &k in d.interior_nodes() {
                let mut v = [candidate(&u, n, h, k, 1.0)];
                pava_in_place(&mut v, &mut PavaScratch::default());
                change = change.max((v[0] - u[k]).abs());
                u[k] = v[0];
            }
            assert!(change < prev);
            prev = change;
        }
    }

    #[test]
    fn audited_energy_trace_is_monotone() {
        let d = build_domain(33, 1.0, DomainShape::Disk).unwrap();
        let bc = BoundaryData::from_fn(d.clone(), 3, |x, _, g| {
            g.copy_from_slice(&[0.1 + 0.05 * x, 0.0, -0.1])
        })
        .unwrap();
        let init = harmonic_initial_guess(&bc).unwrap();
        let f = Forcing::constant(vec![1.0, 0.0, -1.0]);
        let cfg = SolveConfig { max_sweeps: 400, ..SolveConfig::audited() };
        let (s, rep) = solve(&init, &f, &bc, &cfg).unwrap();
        for w in rep.energy_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-14 * w[0].abs().max(1.0));
        }
        // incremental tracking agrees with direct quadrature
        let direct = energy(&s, &f).unwrap();
        assert!((direct - rep.energy_trace.last().unwrap()).abs() < 1e-10);
        assert!(s.is_ordered());
    }

    #[test]
    fn energy_of_zero_stack_is_zero() {
        let d = build_domain(17, 1.0, DomainShape::Disk).unwrap();
        let z = MembraneStack::zeros(d, 2).unwrap();
        assert_eq!(energy(&z, &Forcing::constant(vec![0.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn energy_of_linear_membrane_is_disk_area() {
        let d = build_domain(129, 1.0, DomainShape::Disk).unwrap();
        let s = MembraneStack::from_fn(d, 2, |x, _, u| u.copy_from_slice(&[x, x])).unwrap();
        let e = energy(&s, &Forcing::constant(vec![0.0, 0.0])).unwrap() / 2.0;
        assert!((e - std::f64::consts::PI).abs() < 2e-2, "{e}");
    }

    #[test]
    fn solve_config_validation() {
        assert!(SolveConfig { omega: 2.0, ..Default::default() }.validate().is_err());
        assert!(SolveConfig { omega: 0.9, ..Default::default() }.validate().is_err());
        assert!(SolveConfig { tol: Some(0.0), ..Default::default() }.validate().is_err());
    }
}
