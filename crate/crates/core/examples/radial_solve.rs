//! Two membranes with radial data, compared with the closed-form solution.

use membranes::bc::BcSelector;
use membranes::grid::{build_domain, DomainShape, Forcing};
use membranes::solver::{harmonic_initial_guess, solve, SolveConfig};

fn main() -> membranes::Result<()> {
    let d = build_domain(129, 1.0, DomainShape::Disk)?;
    let sel: BcSelector = "radial-eps:0.05".parse()?;
    let bc = sel.boundary_data(d.clone(), 2)?;
    let forcing = Forcing::constant(vec![1.0, -1.0]);
    let (s, report) = solve(&harmonic_initial_guess(&bc)?, &forcing, &bc, &SolveConfig::tuned(&d))?;
    println!("converged {} after {} sweeps (omega {:.4})", report.converged, report.sweeps, report.omega);

    // u = 1/4 (r^2 - rho^2) - 1/2 rho^2 ln(r / rho) outside the coincidence disk
    let eps = 0.05;
    let g = |rho: f64| 0.25 * (1.0 - rho * rho) + 0.5 * rho * rho * rho.ln() - eps;
    let (mut lo, mut hi) = (1e-6, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 { lo = mid } else { hi = mid }
    }
    let rho = 0.5 * (lo + hi);
    let exact = |r: f64| if r <= rho { 0.0 } else { 0.25 * (r * r - rho * rho) - 0.5 * rho * rho * (r / rho).ln() };
    let mut err = 0.0f64;
    for &k in d.interior_nodes() {
        let (x, y) = d.coords_of(k);
        let u = exact(x.hypot(y));
        err = err.max((s.field(0).values()[k] - u).abs()).max((s.field(1).values()[k] + u).abs());
    }
    println!("coincidence radius {rho:.6}");
    println!("max nodal error {err:.3e}");
    Ok(())
}
