//! Blow-ups of a non-homogeneous solution at shrinking scales and the
//! classification of the last one.

use membranes::bc::BcSelector;
use membranes::blowup::{classify, homogeneity_defect, rescale, N_REF};
use membranes::geometry::{contact_sets, default_contact_eps, free_boundary_nodes};
use membranes::grid::{build_domain, DomainShape, Forcing};
use membranes::solver::{harmonic_initial_guess, solve_null_average, SolveConfig};

fn main() -> membranes::Result<()> {
    let d = build_domain(129, 1.0, DomainShape::Disk)?;
    let bc = "layered:0:0.125".parse::<BcSelector>()?.boundary_data(d.clone(), 3)?;
    let forcing = Forcing::constant(vec![1.0, 0.0, -1.0]);
    let (s, _) = solve_null_average(&harmonic_initial_guess(&bc)?, &forcing, &bc, &SolveConfig::tuned(&d))?;
    let fb = free_boundary_nodes(&contact_sets(&s, default_contact_eps(&d, &forcing)));
    let p = fb.nearest_highest_multiplicity(0.0, 0.0).expect("a node of full multiplicity");

    let mut last = None;
    for r in [0.4, 0.2, 0.1] {
        let prof = rescale(&s, &fb, p, r, N_REF)?;
        println!("r = {r}: homogeneity defect {:.3e}", homogeneity_defect(&prof, &[0.5, 0.25])?);
        last = Some(prof);
    }
    let (fit, m) = classify(&last.unwrap(), &forcing)?;
    println!("label {:?}, misfit {:.2e}, e angle {:?}", m.label, fit.misfit, fit.e_angle.map(f64::to_degrees));
    Ok(())
}
