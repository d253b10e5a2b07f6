//! Contact sets, free boundaries and quadratic growth of a solved stack.

use membranes::bc::BcSelector;
use membranes::geometry::{contact_sets, default_contact_eps, free_boundary_nodes, nondegeneracy_scan};
use membranes::grid::{build_domain, DomainShape, Forcing};
use membranes::solver::{el_residual, harmonic_initial_guess, solve, SolveConfig};

fn main() -> membranes::Result<()> {
    let d = build_domain(129, 1.0, DomainShape::Disk)?;
    let bc = "example46-ii:30".parse::<BcSelector>()?.boundary_data(d.clone(), 3)?;
    let forcing = Forcing::constant(vec![1.0, 0.0, -1.0]);
    let (s, _) = solve(&harmonic_initial_guess(&bc)?, &forcing, &bc, &SolveConfig::tuned(&d))?;

    let mask = contact_sets(&s, default_contact_eps(&d, &forcing));
    let fb = free_boundary_nodes(&mask);
    for j in 0..mask.pairs() {
        println!("pair {}: {} contact nodes, {} free-boundary nodes", j + 1, mask.count(j), fb.free_boundary(j).len());
    }
    let r = el_residual(&s, &forcing, &mask)?;
    println!("residuals: separated {:.1e}, contact {:.1e}, sum {:.1e}", r.separated, r.contact, r.sum);

    let p = fb.nearest_highest_multiplicity(0.0, 0.0).expect("a node of full multiplicity");
    let radii: Vec<f64> = [4.0, 8.0, 16.0].iter().map(|m| m * d.h()).collect();
    let scan = nondegeneracy_scan(&s, &fb, p, &radii, 1.0, None)?;
    println!("at {:?}: slopes {:?}", scan.p, scan.slopes);
    println!("c_lower {:?}, c_upper {:?}", scan.c_lower, scan.c_upper);
    Ok(())
}
