use membranes::grid::{build_domain, DomainShape, Forcing};
use membranes::profiles::{example46_stack, weiss_of_category, Category, Example46};
use membranes::weiss::weiss_sweep;

fn main() -> membranes::Result<()> {
    let d = build_domain(129, 1.0, DomainShape::Disk)?;
    let params = Example46::canonical(Category::Iii, 0.3);
    let s = example46_stack(&params, d.clone())?;
    let forcing = Forcing::constant(vec![1.0, 0.0, -1.0]);
    let radii: Vec<f64> = (0..6).map(|i| 0.1 + 0.04 * i as f64).collect();
    let sweep = weiss_sweep(&s, &forcing, (0.0, 0.0), &radii, None)?;
    println!("{:>6} {:>12} {:>12} {:>12}", "r", "bulk", "boundary", "W");
    for w in &sweep.samples {
        println!("{:>6.3} {:>12.8} {:>12.8} {:>12.8}", w.r, w.bulk, w.boundary, w.w);
    }
    println!("exact W = {:.8}, flagged gaps {}", weiss_of_category(&params)?, sweep.flagged_gaps());
    Ok(())
}
