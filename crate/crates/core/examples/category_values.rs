//! Weiss values of the five planar categories, in increasing order.

use membranes::profiles::{weiss_of_category, Category, Example46};

fn main() -> membranes::Result<()> {
    for c in Category::ALL {
        let w = weiss_of_category(&Example46::canonical(c, 0.0))?;
        println!("{:>4}  W = {w:.10}  ({:.6} pi)", c.as_str(), w / std::f64::consts::PI);
    }
    Ok(())
}
