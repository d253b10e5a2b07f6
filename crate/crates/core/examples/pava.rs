//! Projection of a node's membrane values onto the ordered cone.

use membranes::solver::pava_project;

fn main() {
    let a = [0.3, 1.2, -0.4, -0.1, -0.9];
    let v = pava_project(&a);
    println!("input      {a:?}");
    println!("projection {v:?}");
    println!("sum before {:.3}, after {:.3}", a.iter().sum::<f64>(), v.iter().sum::<f64>());
}
