use std::f64::consts::PI;

use membranes::bc::BcSelector;
use membranes::blowup::{homogeneity_defect, rescale_unchecked};
use membranes::grid::{build_domain, normalize_average, DomainShape, Forcing, MembraneStack};
use membranes::io::{stack_from_csv, stack_to_csv, StackHeader};
use membranes::profiles::{example46_stack, halfspace_stack, weiss_of_category, Category, Example46, HalfSpaceProfile};
use membranes::solver::{energy, harmonic_initial_guess, pava_project, project_nodewise, psor_sweep, SolveConfig};
use membranes::verify::projection_oracle;
use proptest::prelude::*;

fn vector() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, 1..8)
}

fn category() -> impl Strategy<Value = Category> {
    prop::sample::select(Category::ALL.to_vec())
}

proptest! {
    #[test]
    fn projection_is_non_increasing_and_sum_preserving(a in vector()) {
        let v = pava_project(&a);
        prop_assert!(v.windows(2).all(|w| w[0] >= w[1]));
        let (sa, sv): (f64, f64) = (a.iter().sum(), v.iter().sum());
        prop_assert!((sa - sv).abs() <= 1e-10 * (1.0 + sa.abs()));
    }

    #[test]
    fn projection_is_idempotent(a in vector()) {
        let v = pava_project(&a);
        prop_assert_eq!(pava_project(&v), v);
    }

    #[test]
    fn projection_matches_partition_oracle(a in vector()) {
        let v = pava_project(&a);
        let o = projection_oracle(&a);
        for (x, y) in v.iter().zip(&o) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn projection_is_nonexpansive(a in vector(), shift in prop::collection::vec(-5.0f64..5.0, 8)) {
        let b: Vec<f64> = a.iter().zip(&shift).map(|(x, s)| x + s).collect();
        let (pa, pb) = (pava_project(&a), pava_project(&b));
        let d = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        prop_assert!(d(&pa, &pb) <= d(&a, &b) * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn projected_stack_is_ordered(seed in 0u64..1000) {
        let d = build_domain(9, 1.0, DomainShape::Disk).unwrap();
        let mut k = seed;
        let values = (0..3)
            .map(|_| (0..d.len()).map(|_| { k = k.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); (k >> 11) as f64 / (1u64 << 53) as f64 - 0.5 }).collect())
            .collect();
        let mut s = MembraneStack::new_unchecked(d, values).unwrap();
        project_nodewise(&mut s);
        prop_assert!(s.is_ordered());
    }

    #[test]
    fn unrelaxed_sweeps_never_raise_energy(c in prop::collection::vec(-1.0f64..1.0, 3), f in prop::collection::vec(-2.0f64..2.0, 3)) {
        let mut c = c;
        c.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let d = build_domain(17, 1.0, DomainShape::Disk).unwrap();
        let sel: BcSelector = format!("constant-ordered:{},{},{}", c[0], c[1], c[2]).parse().unwrap();
        let bc = sel.boundary_data(d, 3).unwrap();
        let forcing = Forcing::constant(f);
        let mut s = harmonic_initial_guess(&bc).unwrap();
        let mut e = energy(&s, &forcing).unwrap();
        for _ in 0..15 {
            psor_sweep(&mut s, &forcing, &SolveConfig::audited());
            let next = energy(&s, &forcing).unwrap();
            prop_assert!(next <= e + 1e-12 * (1.0 + e.abs()));
            prop_assert!(s.is_ordered());
            e = next;
        }
    }

    #[test]
    fn csv_round_trip(c in category(), angle in 0.0f64..PI) {
        let d = build_domain(11, 1.0, DomainShape::Disk).unwrap();
        let s = example46_stack(&Example46::canonical(c, angle), d.clone()).unwrap();
        let header = StackHeader::new(&d, 3, &[1.0, 0.0, -1.0]);
        let back = stack_from_csv(&stack_to_csv(&s), &header).unwrap();
        for j in 0..3 {
            prop_assert_eq!(back.field(j).values(), s.field(j).values());
        }
    }

    #[test]
    fn normalised_stack_has_null_average(c in category(), angle in 0.0f64..PI, lift in -3.0f64..3.0) {
        let d = build_domain(17, 1.0, DomainShape::Disk).unwrap();
        let s = example46_stack(&Example46::canonical(c, angle), d).unwrap().add_common(|x, y| lift * (1.0 + x * y));
        prop_assert!(normalize_average(&s).null_average_defect() <= 1e-12);
    }

    #[test]
    fn null_average_halfspace_sums_to_zero(angle in 0.0f64..PI, a2 in -1.0f64..0.0, b1 in -1.0f64..0.0) {
        let a = vec![0.5, a2 * 0.5];
        let b = vec![b1, -(0.5 + a2 * 0.5 + b1)];
        prop_assume!(b[0] <= b[1]);
        let p = HalfSpaceProfile::null_average(angle, a, b).unwrap();
        prop_assert!(p.is_null_average(1e-12));
        let d = build_domain(17, 1.0, DomainShape::Disk).unwrap();
        let s = halfspace_stack(&p, d).unwrap();
        prop_assert!(s.null_average_defect() <= 1e-12);
    }

    #[test]
    fn categories_are_two_homogeneous(c in category(), angle in 0.0f64..PI) {
        let d = build_domain(65, 1.0, DomainShape::Disk).unwrap();
        let s = example46_stack(&Example46::canonical(c, angle), d).unwrap();
        let prof = rescale_unchecked(&s, (0.0, 0.0), 0.5, 65).unwrap();
        prop_assert!(homogeneity_defect(&prof, &[0.5]).unwrap() <= 2e-2);
    }

    #[test]
    fn weiss_value_is_rotation_invariant(c in category(), angle in 0.0f64..(2.0 * PI)) {
        let w0 = weiss_of_category(&Example46::canonical(c, 0.0)).unwrap();
        let w = weiss_of_category(&Example46::canonical(c, angle)).unwrap();
        prop_assert!((w - w0).abs() <= 1e-9);
    }

    #[test]
    fn selector_display_round_trips(c in category(), deg in -180.0f64..180.0) {
        let sel: BcSelector = format!("example46-{c}:{deg}").parse().unwrap();
        let back: BcSelector = sel.to_string().parse().unwrap();
        match (&sel, &back) {
            (BcSelector::Example46 { category: a, angle: x }, BcSelector::Example46 { category: b, angle: y }) => {
                prop_assert_eq!(a, b);
                prop_assert!((x - y).abs() <= 1e-12);
            }
            _ => prop_assert!(false, "selector kind changed: {back:?}"),
        }
    }
}
