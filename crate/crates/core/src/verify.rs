//! Seeded invariant suites run by the `verify` subcommand.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bc::BcSelector;
use crate::blowup::{classify, profile_from_stack};
use crate::error::{Error, Result};
use crate::geometry::{
    contact_sets, default_contact_eps, free_boundary_nodes, nondegeneracy_scan, quadratic_growth_scan,
};
use crate::grid::{build_domain, BoundaryData, DomainShape, Forcing};
use crate::profiles::{
    cone_solution, example46_stack, weiss_of_category, AnalyticStack, Category, ConeProfile, Example46,
    HalfSpaceProfile, CANONICAL_FORCING,
};
use crate::solver::{el_residual, harmonic_initial_guess, pava_project, solve, SolveConfig};
use crate::sym::Sym2;
use crate::weiss::weiss_energy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Pava,
    Solver,
    Geometry,
    Weiss,
    Blowup,
    Profiles,
    All,
}

impl Suite {
    const PARTS: [Suite; 6] = [Suite::Pava, Suite::Solver, Suite::Geometry, Suite::Weiss, Suite::Blowup, Suite::Profiles];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Pava => "pava",
            Suite::Solver => "solver",
            Suite::Geometry => "geometry",
            Suite::Weiss => "weiss",
            Suite::Blowup => "blowup",
            Suite::Profiles => "profiles",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::PARTS
            .iter()
            .chain([Suite::All].iter())
            .find(|x| x.as_str() == s)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("--suite: unknown suite '{s}'")))
    }
}

/// One aggregated check: `value <= limit` (or `>=` when `lower`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub lower: bool,
    pub samples: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub checks: Vec<Check>,
    /// Total number of individual comparisons behind the checks.
    pub comparisons: usize,
    pub violations: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

struct Recorder {
    suite: &'static str,
    checks: Vec<Check>,
}

impl Recorder {
    fn at_most(&mut self, name: &str, value: f64, limit: f64, samples: usize) {
        self.checks.push(Check {
            suite: self.suite.into(),
            name: name.into(),
            value,
            limit,
            lower: false,
            samples,
            passed: value <= limit,
        });
    }

    fn at_least(&mut self, name: &str, value: f64, limit: f64, samples: usize) {
        self.checks.push(Check {
            suite: self.suite.into(),
            name: name.into(),
            value,
            limit,
            lower: true,
            samples,
            passed: value >= limit,
        });
    }

    fn holds(&mut self, name: &str, ok: bool) {
        self.at_least(name, if ok { 1.0 } else { 0.0 }, 1.0, 1);
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<SuiteReport> {
    let parts: Vec<Suite> = if suite == Suite::All { Suite::PARTS.to_vec() } else { vec![suite] };
    let mut checks = Vec::new();
    for (i, s) in parts.iter().enumerate() {
        // one independent stream per suite
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64 * 0x9E37_79B9));
        let mut rec = Recorder { suite: s.as_str(), checks: Vec::new() };
        match s {
            Suite::Pava => pava_suite(&mut rec, &mut rng),
            Suite::Solver => solver_suite(&mut rec, &mut rng)?,
            Suite::Geometry => geometry_suite(&mut rec)?,
            Suite::Weiss => weiss_suite(&mut rec)?,
            Suite::Blowup => blowup_suite(&mut rec, &mut rng)?,
            Suite::Profiles => profiles_suite(&mut rec, &mut rng)?,
            Suite::All => unreachable!(),
        }
        checks.extend(rec.checks);
    }
    let comparisons = checks.iter().map(|c| c.samples).sum();
    let violations = checks.iter().filter(|c| !c.passed).cloned().collect();
    Ok(SuiteReport { suite, seed, checks, comparisons, violations })
}

/// Projection by enumerating every split into contiguous blocks.
pub fn projection_oracle(a: &[f64]) -> Vec<f64> {
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
        if v.windows(2).all(|w| w[0] >= w[1]) {
            let dist: f64 = v.iter().zip(a).map(|(x, y)| (x - y).powi(2)).sum();
            if best.as_ref().map_or(true, |(b, _)| dist < *b) {
                best = Some((dist, v));
            }
        }
    }
    best.unwrap().1
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn pava_suite(rec: &mut Recorder, rng: &mut ChaCha8Rng) {
    let count = 1000;
    let (mut oracle, mut sum, mut idem, mut order) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut expand = f64::NEG_INFINITY;
    for _ in 0..count {
        let n = rng.gen_range(1..=6);
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let pa = pava_project(&a);
        let pb = pava_project(&b);
        oracle = oracle.max(linf(&pa, &projection_oracle(&a)));
        sum = sum.max((pa.iter().sum::<f64>() - a.iter().sum::<f64>()).abs());
        idem = idem.max(linf(&pava_project(&pa), &pa));
        order = order.max(pa.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max));
        let dp: f64 = pa.iter().zip(&pb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let d: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        expand = expand.max(dp - d);
    }
    rec.at_most("oracle_linf", oracle, 1e-9, count);
    rec.at_most("sum_preserved", sum, 1e-12 * 60.0, count);
    rec.at_most("idempotent", idem, 0.0, count);
    rec.at_most("non_increasing", order, 0.0, count);
    rec.at_most("nonexpansive", expand, 1e-12, count);
}

fn solver_suite(rec: &mut Recorder, rng: &mut ChaCha8Rng) -> Result<()> {
    let d = build_domain(33, 1.0, DomainShape::Disk)?;
    let amp: f64 = rng.gen_range(0.02..0.1);
    let phase: f64 = rng.gen_range(0.0..2.0 * PI);
    let bc = BoundaryData::from_fn(d.clone(), 3, |x, y, g| {
        let s = amp * (1.0 + (y.atan2(x) + phase).sin());
        g.copy_from_slice(&[s, 0.0, -s]);
    })?;
    let f = Forcing::constant(CANONICAL_FORCING.to_vec());
    let init = harmonic_initial_guess(&bc)?;
    let (stack, rep) = solve(&init, &f, &bc, &SolveConfig { max_sweeps: 300, ..SolveConfig::audited() })?;
    let rise = rep
        .energy_trace
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    rec.at_most("energy_monotone_unrelaxed", rise, 1e-13, rep.energy_trace.len());
    rec.holds("ordered_after_sweeps", stack.is_ordered());
    let cfg = SolveConfig::tuned(&d);
    let (stack, rep) = solve(&stack, &f, &bc, &cfg)?;
    rec.holds("converged", rep.converged);
    let mask = contact_sets(&stack, default_contact_eps(&d, &f));
    let res = el_residual(&stack, &f, &mask)?;
    let h = d.h();
    rec.at_most("sum_identity", res.sum, 10.0 * rep.tol / (h * h), d.interior_nodes().len());
    let d = build_domain(65, 1.0, DomainShape::Disk)?;
    let width = rng.gen_range(0.1..0.2);
    let sel = BcSelector::Layered { angle: rng.gen_range(0.0..2.0 * PI), width };
    let bc = sel.boundary_data(d.clone(), 3)?;
    let (stack, _) = solve(&harmonic_initial_guess(&bc)?, &f, &bc, &SolveConfig::tuned(&d))?;
    let mask = contact_sets(&stack, default_contact_eps(&d, &f));
    let res = el_residual(&stack, &f, &mask)?;
    rec.at_most("separated_residual", res.separated, 0.05, res.separated_nodes);
    rec.at_most("contact_residual", res.contact, 0.05, res.contact_nodes);
    Ok(())
}

fn geometry_suite(rec: &mut Recorder) -> Result<()> {
    let d = build_domain(65, 1.0, DomainShape::Disk)?;
    let f = Forcing::with_separation(CANONICAL_FORCING.to_vec(), 1.0)?;
    let eps = default_contact_eps(&d, &f);
    let o = d.index(d.origin());
    let radii: Vec<f64> = (2..=8).map(|i| i as f64 * d.h() * 2.0).collect();
    for c in Category::ALL {
        let p = Example46::canonical(c, 0.0);
        let s = example46_stack(&p, d.clone())?;
        let fb = free_boundary_nodes(&contact_sets(&s, eps));
        let mut off = 0.0f64;
        let mut count = 0;
        for j in 0..2 {
            for &k in fb.free_boundary(j) {
                let kink = p.pieces().kink_distance(d.coords_of(k).0, d.coords_of(k).1);
                if kink.is_finite() {
                    off = off.max(kink);
                    count += 1;
                }
            }
        }
        rec.at_most(&format!("fb_within_one_cell_{c}"), off, d.h() * (1.0 + 1e-9), count);
        if c == Category::Ii {
            let scan = quadratic_growth_scan(&s, &fb, o, &radii)?;
            for (j, sl) in scan.slopes.iter().enumerate() {
                rec.at_most(&format!("growth_slope_ii_pair{}", j + 1), (sl.unwrap_or(f64::NAN) - 2.0).abs(), 0.05, radii.len());
            }
        }
        if c == Category::I {
            let scan = nondegeneracy_scan(&s, &fb, o, &radii, 1.0, None)?;
            rec.at_most("c_lower_i_pair1", (scan.c_lower[0] - 0.5).abs(), 1e-9, radii.len());
        }
    }
    Ok(())
}

fn weiss_suite(rec: &mut Recorder) -> Result<()> {
    let w: Vec<f64> = Category::ALL
        .iter()
        .map(|&c| weiss_of_category(&Example46::canonical(c, 0.0)))
        .collect::<Result<_>>()?;
    rec.at_most("category_i_value", (w[0] - PI / 8.0).abs(), 1e-6, 1);
    rec.at_least("gap_i_ii", w[1] - w[0], 1e-3, 1);
    rec.at_least("gap_ii_iii", w[2] - w[1], 1e-3, 1);
    rec.at_most("equal_iii_iv", (w[2] - w[3]).abs(), 1e-6, 1);
    rec.at_least("gap_iv_v", w[4] - w[3], 1e-3, 1);
    let d = build_domain(129, 1.0, DomainShape::Disk)?;
    let s = example46_stack(&Example46::canonical(Category::I, 0.0), d)?;
    let f = Forcing::constant(CANONICAL_FORCING.to_vec());
    let g = weiss_energy(&s, &f, (0.0, 0.0), 1.0, None)?;
    rec.at_most("grid_value_i", (g.w - PI / 8.0).abs(), 1e-2, 1);
    Ok(())
}

fn blowup_suite(rec: &mut Recorder, rng: &mut ChaCha8Rng) -> Result<()> {
    let d = build_domain(65, 1.0, DomainShape::Disk)?;
    let f = Forcing::constant(CANONICAL_FORCING.to_vec());
    for c in Category::ALL {
        let angle = rng.gen_range(0.0..2.0 * PI);
        let s = example46_stack(&Example46::canonical(c, angle), d.clone())?;
        let (res, m) = classify(&profile_from_stack(s, c.as_str())?, &f)?;
        rec.at_most(&format!("misfit_{c}"), res.misfit, 1e-8, 1);
        rec.holds(&format!("label_{c}"), m.label == Some(c));
        rec.at_most(&format!("alignment_{c}"), res.alignment_defect, d.h(), 1);
    }
    Ok(())
}

fn profiles_suite(rec: &mut Recorder, rng: &mut ChaCha8Rng) -> Result<()> {
    let angle = rng.gen_range(0.0..2.0 * PI);
    let hs = HalfSpaceProfile::null_average(angle, vec![0.7, 0.1, -0.2, -0.3], vec![-0.4, -0.1, 0.0, 0.2])?;
    let p = hs.pieces();
    let n = 1000;
    let mut worst = 0.0f64;
    let mut diff_dep = 0.0f64;
    for _ in 0..n {
        let (x, y) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        worst = worst.max(p.values(x, y).iter().sum::<f64>().abs());
        // shift along the line direction keeps x.e fixed
        let s: f64 = rng.gen_range(-1.0..1.0);
        let (x2, y2) = (x - s * hs.e[1], y + s * hs.e[0]);
        let (u, v) = (p.values(x, y), p.values(x2, y2));
        for j in 0..3 {
            diff_dep = diff_dep.max(((u[j] - u[j + 1]) - (v[j] - v[j + 1])).abs());
        }
    }
    rec.at_most("halfspace_null_average", worst, 1e-10, n);
    rec.at_most("halfspace_difference_depends_on_x_dot_e", diff_dep, 1e-10, n);
    let cone = ConeProfile::new(vec![0.0, 0.6, 1.7, 2.9], vec![0.5, 1.0, 1.5])?;
    let v = cone_solution(&cone);
    let mut min_eig = f64::INFINITY;
    for _ in 0..n {
        let t = rng.gen_range(0.0..cone.opening());
        let r = rng.gen_range(0.05..1.0);
        min_eig = min_eig.min(v.hessian(r * t.cos(), r * t.sin())[0].eigenvalues()[0]);
    }
    rec.at_least("cone_convex", min_eig, -1e-12, n);
    let _ = Sym2::ZERO;
    Ok(())
}
