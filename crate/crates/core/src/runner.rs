//! Batch runner behind the `membranes` binary: configuration resolution and
//! one function per subcommand.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bc::BcSelector;
use crate::blowup::{classify, homogeneity_defect, profile_from_stack, rescale, BlowupProfile, N_REF};
use crate::error::{Error, Result};
use crate::geometry::{
    contact_sets, default_contact_eps, free_boundary_nodes, hessian_bound_report, nondegeneracy_scan,
    quadratic_growth_scan, MultiplicityMap,
};
use crate::grid::{build_domain, DomainShape, Forcing, GridDomain, MembraneStack};
use crate::io::write_stack;
use crate::profiles::{example46_stack, weiss_of_category, Category, Example46};
use crate::solver::{el_residual, harmonic_initial_guess, solve, solve_null_average, SolveConfig, SolveReport};
use crate::verify::{run_suite, Suite};
use crate::weiss::{weiss_energy, weiss_sweep};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Solve,
    Weiss,
    Blowup,
    Classify,
    Fixtures,
    Verify,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Weiss => "weiss",
            Command::Blowup => "blowup",
            Command::Classify => "classify",
            Command::Fixtures => "fixtures",
            Command::Verify => "verify",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Command::Solve, Command::Weiss, Command::Blowup, Command::Classify, Command::Fixtures, Command::Verify]
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("command: unknown subcommand '{s}'")))
    }
}

/// Every setting is optional; a TOML file and command-line flags both fill
/// one of these, and [`ConfigFile::overridden_by`] lets the flags win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub command: Option<Command>,
    pub n: Option<usize>,
    #[serde(rename = "R")]
    pub radius: Option<f64>,
    pub shape: Option<DomainShape>,
    #[serde(rename = "N")]
    pub n_membranes: Option<usize>,
    pub forcing: Option<Vec<f64>>,
    pub bc: Option<String>,
    pub omega: Option<f64>,
    pub tol: Option<f64>,
    pub max_sweeps: Option<usize>,
    pub radii: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub category: Option<String>,
    /// Degrees.
    pub angle: Option<f64>,
    pub suite: Option<String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::InvalidArgument(format!("--config {}: {e}", path.display())))
    }

    pub fn overridden_by(self, o: ConfigFile) -> ConfigFile {
        ConfigFile {
            command: o.command.or(self.command),
            n: o.n.or(self.n),
            radius: o.radius.or(self.radius),
            shape: o.shape.or(self.shape),
            n_membranes: o.n_membranes.or(self.n_membranes),
            forcing: o.forcing.or(self.forcing),
            bc: o.bc.or(self.bc),
            omega: o.omega.or(self.omega),
            tol: o.tol.or(self.tol),
            max_sweeps: o.max_sweeps.or(self.max_sweeps),
            radii: o.radii.or(self.radii),
            out: o.out.or(self.out),
            seed: o.seed.or(self.seed),
            category: o.category.or(self.category),
            angle: o.angle.or(self.angle),
            suite: o.suite.or(self.suite),
        }
    }
}

/// Validated configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub n: usize,
    #[serde(rename = "R")]
    pub radius: f64,
    pub shape: DomainShape,
    #[serde(rename = "N")]
    pub n_membranes: usize,
    pub forcing: Vec<f64>,
    pub bc: BcSelector,
    pub solver: SolveConfig,
    /// Relaxation factor was chosen from the grid rather than given.
    pub omega_tuned: bool,
    pub radii: Option<Vec<f64>>,
    pub out: PathBuf,
    pub seed: u64,
    pub category: Option<Category>,
    /// Radians.
    pub angle: f64,
    pub suite: Suite,
}

fn usage(flag: &str, msg: impl fmt::Display) -> Error {
    Error::InvalidArgument(format!("--{flag}: {msg}"))
}

impl RunConfig {
    pub fn resolve(file: ConfigFile) -> Result<Self> {
        let command = file
            .command
            .ok_or_else(|| Error::InvalidArgument("command: no subcommand given".into()))?;
        let n = file.n.unwrap_or(129);
        if n < 9 || n % 2 == 0 {
            return Err(usage("n", format!("grid size must be odd and at least 9 (got {n})")));
        }
        let radius = file.radius.unwrap_or(1.0);
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(usage("R", format!("radius must be positive (got {radius})")));
        }
        let shape = file.shape.unwrap_or(DomainShape::Disk);
        let bc: BcSelector = match &file.bc {
            Some(s) => s.parse()?,
            None => BcSelector::ConstantOrdered { values: None },
        };
        let n_membranes = file.n_membranes.or(bc.required_membranes()).unwrap_or(3);
        if !(2..=64).contains(&n_membranes) {
            return Err(usage("N", format!("need between 2 and 64 membranes (got {n_membranes})")));
        }
        if let Some(req) = bc.required_membranes() {
            if req != n_membranes {
                return Err(usage("N", format!("boundary data '{bc}' needs N = {req} (got {n_membranes})")));
            }
        }
        let forcing = file.forcing.clone().unwrap_or_else(|| bc.default_forcing(n_membranes));
        if forcing.len() != n_membranes {
            return Err(usage("forcing", format!("{} values for N = {n_membranes}", forcing.len())));
        }
        if forcing.iter().any(|f| !f.is_finite()) {
            return Err(usage("forcing", "values must be finite"));
        }
        let nd_gated = matches!(command, Command::Blowup) || (command == Command::Classify && file.category.is_none());
        if nd_gated && forcing.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(usage("forcing", format!("{command} needs strictly decreasing forcing")));
        }
        let domain = build_domain(n, radius, shape)?;
        let omega_tuned = file.omega.is_none();
        let mut solver = if omega_tuned { SolveConfig::tuned(&domain) } else { SolveConfig::default() };
        if let Some(w) = file.omega {
            solver.omega = w;
        }
        solver.tol = file.tol;
        if let Some(m) = file.max_sweeps {
            solver.max_sweeps = m;
        }
        solver.validate().map_err(|e| match e {
            Error::InvalidArgument(m) if m.contains("omega") => usage("omega", m),
            Error::InvalidArgument(m) if m.contains("tol") => usage("tol", m),
            Error::InvalidArgument(m) => usage("max-sweeps", m),
            other => other,
        })?;
        if let Some(r) = &file.radii {
            if r.is_empty() || r.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(usage("radii", "radii must be positive"));
            }
        }
        let category = file
            .category
            .as_deref()
            .map(|c| c.parse::<Category>().map_err(|_| usage("category", format!("unknown category '{c}'"))))
            .transpose()?;
        if command == Command::Fixtures && category.is_none() {
            return Err(usage("category", "fixtures needs a category (i, ii, iii, iv or v)"));
        }
        let angle = file.angle.unwrap_or(0.0);
        if !angle.is_finite() {
            return Err(usage("angle", "angle must be finite"));
        }
        let suite = match &file.suite {
            Some(s) => s.parse()?,
            None => Suite::All,
        };
        Ok(RunConfig {
            command,
            n,
            radius,
            shape,
            n_membranes,
            forcing,
            bc,
            solver,
            omega_tuned,
            radii: file.radii,
            out: file.out.unwrap_or_else(|| PathBuf::from("out")),
            seed: file.seed.unwrap_or(0),
            category,
            angle: angle.to_radians(),
            suite,
        })
    }

    pub fn domain(&self) -> Result<Arc<GridDomain>> {
        build_domain(self.n, self.radius, self.shape)
    }
}

/// Result of one run: the summary written to `summary.json` and the exit code.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: Value,
    pub exit_code: i32,
}

pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    fs::create_dir_all(&cfg.out)?;
    let (results, exit_code) = match cfg.command {
        Command::Solve => (run_solve(cfg)?, 0),
        Command::Weiss => run_weiss(cfg)?,
        Command::Blowup => (run_blowup(cfg)?, 0),
        Command::Classify => (run_classify(cfg)?, 0),
        Command::Fixtures => (run_fixtures(cfg)?, 0),
        Command::Verify => run_verify(cfg)?,
    };
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let summary = json!({
        "command": cfg.command,
        "config": cfg,
        "results": results,
        "exit_code": exit_code,
        "timestamp": timestamp,
    });
    write_json(&cfg.out.join("summary.json"), &summary)?;
    Ok(RunOutcome { summary, exit_code })
}

/// The summary with the `timestamp` field removed, for reproducibility checks.
pub fn without_timestamp(summary: &Value) -> Value {
    let mut v = summary.clone();
    if let Some(m) = v.as_object_mut() {
        m.remove("timestamp");
    }
    v
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(v)? + "\n")?;
    Ok(())
}

struct Solved {
    stack: MembraneStack,
    forcing: Forcing,
    report: SolveReport,
    fb: MultiplicityMap,
}

fn solve_instance(cfg: &RunConfig, null_average: bool) -> Result<Solved> {
    let d = cfg.domain()?;
    let bc = cfg.bc.boundary_data(d.clone(), cfg.n_membranes)?;
    let forcing = Forcing::constant(cfg.forcing.clone());
    let init = harmonic_initial_guess(&bc)?;
    let (stack, report) = if null_average {
        solve_null_average(&init, &forcing, &bc, &cfg.solver)?
    } else {
        solve(&init, &forcing, &bc, &cfg.solver)?
    };
    let fb = free_boundary_nodes(&contact_sets(&stack, default_contact_eps(&d, &forcing)));
    Ok(Solved { stack, forcing, report, fb })
}

fn hm_point(s: &Solved) -> Result<usize> {
    s.fb.nearest_highest_multiplicity(0.0, 0.0).ok_or_else(|| {
        Error::InvalidArgument("--bc: the solved instance has no highest-multiplicity node".into())
    })
}

fn run_solve(cfg: &RunConfig) -> Result<Value> {
    let s = solve_instance(cfg, false)?;
    let d = s.stack.domain().clone();
    write_stack(&cfg.out, "stack", &s.stack, &cfg.forcing)?;
    let mut trace = String::from("sweep,energy\n");
    for (i, e) in s.report.energy_trace.iter().enumerate() {
        trace.push_str(&format!("{i},{e:.16e}\n"));
    }
    fs::write(cfg.out.join("energy.csv"), trace)?;
    let mask = contact_sets(&s.stack, default_contact_eps(&d, &s.forcing));
    let res = el_residual(&s.stack, &s.forcing, &mask)?;
    let closed_form_error = match cfg.bc.closed_form(cfg.n_membranes)? {
        Some(p) => {
            let mut worst = 0.0f64;
            let mut v = vec![0.0; cfg.n_membranes];
            for k in d.active_nodes() {
                let (x, y) = d.coords_of(k);
                p.value(x, y, &mut v);
                for (j, f) in s.stack.fields().iter().enumerate() {
                    worst = worst.max((f.values()[k] - v[j]).abs());
                }
            }
            Some(worst)
        }
        None => None,
    };
    Ok(json!({
        "converged": s.report.converged,
        "sweeps": s.report.sweeps,
        "residual": s.report.residual,
        "energy": s.report.energy,
        "omega": s.report.omega,
        "tol": s.report.tol,
        "el_residual": res,
        "contact_nodes": (0..mask.pairs()).map(|j| mask.count(j)).collect::<Vec<_>>(),
        "free_boundary_nodes": (0..s.fb.pairs()).map(|j| s.fb.free_boundary(j).len()).collect::<Vec<_>>(),
        "highest_multiplicity_nodes": s.fb.highest_multiplicity_nodes().len(),
        "hessian_bound": hessian_bound_report(&s.stack, 0.1 * d.radius()),
        "null_average_defect": s.stack.null_average_defect(),
        "closed_form_error": closed_form_error,
        "growth": growth_summary(&s.stack, &s.forcing, &growth_radii(&d)).ok(),
        "files": ["stack.csv", "stack.json", "energy.csv"],
    }))
}

fn default_weiss_radii(d: &GridDomain, p: (f64, f64)) -> Vec<f64> {
    let lo = 8.0 * d.h();
    let hi = (d.radius() / 3.0).min(d.radius() - p.0.hypot(p.1) - d.h());
    (0..6).map(|i| lo + (hi - lo) * i as f64 / 5.0).collect()
}

fn run_weiss(cfg: &RunConfig) -> Result<(Value, i32)> {
    let s = solve_instance(cfg, false)?;
    let d = s.stack.domain().clone();
    let p = hm_point(&s)?;
    let pc = d.coords_of(p);
    let radii = cfg.radii.clone().unwrap_or_else(|| default_weiss_radii(&d, pc));
    let sweep = weiss_sweep(&s.stack, &s.forcing, pc, &radii, None)?;
    let mut csv = String::from("r,bulk,boundary,W,dW_dr,L,flag\n");
    for (i, smp) in sweep.samples.iter().enumerate() {
        let (dw, l, flag) = if i + 1 < sweep.samples.len() {
            (format!("{:.16e}", sweep.derivatives[i]), format!("{:.16e}", sweep.lower_bounds[i]), (sweep.flagged[i] as u8).to_string())
        } else {
            (String::new(), String::new(), String::new())
        };
        csv.push_str(&format!("{:.16e},{:.16e},{:.16e},{:.16e},{dw},{l},{flag}\n", smp.r, smp.bulk, smp.boundary, smp.w));
    }
    fs::write(cfg.out.join("sweep.csv"), csv)?;
    let flagged = sweep.flagged_gaps();
    Ok((
        json!({
            "converged": s.report.converged,
            "p": pc,
            "radii": radii,
            "W": sweep.samples.iter().map(|x| x.w).collect::<Vec<_>>(),
            "derivatives": sweep.derivatives,
            "lower_bounds": sweep.lower_bounds,
            "tolerances": sweep.tolerances,
            "flagged_gaps": flagged,
            "files": ["sweep.csv"],
        }),
        0,
    ))
}

fn blowup_radii(cfg: &RunConfig) -> Vec<f64> {
    cfg.radii.clone().unwrap_or_else(|| [0.4, 0.2, 0.1].iter().map(|r| r * cfg.radius).collect())
}

fn max_distance(a: &BlowupProfile, b: &BlowupProfile) -> f64 {
    let mut worst = 0.0f64;
    for k in a.reference.active_nodes() {
        for (fa, fb) in a.stack.fields().iter().zip(b.stack.fields()) {
            worst = worst.max((fa.values()[k] - fb.values()[k]).abs());
        }
    }
    worst
}

fn run_blowup(cfg: &RunConfig) -> Result<Value> {
    let s = solve_instance(cfg, true)?;
    let d = s.stack.domain().clone();
    let p = hm_point(&s)?;
    let radii = blowup_radii(cfg);
    let mut profiles = Vec::new();
    for &r in &radii {
        profiles.push(rescale(&s.stack, &s.fb, p, r, N_REF)?.with_source(cfg.bc.to_string()));
    }
    let lambdas = [0.5, 0.25];
    let defects = profiles.iter().map(|pr| homogeneity_defect(pr, &lambdas)).collect::<Result<Vec<_>>>()?;
    let distances: Vec<f64> = profiles.windows(2).map(|w| max_distance(&w[0], &w[1])).collect();
    let labels: Vec<Option<Category>> = if cfg.n_membranes == 3 && s.forcing.constants() == [1.0, 0.0, -1.0] {
        profiles.iter().map(|pr| classify(pr, &s.forcing).map(|(_, m)| m.label)).collect::<Result<_>>()?
    } else {
        vec![None; profiles.len()]
    };
    for (i, pr) in profiles.iter().enumerate() {
        write_stack(&cfg.out, &format!("blowup_{i}"), &pr.stack, &cfg.forcing)?;
    }
    Ok(json!({
        "converged": s.report.converged,
        "p": d.coords_of(p),
        "radii": radii,
        "lambdas": lambdas,
        "homogeneity_defects": defects,
        "successive_distances": distances,
        "offsets": profiles.iter().map(|p| p.offsets.clone()).collect::<Vec<_>>(),
        "origin_gradients": profiles.iter().map(|p| p.origin_gradient).collect::<Vec<_>>(),
        "labels": labels,
        "files": (0..profiles.len()).map(|i| format!("blowup_{i}.csv")).collect::<Vec<_>>(),
    }))
}

fn run_classify(cfg: &RunConfig) -> Result<Value> {
    let (profile, forcing, source) = match cfg.category {
        Some(c) => {
            let params = Example46::canonical(c, cfg.angle);
            let d = build_domain(cfg.n, 1.0, DomainShape::Disk)?;
            let stack = example46_stack(&params, d)?;
            (profile_from_stack(stack, c.as_str())?, Forcing::constant(vec![1.0, 0.0, -1.0]), format!("fixture {c}"))
        }
        None => {
            let s = solve_instance(cfg, true)?;
            let p = hm_point(&s)?;
            let r = blowup_radii(cfg).into_iter().fold(f64::INFINITY, f64::min);
            let prof = rescale(&s.stack, &s.fb, p, r, N_REF)?;
            (prof, s.forcing, format!("blow-up of {} at r = {r}", cfg.bc))
        }
    };
    let (result, category) = if profile.len() == 3 && forcing.constants() == [1.0, 0.0, -1.0] {
        let (r, m) = classify(&profile, &forcing)?;
        (r, Some(m))
    } else {
        (crate::blowup::classify_halfspace(&profile), None)
    };
    let out = json!({
        "source": source,
        "classification": result,
        "category": category,
        "e_angle_deg": result.e_angle.map(f64::to_degrees),
    });
    write_json(&cfg.out.join("classification.json"), &out)?;
    Ok(json!({
        "label": category.as_ref().and_then(|m| m.label),
        "misfit": result.misfit,
        "alignment_defect": result.alignment_defect,
        "files": ["classification.json"],
    }))
}

fn run_fixtures(cfg: &RunConfig) -> Result<Value> {
    let c = cfg.category.expect("checked in resolve");
    let params = Example46::canonical(c, cfg.angle);
    let d = cfg.domain()?;
    let stack = example46_stack(&params, d.clone())?;
    let forcing = Forcing::constant(vec![1.0, 0.0, -1.0]);
    write_stack(&cfg.out, "stack", &stack, forcing.constants())?;
    let r = d.radius().min(1.0);
    let grid_w = weiss_energy(&stack, &forcing, (0.0, 0.0), r, None)?;
    let quad_w = weiss_of_category(&params)?;
    Ok(json!({
        "category": c,
        "params": params,
        "W_grid": grid_w.w,
        "W_grid_radius": r,
        "W_quadrature": quad_w,
        "files": ["stack.csv", "stack.json"],
    }))
}

fn run_verify(cfg: &RunConfig) -> Result<(Value, i32)> {
    let report = run_suite(cfg.suite, cfg.seed)?;
    let code = if report.passed() { 0 } else { 1 };
    write_json(&cfg.out.join("violations.json"), &report.violations)?;
    Ok((serde_json::to_value(&report)?, code))
}

/// Eight geometric radii over `[4h, R/4]`.
pub fn growth_radii(d: &GridDomain) -> Vec<f64> {
    let (lo, hi) = (4.0 * d.h(), d.radius() / 4.0);
    (0..8).map(|i| lo * (hi / lo).powf(i as f64 / 7.0)).collect()
}

/// Solved-instance diagnostics around the highest-multiplicity node nearest
/// the origin: growth slopes and the non-degeneracy constant.
pub fn growth_summary(stack: &MembraneStack, forcing: &Forcing, radii: &[f64]) -> Result<Value> {
    let d = stack.domain();
    let fb = free_boundary_nodes(&contact_sets(stack, default_contact_eps(d, forcing)));
    let p = fb
        .nearest_highest_multiplicity(0.0, 0.0)
        .ok_or_else(|| Error::InvalidArgument("no highest-multiplicity node".into()))?;
    let growth = quadratic_growth_scan(stack, &fb, p, radii)?;
    let theta = forcing.constants().windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min);
    let nd = if theta > 0.0 { Some(nondegeneracy_scan(stack, &fb, p, radii, theta, None)?) } else { None };
    Ok(json!({ "growth": growth, "nondegeneracy": nd }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(cmd: Command) -> ConfigFile {
        ConfigFile { command: Some(cmd), ..Default::default() }
    }

    #[test]
    fn defaults_and_overrides() {
        let base = ConfigFile { n: Some(65), omega: Some(1.2), ..file(Command::Solve) };
        let flags = ConfigFile { n: Some(33), ..Default::default() };
        let cfg = RunConfig::resolve(base.overridden_by(flags)).unwrap();
        assert_eq!(cfg.n, 33);
        assert_eq!(cfg.solver.omega, 1.2);
        assert_eq!(cfg.n_membranes, 3);
        assert_eq!(cfg.forcing, vec![1.0, 0.0, -1.0]);
    }

    #[test]
    fn errors_name_the_flag() {
        let bad = |f: ConfigFile, flag: &str| {
            let msg = RunConfig::resolve(f).unwrap_err().to_string();
            assert!(msg.contains(flag), "{msg}");
        };
        bad(ConfigFile { n: Some(64), ..file(Command::Solve) }, "--n");
        bad(ConfigFile { omega: Some(2.5), ..file(Command::Solve) }, "--omega");
        bad(ConfigFile { forcing: Some(vec![1.0, 0.0]), ..file(Command::Solve) }, "--forcing");
        bad(ConfigFile { bc: Some("radial-eps".into()), n_membranes: Some(3), ..file(Command::Solve) }, "--N");
        bad(ConfigFile { bc: Some("bogus".into()), ..file(Command::Solve) }, "--bc");
        bad(file(Command::Fixtures), "--category");
        bad(ConfigFile { forcing: Some(vec![0.0, 0.0, 0.0]), ..file(Command::Blowup) }, "--forcing");
        bad(ConfigFile { suite: Some("nope".into()), ..file(Command::Verify) }, "--suite");
    }

    #[test]
    fn toml_config_parses() {
        let c: ConfigFile = toml::from_str("command = \"solve\"\nn = 33\nR = 1.0\nN = 2\nbc = \"radial-eps:0.1\"\n").unwrap();
        let cfg = RunConfig::resolve(c).unwrap();
        assert_eq!(cfg.n_membranes, 2);
        assert_eq!(cfg.forcing, vec![1.0, -1.0]);
        assert!(toml::from_str::<ConfigFile>("unknown = 1").is_err());
    }

    #[test]
    fn solve_run_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let f = ConfigFile {
            n: Some(33),
            bc: Some("example46-i".into()),
            out: Some(dir.path().to_path_buf()),
            ..file(Command::Solve)
        };
        let out = run(&RunConfig::resolve(f).unwrap()).unwrap();
        assert_eq!(out.summary["results"]["converged"], true);
        for name in ["summary.json", "stack.csv", "stack.json", "energy.csv"] {
            assert!(dir.path().join(name).exists(), "{name}");
        }
    }
}
