//! Command-line front end. One problem file per run; flags only override
//! tolerances, grids and finite-difference settings.

pub mod problem;
pub mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::curves::{action, Curve};
use crate::differentiation::{
    check_normal_differentiability, first_partials, CompactSample, FdConfig, ScalarField, SharedField,
};
use crate::error::{Error, Result};
use crate::euler_lagrange::{el_residual, residual_dual_norm, solve_extremal, InitialGuess, SolverConfig};
use crate::lcs_model::{Space, Vector};
use crate::legendre_jacobi::{jacobi_eigen, jacobi_operators, legendre_check, legendre_witness, JacobiOperators};
use crate::symmetry_noether::{
    catalog_affine_parameters, catalog_names, check_invariance, find_affine_symmetries, noether_first_integral,
    verify_conservation, ConservationReport, InvarianceReport, SymmetryGenerator,
};
use problem::{Overrides, Problem, DEFAULT_AUDIT_TOLERANCE, DEFAULT_LEGENDRE_TOLERANCE};
use report::RunReport;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "NOETHER_LCS_THREADS";

#[derive(Debug, Parser)]
#[command(name = "noether-lcs", version, about = "Extremals, Legendre/Jacobi analysis and Noether integrals")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the boundary value problem and write the extremal as CSV.
    Solve(Common),
    /// Legendre condition along the extremal (or the seed curve).
    Legendre(Common),
    /// Lowest Jacobi eigenvalues.
    Jacobi {
        #[command(flatten)]
        common: Common,
        /// Number of eigenvalues.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Invariance residual of each generator (or just one).
    CheckInvariance {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        generator: Option<String>,
    },
    /// Invariance, Noether integral and its conservation along the extremal.
    Noether {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        generator: String,
    },
    /// Conservation of a user first integral along the extremal.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        integral: String,
    },
    /// Affine symmetry search.
    FindSymmetries(Common),
    /// Normal differentiability audit of the `[audit]` map.
    AuditDiff(Common),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Problem file (TOML).
    pub problem: PathBuf,
    /// Base relative finite-difference step.
    #[arg(long)]
    pub fd_step: Option<f64>,
    /// Richardson extrapolation levels.
    #[arg(long)]
    pub fd_richardson: Option<usize>,
    /// Override the command's verdict tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Override the number of grid intervals.
    #[arg(long)]
    pub grid_n: Option<usize>,
    /// Add velocity columns to curve CSVs.
    #[arg(long)]
    pub emit_velocity: bool,
    /// Output directory for CSV files and the JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Curve CSV used as the Newton initial guess, or as the analysed curve
    /// when the file has no boundary values.
    #[arg(long)]
    pub seed_curve: Option<PathBuf>,
    /// Record wall time in the report (makes output nondeterministic).
    #[arg(long)]
    pub timing: bool,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::Legendre(_) => "legendre",
            Command::Jacobi { .. } => "jacobi",
            Command::CheckInvariance { .. } => "check-invariance",
            Command::Noether { .. } => "noether",
            Command::Verify { .. } => "verify",
            Command::FindSymmetries(_) => "find-symmetries",
            Command::AuditDiff(_) => "audit-diff",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Solve(c) | Command::Legendre(c) | Command::FindSymmetries(c) | Command::AuditDiff(c) => c,
            Command::Jacobi { common, .. }
            | Command::CheckInvariance { common, .. }
            | Command::Noether { common, .. }
            | Command::Verify { common, .. } => common,
        }
    }
}

/// Caps the global thread pool from [`THREADS_ENV`].
pub fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|s| s.trim().parse::<usize>().ok()) {
        if n > 0 {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("could not size the thread pool: {e}");
            }
        }
    }
}

/// Runs one command. Errors are folded into the report.
pub fn execute(cmd: &Command) -> RunReport {
    let common = cmd.common();
    let start = Instant::now();
    let mut report = RunReport::new(cmd.name());
    report.input_path = common.problem.display().to_string();
    if let Err(e) = run(cmd, common, &mut report) {
        report.error = Some(e.to_string());
    }
    if common.timing {
        report.wall_time = Some(start.elapsed().as_secs_f64());
    }
    if let Some(dir) = &common.out {
        let path = dir.join(format!("{}.json", cmd.name()));
        report.outputs.push(path.display().to_string());
        if let Err(e) = fs::create_dir_all(dir).and_then(|_| fs::write(&path, report.to_json())) {
            report.error.get_or_insert(format!("i/o error: {e}"));
        }
    }
    report
}

fn run(cmd: &Command, common: &Common, report: &mut RunReport) -> Result<()> {
    let text = fs::read(&common.problem)?;
    report.input_sha256 = hex::encode(Sha256::digest(&text));
    let text = String::from_utf8(text).map_err(|_| Error::validation("problem file is not UTF-8"))?;
    let d = FdConfig::default();
    let ov = Overrides {
        grid_n: common.grid_n,
        fd: FdConfig {
            step: common.fd_step.or(d.step),
            richardson: common.fd_richardson.unwrap_or(d.richardson),
        },
    };
    if let Some(s) = ov.fd.step {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::validation("--fd-step must be positive"));
        }
    }
    if let Some(t) = common.tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::validation("--tol must be positive"));
        }
    }
    let problem = Problem::parse(&text, &ov)?;
    report.put(
        "grid",
        json!({
            "a": problem.grid.a(),
            "b": problem.grid.b(),
            "N": problem.grid.intervals(),
            "h": problem.grid.step(),
        }),
    );
    report.put("fd", ov.fd);
    let ctx = Context { problem, common };
    match cmd {
        Command::Solve(_) => ctx.solve(report),
        Command::Legendre(_) => ctx.legendre(report),
        Command::Jacobi { k, .. } => ctx.jacobi(*k, report),
        Command::CheckInvariance { generator, .. } => ctx.check_invariance(generator.as_deref(), report),
        Command::Noether { generator, .. } => ctx.noether(generator, report),
        Command::Verify { integral, .. } => ctx.verify(integral, report),
        Command::FindSymmetries(_) => ctx.find_symmetries(report),
        Command::AuditDiff(_) => ctx.audit(report),
    }
}

struct Context<'a> {
    problem: Problem,
    common: &'a Common,
}

#[derive(Serialize)]
struct InvarianceSummary {
    generator: String,
    samples: usize,
    max_abs_residual: f64,
    tolerance: f64,
    pass: bool,
    worst: Option<crate::symmetry_noether::InvarianceSample>,
}

impl From<&InvarianceReport> for InvarianceSummary {
    fn from(r: &InvarianceReport) -> Self {
        InvarianceSummary {
            generator: r.generator.clone(),
            samples: r.samples.len(),
            max_abs_residual: r.max_abs_residual,
            tolerance: r.tolerance,
            pass: r.pass,
            worst: r
                .samples
                .iter()
                .max_by(|a, b| a.residual.abs().total_cmp(&b.residual.abs()))
                .cloned(),
        }
    }
}

#[derive(Serialize)]
struct ConservationSummary {
    integral: String,
    mean: f64,
    max_deviation: f64,
    relative_deviation: f64,
    spread: f64,
    tolerance: f64,
    pass: bool,
}

impl From<&ConservationReport> for ConservationSummary {
    fn from(r: &ConservationReport) -> Self {
        ConservationSummary {
            integral: r.integral.clone(),
            mean: r.mean,
            max_deviation: r.max_deviation,
            relative_deviation: r.relative_deviation,
            spread: r.spread,
            tolerance: r.tolerance,
            pass: r.pass,
        }
    }
}

impl Context<'_> {
    fn lagrangian(&self) -> Result<SharedField> {
        self.problem.lagrangian().cloned()
    }

    fn seed(&self) -> Result<Option<Curve>> {
        self.common
            .seed_curve
            .as_ref()
            .map(|p| {
                let f = fs::File::open(p)?;
                Curve::read_csv(f, self.problem.space.clone(), self.problem.grid)
            })
            .transpose()
    }

    fn solver_config(&self, tol_override: bool) -> Result<SolverConfig> {
        let mut cfg = self.problem.solver.clone();
        if tol_override {
            if let Some(t) = self.common.tol {
                cfg.tolerance = t;
            }
        }
        if let Some(seed) = self.seed()? {
            cfg.initial_guess = InitialGuess::Seed(seed);
        }
        Ok(cfg)
    }

    /// The curve analysed by legendre/jacobi/noether/verify: the extremal
    /// when boundary values are given, else the seed curve.
    fn analysed_curve(&self, report: &mut RunReport) -> Result<Curve> {
        let l = self.lagrangian()?;
        if let Some(bc) = &self.problem.boundary {
            let cfg = self.solver_config(false)?;
            let ext = solve_extremal(l.as_ref(), &self.problem.space, bc, self.problem.grid, &cfg)?;
            report.put(
                "extremal",
                json!({
                    "source": "solved",
                    "iterations": ext.iterations,
                    "residual_max": ext.residual_max(),
                    "tolerance": cfg.tolerance,
                }),
            );
            report.verdict("extremal", ext.residual_max() <= cfg.tolerance);
            self.write_curve(&ext.curve, "extremal.csv", report)?;
            return Ok(ext.curve);
        }
        let Some(curve) = self.seed()? else {
            return Err(Error::validation("needs a [boundary] table or --seed-curve"));
        };
        let res = el_residual(l.as_ref(), &curve, None)?;
        report.put(
            "extremal",
            json!({
                "source": "seed-curve",
                "residual_max": res.max_abs,
                "tolerance": self.problem.solver.tolerance,
            }),
        );
        report.verdict("extremal", res.max_abs <= self.problem.solver.tolerance);
        Ok(curve)
    }

    fn write_curve(&self, curve: &Curve, name: &str, report: &mut RunReport) -> Result<()> {
        let Some(dir) = &self.common.out else {
            return Ok(());
        };
        write_curve_to(dir, curve, name, self.common.emit_velocity, report)
    }

    fn solve(&self, report: &mut RunReport) -> Result<()> {
        let l = self.lagrangian()?;
        let bc = self
            .problem
            .boundary
            .as_ref()
            .ok_or_else(|| Error::validation("solve needs a [boundary] table"))?;
        let cfg = self.solver_config(true)?;
        let ext = solve_extremal(l.as_ref(), &self.problem.space, bc, self.problem.grid, &cfg)?;
        let res = el_residual(l.as_ref(), &ext.curve, None)?;
        let act = action(l.as_ref(), &ext.curve)?;
        report.put(
            "solve",
            json!({
                "iterations": ext.iterations,
                "residual_history": ext.residual_history,
                "residual_max": ext.residual_max(),
                "residual_dual_norm": residual_dual_norm(&res).finite(),
                "norm_index": res.norm_index,
                "tolerance": cfg.tolerance,
                "action": act,
            }),
        );
        report.verdict("converged", ext.residual_max() <= cfg.tolerance);
        let dir = self.common.out.clone().unwrap_or_else(|| PathBuf::from("."));
        write_curve_to(&dir, &ext.curve, "extremal.csv", self.common.emit_velocity, report)
    }

    fn legendre(&self, report: &mut RunReport) -> Result<()> {
        let l = self.lagrangian()?;
        let curve = self.analysed_curve(report)?;
        let tol = self
            .common
            .tol
            .or(self.problem.file.tolerances.legendre)
            .unwrap_or(DEFAULT_LEGENDRE_TOLERANCE);
        let r = legendre_check(l.as_ref(), &curve, tol)?;
        let witness = legendre_witness(l.as_ref(), &curve, &r)?;
        report.put("legendre", &r);
        report.put(
            "witness",
            witness.as_ref().map(|w| json!({"node": w.node, "second_variation": w.second_variation})),
        );
        report.verdict("legendre", r.pass);
        Ok(())
    }

    fn jacobi(&self, k: Option<usize>, report: &mut RunReport) -> Result<()> {
        let k = k.unwrap_or_else(|| self.problem.jacobi_modes());
        let (ops, source) = match self.problem.jacobi_matrices()? {
            Some((r, p)) => (
                JacobiOperators::new(self.problem.space.clone(), self.problem.grid, r, p)?,
                "problem-file",
            ),
            None => {
                let curve = self.analysed_curve(report)?;
                (jacobi_operators(self.lagrangian()?.as_ref(), &curve)?, "lagrangian")
            }
        };
        let modes = jacobi_eigen(&ops, k)?;
        for (j, m) in modes.iter().enumerate() {
            self.write_curve(&m.eigenfunction, &format!("jacobi_mode_{}.csv", j + 1), report)?;
        }
        let eigenvalues: Vec<f64> = modes.iter().map(|m| m.eigenvalue).collect();
        report.put(
            "jacobi",
            json!({
                "operators": source,
                "k": k,
                "eigenvalues": eigenvalues,
                "lowest_positive": eigenvalues.first().is_some_and(|l| *l > 0.0),
            }),
        );
        Ok(())
    }

    fn invariance_tolerance(&self) -> crate::symmetry_noether::SamplingConfig {
        let mut s = self.problem.sampling.clone();
        if self.common.tol.is_some() {
            s.tolerance = self.common.tol;
        }
        s
    }

    fn check_invariance(&self, name: Option<&str>, report: &mut RunReport) -> Result<()> {
        let l = self.lagrangian()?;
        let generators: Vec<SymmetryGenerator> = match name {
            Some(n) => vec![self.problem.generator(n)?],
            None if self.problem.generators.is_empty() => {
                return Err(Error::validation("no [[generators]] in the problem file; pass --generator"))
            }
            None => self.problem.generators.clone(),
        };
        let sampling = self.invariance_tolerance();
        let mut out = Vec::new();
        for g in &generators {
            let r = check_invariance(l.as_ref(), g, &sampling)?;
            report.verdict(format!("invariance:{}", g.name()), r.pass);
            out.push(InvarianceSummary::from(&r));
        }
        report.put("sampling", &sampling);
        report.put("invariance", out);
        Ok(())
    }

    fn conservation_tolerance(&self) -> f64 {
        let h = self.problem.grid.step();
        self.common
            .tol
            .or(self.problem.file.tolerances.conservation)
            .unwrap_or(50.0 * h * h)
    }

    fn noether(&self, name: &str, report: &mut RunReport) -> Result<()> {
        let l = self.lagrangian()?;
        let g = self.problem.generator(name)?;
        let sampling = self.problem.sampling.clone();
        let inv = check_invariance(l.as_ref(), &g, &sampling)?;
        report.verdict("invariance", inv.pass);
        report.put("sampling", &sampling);
        report.put("invariance", InvarianceSummary::from(&inv));
        let c = noether_first_integral(l, &g)?;
        let curve = self.analysed_curve(report)?;
        let r = verify_conservation(&c, &curve, self.conservation_tolerance())?;
        report.verdict("conservation", r.pass);
        report.put("conservation", ConservationSummary::from(&r));
        Ok(())
    }

    fn verify(&self, name: &str, report: &mut RunReport) -> Result<()> {
        let c = self.problem.integral(name)?.clone();
        let curve = self.analysed_curve(report)?;
        let r = verify_conservation(&c, &curve, self.conservation_tolerance())?;
        report.verdict("conservation", r.pass);
        report.put("conservation", ConservationSummary::from(&r));
        Ok(())
    }

    fn find_symmetries(&self, report: &mut RunReport) -> Result<()> {
        let l = self.lagrangian()?;
        let search = find_affine_symmetries(l.as_ref(), &self.problem.sampling)?;
        let m = self.problem.dim();
        let found: Vec<_> = search
            .symmetries
            .iter()
            .map(|s| {
                json!({
                    "name": s.generator.name(),
                    "coefficients": s.coefficients,
                    "recheck_max_abs_residual": s.recheck.max_abs_residual,
                    "recheck_samples": s.recheck.samples.len(),
                    "recheck_tolerance": s.recheck.tolerance,
                })
            })
            .collect();
        let mut spanned = Vec::new();
        for n in catalog_names(m) {
            if search.spans(&catalog_affine_parameters(&n, m)?) {
                spanned.push(n);
            }
        }
        report.put(
            "symmetries",
            json!({
                "basis": found,
                "size": search.symmetries.len(),
                "samples": search.samples,
                "singular_values": search.singular_values,
                "null_space_threshold": search.threshold,
                "catalog_in_span": spanned,
            }),
        );
        report.verdict("recheck", search.symmetries.iter().all(|s| s.recheck.pass));
        Ok(())
    }

    fn audit(&self, report: &mut RunReport) -> Result<()> {
        let spec = self
            .problem
            .file
            .audit
            .as_ref()
            .ok_or_else(|| Error::validation("audit-diff needs an [audit] table"))?;
        let m = self.problem.dim();
        if spec.map.is_empty() || spec.points.is_empty() {
            return Err(Error::validation("[audit] needs a nonempty map and point list"));
        }
        let comps: Vec<SharedField> = spec
            .map
            .iter()
            .map(|s| {
                let f = crate::dsl::ExprField::parse(s, m)?.with_fd(self.problem.fd);
                if f.arity().v {
                    return Err(Error::validation("[audit] map components may depend on t and x only"));
                }
                Ok(std::sync::Arc::new(f) as SharedField)
            })
            .collect::<Result<_>>()?;
        let k = comps.len();
        let dst = Space::sup_norm(k)?;
        let zero = Vector::zeros(m);
        let g = |x: &Vector| -> Result<Vector> {
            let vals = comps.iter().map(|f| f.value(0.0, x, &zero)).collect::<Result<Vec<_>>>()?;
            Ok(Vector::from_vec(vals))
        };
        let dg = |x: &Vector| -> Result<nalgebra::DMatrix<f64>> {
            let mut a = nalgebra::DMatrix::zeros(k, m);
            for (i, f) in comps.iter().enumerate() {
                a.set_row(i, &first_partials(f.as_ref(), 0.0, x, &zero)?.dx().transpose());
            }
            Ok(a)
        };
        let points = spec.points.iter().map(|p| Vector::from_row_slice(p)).collect();
        let sample = CompactSample::new(points, spec.directions.unwrap_or(16));
        let tol = self
            .common
            .tol
            .or(self.problem.file.tolerances.audit)
            .unwrap_or(DEFAULT_AUDIT_TOLERANCE);
        let audit = check_normal_differentiability(&self.problem.space, &dst, g, dg, &sample, tol)?;
        report.verdict("audit", audit.pass());
        report.put(
            "audit",
            json!({
                "tolerance": audit.tolerance,
                "radii": audit.sample.radii,
                "points": audit.sample.points.len(),
                "directions": audit.sample.directions.len(),
                "pairs": audit.pairs,
            }),
        );
        Ok(())
    }
}

fn write_curve_to(dir: &Path, curve: &Curve, name: &str, velocity: bool, report: &mut RunReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    curve.write_csv(fs::File::create(&path)?, velocity)?;
    report.outputs.push(path.display().to_string());
    Ok(())
}

/// Entry point for the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    let report = execute(&cli.command);
    print!("{}", report.to_json());
    if let Some(e) = &report.error {
        eprintln!("error: {e}");
    }
    report.exit_code()
}
