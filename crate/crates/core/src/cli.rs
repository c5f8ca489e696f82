//! The `autogst` command-line driver.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 2 | usage error (bad flags or arguments) |
//! | 3 | configuration error (parse error, unknown key, invalid value) |
//! | 4 | unknown model name |
//! | 5 | dimension mismatch (for example a perturbation file for another mesh) |
//! | 6 | numerical failure (solver or eigensolver did not converge, singular system) |
//! | 7 | verification failed |
//! | 8 | I/O error |

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::assembly::mass_matrix;
use crate::config::{Config, ModelConfig};
use crate::eigensolver::{gst_from_tape, LanczosParams, SingularTriplet};
use crate::error::{Error, Result};
use crate::io::{self, Provenance};
use crate::linalg::weighted_norm;
use crate::models::ModelSpec;
use crate::solvers::NewtonParams;
use crate::verification::{default_amplitude, growth_curve, random_direction, run_suite, SuiteReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_UNKNOWN_MODEL: i32 = 4;
pub const EXIT_DIMENSION: i32 = 5;
pub const EXIT_NUMERICAL: i32 = 6;
pub const EXIT_VERIFICATION: i32 = 7;
pub const EXIT_IO: i32 = 8;

#[derive(Debug, Parser)]
#[command(name = "autogst", version, about = "Generalised stability analysis of recorded forward models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,

    /// JSON configuration file; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Replace the configured model by the defaults of this model.
    #[arg(long, global = true)]
    pub model: Option<String>,

    /// Number of singular triplets.
    #[arg(long, global = true)]
    pub nev: Option<usize>,

    /// Seed for every pseudorandom vector.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Eigensolver residual tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,

    /// Directory for result files.
    #[arg(long, global = true, default_value = "autogst-out")]
    pub out_dir: PathBuf,

    /// Print the effective configuration, defaults included, and exit.
    #[arg(long, global = true)]
    pub show_config: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the forward model and write its state after every step.
    Forward,
    /// Compute the leading singular triplets of the propagator.
    Gst,
    /// Dot-product, gradient, Taylor and dense-oracle checks.
    Verify,
    /// Nonlinear growth curve of a perturbation.
    Growth {
        /// Perturbation in the `vector_<i>.csv` format; the leading right
        /// singular vector when omitted.
        #[arg(long)]
        vector: Option<PathBuf>,
        /// Curve length in steps.
        #[arg(long)]
        steps: Option<usize>,
        /// Perturbation size in the input norm.
        #[arg(long)]
        amplitude: Option<f64>,
    },
    /// Time the forward run against tangent-linear and adjoint sweeps.
    Bench {
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Json(_) => EXIT_CONFIG,
        Error::UnknownModel(_) => EXIT_UNKNOWN_MODEL,
        Error::DimensionMismatch { .. } => EXIT_DIMENSION,
        Error::OracleMismatch { .. } => EXIT_VERIFICATION,
        Error::Io(_) | Error::Csv(_) => EXIT_IO,
        _ => EXIT_NUMERICAL,
    }
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn main_with_args(args: impl IntoIterator<Item = impl Into<OsString> + Clone>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Configuration file plus command-line overrides.
pub fn effective_config(cli: &Cli) -> Result<Config> {
    let mut config = match &cli.config {
        Some(path) => Config::from_path(path).map_err(|e| match e {
            Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
            other => other,
        })?,
        None => Config::default(),
    };
    if let Some(m) = &cli.model {
        config.model = ModelConfig::by_name(m)?;
    }
    if let Some(nev) = cli.nev {
        config.lanczos.nev = nev;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(tol) = cli.tol {
        config.lanczos.tol = tol;
    }
    config.validate()?;
    Ok(config)
}

#[derive(Debug, Serialize)]
struct RunMetadata<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'static str,
    model: &'a str,
    final_time: f64,
    dt: f64,
    n_steps: usize,
    input_dofs: usize,
    output_dofs: usize,
    provenance: &'a Provenance,
    newton: NewtonParams,
    lanczos: LanczosParams,
    files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<serde_json::Value>,
}

struct Context {
    config: Config,
    model: ModelSpec,
    prov: Provenance,
    out: PathBuf,
    files: Vec<String>,
}

impl Context {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.out.join(name)
    }

    fn finish(mut self, subcommand: &'static str, summary: Option<serde_json::Value>) -> Result<()> {
        let path = self.path("run.json");
        let meta = RunMetadata {
            tool: "autogst",
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            model: &self.model.name,
            final_time: self.model.final_time(),
            dt: self.model.dt,
            n_steps: self.model.n_steps,
            input_dofs: self.model.input_space.dof_count(),
            output_dofs: self.model.output_space.dof_count(),
            provenance: &self.prov,
            newton: self.config.newton,
            lanczos: self.config.lanczos_params(),
            files: self.files.clone(),
            summary,
        };
        io::write_json(&path, &meta)
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    let config = effective_config(cli)?;
    if cli.show_config {
        use std::io::Write;
        // A closed pipe (`| head`) is not an error worth reporting.
        let _ = writeln!(std::io::stdout().lock(), "{}", config.to_pretty_json());
        return Ok(EXIT_OK);
    }
    let Some(command) = &cli.command else {
        eprintln!("error: no subcommand given; try --help");
        return Ok(EXIT_USAGE);
    };
    let model = config.model_spec()?;
    std::fs::create_dir_all(&cli.out_dir)?;
    let prov = Provenance {
        config_hash: config.hash(),
        seed: config.seed,
    };
    let mut ctx = Context {
        config,
        model,
        prov,
        out: cli.out_dir.clone(),
        files: Vec::new(),
    };
    match command {
        Command::Forward => forward(ctx),
        Command::Gst => gst(ctx),
        Command::Verify => verify(ctx),
        Command::Growth {
            vector,
            steps,
            amplitude,
        } => {
            if let Some(a) = amplitude {
                if !(*a > 0.0) {
                    return Err(Error::Config("--amplitude must be positive".into()));
                }
                ctx.config.growth.amplitude = Some(*a);
            }
            if steps.is_some() {
                ctx.config.growth.n_steps = *steps;
            }
            growth(ctx, vector.as_deref())
        }
        Command::Bench { repeats } => bench(ctx, (*repeats).max(1)),
    }
}

fn forward(mut ctx: Context) -> Result<i32> {
    let result = ctx.model.run()?;
    let space = ctx.model.output_space.clone();
    let path = ctx.path("states.csv");
    io::write_states(&path, &ctx.prov, &space, ctx.model.dt, &result.trajectory)?;
    let path = ctx.path("output.csv");
    io::write_vector(&path, &ctx.prov, &space, &result.output)?;
    let norm = weighted_norm(&mass_matrix(&space), &result.output);
    println!(
        "{}: {} steps to t = {}, |u_T| = {norm:.6e}, {} solves",
        ctx.model.name,
        ctx.model.n_steps,
        ctx.model.final_time(),
        result.newton_iterations.len()
    );
    let summary = serde_json::json!({
        "output_norm": norm,
        "newton_iterations": result.newton_iterations,
        "tape_checksum": result.tape.checksum(),
    });
    ctx.finish("forward", Some(summary))?;
    Ok(EXIT_OK)
}

fn leading_triplets(ctx: &Context) -> Result<(Vec<SingularTriplet>, crate::eigensolver::GstOutcome)> {
    let result = ctx.model.run()?;
    let outcome = gst_from_tape(Arc::clone(&result.tape), None, None, &ctx.config.lanczos_params())?;
    Ok((outcome.triplets.clone(), outcome))
}

fn gst(mut ctx: Context) -> Result<i32> {
    let (triplets, outcome) = leading_triplets(&ctx)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    let path = ctx.path("triplets.csv");
    io::write_triplets(&path, &ctx.prov, &triplets)?;
    let (input, output) = (ctx.model.input_space.clone(), ctx.model.output_space.clone());
    for (i, t) in triplets.iter().enumerate() {
        let path = ctx.path(&format!("vector_{i}.csv"));
        io::write_vector(&path, &ctx.prov, &input, &t.v)?;
        let path = ctx.path(&format!("left_vector_{i}.csv"));
        io::write_vector(&path, &ctx.prov, &output, &t.u)?;
        println!("sigma_{i} = {:.10e}  (residual {:.2e})", t.sigma, t.residual);
    }
    if ctx.config.growth.after_gst {
        let curve = curve_for(&ctx, &triplets[0].v)?;
        let path = ctx.path("growth_curve.csv");
        io::write_growth_curve(&path, &ctx.prov, &curve)?;
    }
    let summary = serde_json::json!({
        "sigma": triplets.iter().map(|t| t.sigma).collect::<Vec<_>>(),
        "residuals": triplets.iter().map(|t| t.residual).collect::<Vec<_>>(),
        "restarts": outcome.report.restarts,
        "operator_applications": outcome.report.operator_applications,
        "warnings": outcome.warnings,
    });
    ctx.finish("gst", Some(summary))?;
    Ok(EXIT_OK)
}

fn curve_for(ctx: &Context, v: &[f64]) -> Result<Vec<(f64, f64)>> {
    let amplitude = ctx.config.growth.amplitude.unwrap_or_else(|| default_amplitude(&ctx.model));
    let steps = ctx.config.growth.n_steps.unwrap_or(ctx.model.n_steps);
    growth_curve(&ctx.model, v, amplitude, steps)
}

fn verify(mut ctx: Context) -> Result<i32> {
    let report: SuiteReport = run_suite(&ctx.model, &ctx.config.verify, ctx.config.seed)?;
    let path = ctx.path("taylor_report.csv");
    io::write_taylor_reports(&path, &ctx.prov, &report.taylor)?;
    for t in &report.taylor {
        println!("Taylor test ({:?})\n{}", t.mode, t.table());
    }
    println!(
        "dot product: max relative error {:.3e} over {} pairs",
        report.dot_product.max_relative_error, report.dot_product.pairs
    );
    println!("gradient modes: relative difference {:.3e}", report.gradient_agreement);
    if let Some(o) = &report.oracle {
        println!(
            "dense oracle: {} probes (max {:.3e}), {} vectors (max {:.3e})",
            o.probes, o.max_probe_error, o.vectors_checked, o.max_vector_error
        );
    }
    let path = ctx.path("verify.json");
    io::write_json(&path, &report)?;
    let passed = report.passed;
    for f in &report.failures {
        eprintln!("FAILED: {f}");
    }
    println!("{}: {}", report.model, if passed { "PASS" } else { "FAIL" });
    ctx.finish("verify", Some(serde_json::json!({ "passed": passed, "failures": report.failures })))?;
    Ok(if passed { EXIT_OK } else { EXIT_VERIFICATION })
}

fn growth(mut ctx: Context, vector: Option<&Path>) -> Result<i32> {
    let v = match vector {
        Some(p) => io::read_vector(p, &ctx.model.input_space)?,
        None => leading_triplets(&ctx)?.0.swap_remove(0).v,
    };
    let curve = curve_for(&ctx, &v)?;
    let path = ctx.path("growth_curve.csv");
    io::write_growth_curve(&path, &ctx.prov, &curve)?;
    let (t_max, g_max) = curve.iter().copied().fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    println!("largest growth {g_max:.6e} at t = {t_max}");
    ctx.finish("growth", Some(serde_json::json!({ "max_ratio": g_max, "t_of_max": t_max })))?;
    Ok(EXIT_OK)
}

fn bench(mut ctx: Context, repeats: usize) -> Result<i32> {
    let start = Instant::now();
    let result = ctx.model.run()?;
    let forward = start.elapsed().as_secs_f64();
    result.tape.linearise()?;
    let dm = random_direction(ctx.model.input_space.dof_count(), ctx.config.seed);
    let w = random_direction(ctx.model.output_space.dof_count(), ctx.config.seed.wrapping_add(1));
    let time = |f: &dyn Fn() -> Result<Vec<f64>>| -> Result<f64> {
        let start = Instant::now();
        for _ in 0..repeats {
            f()?;
        }
        Ok(start.elapsed().as_secs_f64() / repeats as f64)
    };
    let tlm = time(&|| result.tape.tlm_sweep(&dm))?;
    let adj = time(&|| result.tape.adjoint_sweep(&w))?;
    println!("{:<16} {:>12} {:>8}", "", "runtime (s)", "ratio");
    println!("{:<16} {:>12.4e}", "forward", forward);
    println!("{:<16} {:>12.4e} {:>8.3}", "TLM (averaged)", tlm, tlm / forward);
    println!("{:<16} {:>12.4e} {:>8.3}", "ADM (averaged)", adj, adj / forward);
    let rows = vec![
        vec!["forward".into(), format!("{forward:e}"), String::new()],
        vec!["tlm".into(), format!("{tlm:e}"), format!("{:e}", tlm / forward)],
        vec!["adjoint".into(), format!("{adj:e}"), format!("{:e}", adj / forward)],
    ];
    let path = ctx.path("bench.csv");
    io::write_table(&path, &ctx.prov, &["run", "seconds", "ratio"], &rows)?;
    ctx.finish("bench", None)?;
    Ok(EXIT_OK)
}
