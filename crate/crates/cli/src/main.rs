//! `annihilate`: run particle simulations, the grid solver, convergence
//! studies and the invariant suite from a TOML config.

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use annihilate_core::exec::{configure_threads, Execution};
use annihilate_core::harness::run_convergence;
use annihilate_core::hjsolver::{barrier_check, refinement_study, solve_hj, GridFunction, SchemeConfig};
use annihilate_core::io::{self, OutputHeader};
use annihilate_core::levelset::StepFunction;
use annihilate_core::measures::{
    aec_modulus_with, cdf_sup_distance, dipole, narrow_distance_proxy, SignedAtomicMeasure, TestDictionary,
};
use annihilate_core::moments::moments_to_elementary;
use annihilate_core::{evolve, moments};
use clap::{Parser, Subcommand};
use log::info;
use serde::Serialize;

use config::{Config, LoadedConfig, MeasureFamily};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Simulation(String),
    #[error("{0}")]
    Output(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Simulation(_) => "simulation",
            CliError::Output(_) => "output",
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Simulation(_) | CliError::Output(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<io::FormatError> for CliError {
    fn from(e: io::FormatError) -> Self {
        CliError::Output(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "annihilate", version, about = "Annihilating charged particles and their continuum limit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML config file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Seed for randomized runs; overrides `seed` in the config.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads for parallel sections; 1 runs sequentially.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Evolve the [initial] particles; writes trajectory.csv and events.jsonl.
    Simulate,
    /// Solve the grid scheme for [hj].datum; writes hj_*.csv and hj.json.
    Hj,
    /// Run the [experiment] ladder; writes convergence.csv and plot data.
    Converge,
    /// Run the invariant suite; exits 1 if any invariant fails.
    Verify,
    /// Measure diagnostics for the [measure] family; writes measure.json.
    Measure,
    /// Moments and elementary symmetric values of the [initial] positions.
    Moments,
}

struct Context {
    config: Config,
    header: OutputHeader,
    out: PathBuf,
    seed: u64,
    exec: Execution,
}

impl Context {
    fn create(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.out.join(name);
        let f = File::create(&path).map_err(|e| CliError::Output(format!("cannot create {}: {e}", path.display())))?;
        Ok(BufWriter::new(f))
    }

    fn json<T: Serialize>(&self, name: &str, body: &T) -> Result<(), CliError> {
        let mut w = self.create(name)?;
        io::write_json(&mut w, &self.header, body)?;
        w.flush()?;
        Ok(())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ANNIHILATE_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let report = serde_json::json!({ "error": e.kind(), "message": e.to_string(), "exit_code": e.code() });
            eprintln!("{report}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: &Cli) -> Result<u8, CliError> {
    let path = cli.config.as_deref().ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let LoadedConfig { config, hash } = config::load(path)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        configure_threads(n).map_err(|e| CliError::Config(e.to_string()))?;
    }
    let exec = if cli.threads == Some(1) { Execution::Sequential } else { Execution::default() };
    // checked before anything touches the output directory
    match cli.command {
        Command::Simulate | Command::Moments => {
            config.initial_state()?;
        }
        _ => {}
    }
    std::fs::create_dir_all(&cli.out).map_err(|e| CliError::Output(format!("cannot create {}: {e}", cli.out.display())))?;
    let ctx = Context {
        seed: cli.seed.or(config.seed).unwrap_or(0),
        config,
        header: OutputHeader::new(hash),
        out: cli.out.clone(),
        exec,
    };
    info!("config hash {}", ctx.header.config_hash);
    match cli.command {
        Command::Simulate => simulate(&ctx),
        Command::Hj => hj(&ctx),
        Command::Converge => converge(&ctx),
        Command::Verify => verify(&ctx),
        Command::Measure => measure(&ctx),
        Command::Moments => moments_cmd(&ctx),
    }
}

fn simulate(ctx: &Context) -> Result<u8, CliError> {
    let (state, base) = ctx.config.initial_state()?;
    info!("evolving {} particles to t = {}", state.n(), ctx.config.integrator.t_end);
    let (traj, failure) = match evolve(&state, &ctx.config.integrator) {
        Ok(t) => (t, None),
        Err(e) => (e.partial.clone(), Some(e.error.to_string())),
    };
    let mut csv = ctx.create("trajectory.csv")?;
    let mut events = ctx.create("events.jsonl")?;
    io::write_trajectory(&mut csv, &mut events, &ctx.header, &traj)?;
    csv.flush()?;
    events.flush()?;
    if let Some(last) = traj.samples.last() {
        let mut w = ctx.create("final_step.csv")?;
        io::write_step_function_csv(&mut w, &ctx.header, &StepFunction::from_particles_with_base(last, base))?;
        w.flush()?;
    }
    if let Some(message) = failure {
        return Err(CliError::Simulation(message));
    }
    println!("{}", serde_json::json!({ "samples": traj.samples.len(), "events": traj.events.len(), "t_end": traj.last().time() }));
    Ok(0)
}

#[derive(Serialize)]
struct HjSummary {
    datum: annihilate_core::harness::InitialDatum,
    steps: usize,
    snapshots: Vec<f64>,
    sup_norm: Vec<f64>,
    lipschitz: Vec<f64>,
    barrier: annihilate_core::hjsolver::BarrierReport,
    refinement: Vec<annihilate_core::hjsolver::RefinementRow>,
}

/// Largest one-sided second difference, an estimate of the semiconcavity
/// constant of the sampled datum.
fn semiconcavity(u: &GridFunction) -> f64 {
    let v = u.values();
    let h = u.h();
    v.windows(3).map(|w| (w[0] + w[2] - 2.0 * w[1]) / (h * h)).fold(0.0, f64::max)
}

fn hj(ctx: &Context) -> Result<u8, CliError> {
    let datum = ctx.config.hj.datum;
    let scheme = SchemeConfig { execution: ctx.exec, ..ctx.config.scheme.clone() };
    let sol = solve_hj(|x| datum.eval(x, 1.0), &scheme).map_err(|e| CliError::Simulation(e.to_string()))?;
    for (k, snap) in sol.snapshots.iter().enumerate() {
        let mut w = ctx.create(&format!("hj_{k:03}.csv"))?;
        io::write_grid_csv(&mut w, &ctx.header, snap)?;
        w.flush()?;
    }
    let u0 = &sol.snapshots[0];
    let barrier = barrier_check(|x| u0.interpolate(x), u0.lipschitz(), semiconcavity(u0), u0.sup_norm(), &sol.snapshots);
    let refinement = if ctx.config.hj.refinement_levels > 0 {
        refinement_study(|x| datum.eval(x, 1.0), &scheme, ctx.config.hj.refinement_levels)
            .map_err(|e| CliError::Simulation(e.to_string()))?
    } else {
        Vec::new()
    };
    let summary = HjSummary {
        datum,
        steps: sol.steps,
        snapshots: sol.snapshots.iter().map(|s| s.time()).collect(),
        sup_norm: sol.snapshots.iter().map(|s| s.sup_norm()).collect(),
        lipschitz: sol.snapshots.iter().map(|s| s.lipschitz()).collect(),
        barrier,
        refinement,
    };
    ctx.json("hj.json", &summary)?;
    Ok(0)
}

fn converge(ctx: &Context) -> Result<u8, CliError> {
    let out = run_convergence(&ctx.config.experiment, ctx.exec).map_err(|e| CliError::Simulation(e.to_string()))?;
    let mut w = ctx.create("convergence.csv")?;
    io::write_convergence_csv(&mut w, &ctx.header, &out.table)?;
    w.flush()?;
    ctx.json("convergence.json", &out.table)?;
    for (n, u) in &out.final_profiles {
        let mut w = ctx.create(&format!("profile_n{n}.csv"))?;
        io::write_step_function_csv(&mut w, &ctx.header, u)?;
        w.flush()?;
    }
    if let Some(g) = &out.reference_final {
        let mut w = ctx.create("reference.csv")?;
        io::write_grid_csv(&mut w, &ctx.header, g)?;
        w.flush()?;
    }
    if let Some(row) = out.table.rows.iter().find(|r| r.error.is_some()) {
        return Err(CliError::Simulation(format!("n = {}: {}", row.n, row.error.as_deref().unwrap_or_default())));
    }
    println!("{}", serde_json::json!({ "monotone": out.table.monotone, "reduction": out.table.reduction }));
    Ok(0)
}

fn verify(ctx: &Context) -> Result<u8, CliError> {
    let report = annihilate_core::harness::run_property_suite(ctx.seed, &ctx.config.suite, ctx.exec);
    let mut w = ctx.create("properties.json")?;
    io::write_properties_json(&mut w, &ctx.header, &report)?;
    w.flush()?;
    for (name, c) in &report.checks {
        println!("{:<22} {}  worst {:.3e}  threshold {:.3e}", name, if c.pass { "PASS" } else { "FAIL" }, c.worst_value, c.threshold);
    }
    Ok(if report.pass { 0 } else { 1 })
}

#[derive(Serialize)]
struct MeasureRow {
    n: usize,
    total_variation: f64,
    cdf_distance: f64,
    narrow_proxy: f64,
    aec_excess: f64,
}

#[derive(Serialize)]
struct MeasureSummary {
    family: MeasureFamily,
    rows: Vec<MeasureRow>,
    aec_pass: bool,
    threshold: f64,
}

fn measure(ctx: &Context) -> Result<u8, CliError> {
    let m = &ctx.config.measure;
    let mus: Vec<SignedAtomicMeasure> = m
        .sizes
        .iter()
        .map(|&n| match m.family {
            MeasureFamily::Dipole => Ok(dipole(n)),
            MeasureFamily::Sampled => {
                let eps = 1.0 / n as f64;
                annihilate_core::harness::sample_particles(&|x| m.datum.eval(x, eps), n, 0.5, m.datum.window())
                    .map(|s| SignedAtomicMeasure::from_state(&s.state))
                    .map_err(|e| CliError::Simulation(e.to_string()))
            }
        })
        .collect::<Result<_, _>>()?;
    // compared with the zero measure for the dipole, with the finest member otherwise
    let limit = match m.family {
        MeasureFamily::Dipole => SignedAtomicMeasure::zero(1.0),
        MeasureFamily::Sampled => mus.last().expect("sizes is nonempty").clone(),
    };
    let refs: Vec<&SignedAtomicMeasure> = mus.iter().chain(std::iter::once(&limit)).collect();
    let dict = TestDictionary::for_measures(&refs, m.levels);
    let slope = m.omega_lipschitz;
    let aec = aec_modulus_with(ctx.exec, &mus, move |r| slope * r, m.threshold);
    let rows = mus
        .iter()
        .zip(&m.sizes)
        .zip(&aec.s)
        .map(|((mu, &n), &s)| MeasureRow {
            n,
            total_variation: mu.total_variation(),
            cdf_distance: cdf_sup_distance(mu, &limit),
            narrow_proxy: narrow_distance_proxy(mu, &limit, &dict),
            aec_excess: s,
        })
        .collect();
    for (mu, n) in mus.iter().zip(&m.sizes) {
        let mut w = ctx.create(&format!("measure_n{n}.csv"))?;
        io::write_measure_csv(&mut w, &ctx.header, mu)?;
        w.flush()?;
    }
    ctx.json("measure.json", &MeasureSummary { family: m.family, rows, aec_pass: aec.pass, threshold: m.threshold })?;
    Ok(0)
}

fn moments_cmd(ctx: &Context) -> Result<u8, CliError> {
    let (state, _) = ctx.config.initial_state()?;
    let mv = moments(state.positions());
    let e = moments_to_elementary(&mv);
    let mut w = ctx.create("moments.csv")?;
    write_moments(&mut w, &ctx.header, mv.values(), &e)?;
    w.flush()?;
    Ok(0)
}

fn write_moments(w: &mut dyn Write, header: &OutputHeader, m: &[f64], e: &[f64]) -> std::io::Result<()> {
    writeln!(w, "# {} {}", header.tool, header.version)?;
    writeln!(w, "# config_sha256 {}", header.config_hash)?;
    writeln!(w, "k,M_k,e_k")?;
    writeln!(w, "0,,{}", io::fmt_f64(e[0]))?;
    for (k, ek) in e.iter().enumerate().skip(1) {
        let mk = m.get(k - 1).map_or(String::new(), |&v| io::fmt_f64(v));
        writeln!(w, "{k},{mk},{}", io::fmt_f64(*ek))?;
    }
    Ok(())
}
