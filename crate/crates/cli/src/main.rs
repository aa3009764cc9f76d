use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hodge_dn::witten::{Grading, VectorFieldSpec};
use hodge_dn::{exec, Error, Tolerances};
use hodge_dn_cli::config::{apply_tolerances, parse_checks, split_tolerance_args};
use hodge_dn_cli::pipeline::is_config_error;
use hodge_dn_cli::{execute, golden, RunConfig, Source};

const EXIT_CHECK: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "hodge-dn", version, about = "Harmonic fields, DN maps and cohomology recovery on simplicial meshes")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a mesh, run checks and print a JSON report.
    #[command(after_help = "Tolerances: --tol.<name> <value> with name in \
        green, rank, gap, harm, bvp, decomp, dn, theta, theta_min, seq, cup, cup_ratio.\n\
        HODGE_DN_THREADS caps the worker pool.")]
    Run(RunArgs),
    /// Compare (or with --update, rewrite) the golden report files.
    Golden(GoldenArgs),
}

#[derive(Args)]
struct RunArgs {
    /// interval, disk, annulus, square, solid_torus or ball
    #[arg(long, required_unless_present = "mesh", conflicts_with = "mesh")]
    shape: Option<String>,
    #[arg(long, default_value_t = 8)]
    res: usize,
    /// OFF file instead of a generator
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// `zero` or `rotation(s=<real>, L=<real>)`
    #[arg(long, default_value = "zero")]
    field: String,
    /// `degree` or `parity` (default: degree for zero, parity for rotation)
    #[arg(long)]
    grading: Option<String>,
    /// Comma separated subset of identities,harmonic,dn,recovery,sequence,cup,equivariant
    #[arg(long, default_value = "")]
    checks: String,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write mesh (OFF), operators and DN blocks (MatrixMarket) into this directory
    #[arg(long)]
    export: Option<PathBuf>,
    /// Disable data parallelism
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct GoldenArgs {
    #[arg(long)]
    update: bool,
    #[arg(long)]
    dir: Option<PathBuf>,
    /// Only cases whose name contains this string
    #[arg(long)]
    only: Option<String>,
}

fn config_from(args: RunArgs, tols: &[(String, f64)]) -> Result<RunConfig, Error> {
    let field: VectorFieldSpec = args.field.parse()?;
    let source = match (args.shape, args.mesh) {
        (Some(s), None) => Source::Generated { shape: s.parse()?, res: args.res },
        (None, Some(path)) => Source::Off { path },
        _ => return Err(Error::Config("give exactly one of --shape or --mesh".into())),
    };
    let grading = match args.grading.as_deref() {
        None => None,
        Some("degree") => Some(Grading::Degree),
        Some("parity") => Some(Grading::Parity),
        Some(g) => return Err(Error::Config(format!("unknown grading `{g}`"))),
    };
    let mut tolerances = Tolerances::default();
    apply_tolerances(&mut tolerances, tols)?;
    Ok(RunConfig { source, field, grading, checks: parse_checks(&args.checks)?, seed: args.seed, tolerances, export: args.export })
}

fn init_threads() -> Result<(), Error> {
    match std::env::var("HODGE_DN_THREADS") {
        Ok(v) => {
            let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
                Error::Config(format!("HODGE_DN_THREADS must be a positive integer, got `{v}`"))
            })?;
            exec::init_threads(n);
            Ok(())
        }
        Err(_) => Ok(()),
    }
}

fn run(mut args: RunArgs, tols: &[(String, f64)]) -> Result<u8, Error> {
    let out = args.out.take();
    if args.sequential {
        exec::set_sequential(true);
    }
    let cfg = config_from(args, tols)?;
    let export = cfg.export.clone();
    let (report, session) = execute(cfg)?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    match &out {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => println!("{text}"),
    }
    if let Some(dir) = export {
        session.export(&dir)?;
    }
    let failures = report.failures();
    if failures.is_empty() {
        return Ok(0);
    }
    eprintln!("failed checks: {}", failures.join(", "));
    for name in &failures {
        for p in &report.checks[name].problems {
            eprintln!("  {name}: {p}");
        }
    }
    Ok(EXIT_CHECK)
}

fn main() -> ExitCode {
    let (args, tols) = match split_tolerance_args(std::env::args().collect()) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let cli = Cli::parse_from(args);
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    match cli.cmd {
        Cmd::Run(a) => {
            match run(a, &tols) {
                Ok(code) => ExitCode::from(code),
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(if is_config_error(&e) { EXIT_CONFIG } else { EXIT_CHECK })
                }
            }
        }
        Cmd::Golden(g) => {
            if !tols.is_empty() {
                eprintln!("error: golden runs use the default tolerances");
                return ExitCode::from(EXIT_CONFIG);
            }
            let dir = g.dir.unwrap_or_else(golden::default_dir);
            match golden::run(&dir, g.update, g.only.as_deref()) {
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_CONFIG)
                }
                Ok(results) => {
                    let mut bad = 0;
                    for r in &results {
                        if r.drift.is_empty() {
                            println!("{}: {}", r.name, if g.update { "updated" } else { "ok" });
                        } else {
                            bad += 1;
                            println!("{}: DRIFT", r.name);
                            for d in &r.drift {
                                println!("    {d}");
                            }
                        }
                    }
                    ExitCode::from(if bad == 0 { 0 } else { EXIT_CHECK })
                }
            }
        }
    }
}
