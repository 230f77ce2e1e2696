//! Command-line interface.
//!
//! Configuration precedence: built-in defaults, then the `--config` file, then
//! command flags. Exit codes are listed in [`crate::exit`].

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{Overrides, RunConfig};
use crate::{exit, runs, suites, LabError};

#[derive(Debug, Parser)]
#[command(name = "geoflow", version, about = "Geometric flows on the circle and the torus: runs, oracles, smoothness probes")]
pub struct Cli {
    /// JSON run configuration (flags override its keys).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for run artifacts.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Seed of the randomized property checks.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for independent verification suites.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a flow and write its trajectory and diagnostics.
    Simulate(RunFlags),
    /// Compare a run with its closed-form or independent oracle.
    Oracle(RunFlags),
    /// Probe a stored trajectory under a time-space translation.
    Probe {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        translation: PathBuf,
        /// Report path (default: <out-dir>/report.json).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run property suites: atlas, diffeo, ricci, hypersurface or all.
    Verify {
        #[arg(default_value = "all")]
        suite: String,
    },
}

#[derive(Debug, Args)]
pub struct RunFlags {
    /// sdf, mcf, amcf or ricci-deturck.
    #[arg(long)]
    pub flow: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    /// flat, conformal:a, cos2:a, const:c, shear:a or a snapshot file.
    #[arg(long)]
    pub initial: Option<String>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// imex or rk4.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Step size; also fixes the step (dt_min = dt_max = dt).
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub save_every: Option<usize>,
}

impl RunFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            flow: self.flow.clone(),
            n: self.n,
            initial: self.initial.clone(),
            t_end: self.t_end,
            scheme: self.scheme.clone(),
            dt: self.dt,
            save_every: self.save_every,
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "geoflow: {e}");
            e.exit_code()
        }
    }
}

fn load(cli: &Cli, flags: &RunFlags) -> Result<RunConfig, LabError> {
    let ov = flags.overrides();
    let mut cfg = RunConfig::load(cli.config.as_deref(), &ov)?;
    if let Some(dt) = flags.dt {
        cfg.solver.dt_min = dt;
        cfg.solver.dt_max = dt;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<i32, LabError> {
    let io = |e: std::io::Error| LabError::Io(e.to_string());
    match &cli.command {
        Command::Simulate(flags) => {
            let cfg = load(cli, flags)?;
            let r = runs::simulate(&cfg, &cli.out_dir)?;
            writeln!(
                out,
                "{} run: {} snapshots to t = {}, {}",
                cfg.flow,
                r.trajectory.len(),
                r.trajectory.end(),
                match &r.outcome {
                    runs::Outcome::Completed => "completed".to_string(),
                    runs::Outcome::Admissibility(m) => format!("admissibility exit: {m}"),
                    runs::Outcome::SolverFailure(m) => format!("solver failure: {m}"),
                }
            )
            .map_err(io)?;
            for f in &r.files {
                writeln!(out, "  wrote {}", f.display()).map_err(io)?;
            }
            Ok(r.exit_code)
        }
        Command::Oracle(flags) => {
            let cfg = load(cli, flags)?;
            let (res, code) = runs::oracle(&cfg, &cli.out_dir)?;
            for c in &res.checks {
                writeln!(
                    out,
                    "{:<28} {:>12.4e} {} {:.3e}  {}",
                    c.name,
                    c.value,
                    c.comparison.name(),
                    c.tolerance,
                    if c.pass() { "PASS" } else { "FAIL" }
                )
                .map_err(io)?;
            }
            Ok(code)
        }
        Command::Probe {
            trajectory,
            translation,
            out: report,
        } => {
            let path = report.clone().unwrap_or_else(|| cli.out_dir.join("report.json"));
            let (rep, code) = runs::probe(trajectory, translation, &path)?;
            let checks = rep.checks();
            let failed = checks.iter().filter(|c| !c.pass()).count();
            writeln!(
                out,
                "probe {}: {} of {} checks passed; report at {}",
                rep.kind,
                checks.len() - failed,
                checks.len(),
                path.display()
            )
            .map_err(io)?;
            for c in checks.iter().filter(|c| !c.pass()) {
                writeln!(out, "  FAIL {} = {:e} ({} {:e})", c.name, c.value, c.comparison.name(), c.tolerance)
                    .map_err(io)?;
            }
            Ok(code)
        }
        Command::Verify { suite } => {
            let names = suites::resolve(suite)?;
            let results = suites::run_suites(&names, cli.seed, cli.threads);
            out.write_all(suites::render(&results).as_bytes()).map_err(io)?;
            Ok(if results.iter().all(suites::SuiteResult::passed) {
                exit::OK
            } else {
                exit::CHECK_FAILED
            })
        }
    }
}
