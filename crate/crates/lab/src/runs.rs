//! Simulation, oracle and probe pipelines behind the CLI commands.

use std::path::{Path, PathBuf};
use std::time::Instant;

use geoflow_core::diffeo::{CenterChart, CutoffProfile, TimeSpaceTranslation, TruncatedTranslation};
use geoflow_core::grid::Point;
use geoflow_core::hypersurface::{FlowKind, ReferenceHypersurface};
use geoflow_core::probe::{
    formula_checks, make_report, residual_sample_times, smoothness_table, transformed_residual, Check, ProbeReport,
    ReportPart,
};
use geoflow_core::ricci::{
    conformal_metric, correspondence_flow, min_eigenvalue, pullback_metric_trajectory, restrict_to_half,
    ricci_residual, DeTurckSystem, ResidualRow,
};
use geoflow_core::spectral::Spectral;
use geoflow_core::timestepping::{integrate_partial, FlowSystem, Trajectory};
use geoflow_core::Error;
use serde_json::{json, Value};

use crate::config::{sha256_hex, Flow, Preset, RunConfig};
use crate::formats::{
    read_descriptor, read_snapshots, trajectory_from_records, write_csv, write_trajectory, TranslationDescriptor,
};
use crate::report::{checks_json, probe_report_json, to_pretty};
use crate::{exit, LabError};

pub const DIAGNOSTICS_HEADER: [&str; 6] = ["t", "area", "perimeter", "max_rho", "min_beta", "symbol_c"];
pub const RESIDUALS_HEADER: [&str; 4] = ["t", "residual_deturck", "residual_ricci", "min_eig"];

/// How a solver run ended.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Completed,
    Admissibility(String),
    SolverFailure(String),
}

impl Outcome {
    fn from_error(e: Option<Error>) -> Self {
        match e {
            None => Outcome::Completed,
            Some(e) if e.is_admissibility_exit() => Outcome::Admissibility(e.to_string()),
            Some(e) => Outcome::SolverFailure(e.to_string()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Completed => exit::OK,
            Outcome::Admissibility(_) => exit::ADMISSIBILITY,
            Outcome::SolverFailure(_) => exit::SOLVER_FAILURE,
        }
    }

    fn json(&self) -> Value {
        match self {
            Outcome::Completed => json!({"status": "completed"}),
            Outcome::Admissibility(m) => json!({"status": "admissibility_exit", "message": m}),
            Outcome::SolverFailure(m) => json!({"status": "solver_failure", "message": m}),
        }
    }
}

/// A finished (or aborted) run and the files it wrote.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub outcome: Outcome,
    pub trajectory: Trajectory,
    pub files: Vec<PathBuf>,
    pub exit_code: i32,
}

fn create_dir(dir: &Path) -> Result<(), LabError> {
    std::fs::create_dir_all(dir).map_err(|e| LabError::Io(format!("{}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), LabError> {
    std::fs::write(path, text).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))
}

fn reference_for(cfg: &RunConfig) -> Result<ReferenceHypersurface, LabError> {
    ReferenceHypersurface::with_radius(cfg.n, cfg.tube).map_err(|e| LabError::Usage(e.to_string()))
}

/// Runs the configured flow from its initial data.
pub fn run_flow(cfg: &RunConfig) -> Result<(Trajectory, Outcome), LabError> {
    let solver = cfg.solver.to_solver()?;
    let u0 = cfg.initial_state()?;
    let result = match cfg.flow.hypersurface_kind() {
        Some(kind) => {
            let reference = reference_for(cfg)?;
            reference.check_admissible(&u0).map_err(|e| LabError::Usage(e.to_string()))?;
            integrate_partial(&reference.system(kind), kind.name(), [0, 0], u0, 0.0, cfg.t_end, &solver)
        }
        None => {
            let sys = DeTurckSystem::flat(cfg.n)?;
            let min_eig = min_eigenvalue(sys.grid(), &u0)?;
            if !(min_eig >= geoflow_core::ricci::POSITIVITY_FLOOR) {
                return Err(LabError::Usage(format!("initial metric is not positive definite (min eigenvalue {min_eig:e})")));
            }
            integrate_partial(&sys, "ricci-deturck", [0, 2], u0, 0.0, cfg.t_end, &solver)
        }
    };
    match result {
        Ok((traj, err)) => Ok((traj, Outcome::from_error(err))),
        Err(e) => Err(LabError::Usage(e.to_string())),
    }
}

/// Hypersurface diagnostics on every stored state.
pub fn diagnostics_rows(cfg: &RunConfig, traj: &Trajectory) -> Result<Vec<Vec<f64>>, LabError> {
    let reference = reference_for(cfg)?;
    traj.times()
        .iter()
        .zip(traj.states())
        .map(|(t, s)| {
            let r = reference.diagnostics_row(*t, s)?;
            Ok(vec![r.t, r.area, r.perimeter, r.max_rho, r.min_beta, r.symbol_c])
        })
        .collect()
}

/// DeTurck and Ricci residual series of a Ricci-DeTurck run together with the
/// pulled-back Ricci flow `g-bar`.
pub fn correspondence_residuals(
    sys: &DeTurckSystem,
    g_hat: &Trajectory,
    substeps: usize,
    window: [f64; 2],
) -> Result<(Trajectory, Vec<ResidualRow>), LabError> {
    let w = sys.deturck_trajectory(g_hat)?;
    let cf = correspondence_flow(&w, g_hat.end(), substeps)?;
    let g_bar = pullback_metric_trajectory(&cf, g_hat)?;
    let delta = if g_hat.len() > 1 {
        g_hat.times()[1] - g_hat.times()[0]
    } else {
        0.0
    };
    let rows = if delta > 0.0 {
        ricci_residual(sys, g_hat, &g_bar, delta, window)?
    } else {
        Vec::new()
    };
    Ok((g_bar, rows))
}

/// `simulate`: trajectory, diagnostics or residual CSV, and a summary.
pub fn simulate(cfg: &RunConfig, out_dir: &Path) -> Result<RunResult, LabError> {
    let started = Instant::now();
    create_dir(out_dir)?;
    let hash = cfg.hash();
    let (traj, outcome) = run_flow(cfg)?;
    let tube = cfg.flow.hypersurface_kind().map(|_| cfg.tube);
    let mut files = Vec::new();
    let tp = out_dir.join("trajectory.jsonl");
    write_trajectory(&tp, &traj, tube, &hash)?;
    files.push(tp);
    let mut extra = json!({});
    if cfg.flow.hypersurface_kind().is_some() {
        let rows = diagnostics_rows(cfg, &traj)?;
        let p = out_dir.join("diagnostics.csv");
        write_csv(&p, &hash, &DIAGNOSTICS_HEADER, &rows)?;
        files.push(p);
    } else if cfg.residuals && outcome == Outcome::Completed && traj.len() >= 5 {
        let sys = DeTurckSystem::flat(cfg.n)?;
        let (g_bar, rows) = correspondence_residuals(&sys, &traj, cfg.particle_substeps, [0.0, cfg.t_end])?;
        let p = out_dir.join("ricci.jsonl");
        write_trajectory(&p, &g_bar, None, &hash)?;
        files.push(p);
        let p = out_dir.join("residuals.csv");
        let table: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| vec![r.t, r.residual_deturck, r.residual_ricci, r.min_eig])
            .collect();
        write_csv(&p, &hash, &RESIDUALS_HEADER, &table)?;
        files.push(p);
        extra = json!({
            "max_residual_ricci": rows.iter().map(|r| r.residual_ricci).fold(0.0, f64::max),
            "max_residual_deturck": rows.iter().map(|r| r.residual_deturck).fold(0.0, f64::max),
        });
    }
    let exit_code = outcome.exit_code();
    let summary = json!({
        "command": "simulate",
        "config": serde_json::to_value(cfg).expect("config serializes"),
        "config_hash": hash,
        "outcome": outcome.json(),
        "t_final": traj.end(),
        "snapshots": traj.len(),
        "exit_code": exit_code,
        "results": extra,
        "files": files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect::<Vec<_>>(),
        "metadata": {"wall_seconds": started.elapsed().as_secs_f64()},
    });
    let sp = out_dir.join("summary.json");
    write_text(&sp, &to_pretty(&summary))?;
    files.push(sp);
    Ok(RunResult {
        outcome,
        trajectory: traj,
        files,
        exit_code,
    })
}

/// Tolerances of the oracle comparisons.
pub const TOL_RADIUS_LAW: f64 = 1e-6;
pub const TOL_SDF_AREA: f64 = 1e-5;
pub const TOL_AMCF_AREA: f64 = 1e-6;
pub const TOL_PERIMETER_SLACK: f64 = 1e-8;
pub const TOL_CONFORMAL_DEVIATION: f64 = 1e-5;
pub const TOL_CONFORMAL_W: f64 = 1e-8;

/// Result of an oracle comparison.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub checks: Vec<Check>,
    pub rows: Vec<Vec<f64>>,
    pub header: Vec<&'static str>,
    pub outcome: Outcome,
}

impl OracleResult {
    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Completed && self.checks.iter().all(Check::pass)
    }
}

/// Runs the flow next to its independent oracle.
pub fn oracle_compare(cfg: &RunConfig) -> Result<OracleResult, LabError> {
    let preset = Preset::parse(&cfg.initial)?;
    match (cfg.flow, &preset) {
        (Flow::Mcf, Preset::Flat | Preset::Const(_)) => {
            let c = if let Preset::Const(c) = preset { c } else { 0.0 };
            let (traj, outcome) = run_flow(cfg)?;
            let r0 = 1.0 + c;
            let mut worst = 0.0f64;
            let rows: Vec<Vec<f64>> = traj
                .times()
                .iter()
                .zip(traj.states())
                .map(|(&t, s)| {
                    let exact = (r0 * r0 - 2.0 * t).sqrt() - 1.0;
                    let e = s.iter().map(|v| (v - exact).abs()).fold(0.0, f64::max);
                    worst = worst.max(e);
                    vec![t, exact, e]
                })
                .collect();
            Ok(OracleResult {
                checks: vec![Check::at_most("radius_law_sup_error", worst, TOL_RADIUS_LAW)],
                rows,
                header: vec!["t", "rho_exact", "sup_error"],
                outcome,
            })
        }
        (Flow::Sdf | Flow::Amcf, _) => {
            let (traj, outcome) = run_flow(cfg)?;
            let diag = diagnostics_rows(cfg, &traj)?;
            let a0 = diag[0][1];
            let drift = diag.iter().map(|r| ((r[1] - a0) / a0).abs()).fold(0.0, f64::max);
            let rise = diag.windows(2).map(|w| w[1][2] - w[0][2]).fold(f64::NEG_INFINITY, f64::max);
            let tol = if cfg.flow == Flow::Sdf { TOL_SDF_AREA } else { TOL_AMCF_AREA };
            let mut checks = vec![Check::at_most("relative_area_drift", drift, tol)];
            if cfg.flow == Flow::Sdf {
                checks.push(Check::at_most("perimeter_increase", rise.max(0.0), TOL_PERIMETER_SLACK));
            }
            let rows = diag.iter().map(|r| vec![r[0], (r[1] - a0) / a0, r[2]]).collect();
            Ok(OracleResult {
                checks,
                rows,
                header: vec!["t", "relative_area_drift", "perimeter"],
                outcome,
            })
        }
        (Flow::RicciDeTurck, Preset::Flat | Preset::Conformal(_)) => {
            let a = if let Preset::Conformal(a) = preset { a } else { 0.0 };
            let (traj, outcome) = run_flow(cfg)?;
            let sys = DeTurckSystem::flat(cfg.n)?;
            let grid = sys.grid();
            let u0 = grid.sample(|p| a * p[0].sin() * p[1].sin());
            let solver = cfg.solver.to_solver()?;
            let oracle = geoflow_core::ricci::conformal_oracle(&u0, cfg.n, traj.end(), &solver)?;
            let fine = oracle.meta.grid;
            let mut worst_dev = 0.0f64;
            let mut worst_w = 0.0f64;
            let mut rows = Vec::new();
            for (&t, s) in traj.times().iter().zip(traj.states()) {
                let u = restrict_to_half(fine, &oracle.dense_eval(t)?);
                let g = conformal_metric(&u);
                let dev = s.iter().zip(&g).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                let w = sys.deturck_field(&sys.metric(s)?);
                let wsup = w.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
                worst_dev = worst_dev.max(dev);
                worst_w = worst_w.max(wsup);
                rows.push(vec![t, dev, wsup]);
            }
            Ok(OracleResult {
                checks: vec![
                    Check::at_most("conformal_metric_deviation", worst_dev, TOL_CONFORMAL_DEVIATION),
                    Check::at_most("deturck_field_sup", worst_w, TOL_CONFORMAL_W),
                ],
                rows,
                header: vec!["t", "metric_deviation", "deturck_field_sup"],
                outcome,
            })
        }
        (flow, p) => Err(LabError::Usage(format!(
            "no oracle for flow {flow} with initial data {p:?} (mcf: flat or const; sdf, amcf: any; ricci-deturck: flat or conformal)"
        ))),
    }
}

/// `oracle`: comparison CSV and summary; exit 1 when a comparison fails.
pub fn oracle(cfg: &RunConfig, out_dir: &Path) -> Result<(OracleResult, i32), LabError> {
    let started = Instant::now();
    create_dir(out_dir)?;
    let hash = cfg.hash();
    let res = oracle_compare(cfg)?;
    write_csv(&out_dir.join("oracle.csv"), &hash, &res.header, &res.rows)?;
    let code = match &res.outcome {
        Outcome::Completed if res.passed() => exit::OK,
        Outcome::Completed => exit::CHECK_FAILED,
        o => o.exit_code(),
    };
    let summary = json!({
        "command": "oracle",
        "config": serde_json::to_value(cfg).expect("config serializes"),
        "config_hash": hash,
        "outcome": res.outcome.json(),
        "checks": checks_json(&res.checks),
        "passed": res.passed(),
        "exit_code": code,
        "metadata": {"wall_seconds": started.elapsed().as_secs_f64()},
    });
    write_text(&out_dir.join("summary.json"), &to_pretty(&summary))?;
    Ok((res, code))
}

/// A trajectory file loaded together with the system that produced it.
pub enum LoadedFlow {
    Graph {
        reference: ReferenceHypersurface,
        kind: FlowKind,
    },
    Metric(DeTurckSystem),
}

pub struct LoadedTrajectory {
    pub trajectory: Trajectory,
    pub flow: LoadedFlow,
    pub sha256: String,
    pub config_hash: String,
}

pub fn load_trajectory(path: &Path) -> Result<LoadedTrajectory, LabError> {
    let bytes = std::fs::read(path).map_err(|e| LabError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let records = read_snapshots(path)?;
    let trajectory = trajectory_from_records(&records)?;
    let first = &records[0];
    let n = first.n;
    let flow = match FlowKind::from_name(&first.flow) {
        Some(kind) => {
            let tube = first.tube.unwrap_or(geoflow_core::hypersurface::TUBULAR_RADIUS);
            LoadedFlow::Graph {
                reference: ReferenceHypersurface::with_radius(n, tube).map_err(|e| LabError::Usage(e.to_string()))?,
                kind,
            }
        }
        None if first.flow == "ricci-deturck" => {
            LoadedFlow::Metric(DeTurckSystem::flat(n).map_err(|e| LabError::Usage(e.to_string()))?)
        }
        None => {
            return Err(LabError::Usage(format!(
                "trajectory flow '{}' cannot be probed (expected sdf, mcf, amcf or ricci-deturck)",
                first.flow
            )))
        }
    };
    Ok(LoadedTrajectory {
        trajectory,
        flow,
        sha256: sha256_hex(&bytes),
        config_hash: first.config_hash.clone(),
    })
}

/// Validated translation data for one trajectory.
#[derive(Debug, Clone, Copy)]
pub struct ProbeSetup {
    pub st: TimeSpaceTranslation,
    pub t0: f64,
    pub delta: f64,
}

/// Applies the descriptor defaults and admissibility checks.
pub fn probe_setup(desc: &TranslationDescriptor, traj: &Trajectory) -> Result<ProbeSetup, LabError> {
    let grid = traj.meta.grid;
    let dim = grid.dim();
    let bad = |m: String| Err(LabError::Usage(m));
    if desc.center_chart != 0 {
        return bad("only the global chart (id 0) is available".into());
    }
    if desc.center_point.len() != dim || desc.mu.len() != dim {
        return bad(format!("center_point and mu must have {dim} entries"));
    }
    if traj.len() < 6 {
        return bad("probing needs at least six stored snapshots".into());
    }
    let mut center: Point = [0.0; 2];
    center[..dim].copy_from_slice(&desc.center_point);
    if grid.node_at(center).is_none() {
        return bad(format!("center_point {:?} is not a grid node", desc.center_point));
    }
    let times = traj.times();
    let t0 = match desc.t0 {
        Some(t) => t,
        None => {
            let k = times.len() / 2;
            0.5 * (times[k - 1] + times[k])
        }
    };
    if !(t0 > traj.start() && t0 < traj.end()) {
        return bad(format!("t0 = {t0} is outside the run ({}, {})", traj.start(), traj.end()));
    }
    let tau = desc
        .time_radius
        .unwrap_or(0.2 * (t0 - traj.start()).min(traj.end() - t0));
    let cut = CutoffProfile::new(desc.epsilon0, t0, tau).map_err(|e| LabError::Usage(e.to_string()))?;
    let r = desc.r.unwrap_or(cut.default_radius());
    let mut mu: Point = [0.0; 2];
    mu[..dim].copy_from_slice(&desc.mu);
    let space = TruncatedTranslation::new(CenterChart::new(dim, center), cut, mu, r)
        .map_err(|e| LabError::Usage(format!("spatial translation: {e}")))?;
    let st = TimeSpaceTranslation::new(space, desc.lambda, [traj.start(), traj.end()], cut.default_time_radius())
        .map_err(|e| LabError::Usage(format!("time warp: {e}")))?;
    let spacing = times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let delta = (0.5 * spacing).min(5e-4 * tau);
    Ok(ProbeSetup { st, t0, delta })
}

/// Number of residual sample times per `(lambda, mu)`.
pub const RESIDUAL_SAMPLES: usize = 9;

/// All probe parts for a loaded trajectory.
pub fn run_probe(loaded: &LoadedTrajectory, setup: &ProbeSetup) -> Result<ProbeReport, LabError> {
    let traj = &loaded.trajectory;
    let st = setup.st;
    let spectral = Spectral::new(traj.meta.grid);
    let sys: Box<dyn FlowSystem + '_> = match &loaded.flow {
        LoadedFlow::Graph { reference, kind } => Box::new(reference.system(*kind)),
        LoadedFlow::Metric(sys) => Box::new(sys.clone()),
    };
    let variants = [
        (0.0, [0.0, 0.0]),
        (st.lambda, [0.0, 0.0]),
        (st.lambda, st.space.mu),
    ];
    let times = residual_sample_times(&st, traj, RESIDUAL_SAMPLES, setup.delta);
    if times.is_empty() {
        return Err(LabError::Usage("the run is too short for the temporal cutoff".into()));
    }
    let mut parts = Vec::new();
    for (lambda, mu) in variants {
        let v = TimeSpaceTranslation {
            space: st.space.with_mu(mu),
            lambda,
            ..st
        };
        parts.push(ReportPart::Residual(transformed_residual(
            sys.as_ref(),
            &spectral,
            traj,
            &v,
            &times,
            setup.delta,
        )?));
    }
    let state = traj.dense_eval(setup.t0)?;
    let r = st.space.r;
    let dir = if st.space.mu_norm() > 0.0 {
        st.space.mu
    } else {
        [0.25 * r, 0.0]
    };
    let sweep: Vec<Point> = [-1.0, -0.5, 0.0, 0.5, 1.0].iter().map(|f| [f * dir[0], f * dir[1]]).collect();
    parts.push(ReportPart::Formula(formula_checks(&spectral, &state, &st.space, &sweep, None)?));
    let origin = TimeSpaceTranslation {
        space: st.space.with_mu([0.0, 0.0]),
        lambda: 0.0,
        ..st
    };
    parts.push(ReportPart::Smoothness(smoothness_table(&spectral, traj, &origin, setup.t0, 3)?));
    Ok(make_report(&traj.meta.flow, parts))
}

/// `probe`: writes the report, exit 0 when every verdict passes and 1 otherwise.
pub fn probe(trajectory: &Path, translation: &Path, out: &Path) -> Result<(ProbeReport, i32), LabError> {
    let loaded = load_trajectory(trajectory)?;
    let desc = read_descriptor(translation)?;
    let setup = probe_setup(&desc, &loaded.trajectory)?;
    let report = run_probe(&loaded, &setup)?;
    let provenance = json!({
        "trajectory_sha256": loaded.sha256,
        "config_hash": loaded.config_hash,
        "translation": serde_json::to_value(&desc).expect("descriptor serializes"),
        "resolved": {
            "t0": setup.t0,
            "time_radius": setup.st.space.cutoffs.time_radius,
            "r": setup.st.space.r,
            "r_time": setup.st.r_time,
            "delta": setup.delta,
        },
    });
    let doc = probe_report_json(&report, provenance);
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_text(out, &to_pretty(&doc))?;
    let code = if report.passed() { exit::OK } else { exit::CHECK_FAILED };
    Ok((report, code))
}
