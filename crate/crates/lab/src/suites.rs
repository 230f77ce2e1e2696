//! Property suites run by `geoflow verify`.
//!
//! Every suite is a list of named checks with tolerances. Suites are
//! independent, so `--threads` runs them concurrently; the printed order is
//! always the suite order.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use geoflow_core::atlas::{glue, make_reference, overlap_discrepancy, restrict, ricci_tensor, ManifoldKind, MetricField};
use geoflow_core::diffeo::{
    ball_samples, verify_translation_properties, CenterChart, CutoffProfile, TimeSpaceTranslation,
    TruncatedTranslation, DEFAULT_EPSILON0,
};
use geoflow_core::grid::{Grid, Point};
use geoflow_core::hypersurface::ReferenceHypersurface;
use geoflow_core::probe::{formula_checks, Check};
use geoflow_core::ricci::{
    conformal_metric, correspondence_flow, non_conformal_metric, pullback_metric_trajectory, ricci_residual,
    solve_ricci_deturck, DeTurckSystem, NON_CONFORMAL_AMPLITUDE,
};
use geoflow_core::spectral::Spectral;
use geoflow_core::timestepping::{Scheme, SolverConfig, Trajectory, TrajectoryMeta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Flow, RunConfig};
use crate::runs::{oracle_compare, run_flow, Outcome};
use crate::LabError;

pub const SUITES: [&str; 4] = ["atlas", "diffeo", "ricci", "hypersurface"];

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: &'static str,
    pub checks: Vec<Check>,
    pub elapsed: Duration,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::pass)
    }
}

/// Expands `all` and rejects unknown names.
pub fn resolve(name: &str) -> Result<Vec<&'static str>, LabError> {
    if name == "all" {
        return Ok(SUITES.to_vec());
    }
    SUITES
        .iter()
        .find(|s| **s == name)
        .map(|s| vec![*s])
        .ok_or_else(|| LabError::Usage(format!("unknown suite '{name}' (expected atlas, diffeo, ricci, hypersurface or all)")))
}

fn run_one(name: &'static str, seed: u64) -> SuiteResult {
    let started = Instant::now();
    let result = match name {
        "atlas" => atlas_suite(),
        "diffeo" => diffeo_suite(),
        "ricci" => ricci_suite(),
        "hypersurface" => hypersurface_suite(seed),
        _ => unreachable!("suite names are resolved first"),
    };
    // an internal error is a failed check, not a crash
    let checks = result.unwrap_or_else(|e| vec![Check::at_most(format!("suite_error: {e}"), f64::INFINITY, 0.0)]);
    SuiteResult {
        name,
        checks,
        elapsed: started.elapsed(),
    }
}

/// Runs the named suites on up to `threads` worker threads.
pub fn run_suites(names: &[&'static str], seed: u64, threads: usize) -> Vec<SuiteResult> {
    let threads = threads.max(1);
    let mut out: Vec<Option<SuiteResult>> = vec![None; names.len()];
    for (batch_names, batch_out) in names.chunks(threads).zip(out.chunks_mut(threads)) {
        std::thread::scope(|s| {
            let handles: Vec<_> = batch_names.iter().map(|&n| s.spawn(move || run_one(n, seed))).collect();
            for (slot, h) in batch_out.iter_mut().zip(handles) {
                *slot = Some(h.join().expect("suite thread panicked"));
            }
        });
    }
    out.into_iter().map(|r| r.expect("every suite ran")).collect()
}

/// Plain-text table, one row per check.
pub fn render(results: &[SuiteResult]) -> String {
    let mut s = String::new();
    let width = results
        .iter()
        .flat_map(|r| r.checks.iter().map(|c| c.name.len()))
        .max()
        .unwrap_or(10)
        .max(10);
    for r in results {
        s.push_str(&format!("== {} ({:.1} s)\n", r.name, r.elapsed.as_secs_f64()));
        for c in &r.checks {
            s.push_str(&format!(
                "  {:<width$}  {:>12.4e}  {:<8} {:>10.3e}  {}\n",
                c.name,
                c.value,
                c.comparison.name(),
                c.tolerance,
                if c.pass() { "PASS" } else { "FAIL" },
            ));
        }
    }
    let failed: usize = results.iter().map(|r| r.checks.iter().filter(|c| !c.pass()).count()).sum();
    let total: usize = results.iter().map(|r| r.checks.len()).sum();
    s.push_str(&format!("{} of {} checks passed\n", total - failed, total));
    s
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn sup(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn atlas_suite() -> Result<Vec<Check>, LabError> {
    let mut checks = Vec::new();
    for (kind, n, charts, label) in [
        (ManifoldKind::Circle, 128, 2, "circle2"),
        (ManifoldKind::Torus, 64, 4, "torus4"),
    ] {
        let a = make_reference(kind, n, charts)?;
        checks.push(Check::at_most(format!("{label}_partition_of_unity"), a.partition_defect(), 1e-12));
        checks.push(Check::exact(format!("{label}_envelope_defect"), a.envelope_defect()));
        checks.push(Check::at_most(format!("{label}_transition_defect"), a.transition_defect(), 1e-12));
        checks.push(Check::at_most(format!("{label}_multiplicity"), a.multiplicity() as f64, charts as f64));
        let u = a.sample_scalar(|p| (2.0 * p[0]).cos() + p[1].sin());
        let parts: Vec<Vec<f64>> = (0..charts).map(|k| restrict(&a, &u, k, true)).collect::<Result<_, _>>()?;
        let back = glue(&a, [0, 0], false, &parts)?;
        let err = sup_diff(
            &back.parts.iter().flatten().copied().collect::<Vec<_>>(),
            &u.parts.iter().flatten().copied().collect::<Vec<_>>(),
        );
        checks.push(Check::at_most(format!("{label}_restrict_glue_round_trip"), err, 1e-10));
    }
    // a (0,2) tensor keeps one global meaning across chart transitions
    let a = make_reference(ManifoldKind::Torus, 32, 4)?;
    let g = a.grid();
    let comps = vec![
        g.sample(|p| 1.0 + 0.1 * p[0].sin()),
        g.sample(|p| 0.2 * p[1].cos()),
        g.sample(|p| 0.2 * p[1].cos()),
        g.sample(|p| 2.0 + p[0].cos() * p[1].sin()),
    ];
    let f = a.from_global([0, 2], true, &comps)?;
    checks.push(Check::at_most("torus4_tensor_overlap_discrepancy", overlap_discrepancy(&a, &f), 1e-8));
    let back = a.to_global(&f)?;
    let err = back.iter().zip(&comps).map(|(x, y)| sup_diff(x, y)).fold(0.0, f64::max);
    checks.push(Check::at_most("torus4_tensor_global_round_trip", err, 1e-12));
    Ok(checks)
}

fn diffeo_suite() -> Result<Vec<Check>, LabError> {
    let mut checks = Vec::new();
    let cut = CutoffProfile::new(DEFAULT_EPSILON0, 0.05, 0.01)?;
    let r = cut.default_radius();
    let circle = |mu: f64| TruncatedTranslation::new(CenterChart::new(1, [PI, 0.0]), cut, [mu, 0.0], r);

    // identity at mu = 0, bit for bit
    let g = Grid::new(1, 256)?;
    let s = Spectral::new(g);
    let u = g.sample(|p| p[0].sin() + 0.3 * (3.0 * p[0]).cos());
    let id = circle(0.0)?.pullback_scalar(&s, &u)?;
    checks.push(Check::exact("identity_at_mu_zero", sup_diff(&id, &u)));

    // push then pull back; the intermediate field is not band-limited, so n = 512
    let g512 = Grid::new(1, 512)?;
    let s512 = Spectral::new(g512);
    let t = circle(0.01)?;
    let v = g512.sample(|p| p[0].sin());
    let rt = t.pullback_scalar(&s512, &t.pushforward_scalar(&s512, &v)?)?;
    checks.push(Check::at_most("push_pull_round_trip_n512", sup_diff(&rt, &v), 1e-8));

    // identity outside the support of varsigma, exactly
    let pu = t.pullback_scalar(&s, &u)?;
    let outside = (0..g.len())
        .filter(|&i| t.cutoffs.varsigma(t.chart.to_local(g.point(i))) == 0.0)
        .map(|i| (pu[i] - u[i]).abs())
        .fold(0.0, f64::max);
    checks.push(Check::exact("identity_outside_support", outside));

    // (T1)-(T3) for |mu| <= r/2 on the circle and the torus
    let mut all = 1.0;
    let mut min_det = f64::INFINITY;
    for m in [-0.5, -0.25, 0.25, 0.5] {
        let rep = verify_translation_properties(&circle(m * r)?);
        min_det = min_det.min(rep.min_jacobian_det);
        if !rep.all_pass() {
            all = 0.0;
        }
    }
    for dir in ball_samples(2, 0.5 * r, 6) {
        let tt = TruncatedTranslation::new(CenterChart::new(2, [PI, PI]), cut, dir, r)?;
        let rep = verify_translation_properties(&tt);
        min_det = min_det.min(rep.min_jacobian_det);
        if !rep.all_pass() {
            all = 0.0;
        }
    }
    checks.push(Check::at_least("t1_t2_t3_hold_for_half_radius", all, 1.0));
    checks.push(Check::at_least("min_jacobian_determinant", min_det, f64::MIN_POSITIVE));

    // parameter-derivative formula, evaluation identity, support identity
    let sweep: Vec<Point> = [-0.5, -0.25, 0.0, 0.25, 0.5].iter().map(|f| [f * r, 0.0]).collect();
    let exact = |q: Point| q[0].sin() + 0.3 * (3.0 * q[0]).cos();
    checks.extend(formula_checks(&s, &u, &circle(0.25 * r)?, &sweep, Some(&exact))?);
    let g2 = Grid::new(2, 64)?;
    let s2 = Spectral::new(g2);
    let u2 = g2.sample(|p| p[0].sin() * p[1].cos());
    let t2 = TruncatedTranslation::new(CenterChart::new(2, [PI, PI]), cut, [0.2 * r, -0.1 * r], r)?;
    let sweep2: Vec<Point> = [-0.5, 0.0, 0.5].iter().map(|f| [f * r, 0.5 * f * r]).collect();
    let exact2 = |q: Point| q[0].sin() * q[1].cos();
    for c in formula_checks(&s2, &u2, &t2, &sweep2, Some(&exact2))? {
        checks.push(Check { name: format!("torus_{}", c.name), ..c });
    }

    // B_{lambda,0} vanishes identically
    let traj = synthetic_trajectory(g, 0.1, 100);
    let st = TimeSpaceTranslation::new(circle(0.0)?, 0.5 * cut.default_time_radius(), [0.0, 0.1], cut.default_time_radius())?;
    let mut b_sup = 0.0f64;
    for k in 0..=20 {
        let tk = 0.03 + k as f64 * 2e-3;
        b_sup = b_sup.max(sup(&st.b_operator(&s, &traj.dense_eval(tk)?, tk)?));
    }
    checks.push(Check::exact("b_lambda_0_vanishes", b_sup));
    Ok(checks)
}

fn synthetic_trajectory(g: Grid, t_end: f64, steps: usize) -> Trajectory {
    let mut traj = Trajectory::new(TrajectoryMeta {
        flow: "synthetic".into(),
        grid: g,
        components: 1,
        valence: [0, 0],
    });
    for k in 0..=steps {
        let t = k as f64 * t_end / steps as f64;
        traj.push(t, g.sample(|p| (p[0] + t).sin() * (1.0 + t))).expect("increasing times");
    }
    traj
}

fn fixed_config(flow: Flow, initial: &str, n: usize, t_end: f64, scheme: &str, dt: f64) -> RunConfig {
    let mut c = RunConfig {
        flow,
        n,
        initial: initial.into(),
        t_end,
        ..RunConfig::default()
    };
    c.solver.scheme = scheme.into();
    c.solver.dt = dt;
    c.solver.dt_min = dt;
    c.solver.dt_max = dt;
    c
}

/// Largest observed Ricci residual of the non-conformal run on `(n, dt)`.
pub fn non_conformal_residual(n: usize, dt: f64, t_end: f64, window: [f64; 2]) -> Result<f64, LabError> {
    let sys = DeTurckSystem::flat(n)?;
    let g0 = non_conformal_metric(sys.grid(), NON_CONFORMAL_AMPLITUDE);
    let cfg = SolverConfig::fixed(Scheme::Imex, dt).with_save_every(2);
    let g = solve_ricci_deturck(&sys, &g0, t_end, &cfg)?;
    let cf = correspondence_flow(&sys.deturck_trajectory(&g)?, t_end, 2)?;
    let bar = pullback_metric_trajectory(&cf, &g)?;
    let rows = ricci_residual(&sys, &g, &bar, 2.0 * dt, window)?;
    Ok(rows.iter().map(|r| r.residual_ricci).fold(0.0, f64::max))
}

fn ricci_suite() -> Result<Vec<Check>, LabError> {
    let mut checks = Vec::new();
    // flat fixed point
    let sys = DeTurckSystem::flat(16)?;
    let flat = conformal_metric(&vec![0.0; sys.grid().len()]);
    checks.push(Check::at_most("flat_q_vanishes", sup(&sys.q_rhs(&flat)?), 1e-10));
    let g = solve_ricci_deturck(&sys, &flat, 0.02, &SolverConfig::fixed(Scheme::Imex, 1e-3))?;
    let cf = correspondence_flow(&sys.deturck_trajectory(&g)?, 0.02, 1)?;
    let bar = pullback_metric_trajectory(&cf, &g)?;
    let rows = ricci_residual(&sys, &g, &bar, 1e-3, [0.0, 0.02])?;
    let worst = rows.iter().map(|r| r.residual_ricci.max(r.residual_deturck)).fold(0.0, f64::max);
    checks.push(Check::at_most("flat_residual", worst, 1e-10));

    // split consistency: Q = principal part + remainder
    let sys32 = DeTurckSystem::flat(32)?;
    let g_nc = non_conformal_metric(sys32.grid(), 0.2);
    let q = sys32.q(&sys32.metric(&g_nc)?);
    let split = (0..3)
        .map(|c| {
            let sum: Vec<f64> = q.principal[c].iter().zip(&q.remainder[c]).map(|(a, b)| a + b).collect();
            sup_diff(&sum, &q.q[c])
        })
        .fold(0.0, f64::max);
    checks.push(Check::at_most("q_split_consistency", split, 1e-12));

    // conformal data: W stays zero and the scalar oracle agrees
    let cfg = fixed_config(Flow::RicciDeTurck, "conformal:0.1", 32, 0.02, "imex", 2e-4);
    let res = oracle_compare(&cfg)?;
    checks.push(Check::exact(
        "conformal_run_completed",
        if res.outcome == Outcome::Completed { 0.0 } else { 1.0 },
    ));
    checks.extend(res.checks);
    let (traj, _) = run_flow(&cfg)?;
    let w = sys32.deturck_trajectory(&traj)?;
    let cf = correspondence_flow(&w, traj.end(), 2)?;
    checks.push(Check::at_most("conformal_correspondence_is_identity", cf.max_displacement(), 1e-9));

    // chart independence of Ricci on the four-chart torus
    let a = make_reference(ManifoldKind::Torus, 64, 4)?;
    let gg = a.grid();
    let comps = [
        gg.sample(|p| 1.0 + 0.1 * p[1].sin()),
        gg.sample(|p| 0.05 * p[0].sin()),
        gg.sample(|p| 1.0 + 0.1 * p[0].cos()),
    ];
    let metric = MetricField::from_global(&a, comps)?;
    let rc = ricci_tensor(&a, &metric)?;
    checks.push(Check::at_most("ricci_chart_consistency", overlap_discrepancy(&a, &rc), 1e-4));

    // correspondence residual converges at second order
    let coarse = non_conformal_residual(16, 4e-4, 0.03, [0.01, 0.02])?;
    let fine = non_conformal_residual(32, 2e-4, 0.03, [0.01, 0.02])?;
    checks.push(Check::at_least("ricci_residual_order", (coarse / fine).log2(), 1.9));
    Ok(checks)
}

/// Band-limited admissible heights with `|rho| < 0.25`.
pub fn random_heights(grid: Grid, seed: u64, count: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let coeffs: Vec<(f64, f64)> = (0..6).map(|_| (rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5))).collect();
            grid.sample(|p| {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, (a, b))| {
                        let k = (k + 1) as f64;
                        0.15 / k * (a * (k * p[0]).cos() + b * (k * p[0]).sin())
                    })
                    .sum()
            })
        })
        .collect()
}

fn hypersurface_suite(seed: u64) -> Result<Vec<Check>, LabError> {
    let mut checks = Vec::new();
    let r = ReferenceHypersurface::unit_circle(256)?;
    let mut worst = 0.0f64;
    for rho in random_heights(r.grid(), seed, 20) {
        let h = r.mean_curvature(&r.graph_geometry(&rho)?);
        worst = worst.max(sup_diff(&h, &r.parametric_oracle(&rho)?.curvature));
    }
    checks.push(Check::at_most("mean_curvature_vs_parametric", worst, 1e-8));
    let ellipse = r.grid().sample(|p| 0.1 * (2.0 * p[0]).cos());
    let h0 = r.mean_curvature(&r.graph_geometry(&ellipse)?)[0];
    checks.push(Check::at_most("mean_curvature_spot_value", (h0 + 1.239669).abs(), 1e-6));

    let completed = |o: &Outcome| if *o == Outcome::Completed { 0.0 } else { 1.0 };
    for (flow, label) in [(Flow::Sdf, "sdf"), (Flow::Amcf, "amcf")] {
        let (traj, o) = run_flow(&fixed_config(flow, "const:0.2", 64, 0.1, "imex", 1e-3))?;
        checks.push(Check::exact(format!("{label}_equilibrium_completed"), completed(&o)));
        let drift = traj.states().iter().map(|s| s.iter().map(|v| (v - 0.2).abs()).fold(0.0, f64::max)).fold(0.0, f64::max);
        checks.push(Check::at_most(format!("{label}_equilibrium"), drift, 1e-10));
    }
    for (cfg, label) in [
        (fixed_config(Flow::Mcf, "flat", 64, 0.18, "rk4", 1e-4), "mcf"),
        (fixed_config(Flow::Sdf, "cos2:0.1", 64, 0.1, "imex", 1e-4), "sdf"),
        (fixed_config(Flow::Amcf, "cos2:0.1", 64, 0.1, "imex", 1e-4), "amcf"),
    ] {
        let res = oracle_compare(&cfg)?;
        checks.push(Check::exact(format!("{label}_oracle_run_completed"), completed(&res.outcome)));
        for c in res.checks {
            checks.push(Check { name: format!("{label}_{}", c.name), ..c });
        }
    }
    // a shrinking circle leaves a narrow tube and is reported as such
    let mut narrow = fixed_config(Flow::Mcf, "flat", 32, 0.3, "rk4", 1e-3);
    narrow.tube = 0.3;
    let (traj, o) = run_flow(&narrow)?;
    let exit_ok = matches!(o, Outcome::Admissibility(_)) && traj.end() < 0.3;
    checks.push(Check::exact("tube_exit_reported", if exit_ok { 0.0 } else { 1.0 }));
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names() {
        assert_eq!(resolve("all").unwrap().len(), 4);
        assert_eq!(resolve("atlas").unwrap(), vec!["atlas"]);
        assert!(matches!(resolve("bogus"), Err(LabError::Usage(_))));
    }

    #[test]
    fn random_heights_are_reproducible_and_admissible() {
        let g = Grid::new(1, 64).unwrap();
        let a = random_heights(g, 7, 3);
        assert_eq!(a, random_heights(g, 7, 3));
        assert_ne!(a, random_heights(g, 8, 3));
        assert!(a.iter().flatten().all(|v| v.abs() < 0.25));
    }

    #[test]
    fn atlas_suite_passes() {
        let r = run_suites(&["atlas"], 0, 1);
        assert!(r[0].passed(), "{}", render(&r));
    }
}
