//! Numerical checks of the transformation identities on computed trajectories.
//!
//! Three probes, all pure functions of their inputs:
//!
//! * [`transformed_residual`]: for `u_{lambda,mu}(t) = T_mu(t) u(rho_lambda(t))`,
//!   `|d_t u_{lambda,mu} - rho' T_mu F(T_mu^{-1} u_{lambda,mu}) - B(u_{lambda,mu})|`
//!   against the residual `|d_t u - F(u)|` of the trajectory itself;
//! * [`formula_checks`]: the closed form of `d^alpha_mu [Theta*_mu u]`, the
//!   evaluation identity at the center and the exact structural identities;
//! * [`smoothness_table`]: divided differences of `(lambda, mu) -> u_{lambda,mu}(t0, p)`
//!   up to order 3 under two stencil halvings.
//!
//! Smoothness is only probed to finite order. No finite computation tells an
//! analytic family from a `C^3` one, so analyticity is never claimed, and the
//! converse direction (smooth family implies smooth `u`) has no finite-data
//! counterpart: the probe reports consistency only.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::diffeo::{TimeSpaceTranslation, TruncatedTranslation};
use crate::grid::Point;
use crate::spectral::Spectral;
use crate::timestepping::{FlowSystem, Trajectory};
use crate::{Error, Result};

/// Printed at the top of every report.
pub const ANALYTICITY_BANNER: &str = "finite-order smoothness evidence only: analyticity in (lambda, mu) \
is not machine-checked, and smoothness of the family does not certify smoothness of u";

/// Relative stencils `h / r` for parameter differences.
pub const STENCIL_FACTORS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];
/// Absolute stencils for the parameter-derivative formula check.
pub const FORMULA_STEPS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

pub const TOL_TRANSFORMED_RATIO: f64 = 10.0;
pub const TOL_TIME_SHIFT_RATIO: f64 = 2.0;
pub const TOL_FD_ORDER: f64 = 1.9;
pub const TOL_FD_ERROR_FLOOR: f64 = 1e-11;
pub const TOL_EVALUATION_IDENTITY: f64 = 1e-9;
pub const TOL_DRIFT: f64 = 0.2;
pub const TOL_FIRST_ORDER_MATCH: f64 = 1e-6;

/// How a check compares its value to the tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    AtMost,
    AtLeast,
    /// Value must be exactly zero.
    Exact,
}

impl Comparison {
    pub fn name(self) -> &'static str {
        match self {
            Comparison::AtMost => "at_most",
            Comparison::AtLeast => "at_least",
            Comparison::Exact => "exact",
        }
    }
}

/// One verdict together with the tolerance it was tested against.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            comparison: Comparison::AtMost,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            comparison: Comparison::AtLeast,
        }
    }

    pub fn exact(name: impl Into<String>, value: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance: 0.0,
            comparison: Comparison::Exact,
        }
    }

    pub fn pass(&self) -> bool {
        match self.comparison {
            Comparison::AtMost => self.value <= self.tolerance,
            Comparison::AtLeast => self.value >= self.tolerance,
            Comparison::Exact => self.value == 0.0,
        }
    }
}

/// Fourth-order centered difference of `f` at `t`.
fn fd4(f: impl Fn(f64) -> Result<Vec<f64>>, t: f64, delta: f64) -> Result<Vec<f64>> {
    let (p2, p1, m1, m2) = (f(t + 2.0 * delta)?, f(t + delta)?, f(t - delta)?, f(t - 2.0 * delta)?);
    Ok((0..p1.len())
        .map(|i| (-p2[i] + 8.0 * p1[i] - 8.0 * m1[i] + m2[i]) / (12.0 * delta))
        .collect())
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// `|d_t u(t) - F(t, u(t))|_sup` with a fourth-order difference of the dense output.
pub fn raw_residual<S: FlowSystem + ?Sized>(sys: &S, traj: &Trajectory, t: f64, delta: f64) -> Result<f64> {
    let dt = fd4(|s| traj.dense_eval(s), t, delta)?;
    let f = sys.rhs(t, &traj.dense_eval(t)?)?;
    Ok(dt.iter().zip(&f).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualSample {
    pub t: f64,
    pub raw: f64,
    pub transformed: f64,
}

/// Residual time series of one `(lambda, mu)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSeries {
    pub lambda: f64,
    pub mu: Point,
    pub delta: f64,
    pub samples: Vec<ResidualSample>,
    /// `sup |B_{lambda,0}|` over the samples (exactly zero when it vanishes).
    pub b_lambda0: f64,
}

impl ResidualSeries {
    pub fn max_raw(&self) -> f64 {
        self.samples.iter().map(|s| s.raw).fold(0.0, f64::max)
    }

    pub fn max_transformed(&self) -> f64 {
        self.samples.iter().map(|s| s.transformed).fold(0.0, f64::max)
    }

    /// `max transformed / max raw` (zero when both vanish).
    pub fn ratio(&self) -> f64 {
        let (a, b) = (self.max_transformed(), self.max_raw());
        if a == 0.0 {
            0.0
        } else {
            a / b.max(f64::MIN_POSITIVE)
        }
    }

    pub fn checks(&self) -> Vec<Check> {
        let tag = format!("lambda={:e},mu=[{:e},{:e}]", self.lambda, self.mu[0], self.mu[1]);
        let tol = if self.mu == [0.0, 0.0] {
            TOL_TIME_SHIFT_RATIO
        } else {
            TOL_TRANSFORMED_RATIO
        };
        vec![
            Check::at_most(format!("transformed_over_raw_residual[{tag}]"), self.ratio(), tol),
            Check::exact(format!("b_lambda_0_vanishes[{tag}]"), self.b_lambda0),
        ]
    }
}

/// Sample times spread over `supp xi` (plus a margin), kept clear of the
/// trajectory ends by the difference stencil and the largest time shift.
pub fn residual_sample_times(st: &TimeSpaceTranslation, traj: &Trajectory, count: usize, delta: f64) -> Vec<f64> {
    let c = &st.space.cutoffs;
    let margin = 2.0 * delta + st.r_time + 1e-12;
    let lo = (c.t0 - 2.5 * c.time_radius).max(traj.start() + margin);
    let hi = (c.t0 + 2.5 * c.time_radius).min(traj.end() - margin);
    if count == 0 || !(hi > lo) {
        return Vec::new();
    }
    if count == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect()
}

/// Residual of the transformed equation
/// `d_t v = rho'(t) T_mu(t) F(rho(t), T_mu(t)^{-1} v) + B_{lambda,mu}(v)` along
/// `v = u_{lambda,mu}`, next to the raw residual at the same times. `T^{-1} v`
/// is the dense-output snapshot `u(rho(t))` itself.
pub fn transformed_residual<S: FlowSystem + ?Sized>(
    sys: &S,
    spectral: &Spectral,
    traj: &Trajectory,
    st: &TimeSpaceTranslation,
    times: &[f64],
    delta: f64,
) -> Result<ResidualSeries> {
    let at_zero = TimeSpaceTranslation {
        space: st.space.with_mu([0.0, 0.0]),
        ..*st
    };
    let mut samples = Vec::with_capacity(times.len());
    let mut b_lambda0 = 0.0f64;
    for &t in times {
        let raw = raw_residual(sys, traj, t, delta)?;
        let dv = fd4(|s| st.eval(spectral, traj, s), t, delta)?;
        let warped = st.time_warp(t);
        let w = traj.dense_eval(warped)?;
        let f = sys.rhs(warped, &w)?;
        let tr = st.translation_at(t);
        let moved = if tr.mu == [0.0, 0.0] {
            f
        } else {
            tr.pullback_components(spectral, &f)?
        };
        let b = st.b_operator_from_preimage(spectral, &w, t)?;
        let rate = st.warp_rate(t);
        let transformed = (0..dv.len())
            .map(|i| (dv[i] - rate * moved[i] - b[i]).abs())
            .fold(0.0, f64::max);
        b_lambda0 = b_lambda0.max(sup(&at_zero.b_operator(spectral, &w, t)?));
        samples.push(ResidualSample { t, raw, transformed });
    }
    Ok(ResidualSeries {
        lambda: st.lambda,
        mu: st.space.mu,
        delta,
        samples,
        b_lambda0,
    })
}

/// Structural and closed-form checks of `Theta*_mu` on a static field `u`
/// (component-major, any number of components). `base.chart.center` must be a
/// grid node; `exact`, when given, evaluates the first component off-grid.
pub fn formula_checks(
    spectral: &Spectral,
    u: &[f64],
    base: &TruncatedTranslation,
    mu_sweep: &[Point],
    exact: Option<&dyn Fn(Point) -> f64>,
) -> Result<Vec<Check>> {
    let grid = spectral.grid();
    let m = grid.len();
    let center = grid
        .node_at(base.chart.center)
        .ok_or(Error::Config("probe center must be a grid node"))?;
    let mut checks = Vec::new();

    // (a) parameter derivatives against central differences
    let alphas: &[[usize; 2]] = if grid.dim() == 1 {
        &[[1, 0], [2, 0]]
    } else {
        &[[1, 0], [0, 1], [2, 0], [1, 1]]
    };
    let mu = base.mu;
    let f = |a: f64, b: f64, h: f64| base.with_mu([mu[0] + a * h, mu[1] + b * h]).pullback_components(spectral, u);
    for &alpha in alphas {
        let exact_d = base.param_derivative(spectral, u, alpha)?;
        let mut errs = [0.0; 3];
        for (e, &h) in errs.iter_mut().zip(&FORMULA_STEPS) {
            let approx: Vec<f64> = match alpha {
                [1, 0] | [0, 1] => {
                    let (a, b) = if alpha[0] == 1 { (1.0, 0.0) } else { (0.0, 1.0) };
                    let (p, q) = (f(a, b, h)?, f(-a, -b, h)?);
                    (0..p.len()).map(|i| (p[i] - q[i]) / (2.0 * h)).collect()
                }
                [2, 0] => {
                    let (p, c, q) = (f(1.0, 0.0, h)?, f(0.0, 0.0, h)?, f(-1.0, 0.0, h)?);
                    (0..p.len()).map(|i| (p[i] - 2.0 * c[i] + q[i]) / (h * h)).collect()
                }
                _ => {
                    let (pp, pm, mp, mm) = (f(1.0, 1.0, h)?, f(1.0, -1.0, h)?, f(-1.0, 1.0, h)?, f(-1.0, -1.0, h)?);
                    (0..pp.len())
                        .map(|i| (pp[i] - pm[i] - mp[i] + mm[i]) / (4.0 * h * h))
                        .collect()
                }
            };
            *e = approx.iter().zip(&exact_d).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        }
        let name = format!("parameter_derivative_fd[{},{}]", alpha[0], alpha[1]);
        if errs.iter().all(|&e| e <= TOL_FD_ERROR_FLOOR) {
            checks.push(Check::at_most(format!("{name}_error"), errs[0], TOL_FD_ERROR_FLOOR));
        } else {
            checks.push(Check::at_least(format!("{name}_order"), (errs[1] / errs[2]).log2(), TOL_FD_ORDER));
        }
    }

    // (b) evaluation identity at the center
    let it = spectral.interpolant(&u[..m]);
    let mut eval_err = 0.0f64;
    for &s in mu_sweep {
        let t = base.with_mu(s);
        let v = t.pullback_components(spectral, u)?;
        let q = t.chart.to_manifold(t.mu);
        let reference = match exact {
            Some(e) => e(q),
            None => it.eval(q),
        };
        eval_err = eval_err.max((v[center] - reference).abs());
    }
    checks.push(Check::at_most("evaluation_identity", eval_err, TOL_EVALUATION_IDENTITY));

    // (c) Theta*_0 = id, bit for bit
    let id = base.with_mu([0.0, 0.0]).pullback_components(spectral, u)?;
    let mismatches = id.iter().zip(u).filter(|(a, b)| a.to_bits() != b.to_bits()).count();
    checks.push(Check::exact("identity_at_zero_mismatches", mismatches as f64));

    // (d) nothing moves outside the support of varsigma
    let mut outside = 0.0f64;
    for &s in mu_sweep.iter().chain(core::iter::once(&mu)) {
        let t = base.with_mu(s);
        let v = t.pullback_components(spectral, u)?;
        for i in 0..m {
            if t.cutoffs.varsigma(t.chart.to_local(grid.point(i))) == 0.0 {
                for c in 0..u.len() / m {
                    outside = outside.max((v[c * m + i] - u[c * m + i]).abs());
                }
            }
        }
    }
    checks.push(Check::exact("support_identity", outside));
    Ok(checks)
}

/// Parameter direction of a divided difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Lambda,
    Mu(usize),
}

impl Direction {
    pub fn name(self) -> String {
        match self {
            Direction::Lambda => "lambda".into(),
            Direction::Mu(j) => format!("mu{}", j + 1),
        }
    }
}

/// Central divided differences of one component in one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothnessEntry {
    pub direction: Direction,
    pub component: usize,
    pub order: usize,
    pub steps: [f64; 3],
    pub values: [f64; 3],
    /// Roundoff level of the finest stencil; differences below it are noise.
    pub noise_floor: f64,
    /// `max |D(h_k) - D(h_{k+1})| / max(|D(h_3)|, noise_floor)`.
    pub drift: f64,
    /// `log2 |D1 - D2| / |D2 - D3|` (NaN when the differences vanish).
    pub slope: f64,
}

impl SmoothnessEntry {
    pub fn resolved(&self) -> bool {
        self.values[2].abs() > self.noise_floor
    }

    pub fn check(&self) -> Check {
        Check::at_most(
            format!("drift[{},c{},order{}]", self.direction.name(), self.component, self.order),
            self.drift,
            TOL_DRIFT,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothnessTable {
    pub t0: f64,
    pub point: Point,
    pub entries: Vec<SmoothnessEntry>,
    /// First-order cross checks against the time derivative and the closed form.
    pub checks: Vec<Check>,
}

impl SmoothnessTable {
    pub fn all_checks(&self) -> Vec<Check> {
        self.entries.iter().map(|e| e.check()).chain(self.checks.iter().cloned()).collect()
    }
}

/// `u_{lambda,mu}(t, p)` for every component, at the chart center `p`.
fn point_value(spectral: &Spectral, traj: &Trajectory, st: &TimeSpaceTranslation, t: f64) -> Result<Vec<f64>> {
    let grid = spectral.grid();
    let m = grid.len();
    let w = traj.dense_eval(st.time_warp(t))?;
    let tr = st.translation_at(t);
    let p = tr.chart.center;
    let y = tr.chart.to_local(p);
    let ty = tr.theta_apply(y);
    let node = grid.node_at(p);
    (0..w.len() / m)
        .map(|c| {
            let wc = &w[c * m..(c + 1) * m];
            let it = spectral.interpolant(wc);
            let at_p = match node {
                Some(i) => wc[i],
                None => it.eval(p),
            };
            if ty == y {
                return Ok(at_p);
            }
            let q = tr.chart.to_manifold(ty);
            Ok(tr.cutoffs.varsigma(ty) * it.eval(q) + (1.0 - tr.cutoffs.varsigma(y)) * at_p)
        })
        .collect()
}

/// Central divided difference of order `k <= 3` from samples at `s h`, `s in -2..=2`.
fn divided(k: usize, f: &[f64; 5], h: f64) -> f64 {
    let [m2, m1, c, p1, p2] = *f;
    match k {
        0 => c,
        1 => (p1 - m1) / (2.0 * h),
        2 => (p1 - 2.0 * c + m1) / (h * h),
        _ => (p2 - 2.0 * p1 + 2.0 * m1 - m2) / (2.0 * h * h * h),
    }
}

/// Divided differences of `(lambda, mu) -> u_{lambda,mu}(t0, p)` around the
/// parameters of `st`, `p` being the chart center (a grid node), with stencils
/// `STENCIL_FACTORS * r` (`r_time` for `lambda`). Also matches the first order
/// in `lambda` against the dense-output time derivative and the first order in
/// `mu_j` against the closed-form parameter derivative.
pub fn smoothness_table(
    spectral: &Spectral,
    traj: &Trajectory,
    st: &TimeSpaceTranslation,
    t0: f64,
    max_order: usize,
) -> Result<SmoothnessTable> {
    if max_order > 3 {
        return Err(Error::Order(max_order));
    }
    let grid = spectral.grid();
    let m = grid.len();
    let center = st.space.chart.center;
    let node = grid
        .node_at(center)
        .ok_or(Error::Config("probe center must be a grid node"))?;
    let mut dirs = vec![Direction::Lambda];
    dirs.extend((0..grid.dim()).map(Direction::Mu));
    // the widest stencil must stay inside the admissible parameter ball
    let reach_l = st.lambda.abs() + 2.0 * STENCIL_FACTORS[0] * st.r_time;
    if !(reach_l < st.r_time) {
        return Err(Error::Inadmissible {
            what: "|lambda| + stencil",
            value: reach_l,
            bound: st.r_time,
        });
    }
    let reach_m = st.space.mu_norm() + 2.0 * STENCIL_FACTORS[0] * st.space.r;
    if !(reach_m < st.space.r) {
        return Err(Error::Inadmissible {
            what: "|mu| + stencil",
            value: reach_m,
            bound: st.space.r,
        });
    }

    let shifted = |d: Direction, s: f64| -> TimeSpaceTranslation {
        match d {
            Direction::Lambda => TimeSpaceTranslation {
                lambda: st.lambda + s,
                ..*st
            },
            Direction::Mu(j) => {
                let mut mu = st.space.mu;
                mu[j] += s;
                TimeSpaceTranslation {
                    space: st.space.with_mu(mu),
                    ..*st
                }
            }
        }
    };

    let base = point_value(spectral, traj, st, t0)?;
    let comps = base.len();
    let mut entries = Vec::new();
    let mut first_order: Vec<(Direction, Vec<f64>)> = Vec::new();
    for &d in &dirs {
        let r = match d {
            Direction::Lambda => st.r_time,
            Direction::Mu(_) => st.space.r,
        };
        let steps = STENCIL_FACTORS.map(|f| f * r);
        // samples[h][s][component]
        let mut samples: Vec<[Vec<f64>; 5]> = Vec::with_capacity(3);
        for &h in &steps {
            let mut row: [Vec<f64>; 5] = Default::default();
            for (k, s) in (-2i32..=2).enumerate() {
                row[k] = if s == 0 {
                    base.clone()
                } else {
                    point_value(spectral, traj, &shifted(d, s as f64 * h), t0)?
                };
            }
            samples.push(row);
        }
        let mut finest_first = vec![0.0; comps];
        for c in 0..comps {
            let scale = (0..3)
                .flat_map(|h| samples[h].iter().map(move |v| v[c].abs()))
                .fold(0.0, f64::max);
            for k in 0..=max_order {
                let values: [f64; 3] = core::array::from_fn(|h| {
                    let f: [f64; 5] = core::array::from_fn(|s| samples[h][s][c]);
                    divided(k, &f, steps[h])
                });
                // worst-case cancellation of a unit-roundoff perturbation, times 100
                let weight = [1.0, 1.0, 4.0, 3.0][k];
                let noise_floor = 100.0 * f64::EPSILON * scale * weight / steps[2].powi(k as i32);
                let (d1, d2) = ((values[0] - values[1]).abs(), (values[1] - values[2]).abs());
                let drift = if k == 0 {
                    d1.max(d2) / values[2].abs().max(f64::MIN_POSITIVE)
                } else {
                    d1.max(d2) / values[2].abs().max(noise_floor)
                };
                let slope = if d2 > 0.0 { (d1 / d2).log2() } else { f64::NAN };
                if k == 1 {
                    finest_first[c] = values[2];
                }
                entries.push(SmoothnessEntry {
                    direction: d,
                    component: c,
                    order: k,
                    steps,
                    values,
                    noise_floor,
                    drift: if d1.max(d2) == 0.0 { 0.0 } else { drift },
                    slope,
                });
            }
        }
        first_order.push((d, finest_first));
    }

    let mut checks = Vec::new();
    if max_order >= 1 {
        let state = traj.dense_eval(st.time_warp(t0))?;
        let u_scale = sup(&state).max(f64::MIN_POSITIVE);
        for (d, fd) in &first_order {
            let reference: Vec<f64> = match d {
                Direction::Lambda => {
                    // d/dlambda u(rho_lambda(t0)) = xi(t0) d_t u
                    let x = st.xi(t0).value();
                    let dt = traj.dense_derivative(st.time_warp(t0))?;
                    let tr = st.translation_at(t0);
                    let moved = if tr.mu == [0.0, 0.0] {
                        dt
                    } else {
                        tr.pullback_components(spectral, &dt)?
                    };
                    (0..comps).map(|c| x * moved[c * m + node]).collect()
                }
                Direction::Mu(j) => {
                    let x = st.xi(t0).value();
                    let mut alpha = [0, 0];
                    alpha[*j] = 1;
                    let pd = st.translation_at(t0).param_derivative(spectral, &state, alpha)?;
                    (0..comps).map(|c| x * pd[c * m + node]).collect()
                }
            };
            let err = fd
                .iter()
                .zip(&reference)
                .map(|(a, b)| (a - b).abs() / b.abs().max(u_scale))
                .fold(0.0, f64::max);
            checks.push(Check::at_most(
                format!("first_order_{}_vs_closed_form", d.name()),
                err,
                TOL_FIRST_ORDER_MATCH,
            ));
        }
    }
    Ok(SmoothnessTable {
        t0,
        point: center,
        entries,
        checks,
    })
}

/// Pieces a report is assembled from.
#[derive(Debug, Clone, PartialEq)]
pub enum ReportPart {
    Residual(ResidualSeries),
    Formula(Vec<Check>),
    Smoothness(SmoothnessTable),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProbeReport {
    pub kind: String,
    pub residuals: Vec<ResidualSeries>,
    pub formula: Vec<Check>,
    pub smoothness: Vec<SmoothnessTable>,
}

impl ProbeReport {
    /// Every verdict, in a fixed order.
    pub fn checks(&self) -> Vec<Check> {
        let mut out = Vec::new();
        for r in &self.residuals {
            out.extend(r.checks());
        }
        out.extend(self.formula.iter().cloned());
        for s in &self.smoothness {
            out.extend(s.all_checks());
        }
        out
    }

    pub fn passed(&self) -> bool {
        self.checks().iter().all(Check::pass)
    }
}

/// Collects parts in the order given.
pub fn make_report(kind: &str, parts: Vec<ReportPart>) -> ProbeReport {
    let mut report = ProbeReport {
        kind: kind.into(),
        ..Default::default()
    };
    for p in parts {
        match p {
            ReportPart::Residual(r) => report.residuals.push(r),
            ReportPart::Formula(c) => report.formula.extend(c),
            ReportPart::Smoothness(s) => report.smoothness.push(s),
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffeo::{CenterChart, CutoffProfile};
    use crate::grid::Grid;
    use crate::hypersurface::{solve_hypersurface_flow, FlowKind, ReferenceHypersurface};
    use crate::timestepping::{Scheme, SolverConfig};
    use core::f64::consts::PI;

    fn circle_translation(n: usize, mu_frac: f64, lambda_frac: f64, t0: f64, tau: f64, t_end: f64) -> TimeSpaceTranslation {
        let cut = CutoffProfile::new(0.15, t0, tau).unwrap();
        let g = Grid::new(1, n).unwrap();
        let center = [g.coord(n / 6), 0.0];
        let r = cut.default_radius();
        let space = TruncatedTranslation::new(CenterChart::new(1, center), cut, [mu_frac * r, 0.0], r).unwrap();
        let rt = cut.default_time_radius();
        TimeSpaceTranslation::new(space, lambda_frac * rt, [0.0, t_end], rt).unwrap()
    }

    fn sdf_run(n: usize, dt: f64, t_end: f64) -> (ReferenceHypersurface, Trajectory) {
        let reference = ReferenceHypersurface::unit_circle(n).unwrap();
        let rho0 = reference.grid().sample(|p| 0.1 * (2.0 * p[0]).cos());
        let traj = solve_hypersurface_flow(&reference, FlowKind::Sdf, &rho0, t_end, &SolverConfig::fixed(Scheme::Imex, dt))
            .unwrap();
        (reference, traj)
    }

    #[test]
    fn residual_identities() {
        let (reference, traj) = sdf_run(64, 1e-4, 0.02);
        let sys = reference.system(FlowKind::Sdf);
        let s = reference.spectral();
        let delta = 1e-5;
        let id = circle_translation(64, 0.0, 0.0, 0.01, 0.003, 0.02);
        let times = residual_sample_times(&id, &traj, 7, delta);
        assert_eq!(times.len(), 7);
        let r = transformed_residual(&sys, s, &traj, &id, &times, delta).unwrap();
        for smp in &r.samples {
            assert_eq!(smp.raw, smp.transformed);
        }
        assert!(r.checks().iter().all(Check::pass));

        let shift = circle_translation(64, 0.0, 0.25, 0.01, 0.003, 0.02);
        let r = transformed_residual(&sys, s, &traj, &shift, &times, delta).unwrap();
        assert_eq!(r.b_lambda0, 0.0);
        assert!(r.ratio() <= 2.0, "{}", r.ratio());

        let both = circle_translation(64, 0.25, 0.25, 0.01, 0.003, 0.02);
        let r = transformed_residual(&sys, s, &traj, &both, &times, delta).unwrap();
        assert!(r.ratio() <= 10.0, "{} {:e}", r.ratio(), r.max_raw());
        assert!(r.checks().iter().all(Check::pass));
    }

    #[test]
    fn formula_checks_on_static_fields() {
        let g = Grid::new(1, 256).unwrap();
        let s = Spectral::new(g);
        let cut = CutoffProfile::new(0.15, 0.05, 0.01).unwrap();
        let r = cut.default_radius();
        let base = TruncatedTranslation::new(CenterChart::new(1, [PI, 0.0]), cut, [0.3 * r, 0.0], r).unwrap();
        let sweep: Vec<Point> = [-0.5, -0.25, 0.0, 0.25, 0.5].iter().map(|f| [f * r, 0.0]).collect();
        let c = vec![2.5; g.len()];
        let checks = formula_checks(&s, &c, &base, &sweep, None).unwrap();
        assert!(checks.iter().all(Check::pass), "{checks:?}");
        assert!(checks.iter().all(|c| c.value == 0.0 || c.name.ends_with("_error")));

        let u = g.sample(|p| p[0].sin());
        let exact = |p: Point| p[0].sin();
        let checks = formula_checks(&s, &u, &base, &sweep, Some(&exact)).unwrap();
        assert!(checks.iter().all(Check::pass), "{checks:?}");

        let g2 = Grid::new(2, 32).unwrap();
        let s2 = Spectral::new(g2);
        let base2 =
            TruncatedTranslation::new(CenterChart::new(2, [PI, PI]), cut, [0.3 * r, -0.2 * r], r).unwrap();
        let u2 = g2.sample(|p| p[0].sin() * (2.0 * p[1]).cos() + 0.3 * p[1].sin());
        let checks = formula_checks(&s2, &u2, &base2, &[[0.1 * r, 0.2 * r]], None).unwrap();
        assert!(checks.iter().all(Check::pass), "{checks:?}");
        assert!(checks.iter().any(|c| c.name == "parameter_derivative_fd[2,0]_order"));

        let off = TruncatedTranslation::new(CenterChart::new(1, [1.0, 0.0]), cut, [0.0, 0.0], r).unwrap();
        assert!(formula_checks(&s, &u, &off, &sweep, None).is_err());
    }

    #[test]
    fn smoothness_table_on_a_flow() {
        let (reference, traj) = sdf_run(64, 1e-4, 0.1);
        let s = reference.spectral();
        // t0 in the middle of a dense-output segment
        let st = circle_translation(64, 0.0, 0.0, 0.05005, 0.02, 0.1);
        let table = smoothness_table(s, &traj, &st, 0.05005, 3).unwrap();
        assert_eq!(table.entries.len(), 2 * 4);
        for e in &table.entries {
            assert!(e.drift <= TOL_DRIFT, "{e:?}");
            if e.order == 0 {
                assert_eq!(e.drift, 0.0);
            }
        }
        assert!(table.checks.iter().all(Check::pass), "{:?}", table.checks);
        assert!(table.entries.iter().filter(|e| e.order > 0).all(|e| e.resolved()));
        assert!(smoothness_table(s, &traj, &st, 0.05005, 4).is_err());
        let mut wide = st;
        wide.lambda = 0.99 * st.r_time;
        assert!(matches!(
            smoothness_table(s, &traj, &wide, 0.05005, 3),
            Err(Error::Inadmissible { .. })
        ));
    }

    #[test]
    fn reports_are_deterministic() {
        let empty = make_report("empty", Vec::new());
        assert!(empty.passed());
        assert!(empty.checks().is_empty());
        let build = || {
            let g = Grid::new(1, 64).unwrap();
            let s = Spectral::new(g);
            let cut = CutoffProfile::new(0.15, 0.05, 0.01).unwrap();
            let r = cut.default_radius();
            let base = TruncatedTranslation::new(CenterChart::new(1, [PI, 0.0]), cut, [0.2 * r, 0.0], r).unwrap();
            let u = g.sample(|p| (2.0 * p[0]).cos());
            let c = formula_checks(&s, &u, &base, &[[0.1 * r, 0.0]], None).unwrap();
            make_report("formula", vec![ReportPart::Formula(c)])
        };
        assert_eq!(build(), build());
        let a = build();
        assert!(a.checks().iter().all(|c| c.tolerance.is_finite()));
    }

    #[test]
    fn check_verdicts() {
        assert!(Check::at_most("a", 1.0, 1.0).pass());
        assert!(!Check::at_most("a", f64::NAN, 1.0).pass());
        assert!(Check::at_least("b", 2.0, 1.9).pass());
        assert!(!Check::exact("c", 1e-300).pass());
        assert!(Check::exact("c", 0.0).pass());
    }
}
