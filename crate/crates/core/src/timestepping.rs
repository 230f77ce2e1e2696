//! Time integration shared by the flow solvers.
//!
//! Two schemes are available. `Rk4` is the classical explicit method. `Imex`
//! treats a frozen, Fourier-diagonal principal part `L = -c |k|^l` implicitly
//! and the remainder explicitly:
//!
//! ```text
//! (I - dt L) u1 = u0 + dt (f(u0) - L u0)
//! ```
//!
//! That step is first order. The integrator combines one full step with two
//! half steps and returns the extrapolated value `2 u_half - u_full`, which is
//! second order; the difference between the two doubles as the local error
//! estimate for step control.
//!
//! Step control is active only when `dt_min < dt_max`; otherwise every step
//! uses `dt` (the last one is shortened to land on the horizon).

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use num_traits::Float;

use crate::grid::Grid;
use crate::spectral::Spectral;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Rk4,
    Imex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub safety: f64,
    pub atol: f64,
    pub rtol: f64,
    pub max_steps: usize,
    /// Store every `save_every`-th accepted step (the final state is always stored).
    pub save_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Imex,
            dt: 1e-4,
            dt_min: 1e-9,
            dt_max: 1e-2,
            safety: 0.9,
            atol: 1e-9,
            rtol: 1e-7,
            max_steps: 200_000,
            save_every: 1,
        }
    }
}

impl SolverConfig {
    /// Fixed-step configuration.
    pub fn fixed(scheme: Scheme, dt: f64) -> Self {
        Self {
            scheme,
            dt,
            dt_min: dt,
            dt_max: dt,
            max_steps: usize::MAX,
            ..Self::default()
        }
    }

    pub fn with_save_every(mut self, k: usize) -> Self {
        self.save_every = k;
        self
    }

    pub fn adaptive(&self) -> bool {
        self.dt_min < self.dt_max
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt && self.dt <= self.dt_max) {
            return Err(Error::Config("need 0 < dt_min <= dt <= dt_max"));
        }
        if !(self.atol > 0.0 && self.rtol > 0.0) {
            return Err(Error::Config("tolerances must be positive"));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(Error::Config("safety factor must lie in (0, 1]"));
        }
        if self.max_steps == 0 || self.save_every == 0 {
            return Err(Error::Config("max_steps and save_every must be positive"));
        }
        Ok(())
    }
}

/// Frozen principal part `L = -coefficient * |k|^order`, applied to every component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrozenPrincipal {
    pub coefficient: f64,
    pub order: usize,
}

/// A semi-discrete evolution `u' = f(t, u)` on a periodic grid, with the state
/// stored component-major (`components` arrays of `grid.len()` values).
pub trait FlowSystem {
    fn grid(&self) -> Grid;
    fn components(&self) -> usize;
    fn rhs(&self, t: f64, u: &[f64]) -> Result<Vec<f64>>;
    /// Constant-coefficient principal part frozen at `u`.
    fn principal(&self, u: &[f64]) -> Result<FrozenPrincipal>;
    /// Inspects each accepted state; an error aborts the run.
    fn monitor(&self, _t: f64, _u: &[f64]) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMeta {
    pub flow: String,
    pub grid: Grid,
    pub components: usize,
    pub valence: [usize; 2],
}

/// Ordered snapshots with 6-point Lagrange dense output.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub meta: TrajectoryMeta,
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(meta: TrajectoryMeta) -> Self {
        Self {
            meta,
            times: Vec::new(),
            states: Vec::new(),
        }
    }

    /// Appends a snapshot; times must increase strictly.
    pub fn push(&mut self, t: f64, state: Vec<f64>) -> Result<()> {
        let expected = self.meta.components * self.meta.grid.len();
        if state.len() != expected {
            return Err(Error::Shape {
                expected,
                got: state.len(),
            });
        }
        if let Some(&last) = self.times.last() {
            if t <= last {
                return Err(Error::Config("snapshot times must increase strictly"));
            }
        }
        self.times.push(t);
        self.states.push(state);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn last(&self) -> &[f64] {
        &self.states[self.states.len() - 1]
    }

    /// Component `c` of snapshot `k`.
    pub fn component(&self, k: usize, c: usize) -> &[f64] {
        let m = self.meta.grid.len();
        &self.states[k][c * m..(c + 1) * m]
    }

    /// Applies `f` to every snapshot, keeping times and metadata.
    pub fn map_states(&self, mut f: impl FnMut(f64, &[f64]) -> Result<Vec<f64>>) -> Result<Self> {
        let mut out = Self::new(self.meta.clone());
        for (t, s) in self.times.iter().zip(&self.states) {
            out.push(*t, f(*t, s)?)?;
        }
        Ok(out)
    }

    /// State at time `t`; stored snapshots are returned exactly.
    pub fn dense_eval(&self, t: f64) -> Result<Vec<f64>> {
        if self.is_empty() || !(t >= self.start() && t <= self.end()) {
            return Err(Error::TimeOutOfRange {
                t,
                start: self.times.first().copied().unwrap_or(f64::NAN),
                end: self.times.last().copied().unwrap_or(f64::NAN),
            });
        }
        let k = self.times.partition_point(|&s| s < t);
        if k < self.len() && self.times[k] == t {
            return Ok(self.states[k].clone());
        }
        // t lies in (t_{k-1}, t_k)
        let seg = k - 1;
        let count = self.len().min(6);
        let first = seg.saturating_sub(2).min(self.len() - count);
        let nodes = &self.times[first..first + count];
        let mut out = alloc::vec![0.0; self.states[0].len()];
        for (a, &ta) in nodes.iter().enumerate() {
            let mut w = 1.0;
            for (b, &tb) in nodes.iter().enumerate() {
                if a != b {
                    w *= (t - tb) / (ta - tb);
                }
            }
            for (o, v) in out.iter_mut().zip(&self.states[first + a]) {
                *o += w * v;
            }
        }
        Ok(out)
    }

    /// Time derivative of the dense output (same 6-point stencil as
    /// [`Self::dense_eval`], using the segment to the left of a stored time).
    pub fn dense_derivative(&self, t: f64) -> Result<Vec<f64>> {
        if self.len() < 2 || !(t >= self.start() && t <= self.end()) {
            return Err(Error::TimeOutOfRange {
                t,
                start: self.times.first().copied().unwrap_or(f64::NAN),
                end: self.times.last().copied().unwrap_or(f64::NAN),
            });
        }
        let k = self.times.partition_point(|&s| s < t).max(1);
        let seg = k - 1;
        let count = self.len().min(6);
        let first = seg.saturating_sub(2).min(self.len() - count);
        let nodes = &self.times[first..first + count];
        let mut out = alloc::vec![0.0; self.states[0].len()];
        for (a, &ta) in nodes.iter().enumerate() {
            // d/dt prod_b (t - t_b)/(t_a - t_b)
            let mut w = 0.0;
            for (c, &tc) in nodes.iter().enumerate() {
                if c == a {
                    continue;
                }
                let mut term = 1.0 / (ta - tc);
                for (b, &tb) in nodes.iter().enumerate() {
                    if b != a && b != c {
                        term *= (t - tb) / (ta - tb);
                    }
                }
                w += term;
            }
            for (o, v) in out.iter_mut().zip(&self.states[first + a]) {
                *o += w * v;
            }
        }
        Ok(out)
    }
}

fn check_finite(t: f64, u: &[f64]) -> Result<()> {
    if u.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { t })
    }
}

fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(yi, xi)| yi + a * xi).collect()
}

/// Classical fourth-order Runge-Kutta step.
pub fn rk4_step(
    rhs: impl Fn(f64, &[f64]) -> Result<Vec<f64>>,
    t: f64,
    u: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    let k1 = rhs(t, u)?;
    let k2 = rhs(t + 0.5 * dt, &axpy(0.5 * dt, &k1, u))?;
    let k3 = rhs(t + 0.5 * dt, &axpy(0.5 * dt, &k2, u))?;
    let k4 = rhs(t + dt, &axpy(dt, &k3, u))?;
    let out: Vec<f64> = (0..u.len())
        .map(|i| u[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    check_finite(t + dt, &out)?;
    Ok(out)
}

/// `|k|^order` for FFT bin `idx`.
fn symbol_power(spectral: &Spectral, idx: usize, order: usize) -> f64 {
    let g = spectral.grid();
    let k2 = if g.dim() == 1 {
        let k = spectral.wavenumber(idx);
        k * k
    } else {
        let n = g.n();
        let (a, b) = (spectral.wavenumber(idx / n), spectral.wavenumber(idx % n));
        a * a + b * b
    };
    k2.powf(order as f64 / 2.0)
}

/// One IMEX Euler step `(I - dt L) u1 = u0 + dt (f(u0) - L u0)` with the
/// frozen principal part solved by Fourier-diagonal division.
pub fn imex_step(
    rhs: impl Fn(f64, &[f64]) -> Result<Vec<f64>>,
    spectral: &Spectral,
    principal: FrozenPrincipal,
    t: f64,
    u: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    if !(principal.coefficient > 0.0) || !principal.coefficient.is_finite() {
        return Err(Error::Ellipticity {
            value: principal.coefficient,
        });
    }
    let m = spectral.grid().len();
    let f = rhs(t, u)?;
    let mut out = Vec::with_capacity(u.len());
    for (uc, fc) in u.chunks(m).zip(f.chunks(m)) {
        let r: Vec<f64> = uc.iter().zip(fc).map(|(a, b)| a + dt * b).collect();
        let rhat = spectral.forward(&r);
        let uhat = spectral.forward(uc);
        let solved: Vec<Complex64> = rhat
            .iter()
            .zip(&uhat)
            .enumerate()
            .map(|(idx, (rh, uh))| {
                let s = dt * principal.coefficient * symbol_power(spectral, idx, principal.order);
                (rh + uh * s) / (1.0 + s)
            })
            .collect();
        out.extend(spectral.inverse_real(solved));
    }
    check_finite(t + dt, &out)?;
    Ok(out)
}

/// Largest stable explicit step for the frozen symbol `c |k|^l`, `k <= pi/h`.
pub fn stability_estimate(c: f64, h: f64, order: usize) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::Ellipticity { value: c });
    }
    Ok(2.0 / (c * (PI / h).powi(order as i32)))
}

/// One step of the configured scheme, returning the new state and a local
/// error estimate (`None` when no estimate was computed).
fn scheme_step<S: FlowSystem + ?Sized>(
    sys: &S,
    spectral: &Spectral,
    cfg: &SolverConfig,
    t: f64,
    u: &[f64],
    dt: f64,
) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let rhs = |s: f64, v: &[f64]| sys.rhs(s, v);
    match cfg.scheme {
        Scheme::Rk4 => {
            if !cfg.adaptive() {
                return Ok((rk4_step(rhs, t, u, dt)?, None));
            }
            let full = rk4_step(rhs, t, u, dt)?;
            let mid = rk4_step(rhs, t, u, 0.5 * dt)?;
            let half = rk4_step(rhs, t + 0.5 * dt, &mid, 0.5 * dt)?;
            let err = half.iter().zip(&full).map(|(a, b)| (a - b) / 15.0).collect();
            Ok((half, Some(err)))
        }
        Scheme::Imex => {
            let p = sys.principal(u)?;
            let full = imex_step(rhs, spectral, p, t, u, dt)?;
            let mid = imex_step(rhs, spectral, p, t, u, 0.5 * dt)?;
            let half = imex_step(rhs, spectral, p, t + 0.5 * dt, &mid, 0.5 * dt)?;
            let out = half.iter().zip(&full).map(|(a, b)| 2.0 * a - b).collect();
            let err = half.iter().zip(&full).map(|(a, b)| a - b).collect();
            Ok((out, Some(err)))
        }
    }
}

fn error_norm(cfg: &SolverConfig, err: &[f64], u0: &[f64], u1: &[f64]) -> f64 {
    err.iter()
        .zip(u0.iter().zip(u1))
        .map(|(e, (a, b))| e.abs() / (cfg.atol + cfg.rtol * a.abs().max(b.abs())))
        .fold(0.0, f64::max)
}

/// Integrates `sys` from `(t0, u0)` to `t_end`.
pub fn integrate<S: FlowSystem + ?Sized>(
    sys: &S,
    flow: &str,
    valence: [usize; 2],
    u0: Vec<f64>,
    t0: f64,
    t_end: f64,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    match integrate_partial(sys, flow, valence, u0, t0, t_end, cfg)? {
        (traj, None) => Ok(traj),
        (_, Some(e)) => Err(e),
    }
}

/// Like [`integrate`], but a failure after the start hands back the states
/// accepted so far (the last one always stored) together with the error.
/// Invalid configurations and initial states are still plain errors.
pub fn integrate_partial<S: FlowSystem + ?Sized>(
    sys: &S,
    flow: &str,
    valence: [usize; 2],
    u0: Vec<f64>,
    t0: f64,
    t_end: f64,
    cfg: &SolverConfig,
) -> Result<(Trajectory, Option<Error>)> {
    cfg.validate()?;
    if !(t_end > t0) {
        return Err(Error::Config("horizon must exceed the start time"));
    }
    let grid = sys.grid();
    let spectral = Spectral::new(grid);
    let mut traj = Trajectory::new(TrajectoryMeta {
        flow: flow.into(),
        grid,
        components: sys.components(),
        valence,
    });
    check_finite(t0, &u0)?;
    sys.monitor(t0, &u0)?;
    traj.push(t0, u0.clone())?;

    let order = match cfg.scheme {
        Scheme::Rk4 => 4.0,
        Scheme::Imex => 2.0,
    };
    let slack = 1e-12 * (t_end - t0).abs().max(1.0);
    let mut t = t0;
    let mut u = u0;
    let mut dt = cfg.dt;
    let mut accepted = 0usize;
    let mut saved_at = 0usize;
    let mut failure = None;
    while t < t_end - slack {
        if accepted >= cfg.max_steps {
            failure = Some(Error::MaxSteps {
                steps: accepted,
                t,
            });
            break;
        }
        let step = if t + dt > t_end - slack { t_end - t } else { dt };
        let (next, err) = match scheme_step(sys, &spectral, cfg, t, &u, step) {
            Ok(v) => v,
            Err(e) => {
                failure = Some(e);
                break;
            }
        };
        if cfg.adaptive() {
            let e = error_norm(cfg, err.as_deref().unwrap_or(&[]), &u, &next);
            if e > 1.0 {
                dt = 0.5 * step;
                if dt < cfg.dt_min {
                    failure = Some(Error::StepUnderflow { t, dt });
                    break;
                }
                continue;
            }
            let grow = if e == 0.0 {
                2.0
            } else {
                (cfg.safety * e.powf(-1.0 / (order + 1.0))).clamp(0.2, 2.0)
            };
            if step == dt {
                dt = (dt * grow).clamp(cfg.dt_min, cfg.dt_max);
            }
        }
        let t_next = if step == t_end - t { t_end } else { t + step };
        if let Err(e) = sys.monitor(t_next, &next) {
            failure = Some(e);
            break;
        }
        t = t_next;
        u = next;
        accepted += 1;
        if accepted % cfg.save_every == 0 || t >= t_end - slack {
            traj.push(t, u.clone())?;
            saved_at = accepted;
        }
    }
    if saved_at != accepted {
        traj.push(t, u)?;
    }
    Ok((traj, failure))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    /// Independent linear decay `u' = -a u` at every node.
    struct Decay {
        grid: Grid,
        a: f64,
    }

    impl FlowSystem for Decay {
        fn grid(&self) -> Grid {
            self.grid
        }
        fn components(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, u: &[f64]) -> Result<Vec<f64>> {
            Ok(u.iter().map(|v| -self.a * v).collect())
        }
        fn principal(&self, _u: &[f64]) -> Result<FrozenPrincipal> {
            Ok(FrozenPrincipal {
                coefficient: 1.0,
                order: 2,
            })
        }
    }

    /// Heat equation `u' = u_xx` on a periodic 1D grid.
    struct Heat {
        spectral: Spectral,
    }

    impl FlowSystem for Heat {
        fn grid(&self) -> Grid {
            self.spectral.grid()
        }
        fn components(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, u: &[f64]) -> Result<Vec<f64>> {
            Ok(self.spectral.derivative(u, [2, 0]))
        }
        fn principal(&self, _u: &[f64]) -> Result<FrozenPrincipal> {
            Ok(FrozenPrincipal {
                coefficient: 1.0,
                order: 2,
            })
        }
    }

    fn scalar(f: impl Fn(f64) -> f64) -> impl Fn(f64, &[f64]) -> Result<Vec<f64>> {
        move |_t, u: &[f64]| Ok(u.iter().map(|&v| f(v)).collect())
    }

    /// Decay that declares states below `floor` inadmissible.
    struct Floored {
        inner: Decay,
        floor: f64,
    }

    impl FlowSystem for Floored {
        fn grid(&self) -> Grid {
            self.inner.grid
        }
        fn components(&self) -> usize {
            1
        }
        fn rhs(&self, t: f64, u: &[f64]) -> Result<Vec<f64>> {
            self.inner.rhs(t, u)
        }
        fn principal(&self, u: &[f64]) -> Result<FrozenPrincipal> {
            self.inner.principal(u)
        }
        fn monitor(&self, t: f64, u: &[f64]) -> Result<()> {
            if u[0] < self.floor {
                return Err(Error::AdmissibilityExit { t, sup: u[0] });
            }
            Ok(())
        }
    }

    #[test]
    fn partial_integration_keeps_accepted_states() {
        let grid = Grid::new(1, 16).unwrap();
        let sys = Floored {
            inner: Decay { grid, a: 1.0 },
            floor: 0.5,
        };
        let cfg = SolverConfig::fixed(Scheme::Rk4, 0.01).with_save_every(7);
        let (traj, err) = integrate_partial(&sys, "decay", [0, 0], vec![1.0; 16], 0.0, 2.0, &cfg).unwrap();
        let err = err.unwrap();
        assert!(err.is_admissibility_exit());
        // exp(-t) crosses 1/2 at t = ln 2
        assert!((traj.end() - 0.69).abs() < 1e-9, "{}", traj.end());
        assert!(traj.last()[0] >= 0.5);
        assert!(matches!(
            integrate(&sys, "decay", [0, 0], vec![1.0; 16], 0.0, 2.0, &cfg),
            Err(Error::AdmissibilityExit { .. })
        ));
        let ok = integrate_partial(&sys, "decay", [0, 0], vec![1.0; 16], 0.0, 0.5, &cfg).unwrap();
        assert!(ok.1.is_none());
    }

    #[test]
    fn rk4_exponential_step() {
        let u = rk4_step(scalar(|v| -v), 0.0, &[1.0], 0.1).unwrap();
        assert!((u[0] - 0.9048375).abs() < 1e-12);
        let still = rk4_step(scalar(|_| 0.0), 0.0, &[0.3, -2.0], 0.5).unwrap();
        assert_eq!(still, vec![0.3, -2.0]);
    }

    #[test]
    fn rk4_global_error_is_fourth_order() {
        let err = |dt: f64| {
            let mut u = vec![1.0];
            let steps = (1.0 / dt).round() as usize;
            for k in 0..steps {
                u = rk4_step(scalar(|v| -v), k as f64 * dt, &u, dt).unwrap();
            }
            (u[0] - (-1.0f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn rk4_reports_non_finite() {
        let r = rk4_step(scalar(|_| f64::NAN), 0.0, &[1.0], 0.1);
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn imex_pure_principal_is_backward_euler() {
        let g = Grid::unchecked(1, 16);
        let s = Spectral::new(g);
        let u0 = g.sample(|p| (3.0 * p[0]).sin());
        let p = FrozenPrincipal {
            coefficient: 2.0,
            order: 2,
        };
        let dt = 0.05;
        let heat = |_t: f64, u: &[f64]| Ok(s.derivative(u, [2, 0]).iter().map(|v| 2.0 * v).collect());
        let u1 = imex_step(heat, &s, p, 0.0, &u0, dt).unwrap();
        let factor = 1.0 / (1.0 + dt * 2.0 * 9.0);
        for (a, b) in u1.iter().zip(&u0) {
            assert!((a - factor * b).abs() < 1e-14);
        }
    }

    #[test]
    fn imex_rejects_non_elliptic_coefficient() {
        let g = Grid::unchecked(1, 16);
        let s = Spectral::new(g);
        let p = FrozenPrincipal {
            coefficient: -1.0,
            order: 4,
        };
        let r = imex_step(scalar(|v| v), &s, p, 0.0, &[0.0; 16], 0.1);
        assert!(matches!(r, Err(Error::Ellipticity { value }) if value == -1.0));
    }

    #[test]
    fn stability_estimates() {
        let dt = stability_estimate(1.0, 2.0 * PI / 64.0, 2).unwrap();
        assert!((dt - 2.0 / 1024.0).abs() < 1e-15);
        let coarse = stability_estimate(1.0, 0.2, 4).unwrap();
        let fine = stability_estimate(1.0, 0.1, 4).unwrap();
        assert!((coarse / fine - 16.0).abs() < 1e-9);
        assert!(stability_estimate(0.0, 0.1, 2).is_err());
    }

    #[test]
    fn imex_extrapolation_is_second_order_on_heat() {
        let g = Grid::new(1, 16).unwrap();
        let heat = Heat {
            spectral: Spectral::new(g),
        };
        let u0 = g.sample(|p| p[0].sin() + 0.5 * (2.0 * p[0]).cos());
        let run = |dt: f64| {
            let traj = integrate(&heat, "heat", [0, 0], u0.clone(), 0.0, 0.2, &SolverConfig::fixed(Scheme::Imex, dt)).unwrap();
            let exact = g.sample(|p| (-0.2f64).exp() * p[0].sin() + 0.5 * (-0.8f64).exp() * (2.0 * p[0]).cos());
            traj.last().iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let order = (run(0.01) / run(0.005)).log2();
        assert!(order > 1.9, "order {order}");
    }

    #[test]
    fn imex_is_stable_far_beyond_the_explicit_limit() {
        let g = Grid::new(1, 64).unwrap();
        let heat = Heat {
            spectral: Spectral::new(g),
        };
        let limit = stability_estimate(1.0, g.spacing(), 2).unwrap();
        let u0 = g.sample(|p| (p[0]).sin() + 1e-3 * (31.0 * p[0]).cos());
        let cfg = SolverConfig::fixed(Scheme::Imex, 100.0 * limit);
        let traj = integrate(&heat, "heat", [0, 0], u0, 0.0, 1000.0 * limit, &cfg).unwrap();
        assert!(traj.last().iter().all(|v| v.abs() <= 1.0 + 1e-12));
    }

    #[test]
    fn adaptive_run_hits_horizon_within_tolerance() {
        let sys = Decay {
            grid: Grid::unchecked(1, 2),
            a: 1.0,
        };
        let cfg = SolverConfig {
            scheme: Scheme::Rk4,
            dt: 1e-3,
            ..SolverConfig::default()
        };
        let traj = integrate(&sys, "decay", [0, 0], vec![1.0, 2.0], 0.0, 1.0, &cfg).unwrap();
        assert_eq!(traj.end(), 1.0);
        assert!((traj.last()[0] - (-1.0f64).exp()).abs() < 1e-7);
        // far fewer steps than the fixed initial dt would take
        assert!(traj.len() < 200);
    }

    #[test]
    fn fixed_steps_store_requested_snapshots() {
        let sys = Decay {
            grid: Grid::unchecked(1, 2),
            a: 0.0,
        };
        let cfg = SolverConfig::fixed(Scheme::Rk4, 0.1).with_save_every(3);
        let traj = integrate(&sys, "decay", [0, 0], vec![1.0, 2.0], 0.0, 1.0, &cfg).unwrap();
        // t = 0, 0.3, 0.6, 0.9, 1.0
        assert_eq!(traj.len(), 5);
        assert_eq!(traj.last(), &[1.0, 2.0]);
    }

    #[test]
    fn max_steps_is_enforced() {
        let sys = Decay {
            grid: Grid::unchecked(1, 2),
            a: 1.0,
        };
        let mut cfg = SolverConfig::fixed(Scheme::Rk4, 0.01);
        cfg.max_steps = 5;
        let r = integrate(&sys, "decay", [0, 0], vec![1.0, 1.0], 0.0, 1.0, &cfg);
        assert!(matches!(r, Err(Error::MaxSteps { steps: 5, .. })));
    }

    fn synthetic(f: impl Fn(f64) -> f64, dt: f64, steps: usize) -> Trajectory {
        let mut traj = Trajectory::new(TrajectoryMeta {
            flow: "synthetic".into(),
            grid: Grid::unchecked(1, 2),
            components: 1,
            valence: [0, 0],
        });
        for k in 0..=steps {
            let t = k as f64 * dt;
            traj.push(t, vec![f(t), 2.0 * f(t)]).unwrap();
        }
        traj
    }

    #[test]
    fn dense_output_reproduces_nodes_and_polynomials() {
        let traj = synthetic(|t| 3.0 * t - 1.0, 0.1, 10);
        assert_eq!(traj.dense_eval(traj.times()[3]).unwrap(), traj.states()[3]);
        for t in [0.01, 0.47, 0.999] {
            let v = traj.dense_eval(t).unwrap();
            assert!((v[0] - (3.0 * t - 1.0)).abs() < 1e-13);
        }
        assert!(traj.dense_eval(1.01).is_err());
        assert!(traj.dense_eval(-1e-9).is_err());
    }

    #[test]
    fn dense_output_accuracy_and_continuity() {
        let traj = synthetic(f64::sin, 0.05, 40);
        let mid = traj.dense_eval(1.025).unwrap();
        assert!((mid[0] - 1.025f64.sin()).abs() < 1e-9);
        // one-sided derivatives at an interior node
        let (t, e) = (1.0, 1e-6);
        let left = (traj.dense_eval(t).unwrap()[0] - traj.dense_eval(t - e).unwrap()[0]) / e;
        let right = (traj.dense_eval(t + e).unwrap()[0] - traj.dense_eval(t).unwrap()[0]) / e;
        assert!((left - right).abs() < 1e-5);
    }

    #[test]
    fn dense_derivative_differentiates_the_interpolant() {
        let traj = synthetic(|t| t * t * t - 2.0 * t, 0.1, 10);
        for t in [0.0, 0.3, 0.47, 1.0] {
            let d = traj.dense_derivative(t).unwrap();
            assert!((d[0] - (3.0 * t * t - 2.0)).abs() < 1e-11, "{t}");
        }
        let traj = synthetic(f64::sin, 0.05, 40);
        assert!((traj.dense_derivative(1.013).unwrap()[0] - 1.013f64.cos()).abs() < 1e-7);
        assert!(traj.dense_derivative(2.5).is_err());
    }

    #[test]
    fn trajectory_rejects_bad_pushes() {
        let mut traj = synthetic(|t| t, 0.1, 2);
        assert!(traj.push(0.2, vec![0.0, 0.0]).is_err());
        assert!(matches!(traj.push(0.5, vec![0.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let mut c = SolverConfig::default();
        c.dt = 1.0;
        assert!(c.validate().is_err());
        c = SolverConfig::default();
        c.rtol = 0.0;
        assert!(c.validate().is_err());
    }
}
