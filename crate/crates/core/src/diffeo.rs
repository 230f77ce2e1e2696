//! Truncated translations and their action on fields.
//!
//! Around a center point `p` the `iota` chart uses coordinates
//! `y = wrap(x - p) / d` with dilation `d = pi`, so that the chart image is the
//! open unit box and the balls `B_i = B(0, i eps0)`, `i <= 5`, fit inside it.
//! In these coordinates
//!
//! ```text
//! theta_mu(y) = y + chi(y) mu,        chi = 1 on B_1, supp chi in B_2
//! ```
//!
//! and `Theta*_mu u = varsigma(Theta x) u(Theta x) + (1 - varsigma(x)) u(x)` with
//! `varsigma = 1` on `B_4`, `supp varsigma in B_5`. Off-grid values come from the
//! trigonometric interpolant, so pullbacks are exact for band-limited data and
//! spectrally accurate otherwise. Where `theta_mu(x) = x` the node value is
//! copied, which makes `Theta*_0` and the support identity exact.
//!
//! Fields are global node arrays, component-major. Scalar and componentwise
//! (vector-valued) pullbacks are composition only; [`TruncatedTranslation::pullback_tensor02`]
//! applies the Jacobian factors of a `(0,2)` tensor.
//!
//! The time warp `rho_lambda(t) = t + xi(t) lambda` uses its own temporal
//! cutoff `xi` (plateau `B(t0, tau)`, support `B(t0, 2 tau)`), since time and
//! space carry different units.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;

use crate::bump::{plateau, plateau_slope_bound, Jet};
use crate::grid::{wrap_centered, wrap_periodic, Grid, Point};
use crate::spectral::{Interpolant, Spectral};
use crate::timestepping::Trajectory;
use crate::{Error, Result};

/// Default radius unit.
pub const DEFAULT_EPSILON0: f64 = 0.15;
/// Dilation of the `iota` chart on `[0, 2pi)` grids.
pub const DEFAULT_DILATION: f64 = PI;

const INVERT_ITERATIONS: usize = 100;
const INVERT_TOLERANCE: f64 = 1e-13;

/// Spatial and temporal cutoffs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffProfile {
    pub epsilon0: f64,
    pub t0: f64,
    pub time_radius: f64,
    chi_slope: f64,
    xi_slope: f64,
}

impl CutoffProfile {
    pub fn new(epsilon0: f64, t0: f64, time_radius: f64) -> Result<Self> {
        if !(epsilon0 > 0.0 && 5.0 * epsilon0 < 1.0) {
            return Err(Error::Inadmissible {
                what: "5 eps0",
                value: 5.0 * epsilon0,
                bound: 1.0,
            });
        }
        if !(time_radius > 0.0) {
            return Err(Error::Config("temporal cutoff radius must be positive"));
        }
        Ok(Self {
            epsilon0,
            t0,
            time_radius,
            chi_slope: plateau_slope_bound(epsilon0, 2.0 * epsilon0),
            xi_slope: plateau_slope_bound(time_radius, 2.0 * time_radius),
        })
    }

    /// Radial profile of `chi`.
    pub fn chi_radial(&self, r: f64) -> Jet {
        plateau(r, self.epsilon0, 2.0 * self.epsilon0)
    }

    /// Radial profile of `varsigma`.
    pub fn varsigma_radial(&self, r: f64) -> Jet {
        plateau(r, 4.0 * self.epsilon0, 5.0 * self.epsilon0)
    }

    pub fn chi(&self, y: Point) -> f64 {
        self.chi_radial(norm(y)).value()
    }

    /// `grad chi` in `iota` coordinates.
    pub fn chi_grad(&self, y: Point) -> Point {
        let r = norm(y);
        if r <= self.epsilon0 || r >= 2.0 * self.epsilon0 {
            return [0.0, 0.0];
        }
        let d = self.chi_radial(r).derivative(1);
        [d * y[0] / r, d * y[1] / r]
    }

    pub fn varsigma(&self, y: Point) -> f64 {
        self.varsigma_radial(norm(y)).value()
    }

    /// Temporal cutoff `xi` and its derivatives in `t`.
    pub fn xi(&self, t: f64) -> Jet {
        let s = t - self.t0;
        let j = plateau(s.abs(), self.time_radius, 2.0 * self.time_radius);
        if s < 0.0 {
            // even extension: odd derivatives change sign
            let mut c = j.0;
            c[1] = -c[1];
            c[3] = -c[3];
            Jet(c)
        } else {
            j
        }
    }

    /// `sup |chi'|`.
    pub fn chi_slope(&self) -> f64 {
        self.chi_slope
    }

    /// `sup |xi'|`.
    pub fn xi_slope(&self) -> f64 {
        self.xi_slope
    }

    /// Spatial parameter radius: `r sup|chi'| = 1/4`.
    pub fn default_radius(&self) -> f64 {
        0.25 / self.chi_slope
    }

    /// Temporal parameter radius: `r sup|xi'| = 1/4`.
    pub fn default_time_radius(&self) -> f64 {
        0.25 / self.xi_slope
    }
}

fn norm(y: Point) -> f64 {
    (y[0] * y[0] + y[1] * y[1]).sqrt()
}

/// The recentred and dilated chart `y = wrap(x - center) / dilation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterChart {
    pub dim: usize,
    pub center: Point,
    pub dilation: f64,
}

impl CenterChart {
    pub fn new(dim: usize, center: Point) -> Self {
        Self {
            dim,
            center,
            dilation: DEFAULT_DILATION,
        }
    }

    pub fn to_local(&self, p: Point) -> Point {
        let mut y = [0.0; 2];
        for a in 0..self.dim {
            y[a] = wrap_centered(p[a] - self.center[a]) / self.dilation;
        }
        y
    }

    pub fn to_manifold(&self, y: Point) -> Point {
        let mut p = [0.0; 2];
        for a in 0..self.dim {
            p[a] = wrap_periodic(self.center[a] + self.dilation * y[a]);
        }
        p
    }
}

/// `theta_mu` on the `iota` chart together with its admissible radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedTranslation {
    pub chart: CenterChart,
    pub cutoffs: CutoffProfile,
    pub mu: Point,
    pub r: f64,
}

impl TruncatedTranslation {
    /// Checks `|mu| < r` and `r sup|chi'| < 1`.
    pub fn new(chart: CenterChart, cutoffs: CutoffProfile, mu: Point, r: f64) -> Result<Self> {
        let t = Self::unchecked(chart, cutoffs, mu, r);
        if !(r * cutoffs.chi_slope() < 1.0) {
            return Err(Error::Inadmissible {
                what: "r sup|chi'|",
                value: r * cutoffs.chi_slope(),
                bound: 1.0,
            });
        }
        if !(t.mu_norm() < r) {
            return Err(Error::Inadmissible {
                what: "|mu|",
                value: t.mu_norm(),
                bound: r,
            });
        }
        Ok(t)
    }

    /// No admissibility checks; used to exercise failure reporting.
    pub fn unchecked(chart: CenterChart, cutoffs: CutoffProfile, mu: Point, r: f64) -> Self {
        let mut mu = mu;
        for m in mu.iter_mut().skip(chart.dim) {
            *m = 0.0;
        }
        Self {
            chart,
            cutoffs,
            mu,
            r,
        }
    }

    pub fn mu_norm(&self) -> f64 {
        norm(self.mu)
    }

    /// Same translation with another parameter (no checks).
    pub fn with_mu(&self, mu: Point) -> Self {
        Self::unchecked(self.chart, self.cutoffs, mu, self.r)
    }

    /// `theta_mu(y) = y + chi(y) mu` in `iota` coordinates.
    pub fn theta_apply(&self, y: Point) -> Point {
        let c = self.cutoffs.chi(y);
        [y[0] + c * self.mu[0], y[1] + c * self.mu[1]]
    }

    /// Solves `theta_mu(x) = y` by the contraction `x <- y - chi(x) mu`.
    pub fn theta_invert(&self, y: Point) -> Result<Point> {
        let mut x = y;
        for _ in 0..INVERT_ITERATIONS {
            let c = self.cutoffs.chi(x);
            x = [y[0] - c * self.mu[0], y[1] - c * self.mu[1]];
            let t = self.theta_apply(x);
            if norm([t[0] - y[0], t[1] - y[1]]) <= INVERT_TOLERANCE {
                return Ok(x);
            }
        }
        Err(Error::NoConvergence {
            iterations: INVERT_ITERATIONS,
        })
    }

    /// `D theta_mu = I + mu (grad chi)^T`; the dilation cancels, so this is
    /// also the Jacobian of `Theta_mu` in manifold coordinates.
    pub fn jacobian(&self, y: Point) -> [[f64; 2]; 2] {
        let g = self.cutoffs.chi_grad(y);
        let mut j = [[0.0; 2]; 2];
        for (a, row) in j.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v = if a == b { 1.0 } else { 0.0 } + self.mu[a] * g[b];
            }
        }
        j
    }

    /// `Theta_mu` on the manifold; points with `theta_mu(y) = y` are returned unchanged.
    pub fn manifold_map(&self, p: Point) -> Point {
        let y = self.chart.to_local(p);
        let t = self.theta_apply(y);
        if t == y {
            p
        } else {
            self.chart.to_manifold(t)
        }
    }

    pub fn manifold_inverse(&self, p: Point) -> Result<Point> {
        let y = self.chart.to_local(p);
        let x = self.theta_invert(y)?;
        Ok(if x == y { p } else { self.chart.to_manifold(x) })
    }

    fn check_grid(&self, grid: Grid, len: usize) -> Result<usize> {
        if grid.dim() != self.chart.dim || len % grid.len() != 0 {
            return Err(Error::Shape {
                expected: grid.len(),
                got: len,
            });
        }
        Ok(len / grid.len())
    }

    /// Scalar pullback `Theta*_mu u`.
    pub fn pullback_scalar(&self, spectral: &Spectral, u: &[f64]) -> Result<Vec<f64>> {
        self.pullback_components(spectral, u)
    }

    /// Componentwise pullback of a vector-valued field (component-major).
    pub fn pullback_components(&self, spectral: &Spectral, u: &[f64]) -> Result<Vec<f64>> {
        let grid = spectral.grid();
        let comps = self.check_grid(grid, u.len())?;
        let m = grid.len();
        let mut out = u.to_vec();
        for c in 0..comps {
            let uc = &u[c * m..(c + 1) * m];
            let mut interp: Option<Interpolant> = None;
            for i in 0..m {
                let p = grid.point(i);
                let y = self.chart.to_local(p);
                let ty = self.theta_apply(y);
                if ty == y {
                    continue;
                }
                let it = interp.get_or_insert_with(|| spectral.interpolant(uc));
                let q = self.chart.to_manifold(ty);
                let s_q = self.cutoffs.varsigma(ty);
                let s_p = self.cutoffs.varsigma(y);
                out[c * m + i] = s_q * it.eval(q) + (1.0 - s_p) * uc[i];
            }
        }
        Ok(out)
    }

    /// Pullback of a symmetric `(0,2)` tensor with components `[a11, a12, a22]`
    /// (2D) or `[a11]` (1D): `(Theta* a)_ij = a_kl(theta x) D_i theta^k D_j theta^l`.
    pub fn pullback_tensor02(&self, spectral: &Spectral, a: &[f64]) -> Result<Vec<f64>> {
        let grid = spectral.grid();
        let m = grid.len();
        let expected = if grid.dim() == 1 { m } else { 3 * m };
        if a.len() != expected || grid.dim() != self.chart.dim {
            return Err(Error::Shape {
                expected,
                got: a.len(),
            });
        }
        let moved = self.pullback_components(spectral, a)?;
        let mut out = a.to_vec();
        for i in 0..m {
            let y = self.chart.to_local(grid.point(i));
            if self.theta_apply(y) == y {
                continue;
            }
            let j = self.jacobian(y);
            if grid.dim() == 1 {
                out[i] = moved[i] * j[0][0] * j[0][0];
            } else {
                let t = [
                    [moved[i], moved[m + i]],
                    [moved[m + i], moved[2 * m + i]],
                ];
                let c = congruence(&t, &j);
                out[i] = c[0][0];
                out[m + i] = c[0][1];
                out[2 * m + i] = c[1][1];
            }
        }
        Ok(out)
    }

    /// Componentwise pushforward `Theta^mu_* v = v o Theta_mu^{-1}`.
    pub fn pushforward_components(&self, spectral: &Spectral, v: &[f64]) -> Result<Vec<f64>> {
        let grid = spectral.grid();
        let comps = self.check_grid(grid, v.len())?;
        let m = grid.len();
        // preimages are shared by all components
        let mut pre: Vec<Option<Point>> = Vec::with_capacity(m);
        for i in 0..m {
            let y = self.chart.to_local(grid.point(i));
            let x = self.theta_invert(y)?;
            pre.push(if x == y { None } else { Some(self.chart.to_manifold(x)) });
        }
        let mut out = v.to_vec();
        for c in 0..comps {
            let vc = &v[c * m..(c + 1) * m];
            let mut interp: Option<Interpolant> = None;
            for (i, q) in pre.iter().enumerate() {
                if let Some(q) = q {
                    let it = interp.get_or_insert_with(|| spectral.interpolant(vc));
                    out[c * m + i] = it.eval(*q);
                }
            }
        }
        Ok(out)
    }

    pub fn pushforward_scalar(&self, spectral: &Spectral, v: &[f64]) -> Result<Vec<f64>> {
        self.pushforward_components(spectral, v)
    }

    /// Pushforward of a symmetric `(0,2)` tensor: the inverse of
    /// [`Self::pullback_tensor02`].
    pub fn pushforward_tensor02(&self, spectral: &Spectral, a: &[f64]) -> Result<Vec<f64>> {
        let grid = spectral.grid();
        let m = grid.len();
        let moved = self.pushforward_components(spectral, a)?;
        let mut out = moved.clone();
        for i in 0..m {
            let y = self.chart.to_local(grid.point(i));
            let x = self.theta_invert(y)?;
            if x == y {
                continue;
            }
            let j = inverse2(&self.jacobian(x));
            if grid.dim() == 1 {
                out[i] = moved[i] * j[0][0] * j[0][0];
            } else {
                let t = [
                    [moved[i], moved[m + i]],
                    [moved[m + i], moved[2 * m + i]],
                ];
                let c = congruence(&t, &j);
                out[i] = c[0][0];
                out[m + i] = c[0][1];
                out[2 * m + i] = c[1][1];
            }
        }
        Ok(out)
    }

    /// `d^alpha_mu [Theta*_mu u] = chi^{|alpha|} theta*_mu d^alpha (varsigma u)`,
    /// with `iota`-coordinate derivatives (`d_y = d * d_x`).
    pub fn param_derivative(&self, spectral: &Spectral, u: &[f64], alpha: [usize; 2]) -> Result<Vec<f64>> {
        let order = alpha[0] + alpha[1];
        if order > 3 {
            return Err(Error::Order(order));
        }
        if order == 0 {
            return self.pullback_components(spectral, u);
        }
        let grid = spectral.grid();
        let comps = self.check_grid(grid, u.len())?;
        let m = grid.len();
        let scale = self.chart.dilation.powi(order as i32);
        let mut out = vec![0.0; u.len()];
        for c in 0..comps {
            let it = spectral.interpolant(&u[c * m..(c + 1) * m]);
            for i in 0..m {
                let y = self.chart.to_local(grid.point(i));
                let chi = self.cutoffs.chi(y);
                if chi == 0.0 {
                    continue;
                }
                let q = self.chart.to_manifold(self.theta_apply(y));
                out[c * m + i] = chi.powi(order as i32) * scale * it.eval_derivative(q, alpha);
            }
        }
        Ok(out)
    }

    /// `A_mu = Theta*_mu A Theta^mu_*` for a field map `A`.
    pub fn conjugate_operator<'a, A>(
        &'a self,
        spectral: &'a Spectral,
        a: A,
    ) -> impl Fn(&[f64]) -> Result<Vec<f64>> + 'a
    where
        A: Fn(&[f64]) -> Result<Vec<f64>> + 'a,
    {
        move |v| {
            let w = self.pushforward_components(spectral, v)?;
            self.pullback_components(spectral, &a(&w)?)
        }
    }
}

/// `J^T A J`.
fn congruence(a: &[[f64; 2]; 2], j: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (jj, v) in row.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in 0..2 {
                for l in 0..2 {
                    s += a[k][l] * j[k][i] * j[l][jj];
                }
            }
            *v = s;
        }
    }
    out
}

fn inverse2(j: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    [
        [j[1][1] / det, -j[0][1] / det],
        [-j[1][0] / det, j[0][0] / det],
    ]
}

/// Time warp and spatial translation combined:
/// `u_{lambda,mu}(t) = T_mu(t) u(rho_lambda(t))`, `T_mu(t) = Theta*_{xi(t) mu}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSpaceTranslation {
    pub space: TruncatedTranslation,
    pub lambda: f64,
    pub interval: [f64; 2],
    pub r_time: f64,
}

impl TimeSpaceTranslation {
    /// Checks `|lambda| < r_time`, `r_time sup|xi'| < 1` and `supp xi` inside the interval.
    pub fn new(space: TruncatedTranslation, lambda: f64, interval: [f64; 2], r_time: f64) -> Result<Self> {
        let c = &space.cutoffs;
        if !(r_time * c.xi_slope() < 1.0) {
            return Err(Error::Inadmissible {
                what: "r_time sup|xi'|",
                value: r_time * c.xi_slope(),
                bound: 1.0,
            });
        }
        if !(lambda.abs() < r_time) {
            return Err(Error::Inadmissible {
                what: "|lambda|",
                value: lambda.abs(),
                bound: r_time,
            });
        }
        if !(c.t0 - 2.0 * c.time_radius > interval[0] && c.t0 + 2.0 * c.time_radius < interval[1]) {
            return Err(Error::Config("temporal cutoff support must lie inside the interval"));
        }
        Ok(Self {
            space,
            lambda,
            interval,
            r_time,
        })
    }

    pub fn xi(&self, t: f64) -> Jet {
        self.space.cutoffs.xi(t)
    }

    /// `rho_lambda(t) = t + xi(t) lambda`.
    pub fn time_warp(&self, t: f64) -> f64 {
        let x = self.xi(t).value();
        if x == 0.0 {
            t
        } else {
            t + x * self.lambda
        }
    }

    /// `rho_lambda'(t) = 1 + xi'(t) lambda`.
    pub fn warp_rate(&self, t: f64) -> f64 {
        1.0 + self.xi(t).derivative(1) * self.lambda
    }

    /// `T_mu(t)`: the spatial translation with parameter `xi(t) mu`.
    pub fn translation_at(&self, t: f64) -> TruncatedTranslation {
        let x = self.xi(t).value();
        self.space.with_mu([x * self.space.mu[0], x * self.space.mu[1]])
    }

    /// `u_{lambda,mu}(t)` from the dense output of `traj`; snapshots outside
    /// `supp xi` are returned bit-for-bit.
    pub fn eval(&self, spectral: &Spectral, traj: &Trajectory, t: f64) -> Result<Vec<f64>> {
        let w = traj.dense_eval(self.time_warp(t))?;
        let x = self.xi(t).value();
        if x == 0.0 || self.space.mu == [0.0, 0.0] {
            return Ok(w);
        }
        self.translation_at(t).pullback_components(spectral, &w)
    }

    /// The transformed trajectory on the stored time grid.
    pub fn time_space_pullback(&self, spectral: &Spectral, traj: &Trajectory) -> Result<Trajectory> {
        traj.map_states(|t, _| self.eval(spectral, traj, t))
    }

    /// `B_{lambda,mu}(v)(t) = xi'(t) chi mu . grad_iota w (theta x)` with
    /// `w = T_mu(t)^{-1} v`.
    pub fn b_operator(&self, spectral: &Spectral, v: &[f64], t: f64) -> Result<Vec<f64>> {
        if self.vanishing_b(t) {
            return Ok(vec![0.0; v.len()]);
        }
        let w = self.translation_at(t).pushforward_components(spectral, v)?;
        self.b_operator_from_preimage(spectral, &w, t)
    }

    /// [`Self::b_operator`] given `w = T_mu(t)^{-1} v` directly.
    pub fn b_operator_from_preimage(&self, spectral: &Spectral, w: &[f64], t: f64) -> Result<Vec<f64>> {
        if self.vanishing_b(t) {
            return Ok(vec![0.0; w.len()]);
        }
        let grid = spectral.grid();
        let tr = self.translation_at(t);
        let comps = tr.check_grid(grid, w.len())?;
        let m = grid.len();
        let dxi = self.xi(t).derivative(1);
        let d = tr.chart.dilation;
        let mut out = vec![0.0; w.len()];
        for c in 0..comps {
            let it = spectral.interpolant(&w[c * m..(c + 1) * m]);
            for i in 0..m {
                let y = tr.chart.to_local(grid.point(i));
                let chi = tr.cutoffs.chi(y);
                if chi == 0.0 {
                    continue;
                }
                let q = tr.chart.to_manifold(tr.theta_apply(y));
                let mut s = 0.0;
                for j in 0..grid.dim() {
                    let mut o = [0, 0];
                    o[j] = 1;
                    s += self.space.mu[j] * d * it.eval_derivative(q, o);
                }
                out[c * m + i] = dxi * chi * s;
            }
        }
        Ok(out)
    }

    fn vanishing_b(&self, t: f64) -> bool {
        self.space.mu == [0.0, 0.0] || self.xi(t).derivative(1) == 0.0
    }
}

/// Outcome of the sampled (T1)-(T3) checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranslationReport {
    pub samples: usize,
    /// `theta_mu(B3)` inside `B3`.
    pub t1: bool,
    pub t1_max_radius: f64,
    /// Estimated Lipschitz constant `gamma`.
    pub gamma: f64,
    pub t2: bool,
    pub min_jacobian_det: f64,
    pub inversion_error: f64,
    pub t3: bool,
}

impl TranslationReport {
    pub fn all_pass(&self) -> bool {
        self.t1 && self.t2 && self.t3
    }
}

/// Radical inverse of `i` in `base` (Halton sequence).
fn halton(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Deterministic quasi-random samples of the closed ball of radius `radius`.
pub fn ball_samples(dim: usize, radius: f64, count: usize) -> Vec<Point> {
    (1..=count)
        .map(|i| {
            if dim == 1 {
                [radius * (2.0 * halton(i, 2) - 1.0), 0.0]
            } else {
                let rr = radius * halton(i, 2).sqrt();
                let a = 2.0 * PI * halton(i, 3);
                [rr * a.cos(), rr * a.sin()]
            }
        })
        .collect()
}

/// Samples (T1) on `B3`, estimates `gamma` in (T2), and checks (T3) through the
/// sign of `det D theta_mu` and the inversion round trip. Failures are reported,
/// not raised.
pub fn verify_translation_properties(t: &TruncatedTranslation) -> TranslationReport {
    let e = t.cutoffs.epsilon0;
    let samples = 10_000;
    let pts = ball_samples(t.chart.dim, 3.0 * e, samples);
    let mut t1_max = 0.0f64;
    let mut gamma = 0.0f64;
    let mut min_det = f64::INFINITY;
    let mut inv_err = 0.0f64;
    let mut inverted = true;
    let mut prev: Option<(Point, Point)> = None;
    for &x in &pts {
        let tx = t.theta_apply(x);
        t1_max = t1_max.max(norm(tx));
        if let Some((px, ptx)) = prev {
            let dx = norm([x[0] - px[0], x[1] - px[1]]);
            if dx > 0.0 {
                gamma = gamma.max(norm([tx[0] - ptx[0], tx[1] - ptx[1]]) / dx);
            }
        }
        prev = Some((x, tx));
        let j = t.jacobian(x);
        let det = if t.chart.dim == 1 {
            j[0][0]
        } else {
            j[0][0] * j[1][1] - j[0][1] * j[1][0]
        };
        min_det = min_det.min(det);
        match t.theta_invert(tx) {
            Ok(back) => inv_err = inv_err.max(norm([back[0] - x[0], back[1] - x[1]])),
            Err(_) => inverted = false,
        }
    }
    if t.mu == [0.0, 0.0] {
        gamma = 1.0;
    }
    let lipschitz_bound = 1.0 + t.mu_norm() * t.cutoffs.chi_slope();
    TranslationReport {
        samples,
        t1: t1_max <= 3.0 * e,
        t1_max_radius: t1_max,
        gamma,
        t2: gamma.is_finite() && gamma <= lipschitz_bound + 1e-12,
        min_jacobian_det: min_det,
        inversion_error: if inverted { inv_err } else { f64::INFINITY },
        t3: min_det > 0.0 && inverted && inv_err <= 1e-12,
    }
}
