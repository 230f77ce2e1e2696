//! Ricci-DeTurck flow on the flat torus and its correspondence with Ricci flow.
//!
//! States are metrics `[g11 | g12 | g22]` on the global `n x n` grid of `T^2`,
//! component-major, differentiated spectrally. The flow is
//!
//! ```text
//! d_t g = Q(g) = -2 Rc(g) + L_W g,     W^k = g^{pq} (Gamma^k_pq - Gamma~^k_pq)
//! ```
//!
//! with principal part `g^{kl} d_kl g_ij`; the remainder `S(g)` is whatever is
//! left after subtracting it. A solution `g^` of this flow is turned into a Ricci
//! flow by pulling back along `d_t phi = -W(t, phi)`, `phi_0 = id`.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::atlas::{christoffel_local, ricci_local, sym2_eigenvalues, Christoffel, LocalMetric};
use crate::grid::{wrap_periodic, Grid, Point};
use crate::spectral::{lagrange_periodic, Spectral};
use crate::timestepping::{integrate, FlowSystem, FrozenPrincipal, SolverConfig, Trajectory, TrajectoryMeta};
use crate::{Error, Result};

/// Smallest eigenvalue tolerated along a run.
pub const POSITIVITY_FLOOR: f64 = 1e-6;

/// Amplitude of the off-diagonal perturbation `g12 = amp sin x` used as
/// non-conformal test data.
pub const NON_CONFORMAL_AMPLITUDE: f64 = 0.05;

type Sym = [Vec<f64>; 3];

/// `Q(g)` together with its split into principal part and remainder.
#[derive(Debug, Clone, PartialEq)]
pub struct QEvaluation {
    pub q: Sym,
    pub principal: Sym,
    pub remainder: Sym,
}

/// Ricci-DeTurck flow with a fixed background metric.
#[derive(Debug, Clone)]
pub struct DeTurckSystem {
    spectral: Spectral,
    background: LocalMetric,
    background_gamma: Christoffel,
}

impl DeTurckSystem {
    /// Flat background `delta` on the `n x n` torus grid.
    pub fn flat(n: usize) -> Result<Self> {
        let m = n * n;
        Self::with_background(n, [vec![1.0; m], vec![0.0; m], vec![1.0; m]])
    }

    pub fn with_background(n: usize, background: Sym) -> Result<Self> {
        let grid = Grid::new(2, n)?;
        let spectral = Spectral::new(grid);
        for c in &background {
            if c.len() != grid.len() {
                return Err(Error::Shape {
                    expected: grid.len(),
                    got: c.len(),
                });
            }
        }
        let background = LocalMetric::new(background)?;
        let background_gamma = christoffel_local(&spectral, &background);
        Ok(Self {
            spectral,
            background,
            background_gamma,
        })
    }

    pub fn grid(&self) -> Grid {
        self.spectral.grid()
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    pub fn background(&self) -> &LocalMetric {
        &self.background
    }

    /// Splits a flat state into metric components.
    pub fn metric(&self, state: &[f64]) -> Result<LocalMetric> {
        LocalMetric::new(split3(self.grid(), state)?)
    }

    /// `W^k = g^{pq} (Gamma^k_pq - Gamma~^k_pq)`.
    pub fn deturck_field(&self, g: &LocalMetric) -> [Vec<f64>; 2] {
        let gam = christoffel_local(&self.spectral, g);
        deturck_from_christoffel(g, &gam, &self.background_gamma)
    }

    pub fn ricci(&self, g: &LocalMetric) -> Sym {
        ricci_local(&self.spectral, g)
    }

    /// `g^{kl} d_kl g_ij`.
    pub fn principal_part(&self, g: &LocalMetric) -> Sym {
        let m = g.g[0].len();
        core::array::from_fn(|c| {
            let d = self.spectral.derivatives(&g.g[c], &[[2, 0], [1, 1], [0, 2]]);
            (0..m)
                .map(|p| g.inv[0][p] * d[0][p] + 2.0 * g.inv[1][p] * d[1][p] + g.inv[2][p] * d[2][p])
                .collect()
        })
    }

    pub fn q(&self, g: &LocalMetric) -> QEvaluation {
        let rc = self.ricci(g);
        let w = self.deturck_field(g);
        let lie = lie_derivative_metric(&self.spectral, &w, &g.g);
        let q: Sym = core::array::from_fn(|c| {
            rc[c].iter().zip(&lie[c]).map(|(r, l)| -2.0 * r + l).collect()
        });
        let principal = self.principal_part(g);
        let remainder = core::array::from_fn(|c| {
            q[c].iter().zip(&principal[c]).map(|(a, b)| a - b).collect()
        });
        QEvaluation {
            q,
            principal,
            remainder,
        }
    }

    /// `Q(g)` as a flat state.
    pub fn q_rhs(&self, state: &[f64]) -> Result<Vec<f64>> {
        let g = self.metric(state)?;
        Ok(join3(self.q(&g).q))
    }

    /// Time derivative of the DeTurck field trajectory `W(g(t))`.
    pub fn deturck_trajectory(&self, traj: &Trajectory) -> Result<Trajectory> {
        let mut out = Trajectory::new(TrajectoryMeta {
            flow: "deturck-field".into(),
            grid: self.grid(),
            components: 2,
            valence: [1, 0],
        });
        for (t, s) in traj.times().iter().zip(traj.states()) {
            let w = self.deturck_field(&self.metric(s)?);
            let mut flat = w[0].clone();
            flat.extend_from_slice(&w[1]);
            out.push(*t, flat)?;
        }
        Ok(out)
    }
}

impl FlowSystem for DeTurckSystem {
    fn grid(&self) -> Grid {
        self.spectral.grid()
    }

    fn components(&self) -> usize {
        3
    }

    fn rhs(&self, _t: f64, u: &[f64]) -> Result<Vec<f64>> {
        self.q_rhs(u)
    }

    /// `max_nodes lambda_max(g^{-1})`, order 2.
    fn principal(&self, u: &[f64]) -> Result<FrozenPrincipal> {
        let g = split3(self.grid(), u)?;
        let mut coefficient = 0.0f64;
        for p in 0..g[0].len() {
            let (lo, _) = sym2_eigenvalues(g[0][p], g[1][p], g[2][p]);
            if !(lo > 0.0) {
                return Err(Error::Ellipticity { value: lo });
            }
            coefficient = coefficient.max(1.0 / lo);
        }
        Ok(FrozenPrincipal {
            coefficient,
            order: 2,
        })
    }

    fn monitor(&self, t: f64, u: &[f64]) -> Result<()> {
        let min_eig = min_eigenvalue(self.grid(), u)?;
        if !(min_eig >= POSITIVITY_FLOOR) {
            return Err(Error::PositivityLost { t, min_eig });
        }
        Ok(())
    }
}

/// Smallest eigenvalue over all nodes of a flat metric state.
pub fn min_eigenvalue(grid: Grid, state: &[f64]) -> Result<f64> {
    let g = split3(grid, state)?;
    Ok((0..g[0].len())
        .map(|p| sym2_eigenvalues(g[0][p], g[1][p], g[2][p]).0)
        .fold(f64::INFINITY, f64::min))
}

fn deturck_from_christoffel(g: &LocalMetric, gam: &Christoffel, bg: &Christoffel) -> [Vec<f64>; 2] {
    let m = g.g[0].len();
    core::array::from_fn(|k| {
        (0..m)
            .map(|p| {
                let mut s = 0.0;
                for a in 0..2 {
                    for b in 0..2 {
                        s += g.inv_at(a, b)[p] * (gam[k][a][b][p] - bg[k][a][b][p]);
                    }
                }
                s
            })
            .collect()
    })
}

/// `(L_W g)_ij = W^k d_k g_ij + g_kj d_i W^k + g_ik d_j W^k`, as `[11, 12, 22]`.
pub fn lie_derivative_metric(spectral: &Spectral, w: &[Vec<f64>; 2], g: &Sym) -> Sym {
    let m = g[0].len();
    let dg: [[Vec<f64>; 2]; 3] = core::array::from_fn(|c| {
        [spectral.derivative(&g[c], [1, 0]), spectral.derivative(&g[c], [0, 1])]
    });
    let dw: [[Vec<f64>; 2]; 2] = core::array::from_fn(|k| {
        [spectral.derivative(&w[k], [1, 0]), spectral.derivative(&w[k], [0, 1])]
    });
    let pairs = [(0usize, 0usize), (0, 1), (1, 1)];
    core::array::from_fn(|c| {
        let (i, j) = pairs[c];
        (0..m)
            .map(|p| {
                let mut s = 0.0;
                for k in 0..2 {
                    s += w[k][p] * dg[c][k][p];
                    s += g[k + j][p] * dw[k][i][p];
                    s += g[i + k][p] * dw[k][j][p];
                }
                s
            })
            .collect()
    })
}

fn split3(grid: Grid, state: &[f64]) -> Result<Sym> {
    let m = grid.len();
    if state.len() != 3 * m {
        return Err(Error::Shape {
            expected: 3 * m,
            got: state.len(),
        });
    }
    Ok(core::array::from_fn(|c| state[c * m..(c + 1) * m].to_vec()))
}

fn join3(g: Sym) -> Vec<f64> {
    let [a, b, c] = g;
    let mut out = a;
    out.extend(b);
    out.extend(c);
    out
}

/// `g = e^{2u} delta` as a flat state.
pub fn conformal_metric(u: &[f64]) -> Vec<f64> {
    let e: Vec<f64> = u.iter().map(|v| (2.0 * v).exp()).collect();
    join3([e.clone(), vec![0.0; u.len()], e])
}

/// `g11 = g22 = 1`, `g12 = amp sin x`.
pub fn non_conformal_metric(grid: Grid, amp: f64) -> Vec<f64> {
    let m = grid.len();
    join3([vec![1.0; m], grid.sample(|p| amp * p[0].sin()), vec![1.0; m]])
}

/// Runs the Ricci-DeTurck flow from `g0` (flat state) to `t_end`.
pub fn solve_ricci_deturck(sys: &DeTurckSystem, g0: &[f64], t_end: f64, cfg: &SolverConfig) -> Result<Trajectory> {
    let min_eig = min_eigenvalue(sys.grid(), g0)?;
    if !(min_eig >= POSITIVITY_FLOOR) {
        return Err(Error::PositivityLost { t: 0.0, min_eig });
    }
    integrate(sys, "ricci-deturck", [0, 2], g0.to_vec(), 0.0, t_end, cfg)
}

/// `u_t = e^{-2u} Delta u`, the conformal factor of a Ricci flow `e^{2u} delta`.
#[derive(Debug, Clone)]
pub struct ConformalFlow {
    spectral: Spectral,
}

impl ConformalFlow {
    pub fn new(n: usize) -> Result<Self> {
        Ok(Self {
            spectral: Spectral::new(Grid::new(2, n)?),
        })
    }
}

impl FlowSystem for ConformalFlow {
    fn grid(&self) -> Grid {
        self.spectral.grid()
    }

    fn components(&self) -> usize {
        1
    }

    fn rhs(&self, _t: f64, u: &[f64]) -> Result<Vec<f64>> {
        let d = self.spectral.derivatives(u, &[[2, 0], [0, 2]]);
        Ok((0..u.len()).map(|p| (-2.0 * u[p]).exp() * (d[0][p] + d[1][p])).collect())
    }

    fn principal(&self, u: &[f64]) -> Result<FrozenPrincipal> {
        let coefficient = u.iter().map(|v| (-2.0 * v).exp()).fold(0.0, f64::max);
        Ok(FrozenPrincipal {
            coefficient,
            order: 2,
        })
    }
}

/// Spectral resampling of a 2D periodic field onto an `n_to x n_to` grid.
pub fn resample(from: &Spectral, f: &[f64], n_to: usize) -> Result<Vec<f64>> {
    let to = Grid::new(2, n_to)?;
    let it = from.interpolant(f);
    Ok(to.sample(|p| it.eval(p)))
}

/// Keeps every other node along each axis.
pub fn restrict_to_half(grid: Grid, f: &[f64]) -> Vec<f64> {
    let n = grid.n();
    let mut out = Vec::with_capacity(n * n / 4);
    for i0 in (0..n).step_by(2) {
        for i1 in (0..n).step_by(2) {
            out.push(f[grid.index(i0, i1)]);
        }
    }
    out
}

/// Solves the scalar conformal flow at doubled resolution; the result lives on
/// the `2n` grid (see [`restrict_to_half`]).
pub fn conformal_oracle(u0: &[f64], n: usize, t_end: f64, cfg: &SolverConfig) -> Result<Trajectory> {
    let coarse = Spectral::new(Grid::new(2, n)?);
    if u0.len() != coarse.grid().len() {
        return Err(Error::Shape {
            expected: coarse.grid().len(),
            got: u0.len(),
        });
    }
    let fine = resample(&coarse, u0, 2 * n)?;
    let sys = ConformalFlow::new(2 * n)?;
    integrate(&sys, "conformal-oracle", [0, 0], fine, 0.0, t_end, cfg)
}

/// Particle positions `h(t)(x)` (unwrapped, `[h1 | h2]`) and Jacobians
/// `J^k_i = d_i h^k` (`[J11 | J12 | J21 | J22]`, row `k`) on the stored times
/// of the DeTurck field trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceFlow {
    pub grid: Grid,
    pub times: Vec<f64>,
    pub maps: Vec<Vec<f64>>,
    pub jacobians: Vec<Vec<f64>>,
}

impl CorrespondenceFlow {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Smallest `det J` over all stored times and nodes.
    pub fn min_jacobian_det(&self) -> f64 {
        let m = self.grid.len();
        self.jacobians
            .iter()
            .flat_map(|j| (0..m).map(move |p| j[p] * j[3 * m + p] - j[m + p] * j[2 * m + p]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest `|h(t)(x) - x|` over the run (unwrapped).
    pub fn max_displacement(&self) -> f64 {
        let m = self.grid.len();
        let mut d = 0.0f64;
        for h in &self.maps {
            for p in 0..m {
                let x = self.grid.point(p);
                d = d.max((h[p] - x[0]).abs()).max((h[m + p] - x[1]).abs());
            }
        }
        d
    }
}

/// Integrates `d_t h = -W(t, h)` and `d_t J = -DW(t, h) J` from the identity
/// with RK4, using `substeps` steps between stored field times. `W` comes from
/// the dense output in time and six-point Lagrange interpolation in space.
pub fn correspondence_flow(w_traj: &Trajectory, t_end: f64, substeps: usize) -> Result<CorrespondenceFlow> {
    let grid = w_traj.meta.grid;
    if w_traj.meta.components != 2 || grid.dim() != 2 {
        return Err(Error::Config("correspondence flow needs a 2D vector field trajectory"));
    }
    if substeps == 0 {
        return Err(Error::Config("substeps must be positive"));
    }
    if t_end > w_traj.end() {
        return Err(Error::TimeOutOfRange {
            t: t_end,
            start: w_traj.start(),
            end: w_traj.end(),
        });
    }
    let spectral = Spectral::new(grid);
    let m = grid.len();
    // state per node: h1, h2, J11, J12, J21, J22
    let mut state: Vec<[f64; 6]> = (0..m)
        .map(|p| {
            let x = grid.point(p);
            [x[0], x[1], 1.0, 0.0, 0.0, 1.0]
        })
        .collect();
    let mut out = CorrespondenceFlow {
        grid,
        times: Vec::new(),
        maps: Vec::new(),
        jacobians: Vec::new(),
    };
    let record = |out: &mut CorrespondenceFlow, t: f64, s: &[[f64; 6]]| {
        out.times.push(t);
        let mut h = vec![0.0; 2 * m];
        let mut j = vec![0.0; 4 * m];
        for (p, v) in s.iter().enumerate() {
            h[p] = v[0];
            h[m + p] = v[1];
            for c in 0..4 {
                j[c * m + p] = v[2 + c];
            }
        }
        out.maps.push(h);
        out.jacobians.push(j);
    };
    record(&mut out, w_traj.start(), &state);

    // W and DW at one time, as interpolation sources
    let fields = |t: f64| -> Result<[Vec<f64>; 6]> {
        let w = w_traj.dense_eval(t)?;
        let (w1, w2) = (w[..m].to_vec(), w[m..].to_vec());
        let d = [
            spectral.derivative(&w1, [1, 0]),
            spectral.derivative(&w1, [0, 1]),
            spectral.derivative(&w2, [1, 0]),
            spectral.derivative(&w2, [0, 1]),
        ];
        let [a, b, c, e] = d;
        Ok([w1, w2, a, b, c, e])
    };
    let velocity = |f: &[Vec<f64>; 6], s: &[f64; 6]| -> [f64; 6] {
        let at: Point = [wrap_periodic(s[0]), wrap_periodic(s[1])];
        let zero = f[0].iter().chain(&f[1]).all(|&v| v == 0.0);
        if zero {
            return [0.0; 6];
        }
        let e: [f64; 6] = core::array::from_fn(|c| lagrange_periodic(grid, &f[c], at, 6));
        let (w, dw) = ([e[0], e[1]], [[e[2], e[3]], [e[4], e[5]]]);
        let j = [[s[2], s[3]], [s[4], s[5]]];
        let mut v = [-w[0], -w[1], 0.0, 0.0, 0.0, 0.0];
        for k in 0..2 {
            for i in 0..2 {
                v[2 + 2 * k + i] = -(dw[k][0] * j[0][i] + dw[k][1] * j[1][i]);
            }
        }
        v
    };

    let times = w_traj.times();
    for win in times.windows(2) {
        let (ta, tb) = (win[0], win[1]);
        if ta >= t_end {
            break;
        }
        let dt = (tb - ta) / substeps as f64;
        for s_idx in 0..substeps {
            let t = ta + s_idx as f64 * dt;
            let f0 = fields(t)?;
            let fh = fields(t + 0.5 * dt)?;
            let f1 = fields(if s_idx + 1 == substeps { tb } else { t + dt })?;
            for s in state.iter_mut() {
                let k1 = velocity(&f0, s);
                let k2 = velocity(&fh, &axpy(s, 0.5 * dt, &k1));
                let k3 = velocity(&fh, &axpy(s, 0.5 * dt, &k2));
                let k4 = velocity(&f1, &axpy(s, dt, &k3));
                for c in 0..6 {
                    s[c] += dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
                }
            }
        }
        if state.iter().any(|s| s.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite { t: tb });
        }
        record(&mut out, tb, &state);
    }
    Ok(out)
}

fn axpy(s: &[f64; 6], a: f64, k: &[f64; 6]) -> [f64; 6] {
    core::array::from_fn(|c| s[c] + a * k[c])
}

/// `g-bar_ij(t, x) = g^_kl(t, h(x)) J^k_i J^l_j` on the correspondence times.
pub fn pullback_metric_trajectory(cf: &CorrespondenceFlow, g_traj: &Trajectory) -> Result<Trajectory> {
    let grid = cf.grid;
    if g_traj.meta.grid != grid || g_traj.meta.components != 3 {
        return Err(Error::Config("metric trajectory does not match the correspondence grid"));
    }
    let spectral = Spectral::new(grid);
    let m = grid.len();
    let mut out = Trajectory::new(TrajectoryMeta {
        flow: "ricci".into(),
        grid,
        components: 3,
        valence: [0, 2],
    });
    for (k, &t) in cf.times.iter().enumerate() {
        let g = g_traj.dense_eval(t)?;
        let h = &cf.maps[k];
        let jac = &cf.jacobians[k];
        let moved = (0..m).any(|p| {
            let x = grid.point(p);
            h[p] != x[0] || h[m + p] != x[1]
        });
        let its: Option<Vec<_>> = if moved {
            Some((0..3).map(|c| spectral.interpolant(&g[c * m..(c + 1) * m])).collect())
        } else {
            None
        };
        let mut bar = vec![0.0; 3 * m];
        for p in 0..m {
            let x = grid.point(p);
            let hp = [h[p], h[m + p]];
            let a: [f64; 3] = match &its {
                Some(its) if hp != x => {
                    let q = [wrap_periodic(hp[0]), wrap_periodic(hp[1])];
                    core::array::from_fn(|c| its[c].eval(q))
                }
                _ => [g[p], g[m + p], g[2 * m + p]],
            };
            let j = [[jac[p], jac[m + p]], [jac[2 * m + p], jac[3 * m + p]]];
            let t2 = [[a[0], a[1]], [a[1], a[2]]];
            let pairs = [(0usize, 0usize), (0, 1), (1, 1)];
            for (c, &(i, jj)) in pairs.iter().enumerate() {
                let mut s = 0.0;
                for kk in 0..2 {
                    for l in 0..2 {
                        s += t2[kk][l] * j[kk][i] * j[l][jj];
                    }
                }
                bar[c * m + p] = s;
            }
        }
        out.push(t, bar)?;
    }
    Ok(out)
}

/// One row of the residual series CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualRow {
    pub t: f64,
    /// `|d_t g^ - Q(g^)|_sup`.
    pub residual_deturck: f64,
    /// `|d_t g-bar + 2 Rc(g-bar)|_sup`.
    pub residual_ricci: f64,
    pub min_eig: f64,
}

/// Fourth-order centered time derivative of the dense output.
pub fn time_derivative(traj: &Trajectory, t: f64, delta: f64) -> Result<Vec<f64>> {
    let e = |s: f64| traj.dense_eval(s);
    let (p2, p1, m1, m2) = (e(t + 2.0 * delta)?, e(t + delta)?, e(t - delta)?, e(t - 2.0 * delta)?);
    Ok((0..p1.len())
        .map(|i| (-p2[i] + 8.0 * p1[i] - 8.0 * m1[i] + m2[i]) / (12.0 * delta))
        .collect())
}

/// `|d_t g + 2 Rc(g)|_sup` at `t`.
pub fn ricci_residual_at(sys: &DeTurckSystem, traj: &Trajectory, t: f64, delta: f64) -> Result<f64> {
    let dt = time_derivative(traj, t, delta)?;
    let g = sys.metric(&traj.dense_eval(t)?)?;
    let rc = join3(sys.ricci(&g));
    Ok(dt.iter().zip(&rc).map(|(a, r)| (a + 2.0 * r).abs()).fold(0.0, f64::max))
}

/// `|d_t g - Q(g)|_sup` at `t`.
pub fn deturck_residual_at(sys: &DeTurckSystem, traj: &Trajectory, t: f64, delta: f64) -> Result<f64> {
    let dt = time_derivative(traj, t, delta)?;
    let q = sys.q_rhs(&traj.dense_eval(t)?)?;
    Ok(dt.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// Residual series on the stored times of `g_bar` inside `[from, to]`
/// (and at least `2 delta` away from both trajectory ends).
pub fn ricci_residual(
    sys: &DeTurckSystem,
    g_hat: &Trajectory,
    g_bar: &Trajectory,
    delta: f64,
    window: [f64; 2],
) -> Result<Vec<ResidualRow>> {
    let lo = window[0].max(g_bar.start() + 2.0 * delta).max(g_hat.start() + 2.0 * delta);
    let hi = window[1].min(g_bar.end() - 2.0 * delta).min(g_hat.end() - 2.0 * delta);
    let mut rows = Vec::new();
    for &t in g_bar.times() {
        if t < lo || t > hi {
            continue;
        }
        rows.push(ResidualRow {
            t,
            residual_deturck: deturck_residual_at(sys, g_hat, t, delta)?,
            residual_ricci: ricci_residual_at(sys, g_bar, t, delta)?,
            min_eig: min_eigenvalue(sys.grid(), &g_bar.dense_eval(t)?)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timestepping::Scheme;
    use core::f64::consts::PI;

    fn sup(v: &[f64]) -> f64 {
        v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    fn conformal_u(g: Grid) -> Vec<f64> {
        g.sample(|p| 0.1 * p[0].sin() * p[1].sin())
    }

    /// Smooth, non-conformal, positive definite test metric.
    fn wobbly(g: Grid) -> Vec<f64> {
        let m = g.len();
        let a = g.sample(|p| 1.0 + 0.2 * p[0].cos() + 0.1 * (p[0] + 2.0 * p[1]).sin());
        let b = g.sample(|p| 0.15 * (p[0] - p[1]).sin());
        let c = g.sample(|p| 1.2 + 0.1 * (2.0 * p[1]).cos() * p[0].sin());
        let mut s = a;
        s.extend(b);
        s.extend(c);
        assert_eq!(s.len(), 3 * m);
        s
    }

    #[test]
    fn deturck_field_examples() {
        let sys = DeTurckSystem::flat(32).unwrap();
        let flat = sys.metric(&join3(sys.background().g.clone())).unwrap();
        let w = sys.deturck_field(&flat);
        assert!(w.iter().all(|c| c.iter().all(|&v| v == 0.0)));
        let g = sys.metric(&conformal_metric(&conformal_u(sys.grid()))).unwrap();
        let w = sys.deturck_field(&g);
        assert!(sup(&w[0]).max(sup(&w[1])) <= 1e-10);
        let g = sys.metric(&non_conformal_metric(sys.grid(), NON_CONFORMAL_AMPLITUDE)).unwrap();
        let w = sys.deturck_field(&g);
        assert!(sup(&w[0]).max(sup(&w[1])) > 1e-3);
    }

    #[test]
    fn deturck_field_matches_difference_oracle() {
        // fourth-order differences instead of spectral derivatives
        let sys = DeTurckSystem::flat(64).unwrap();
        let grid = sys.grid();
        let state = wobbly(grid);
        let g = sys.metric(&state).unwrap();
        let w = sys.deturck_field(&g);
        let fd = crate::spectral::Differentiator::FiniteDifference(grid);
        struct Fd(crate::spectral::Differentiator);
        impl crate::atlas::ChartDerivative for Fd {
            fn first(&self, f: &[f64], axis: usize) -> Vec<f64> {
                let mut o = [0, 0];
                o[axis] = 1;
                self.0.derivative(f, o)
            }
        }
        let gam = christoffel_local(&Fd(fd), &g);
        let zero: Christoffel = core::array::from_fn(|_| {
            core::array::from_fn(|_| core::array::from_fn(|_| vec![0.0; grid.len()]))
        });
        let w_fd = deturck_from_christoffel(&g, &gam, &zero);
        assert!(sup_diff(&w[0], &w_fd[0]).max(sup_diff(&w[1], &w_fd[1])) <= 1e-5);
    }

    #[test]
    fn lie_derivative_examples() {
        let s = Spectral::new(Grid::new(2, 32).unwrap());
        let grid = s.grid();
        let m = grid.len();
        let flat: Sym = [vec![1.0; m], vec![0.0; m], vec![1.0; m]];
        let zero = [vec![0.0; m], vec![0.0; m]];
        assert!(lie_derivative_metric(&s, &zero, &flat).iter().all(|c| c.iter().all(|&v| v == 0.0)));
        let w = [grid.sample(|p| p[0].sin()), vec![0.0; m]];
        let l = lie_derivative_metric(&s, &w, &flat);
        assert!(sup_diff(&l[0], &grid.sample(|p| 2.0 * p[0].cos())) <= 1e-10);
        assert!(sup(&l[1]) <= 1e-10);
        assert!(sup(&l[2]) <= 1e-10);
    }

    #[test]
    fn q_examples() {
        let sys = DeTurckSystem::flat(32).unwrap();
        let grid = sys.grid();
        let flat = join3(sys.background().g.clone());
        assert!(sys.q_rhs(&flat).unwrap().iter().all(|&v| v.abs() <= 1e-14));
        let g = sys.metric(&conformal_metric(&conformal_u(grid))).unwrap();
        let q = sys.q(&g);
        let node = grid.node_at([PI / 2.0, PI / 2.0]).unwrap();
        assert!((q.q[0][node] + 0.4).abs() <= 1e-9, "{}", q.q[0][node]);
    }

    #[test]
    fn remainder_matches_explicit_quadratic_form() {
        // flat background: S_ij = 1/2 g^ab g^pq (d_i g_pa d_j g_qb + 2 d_a g_jp d_q g_ib
        //   - 2 d_a g_jp d_b g_iq - 2 d_j g_pa d_b g_iq - 2 d_i g_pa d_b g_jq)
        let sys = DeTurckSystem::flat(64).unwrap();
        let grid = sys.grid();
        let m = grid.len();
        let g = sys.metric(&wobbly(grid)).unwrap();
        let q = sys.q(&g);
        let s = sys.spectral();
        let d: [[Vec<f64>; 2]; 3] =
            core::array::from_fn(|c| [s.derivative(&g.g[c], [1, 0]), s.derivative(&g.g[c], [0, 1])]);
        let dg = |l: usize, i: usize, j: usize, p: usize| d[i + j][l][p];
        let gi = |i: usize, j: usize, p: usize| g.inv[i + j][p];
        let pairs = [(0usize, 0usize), (0, 1), (1, 1)];
        let mut err = 0.0f64;
        for (c, &(i, j)) in pairs.iter().enumerate() {
            for p in 0..m {
                let mut acc = 0.0;
                for a in 0..2 {
                    for b in 0..2 {
                        for pp in 0..2 {
                            for qq in 0..2 {
                                let w = gi(a, b, p) * gi(pp, qq, p);
                                acc += 0.5
                                    * w
                                    * (dg(i, pp, a, p) * dg(j, qq, b, p)
                                        + 2.0 * dg(a, j, pp, p) * dg(qq, i, b, p)
                                        - 2.0 * dg(a, j, pp, p) * dg(b, i, qq, p)
                                        - 2.0 * dg(j, pp, a, p) * dg(b, i, qq, p)
                                        - 2.0 * dg(i, pp, a, p) * dg(b, j, qq, p));
                            }
                        }
                    }
                }
                err = err.max((acc - q.remainder[c][p]).abs());
            }
        }
        assert!(err <= 1e-10, "{err:e}");
        // the split reassembles Q
        for c in 0..3 {
            let sum: Vec<f64> = (0..m).map(|p| q.principal[c][p] + q.remainder[c][p]).collect();
            assert!(sup_diff(&sum, &q.q[c]) <= 1e-8);
        }
    }

    #[test]
    fn flat_metric_is_stationary() {
        let sys = DeTurckSystem::flat(16).unwrap();
        let flat = join3(sys.background().g.clone());
        let cfg = SolverConfig::fixed(Scheme::Imex, 1e-3);
        let traj = solve_ricci_deturck(&sys, &flat, 0.01, &cfg).unwrap();
        assert!(traj.states().iter().all(|s| sup_diff(s, &flat) <= 1e-12));
    }

    #[test]
    fn degenerate_metric_is_rejected() {
        let sys = DeTurckSystem::flat(16).unwrap();
        let m = sys.grid().len();
        let bad = join3([vec![1.0; m], vec![1.0; m], vec![1.0; m]]);
        assert!(matches!(
            solve_ricci_deturck(&sys, &bad, 0.01, &SolverConfig::default()),
            Err(Error::PositivityLost { .. })
        ));
    }

    #[test]
    fn conformal_oracle_examples() {
        let n = 16;
        let grid = Grid::new(2, n).unwrap();
        let zero = vec![0.0; grid.len()];
        let cfg = SolverConfig::fixed(Scheme::Imex, 1e-3);
        let t = conformal_oracle(&zero, n, 0.01, &cfg).unwrap();
        assert!(t.states().iter().all(|s| s.iter().all(|&v| v == 0.0)));
        let u0 = conformal_u(grid);
        let run = |dt: f64| {
            let traj = conformal_oracle(&u0, n, 0.02, &SolverConfig::fixed(Scheme::Imex, dt)).unwrap();
            traj.last().to_vec()
        };
        let (a, b, c) = (run(2e-3), run(1e-3), run(5e-4));
        let order = (sup_diff(&a, &b) / sup_diff(&b, &c)).log2();
        assert!(order >= 1.9, "order {order}");
        // strict maximum at (pi/2, pi/2) decreases
        let fine = Grid::new(2, 2 * n).unwrap();
        let p = fine.node_at([PI / 2.0, PI / 2.0]).unwrap();
        let traj = conformal_oracle(&u0, n, 0.002, &cfg).unwrap();
        assert!(traj.states()[1][p] < traj.states()[0][p]);
        assert!((traj.states()[0][p] - 0.1).abs() < 1e-14);
    }

    #[test]
    fn conformal_run_matches_oracle_and_keeps_w_small() {
        let n = 32;
        let sys = DeTurckSystem::flat(n).unwrap();
        let grid = sys.grid();
        let u0 = conformal_u(grid);
        let cfg = SolverConfig::fixed(Scheme::Imex, 2e-4);
        let traj = solve_ricci_deturck(&sys, &conformal_metric(&u0), 0.02, &cfg).unwrap();
        for s in traj.states() {
            let w = sys.deturck_field(&sys.metric(s).unwrap());
            assert!(sup(&w[0]).max(sup(&w[1])) <= 1e-8);
        }
        let oracle = conformal_oracle(&u0, n, 0.02, &cfg).unwrap();
        let u = restrict_to_half(Grid::new(2, 2 * n).unwrap(), oracle.last());
        let err = sup_diff(traj.last(), &conformal_metric(&u));
        assert!(err <= 1e-5, "{err:e}");
    }

    fn constant_field(n: usize, c: Point, times: &[f64]) -> Trajectory {
        let grid = Grid::new(2, n).unwrap();
        let mut t = Trajectory::new(TrajectoryMeta {
            flow: "w".into(),
            grid,
            components: 2,
            valence: [1, 0],
        });
        for &s in times {
            let mut v = vec![c[0]; grid.len()];
            v.extend(vec![c[1]; grid.len()]);
            t.push(s, v).unwrap();
        }
        t
    }

    #[test]
    fn correspondence_for_zero_and_constant_fields() {
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.01).collect();
        let zero = constant_field(16, [0.0, 0.0], &times);
        let cf = correspondence_flow(&zero, 0.1, 2).unwrap();
        let grid = cf.grid;
        assert_eq!(cf.len(), times.len());
        for (h, j) in cf.maps.iter().zip(&cf.jacobians) {
            for p in 0..grid.len() {
                let x = grid.point(p);
                assert_eq!([h[p], h[grid.len() + p]], x);
            }
            assert_eq!(j, &cf.jacobians[0]);
        }
        let c = 0.7;
        let constant = constant_field(16, [c, 0.0], &times);
        let cf = correspondence_flow(&constant, 0.1, 2).unwrap();
        let m = grid.len();
        for (k, h) in cf.maps.iter().enumerate() {
            let t = cf.times[k];
            for p in 0..m {
                let x = grid.point(p);
                assert!((h[p] - (x[0] - c * t)).abs() <= 1e-12);
                assert!((h[m + p] - x[1]).abs() <= 1e-12);
            }
            let j = &cf.jacobians[k];
            assert!(j.iter().enumerate().all(|(i, v)| {
                let e = if i / m == 0 || i / m == 3 { 1.0 } else { 0.0 };
                (v - e).abs() <= 1e-12
            }));
        }
    }

    #[test]
    fn jacobian_matches_differences_of_the_map() {
        let n = 32;
        let sys = DeTurckSystem::flat(n).unwrap();
        let grid = sys.grid();
        let g0 = non_conformal_metric(grid, 0.2);
        let cfg = SolverConfig::fixed(Scheme::Imex, 1e-3);
        let traj = solve_ricci_deturck(&sys, &g0, 0.05, &cfg).unwrap();
        let w = sys.deturck_trajectory(&traj).unwrap();
        let cf = correspondence_flow(&w, 0.05, 2).unwrap();
        assert!(cf.max_displacement() > 1e-4);
        assert!(cf.min_jacobian_det() > 0.0);
        let m = grid.len();
        let s = Spectral::new(grid);
        let k = cf.len() - 1;
        let h = &cf.maps[k];
        let j = &cf.jacobians[k];
        let mut worst = 0.0f64;
        for comp in 0..2 {
            // the displacement h - x is periodic
            let disp: Vec<f64> = (0..m).map(|p| h[comp * m + p] - grid.point(p)[comp]).collect();
            for axis in 0..2 {
                let mut o = [0, 0];
                o[axis] = 1;
                let d = s.derivative(&disp, o);
                for p in 0..m {
                    let fd = d[p] + if comp == axis { 1.0 } else { 0.0 };
                    let jac = j[(2 * comp + axis) * m + p];
                    worst = worst.max((fd - jac).abs() / jac.abs().max(1.0));
                }
            }
        }
        assert!(worst <= 1e-6, "{worst:e}");
    }

    #[test]
    fn pullback_metric_examples() {
        let n = 16;
        let sys = DeTurckSystem::flat(n).unwrap();
        let grid = sys.grid();
        let m = grid.len();
        let times: Vec<f64> = (0..=6).map(|k| k as f64 * 0.01).collect();
        // identity map: bit-for-bit
        let mut g_traj = Trajectory::new(TrajectoryMeta {
            flow: "g".into(),
            grid,
            components: 3,
            valence: [0, 2],
        });
        for &t in &times {
            g_traj.push(t, wobbly(grid).iter().map(|v| v * (1.0 + t)).collect()).unwrap();
        }
        let cf = correspondence_flow(&constant_field(n, [0.0, 0.0], &times), 0.06, 1).unwrap();
        let bar = pullback_metric_trajectory(&cf, &g_traj).unwrap();
        assert_eq!(bar.states(), g_traj.states());
        // flat metric under a nontrivial map: J^T J
        let traj = solve_ricci_deturck(&sys, &non_conformal_metric(grid, 0.2), 0.06, &SolverConfig::fixed(Scheme::Imex, 1e-3))
            .unwrap();
        let cf = correspondence_flow(&sys.deturck_trajectory(&traj).unwrap(), 0.06, 1).unwrap();
        let mut flat = Trajectory::new(g_traj.meta.clone());
        for &t in &cf.times {
            flat.push(t, join3(sys.background().g.clone())).unwrap();
        }
        let bar = pullback_metric_trajectory(&cf, &flat).unwrap();
        for (k, s) in bar.states().iter().enumerate() {
            let j = &cf.jacobians[k];
            for p in 0..m {
                let (j11, j12, j21, j22) = (j[p], j[m + p], j[2 * m + p], j[3 * m + p]);
                assert!((s[p] - (j11 * j11 + j21 * j21)).abs() <= 1e-10);
                assert!((s[m + p] - (j11 * j12 + j21 * j22)).abs() <= 1e-10);
                assert!((s[2 * m + p] - (j12 * j12 + j22 * j22)).abs() <= 1e-10);
            }
            assert!(min_eigenvalue(grid, s).unwrap() > 0.0);
        }
    }

    #[test]
    fn flat_residual_vanishes() {
        let sys = DeTurckSystem::flat(16).unwrap();
        let flat = join3(sys.background().g.clone());
        let cfg = SolverConfig::fixed(Scheme::Imex, 1e-3);
        let g = solve_ricci_deturck(&sys, &flat, 0.02, &cfg).unwrap();
        let cf = correspondence_flow(&sys.deturck_trajectory(&g).unwrap(), 0.02, 1).unwrap();
        let bar = pullback_metric_trajectory(&cf, &g).unwrap();
        let rows = ricci_residual(&sys, &g, &bar, 1e-3, [0.0, 0.02]).unwrap();
        assert!(!rows.is_empty());
        assert!(rows.iter().all(|r| r.residual_ricci <= 1e-10 && r.residual_deturck <= 1e-10));
    }

    #[test]
    fn non_conformal_residual_converges() {
        let run = |n: usize, dt: f64| -> f64 {
            let sys = DeTurckSystem::flat(n).unwrap();
            let g0 = non_conformal_metric(sys.grid(), NON_CONFORMAL_AMPLITUDE);
            let cfg = SolverConfig::fixed(Scheme::Imex, dt).with_save_every(2);
            let g = solve_ricci_deturck(&sys, &g0, 0.03, &cfg).unwrap();
            let cf = correspondence_flow(&sys.deturck_trajectory(&g).unwrap(), 0.03, 2).unwrap();
            let bar = pullback_metric_trajectory(&cf, &g).unwrap();
            let rows = ricci_residual(&sys, &g, &bar, 2.0 * dt, [0.01, 0.02]).unwrap();
            rows.iter().map(|r| r.residual_ricci).fold(0.0, f64::max)
        };
        let (a, b) = (run(16, 4e-4), run(32, 2e-4));
        let order = (a / b).log2();
        assert!(order >= 1.9, "{a:e} {b:e}");
    }
}
