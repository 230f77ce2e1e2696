//! Normal graphs over the unit circle and the surface diffusion, mean curvature
//! and averaged mean curvature flows.
//!
//! A state is a height `rho` on `M = S^1` (angle grid), describing the curve
//! `Psi_rho(phi) = (1 + rho) nu(phi)` with outward normal `nu`. With the
//! reference data `g11 = 1`, `l11 = -1`, `K = -1` the graph geometry is
//!
//! ```text
//! g_Gamma = (1 + rho)^2 + rho'^2 =: G,   r = 1 / (1 + rho),   beta = (1 + rho) / sqrt(G)
//! P1 h = beta / (2G) (h'' - 2 rho' / (1 + rho) h'),   F1 = -beta (1 + rho) / (2G)
//! ```
//!
//! and `H = s (P1 rho + F1)`. The scale `s` is calibrated once, from
//! `H(rho = 0) = -1`, and equals 2: the `beta / 2` factor averages the principal
//! curvatures, while curvature of a curve is their sum. Convex curves then have
//! negative `H`, and `V = beta rho_t` is positive for growing enclosed regions.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::grid::Grid;
use crate::spectral::Spectral;
use crate::timestepping::{integrate, FlowSystem, FrozenPrincipal, SolverConfig, Trajectory};
use crate::{Error, Result};

/// Default bound `a` on `|rho|`.
pub const TUBULAR_RADIUS: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlowKind {
    /// Surface diffusion, `rho_t = -(1/beta) Delta_rho H`.
    Sdf,
    /// Mean curvature flow, `rho_t = H / beta`.
    Mcf,
    /// Averaged (area preserving) mean curvature flow, `rho_t = (H - h) / beta`.
    Amcf,
}

impl FlowKind {
    pub fn name(self) -> &'static str {
        match self {
            FlowKind::Sdf => "sdf",
            FlowKind::Mcf => "mcf",
            FlowKind::Amcf => "amcf",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sdf" => Some(FlowKind::Sdf),
            "mcf" => Some(FlowKind::Mcf),
            "amcf" => Some(FlowKind::Amcf),
            _ => None,
        }
    }

    /// Order of the principal part.
    pub fn order(self) -> usize {
        match self {
            FlowKind::Sdf => 4,
            FlowKind::Mcf | FlowKind::Amcf => 2,
        }
    }
}

/// The unit circle with its reference geometry.
#[derive(Debug, Clone)]
pub struct ReferenceHypersurface {
    spectral: Spectral,
    /// Tubular radius `a`.
    pub a: f64,
    /// `g_11`.
    pub metric: f64,
    /// `l_11`.
    pub second_fundamental_form: f64,
    /// `l^1_1 = g^11 l_11`.
    pub weingarten: f64,
    /// `K^M = [g]^{-1} L^M`.
    pub shape: f64,
    scale: f64,
}

impl ReferenceHypersurface {
    pub fn unit_circle(n: usize) -> Result<Self> {
        Self::with_radius(n, TUBULAR_RADIUS)
    }

    pub fn with_radius(n: usize, a: f64) -> Result<Self> {
        // the graph must stay off the center of the circle
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::Config("tubular radius must lie in (0, 1)"));
        }
        let grid = Grid::new(1, n)?;
        let mut r = Self {
            spectral: Spectral::new(grid),
            a,
            metric: 1.0,
            second_fundamental_form: -1.0,
            weingarten: -1.0,
            shape: -1.0,
            scale: 1.0,
        };
        let zero = vec![0.0; n];
        let raw = r.graph_geometry(&zero)?.mean_curvature_split()[0];
        r.scale = -1.0 / raw;
        Ok(r)
    }

    pub fn grid(&self) -> Grid {
        self.spectral.grid()
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    /// Calibrated factor `s` in `H = s (P1 rho + F1)`.
    pub fn calibration_scale(&self) -> f64 {
        self.scale
    }

    /// Outward unit normal at angle `phi`.
    pub fn normal(&self, phi: f64) -> [f64; 2] {
        [phi.cos(), phi.sin()]
    }

    pub fn check_admissible(&self, rho: &[f64]) -> Result<()> {
        if rho.len() != self.grid().len() {
            return Err(Error::Shape {
                expected: self.grid().len(),
                got: rho.len(),
            });
        }
        let sup = sup_abs(rho);
        if !(sup < self.a) {
            return Err(Error::Inadmissible {
                what: "|rho|_sup",
                value: sup,
                bound: self.a,
            });
        }
        Ok(())
    }

    /// All derived graph quantities for an admissible height.
    pub fn graph_geometry(&self, rho: &[f64]) -> Result<GraphGeometry> {
        self.check_admissible(rho)?;
        let s = &self.spectral;
        let d1 = s.derivative(rho, [1, 0]);
        let d2 = s.derivative(rho, [2, 0]);
        let n = rho.len();
        let mut g = GraphGeometry {
            rho: rho.to_vec(),
            d1: d1.clone(),
            d2,
            g_gamma: vec![0.0; n],
            sigma_inv: vec![0.0; n],
            christoffel: vec![0.0; n],
            beta: vec![0.0; n],
            r: vec![0.0; n],
            p1_second: vec![0.0; n],
            p1_first: vec![0.0; n],
            f1: vec![0.0; n],
            scale: self.scale,
        };
        let k = self.shape;
        let l11 = self.second_fundamental_form;
        let w = self.weingarten;
        for i in 0..n {
            let p = rho[i];
            let dp = d1[i];
            // g_ij - 2 rho l_ij + rho^2 l^r_i l_jr + d_i rho d_j rho
            let gg = self.metric - 2.0 * p * l11 + p * p * w * l11 + dp * dp;
            if !(gg > 0.0) {
                return Err(Error::Degenerate("graph metric"));
            }
            let r = 1.0 / (1.0 - p * k);
            let beta = 1.0 / (1.0 + r * r * dp * dp / self.metric).sqrt();
            let alpha = 1.0 - p * k;
            g.g_gamma[i] = gg;
            g.sigma_inv[i] = 1.0 / gg;
            g.r[i] = r;
            g.beta[i] = beta;
            let c = beta / (2.0 * gg);
            g.p1_second[i] = c;
            g.p1_first[i] = -c * 2.0 * dp / alpha;
            g.f1[i] = -c * alpha;
        }
        // gamma^1_11 = G' / (2G), G' = 2 (1 + rho) rho' + 2 rho' rho''
        for i in 0..n {
            let alpha = 1.0 - rho[i] * k;
            let dg = 2.0 * alpha * g.d1[i] + 2.0 * g.d1[i] * g.d2[i];
            g.christoffel[i] = dg / (2.0 * g.g_gamma[i]);
        }
        Ok(g)
    }

    /// `H_rho` through the `P1 / F1` split.
    pub fn mean_curvature(&self, geom: &GraphGeometry) -> Vec<f64> {
        geom.mean_curvature_split()
    }

    /// `Delta_rho f = sigma^11 (f'' - gamma^1_11 f')`.
    pub fn laplace_beltrami(&self, geom: &GraphGeometry, f: &[f64]) -> Vec<f64> {
        let f1 = self.spectral.derivative(f, [1, 0]);
        let f2 = self.spectral.derivative(f, [2, 0]);
        (0..f.len())
            .map(|i| geom.sigma_inv[i] * (f2[i] - geom.christoffel[i] * f1[i]))
            .collect()
    }

    /// Trapezoid rule on the periodic grid, `int f dphi`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() * self.grid().spacing()
    }

    pub fn averaged_terms(&self, geom: &GraphGeometry) -> Result<AveragedTerms> {
        let n = geom.rho.len();
        let alpha: Vec<f64> = geom.rho.iter().map(|p| 1.0 - p * self.shape).collect();
        let d: Vec<f64> = (0..n).map(|i| alpha[i] / geom.beta[i]).collect();
        let total = self.integrate(&d);
        if !(total > 0.0) {
            return Err(Error::Degenerate("area weight"));
        }
        let h_rho = geom.mean_curvature_split();
        let hd: Vec<f64> = (0..n).map(|i| h_rho[i] * d[i]).collect();
        let h = self.integrate(&hd) / total;
        let f1 = geom.calibrated_f1();
        let f1d: Vec<f64> = (0..n).map(|i| f1[i] * d[i]).collect();
        let f1_avg = self.integrate(&f1d) / total;
        Ok(AveragedTerms {
            alpha,
            d,
            total,
            h,
            f1_avg,
            inv_beta: geom.beta.iter().map(|b| 1.0 / b).collect(),
        })
    }

    /// `d rho / dt` for the chosen flow; the full nonlinear expression.
    pub fn flow_rhs(&self, kind: FlowKind, rho: &[f64]) -> Result<Vec<f64>> {
        let geom = self.graph_geometry(rho)?;
        let h = geom.mean_curvature_split();
        Ok(match kind {
            FlowKind::Sdf => {
                let lap = self.laplace_beltrami(&geom, &h);
                (0..h.len()).map(|i| -lap[i] / geom.beta[i]).collect()
            }
            FlowKind::Mcf => (0..h.len()).map(|i| h[i] / geom.beta[i]).collect(),
            FlowKind::Amcf => {
                let avg = self.averaged_terms(&geom)?.h;
                (0..h.len()).map(|i| (h[i] - avg) / geom.beta[i]).collect()
            }
        })
    }

    /// Frozen principal coefficient at `rho`: the grid maximum of
    /// `(s/2) sigma^11 g_Gamma^11` (SDF) or `(s/2) g_Gamma^11` (MCF, AMCF).
    pub fn principal(&self, kind: FlowKind, rho: &[f64]) -> Result<FrozenPrincipal> {
        let geom = self.graph_geometry(rho)?;
        let half = 0.5 * self.scale;
        let coefficient = geom
            .sigma_inv
            .iter()
            .map(|s| match kind {
                FlowKind::Sdf => half * s * s,
                _ => half * s,
            })
            .fold(0.0, f64::max);
        Ok(FrozenPrincipal {
            coefficient,
            order: kind.order(),
        })
    }

    /// Enclosed area and perimeter of `r = 1 + rho`.
    pub fn geometric_diagnostics(&self, rho: &[f64]) -> Result<Diagnostics> {
        self.check_admissible(rho)?;
        let d1 = self.spectral.derivative(rho, [1, 0]);
        let r2: Vec<f64> = rho.iter().map(|p| (1.0 + p) * (1.0 + p)).collect();
        let arc: Vec<f64> = (0..rho.len()).map(|i| (r2[i] + d1[i] * d1[i]).sqrt()).collect();
        Ok(Diagnostics {
            enclosed_area: 0.5 * self.integrate(&r2),
            perimeter: self.integrate(&arc),
        })
    }

    /// One diagnostics CSV row.
    pub fn diagnostics_row(&self, t: f64, rho: &[f64]) -> Result<DiagnosticsRow> {
        let d = self.geometric_diagnostics(rho)?;
        let geom = self.graph_geometry(rho)?;
        Ok(DiagnosticsRow {
            t,
            area: d.enclosed_area,
            perimeter: d.perimeter,
            max_rho: sup_abs(rho),
            min_beta: geom.beta.iter().cloned().fold(f64::INFINITY, f64::min),
            symbol_c: geom.symbol_constant(),
        })
    }

    /// Ground truth from the embedded curve `c(phi) = (1 + rho)(cos phi, sin phi)`,
    /// differentiated in Cartesian components.
    pub fn parametric_oracle(&self, rho: &[f64]) -> Result<ParametricSamples> {
        self.check_admissible(rho)?;
        let grid = self.grid();
        let s = &self.spectral;
        let x: Vec<f64> = (0..rho.len()).map(|i| (1.0 + rho[i]) * grid.coord(i).cos()).collect();
        let y: Vec<f64> = (0..rho.len()).map(|i| (1.0 + rho[i]) * grid.coord(i).sin()).collect();
        let (x1, x2) = (s.derivative(&x, [1, 0]), s.derivative(&x, [2, 0]));
        let (y1, y2) = (s.derivative(&y, [1, 0]), s.derivative(&y, [2, 0]));
        let mut curvature = Vec::with_capacity(rho.len());
        let mut metric = Vec::with_capacity(rho.len());
        for i in 0..rho.len() {
            let speed2 = x1[i] * x1[i] + y1[i] * y1[i];
            let kappa = (x1[i] * y2[i] - y1[i] * x2[i]) / speed2.powf(1.5);
            // convex curves carry negative mean curvature
            curvature.push(-kappa);
            metric.push(speed2);
        }
        Ok(ParametricSamples { curvature, metric })
    }

    pub fn system(&self, kind: FlowKind) -> HypersurfaceFlow<'_> {
        HypersurfaceFlow {
            reference: self,
            kind,
        }
    }
}

fn sup_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Derived geometry of one graph state; all arrays are per node.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphGeometry {
    pub rho: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    /// `g^Gamma_11 = sigma_11`.
    pub g_gamma: Vec<f64>,
    /// `sigma^11 = g_Gamma^11`.
    pub sigma_inv: Vec<f64>,
    /// `gamma^1_11`.
    pub christoffel: Vec<f64>,
    pub beta: Vec<f64>,
    /// `r^1_1 = (1 - rho K)^{-1}`.
    pub r: Vec<f64>,
    /// Coefficients of `P1 h = p1_second h'' + p1_first h'` (uncalibrated).
    pub p1_second: Vec<f64>,
    pub p1_first: Vec<f64>,
    /// Uncalibrated `F1`.
    pub f1: Vec<f64>,
    scale: f64,
}

impl GraphGeometry {
    /// Calibrated `P1(rho) h` given `h'`, `h''`.
    pub fn apply_p1(&self, dh: &[f64], d2h: &[f64]) -> Vec<f64> {
        (0..dh.len())
            .map(|i| self.scale * (self.p1_second[i] * d2h[i] + self.p1_first[i] * dh[i]))
            .collect()
    }

    pub fn calibrated_f1(&self) -> Vec<f64> {
        self.f1.iter().map(|f| self.scale * f).collect()
    }

    /// `H = P1(rho) rho + F1(rho)`.
    pub fn mean_curvature_split(&self) -> Vec<f64> {
        let p = self.apply_p1(&self.d1, &self.d2);
        let f = self.calibrated_f1();
        p.iter().zip(&f).map(|(a, b)| a + b).collect()
    }

    /// `min_nodes 1/2 sigma^11 g_Gamma^11`, the fourth-order symbol witness.
    pub fn symbol_constant(&self) -> f64 {
        self.sigma_inv
            .iter()
            .map(|s| 0.5 * s * s)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Averaging data for the area preserving flow.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedTerms {
    /// `alpha = det(I - rho K)`.
    pub alpha: Vec<f64>,
    /// `D = alpha / beta`.
    pub d: Vec<f64>,
    /// `int D dV_g`.
    pub total: f64,
    /// Averaged mean curvature.
    pub h: f64,
    f1_avg: f64,
    inv_beta: Vec<f64>,
}

impl AveragedTerms {
    fn average(&self, reference: &ReferenceHypersurface, f: &[f64]) -> f64 {
        let fd: Vec<f64> = f.iter().zip(&self.d).map(|(a, b)| a * b).collect();
        reference.integrate(&fd) / self.total
    }

    /// `B(rho) h = (1/beta) avg_D(P1 h)`.
    pub fn b_apply(&self, reference: &ReferenceHypersurface, geom: &GraphGeometry, h: &[f64]) -> Vec<f64> {
        let s = reference.spectral();
        let p1h = geom.apply_p1(&s.derivative(h, [1, 0]), &s.derivative(h, [2, 0]));
        let avg = self.average(reference, &p1h);
        self.inv_beta.iter().map(|ib| ib * avg).collect()
    }

    /// `A(rho) = (1/beta) avg_D(F1)`.
    pub fn a(&self) -> Vec<f64> {
        self.inv_beta.iter().map(|ib| ib * self.f1_avg).collect()
    }

    /// `P(rho) h = -(1/beta) (P1 h - avg_D(P1 h))`.
    pub fn p_apply(&self, reference: &ReferenceHypersurface, geom: &GraphGeometry, h: &[f64]) -> Vec<f64> {
        let s = reference.spectral();
        let p1h = geom.apply_p1(&s.derivative(h, [1, 0]), &s.derivative(h, [2, 0]));
        let avg = self.average(reference, &p1h);
        (0..h.len()).map(|i| -self.inv_beta[i] * (p1h[i] - avg)).collect()
    }

    /// `F(rho) = (1/beta) (F1 - avg_D(F1))`.
    pub fn f(&self, geom: &GraphGeometry) -> Vec<f64> {
        let f1 = geom.calibrated_f1();
        (0..f1.len()).map(|i| self.inv_beta[i] * (f1[i] - self.f1_avg)).collect()
    }

    /// `K(rho) = A(rho) + B(rho) rho`.
    pub fn k(&self, reference: &ReferenceHypersurface, geom: &GraphGeometry) -> Vec<f64> {
        let a = self.a();
        let b = self.b_apply(reference, geom, &geom.rho);
        a.iter().zip(&b).map(|(x, y)| x + y).collect()
    }

    /// `G(rho) = P(rho) rho - F(rho)`; the averaged flow is `rho_t = -G(rho)`.
    pub fn g(&self, reference: &ReferenceHypersurface, geom: &GraphGeometry) -> Vec<f64> {
        let p = self.p_apply(reference, geom, &geom.rho);
        let f = self.f(geom);
        p.iter().zip(&f).map(|(x, y)| x - y).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub enclosed_area: f64,
    pub perimeter: f64,
}

/// `t,area,perimeter,max_rho,min_beta,symbol_c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub area: f64,
    pub perimeter: f64,
    pub max_rho: f64,
    pub min_beta: f64,
    pub symbol_c: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParametricSamples {
    /// Signed curvature, negative on convex curves.
    pub curvature: Vec<f64>,
    /// `|c'(phi)|^2`.
    pub metric: Vec<f64>,
}

/// A graph flow as a [`FlowSystem`]; leaving `|rho| < a` aborts the run.
#[derive(Debug, Clone, Copy)]
pub struct HypersurfaceFlow<'a> {
    reference: &'a ReferenceHypersurface,
    kind: FlowKind,
}

impl FlowSystem for HypersurfaceFlow<'_> {
    fn grid(&self) -> Grid {
        self.reference.grid()
    }

    fn components(&self) -> usize {
        1
    }

    fn rhs(&self, t: f64, u: &[f64]) -> Result<Vec<f64>> {
        // an inadmissible stage value ends the run like an inadmissible step
        self.monitor(t, u)?;
        self.reference.flow_rhs(self.kind, u)
    }

    fn principal(&self, u: &[f64]) -> Result<FrozenPrincipal> {
        self.reference.principal(self.kind, u)
    }

    fn monitor(&self, t: f64, u: &[f64]) -> Result<()> {
        let sup = sup_abs(u);
        if !(sup < self.reference.a) {
            return Err(Error::AdmissibilityExit { t, sup });
        }
        Ok(())
    }
}

pub fn solve_hypersurface_flow(
    reference: &ReferenceHypersurface,
    kind: FlowKind,
    rho0: &[f64],
    t_end: f64,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    reference.check_admissible(rho0)?;
    integrate(&reference.system(kind), kind.name(), [0, 0], rho0.to_vec(), 0.0, t_end, cfg)
}
