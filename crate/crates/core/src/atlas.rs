//! Reference manifolds (flat 2-torus, unit circle), their atlases and
//! localization systems, chart-wise tensor fields and 2D metric geometry.
//!
//! All charts share the global periodic node grid. A chart is either the
//! global periodic chart or a window of nodes around a center node, with local
//! coordinates `A * wrap(p - center)` for a signed axis permutation `A`.
//! Because `A` is orthogonal, every tensor index transforms by `A`.
//!
//! The localization system is `pi_k^2 = b_k / sum_j b_j` with `b_k` a product
//! of `exp(-1/(1-t^2))` bumps, and envelopes `zeta_k` equal to 1 on the
//! support of `pi_k`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;

use crate::bump::{bump, smoothstep};
use crate::grid::{wrap_centered, wrap_periodic, Grid, Point};
use crate::spectral::Spectral;
use crate::{Error, Result};

/// Half-width of a window chart (per axis).
pub const WINDOW_HALF_WIDTH: f64 = 7.0 * PI / 8.0;
/// Half-width of the support of the partition-of-unity bump (per axis).
pub const SUPPORT_HALF_WIDTH: f64 = 2.0 * PI / 3.0;

/// Smallest admissible eigenvalue of a metric at a node.
pub const METRIC_EIGENVALUE_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ManifoldKind {
    Torus,
    Circle,
}

impl ManifoldKind {
    pub fn dim(self) -> usize {
        match self {
            ManifoldKind::Torus => 2,
            ManifoldKind::Circle => 1,
        }
    }
}

/// Signed axis permutation: `local[a] = sign[a] * global[perm[a]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisMap {
    pub perm: [usize; 2],
    pub sign: [f64; 2],
}

impl AxisMap {
    pub const IDENTITY: AxisMap = AxisMap {
        perm: [0, 1],
        sign: [1.0, 1.0],
    };

    pub fn apply(&self, v: Point, dim: usize) -> Point {
        let mut out = [0.0; 2];
        for a in 0..dim {
            out[a] = self.sign[a] * v[self.perm[a]];
        }
        out
    }

    pub fn apply_inverse(&self, v: Point, dim: usize) -> Point {
        let mut out = [0.0; 2];
        for a in 0..dim {
            out[self.perm[a]] = self.sign[a] * v[a];
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub id: usize,
    pub center: Point,
    pub axes: AxisMap,
    /// Periodic local axes span the whole circle; the others are windows.
    pub periodic: [bool; 2],
    dim: usize,
    shape: [usize; 2],
    /// Global node index of every local node, row-major in local axes.
    nodes: Vec<usize>,
}

impl Chart {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Local nodes per local axis.
    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn is_global(&self) -> bool {
        self.periodic[..self.dim].iter().all(|&p| p)
    }

    /// `phi_k`: manifold point to local coordinates.
    pub fn phi(&self, p: Point) -> Point {
        let mut delta = [0.0; 2];
        for g in 0..self.dim {
            delta[g] = wrap_centered(p[g] - self.center[g]);
        }
        let mut local = self.axes.apply(delta, self.dim);
        for a in 0..self.dim {
            if self.periodic[a] {
                local[a] = wrap_periodic(p[self.axes.perm[a]]);
            }
        }
        local
    }

    /// `psi_k`: local coordinates to the manifold point in `[0, 2pi)^dim`.
    pub fn psi(&self, s: Point) -> Point {
        let delta = self.axes.apply_inverse(s, self.dim);
        let mut out = [0.0; 2];
        for g in 0..self.dim {
            out[g] = wrap_periodic(self.center[g] + delta[g]);
        }
        out
    }

    /// Whether `p` lies in the open coordinate domain.
    pub fn contains(&self, p: Point) -> bool {
        let s = self.phi(p);
        (0..self.dim).all(|a| self.periodic[a] || s[a].abs() < WINDOW_HALF_WIDTH)
    }

    fn pou_bump(&self, p: Point) -> f64 {
        let s = self.phi(p);
        (0..self.dim)
            .map(|a| {
                if self.periodic[a] {
                    1.0
                } else {
                    bump(s[a] / SUPPORT_HALF_WIDTH)
                }
            })
            .product()
    }

    fn envelope(&self, p: Point) -> f64 {
        let s = self.phi(p);
        (0..self.dim)
            .map(|a| {
                if self.periodic[a] {
                    1.0
                } else {
                    let t = (s[a].abs() - SUPPORT_HALF_WIDTH)
                        / (WINDOW_HALF_WIDTH - SUPPORT_HALF_WIDTH);
                    1.0 - smoothstep(t).value()
                }
            })
            .product()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atlas {
    pub kind: ManifoldKind,
    grid: Grid,
    charts: Vec<Chart>,
    /// `pi_k` on each chart's nodes.
    pi: Vec<Vec<f64>>,
    /// `zeta_k` on each chart's nodes.
    zeta: Vec<Vec<f64>>,
    /// Charts whose domain contains each global node, in chart order.
    overlap: Vec<Vec<(usize, usize)>>,
}

/// Builds the reference atlas for `kind` with `n` nodes per axis and
/// `charts` charts (1: global periodic chart; 2 or 4: overlapping windows).
pub fn make_reference(kind: ManifoldKind, n: usize, charts: usize) -> Result<Atlas> {
    let grid = Grid::new(kind.dim(), n)?;
    if !matches!(charts, 1 | 2 | 4) {
        return Err(Error::ChartCount(charts));
    }
    let specs: Vec<(Point, AxisMap, [bool; 2])> = match (kind, charts) {
        (_, 1) => vec![([0.0, 0.0], AxisMap::IDENTITY, [true, true])],
        (ManifoldKind::Circle, 2) => vec![
            ([0.0, 0.0], AxisMap::IDENTITY, [false, true]),
            (
                [PI, 0.0],
                AxisMap {
                    perm: [0, 1],
                    sign: [-1.0, 1.0],
                },
                [false, true],
            ),
        ],
        (ManifoldKind::Torus, 2) => vec![
            ([0.0, 0.0], AxisMap::IDENTITY, [false, true]),
            (
                [PI, 0.0],
                AxisMap {
                    perm: [0, 1],
                    sign: [-1.0, 1.0],
                },
                [false, true],
            ),
        ],
        (ManifoldKind::Torus, 4) => vec![
            ([0.0, 0.0], AxisMap::IDENTITY, [false, false]),
            (
                [PI, 0.0],
                AxisMap {
                    perm: [0, 1],
                    sign: [-1.0, 1.0],
                },
                [false, false],
            ),
            (
                [0.0, PI],
                AxisMap {
                    perm: [1, 0],
                    sign: [1.0, 1.0],
                },
                [false, false],
            ),
            (
                [PI, PI],
                AxisMap {
                    perm: [1, 0],
                    sign: [1.0, -1.0],
                },
                [false, false],
            ),
        ],
        _ => return Err(Error::UnsupportedKind { charts }),
    };
    let charts: Vec<Chart> = specs
        .into_iter()
        .enumerate()
        .map(|(id, (center, axes, periodic))| build_chart(grid, id, center, axes, periodic))
        .collect();

    let mut overlap = vec![Vec::new(); grid.len()];
    for (k, c) in charts.iter().enumerate() {
        for (j, &g) in c.nodes.iter().enumerate() {
            overlap[g].push((k, j));
        }
    }
    let mut pi: Vec<Vec<f64>> = charts.iter().map(|c| vec![0.0; c.len()]).collect();
    for (g, entries) in overlap.iter().enumerate() {
        let p = grid.point(g);
        let b: Vec<f64> = entries.iter().map(|&(k, _)| charts[k].pou_bump(p)).collect();
        let total: f64 = b.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Degenerate("partition of unity does not cover the manifold"));
        }
        for (&(k, j), bk) in entries.iter().zip(&b) {
            pi[k][j] = (bk / total).sqrt();
        }
    }
    let zeta = charts
        .iter()
        .map(|c| c.nodes.iter().map(|&g| c.envelope(grid.point(g))).collect())
        .collect();
    Ok(Atlas {
        kind,
        grid,
        charts,
        pi,
        zeta,
        overlap,
    })
}

fn build_chart(grid: Grid, id: usize, center: Point, axes: AxisMap, periodic: [bool; 2]) -> Chart {
    let dim = grid.dim();
    let n = grid.n();
    // global 1D indices along each local axis, ordered by local coordinate
    let mut along: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for a in 0..dim {
        let g = axes.perm[a];
        if periodic[a] {
            along[a] = (0..n).collect();
            continue;
        }
        let mut v: Vec<(f64, usize)> = (0..n)
            .map(|i| (axes.sign[a] * wrap_centered(grid.coord(i) - center[g]), i))
            .filter(|(s, _)| s.abs() < WINDOW_HALF_WIDTH)
            .collect();
        v.sort_by(|x, y| x.0.total_cmp(&y.0));
        along[a] = v.into_iter().map(|(_, i)| i).collect();
    }
    let shape = [along[0].len(), if dim == 2 { along[1].len() } else { 1 }];
    let mut nodes = Vec::with_capacity(shape[0] * shape[1]);
    for a0 in 0..shape[0] {
        for a1 in 0..shape[1] {
            let mut gi = [0usize; 2];
            gi[axes.perm[0]] = along[0][a0];
            if dim == 2 {
                gi[axes.perm[1]] = along[1][a1];
            }
            nodes.push(grid.index(gi[0], gi[1]));
        }
    }
    Chart {
        id,
        center,
        axes,
        periodic,
        dim,
        shape,
        nodes,
    }
}

impl Atlas {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn charts(&self) -> &[Chart] {
        &self.charts
    }

    pub fn chart(&self, id: usize) -> Result<&Chart> {
        self.charts.get(id).ok_or(Error::UnknownChart(id))
    }

    /// `pi_k` sampled on chart `id`'s nodes.
    pub fn pou(&self, id: usize) -> Result<&[f64]> {
        self.pi.get(id).map(|v| v.as_slice()).ok_or(Error::UnknownChart(id))
    }

    /// `zeta_k` sampled on chart `id`'s nodes.
    pub fn envelope(&self, id: usize) -> Result<&[f64]> {
        self.zeta.get(id).map(|v| v.as_slice()).ok_or(Error::UnknownChart(id))
    }

    /// `(chart, local node)` pairs whose chart domain contains global node `g`.
    pub fn overlap(&self, g: usize) -> &[(usize, usize)] {
        &self.overlap[g]
    }

    /// Largest number of charts through a node.
    pub fn multiplicity(&self) -> usize {
        self.overlap.iter().map(|v| v.len()).max().unwrap_or(0)
    }

    /// `max |sum_k pi_k^2 - 1|` over the nodes.
    pub fn partition_defect(&self) -> f64 {
        self.overlap
            .iter()
            .map(|e| {
                let s: f64 = e.iter().map(|&(k, j)| self.pi[k][j] * self.pi[k][j]).sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `max |zeta_k - 1|` over nodes where `pi_k > 0`.
    pub fn envelope_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (pi, zeta) in self.pi.iter().zip(&self.zeta) {
            for (p, z) in pi.iter().zip(zeta) {
                if *p > 0.0 {
                    worst = worst.max((z - 1.0).abs());
                }
            }
        }
        worst
    }

    /// Worst round-trip error of `phi_k o psi_k` and of all transitions
    /// `phi_e o psi_k` followed by their inverses, over chart nodes.
    pub fn transition_defect(&self) -> f64 {
        let dim = self.dim();
        let dist = |a: Point, b: Point| -> f64 {
            (0..dim)
                .map(|i| wrap_centered(a[i] - b[i]).abs())
                .fold(0.0, f64::max)
        };
        let mut worst = 0.0f64;
        for (g, entries) in self.overlap.iter().enumerate() {
            let p = self.grid.point(g);
            for &(k, _) in entries {
                let ck = &self.charts[k];
                let s = ck.phi(p);
                worst = worst.max(dist(ck.psi(s), p));
                for &(e, _) in entries {
                    let ce = &self.charts[e];
                    let se = ce.phi(ck.psi(s));
                    let back = ck.phi(ce.psi(se));
                    let err = (0..dim).map(|a| (back[a] - s[a]).abs()).fold(0.0, f64::max);
                    worst = worst.max(err);
                }
            }
        }
        worst
    }

    /// Number of components of a tensor of the given valence.
    pub fn component_count(&self, valence: [usize; 2]) -> usize {
        self.dim().pow((valence[0] + valence[1]) as u32)
    }

    /// Maps global components of one node into chart `k`'s frame.
    fn frame(&self, k: usize, rank: usize, comps: &[f64]) -> Vec<f64> {
        let a = self.charts[k].axes;
        (0..comps.len())
            .map(|local| {
                let (global, sign) = index_map(a, self.dim(), rank, local);
                sign * comps[global]
            })
            .collect()
    }

    /// Chart representation of a field given by global component arrays
    /// (`comps[c][g]`).
    pub fn from_global(&self, valence: [usize; 2], symmetric: bool, comps: &[Vec<f64>]) -> Result<Field> {
        let count = self.component_count(valence);
        if comps.len() != count {
            return Err(Error::Shape {
                expected: count,
                got: comps.len(),
            });
        }
        for c in comps {
            if c.len() != self.grid.len() {
                return Err(Error::Shape {
                    expected: self.grid.len(),
                    got: c.len(),
                });
            }
        }
        let rank = valence[0] + valence[1];
        let parts = self
            .charts
            .iter()
            .enumerate()
            .map(|(k, chart)| {
                let m = chart.len();
                let mut part = vec![0.0; count * m];
                let mut node = vec![0.0; count];
                for (j, &g) in chart.nodes.iter().enumerate() {
                    for c in 0..count {
                        node[c] = comps[c][g];
                    }
                    let local = self.frame(k, rank, &node);
                    for c in 0..count {
                        part[c * m + j] = local[c];
                    }
                }
                part
            })
            .collect();
        Ok(Field {
            valence,
            symmetric,
            parts,
        })
    }

    /// Scalar field sampled from a function of the manifold point.
    pub fn sample_scalar(&self, f: impl Fn(Point) -> f64) -> Field {
        let comps = vec![self.grid.sample(f)];
        self.from_global([0, 0], false, &comps).expect("scalar shape")
    }

    /// Global component arrays `sum_k pi_k A_k^{-1} (pi_k u_k)`.
    pub fn to_global(&self, u: &Field) -> Result<Vec<Vec<f64>>> {
        let weighted: Vec<Vec<f64>> = (0..self.charts.len())
            .map(|k| restrict(self, u, k, true))
            .collect::<Result<_>>()?;
        glue_components(self, u.valence, &weighted)
    }
}

fn index_map(a: AxisMap, dim: usize, rank: usize, local: usize) -> (usize, f64) {
    let mut rem = local;
    let mut global = 0usize;
    let mut sign = 1.0;
    let mut stride = 1usize;
    for _ in 0..rank {
        let d = rem % dim;
        rem /= dim;
        global += a.perm[d] * stride;
        sign *= a.sign[d];
        stride *= dim;
    }
    (global, sign)
}

/// Chart-wise tensor field; component `c` of chart `k` occupies
/// `parts[k][c * len_k .. (c + 1) * len_k]`. Components are flattened with the
/// first index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub valence: [usize; 2],
    pub symmetric: bool,
    pub parts: Vec<Vec<f64>>,
}

impl Field {
    pub fn rank(&self) -> usize {
        self.valence[0] + self.valence[1]
    }

    /// Component `c` on chart `k`.
    pub fn component(&self, atlas: &Atlas, k: usize, c: usize) -> &[f64] {
        let m = atlas.charts[k].len();
        &self.parts[k][c * m..(c + 1) * m]
    }
}

/// Components of `u` in chart `id`, optionally weighted by `pi_k`.
pub fn restrict(atlas: &Atlas, u: &Field, id: usize, weighted: bool) -> Result<Vec<f64>> {
    let chart = atlas.chart(id)?;
    let part = u.parts.get(id).ok_or(Error::UnknownChart(id))?;
    if !weighted {
        return Ok(part.clone());
    }
    let m = chart.len();
    let pi = &atlas.pi[id];
    Ok(part
        .iter()
        .enumerate()
        .map(|(i, v)| v * pi[i % m])
        .collect())
}

fn glue_components(atlas: &Atlas, valence: [usize; 2], parts: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if parts.len() != atlas.charts.len() {
        return Err(Error::Shape {
            expected: atlas.charts.len(),
            got: parts.len(),
        });
    }
    let count = atlas.component_count(valence);
    let rank = valence[0] + valence[1];
    let dim = atlas.dim();
    let mut global = vec![vec![0.0; atlas.grid.len()]; count];
    for (k, (chart, part)) in atlas.charts.iter().zip(parts).enumerate() {
        let m = chart.len();
        if part.len() != count * m {
            return Err(Error::Shape {
                expected: count * m,
                got: part.len(),
            });
        }
        let a = chart.axes;
        for (j, &g) in chart.nodes.iter().enumerate() {
            let w = atlas.pi[k][j];
            if w == 0.0 {
                continue;
            }
            for local in 0..count {
                let (gc, sign) = index_map(a, dim, rank, local);
                global[gc][g] += w * sign * part[local * m + j];
            }
        }
    }
    Ok(global)
}

/// `sum_k pi_k v_k`, with every `v_k` mapped to a common frame first.
pub fn glue(atlas: &Atlas, valence: [usize; 2], symmetric: bool, parts: &[Vec<f64>]) -> Result<Field> {
    let global = glue_components(atlas, valence, parts)?;
    atlas.from_global(valence, symmetric, &global)
}

/// Largest disagreement between chart representations of `u` on overlaps,
/// compared in the global frame.
pub fn overlap_discrepancy(atlas: &Atlas, u: &Field) -> f64 {
    let dim = atlas.dim();
    let rank = u.rank();
    let count = atlas.component_count(u.valence);
    let mut worst = 0.0f64;
    for entries in &atlas.overlap {
        let mut reference: Option<Vec<f64>> = None;
        for &(k, j) in entries {
            let chart = &atlas.charts[k];
            let m = chart.len();
            let mut g = vec![0.0; count];
            for local in 0..count {
                let (gc, sign) = index_map(chart.axes, dim, rank, local);
                g[gc] = sign * u.parts[k][local * m + j];
            }
            match &reference {
                None => reference = Some(g),
                Some(r) => {
                    for (a, b) in r.iter().zip(&g) {
                        worst = worst.max((a - b).abs());
                    }
                }
            }
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    Sup,
    L2,
}

/// Sup or L2 norm of the pointwise Euclidean norm of the components.
pub fn field_norm(atlas: &Atlas, u: &Field, kind: NormKind) -> Result<f64> {
    let count = atlas.component_count(u.valence);
    match kind {
        NormKind::Sup => {
            let mut worst = 0.0f64;
            for (chart, part) in atlas.charts.iter().zip(&u.parts) {
                let m = chart.len();
                for j in 0..m {
                    let s: f64 = (0..count).map(|c| part[c * m + j].powi(2)).sum();
                    worst = worst.max(s.sqrt());
                }
            }
            Ok(worst)
        }
        NormKind::L2 => {
            let global = atlas.to_global(u)?;
            let cell = atlas.grid.spacing().powi(atlas.dim() as i32);
            let s: f64 = (0..atlas.grid.len())
                .map(|g| global.iter().map(|c| c[g] * c[g]).sum::<f64>())
                .sum();
            Ok((s * cell).sqrt())
        }
    }
}

/// Discrete chart-wise Hoelder quotient `|u(x) - u(y)| / |x - y|^s` over
/// axis-aligned node pairs closer than `delta`. Diagnostic only: below the
/// grid spacing it carries no information.
pub fn holder_seminorm(atlas: &Atlas, u: &Field, s: f64, delta: f64) -> f64 {
    let h = atlas.grid.spacing();
    let reach = ((delta / h).floor() as usize).max(1);
    let mut worst = 0.0f64;
    for (chart, part) in atlas.charts.iter().zip(&u.parts) {
        let [m0, m1] = chart.shape;
        let m = chart.len();
        let count = part.len() / m;
        for c in 0..count {
            let comp = &part[c * m..(c + 1) * m];
            for i0 in 0..m0 {
                for i1 in 0..m1 {
                    for off in 1..=reach {
                        let dist = (off as f64 * h).powf(s);
                        if i0 + off < m0 {
                            let d = comp[(i0 + off) * m1 + i1] - comp[i0 * m1 + i1];
                            worst = worst.max(d.abs() / dist);
                        }
                        if chart.dim == 2 && i1 + off < m1 {
                            let d = comp[i0 * m1 + i1 + off] - comp[i0 * m1 + i1];
                            worst = worst.max(d.abs() / dist);
                        }
                    }
                }
            }
        }
    }
    worst
}

/// First derivatives along local chart axes.
pub trait ChartDerivative {
    fn first(&self, f: &[f64], axis: usize) -> Vec<f64>;
}

impl ChartDerivative for Spectral {
    fn first(&self, f: &[f64], axis: usize) -> Vec<f64> {
        let mut o = [0, 0];
        o[axis] = 1;
        self.derivative(f, o)
    }
}

/// Fourth-order differences on a chart's node block: centered and periodic on
/// periodic axes, shifted five-point stencils near window edges (those nodes
/// lie outside the support of `pi_k`, so gluing never reads them).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartDifferences {
    pub shape: [usize; 2],
    pub periodic: [bool; 2],
    pub h: f64,
}

impl ChartDifferences {
    pub fn for_chart(atlas: &Atlas, chart: &Chart) -> Self {
        Self {
            shape: chart.shape,
            periodic: chart.periodic,
            h: atlas.grid.spacing(),
        }
    }
}

/// Weights of the derivative at `x0` of the Lagrange interpolant through the
/// integer nodes `0..m`.
fn lagrange_derivative_weights(x0: usize, m: usize) -> [f64; 8] {
    let mut w = [0.0; 8];
    for j in 0..m {
        if j == x0 {
            w[j] = (0..m)
                .filter(|&k| k != x0)
                .map(|k| 1.0 / (x0 as f64 - k as f64))
                .sum();
        } else {
            let num: f64 = (0..m)
                .filter(|&k| k != x0 && k != j)
                .map(|k| x0 as f64 - k as f64)
                .product();
            let den: f64 = (0..m)
                .filter(|&k| k != j)
                .map(|k| j as f64 - k as f64)
                .product();
            w[j] = num / den;
        }
    }
    w
}

impl ChartDerivative for ChartDifferences {
    fn first(&self, f: &[f64], axis: usize) -> Vec<f64> {
        let [m0, m1] = self.shape;
        let len = m0 * m1;
        assert_eq!(f.len(), len);
        let m = self.shape[axis];
        let stride = if axis == 0 { m1 } else { 1 };
        let mut out = vec![0.0; len];
        let centered = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
        for (idx, o) in out.iter_mut().enumerate() {
            let i = if axis == 0 { idx / m1 } else { idx % m1 };
            let base = idx - i * stride;
            let at = |q: usize| f[base + q * stride];
            let v = if self.periodic[axis] {
                (0..5)
                    .map(|s| {
                        let q = (i as isize + s as isize - 2).rem_euclid(m as isize) as usize;
                        centered[s] * at(q)
                    })
                    .sum::<f64>()
            } else {
                let start = i.saturating_sub(2).min(m - 5);
                let w = lagrange_derivative_weights(i - start, 5);
                (0..5).map(|s| w[s] * at(start + s)).sum::<f64>()
            };
            *o = v / self.h;
        }
        out
    }
}

/// Eigenvalues `(min, max)` of the symmetric matrix `[[a, b], [b, c]]`.
pub fn sym2_eigenvalues(a: f64, b: f64, c: f64) -> (f64, f64) {
    let mean = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    (mean - rad, mean + rad)
}

/// Metric components `[g11, g12, g22]` on one chart, with cached inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMetric {
    pub g: [Vec<f64>; 3],
    pub inv: [Vec<f64>; 3],
    pub min_eig: f64,
}

impl LocalMetric {
    pub fn new(g: [Vec<f64>; 3]) -> Result<Self> {
        let m = g[0].len();
        let mut inv = [vec![0.0; m], vec![0.0; m], vec![0.0; m]];
        let mut min_eig = f64::INFINITY;
        for i in 0..m {
            let (a, b, c) = (g[0][i], g[1][i], g[2][i]);
            let (lo, _) = sym2_eigenvalues(a, b, c);
            if !(lo >= METRIC_EIGENVALUE_FLOOR) {
                return Err(Error::SingularMetric {
                    node: i,
                    eigenvalue: lo,
                });
            }
            min_eig = min_eig.min(lo);
            let det = a * c - b * b;
            inv[0][i] = c / det;
            inv[1][i] = -b / det;
            inv[2][i] = a / det;
        }
        Ok(Self { g, inv, min_eig })
    }

    /// Component `(i, j)` of the metric.
    pub fn at(&self, i: usize, j: usize) -> &[f64] {
        &self.g[i + j]
    }

    /// Component `(i, j)` of the inverse metric.
    pub fn inv_at(&self, i: usize, j: usize) -> &[f64] {
        &self.inv[i + j]
    }
}

/// `gamma[k][i][j] = Gamma^k_ij`.
pub type Christoffel = [[[Vec<f64>; 2]; 2]; 2];

/// `Gamma^k_ij = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij)` in 2D.
pub fn christoffel_local(d: &impl ChartDerivative, g: &LocalMetric) -> Christoffel {
    let m = g.g[0].len();
    // dg[l][c]: derivative along l of component c (c = 0: 11, 1: 12, 2: 22)
    let dg: [[Vec<f64>; 3]; 2] =
        core::array::from_fn(|l| core::array::from_fn(|c| d.first(&g.g[c], l)));
    let dgc = |l: usize, i: usize, j: usize| -> &[f64] { &dg[l][i + j] };
    core::array::from_fn(|k| {
        core::array::from_fn(|i| {
            core::array::from_fn(|j| {
                let mut out = vec![0.0; m];
                for l in 0..2 {
                    let ginv = g.inv_at(k, l);
                    let (a, b, c) = (dgc(i, j, l), dgc(j, i, l), dgc(l, i, j));
                    for p in 0..m {
                        out[p] += 0.5 * ginv[p] * (a[p] + b[p] - c[p]);
                    }
                }
                out
            })
        })
    })
}

/// `R_ij = d_k Gamma^k_ij - d_j Gamma^k_ik + Gamma^k_kl Gamma^l_ij - Gamma^k_lj Gamma^l_ik`
/// as `[R11, R12, R22]`.
pub fn ricci_local(d: &impl ChartDerivative, g: &LocalMetric) -> [Vec<f64>; 3] {
    let gam = christoffel_local(d, g);
    ricci_from_christoffel(d, &gam)
}

pub fn ricci_from_christoffel(d: &impl ChartDerivative, gam: &Christoffel) -> [Vec<f64>; 3] {
    let m = gam[0][0][0].len();
    let pairs = [(0usize, 0usize), (0, 1), (1, 1)];
    core::array::from_fn(|c| {
        let (i, j) = pairs[c];
        let mut out = vec![0.0; m];
        for k in 0..2 {
            let a = d.first(&gam[k][i][j], k);
            let b = d.first(&gam[k][i][k], j);
            for p in 0..m {
                out[p] += a[p] - b[p];
            }
            for l in 0..2 {
                for p in 0..m {
                    out[p] += gam[k][k][l][p] * gam[l][i][j][p] - gam[k][l][j][p] * gam[l][i][k][p];
                }
            }
        }
        out
    })
}

/// Symmetric positive definite `(0,2)` field on a 2D atlas with per-chart
/// cached inverses.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    pub field: Field,
    local: Vec<LocalMetric>,
    pub min_eig: f64,
}

impl MetricField {
    pub fn new(atlas: &Atlas, field: Field) -> Result<Self> {
        if atlas.dim() != 2 || field.valence != [0, 2] {
            return Err(Error::Config("metric fields are (0,2) tensors on the torus"));
        }
        let mut local = Vec::with_capacity(atlas.charts.len());
        let mut min_eig = f64::INFINITY;
        for k in 0..atlas.charts.len() {
            let c = |i| field.component(atlas, k, i).to_vec();
            let (g11, g12, g21, g22) = (c(0), c(1), c(2), c(3));
            if g12 != g21 {
                return Err(Error::Config("metric components must be symmetric"));
            }
            let lm = LocalMetric::new([g11, g12, g22])?;
            min_eig = min_eig.min(lm.min_eig);
            local.push(lm);
        }
        Ok(Self {
            field,
            local,
            min_eig,
        })
    }

    /// Metric with global components `[g11, g12, g22]`.
    pub fn from_global(atlas: &Atlas, g: [Vec<f64>; 3]) -> Result<Self> {
        let [g11, g12, g22] = g;
        let field = atlas.from_global([0, 2], true, &[g11, g12.clone(), g12, g22])?;
        Self::new(atlas, field)
    }

    pub fn local(&self, k: usize) -> &LocalMetric {
        &self.local[k]
    }

    /// `g^{ik} g_kj - delta^i_j`, worst entry.
    pub fn inverse_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for lm in &self.local {
            for p in 0..lm.g[0].len() {
                for i in 0..2 {
                    for j in 0..2 {
                        let s: f64 = (0..2).map(|k| lm.inv_at(i, k)[p] * lm.at(k, j)[p]).sum();
                        let delta = if i == j { 1.0 } else { 0.0 };
                        worst = worst.max((s - delta).abs());
                    }
                }
            }
        }
        worst
    }
}

fn derivative_for(atlas: &Atlas, k: usize) -> ChartOp {
    let chart = &atlas.charts[k];
    if atlas.charts.len() == 1 && chart.is_global() {
        ChartOp::Spectral(Spectral::new(atlas.grid))
    } else {
        ChartOp::Differences(ChartDifferences::for_chart(atlas, chart))
    }
}

/// Derivative used on a given chart: spectral on a lone periodic chart,
/// fourth-order differences otherwise.
#[derive(Debug, Clone)]
pub enum ChartOp {
    Spectral(Spectral),
    Differences(ChartDifferences),
}

impl ChartDerivative for ChartOp {
    fn first(&self, f: &[f64], axis: usize) -> Vec<f64> {
        match self {
            ChartOp::Spectral(s) => s.first(f, axis),
            ChartOp::Differences(d) => d.first(f, axis),
        }
    }
}

impl Atlas {
    pub fn chart_derivative(&self, k: usize) -> ChartOp {
        derivative_for(self, k)
    }
}

/// Christoffel symbols on every chart.
pub fn christoffel(atlas: &Atlas, g: &MetricField) -> Vec<Christoffel> {
    (0..atlas.charts.len())
        .map(|k| christoffel_local(&atlas.chart_derivative(k), g.local(k)))
        .collect()
}

/// Ricci tensor as a symmetric `(0,2)` field.
pub fn ricci_tensor(atlas: &Atlas, g: &MetricField) -> Result<Field> {
    if atlas.dim() != 2 {
        return Err(Error::Config("Ricci tensor is implemented on the torus"));
    }
    let parts = (0..atlas.charts.len())
        .map(|k| {
            let [r11, r12, r22] = ricci_local(&atlas.chart_derivative(k), g.local(k));
            let mut part = r11;
            part.extend_from_slice(&r12);
            part.extend_from_slice(&r12);
            part.extend(r22);
            part
        })
        .collect();
    Ok(Field {
        valence: [0, 2],
        symmetric: true,
        parts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::FRAC_PI_2;

    fn conformal(atlas: &Atlas, u: impl Fn(Point) -> f64) -> MetricField {
        let grid = atlas.grid();
        let e = grid.sample(|p| (2.0 * u(p)).exp());
        MetricField::from_global(atlas, [e.clone(), vec![0.0; grid.len()], e]).unwrap()
    }

    fn u0(p: Point) -> f64 {
        0.1 * p[0].sin() * p[1].sin()
    }

    #[test]
    fn reference_atlases_and_errors() {
        let t = make_reference(ManifoldKind::Torus, 64, 1).unwrap();
        assert_eq!(t.charts().len(), 1);
        assert_eq!(t.partition_defect(), 0.0);
        assert!(matches!(
            make_reference(ManifoldKind::Torus, 8, 1),
            Err(Error::Resolution { n: 8 })
        ));
        assert!(matches!(
            make_reference(ManifoldKind::Circle, 64, 4),
            Err(Error::UnsupportedKind { charts: 4 })
        ));
        assert!(matches!(
            make_reference(ManifoldKind::Torus, 64, 3),
            Err(Error::ChartCount(3))
        ));
    }

    #[test]
    fn circle_two_charts_partition_of_unity() {
        let a = make_reference(ManifoldKind::Circle, 128, 2).unwrap();
        assert!(a.partition_defect() <= 1e-12);
        assert_eq!(a.envelope_defect(), 0.0);
        assert_eq!(a.multiplicity(), 2);
        assert!(a.transition_defect() <= 1e-12);
    }

    #[test]
    fn torus_four_charts_cover_with_bounded_multiplicity() {
        let a = make_reference(ManifoldKind::Torus, 64, 4).unwrap();
        assert!(a.multiplicity() <= 4);
        assert!(a.partition_defect() <= 1e-12);
        assert!(a.transition_defect() <= 1e-12);
        assert_eq!(a.envelope_defect(), 0.0);
        for g in 0..a.grid().len() {
            assert!(!a.overlap(g).is_empty());
        }
    }

    #[test]
    fn restrict_and_glue() {
        let a = make_reference(ManifoldKind::Circle, 64, 2).unwrap();
        let one = a.sample_scalar(|_| 1.0);
        for k in 0..2 {
            assert_eq!(restrict(&a, &one, k, true).unwrap(), a.pou(k).unwrap());
        }
        let s = a.sample_scalar(|p| p[0].sin());
        for k in 0..2 {
            let chart = a.chart(k).unwrap();
            let r = restrict(&a, &s, k, false).unwrap();
            for (v, &g) in r.iter().zip(chart.nodes()) {
                assert!((v - a.grid().point(g)[0].sin()).abs() <= 1e-12);
            }
        }
        let u = a.sample_scalar(|p| (2.0 * p[0]).cos());
        let parts: Vec<Vec<f64>> = (0..2).map(|k| restrict(&a, &u, k, true).unwrap()).collect();
        let back = glue(&a, [0, 0], false, &parts).unwrap();
        for (x, y) in back.parts.iter().flatten().zip(u.parts.iter().flatten()) {
            assert!((x - y).abs() <= 1e-10);
        }
        let zeros: Vec<Vec<f64>> = (0..2).map(|k| vec![0.0; a.chart(k).unwrap().len()]).collect();
        let z = glue(&a, [0, 0], false, &zeros).unwrap();
        assert!(z.parts.iter().flatten().all(|&v| v == 0.0));
        assert!(matches!(restrict(&a, &u, 5, false), Err(Error::UnknownChart(5))));
        assert!(matches!(
            glue(&a, [0, 0], false, &[vec![0.0; 3]]),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn single_chart_glue_is_identity() {
        let a = make_reference(ManifoldKind::Torus, 16, 1).unwrap();
        let v = vec![a.grid().sample(|p| p[0] * p[1])];
        let f = glue(&a, [0, 0], false, &v).unwrap();
        assert_eq!(restrict(&a, &f, 0, false).unwrap(), v[0]);
    }

    #[test]
    fn tensor_components_transform_consistently() {
        let a = make_reference(ManifoldKind::Torus, 32, 4).unwrap();
        let g = a.grid();
        let comps = vec![
            g.sample(|p| 1.0 + 0.1 * p[0].sin()),
            g.sample(|p| 0.2 * p[1].cos()),
            g.sample(|p| 0.2 * p[1].cos()),
            g.sample(|p| 2.0 + p[0].cos() * p[1].sin()),
        ];
        let f = a.from_global([0, 2], true, &comps).unwrap();
        assert!(overlap_discrepancy(&a, &f) <= 1e-8);
        // swapped chart: local g11 is global g22
        let chart = a.chart(2).unwrap();
        let local11 = f.component(&a, 2, 0);
        for (v, &node) in local11.iter().zip(chart.nodes()) {
            assert_eq!(*v, comps[3][node]);
        }
        let back = a.to_global(&f).unwrap();
        for (x, y) in back.iter().flatten().zip(comps.iter().flatten()) {
            assert!((x - y).abs() <= 1e-12);
        }
        // reflected chart flips the sign of mixed vector components
        let w = a.from_global([1, 0], false, &[g.sample(|_| 1.0), g.sample(|_| 2.0)]).unwrap();
        assert_eq!(w.component(&a, 1, 0)[0], -1.0);
        assert_eq!(w.component(&a, 3, 1)[0], -1.0);
        assert_eq!(w.component(&a, 3, 0)[0], 2.0);
    }

    #[test]
    fn norms() {
        let a = make_reference(ManifoldKind::Torus, 64, 1).unwrap();
        let zero = a.sample_scalar(|_| 0.0);
        assert_eq!(field_norm(&a, &zero, NormKind::Sup).unwrap(), 0.0);
        let three = a.sample_scalar(|_| 3.0);
        assert_eq!(field_norm(&a, &three, NormKind::Sup).unwrap(), 3.0);
        let l2 = field_norm(&a, &three, NormKind::L2).unwrap();
        assert!((l2 - 3.0 * 2.0 * PI).abs() < 1e-12);
        let s = a.sample_scalar(|p| p[0].sin());
        let sup = field_norm(&a, &s, NormKind::Sup).unwrap();
        assert!((sup - 1.0).abs() <= 1.3e-3);
        let h = holder_seminorm(&a, &s, 1.0, 0.2);
        assert!(h <= 1.0 + 1e-12 && h > 0.9);
    }

    #[test]
    fn flat_metric_has_no_connection_or_curvature() {
        let a = make_reference(ManifoldKind::Torus, 32, 1).unwrap();
        let g = conformal(&a, |_| 0.0);
        assert_eq!(g.min_eig, 1.0);
        for gam in christoffel(&a, &g) {
            assert!(gam.iter().flatten().flatten().flatten().all(|v| v.abs() < 1e-14));
        }
        let rc = ricci_tensor(&a, &g).unwrap();
        assert!(rc.parts[0].iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn conformal_christoffel_closed_form() {
        let a = make_reference(ManifoldKind::Torus, 64, 1).unwrap();
        let g = conformal(&a, u0);
        assert!(g.inverse_defect() <= 1e-12);
        let gam = &christoffel(&a, &g)[0];
        let grid = a.grid();
        let ux = grid.sample(|p| 0.1 * p[0].cos() * p[1].sin());
        let uy = grid.sample(|p| 0.1 * p[0].sin() * p[1].cos());
        for i in 0..grid.len() {
            // Gamma^1_11 = u_x, Gamma^1_22 = -u_x, Gamma^2_12 = u_x, Gamma^1_12 = u_y
            assert!((gam[0][0][0][i] - ux[i]).abs() <= 1e-8);
            assert!((gam[0][1][1][i] + ux[i]).abs() <= 1e-8);
            assert!((gam[1][0][1][i] - ux[i]).abs() <= 1e-8);
            assert!((gam[0][0][1][i] - uy[i]).abs() <= 1e-8);
            for k in 0..2 {
                assert_eq!(gam[k][0][1][i], gam[k][1][0][i]);
            }
        }
    }

    #[test]
    fn conformal_ricci_spot_value_and_symmetry() {
        let a = make_reference(ManifoldKind::Torus, 64, 1).unwrap();
        let g = conformal(&a, u0);
        let rc = ricci_tensor(&a, &g).unwrap();
        let node = a.grid().node_at([FRAC_PI_2, FRAC_PI_2]).unwrap();
        let m = a.grid().len();
        assert!((rc.parts[0][node] - 0.2).abs() <= 1e-10);
        assert!(rc.parts[0][m + node].abs() <= 1e-10);
        for p in 0..m {
            assert!((rc.parts[0][m + p] - rc.parts[0][2 * m + p]).abs() <= 1e-12);
        }
    }

    /// Independent oracle: the conformal identity `Rc = (-Lap u) delta` checked
    /// against second differences of the metric's scalar curvature route,
    /// `K = -e^{-2u} Lap u`, sampled through plain finite differences of `u`.
    #[test]
    fn conformal_identity_agrees_with_difference_oracle() {
        let a = make_reference(ManifoldKind::Torus, 64, 1).unwrap();
        let g = conformal(&a, u0);
        let rc = ricci_tensor(&a, &g).unwrap();
        let grid = a.grid();
        let h = 1e-4;
        for &node in &[5usize, 700, 2100, 4000] {
            let p = grid.point(node);
            let lap = (u0([p[0] + h, p[1]]) + u0([p[0] - h, p[1]]) + u0([p[0], p[1] + h])
                + u0([p[0], p[1] - h])
                - 4.0 * u0(p))
                / (h * h);
            assert!((rc.parts[0][node] + lap).abs() < 1e-6);
        }
    }

    #[test]
    fn multi_chart_ricci_converges_at_fourth_order() {
        let err = |n: usize| {
            let a = make_reference(ManifoldKind::Torus, n, 4).unwrap();
            let g = conformal(&a, u0);
            let rc = ricci_tensor(&a, &g).unwrap();
            // compare the glued tensor; window-edge nodes carry zero weight
            let glued = a.to_global(&rc).unwrap();
            let grid = a.grid();
            (0..grid.len())
                .map(|i| {
                    let p = grid.point(i);
                    let exact = 0.2 * p[0].sin() * p[1].sin();
                    (glued[0][i] - exact).abs().max(glued[1][i].abs())
                })
                .fold(0.0, f64::max)
        };
        let order = (err(32) / err(64)).log2();
        assert!(order >= 3.5, "order {order}");
    }

    #[test]
    fn degenerate_metric_is_rejected() {
        let a = make_reference(ManifoldKind::Torus, 16, 1).unwrap();
        let m = a.grid().len();
        let r = MetricField::from_global(&a, [vec![1.0; m], vec![1.0; m], vec![1.0; m]]);
        assert!(matches!(r, Err(Error::SingularMetric { .. })));
    }

    #[test]
    fn edge_stencils_are_fourth_order() {
        let d = |n: usize| {
            let h = 0.5 / n as f64;
            let cd = ChartDifferences {
                shape: [n, 1],
                periodic: [false, true],
                h,
            };
            let f: Vec<f64> = (0..n).map(|i| (i as f64 * h).exp()).collect();
            let df = cd.first(&f, 0);
            (0..n)
                .map(|i| (df[i] - (i as f64 * h).exp()).abs())
                .fold(0.0, f64::max)
        };
        let order = (d(20) / d(40)).log2();
        assert!(order > 3.7, "order {order}");
    }
}
