//! Differentiation and interpolation on periodic grids.
//!
//! Single-chart grids use Fourier differentiation and trigonometric
//! interpolation. Fourth-order centered differences and local Lagrange
//! interpolation are provided for the multi-chart code paths and for the
//! particle tracker, where per-point cost matters more than spectral accuracy.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use num_traits::Float;

use crate::fft::FftPlan;
use crate::grid::{wrap_periodic, Grid, Point};

/// Fourier machinery bound to one grid.
#[derive(Debug, Clone)]
pub struct Spectral {
    grid: Grid,
    plan: FftPlan,
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        Self {
            grid,
            plan: FftPlan::new(grid.n()),
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Signed wavenumber of FFT bin `i`; the Nyquist bin is reported as `+n/2`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        let n = self.grid.n();
        if i <= n / 2 {
            i as f64
        } else {
            i as f64 - n as f64
        }
    }

    /// Unnormalized forward transform of real samples (all axes).
    pub fn forward(&self, f: &[f64]) -> Vec<Complex64> {
        assert_eq!(f.len(), self.grid.len());
        let mut data: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.apply_axes(&mut data, false);
        data
    }

    /// Inverse transform returning the real part.
    pub fn inverse_real(&self, mut c: Vec<Complex64>) -> Vec<f64> {
        self.apply_axes(&mut c, true);
        c.into_iter().map(|v| v.re).collect()
    }

    fn apply_axes(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.grid.n();
        let run = |row: &mut [Complex64]| {
            if inverse {
                self.plan.inverse(row)
            } else {
                self.plan.forward(row)
            }
        };
        if self.grid.dim() == 1 {
            run(data);
            return;
        }
        for row in data.chunks_mut(n) {
            run(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = data[i * n + j];
            }
            run(&mut col);
            for i in 0..n {
                data[i * n + j] = col[i];
            }
        }
    }

    /// Multiplier of `d^p/dx^p` for bin `i`; odd derivatives drop the Nyquist bin.
    fn multiplier(&self, i: usize, p: usize) -> Complex64 {
        if p == 0 {
            return Complex64::new(1.0, 0.0);
        }
        let n = self.grid.n();
        if i == n / 2 && p % 2 == 1 {
            return Complex64::new(0.0, 0.0);
        }
        let k = self.wavenumber(i);
        Complex64::new(0.0, k).powu(p as u32)
    }

    fn apply_multiplier(&self, hat: &[Complex64], order: [usize; 2]) -> Vec<Complex64> {
        let n = self.grid.n();
        if self.grid.dim() == 1 {
            hat.iter()
                .enumerate()
                .map(|(i, c)| c * self.multiplier(i, order[0]))
                .collect()
        } else {
            let mx: Vec<Complex64> = (0..n).map(|i| self.multiplier(i, order[0])).collect();
            let my: Vec<Complex64> = (0..n).map(|i| self.multiplier(i, order[1])).collect();
            hat.iter()
                .enumerate()
                .map(|(idx, c)| c * mx[idx / n] * my[idx % n])
                .collect()
        }
    }

    /// `d^{order[0]}_x d^{order[1]}_y f`.
    pub fn derivative(&self, f: &[f64], order: [usize; 2]) -> Vec<f64> {
        let hat = self.forward(f);
        self.inverse_real(self.apply_multiplier(&hat, order))
    }

    /// Several derivatives sharing one forward transform.
    pub fn derivatives(&self, f: &[f64], orders: &[[usize; 2]]) -> Vec<Vec<f64>> {
        let hat = self.forward(f);
        orders
            .iter()
            .map(|&o| self.inverse_real(self.apply_multiplier(&hat, o)))
            .collect()
    }

    /// Applies a real Fourier-diagonal operator given as a function of the
    /// wavenumbers `(k0, k1)` (k1 = 0 in 1D).
    pub fn apply_symbol(&self, f: &[f64], symbol: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let n = self.grid.n();
        let mut hat = self.forward(f);
        for (idx, c) in hat.iter_mut().enumerate() {
            let (k0, k1) = if self.grid.dim() == 1 {
                (self.wavenumber(idx), 0.0)
            } else {
                (self.wavenumber(idx / n), self.wavenumber(idx % n))
            };
            *c *= symbol(k0, k1);
        }
        self.inverse_real(hat)
    }

    /// Trigonometric interpolant of the samples `f`.
    pub fn interpolant(&self, f: &[f64]) -> Interpolant {
        let scale = 1.0 / self.grid.len() as f64;
        let coeffs = self.forward(f).into_iter().map(|c| c * scale).collect();
        Interpolant {
            grid: self.grid,
            wavenumbers: (0..self.grid.n()).map(|i| self.wavenumber(i)).collect(),
            coeffs,
        }
    }
}

/// Band-limited trigonometric interpolant; the Nyquist mode is carried by
/// `cos(n x / 2)` so the interpolant is real and exact at the nodes.
#[derive(Debug, Clone)]
pub struct Interpolant {
    grid: Grid,
    wavenumbers: Vec<f64>,
    coeffs: Vec<Complex64>,
}

impl Interpolant {
    fn basis(&self, x: f64, p: usize) -> Vec<Complex64> {
        let n = self.grid.n();
        self.wavenumbers
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                if i == n / 2 {
                    // d^p/dx^p cos(kx) = k^p cos(kx + p pi/2)
                    let v = k.powi(p as i32) * (k * x + p as f64 * FRAC_PI_2).cos();
                    Complex64::new(v, 0.0)
                } else {
                    let phase = Complex64::new(0.0, k * x).exp();
                    Complex64::new(0.0, k).powu(p as u32) * phase
                }
            })
            .collect()
    }

    pub fn eval(&self, p: Point) -> f64 {
        self.eval_derivative(p, [0, 0])
    }

    /// Exact derivative of the interpolant.
    pub fn eval_derivative(&self, p: Point, order: [usize; 2]) -> f64 {
        let n = self.grid.n();
        let bx = self.basis(p[0], order[0]);
        if self.grid.dim() == 1 {
            return self
                .coeffs
                .iter()
                .zip(&bx)
                .map(|(c, b)| (c * b).re)
                .sum();
        }
        let by = self.basis(p[1], order[1]);
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, bxi) in bx.iter().enumerate() {
            let row = &self.coeffs[i * n..(i + 1) * n];
            let inner: Complex64 = row.iter().zip(&by).map(|(c, b)| c * b).sum();
            acc += inner * bxi;
        }
        acc.re
    }
}

/// Fourth-order centered periodic difference along `axis`, derivative order 1 or 2.
pub fn fd4_derivative(grid: Grid, f: &[f64], axis: usize, order: usize) -> Vec<f64> {
    assert!(axis < grid.dim() && (1..=2).contains(&order));
    let n = grid.n();
    let h = grid.spacing();
    let at = |idx: usize, shift: isize| -> f64 {
        let mut mi = grid.multi_index(idx);
        mi[axis] = (mi[axis] as isize + shift).rem_euclid(n as isize) as usize;
        f[grid.index(mi[0], mi[1])]
    };
    (0..grid.len())
        .map(|i| {
            let (m2, m1, p1, p2) = (at(i, -2), at(i, -1), at(i, 1), at(i, 2));
            if order == 1 {
                (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h)
            } else {
                (-p2 + 16.0 * p1 - 30.0 * f[i] + 16.0 * m1 - m2) / (12.0 * h * h)
            }
        })
        .collect()
}

/// Mixed derivative `d^{order[0]}_x d^{order[1]}_y` built from [`fd4_derivative`].
pub fn fd4_mixed(grid: Grid, f: &[f64], order: [usize; 2]) -> Vec<f64> {
    let mut out = f.to_vec();
    for (axis, &p) in order.iter().enumerate().take(grid.dim()) {
        match p {
            0 => {}
            1 | 2 => out = fd4_derivative(grid, &out, axis, p),
            _ => {
                for _ in 0..p {
                    out = fd4_derivative(grid, &out, axis, 1);
                }
            }
        }
    }
    out
}

/// Local periodic Lagrange interpolation through `points` nodes per axis
/// (`points = 6` is the quintic interpolant).
pub fn lagrange_periodic(grid: Grid, f: &[f64], p: Point, points: usize) -> f64 {
    let (idx, w) = lagrange_stencil(grid, p, points);
    if grid.dim() == 1 {
        return (0..points).map(|a| w[0][a] * f[idx[0][a]]).sum();
    }
    let mut acc = 0.0;
    for a in 0..points {
        let mut row = 0.0;
        for b in 0..points {
            row += w[1][b] * f[grid.index(idx[0][a], idx[1][b])];
        }
        acc += w[0][a] * row;
    }
    acc
}

/// Node indices and weights of the local Lagrange stencil around `p`.
pub fn lagrange_stencil(grid: Grid, p: Point, points: usize) -> ([[usize; 8]; 2], [[f64; 8]; 2]) {
    assert!((2..=8).contains(&points));
    let n = grid.n() as isize;
    let h = grid.spacing();
    let mut idx = [[0usize; 8]; 2];
    let mut w = [[0.0f64; 8]; 2];
    for axis in 0..grid.dim() {
        let x = wrap_periodic(p[axis]) / h;
        let base = x.floor() as isize - (points as isize / 2 - 1);
        let s = x - base as f64;
        for a in 0..points {
            idx[axis][a] = (base + a as isize).rem_euclid(n) as usize;
            let mut l = 1.0;
            for b in 0..points {
                if b != a {
                    l *= (s - b as f64) / (a as f64 - b as f64);
                }
            }
            w[axis][a] = l;
        }
    }
    (idx, w)
}

/// Derivative operator chosen per atlas: spectral on single periodic charts,
/// fourth-order differences otherwise.
#[derive(Debug, Clone)]
pub enum Differentiator {
    Spectral(Spectral),
    FiniteDifference(Grid),
}

impl Differentiator {
    pub fn grid(&self) -> Grid {
        match self {
            Differentiator::Spectral(s) => s.grid(),
            Differentiator::FiniteDifference(g) => *g,
        }
    }

    pub fn derivative(&self, f: &[f64], order: [usize; 2]) -> Vec<f64> {
        match self {
            Differentiator::Spectral(s) => s.derivative(f, order),
            Differentiator::FiniteDifference(g) => fd4_mixed(*g, f, order),
        }
    }

    /// First derivatives along each axis.
    pub fn gradient(&self, f: &[f64]) -> Vec<Vec<f64>> {
        match self {
            Differentiator::Spectral(s) if s.grid().dim() == 2 => {
                s.derivatives(f, &[[1, 0], [0, 1]])
            }
            _ => (0..self.grid().dim())
                .map(|a| {
                    let mut o = [0, 0];
                    o[a] = 1;
                    self.derivative(f, o)
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::TAU;

    fn max_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn spectral_derivatives_exact_for_trig_polynomials() {
        let g = Grid::new(2, 32).unwrap();
        let s = Spectral::new(g);
        let f = g.sample(|p| (3.0 * p[0]).sin() * (2.0 * p[1]).cos());
        let fx = s.derivative(&f, [1, 0]);
        let fxy = s.derivative(&f, [1, 1]);
        let ex = g.sample(|p| 3.0 * (3.0 * p[0]).cos() * (2.0 * p[1]).cos());
        let exy = g.sample(|p| -6.0 * (3.0 * p[0]).cos() * (2.0 * p[1]).sin());
        assert!(max_err(&fx, &ex) < 1e-12);
        assert!(max_err(&fxy, &exy) < 1e-11);
    }

    #[test]
    fn interpolant_reproduces_nodes_and_band_limited_functions() {
        let g = Grid::new(1, 16).unwrap();
        let s = Spectral::new(g);
        let f = g.sample(|p| (p[0]).sin() + 0.3 * (8.0 * p[0]).cos());
        let it = s.interpolant(&f);
        for i in 0..g.len() {
            assert!((it.eval(g.point(i)) - f[i]).abs() < 1e-13);
        }
        let smooth = g.sample(|p| (2.0 * p[0]).sin());
        let it = s.interpolant(&smooth);
        for x in [0.1, 1.234, 5.9] {
            assert!((it.eval([x, 0.0]) - (2.0 * x).sin()).abs() < 1e-13);
            assert!((it.eval_derivative([x, 0.0], [1, 0]) - 2.0 * (2.0 * x).cos()).abs() < 1e-12);
            assert!((it.eval_derivative([x, 0.0], [3, 0]) + 8.0 * (2.0 * x).cos()).abs() < 1e-11);
        }
    }

    #[test]
    fn interpolant_two_dimensional() {
        let g = Grid::new(2, 16).unwrap();
        let s = Spectral::new(g);
        let f = g.sample(|p| (p[0] - 2.0 * p[1]).cos());
        let it = s.interpolant(&f);
        let q = [0.77, 4.1];
        assert!((it.eval(q) - (q[0] - 2.0 * q[1]).cos()).abs() < 1e-13);
        assert!((it.eval_derivative(q, [0, 1]) - 2.0 * (q[0] - 2.0 * q[1]).sin()).abs() < 1e-12);
    }

    #[test]
    fn fd4_converges_at_fourth_order() {
        let errs: Vec<f64> = [32usize, 64]
            .iter()
            .map(|&n| {
                let g = Grid::new(1, n).unwrap();
                let f = g.sample(|p| p[0].sin().exp());
                let d = fd4_derivative(g, &f, 0, 1);
                let e = g.sample(|p| p[0].cos() * p[0].sin().exp());
                max_err(&d, &e)
            })
            .collect();
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 3.8, "order {order}");
    }

    #[test]
    fn quintic_lagrange_accuracy() {
        let g = Grid::new(2, 64).unwrap();
        let f = g.sample(|p| p[0].sin() * p[1].cos());
        for q in [[0.3, 0.2], [6.2, 3.3], [TAU - 1e-3, 1e-3]] {
            let v = lagrange_periodic(g, &f, q, 6);
            assert!((v - q[0].sin() * q[1].cos()).abs() < 1e-8);
        }
        // exact at nodes
        assert!((lagrange_periodic(g, &f, g.point(77), 6) - f[77]).abs() < 1e-15);
    }
}
