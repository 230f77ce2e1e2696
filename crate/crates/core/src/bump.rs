//! Smooth cutoff profiles built from `exp(-1/t)`, with exact derivatives up to
//! order four via truncated Taylor arithmetic.

use core::ops::{Add, Div, Mul, Neg, Sub};

use num_traits::Float;

/// Highest derivative order carried by [`Jet`].
pub const JET_ORDER: usize = 4;

/// Taylor coefficients `c_k = f^(k)(t) / k!`, `k <= JET_ORDER`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet(pub [f64; JET_ORDER + 1]);

const FACTORIAL: [f64; JET_ORDER + 1] = [1.0, 1.0, 2.0, 6.0, 24.0];

impl Jet {
    pub fn constant(c: f64) -> Self {
        let mut a = [0.0; JET_ORDER + 1];
        a[0] = c;
        Jet(a)
    }

    /// The identity function at `t`.
    pub fn variable(t: f64) -> Self {
        let mut a = [0.0; JET_ORDER + 1];
        a[0] = t;
        a[1] = 1.0;
        Jet(a)
    }

    pub fn value(&self) -> f64 {
        self.0[0]
    }

    /// `k`-th derivative.
    pub fn derivative(&self, k: usize) -> f64 {
        self.0[k] * FACTORIAL[k]
    }

    pub fn derivatives(&self) -> [f64; JET_ORDER + 1] {
        core::array::from_fn(|k| self.derivative(k))
    }

    pub fn exp(self) -> Self {
        let a = self.0;
        let mut e = [0.0; JET_ORDER + 1];
        e[0] = a[0].exp();
        for k in 1..=JET_ORDER {
            let s: f64 = (1..=k).map(|j| j as f64 * a[j] * e[k - j]).sum();
            e[k] = s / k as f64;
        }
        Jet(e)
    }

    pub fn recip(self) -> Self {
        let a = self.0;
        let mut r = [0.0; JET_ORDER + 1];
        r[0] = 1.0 / a[0];
        for k in 1..=JET_ORDER {
            let s: f64 = (1..=k).map(|j| a[j] * r[k - j]).sum();
            r[k] = -s / a[0];
        }
        Jet(r)
    }

    /// Chain rule for an inner affine map `t -> a t + b` already applied to the
    /// argument: rescales coefficient `k` by `a^k`.
    pub fn scale_argument(self, a: f64) -> Self {
        let mut out = self.0;
        let mut p = 1.0;
        for c in out.iter_mut() {
            *c *= p;
            p *= a;
        }
        Jet(out)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet(core::array::from_fn(|k| self.0[k] + o.0[k]))
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet(core::array::from_fn(|k| self.0[k] - o.0[k]))
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet(self.0.map(|c| -c))
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet(core::array::from_fn(|k| {
            (0..=k).map(|j| self.0[j] * o.0[k - j]).sum()
        }))
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

/// `exp(-1/t)` for `t > 0`, zero otherwise.
fn flat_edge(t: Jet) -> Jet {
    if t.value() <= 0.0 {
        Jet::constant(0.0)
    } else {
        (-t.recip()).exp()
    }
}

/// Smooth transition from 0 (`t <= 0`) to 1 (`t >= 1`); all derivatives vanish
/// at both ends.
pub fn smoothstep(t: f64) -> Jet {
    if t <= 0.0 {
        return Jet::constant(0.0);
    }
    if t >= 1.0 {
        return Jet::constant(1.0);
    }
    let x = Jet::variable(t);
    let a = flat_edge(x);
    let b = flat_edge(Jet::constant(1.0) - x);
    a / (a + b)
}

/// Radial profile equal to 1 on `[0, inner]` and 0 on `[outer, inf)`, as a
/// jet in the radius.
pub fn plateau(r: f64, inner: f64, outer: f64) -> Jet {
    debug_assert!(outer > inner && inner >= 0.0);
    let w = outer - inner;
    let s = smoothstep((r - inner) / w).scale_argument(1.0 / w);
    Jet::constant(1.0) - s
}

/// The compactly supported bump `exp(-1/(1-t^2))` on `(-1, 1)`.
pub fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

/// `sup |d/dr plateau(r, inner, outer)|` by dense sampling of the transition.
pub fn plateau_slope_bound(inner: f64, outer: f64) -> f64 {
    let samples = 20_000;
    (0..=samples)
        .map(|i| {
            let r = inner + (outer - inner) * i as f64 / samples as f64;
            plateau(r, inner, outer).derivative(1).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jet_arithmetic_matches_closed_forms() {
        // f(t) = exp(2t) / (1 + t) at t = 0.3
        let t = 0.3;
        let x = Jet::variable(t);
        let f = (x * Jet::constant(2.0)).exp() / (Jet::constant(1.0) + x);
        let g = |t: f64| (2.0 * t).exp() / (1.0 + t);
        assert!((f.value() - g(t)).abs() < 1e-15);
        // f' = e^{2t}(2(1+t) - 1)/(1+t)^2
        let d1 = (2.0 * t).exp() * (2.0 * (1.0 + t) - 1.0) / (1.0 + t).powi(2);
        assert!((f.derivative(1) - d1).abs() < 1e-13);
        // fourth derivative by a central difference of the analytic second derivative
        let h = 1e-3;
        let second = |s: f64| (Jet::variable(s) * Jet::constant(2.0)).exp().derivative(2);
        let fd = (second(t + h) - 2.0 * second(t) + second(t - h)) / (h * h);
        let e4 = (Jet::variable(t) * Jet::constant(2.0)).exp().derivative(4);
        assert!((fd - e4).abs() / e4 < 1e-5);
    }

    #[test]
    fn smoothstep_limits_and_symmetry() {
        assert_eq!(smoothstep(-0.1).value(), 0.0);
        assert_eq!(smoothstep(1.0).value(), 1.0);
        assert!((smoothstep(0.5).value() - 0.5).abs() < 1e-15);
        for t in [0.1, 0.37, 0.8] {
            let a = smoothstep(t);
            let b = smoothstep(1.0 - t);
            assert!((a.value() + b.value() - 1.0).abs() < 1e-14);
            assert!((a.derivative(1) - b.derivative(1)).abs() < 1e-12);
        }
    }

    #[test]
    fn plateau_derivatives_by_differences() {
        let (inner, outer) = (0.15, 0.3);
        let r = 0.21;
        let h = 1e-5;
        let p = |r: f64| plateau(r, inner, outer);
        let fd1 = (p(r + h).value() - p(r - h).value()) / (2.0 * h);
        assert!((fd1 - p(r).derivative(1)).abs() < 1e-6);
        let fd3 = (p(r + h).derivative(2) - p(r - h).derivative(2)) / (2.0 * h);
        assert!((fd3 - p(r).derivative(3)).abs() / p(r).derivative(3).abs() < 1e-6);
        assert_eq!(p(0.1).value(), 1.0);
        assert_eq!(p(0.3).value(), 0.0);
    }

    #[test]
    fn slope_bound_scales_inversely_with_width() {
        let a = plateau_slope_bound(0.15, 0.3);
        let b = plateau_slope_bound(0.3, 0.6);
        assert!((a / b - 2.0).abs() < 1e-6);
        assert!(a > 1.0 / 0.15);
    }
}
