//! Complex discrete Fourier transforms of arbitrary length.
//!
//! Powers of two use an iterative radix-2 transform; other lengths fall back to
//! the direct O(n^2) sum, which is adequate for the small even grids used here.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use num_traits::Float;

#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    // e^{-2 pi i k / n}, k < n
    twiddles: Vec<Complex64>,
    bitrev: Vec<usize>,
}

impl FftPlan {
    pub fn new(n: usize) -> Self {
        let twiddles = (0..n)
            .map(|k| {
                let a = -2.0 * PI * k as f64 / n as f64;
                Complex64::new(a.cos(), a.sin())
            })
            .collect();
        let bitrev = if n.is_power_of_two() && n > 1 {
            let bits = n.trailing_zeros();
            (0..n)
                .map(|i| i.reverse_bits() >> (usize::BITS - bits))
                .collect()
        } else {
            Vec::new()
        };
        Self {
            n,
            twiddles,
            bitrev,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized forward transform `X_k = sum_j x_j e^{-2 pi i jk/n}`.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    /// Inverse transform including the `1/n` normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, true);
        let scale = 1.0 / self.n as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        assert_eq!(data.len(), self.n, "fft length mismatch");
        if self.n <= 1 {
            return;
        }
        if self.bitrev.is_empty() {
            self.direct(data, inverse);
            return;
        }
        for i in 0..self.n {
            let j = self.bitrev[i];
            if i < j {
                data.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= self.n {
            let half = len / 2;
            let stride = self.n / len;
            for start in (0..self.n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = data[start + k];
                    let b = data[start + k + half] * w;
                    data[start + k] = a + b;
                    data[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }

    fn direct(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        let input: Vec<Complex64> = data.to_vec();
        for (k, out) in data.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, x) in input.iter().enumerate() {
                let mut w = self.twiddles[(j * k) % n];
                if inverse {
                    w = w.conj();
                }
                acc += x * w;
            }
            *out = acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn naive(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, v)| {
                        let a = -2.0 * PI * (j * k) as f64 / n as f64;
                        v * Complex64::new(a.cos(), a.sin())
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn radix2_matches_direct_sum() {
        for &n in &[2usize, 8, 64] {
            let x: Vec<Complex64> = (0..n)
                .map(|j| Complex64::new((j as f64 * 0.37).sin(), (j as f64).cos() * 0.5))
                .collect();
            let mut y = x.clone();
            FftPlan::new(n).forward(&mut y);
            for (a, b) in y.iter().zip(naive(&x)) {
                assert!((a - b).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn non_power_of_two_round_trip() {
        let plan = FftPlan::new(18);
        let x: Vec<Complex64> = (0..18).map(|j| Complex64::new(j as f64, 1.0)).collect();
        let mut y = x.clone();
        plan.forward(&mut y);
        plan.inverse(&mut y);
        for (a, b) in y.iter().zip(&x) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn single_mode_lands_in_one_bin() {
        let n = 16;
        let mut x: Vec<Complex64> = (0..n)
            .map(|j| {
                let a = 2.0 * PI * 3.0 * j as f64 / n as f64;
                Complex64::new(a.cos(), a.sin())
            })
            .collect();
        FftPlan::new(n).forward(&mut x);
        let expect = {
            let mut e = vec![Complex64::new(0.0, 0.0); n];
            e[3] = Complex64::new(n as f64, 0.0);
            e
        };
        for (a, b) in x.iter().zip(&expect) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
