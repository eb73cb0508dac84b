//! Radix-2 complex FFT and its tensor-product extension to 1–3 dimensions.
//!
//! Transforms are unnormalized: `forward` computes Σ_j f_j e^{−2πi jk/n} and
//! `inverse` the conjugate sum. Scaling is applied by [`crate::spectral`].

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
// float math comes from libm on targets without std
#[allow(unused_imports)]
use num_traits::Float;

/// One-dimensional plan for a power-of-two length.
#[derive(Debug, Clone)]
pub struct Fft1d {
    n: usize,
    /// e^{−2πi k/n} for k < n/2, each evaluated directly (no recurrence).
    twiddles: Vec<Complex64>,
    bitrev: Vec<u32>,
}

impl Fft1d {
    pub fn new(n: usize) -> Self {
        assert!(n.is_power_of_two() && n >= 2, "FFT length must be a power of two");
        let bits = n.trailing_zeros();
        let twiddles = (0..n / 2)
            .map(|k| {
                let a = -2.0 * PI * (k as f64) / (n as f64);
                Complex64::new(a.cos(), a.sin())
            })
            .collect();
        let bitrev = (0..n as u32)
            .map(|i| i.reverse_bits() >> (32 - bits))
            .collect();
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

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.run(buf, false);
    }

    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.run(buf, true);
    }

    fn run(&self, buf: &mut [Complex64], inverse: bool) {
        let n = self.n;
        debug_assert_eq!(buf.len(), n);
        for i in 0..n {
            let j = self.bitrev[i] as usize;
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut half = 1;
        while half < n {
            let stride = n / (2 * half);
            for start in (0..n).step_by(2 * half) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            half *= 2;
        }
    }
}

/// Row-major d-dimensional transform on an `n^d` cube; the last axis is
/// contiguous.
#[derive(Debug, Clone)]
pub struct FftPlan {
    dim: usize,
    line: Fft1d,
}

impl FftPlan {
    pub fn new(dim: usize, n: usize) -> Self {
        assert!((1..=3).contains(&dim));
        Self {
            dim,
            line: Fft1d::new(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.line.len()
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, false);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, true);
    }

    fn run(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n();
        let total = n.pow(self.dim as u32);
        assert_eq!(data.len(), total, "buffer does not match plan size");
        let apply = |buf: &mut [Complex64]| {
            if inverse {
                self.line.inverse(buf)
            } else {
                self.line.forward(buf)
            }
        };
        // contiguous axis
        for row in data.chunks_exact_mut(n) {
            apply(row);
        }
        if self.dim == 1 {
            return;
        }
        let mut scratch = vec![Complex64::new(0.0, 0.0); n];
        // strided axes: stride n (second to last), and n² for d = 3
        for axis_stride in (1..self.dim).map(|a| n.pow(a as u32)) {
            let block = axis_stride * n;
            for base in (0..total).step_by(block) {
                for offset in 0..axis_stride {
                    let start = base + offset;
                    for (i, s) in scratch.iter_mut().enumerate() {
                        *s = data[start + i * axis_stride];
                    }
                    apply(&mut scratch);
                    for (i, s) in scratch.iter().enumerate() {
                        data[start + i * axis_stride] = *s;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, v)| {
                        let a = -2.0 * PI * ((j * k) % n) as f64 / n as f64;
                        v * Complex64::new(a.cos(), a.sin())
                    })
                    .sum()
            })
            .collect()
    }

    fn test_signal(n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|j| {
                let t = j as f64;
                Complex64::new((0.37 * t).sin() + 0.1 * t.sqrt(), (1.3 * t).cos() - 0.2)
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft() {
        for n in [2usize, 4, 8, 64, 256] {
            let x = test_signal(n);
            let mut y = x.clone();
            Fft1d::new(n).forward(&mut y);
            let reference = naive_dft(&x);
            for (a, b) in y.iter().zip(&reference) {
                assert!((a - b).norm() < 1e-10 * n as f64, "n = {n}");
            }
        }
    }

    #[test]
    fn three_dim_matches_separable_naive() {
        let n = 4;
        let x = test_signal(n * n * n);
        let mut y = x.clone();
        FftPlan::new(3, n).forward(&mut y);
        for k0 in 0..n {
            for k1 in 0..n {
                for k2 in 0..n {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for j0 in 0..n {
                        for j1 in 0..n {
                            for j2 in 0..n {
                                let ph = -2.0 * PI * ((j0 * k0 + j1 * k1 + j2 * k2) % n) as f64
                                    / n as f64;
                                acc += x[(j0 * n + j1) * n + j2]
                                    * Complex64::new(ph.cos(), ph.sin());
                            }
                        }
                    }
                    assert!((acc - y[(k0 * n + k1) * n + k2]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn inverse_undoes_forward() {
        let n = 32;
        let plan = FftPlan::new(2, n);
        let x = test_signal(n * n);
        let mut y = x.clone();
        plan.forward(&mut y);
        plan.inverse(&mut y);
        let scale = (n * n) as f64;
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b / scale).norm() < 1e-12);
        }
    }
}
