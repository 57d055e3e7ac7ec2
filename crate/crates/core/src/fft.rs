//! Discrete Fourier transforms of arbitrary length.
//!
//! Power-of-two lengths use an iterative radix-2 kernel; other lengths go
//! through Bluestein's chirp-z reformulation on a padded power-of-two size.

use crate::prelude::*;
use core::f64::consts::PI;
use num_complex::Complex64;

/// Precomputed transform of a fixed length.
#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    plan: Plan,
}

#[derive(Debug, Clone)]
enum Plan {
    Radix2 {
        twiddles: Vec<Complex64>,
    },
    Bluestein {
        m: usize,
        chirp: Vec<Complex64>,
        kernel_hat: Vec<Complex64>,
        inner: Box<Fft>,
    },
}

impl Fft {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "fft length must be positive");
        if n.is_power_of_two() {
            let twiddles = (0..n / 2)
                .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
                .collect();
            return Fft {
                n,
                plan: Plan::Radix2 { twiddles },
            };
        }
        let m = (2 * n - 1).next_power_of_two();
        // chirp_k = exp(-i pi k^2 / n); k^2 reduced mod 2n to keep the angle small.
        let chirp: Vec<Complex64> = (0..n)
            .map(|k| {
                let k2 = (k as u128 * k as u128 % (2 * n as u128)) as f64;
                Complex64::from_polar(1.0, -PI * k2 / n as f64)
            })
            .collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); m];
        kernel[0] = chirp[0].conj();
        for k in 1..n {
            kernel[k] = chirp[k].conj();
            kernel[m - k] = chirp[k].conj();
        }
        let inner = Fft::new(m);
        inner.forward(&mut kernel);
        Fft {
            n,
            plan: Plan::Bluestein {
                m,
                chirp,
                kernel_hat: kernel,
                inner: Box::new(inner),
            },
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place forward transform, `X_k = sum_j x_j exp(-2 pi i jk/n)`.
    pub fn forward(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.n);
        match &self.plan {
            Plan::Radix2 { twiddles } => radix2(data, twiddles),
            Plan::Bluestein {
                m,
                chirp,
                kernel_hat,
                inner,
            } => {
                let mut a = vec![Complex64::new(0.0, 0.0); *m];
                for k in 0..self.n {
                    a[k] = data[k] * chirp[k];
                }
                inner.forward(&mut a);
                for (x, y) in a.iter_mut().zip(kernel_hat) {
                    *x *= y;
                }
                inner.inverse_unscaled(&mut a);
                let scale = 1.0 / *m as f64;
                for k in 0..self.n {
                    data[k] = a[k] * chirp[k] * scale;
                }
            }
        }
    }

    /// In-place inverse transform including the `1/n` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.inverse_unscaled(data);
        let s = 1.0 / self.n as f64;
        for x in data.iter_mut() {
            *x *= s;
        }
    }

    fn inverse_unscaled(&self, data: &mut [Complex64]) {
        for x in data.iter_mut() {
            *x = x.conj();
        }
        self.forward(data);
        for x in data.iter_mut() {
            *x = x.conj();
        }
    }
}

fn radix2(data: &mut [Complex64], twiddles: &[Complex64]) {
    let n = data.len();
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            data.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let step = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..len / 2 {
                let w = twiddles[k * step];
                let a = data[start + k];
                let b = data[start + k + len / 2] * w;
                data[start + k] = a + b;
                data[start + k + len / 2] = a - b;
            }
        }
        len <<= 1;
    }
}

/// Forward transform of real samples.
pub fn rfft(fft: &Fft, x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.forward(&mut buf);
    buf
}

/// Signed wavenumber index for DFT bin `k` of an `n`-point transform.
#[inline]
pub fn wavenumber(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Spectral multiplier `(i kappa)^order` for bin `k`, with `kappa = 2 pi
/// wavenumber / length`. The Nyquist bin is zeroed for odd orders so real
/// input maps to real output.
pub fn derivative_symbol(k: usize, n: usize, length: f64, order: usize) -> Complex64 {
    if order == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if n.is_multiple_of(2) && k == n / 2 && order % 2 == 1 {
        return Complex64::new(0.0, 0.0);
    }
    let kappa = 2.0 * PI * wavenumber(k, n) / length;
    Complex64::new(0.0, kappa).powu(order as u32)
}

/// Spectral derivative of a periodic real signal sampled over `length`.
pub fn spectral_derivative(fft: &Fft, x: &[f64], length: f64, order: usize) -> Vec<f64> {
    let n = x.len();
    let mut hat = rfft(fft, x);
    for (k, h) in hat.iter_mut().enumerate() {
        *h *= derivative_symbol(k, n, length, order);
    }
    fft.inverse(&mut hat);
    hat.into_iter().map(|c| c.re).collect()
}

/// Circular cross-correlation `out_c = sum_j a_{(c + j) mod n} b_j` for
/// `b` shorter than or equal to `n`, computed by FFT.
pub fn circular_correlate(fft: &Fft, a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    assert_eq!(fft.len(), n);
    assert!(b.len() <= n);
    let ah = rfft(fft, a);
    let mut bb = vec![0.0; n];
    bb[..b.len()].copy_from_slice(b);
    let bh = rfft(fft, &bb);
    let mut prod: Vec<Complex64> = ah.iter().zip(&bh).map(|(x, y)| x * y.conj()).collect();
    fft.inverse(&mut prod);
    prod.into_iter().map(|c| c.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                (0..n)
                    .map(|j| x[j] * Complex64::from_polar(1.0, -2.0 * PI * (j * k) as f64 / n as f64))
                    .sum()
            })
            .collect()
    }

    fn signal(n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|j| Complex64::new((j as f64 * 0.37).sin() + 0.1 * j as f64, (j as f64).cos()))
            .collect()
    }

    #[test]
    fn matches_naive_dft() {
        for n in [1, 2, 3, 5, 8, 12, 17, 31, 64, 100] {
            let x = signal(n);
            let want = naive_dft(&x);
            let mut got = x.clone();
            Fft::new(n).forward(&mut got);
            for (a, b) in got.iter().zip(&want) {
                assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-9);
                assert_abs_diff_eq!(a.im, b.im, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn inverse_round_trips() {
        for n in [7, 16, 45] {
            let x = signal(n);
            let f = Fft::new(n);
            let mut y = x.clone();
            f.forward(&mut y);
            f.inverse(&mut y);
            for (a, b) in y.iter().zip(&x) {
                assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-11);
                assert_abs_diff_eq!(a.im, b.im, epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn spectral_derivative_of_sine() {
        let n = 48;
        let l = 2.0;
        let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * 3.0 * i as f64 / n as f64).sin()).collect();
        let f = Fft::new(n);
        let d = spectral_derivative(&f, &x, l, 1);
        let kappa = 2.0 * PI * 3.0 / l;
        for (i, v) in d.iter().enumerate() {
            let want = kappa * (2.0 * PI * 3.0 * i as f64 / n as f64).cos();
            assert_abs_diff_eq!(*v, want, epsilon = 1e-9);
        }
        let d3 = spectral_derivative(&f, &x, l, 3);
        for (i, v) in d3.iter().enumerate() {
            let want = -kappa.powi(3) * (2.0 * PI * 3.0 * i as f64 / n as f64).cos();
            assert_abs_diff_eq!(*v, want, epsilon = 1e-7);
        }
    }

    #[test]
    fn correlation_matches_direct_sum() {
        let n = 20;
        let a: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).cos()).collect();
        let b: Vec<f64> = (0..7).map(|j| j as f64 - 2.5).collect();
        let got = circular_correlate(&Fft::new(n), &a, &b);
        for c in 0..n {
            let want: f64 = (0..b.len()).map(|j| a[(c + j) % n] * b[j]).sum();
            assert_abs_diff_eq!(got[c], want, epsilon = 1e-10);
        }
    }
}
