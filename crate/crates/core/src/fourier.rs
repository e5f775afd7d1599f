//! Fourier transforms and spectral differentiation on the unit-period circle.
//!
//! A loop (p, q) is packed as the complex signal z = p + i q, so one complex
//! transform differentiates both components. Differentiation multiplies mode k
//! by 2*pi*i*k and zeroes the Nyquist mode.

use crate::grid::TimeGrid;
use crate::plane::PlanePoint;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Transform plan for a fixed even length n: radix-2 FFT when n is a power of
/// two, otherwise a precomputed-twiddle DFT (desk-scale lengths only).
#[derive(Debug, Clone)]
pub struct Spectral {
    n: usize,
    // e^{-2*pi*i*j/n} for j = 0..n
    twiddle: Vec<Complex64>,
    pow2: bool,
}

impl Spectral {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2 && n % 2 == 0, "transform length must be even, got {n}");
        let twiddle = (0..n)
            .map(|j| {
                let phase = -2.0 * PI * j as f64 / n as f64;
                Complex64::new(phase.cos(), phase.sin())
            })
            .collect();
        Spectral { n, twiddle, pow2: n.is_power_of_two() }
    }

    pub fn for_grid(time: &TimeGrid) -> Self {
        Spectral::new(time.len())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Forward transform, unnormalized: X_k = sum_j x_j e^{-2 pi i jk/n}.
    pub fn forward(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.n);
        if self.pow2 {
            self.fft_pow2(buf, false);
        } else {
            self.dft(buf, false);
        }
    }

    /// Inverse transform including the 1/n normalization.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.n);
        if self.pow2 {
            self.fft_pow2(buf, true);
        } else {
            self.dft(buf, true);
        }
        let scale = 1.0 / self.n as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }

    /// Signed mode index of bin j: 0, 1, .., n/2-1, -n/2, .., -1.
    pub fn mode(&self, j: usize) -> i64 {
        if j <= self.n / 2 - 1 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    /// True when bin j is the Nyquist mode (j = n/2).
    pub fn is_nyquist(&self, j: usize) -> bool {
        j == self.n / 2
    }

    /// Differentiate in place: multiply mode k by 2*pi*i*k, zero the Nyquist.
    pub fn differentiate_spectrum(&self, buf: &mut [Complex64]) {
        for (j, v) in buf.iter_mut().enumerate() {
            if self.is_nyquist(j) {
                *v = Complex64::new(0.0, 0.0);
            } else {
                let k = self.mode(j) as f64;
                *v *= Complex64::new(0.0, 2.0 * PI * k);
            }
        }
    }

    /// Spectral derivative of a sampled loop.
    pub fn derivative(&self, values: &[PlanePoint]) -> Vec<PlanePoint> {
        debug_assert_eq!(values.len(), self.n);
        let mut buf: Vec<Complex64> =
            values.iter().map(|u| Complex64::new(u.p, u.q)).collect();
        self.forward(&mut buf);
        self.differentiate_spectrum(&mut buf);
        self.inverse(&mut buf);
        buf.iter().map(|z| PlanePoint::new(z.re, z.im)).collect()
    }

    fn dft(&self, buf: &mut [Complex64], inverse: bool) {
        let n = self.n;
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &x) in buf.iter().enumerate() {
                let idx = (j * k) % n;
                let w = if inverse { self.twiddle[idx].conj() } else { self.twiddle[idx] };
                acc += x * w;
            }
            *o = acc;
        }
        buf.copy_from_slice(&out);
    }

    fn fft_pow2(&self, buf: &mut [Complex64], inverse: bool) {
        let n = self.n;
        // Bit-reversal permutation.
        let mut j = 0usize;
        for i in 1..n {
            let mut bit = n >> 1;
            while j & bit != 0 {
                j ^= bit;
                bit >>= 1;
            }
            j |= bit;
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..len / 2 {
                    let w = if inverse {
                        self.twiddle[k * stride].conj()
                    } else {
                        self.twiddle[k * stride]
                    };
                    let a = buf[start + k];
                    let b = buf[start + k + len / 2] * w;
                    buf[start + k] = a + b;
                    buf[start + k + len / 2] = a - b;
                }
            }
            len <<= 1;
        }
    }
}
