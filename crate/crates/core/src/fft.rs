//! Mixed-radix complex FFT for arbitrary lengths.
//!
//! The spectrogram front end needs n = 400 = 2^4 * 5^2, so a power-of-two
//! only transform is not enough. Lengths are factored into primes and
//! transformed by recursive decimation in time; each stage runs a direct DFT
//! butterfly of its prime radix, so a length with a large prime factor
//! degrades towards O(n * p) rather than failing.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

pub use num_complex::Complex64;

/// Precomputed twiddles and factorization for one transform length.
#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    factors: Vec<usize>,
    // exp(-2 pi i k / n) for k in 0..n
    twiddles: Vec<Complex64>,
    max_radix: usize,
}

impl FftPlan {
    /// Panics on `n == 0`.
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "FFT length must be positive");
        let factors = factorize(n);
        let twiddles = (0..n)
            .map(|k| {
                let theta = -2.0 * PI * k as f64 / n as f64;
                Complex64::new(libm::cos(theta), libm::sin(theta))
            })
            .collect();
        let max_radix = factors.iter().copied().max().unwrap_or(1);
        Self { n, factors, twiddles, max_radix }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Forward transform, `X[k] = sum_j x[j] exp(-2 pi i jk / n)`.
    pub fn forward(&self, input: &[Complex64]) -> Vec<Complex64> {
        self.run(input, false)
    }

    /// Unnormalized inverse transform (no 1/n factor).
    pub fn inverse(&self, input: &[Complex64]) -> Vec<Complex64> {
        self.run(input, true)
    }

    /// Forward transform of a real sequence, returning the `n/2 + 1`
    /// non-redundant bins.
    pub fn forward_real(&self, input: &[f64]) -> Vec<Complex64> {
        assert_eq!(input.len(), self.n, "input length does not match plan");
        let buf: Vec<Complex64> = input.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut out = self.forward(&buf);
        out.truncate(self.n / 2 + 1);
        out
    }

    /// Inverse of [`forward_real`](Self::forward_real), normalized by 1/n.
    /// The spectrum is treated as Hermitian; imaginary parts of the DC and
    /// (for even n) Nyquist bins are ignored.
    pub fn inverse_real(&self, half: &[Complex64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(half.len(), n / 2 + 1, "half spectrum length does not match plan");
        let mut full = vec![Complex64::new(0.0, 0.0); n];
        full[..half.len()].copy_from_slice(half);
        full[0].im = 0.0;
        if n % 2 == 0 {
            full[n / 2].im = 0.0;
        }
        for k in 1..n.div_ceil(2) {
            full[n - k] = half[k].conj();
        }
        let scale = 1.0 / n as f64;
        self.inverse(&full).into_iter().map(|c| c.re * scale).collect()
    }

    fn run(&self, input: &[Complex64], inverse: bool) -> Vec<Complex64> {
        assert_eq!(input.len(), self.n, "input length does not match plan");
        let mut out = vec![Complex64::new(0.0, 0.0); self.n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); 2 * self.max_radix];
        self.recurse(input, 1, &mut out, &self.factors, 1, inverse, &mut scratch);
        out
    }

    #[inline]
    fn twiddle(&self, exponent: usize, inverse: bool) -> Complex64 {
        let w = self.twiddles[exponent % self.n];
        if inverse {
            w.conj()
        } else {
            w
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        &self,
        input: &[Complex64],
        stride: usize,
        out: &mut [Complex64],
        factors: &[usize],
        tw_stride: usize,
        inverse: bool,
        scratch: &mut [Complex64],
    ) {
        let n = out.len();
        if n == 1 {
            out[0] = input[0];
            return;
        }
        let p = factors[0];
        let m = n / p;
        for q in 0..p {
            self.recurse(
                &input[q * stride..],
                stride * p,
                &mut out[q * m..(q + 1) * m],
                &factors[1..],
                tw_stride * p,
                inverse,
                scratch,
            );
        }
        let (gathered, _) = scratch.split_at_mut(p);
        for k in 0..m {
            for (q, g) in gathered.iter_mut().enumerate() {
                *g = out[q * m + k] * self.twiddle(q * k * tw_stride, inverse);
            }
            for s in 0..p {
                let mut acc = Complex64::new(0.0, 0.0);
                for (q, g) in gathered.iter().enumerate() {
                    acc += *g * self.twiddle(q * s * m * tw_stride, inverse);
                }
                out[k + s * m] = acc;
            }
        }
    }
}

fn factorize(mut n: usize) -> Vec<usize> {
    let mut factors = Vec::new();
    // Radix 4 first: fewer stages than pure radix 2.
    while n % 4 == 0 {
        factors.push(4);
        n /= 4;
    }
    let mut p = 2;
    while n > 1 {
        if p * p > n {
            factors.push(n);
            break;
        }
        while n % p == 0 {
            factors.push(p);
            n /= p;
        }
        p += 1;
    }
    if factors.is_empty() {
        factors.push(1);
    }
    factors
}
