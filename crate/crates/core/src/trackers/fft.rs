//! Radix-2 FFT for the correlation filter. Sizes must be powers of two.

use std::f64::consts::PI;

use num_complex::Complex64;

/// 1-D transform plan: bit-reversal table plus twiddles.
#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    rev: Vec<usize>,
    twiddles: Vec<Complex64>,
}

impl Fft {
    pub fn new(n: usize) -> Self {
        assert!(n.is_power_of_two(), "FFT size {n} is not a power of two");
        let bits = n.trailing_zeros();
        let rev = (0..n)
            .map(|i| {
                if bits == 0 {
                    0
                } else {
                    i.reverse_bits() >> (usize::BITS - bits)
                }
            })
            .collect();
        let twiddles = (0..n / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
            .collect();
        Self { n, rev, twiddles }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized transform over `data[offset + k * stride]`.
    fn run(&self, data: &mut [Complex64], offset: usize, stride: usize, inverse: bool) {
        let n = self.n;
        let at = |i: usize| offset + i * stride;
        for i in 0..n {
            let j = self.rev[i];
            if i < j {
                data.swap(at(i), at(j));
            }
        }
        let mut len = 2;
        while len <= n {
            let step = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..len / 2 {
                    let mut w = self.twiddles[k * step];
                    if inverse {
                        w = w.conj();
                    }
                    let a = data[at(start + k)];
                    let b = data[at(start + k + len / 2)] * w;
                    data[at(start + k)] = a + b;
                    data[at(start + k + len / 2)] = a - b;
                }
            }
            len <<= 1;
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, 0, 1, false);
    }

    /// Inverse transform including the 1/n scaling.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, 0, 1, true);
        let scale = 1.0 / self.n as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// Square 2-D transform over row-major `n x n` buffers.
#[derive(Debug, Clone)]
pub struct Fft2d {
    plan: Fft,
}

impl Fft2d {
    pub fn new(n: usize) -> Self {
        Self { plan: Fft::new(n) }
    }

    pub fn size(&self) -> usize {
        self.plan.len()
    }

    fn run(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.plan.len();
        assert_eq!(data.len(), n * n);
        for row in 0..n {
            self.plan.run(data, row * n, 1, inverse);
        }
        for col in 0..n {
            self.plan.run(data, col, n, inverse);
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, false);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, true);
        let scale = 1.0 / (data.len() as f64);
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    /// Forward transform of a real buffer.
    pub fn forward_real(&self, data: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }
}
