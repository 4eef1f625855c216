//! Minimal complex FFT for arbitrary lengths.
//!
//! Power-of-two sizes use iterative radix-2; every other size goes through
//! Bluestein's chirp-z reformulation on a padded power-of-two transform.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Add, Mul, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const ZERO: Complex = Complex { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Self {
        Complex { re, im }
    }

    /// `e^{j theta}`
    pub fn cis(theta: f64) -> Self {
        Complex { re: libm::cos(theta), im: libm::sin(theta) }
    }

    pub fn conj(self) -> Self {
        Complex { re: self.re, im: -self.im }
    }

    pub fn norm(self) -> f64 {
        libm::hypot(self.re, self.im)
    }

    pub fn scale(self, s: f64) -> Self {
        Complex { re: self.re * s, im: self.im * s }
    }
}

impl Add for Complex {
    type Output = Complex;
    fn add(self, o: Complex) -> Complex {
        Complex { re: self.re + o.re, im: self.im + o.im }
    }
}

impl Sub for Complex {
    type Output = Complex;
    fn sub(self, o: Complex) -> Complex {
        Complex { re: self.re - o.re, im: self.im - o.im }
    }
}

impl Mul for Complex {
    type Output = Complex;
    fn mul(self, o: Complex) -> Complex {
        Complex { re: self.re * o.re - self.im * o.im, im: self.re * o.im + self.im * o.re }
    }
}

fn radix2(buf: &mut [Complex], inverse: bool) {
    let n = buf.len();
    debug_assert!(n.is_power_of_two());
    let mut j = 0;
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
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        for k in 0..half {
            // exact twiddles per index keep the error from compounding
            let w = Complex::cis(sign * 2.0 * PI * k as f64 / len as f64);
            let mut start = 0;
            while start < n {
                let a = buf[start + k];
                let b = buf[start + k + half] * w;
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
                start += len;
            }
        }
        len <<= 1;
    }
}

/// Forward DFT `X[v] = sum_t x[t] e^{-j 2 pi v t / n}`.
pub fn fft(input: &[Complex]) -> Vec<Complex> {
    let n = input.len();
    if n <= 1 {
        return input.to_vec();
    }
    if n.is_power_of_two() {
        let mut buf = input.to_vec();
        radix2(&mut buf, false);
        return buf;
    }
    if n <= 16 {
        return dft(input);
    }
    bluestein(input)
}

/// Direct O(n^2) transform.
pub fn dft(input: &[Complex]) -> Vec<Complex> {
    let n = input.len();
    (0..n)
        .map(|v| {
            input.iter().enumerate().fold(Complex::ZERO, |acc, (t, x)| {
                let phase = ((v * t) % n) as f64 / n as f64;
                acc + *x * Complex::cis(-2.0 * PI * phase)
            })
        })
        .collect()
}

fn bluestein(input: &[Complex]) -> Vec<Complex> {
    let n = input.len();
    let m = (2 * n - 1).next_power_of_two();
    // chirp[t] = e^{-j pi t^2 / n}, with t^2 reduced mod 2n for accuracy
    let chirp: Vec<Complex> = (0..n)
        .map(|t| {
            let sq = (t as u128 * t as u128 % (2 * n as u128)) as f64;
            Complex::cis(-PI * sq / n as f64)
        })
        .collect();
    let mut a = vec![Complex::ZERO; m];
    for t in 0..n {
        a[t] = input[t] * chirp[t];
    }
    let mut b = vec![Complex::ZERO; m];
    b[0] = chirp[0].conj();
    for t in 1..n {
        b[t] = chirp[t].conj();
        b[m - t] = chirp[t].conj();
    }
    radix2(&mut a, false);
    radix2(&mut b, false);
    for (x, y) in a.iter_mut().zip(&b) {
        *x = *x * *y;
    }
    radix2(&mut a, true);
    let inv = 1.0 / m as f64;
    (0..n).map(|v| a[v].scale(inv) * chirp[v]).collect()
}
