//! Scaling-and-squaring Taylor exponential and a 4th-order commutator-free Magnus stepper,
//! generic over the coefficient ring so the same code drives plain matrices and
//! Grassmann-matrix elements.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

pub trait ExpRing: Clone {
    fn one_like(&self) -> Self;
    fn zero_like(&self) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn scale(&self, c: C64) -> Self;
    /// Any submultiplicative norm.
    fn norm(&self) -> f64;
}

impl ExpRing for DMatrix<C64> {
    fn one_like(&self) -> Self {
        DMatrix::identity(self.nrows(), self.ncols())
    }
    fn zero_like(&self) -> Self {
        DMatrix::zeros(self.nrows(), self.ncols())
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn scale(&self, c: C64) -> Self {
        self * c
    }
    fn norm(&self) -> f64 {
        self.norm()
    }
}

/// exp(a) by Taylor series on a / 2^s followed by s squarings.
pub fn expm<R: ExpRing>(a: &R) -> R {
    let nrm = a.norm();
    let s = if nrm > 0.5 { (nrm / 0.5).log2().ceil() as i32 } else { 0 };
    let b = a.scale(C64::new(0.5f64.powi(s), 0.0));
    let mut term = b.one_like();
    let mut sum = term.clone();
    for k in 1..40 {
        term = term.mul(&b).scale(C64::new(1.0 / k as f64, 0.0));
        sum = sum.add(&term);
        if term.norm() <= 1e-18 * sum.norm().max(1.0) {
            break;
        }
    }
    for _ in 0..s {
        sum = sum.mul(&sum);
    }
    sum
}

/// 4-point periodic Lagrange interpolation of uniform samples at t in [0, 1).
pub fn interp_periodic<R: ExpRing>(samples: &[R], t: f64) -> R {
    let k = samples.len();
    let x = t.rem_euclid(1.0) * k as f64;
    let i0 = x.floor() as i64;
    let s = x - i0 as f64;
    // nodes at -1, 0, 1, 2 relative to i0
    let w = [
        -s * (s - 1.0) * (s - 2.0) / 6.0,
        (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
        -(s + 1.0) * s * (s - 2.0) / 2.0,
        (s + 1.0) * s * (s - 1.0) / 6.0,
    ];
    let mut acc = samples[0].zero_like();
    for (d, wd) in (-1i64..=2).zip(w) {
        let idx = (i0 + d).rem_euclid(k as i64) as usize;
        acc = acc.add(&samples[idx].scale(C64::new(wd, 0.0)));
    }
    acc
}

pub const CF4_ORDER: u32 = 4;

/// Solves psi' = A(t) psi, psi(0) = I over one period with one CF4 step per sample interval:
/// psi <- exp(h(b A1 + a A2)) exp(h(a A1 + b A2)) psi at the Gauss nodes, a = 1/4 - sqrt3/6,
/// b = 1/4 + sqrt3/6.
pub fn cf4_transport<R: ExpRing>(samples: &[R]) -> R {
    cf4_transport_steps(samples, samples.len())
}

pub fn cf4_transport_steps<R: ExpRing>(samples: &[R], steps: usize) -> R {
    let r3 = 3f64.sqrt();
    let (c1, c2) = (0.5 - r3 / 6.0, 0.5 + r3 / 6.0);
    let (a, b) = (0.25 - r3 / 6.0, 0.25 + r3 / 6.0);
    let h = 1.0 / steps as f64;
    let mut psi = samples[0].one_like();
    for n in 0..steps {
        let t = n as f64 * h;
        let a1 = interp_periodic(samples, t + c1 * h);
        let a2 = interp_periodic(samples, t + c2 * h);
        let first = expm(&a1.scale(C64::new(b * h, 0.0)).add(&a2.scale(C64::new(a * h, 0.0))));
        let second = expm(&a1.scale(C64::new(a * h, 0.0)).add(&a2.scale(C64::new(b * h, 0.0))));
        psi = second.mul(&first.mul(&psi));
    }
    psi
}
