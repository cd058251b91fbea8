//! Seeded generators for test loops and gauge transformations.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;

use crate::transport::{Algebra, LoopConnection, PeriodicGauge};

/// Real skew matrix with entries uniform in [-scale, scale].
pub fn random_skew<R: Rng>(n: usize, rng: &mut R, scale: f64) -> DMatrix<C64> {
    let mut m = DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let x = rng.gen_range(-scale..=scale);
            m[(i, j)] = C64::new(x, 0.0);
            m[(j, i)] = C64::new(-x, 0.0);
        }
    }
    m
}

/// Block-diagonal constant loop with blocks 2 pi a_j [[0, -1], [1, 0]].
pub fn cartan_loop(a: &[f64], k: usize) -> LoopConnection {
    let n = 2 * a.len();
    let mut m = DMatrix::<C64>::zeros(n, n);
    for (j, x) in a.iter().enumerate() {
        m[(2 * j + 1, 2 * j)] = C64::new(2.0 * PI * x, 0.0);
        m[(2 * j, 2 * j + 1)] = C64::new(-2.0 * PI * x, 0.0);
    }
    LoopConnection::new(Algebra::So, vec![m; k]).expect("block rotations are skew")
}

/// A(t) = X_0 + sum_{m=1,2} (X_m cos 2 pi m t + Y_m sin 2 pi m t) with random skew coefficients.
pub fn random_so_loop<R: Rng>(n: usize, k: usize, rng: &mut R, scale: f64) -> LoopConnection {
    let coeffs: Vec<DMatrix<C64>> = (0..5).map(|_| random_skew(n, rng, scale)).collect();
    LoopConnection::from_fn(Algebra::So, k, |t| {
        let mut a = coeffs[0].clone();
        for m in 1..=2 {
            let w = 2.0 * PI * m as f64 * t;
            a += &coeffs[2 * m - 1] * C64::new(w.cos(), 0.0) + &coeffs[2 * m] * C64::new(w.sin(), 0.0);
        }
        a
    })
    .expect("sums of skew matrices are skew")
}

pub fn random_gauge<R: Rng>(n: usize, rng: &mut R, scale: f64) -> PeriodicGauge {
    let mut pair = || (rng.gen_range(-scale..=scale), rng.gen_range(-scale..=scale));
    let mut coef = || [pair(), pair()];
    let (c1, c2) = (coef(), coef());
    PeriodicGauge { x1: random_skew(n, rng, 1.0), x2: random_skew(n, rng, 1.0), c1, c2 }
}
