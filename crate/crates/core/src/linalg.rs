//! Small dense helpers: eigen-decomposition through the complex Schur form, Pfaffians.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub struct Eigen {
    pub values: Vec<C64>,
    /// columns are unit eigenvectors
    pub vectors: DMatrix<C64>,
    pub cond: f64,
}

/// Eigenvalues and eigenvectors via complex Schur plus triangular back-substitution.
pub fn eigen(m: &DMatrix<C64>) -> Result<Eigen> {
    let n = m.nrows();
    if m.iter().all(|c| *c == C64::new(0.0, 0.0)) {
        return Ok(Eigen { values: vec![C64::new(0.0, 0.0); n], vectors: DMatrix::identity(n, n), cond: 1.0 });
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), 1e-15, 10_000)
        .ok_or_else(|| Error::NonConvergent("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let scale = t.norm().max(1e-300);
    let small = 1e-15 * scale;
    let values: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    let mut vt = DMatrix::<C64>::zeros(n, n);
    for k in 0..n {
        let lam = values[k];
        let mut v = DVector::<C64>::zeros(n);
        v[k] = C64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let rhs: C64 = (i + 1..=k).map(|j| t[(i, j)] * v[j]).sum();
            let mut d = t[(i, i)] - lam;
            if d.norm() < small {
                d = C64::new(small, 0.0);
            }
            v[i] = -rhs / d;
        }
        vt.set_column(k, &v);
    }
    let mut vectors = q * vt;
    for k in 0..n {
        let nrm = vectors.column(k).norm();
        vectors.column_mut(k).unscale_mut(nrm);
    }
    let sv = vectors.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    Ok(Eigen { values, vectors, cond })
}

/// Pfaffian of a real skew-symmetric matrix by pivoted Gaussian elimination.
pub fn pfaffian(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    if n % 2 == 1 {
        return 0.0;
    }
    let mut a = a.clone();
    let mut pf = 1.0;
    let mut k = 0;
    while k + 1 < n {
        let (mut p, mut best) = (k + 1, 0.0);
        for j in k + 1..n {
            if a[(k, j)].abs() > best {
                best = a[(k, j)].abs();
                p = j;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if p != k + 1 {
            a.swap_rows(k + 1, p);
            a.swap_columns(k + 1, p);
            pf = -pf;
        }
        let piv = a[(k, k + 1)];
        pf *= piv;
        for i in k + 2..n {
            let f = a[(k, i)] / piv;
            if f != 0.0 {
                for r in 0..n {
                    let v = a[(r, k + 1)];
                    a[(r, i)] -= f * v;
                }
                for c in 0..n {
                    let v = a[(k + 1, c)];
                    a[(i, c)] -= f * v;
                }
            }
        }
        k += 2;
    }
    pf
}

pub fn real_part(m: &DMatrix<C64>) -> DMatrix<f64> {
    m.map(|c| c.re)
}

pub fn max_imag(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
}

pub fn complexify(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|x| C64::new(x, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pfaffian_of_blocks_and_squares_to_det() {
        let mut a = DMatrix::<f64>::zeros(4, 4);
        a[(0, 1)] = 2.0;
        a[(1, 0)] = -2.0;
        a[(2, 3)] = -3.0;
        a[(3, 2)] = 3.0;
        assert!((pfaffian(&a) + 6.0).abs() < 1e-14);
        let m = DMatrix::<f64>::from_fn(6, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let s = &m - m.transpose();
        let pf = pfaffian(&s);
        assert!((pf * pf - s.determinant()).abs() < 1e-9 * s.determinant().abs().max(1.0));
    }

    #[test]
    fn eigen_reconstructs() {
        let m = DMatrix::<C64>::from_fn(4, 4, |i, j| C64::new((i as f64 - j as f64).sin(), (i * j) as f64 * 0.1));
        let e = eigen(&m).unwrap();
        for k in 0..4 {
            let v = e.vectors.column(k);
            let r = &m * v - v * e.values[k];
            assert!(r.norm() < 1e-12);
        }
        assert!(e.cond.is_finite());
    }

    #[test]
    fn identity_has_orthonormal_eigenvectors() {
        let e = eigen(&DMatrix::<C64>::identity(3, 3)).unwrap();
        assert!((e.cond - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jordan_block_is_ill_conditioned() {
        let mut m = DMatrix::<C64>::identity(2, 2);
        m[(0, 1)] = C64::new(1.0, 0.0);
        let e = eigen(&m).unwrap();
        assert!(e.cond > 1e8);
    }
}
