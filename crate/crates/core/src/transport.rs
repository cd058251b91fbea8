//! Parallel transport of periodic linear ODEs, Floquet reduction, the spinor supertrace of an
//! SO(2n) monodromy and the zeta-regularized circle Pfaffian.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expm::{cf4_transport_steps, expm, CF4_ORDER};
use crate::linalg::{eigen, max_imag, pfaffian, real_part};

pub const MIN_SAMPLES: usize = 16;
const MEMBERSHIP_TOL: f64 = 1e-12;
const DEFECT_COND: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algebra {
    So,
    U,
    Gl,
}

impl fmt::Display for Algebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::So => "so",
            Self::U => "u",
            Self::Gl => "gl",
        })
    }
}

impl FromStr for Algebra {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "so" => Ok(Self::So),
            "u" => Ok(Self::U),
            "gl" => Ok(Self::Gl),
            other => Err(Error::Validation(format!("unknown algebra {other:?}"))),
        }
    }
}

/// Uniform samples A(k/K), k = 0..K-1, of a period-1 loop in a matrix Lie algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopConnection {
    n: usize,
    algebra: Algebra,
    samples: Vec<DMatrix<C64>>,
}

pub fn membership_error(a: &DMatrix<C64>, alg: Algebra) -> f64 {
    match alg {
        Algebra::So => (a + a.transpose()).norm().max(max_imag(a)),
        Algebra::U => (a + a.adjoint()).norm(),
        Algebra::Gl => 0.0,
    }
}

impl LoopConnection {
    pub fn new(algebra: Algebra, samples: Vec<DMatrix<C64>>) -> Result<Self> {
        if samples.len() < MIN_SAMPLES {
            return Err(Error::Validation(format!("need at least {MIN_SAMPLES} samples, got {}", samples.len())));
        }
        let n = samples[0].nrows();
        for (k, a) in samples.iter().enumerate() {
            if a.nrows() != n || a.ncols() != n {
                return Err(Error::Validation(format!("sample {k} is not {n}x{n}")));
            }
            if a.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(Error::Validation(format!("sample {k} has non-finite entries")));
            }
            let err = membership_error(a, algebra);
            if err >= MEMBERSHIP_TOL {
                return Err(Error::Validation(format!("sample {k} is not in {algebra}({n}): defect {err:.3e}")));
            }
        }
        Ok(Self { n, algebra, samples })
    }

    /// Samples f(k/K) of a closure.
    pub fn from_fn<F: Fn(f64) -> DMatrix<C64>>(algebra: Algebra, k: usize, f: F) -> Result<Self> {
        Self::new(algebra, (0..k).map(|i| f(i as f64 / k as f64)).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn algebra(&self) -> Algebra {
        self.algebra
    }
    pub fn samples(&self) -> &[DMatrix<C64>] {
        &self.samples
    }
    pub fn len(&self) -> usize {
        self.samples.len()
    }
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { n: self.n, algebra: self.algebra, samples: self.samples.iter().map(|a| a * C64::new(s, 0.0)).collect() }
    }

    /// Constant conjugation A -> g A g^{-1}.
    pub fn conjugated(&self, g: &DMatrix<C64>) -> Result<Self> {
        let ginv = g.clone().try_inverse().ok_or_else(|| Error::Validation("singular conjugator".into()))?;
        let samples = self.samples.iter().map(|a| g * a * &ginv).collect();
        Ok(Self { n: self.n, algebra: self.algebra, samples })
    }

    pub fn to_json(&self) -> LoopConnectionJson {
        LoopConnectionJson {
            n: self.n,
            algebra: self.algebra,
            samples: self.samples.iter().map(matrix_to_pairs).collect(),
        }
    }

    pub fn from_json(j: &LoopConnectionJson) -> Result<Self> {
        let samples = j
            .samples
            .iter()
            .enumerate()
            .map(|(k, s)| {
                pairs_to_matrix(j.n, s).map_err(|e| Error::Validation(format!("sample {k}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(j.algebra, samples)
    }
}

pub fn matrix_to_pairs(m: &DMatrix<C64>) -> Vec<[f64; 2]> {
    let n = m.nrows();
    (0..n * n).map(|k| [m[(k / n, k % n)].re, m[(k / n, k % n)].im]).collect()
}

pub fn pairs_to_matrix(n: usize, p: &[[f64; 2]]) -> Result<DMatrix<C64>> {
    if p.len() != n * n {
        return Err(Error::Validation(format!("expected {} entries, got {}", n * n, p.len())));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| C64::new(p[i * n + j][0], p[i * n + j][1])))
}

/// Row-major complex entries as [re, im] pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopConnectionJson {
    pub n: usize,
    pub algebra: Algebra,
    pub samples: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Monodromy {
    pub hol: DMatrix<C64>,
    pub algebra: Algebra,
    pub steps: usize,
    pub order: u32,
}

pub fn parallel_transport(conn: &LoopConnection) -> Monodromy {
    parallel_transport_steps(conn, conn.len())
}

/// Transport with an explicit number of CF4 steps (the samples are interpolated in between).
pub fn parallel_transport_steps(conn: &LoopConnection, steps: usize) -> Monodromy {
    Monodromy {
        hol: cf4_transport_steps(&conn.samples, steps),
        algebra: conn.algebra,
        steps,
        order: CF4_ORDER,
    }
}

#[derive(Debug, Clone)]
pub struct Floquet {
    pub k0: DMatrix<C64>,
    pub residual: f64,
    pub eigenvalues: Vec<C64>,
    pub cond: f64,
}

/// Principal logarithm of a diagonalizable matrix, eigenvalue-wise with arg in (-pi, pi].
pub fn principal_log(hol: &DMatrix<C64>) -> Result<Floquet> {
    let e = eigen(hol)?;
    if e.cond > DEFECT_COND {
        return Err(Error::DefectiveMonodromy(e.cond));
    }
    let logs: Vec<C64> = e.values.iter().map(|l| C64::new(l.norm().ln(), principal_arg(*l))).collect();
    let vinv = e
        .vectors
        .clone()
        .try_inverse()
        .ok_or(Error::DefectiveMonodromy(f64::INFINITY))?;
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(logs));
    let mut k0 = &e.vectors * d * vinv;
    if max_imag(hol) == 0.0 && max_imag(&k0) < 1e-9 {
        // real input with a real logarithm: drop the roundoff imaginary part
        k0 = k0.map(|c| C64::new(c.re, 0.0));
    }
    let residual = (expm(&k0) - hol).norm();
    Ok(Floquet { k0, residual, eigenvalues: e.values, cond: e.cond })
}

fn principal_arg(z: C64) -> f64 {
    let a = z.arg();
    if a <= -PI {
        a + 2.0 * PI
    } else {
        a
    }
}

pub fn floquet_reduce(conn: &LoopConnection) -> Result<Floquet> {
    principal_log(&parallel_transport(conn).hol)
}

fn check_special_orthogonal(h: &DMatrix<C64>) -> Result<DMatrix<f64>> {
    let n = h.nrows();
    if n % 2 == 1 {
        return Err(Error::NotSpecialOrthogonal(format!("odd dimension {n}")));
    }
    if max_imag(h) > 1e-9 {
        return Err(Error::NotSpecialOrthogonal("complex entries".into()));
    }
    let r = real_part(h);
    let orth = (r.transpose() * &r - DMatrix::identity(n, n)).norm();
    if orth > 1e-8 {
        return Err(Error::NotSpecialOrthogonal(format!("|R^T R - I| = {orth:.3e}")));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > 1e-8 {
        return Err(Error::NotSpecialOrthogonal(format!("det = {det}")));
    }
    Ok(r)
}

/// Pairs |angles| into n values: sorted ascending, each appears twice.
fn paired(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    v.chunks(2).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
}

fn orientation(skew: &DMatrix<f64>) -> f64 {
    let pf = pfaffian(skew);
    if pf.abs() < 1e-13 || pf >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Half-angles of an SO(2n) monodromy, theta_j in [0, pi].
pub fn rotation_angles(m: &Monodromy) -> Result<Vec<f64>> {
    check_special_orthogonal(&m.hol)?;
    let e = eigen(&m.hol)?;
    Ok(paired(e.values.iter().map(|l| l.arg().abs()).collect()))
}

/// prod_j 2i sin(theta_j / 2), the sign of the product of sin(theta_j) taken from
/// Pf((R^T - R)/2).
pub fn spin_supertrace(m: &Monodromy) -> Result<C64> {
    let r = check_special_orthogonal(&m.hol)?;
    let angles = rotation_angles(m)?;
    let sign = orientation(&((r.transpose() - &r) * 0.5));
    let prod: C64 = angles.iter().map(|t| C64::new(0.0, 2.0 * (t / 2.0).sin())).product();
    Ok(prod * sign)
}

/// Signed Floquet exponents a_j in (-1/2, 1/2] from a real skew logarithm.
pub fn floquet_angles(k0: &DMatrix<C64>) -> Result<(Vec<f64>, f64)> {
    let n = k0.nrows();
    if n % 2 == 1 {
        return Err(Error::NotSpecialOrthogonal(format!("odd dimension {n}")));
    }
    let kr = real_part(k0);
    let skew = (&kr - kr.transpose()) * 0.5;
    let ev = eigen(&k0.map(|c| C64::new(c.re, 0.0)))?;
    let abs_a = paired(ev.values.iter().map(|l| l.im.abs() / (2.0 * PI)).collect());
    let sign = orientation(&skew.transpose());
    Ok((abs_a, sign))
}

/// prod_j 2i sin(pi a_j) over the Floquet exponents of an so(2n) loop.
pub fn zeta_pfaffian_circle(conn: &LoopConnection) -> Result<C64> {
    if conn.algebra != Algebra::So {
        return Err(Error::NotSpecialOrthogonal(format!("loop lives in {}", conn.algebra)));
    }
    let f = floquet_reduce(conn)?;
    pfaffian_from_log(&f.k0)
}

pub fn pfaffian_from_log(k0: &DMatrix<C64>) -> Result<C64> {
    let (a, sign) = floquet_angles(k0)?;
    let prod: C64 = a.iter().map(|x| C64::new(0.0, 2.0 * (PI * x).sin())).product();
    Ok(prod * sign)
}

pub fn det_i_minus(hol: &DMatrix<C64>) -> C64 {
    (DMatrix::identity(hol.nrows(), hol.ncols()) - hol).determinant()
}

#[derive(Debug, Clone, Serialize)]
pub struct AwReport {
    /// zeta-regularized Pfaffian
    pub lhs: C64,
    /// spinor supertrace of the holonomy
    pub rhs: C64,
    pub absdiff: f64,
    /// signed Floquet exponents a_j
    pub angle_data: Vec<f64>,
    /// ||Tr_s|^2 - det(I - hol)| relative to max(1, |det|)
    pub det_identity_err: f64,
    pub floquet_residual: f64,
    pub continuation_points: usize,
}

pub const CONTINUATION_POINTS: usize = 8;

/// Follows a sequence of values, flipping the overall sign whenever that keeps it continuous.
pub fn continuity_track(values: &[C64]) -> C64 {
    let mut sign = 1.0;
    let mut prev = values[0];
    for v in &values[1..] {
        let a = v * sign;
        if (a - prev).norm() > (a + prev).norm() {
            sign = -sign;
        }
        prev = v * sign;
    }
    prev
}

/// Both sides of the circle identity, each sign fixed by continuation along s -> s A from
/// s = 1/8 to s = 1.
pub fn aw_check(conn: &LoopConnection) -> Result<AwReport> {
    if conn.algebra != Algebra::So {
        return Err(Error::NotSpecialOrthogonal(format!("loop lives in {}", conn.algebra)));
    }
    let mut lhs_path = Vec::with_capacity(CONTINUATION_POINTS);
    let mut rhs_path = Vec::with_capacity(CONTINUATION_POINTS);
    let mut last = None;
    for k in 1..=CONTINUATION_POINTS {
        let s = k as f64 / CONTINUATION_POINTS as f64;
        let m = parallel_transport(&conn.scaled(s));
        let f = principal_log(&m.hol)?;
        lhs_path.push(pfaffian_from_log(&f.k0)?);
        rhs_path.push(spin_supertrace(&m)?);
        last = Some((m, f));
    }
    let (m, f) = last.expect("at least one continuation point");
    let lhs = continuity_track(&lhs_path);
    let rhs = continuity_track(&rhs_path);
    let (abs_a, sign) = floquet_angles(&f.k0)?;
    let mut angle_data = abs_a;
    if sign < 0.0 {
        if let Some(first) = angle_data.iter_mut().find(|a| **a > 0.0) {
            *first = -*first;
        }
    }
    let det = det_i_minus(&m.hol);
    let det_identity_err = (rhs.norm_sqr() - det.re).abs().max(det.im.abs()) / det.norm().max(1.0);
    Ok(AwReport {
        lhs,
        rhs,
        absdiff: (lhs - rhs).norm(),
        angle_data,
        det_identity_err,
        floquet_residual: f.residual,
        continuation_points: CONTINUATION_POINTS,
    })
}

/// A periodic gauge transformation g(t) = exp(phi_1(t) X_1) exp(phi_2(t) X_2) with
/// trigonometric profiles phi_i.
#[derive(Debug, Clone)]
pub struct PeriodicGauge {
    pub x1: DMatrix<C64>,
    pub x2: DMatrix<C64>,
    /// (cos, sin) coefficients for harmonics 1 and 2 of each profile
    pub c1: [(f64, f64); 2],
    pub c2: [(f64, f64); 2],
}

fn profile(c: &[(f64, f64); 2], t: f64) -> (f64, f64) {
    let mut v = 0.0;
    let mut d = 0.0;
    for (m, (a, b)) in c.iter().enumerate() {
        let w = 2.0 * PI * (m + 1) as f64;
        v += a * (w * t).cos() + b * (w * t).sin();
        d += w * (-a * (w * t).sin() + b * (w * t).cos());
    }
    (v, d)
}

impl PeriodicGauge {
    pub fn at(&self, t: f64) -> DMatrix<C64> {
        let (p1, _) = profile(&self.c1, t);
        let (p2, _) = profile(&self.c2, t);
        expm(&(&self.x1 * C64::new(p1, 0.0))) * expm(&(&self.x2 * C64::new(p2, 0.0)))
    }

    /// g' g^{-1} = phi_1' X_1 + phi_2' g_1 X_2 g_1^{-1}.
    pub fn log_derivative(&self, t: f64) -> DMatrix<C64> {
        let (p1, d1) = profile(&self.c1, t);
        let (_, d2) = profile(&self.c2, t);
        let g1 = expm(&(&self.x1 * C64::new(p1, 0.0)));
        let g1inv = expm(&(&self.x1 * C64::new(-p1, 0.0)));
        &self.x1 * C64::new(d1, 0.0) + &g1 * &self.x2 * g1inv * C64::new(d2, 0.0)
    }

    /// A -> g A g^{-1} + g' g^{-1}, the action compatible with psi' = A psi.
    pub fn apply(&self, conn: &LoopConnection) -> Result<LoopConnection> {
        let k = conn.len();
        let samples = (0..k)
            .map(|i| {
                let t = i as f64 / k as f64;
                let g = self.at(t);
                let ginv = g.clone().try_inverse().expect("exponentials are invertible");
                let mut a = &g * &conn.samples[i] * ginv + self.log_derivative(t);
                if conn.algebra == Algebra::So {
                    // remove roundoff so the result validates as skew
                    let r = real_part(&a);
                    a = ((&r - r.transpose()) * 0.5).map(|x| C64::new(x, 0.0));
                }
                a
            })
            .collect();
        LoopConnection::new(conn.algebra, samples)
    }
}
