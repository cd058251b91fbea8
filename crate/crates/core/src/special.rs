//! Jacobi theta functions, Dedekind eta, Eisenstein series and the modular and heat-equation
//! laws they satisfy.
//!
//! Conventions: the public variable is z, with xi = 2 pi i z used in product forms. The odd
//! theta is normalized by its product form,
//! theta_11(z) = q^{1/8} (e^{pi i z} - e^{-pi i z}) prod (1-q^n)(1-q^n e^{2 pi i z})(1-q^n e^{-2 pi i z}),
//! which is -i times the characteristic sum theta[1/2;1/2]. Fractional powers of q are
//! exp(2 pi i r tau).

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qseries::{qpow, QPoint, Rat};

const TAIL: f64 = 1e-17;
const MIN_TERMS: usize = 8;
const MAX_TERMS: usize = 200_000;

fn ci(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaChar {
    pub a: f64,
    pub b: f64,
}

impl ThetaChar {
    pub fn standard(i: u8, j: u8) -> Self {
        Self { a: 0.5 * f64::from(i & 1), b: 0.5 * f64::from(j & 1) }
    }
}

/// One of the four spin structures on the elliptic curve; (1,1) is the odd one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpinStructure {
    pub i: u8,
    pub j: u8,
}

impl SpinStructure {
    pub fn new(i: u8, j: u8) -> Result<Self> {
        if i > 1 || j > 1 {
            return Err(Error::Validation(format!("spin structure bits must be 0/1, got ({i},{j})")));
        }
        Ok(Self { i, j })
    }
    pub fn all() -> [SpinStructure; 4] {
        [(0, 0), (0, 1), (1, 0), (1, 1)].map(|(i, j)| SpinStructure { i, j })
    }
    pub fn is_odd(&self) -> bool {
        self.i == 1 && self.j == 1
    }
}

fn check_tau(tau: C64) -> Result<()> {
    if tau.im > 0.0 && tau.re.is_finite() && tau.im.is_finite() {
        Ok(())
    } else {
        Err(Error::NonConvergent(format!("Im tau must be positive, got {tau}")))
    }
}

/// Characteristic sum  sum_n exp(pi i (n+a)^2 tau + 2 pi i (n+a)(z+b)),
/// summed outward from the largest term until the next term drops below 1e-17 of the
/// largest one seen (at least 8 terms on each side).
pub fn theta_char(a: f64, b: f64, z: C64, tau: C64) -> Result<C64> {
    check_tau(tau)?;
    let term = |n: i64| {
        let na = n as f64 + a;
        (I * PI * na * na * tau + 2.0 * PI * I * na * (z + b)).exp()
    };
    let n0 = (-a - z.im / tau.im).round() as i64;
    let first = term(n0);
    let mut sum = first;
    let mut biggest = first.norm();
    for dir in [1i64, -1] {
        let mut k = 1i64;
        loop {
            let t = term(n0 + dir * k);
            sum += t;
            biggest = biggest.max(t.norm());
            // beyond the peak the terms decay like a Gaussian
            if k as usize >= MIN_TERMS && t.norm() <= TAIL * biggest {
                break;
            }
            if k as usize > MAX_TERMS {
                return Err(Error::NonConvergent("theta series did not settle".into()));
            }
            k += 1;
        }
    }
    Ok(sum)
}

/// Sum form of the four standard thetas, written with cos/sin so that parity in z is exact.
pub fn theta(i: u8, j: u8, z: C64, tau: C64) -> Result<C64> {
    check_tau(tau)?;
    let (i, j) = (i & 1, j & 1);
    let half = if i == 1 { 0.5 } else { 0.0 };
    let mut sum = if i == 0 { ci(1.0, 0.0) } else { ci(0.0, 0.0) };
    let start = if i == 0 { 1 } else { 0 };
    let mut biggest: f64 = sum.norm();
    let mut n = start;
    let mut count = 0usize;
    loop {
        let m = n as f64 + half;
        let w = (I * PI * m * m * tau).exp();
        let sign = if j == 1 && n % 2 == 1 { -1.0 } else { 1.0 };
        let t = if i == 1 && j == 1 {
            2.0 * sign * w * (2.0 * PI * m * z).sin()
        } else {
            2.0 * sign * w * (2.0 * PI * m * z).cos()
        };
        // magnitude envelope, independent of the oscillating factor
        let env = 2.0 * w.norm() * (2.0 * PI * m * z.im).abs().cosh();
        sum += t;
        biggest = biggest.max(env);
        count += 1;
        let past_peak = m * tau.im > z.im.abs();
        if count >= MIN_TERMS && past_peak && env <= TAIL * biggest {
            break;
        }
        if count > MAX_TERMS {
            return Err(Error::NonConvergent("theta series did not settle".into()));
        }
        n += 1;
    }
    if i == 1 && j == 1 {
        // 2i sum (-1)^n q^{(n+1/2)^2/2} sin((2n+1) pi z)
        Ok(I * sum)
    } else {
        Ok(sum)
    }
}

/// Product form in xi = 2 pi i z.
pub fn theta_product(i: u8, j: u8, z: C64, tau: C64) -> Result<C64> {
    let p = QPoint::new(tau)?;
    let q = p.q();
    let xi = 2.0 * PI * I * z;
    let (ep, em) = (xi.exp(), (-xi).exp());
    let growth = xi.re.abs().exp();
    let (i, j) = (i & 1, j & 1);
    let one = ci(1.0, 0.0);
    let mut acc = match (i, j) {
        (0, _) => one,
        (1, 0) => qpow(tau, 0.125) * ((0.5 * xi).exp() + (-0.5 * xi).exp()),
        _ => qpow(tau, 0.125) * ((0.5 * xi).exp() - (-0.5 * xi).exp()),
    };
    let sgn = if j == 1 { -1.0 } else { 1.0 };
    let qh = qpow(tau, 0.5);
    let mut qn = one;
    let mut n = 1usize;
    loop {
        qn *= q;
        // q^{n-1/2} for the Neveu-Schwarz type factors, q^n otherwise
        let shifted = if i == 0 { qn / qh } else { qn };
        acc *= (one - qn) * (one + sgn * shifted * ep) * (one + sgn * shifted * em);
        let tail = shifted.norm() * growth;
        if n >= MIN_TERMS && tail < 1e-18 {
            break;
        }
        if n > MAX_TERMS {
            return Err(Error::NonConvergent(format!(
                "product does not converge: |q| e^|Re xi| = {}",
                q.norm() * growth
            )));
        }
        n += 1;
    }
    Ok(acc)
}

/// Dedekind eta q^{1/24} prod (1 - q^n).
pub fn eta(tau: C64) -> Result<C64> {
    let p = QPoint::new(tau)?;
    let q = p.q();
    let one = ci(1.0, 0.0);
    let mut acc = qpow(tau, 1.0 / 24.0);
    let mut qn = one;
    let mut n = 0usize;
    loop {
        qn *= q;
        acc *= one - qn;
        n += 1;
        if n >= MIN_TERMS && qn.norm() < 1e-18 {
            break;
        }
        if n > MAX_TERMS {
            return Err(Error::NonConvergent("eta product did not settle".into()));
        }
    }
    Ok(acc)
}

/// Exact Bernoulli number B_k (B_1 = -1/2).
pub fn bernoulli(k: usize) -> Rat {
    let mut b: Vec<Ratio<i128>> = Vec::with_capacity(k + 1);
    for m in 0..=k {
        if m == 0 {
            b.push(Ratio::from_integer(1));
            continue;
        }
        // sum_{j<m} C(m+1, j) B_j + (m+1) B_m = 0
        let mut s = Ratio::from_integer(0i128);
        let mut binom: i128 = 1;
        for (jdx, bj) in b.iter().enumerate() {
            s += *bj * binom;
            binom = binom * (m as i128 + 1 - jdx as i128) / (jdx as i128 + 1);
        }
        b.push(-s / Ratio::from_integer(m as i128 + 1));
    }
    let v = b[k];
    Ratio::new(*v.numer() as i64, *v.denom() as i64)
}

fn divisor_power_sum(n: u64, p: u32) -> f64 {
    let mut s = 0.0;
    let mut d = 1u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            s += (d as f64).powi(p as i32);
            let e = n / d;
            if e != d {
                s += (e as f64).powi(p as i32);
            }
        }
        d += 1;
    }
    s
}

/// Normalized Eisenstein series G_k = -B_k/(2k) + sum_{n=1}^{N} sigma_{k-1}(n) q^n.
pub fn eisenstein_g(k: usize, tau: C64, n_terms: usize) -> Result<C64> {
    if k < 2 || k % 2 == 1 || k > 30 {
        return Err(Error::Validation(format!("weight must be even in 2..=30, got {k}")));
    }
    let p = QPoint::new(tau)?;
    let q = p.q();
    let b = bernoulli(k);
    let c0 = -(*b.numer() as f64) / (*b.denom() as f64) / (2.0 * k as f64);
    let mut sum = ci(c0, 0.0);
    let mut qn = ci(1.0, 0.0);
    for n in 1..=n_terms as u64 {
        qn *= q;
        sum += divisor_power_sum(n, (k - 1) as u32) * qn;
    }
    Ok(sum)
}

/// Truncation order for eisenstein_g making the tail negligible in double precision.
pub fn eisenstein_terms(k: usize, tau: C64) -> usize {
    let aq = (-2.0 * PI * tau.im).exp();
    let mut n = 8usize;
    while (n as f64).powi(k as i32) * aq.powi(n as i32) > 1e-20 && n < 100_000 {
        n += 1;
    }
    n
}

pub fn g_k(k: usize, tau: C64) -> Result<C64> {
    eisenstein_g(k, tau, eisenstein_terms(k, tau))
}

pub fn g2(tau: C64) -> Result<C64> {
    g_k(2, tau)
}

/// Weight-two covariant completion G_2 + 1/(8 pi Im tau).
pub fn g2_hat(tau: C64) -> Result<C64> {
    Ok(g2(tau)? + 1.0 / (8.0 * PI * tau.im))
}

fn check_step(tau: C64, h: f64) -> Result<()> {
    check_tau(tau)?;
    if h.is_nan() || h <= 0.0 || tau.im <= h {
        return Err(Error::Validation(format!("step h={h} must satisfy 0 < h < Im tau")));
    }
    Ok(())
}

fn heat_op<F: Fn(C64, C64) -> Result<C64>>(f: &F, z: C64, tau: C64, h: f64) -> Result<C64> {
    let dt = (f(z, tau + h)? - f(z, tau - h)?) / (2.0 * h);
    let dzz = (f(z + h, tau)? - 2.0 * f(z, tau)? + f(z - h, tau)?) / (h * h);
    Ok(dt - dzz / (4.0 * PI * I))
}

/// (d/dtau - (1/4 pi i) d^2/dz^2) theta_ij by central differences.
pub fn heat_residual(i: u8, j: u8, z: C64, tau: C64, h: f64) -> Result<C64> {
    check_step(tau, h)?;
    heat_op(&|z, t| theta(i, j, z, t), z, tau, h)
}

/// Modified heat operator d/dtau - 6 pi i G_2 - (1/4 pi i) d^2/dz^2 applied to theta_ij/eta^3.
/// The G_2 term is the logarithmic tau-derivative of eta^{-3}.
pub fn modified_heat_residual(i: u8, j: u8, z: C64, tau: C64, h: f64) -> Result<C64> {
    check_step(tau, h)?;
    let f = |z: C64, t: C64| Ok(theta(i, j, z, t)? / eta(t)?.powi(3));
    let d = heat_op(&f, z, tau, h)?;
    Ok(d - 6.0 * PI * I * g2(tau)? * f(z, tau)?)
}

/// e^{-4 pi^2 G_2 z^2} theta_11 / eta^3.
pub fn conjugated_theta11(z: C64, tau: C64) -> Result<C64> {
    Ok((-4.0 * PI * PI * g2(tau)? * z * z).exp() * theta(1, 1, z, tau)? / eta(tau)?.powi(3))
}

/// The modified heat operator conjugated by the Gaussian e^{-4 pi^2 G_2 z^2}:
/// D + 4 pi i G_2 (z d/dz - 1) + (20/3) pi^3 i G_4 z^2, applied to conjugated_theta11.
pub fn conjugated_heat_residual(z: C64, tau: C64, h: f64) -> Result<C64> {
    check_step(tau, h)?;
    let f = |z: C64, t: C64| conjugated_theta11(z, t);
    let d = heat_op(&f, z, tau, h)?;
    let phi = f(z, tau)?;
    let dz = (f(z + h, tau)? - f(z - h, tau)?) / (2.0 * h);
    let g2v = g2(tau)?;
    let g4v = g_k(4, tau)?;
    Ok(d + 4.0 * PI * I * g2v * (z * dz - phi) + (20.0 / 3.0) * PI.powi(3) * I * g4v * z * z * phi)
}

/// q d/dq log eta + G_2 with a five-point stencil in tau.
pub fn log_eta_derivative_residual(tau: C64, h: f64) -> Result<C64> {
    check_tau(tau)?;
    if tau.im <= 2.0 * h {
        return Err(Error::Validation("step too large for Im tau".into()));
    }
    let e = |t: C64| eta(t);
    let d = (-e(tau + 2.0 * h)? + 8.0 * e(tau + h)? - 8.0 * e(tau - h)? + e(tau - 2.0 * h)?)
        / (12.0 * h);
    Ok(d / e(tau)? / (2.0 * PI * I) + g2(tau)?)
}

/// d/dz theta_11 at z = 0 from the termwise-differentiated sum; equals 2 pi i eta^3.
pub fn theta11_dz0(tau: C64) -> Result<C64> {
    Ok(2.0 * PI * I * theta11_xi_coeffs(tau, 1)?[1])
}

/// Taylor coefficients of theta_11 in xi = 2 pi i z up to degree kmax:
/// coefficient k is 2 sum_{n>=0} (-1)^n q^{(n+1/2)^2/2} (n+1/2)^k / k! for odd k, 0 for even k.
pub fn theta11_xi_coeffs(tau: C64, kmax: usize) -> Result<Vec<C64>> {
    check_tau(tau)?;
    let mut out = vec![ci(0.0, 0.0); kmax + 1];
    let mut fact = vec![1.0f64; kmax + 1];
    for k in 1..=kmax {
        fact[k] = fact[k - 1] * k as f64;
    }
    let mut n = 0usize;
    loop {
        let m = n as f64 + 0.5;
        let w = (I * PI * m * m * tau).exp() * if n % 2 == 1 { -2.0 } else { 2.0 };
        let mut biggest = 0.0f64;
        for k in (1..=kmax).step_by(2) {
            let t = w * m.powi(k as i32) / fact[k];
            out[k] += t;
            biggest = biggest.max(t.norm());
        }
        n += 1;
        if n >= MIN_TERMS && m * m * tau.im * PI > 60.0 && biggest < 1e-30 {
            break;
        }
        if n > MAX_TERMS {
            return Err(Error::NonConvergent("theta Taylor coefficients did not settle".into()));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modular {
    T,
    S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModTarget {
    /// theta_11 / eta
    Theta11OverEta,
    /// theta_11 / eta^3
    Theta11OverEta3,
    /// e^{4 pi^2 G_2 z^2} z eta^3 / theta_11, invariant under SL_2(Z)
    CompletedSeries,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModularCheck {
    pub lhs: C64,
    pub rhs: C64,
    pub absdiff: f64,
}

fn target_value(target: ModTarget, z: C64, tau: C64) -> Result<C64> {
    match target {
        ModTarget::Theta11OverEta => Ok(theta(1, 1, z, tau)? / eta(tau)?),
        ModTarget::Theta11OverEta3 => Ok(theta(1, 1, z, tau)? / eta(tau)?.powi(3)),
        ModTarget::CompletedSeries => {
            let e3 = eta(tau)?.powi(3);
            let ratio = if z == ci(0.0, 0.0) {
                e3 / theta11_dz0(tau)?
            } else {
                z * e3 / theta(1, 1, z, tau)?
            };
            Ok((4.0 * PI * PI * g2(tau)? * z * z).exp() * ratio)
        }
    }
}

/// Evaluates the target at the transformed point and the transformation law at (z, tau).
pub fn modular_check(which: Modular, target: ModTarget, z: C64, tau: C64) -> Result<ModularCheck> {
    check_tau(tau)?;
    let base = target_value(target, z, tau)?;
    let (lhs, factor) = match which {
        Modular::T => {
            let f = match target {
                ModTarget::Theta11OverEta => (I * PI / 6.0).exp(),
                _ => ci(1.0, 0.0),
            };
            (target_value(target, z, tau + 1.0)?, f)
        }
        Modular::S => {
            let tt = -1.0 / tau;
            let gauss = (I * PI * z * z / tau).exp();
            let f = match target {
                ModTarget::Theta11OverEta => -I * gauss,
                ModTarget::Theta11OverEta3 => gauss / tau,
                ModTarget::CompletedSeries => ci(1.0, 0.0),
            };
            (target_value(target, z / tau, tt)?, f)
        }
    };
    let rhs = factor * base;
    Ok(ModularCheck { lhs, rhs, absdiff: (lhs - rhs).norm() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(re: f64, im: f64) -> C64 {
        ci(re, im)
    }

    #[test]
    fn theta11_vanishes_at_origin() {
        for tau in [t(0.0, 1.0), t(0.3, 0.7), t(-0.4, 2.0)] {
            assert_eq!(theta(1, 1, t(0.0, 0.0), tau).unwrap(), t(0.0, 0.0));
            assert_eq!(theta_product(1, 1, t(0.0, 0.0), tau).unwrap(), t(0.0, 0.0));
            assert!(theta_char(0.5, 0.5, t(0.0, 0.0), tau).unwrap().norm() < 1e-15);
        }
    }

    #[test]
    fn theta00_tends_to_one() {
        let v = theta(0, 0, t(0.0, 0.0), t(0.0, 12.0)).unwrap();
        assert!((v - 1.0).norm() < 1e-15);
    }

    #[test]
    fn sum_and_product_agree_at_two_i() {
        let (z, tau) = (t(0.3, 0.0), t(0.0, 2.0));
        let a = theta(1, 1, z, tau).unwrap();
        let b = theta_product(1, 1, z, tau).unwrap();
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn theta10_at_zero_matches_characteristic_sum() {
        let tau = t(0.0, 1.0);
        let p = theta_product(1, 0, t(0.0, 0.0), tau).unwrap();
        let s = theta_char(0.5, 0.0, t(0.0, 0.0), tau).unwrap();
        assert!((p - s).norm() < 1e-12);
    }

    #[test]
    fn theta01_is_shifted_theta00() {
        let (z, tau) = (t(0.17, -0.08), t(0.21, 0.9));
        let a = theta(0, 1, z, tau).unwrap();
        let b = theta(0, 0, z + 0.5, tau).unwrap();
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn theta11_is_minus_i_times_characteristic_sum() {
        let (z, tau) = (t(0.23, 0.1), t(0.1, 1.1));
        let a = theta(1, 1, z, tau).unwrap();
        let b = theta_char(0.5, 0.5, z, tau).unwrap();
        assert!((a + I * b).norm() < 1e-13);
    }

    #[test]
    fn eta_at_i() {
        // Gamma(1/4) / (2 pi^{3/4})
        let v = eta(t(0.0, 1.0)).unwrap();
        assert!((v - 0.768_225_422_326_056_7).norm() < 1e-14);
    }

    #[test]
    fn eta_transformations() {
        let tau = t(0.0, 1.3);
        let a = eta(tau + 1.0).unwrap();
        let b = (I * PI / 12.0).exp() * eta(tau).unwrap();
        assert!((a - b).norm() < 1e-12);
        let tau = t(0.0, 2.0);
        let a = eta(-1.0 / tau).unwrap();
        let b = (-I * tau).sqrt() * eta(tau).unwrap();
        assert!((a - b).norm() < 1e-10);
    }

    #[test]
    fn bernoulli_values() {
        use crate::qseries::rat;
        assert_eq!(bernoulli(1), rat(-1, 2));
        assert_eq!(bernoulli(2), rat(1, 6));
        assert_eq!(bernoulli(4), rat(-1, 30));
        assert_eq!(bernoulli(12), rat(-691, 2730));
        assert_eq!(bernoulli(5), rat(0, 1));
    }

    #[test]
    fn g2_constant_term_and_periodicity() {
        let c = eisenstein_g(2, t(0.0, 40.0), 10).unwrap();
        assert!((c + 1.0 / 24.0).norm() < 1e-15);
        let tau = t(0.0, 1.7);
        assert!((g2(tau + 1.0).unwrap() - g2(tau).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn g2_quasimodular_law() {
        let tau = t(0.2, 1.0);
        let r = g2(-1.0 / tau).unwrap() - tau * tau * g2(tau).unwrap() + tau / (4.0 * PI * I);
        assert!(r.norm() < 1e-9, "{r}");
    }

    #[test]
    fn g4_is_modular() {
        let tau = t(0.1, 1.2);
        let r = g_k(4, -1.0 / tau).unwrap() - tau.powi(4) * g_k(4, tau).unwrap();
        assert!(r.norm() < 1e-9);
    }

    #[test]
    fn g2_hat_covariance() {
        let tau = t(0.3, 1.1);
        let r = g2_hat(-1.0 / tau).unwrap() - tau * tau * g2_hat(tau).unwrap();
        assert!(r.norm() < 1e-9);
        let d = g2_hat(t(0.0, 1.0)).unwrap() - g2(t(0.0, 1.0)).unwrap();
        assert!((d - 1.0 / (8.0 * PI)).norm() < 1e-15);
    }

    #[test]
    fn ramanujan_derivative_of_g2() {
        // dG_2/dtau = -2 pi i (2 G_2^2 - 5 G_4 / 6)
        let tau = t(0.1, 0.9);
        let h = 1e-4;
        let d = (-g2(tau + 2.0 * h).unwrap() + 8.0 * g2(tau + h).unwrap()
            - 8.0 * g2(tau - h).unwrap()
            + g2(tau - 2.0 * h).unwrap())
            / (12.0 * h);
        let g = g2(tau).unwrap();
        let rhs = -2.0 * PI * I * (2.0 * g * g - 5.0 * g_k(4, tau).unwrap() / 6.0);
        assert!((d - rhs).norm() < 1e-8, "{d} vs {rhs}");
    }

    #[test]
    fn heat_residuals_small_and_second_order() {
        let (z, tau) = (t(0.2, 0.0), t(0.0, 1.5));
        let r1 = heat_residual(0, 0, z, tau, 1e-3).unwrap();
        let r2 = heat_residual(0, 0, z, tau, 5e-4).unwrap();
        assert!(r1.norm() < 1e-5);
        let ratio = r1.norm() / r2.norm();
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
        assert_eq!(heat_residual(1, 1, t(0.0, 0.0), tau, 1e-3).unwrap(), t(0.0, 0.0));
    }

    #[test]
    fn modified_and_conjugated_heat() {
        let (z, tau) = (t(0.2, 0.0), t(0.0, 1.4));
        assert!(modified_heat_residual(1, 1, z, tau, 1e-3).unwrap().norm() < 1e-5);
        assert!(conjugated_heat_residual(z, tau, 1e-3).unwrap().norm() < 1e-5);
        assert!(log_eta_derivative_residual(tau, 1e-3).unwrap().norm() < 1e-8);
    }

    #[test]
    fn jacobi_derivative_identity() {
        for tau in [t(0.0, 1.0), t(0.4, 0.8)] {
            let d = theta11_dz0(tau).unwrap();
            let e3 = eta(tau).unwrap().powi(3);
            assert!((d / e3 - 2.0 * PI * I).norm() < 1e-10);
        }
    }

    #[test]
    fn modular_laws_examples() {
        let tau = t(0.1, 1.0);
        let z = t(0.13, 0.05);
        let r = modular_check(Modular::T, ModTarget::Theta11OverEta, z, tau).unwrap();
        assert!(r.absdiff < 1e-10);
        let r = modular_check(Modular::S, ModTarget::Theta11OverEta3, t(0.25, 0.0), t(0.0, 1.2))
            .unwrap();
        assert!(r.absdiff < 1e-9);
        for w in [Modular::S, Modular::T] {
            let r = modular_check(w, ModTarget::CompletedSeries, z, tau).unwrap();
            assert!(r.absdiff < 1e-9, "{w:?} {r:?}");
        }
    }

    #[test]
    fn quasi_periodicity() {
        let (z, tau) = (t(0.11, 0.07), t(0.2, 0.9));
        let th = theta(1, 1, z, tau).unwrap();
        let a = theta(1, 1, z + 1.0, tau).unwrap();
        assert!((a + th).norm() <= 1e-11 * th.norm());
        let b = theta(1, 1, z + tau, tau).unwrap();
        let expect = -qpow(tau, -0.5) * (-2.0 * PI * I * z).exp() * th;
        assert!((b - expect).norm() <= 1e-11 * expect.norm());
    }

    #[test]
    fn lower_half_plane_rejected() {
        assert!(matches!(theta_char(0.0, 0.0, t(0.0, 0.0), t(0.0, -1.0)), Err(Error::NonConvergent(_))));
        assert!(theta_product(0, 0, t(0.0, 0.0), t(0.0, 0.0)).is_err());
    }

    fn upper() -> impl Strategy<Value = C64> {
        (-0.5f64..0.5, 0.4f64..2.0).prop_map(|(a, b)| ci(a, b))
    }

    fn strip() -> impl Strategy<Value = C64> {
        (-0.5f64..0.5, -0.3f64..0.3).prop_map(|(a, b)| ci(a, b))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn sum_equals_product(z in strip(), tau in upper(), i in 0u8..2, j in 0u8..2) {
            let s = theta(i, j, z, tau).unwrap();
            let p = theta_product(i, j, z, tau).unwrap();
            prop_assert!((s - p).norm() < 1e-11 * s.norm().max(1.0));
        }

        #[test]
        fn quasi_periodicity_on_strip(z in strip(), tau in upper(), i in 0u8..2, j in 0u8..2) {
            let v = theta(i, j, z, tau).unwrap();
            let sign_a = if i == 1 { -1.0 } else { 1.0 };
            let sign_b = if j == 1 { -1.0 } else { 1.0 };
            let one = theta(i, j, z + 1.0, tau).unwrap();
            prop_assert!((one - sign_a * v).norm() < 1e-11 * v.norm().max(1.0));
            let shifted = theta(i, j, z + tau, tau).unwrap();
            let factor = sign_b * (-PI * I * tau - 2.0 * PI * I * z).exp();
            prop_assert!((shifted - factor * v).norm() < 1e-10 * shifted.norm().max(1.0));
        }

        #[test]
        fn eta_laws_on_strip(tau in upper()) {
            let e = eta(tau).unwrap();
            let t = eta(tau + 1.0).unwrap();
            prop_assert!((t - (PI * I / 12.0).exp() * e).norm() < 1e-13);
            let s = eta(-1.0 / tau).unwrap();
            prop_assert!((s - (-I * tau).sqrt() * e).norm() < 1e-12);
        }

        #[test]
        fn g2_transformation(tau in upper()) {
            let s = -1.0 / tau;
            let law = tau * tau * g2(tau).unwrap() - tau / (4.0 * PI * I);
            prop_assert!((g2(s).unwrap() - law).norm() < 1e-10);
            prop_assert!((g2_hat(s).unwrap() - tau * tau * g2_hat(tau).unwrap()).norm() < 1e-10);
        }

        #[test]
        fn jacobi_quartic(tau in upper()) {
            let z0 = ci(0.0, 0.0);
            let f = |i, j| theta(i, j, z0, tau).unwrap().powi(4);
            let lhs = f(0, 0);
            prop_assert!((f(0, 1) + f(1, 0) - lhs).norm() < 1e-11 * lhs.norm());
        }
    }
}
