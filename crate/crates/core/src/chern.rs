//! Formal Chern-root series, q-graded Chern characters, the Witten-genus characteristic series
//! and Bismut-Chern iterated integrals over the Grassmann engine.
//!
//! A Chern root x enters the exponentials as e^{x} (so x plays the role of 2 pi i z), which
//! makes x / (theta_11 / eta^3) start at 1.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::affine::{char_qexpansion, fock_states, modular_anomaly, CartanPoint, LevelOneRep};
use crate::error::{Error, Result};
use crate::expm::cf4_transport_steps;
use crate::grassmann::{g_str, Blade, ExtAlgebra, GrassMat, GrassScalar};
use crate::qseries::{rat, QPoint, QSeries, Rat};
use crate::special::{eta, theta11_xi_coeffs};
use crate::transport::{Algebra, LoopConnection, LoopConnectionJson};

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

/// Truncated power series in `nvars` commuting variables; monomials of total degree above
/// `cap` are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct FormalSeries {
    nvars: usize,
    cap: usize,
    terms: BTreeMap<Vec<u8>, C64>,
}

impl FormalSeries {
    pub fn zero(nvars: usize, cap: usize) -> Self {
        Self { nvars, cap, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, cap: usize, c: C64) -> Self {
        let mut s = Self::zero(nvars, cap);
        s.insert(vec![0; nvars], c);
        s
    }

    /// The variable x_i (0-based).
    pub fn var(nvars: usize, cap: usize, i: usize) -> Self {
        let mut s = Self::zero(nvars, cap);
        if cap >= 1 {
            let mut e = vec![0; nvars];
            e[i] = 1;
            s.insert(e, one());
        }
        s
    }

    /// sum_k c_k x_i^k.
    pub fn univariate(nvars: usize, cap: usize, i: usize, coeffs: &[C64]) -> Self {
        let mut s = Self::zero(nvars, cap);
        for (k, c) in coeffs.iter().enumerate().take(cap + 1) {
            let mut e = vec![0; nvars];
            e[i] = k as u8;
            s.insert(e, *c);
        }
        s
    }

    fn insert(&mut self, e: Vec<u8>, c: C64) {
        let deg: usize = e.iter().map(|d| *d as usize).sum();
        if deg > self.cap {
            return;
        }
        let v = self.terms.get(&e).copied().unwrap_or_else(C64::zero) + c;
        if v == C64::zero() {
            self.terms.remove(&e);
        } else {
            self.terms.insert(e, v);
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }
    pub fn cap(&self) -> usize {
        self.cap
    }
    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u8>, &C64)> {
        self.terms.iter()
    }
    pub fn coeff(&self, e: &[u8]) -> C64 {
        self.terms.get(e).copied().unwrap_or_else(C64::zero)
    }
    pub fn constant_term(&self) -> C64 {
        self.coeff(&vec![0; self.nvars])
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = Self::zero(self.nvars, self.cap.min(o.cap));
        for (e, c) in self.terms.iter().chain(o.terms.iter()) {
            out.insert(e.clone(), *c);
        }
        out
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(-one()))
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = Self::zero(self.nvars, self.cap);
        for (e, v) in &self.terms {
            out.insert(e.clone(), v * c);
        }
        out
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut out = Self::zero(self.nvars, self.cap.min(o.cap));
        for (ea, a) in &self.terms {
            let da: usize = ea.iter().map(|d| *d as usize).sum();
            for (eb, b) in &o.terms {
                let db: usize = eb.iter().map(|d| *d as usize).sum();
                if da + db > out.cap {
                    continue;
                }
                let e: Vec<u8> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
                out.insert(e, a * b);
            }
        }
        out
    }

    fn without_constant(&self) -> Self {
        let mut n = self.clone();
        n.terms.remove(&vec![0; self.nvars]);
        n
    }

    /// exp(c + N) = e^c sum N^k / k!, finite under the degree cap.
    pub fn exp(&self) -> Self {
        let n = self.without_constant();
        let mut term = Self::constant(self.nvars, self.cap, one());
        let mut sum = term.clone();
        for k in 1..=self.cap {
            term = term.mul(&n).scale(C64::new(1.0 / k as f64, 0.0));
            if term.terms.is_empty() {
                break;
            }
            sum = sum.add(&term);
        }
        sum.scale(self.constant_term().exp())
    }

    /// 1 / (c + N) = (1/c) sum (-N/c)^k.
    pub fn inverse(&self) -> Result<Self> {
        let c = self.constant_term();
        if c.norm() == 0.0 {
            return Err(Error::Validation("series with zero constant term is not invertible".into()));
        }
        let n = self.without_constant().scale(-1.0 / c);
        let mut term = Self::constant(self.nvars, self.cap, one());
        let mut sum = term.clone();
        for _ in 1..=self.cap {
            term = term.mul(&n);
            if term.terms.is_empty() {
                break;
            }
            sum = sum.add(&term);
        }
        Ok(sum.scale(1.0 / c))
    }

    /// Divides by x_i, dropping monomials without x_i; returns the quotient (cap lowered by one)
    /// and the largest dropped coefficient.
    pub fn div_by_var(&self, i: usize) -> (Self, f64) {
        let mut out = Self::zero(self.nvars, self.cap.saturating_sub(1));
        let mut dropped: f64 = 0.0;
        for (e, c) in &self.terms {
            if e[i] == 0 {
                dropped = dropped.max(c.norm());
            } else {
                let mut e2 = e.clone();
                e2[i] -= 1;
                out.insert(e2, *c);
            }
        }
        (out, dropped)
    }

    pub fn with_cap(&self, cap: usize) -> Self {
        let mut out = Self::zero(self.nvars, cap.min(self.cap));
        for (e, c) in &self.terms {
            out.insert(e.clone(), *c);
        }
        out
    }

    pub fn max_diff(&self, o: &Self) -> f64 {
        self.sub(o).terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// e^{sum mu_i x_i}.
    pub fn exp_linear(nvars: usize, cap: usize, mu: &[f64]) -> Self {
        let mut lin = Self::zero(nvars, cap);
        for (i, m) in mu.iter().enumerate() {
            lin = lin.add(&Self::var(nvars, cap, i).scale(C64::new(*m, 0.0)));
        }
        lin.exp()
    }
}

/// sum over (mu, mult) of mult e^{mu(x)}.
pub fn chern_character(weights: &[(Vec<f64>, i64)], nvars: usize, cap: usize) -> Result<FormalSeries> {
    let mut out = FormalSeries::zero(nvars, cap);
    for (mu, m) in weights {
        if mu.len() != nvars {
            return Err(Error::DimMismatch(format!("weight of length {} for {nvars} variables", mu.len())));
        }
        out = out.add(&FormalSeries::exp_linear(nvars, cap, mu).scale(C64::new(*m as f64, 0.0)));
    }
    Ok(out)
}

/// q-series whose coefficients are formal series.
#[derive(Debug, Clone, PartialEq)]
pub struct QFormal {
    terms: BTreeMap<Rat, FormalSeries>,
    trunc: Rat,
    nvars: usize,
    cap: usize,
}

impl QFormal {
    pub fn one(nvars: usize, cap: usize, trunc: Rat) -> Self {
        Self::from_terms(nvars, cap, [(Rat::zero(), FormalSeries::constant(nvars, cap, one()))], trunc)
    }

    pub fn from_terms<I: IntoIterator<Item = (Rat, FormalSeries)>>(nvars: usize, cap: usize, it: I, trunc: Rat) -> Self {
        let mut terms: BTreeMap<Rat, FormalSeries> = BTreeMap::new();
        for (e, f) in it {
            if e < trunc {
                let cur = terms.remove(&e).unwrap_or_else(|| FormalSeries::zero(nvars, cap));
                terms.insert(e, cur.add(&f));
            }
        }
        terms.retain(|_, f| !f.terms.is_empty());
        Self { terms, trunc, nvars, cap }
    }

    pub fn trunc(&self) -> Rat {
        self.trunc
    }
    pub fn terms(&self) -> impl Iterator<Item = (&Rat, &FormalSeries)> {
        self.terms.iter()
    }
    pub fn coeff(&self, e: Rat) -> FormalSeries {
        self.terms.get(&e).cloned().unwrap_or_else(|| FormalSeries::zero(self.nvars, self.cap))
    }
    pub fn valuation(&self) -> Rat {
        self.terms.keys().next().copied().unwrap_or(self.trunc)
    }

    pub fn shift(&self, r: Rat) -> Self {
        Self::from_terms(self.nvars, self.cap, self.terms.iter().map(|(e, f)| (e + r, f.clone())), self.trunc + r)
    }

    /// Product with the same truncation rule as QSeries multiplication.
    pub fn mul(&self, o: &Self) -> Self {
        let trunc = (self.trunc + o.valuation()).min(o.trunc + self.valuation());
        let mut out: Vec<(Rat, FormalSeries)> = Vec::new();
        for (ea, a) in &self.terms {
            for (eb, b) in &o.terms {
                if ea + eb < trunc {
                    out.push((ea + eb, a.mul(b)));
                }
            }
        }
        Self::from_terms(self.nvars, self.cap.min(o.cap), out, trunc)
    }

    /// sum_e coeff_e q^e at a point.
    pub fn eval(&self, p: &QPoint) -> FormalSeries {
        let mut out = FormalSeries::zero(self.nvars, self.cap);
        for (e, f) in &self.terms {
            out = out.add(&f.scale(p.qpow(*e)));
        }
        out
    }

    /// Scalar q-series of constant terms (x = 0).
    pub fn at_origin(&self) -> QSeries {
        QSeries::from_terms(self.terms.iter().map(|(e, f)| (*e, f.constant_term())), self.trunc)
    }
}

/// q-graded Chern character of the level-one representation in the character grading (the
/// same exponents as char_qexpansion); the Fock grading is `.shift(-m)`.
pub fn q_graded_chern(rep: LevelOneRep, l: usize, t: i64, cap: usize) -> Result<QFormal> {
    if t <= 0 {
        return Err(Error::TruncationTooSmall);
    }
    if l == 0 {
        return Err(Error::InvalidRank(0));
    }
    let (i, j) = rep.ij();
    let trunc = rat(t, 1);
    let s = C64::new(if j == 1 { -1.0 } else { 1.0 }, 0.0);
    let mut total = QFormal::one(l, cap, rat(1 << 40, 1));
    for k in 0..l {
        let mut unit = vec![0.0; l];
        unit[k] = 1.0;
        let ep = FormalSeries::exp_linear(l, cap, &unit);
        unit[k] = -1.0;
        let em = FormalSeries::exp_linear(l, cap, &unit);
        let mut f = if i == 1 {
            unit[k] = 0.5;
            let up = FormalSeries::exp_linear(l, cap, &unit);
            unit[k] = -0.5;
            let c = up.add(&FormalSeries::exp_linear(l, cap, &unit).scale(s));
            QFormal::from_terms(l, cap, [(Rat::zero(), c)], trunc)
        } else {
            QFormal::one(l, cap, trunc)
        };
        let offset = if i == 1 { Rat::zero() } else { rat(1, 2) };
        let mut n = 1i64;
        while rat(n, 1) - offset < trunc {
            let e = rat(n, 1) - offset;
            let fac = QFormal::from_terms(
                l,
                cap,
                [
                    (Rat::zero(), FormalSeries::constant(l, cap, one())),
                    (e, ep.add(&em).scale(s)),
                    (e * 2, FormalSeries::constant(l, cap, one())),
                ],
                trunc,
            );
            f = f.mul(&fac);
            n += 1;
        }
        let pre = if i == 1 { rat(1, 12) } else { rat(-1, 24) };
        total = total.mul(&f.shift(pre));
    }
    Ok(total)
}

/// Per-root characteristic series x / (theta_11(x) / eta^3), multiplied over l roots.
pub fn witten_series(l: usize, tau: C64, cap: usize) -> Result<FormalSeries> {
    let c = theta11_xi_coeffs(tau, cap + 1)?;
    let e3 = eta(tau)?.powi(3);
    let mut out = FormalSeries::constant(l, cap, one());
    for k in 0..l {
        // theta_11 / x has coefficients c_{j+1}
        let quotient: Vec<C64> = (0..=cap).map(|j| c[j + 1] / e3).collect();
        let root = FormalSeries::univariate(l, cap, k, &quotient).inverse()?;
        out = out.mul(&root);
    }
    Ok(out)
}

/// prod (x_i / 2) / sinh(x_i / 2).
pub fn a_hat_series(l: usize, cap: usize) -> Result<FormalSeries> {
    // sinh(x/2) / (x/2) = sum x^{2k} / (4^k (2k+1)!)
    let mut coeffs = vec![C64::zero(); cap + 1];
    let mut f = 1.0f64; // (2k+1)!
    for k in 0..=cap / 2 {
        if k > 0 {
            f *= ((2 * k) * (2 * k + 1)) as f64;
        }
        coeffs[2 * k] = C64::new(1.0 / (4f64.powi(k as i32) * f), 0.0);
    }
    let mut out = FormalSeries::constant(l, cap, one());
    for k in 0..l {
        out = out.mul(&FormalSeries::univariate(l, cap, k, &coeffs).inverse()?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalizationReport {
    pub l: usize,
    pub tau: C64,
    pub degree: usize,
    pub eta_power: i32,
    pub q_terms: i64,
    pub deviation: f64,
    /// largest coefficient discarded when dividing out the Chern roots
    pub division_remainder: f64,
}

/// Number of q-powers needed for |q|^T below 1e-18.
pub fn q_terms_for(tau: C64) -> i64 {
    ((18.0 * 10f64.ln()) / (2.0 * std::f64::consts::PI * tau.im)).ceil() as i64 + 2
}

/// Assembles q^m Ch(S+ - S-) / eta^{eta_power} from the Fock-graded q-expansion of S11, divides
/// out the roots, forms the loop factor C'/P' against the zero-mode factor C' and multiplies by
/// A-hat; compares with witten_series. The identity holds for eta_power = 2l.
pub fn localization_identity_check(l: usize, tau: C64, degree: usize, eta_power: i32) -> Result<LocalizationReport> {
    let p = QPoint::new(tau)?;
    let cap = degree + l;
    let t = q_terms_for(tau);
    let m = modular_anomaly(LevelOneRep::S11, l)?;
    let fock = q_graded_chern(LevelOneRep::S11, l, t, cap)?.shift(-m);
    let big_p = fock.eval(&p).scale(p.qpow(m) / eta(tau)?.powi(eta_power));
    // zero-mode factor prod (e^{x/2} - e^{-x/2})
    let mut big_c = FormalSeries::constant(l, cap, one());
    for k in 0..l {
        let mut mu = vec![0.0; l];
        mu[k] = 0.5;
        let a = FormalSeries::exp_linear(l, cap, &mu);
        mu[k] = -0.5;
        big_c = big_c.mul(&a.sub(&FormalSeries::exp_linear(l, cap, &mu)));
    }
    let mut remainder: f64 = 0.0;
    let (mut pp, mut cp) = (big_p, big_c);
    for k in 0..l {
        let (a, ra) = pp.div_by_var(k);
        let (b, rb) = cp.div_by_var(k);
        remainder = remainder.max(ra).max(rb);
        pp = a;
        cp = b;
    }
    let pp = pp.with_cap(degree);
    let cp = cp.with_cap(degree);
    let lhs = cp.mul(&pp.inverse()?).mul(&a_hat_series(l, degree)?);
    let rhs = witten_series(l, tau, degree)?;
    Ok(LocalizationReport {
        l,
        tau,
        degree,
        eta_power,
        q_terms: t,
        deviation: lhs.max_diff(&rhs),
        division_remainder: remainder,
    })
}

/// Input to the Bismut-Chern transport: the degree-zero connection, even curvature samples and
/// an optional central B-field (one sample or K).
#[derive(Debug, Clone, PartialEq)]
pub struct BChInput {
    conn: LoopConnection,
    curvature: Vec<GrassMat>,
    bfield: Option<Vec<GrassScalar>>,
}

impl BChInput {
    pub fn new(conn: LoopConnection, curvature: Vec<GrassMat>, bfield: Option<Vec<GrassScalar>>) -> Result<Self> {
        let k = conn.len();
        if curvature.len() != k {
            return Err(Error::DimMismatch(format!("{} curvature samples for {k} connection samples", curvature.len())));
        }
        let alg = curvature[0].algebra();
        for (s, r) in curvature.iter().enumerate() {
            if r.algebra() != alg {
                return Err(Error::AlgebraMismatch);
            }
            if r.dim() != conn.n() {
                return Err(Error::DimMismatch(format!("curvature sample {s} has dimension {}", r.dim())));
            }
            if r.parts().any(|(b, _)| b.degree() == 0 || !b.is_even()) {
                return Err(Error::Validation(format!("curvature sample {s} must be even of degree >= 2")));
            }
        }
        if let Some(b) = &bfield {
            if b.len() != 1 && b.len() != k {
                return Err(Error::DimMismatch(format!("{} B-field samples for {k} connection samples", b.len())));
            }
            for x in b {
                if x.algebra() != alg {
                    return Err(Error::AlgebraMismatch);
                }
                if x.parts().any(|(bl, _)| !bl.is_even()) {
                    return Err(Error::Validation("B-field must be even (central)".into()));
                }
            }
        }
        Ok(Self { conn, curvature, bfield })
    }

    pub fn conn(&self) -> &LoopConnection {
        &self.conn
    }
    pub fn curvature(&self) -> &[GrassMat] {
        &self.curvature
    }
    pub fn bfield(&self) -> Option<&[GrassScalar]> {
        self.bfield.as_deref()
    }
    pub fn algebra(&self) -> ExtAlgebra {
        self.curvature[0].algebra()
    }

    pub fn without_bfield(&self) -> Self {
        Self { conn: self.conn.clone(), curvature: self.curvature.clone(), bfield: None }
    }

    /// Constant conjugation of every sample.
    pub fn conjugated(&self, g: &DMatrix<C64>) -> Result<Self> {
        let ginv = g.clone().try_inverse().ok_or_else(|| Error::Validation("singular conjugator".into()))?;
        Ok(Self {
            conn: self.conn.conjugated(g)?,
            curvature: self.curvature.iter().map(|r| r.conjugate(g, &ginv)).collect(),
            bfield: self.bfield.clone(),
        })
    }

    /// Y(t_k) = A(t_k) + R(t_k) + B(t_k).
    fn generator_samples(&self) -> Vec<GrassMat> {
        let alg = self.algebra();
        let n = self.conn.n();
        (0..self.conn.len())
            .map(|k| {
                let mut y = GrassMat::from_body(alg, self.conn.samples()[k].clone());
                y = y.try_add(&self.curvature[k]).expect("validated");
                if let Some(b) = &self.bfield {
                    let bk = if b.len() == 1 { &b[0] } else { &b[k] };
                    y = y.try_add(&bk.to_grassmat(n)).expect("validated");
                }
                y
            })
            .collect()
    }

    pub fn to_json(&self) -> BChInputJson {
        let blade_list = |g: &GrassMat| {
            g.parts()
                .map(|(b, m)| BladeMatrixJson { blade: b.indices(), matrix: crate::transport::matrix_to_pairs(m) })
                .collect()
        };
        BChInputJson {
            conn: self.conn.to_json(),
            generators: self.algebra().generators(),
            curvature: self.curvature.iter().map(blade_list).collect(),
            bfield: self.bfield.as_ref().map(|b| {
                b.iter()
                    .map(|s| s.parts().map(|(bl, c)| BladeScalarJson { blade: bl.indices(), value: [c.re, c.im] }).collect())
                    .collect()
            }),
        }
    }

    pub fn from_json(j: &BChInputJson) -> Result<Self> {
        let conn = LoopConnection::from_json(&j.conn)?;
        let alg = ExtAlgebra::new(j.generators)?;
        let n = conn.n();
        let curvature = j
            .curvature
            .iter()
            .map(|parts| {
                let parts = parts
                    .iter()
                    .map(|p| Ok((Blade::from_indices(&p.blade)?, crate::transport::pairs_to_matrix(n, &p.matrix)?)))
                    .collect::<Result<Vec<_>>>()?;
                if parts.iter().any(|(b, _)| !b.fits(&alg)) {
                    return Err(Error::AlgebraMismatch);
                }
                GrassMat::from_blades(alg, n, parts)
            })
            .collect::<Result<Vec<_>>>()?;
        let bfield = j
            .bfield
            .as_ref()
            .map(|bs| {
                bs.iter()
                    .map(|parts| {
                        let parts = parts
                            .iter()
                            .map(|p| Ok((Blade::from_indices(&p.blade)?, C64::new(p.value[0], p.value[1]))))
                            .collect::<Result<Vec<_>>>()?;
                        GrassScalar::from_parts(alg, parts)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?;
        Self::new(conn, curvature, bfield)
    }
}

/// Blade subsets are 1-based generator indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BladeMatrixJson {
    pub blade: Vec<u8>,
    pub matrix: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BladeScalarJson {
    pub blade: Vec<u8>,
    pub value: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BChInputJson {
    #[serde(flatten)]
    pub conn: LoopConnectionJson,
    pub generators: u8,
    pub curvature: Vec<Vec<BladeMatrixJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bfield: Option<Vec<Vec<BladeScalarJson>>>,
}

/// Transport of d/dt - (A + R + B) over one period by the shared CF4 stepper lifted to
/// Grassmann matrices, then the (super)trace.
pub fn bismut_chern(input: &BChInput, grading: Option<&[f64]>) -> Result<GrassScalar> {
    let ys = input.generator_samples();
    let psi = cf4_transport_steps(&ys, ys.len());
    g_str(&psi, grading)
}

/// A Grassmann scalar with q-series coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct QGrassScalar {
    pub alg: ExtAlgebra,
    pub coeffs: BTreeMap<Blade, QSeries>,
}

impl QGrassScalar {
    pub fn eval(&self, p: &QPoint) -> GrassScalar {
        GrassScalar::from_parts(self.alg, self.coeffs.iter().map(|(b, s)| (*b, s.eval(p))).collect())
            .expect("blades fit the algebra")
    }
}

/// sum_n q^{n + shift} bismut_chern(input_n) over levels n below `trunc`.
pub fn q_graded_bismut_chern(
    inputs: &[(Rat, BChInput)],
    shift: Rat,
    trunc: Rat,
    grading: Option<&[f64]>,
) -> Result<QGrassScalar> {
    let alg = inputs
        .first()
        .map(|(_, i)| i.algebra())
        .ok_or_else(|| Error::Validation("no energy levels given".into()))?;
    let mut terms: BTreeMap<Blade, Vec<(Rat, C64)>> = BTreeMap::new();
    for (n, inp) in inputs {
        if inp.algebra() != alg {
            return Err(Error::AlgebraMismatch);
        }
        let v = bismut_chern(inp, grading)?;
        for (b, c) in v.parts() {
            terms.entry(b).or_default().push((n + shift, c));
        }
    }
    let t = trunc + shift;
    Ok(QGrassScalar { alg, coeffs: terms.into_iter().map(|(b, v)| (b, QSeries::from_terms(v, t))).collect() })
}

#[derive(Debug, Clone, Serialize)]
pub struct EchReport {
    pub rep: LevelOneRep,
    pub cutoff: i64,
    pub states: usize,
    /// iterated-integral path vs direct exponential sum
    pub deviation: f64,
    pub q_abs: f64,
    /// max coefficient change between consecutive cutoffs N -> N+1 -> N+2
    pub cutoff_changes: [f64; 2],
    /// cutoff_changes[1] / cutoff_changes[0] / |q|
    pub decay_ratio_over_q: f64,
    /// degree-zero part of the direct sum at the requested cutoff
    pub total_body: C64,
}

fn weight_curvature(w: &[f64], r: &[GrassScalar], alg: ExtAlgebra) -> GrassScalar {
    w.iter().zip(r).fold(GrassScalar::zero(alg), |acc, (m, rj)| acc.add(&rj.scale(C64::new(*m, 0.0))))
}

/// Direct sum over states of energy <= cutoff of sigma q^E e^{2 pi i mu(z)} exp(mu(r)).
pub fn ech_direct(rep: LevelOneRep, z: &CartanPoint, tau: C64, r: &[GrassScalar], cutoff: i64) -> Result<GrassScalar> {
    let alg = r.first().map(|x| x.algebra()).ok_or(Error::InvalidRank(0))?;
    let p = QPoint::new(tau)?;
    let mut total = GrassScalar::zero(alg);
    for s in fock_states(rep, z.rank(), 2 * cutoff) {
        let w = s.weight();
        let pref = s.sign(rep) * p.qpow(s.energy()) * (2.0 * std::f64::consts::PI * C64::i() * z.pair(&w)).exp();
        total = total.add(&weight_curvature(&w, r, alg).exp().scale(pref));
    }
    Ok(total)
}

/// Restriction of the elliptic Bismut-Chern character to y-constant loops on the energy-truncated
/// Fock model: CF4 transport of diag(2 pi i (tau E_s + mu_s(z))) + diag(mu_s(r)) against the direct
/// exponential sum, plus the cutoff-convergence monitor.
pub fn ech_restriction_check(
    rep: LevelOneRep,
    z: &CartanPoint,
    tau: C64,
    r: &[GrassScalar],
    cutoff: i64,
    samples: usize,
) -> Result<EchReport> {
    let l = z.rank();
    if cutoff < 1 {
        return Err(Error::TruncationTooSmall);
    }
    if r.len() != l {
        return Err(Error::DimMismatch(format!("{} curvature directions for rank {l}", r.len())));
    }
    let alg = r[0].algebra();
    let states = fock_states(rep, l, 2 * cutoff);
    let dim = states.len();
    let two_pi_i = 2.0 * std::f64::consts::PI * C64::i();
    let mut body = DMatrix::<C64>::zeros(dim, dim);
    let mut curv = GrassMat::zero(alg, dim);
    let mut grading = Vec::with_capacity(dim);
    for (k, s) in states.iter().enumerate() {
        let w = s.weight();
        body[(k, k)] = two_pi_i * (tau * crate::qseries::rat_f64(s.energy()) + z.pair(&w));
        grading.push(s.sign(rep));
        for (b, c) in weight_curvature(&w, r, alg).parts() {
            let mut m = curv.coeff(b);
            m[(k, k)] += c;
            curv.set(b, m)?;
        }
    }
    let conn = LoopConnection::new(Algebra::Gl, vec![body; samples])?;
    let input = BChInput::new(conn, vec![curv; samples], None)?;
    let path_a = bismut_chern(&input, Some(&grading))?;
    let path_b = ech_direct(rep, z, tau, r, cutoff)?;
    let t1 = ech_direct(rep, z, tau, r, cutoff + 1)?;
    let t2 = ech_direct(rep, z, tau, r, cutoff + 2)?;
    let d0 = t1.max_diff(&path_b);
    let d1 = t2.max_diff(&t1);
    let q_abs = QPoint::new(tau)?.q().norm();
    Ok(EchReport {
        rep,
        cutoff,
        states: dim,
        deviation: path_a.max_diff(&path_b),
        q_abs,
        cutoff_changes: [d0, d1],
        decay_ratio_over_q: d1 / d0 / q_abs,
        total_body: path_b.get(Blade::EMPTY),
    })
}

/// Partial sum of char_qexpansion over Fock energies <= cutoff, shifted to the Fock grading.
pub fn truncated_character(rep: LevelOneRep, z: &CartanPoint, tau: C64, cutoff: i64) -> Result<C64> {
    let m = modular_anomaly(rep, z.rank())?;
    let p = QPoint::new(tau)?;
    let s = char_qexpansion(rep, z, cutoff + 2)?.shift(-m);
    Ok(s.terms().filter(|(e, _)| *e <= rat(cutoff, 1)).map(|(e, c)| c * p.qpow(e)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expm::expm;
    use crate::special::g2;
    use crate::synth;
    use crate::transport::parallel_transport;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn b(idx: &[u8]) -> Blade {
        Blade::from_indices(idx).unwrap()
    }

    #[test]
    fn chern_character_examples() {
        let triv = chern_character(&[(vec![0.0], 3)], 1, 6).unwrap();
        assert_eq!(triv, FormalSeries::constant(1, 6, c(3.0, 0.0)));
        let v = chern_character(&[(vec![1.0], 1), (vec![-1.0], 1)], 1, 6).unwrap();
        let expect = [2.0, 0.0, 1.0, 0.0, 1.0 / 12.0, 0.0, 2.0 / 720.0];
        for (k, e) in expect.iter().enumerate() {
            assert!((v.coeff(&[k as u8]) - c(*e, 0.0)).norm() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn chern_character_is_additive(ws in prop::collection::vec((prop::collection::vec(-2i32..=2, 2), 1i64..3), 1..5),
                                       vs in prop::collection::vec((prop::collection::vec(-2i32..=2, 2), 1i64..3), 1..5)) {
            let conv = |w: &Vec<(Vec<i32>, i64)>| -> Vec<(Vec<f64>, i64)> {
                w.iter().map(|(m, k)| (m.iter().map(|x| *x as f64).collect(), *k)).collect()
            };
            let (a, bw) = (conv(&ws), conv(&vs));
            let both: Vec<_> = a.iter().chain(bw.iter()).cloned().collect();
            let lhs = chern_character(&both, 2, 5).unwrap();
            let rhs = chern_character(&a, 2, 5).unwrap().add(&chern_character(&bw, 2, 5).unwrap());
            prop_assert!(lhs.max_diff(&rhs) < 1e-12);
        }
    }

    #[test]
    fn formal_inverse_and_exp() {
        let x = FormalSeries::var(2, 6, 0);
        let y = FormalSeries::var(2, 6, 1);
        let u = FormalSeries::constant(2, 6, c(2.0, 0.0)).add(&x).add(&y.mul(&y));
        let inv = u.inverse().unwrap();
        assert!(u.mul(&inv).max_diff(&FormalSeries::constant(2, 6, c(1.0, 0.0))) < 1e-15);
        let e = x.add(&y).exp();
        let prod = x.exp().mul(&y.exp());
        assert!(e.max_diff(&prod) < 1e-15);
    }

    #[test]
    fn q_graded_chern_matches_character_at_origin() {
        for rep in LevelOneRep::ALL {
            for l in [1, 2] {
                let qc = q_graded_chern(rep, l, 5, 4).unwrap();
                let ch = char_qexpansion(rep, &CartanPoint::zeros(l), 5).unwrap();
                let at0 = qc.at_origin();
                let t = at0.trunc().min(ch.trunc());
                let exps: Vec<Rat> = ch.terms().map(|(e, _)| e).filter(|e| *e < t).collect();
                let exps0: Vec<Rat> = at0.terms().map(|(e, _)| e).filter(|e| *e < t).collect();
                assert_eq!(exps, exps0, "{rep} l={l}");
                for (e, v) in ch.terms() {
                    assert!((at0.coeff(e) - v).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn s11_leading_factor() {
        // coefficient of q^{1/12} for l = 1 is e^{x/2} - e^{-x/2}
        let qc = q_graded_chern(LevelOneRep::S11, 1, 3, 6).unwrap();
        let lead = qc.coeff(rat(1, 12));
        let mut f = 1.0;
        for k in 0..=6u8 {
            if k > 0 {
                f *= f64::from(k);
            }
            let expect = if k % 2 == 1 { 2.0 * 0.5f64.powi(k.into()) / f } else { 0.0 };
            assert!((lead.coeff(&[k]) - c(expect, 0.0)).norm() < 1e-15, "{k}");
        }
    }

    #[test]
    fn fock_levels_are_chern_characters() {
        let l = 2;
        let m = modular_anomaly(LevelOneRep::S00, l).unwrap();
        let fock = q_graded_chern(LevelOneRep::S00, l, 3, 4).unwrap().shift(-m);
        for e2 in [0i64, 1, 2] {
            let weights: Vec<(Vec<f64>, i64)> =
                fock_states(LevelOneRep::S00, l, e2).into_iter().filter(|s| s.e2 == e2).map(|s| (s.weight(), 1)).collect();
            let ch = chern_character(&weights, l, 4).unwrap();
            assert!(fock.coeff(rat(e2, 2)).max_diff(&ch) < 1e-12, "level {e2}/2");
        }
    }

    #[test]
    fn witten_series_normalization_and_parity() {
        for tau in [c(0.0, 1.0), c(0.3, 1.2), c(-0.4, 0.9), c(0.1, 2.0), c(0.5, 1.5)] {
            let w = witten_series(1, tau, 8).unwrap();
            assert!((w.coeff(&[0]) - c(1.0, 0.0)).norm() < 1e-12);
            for k in [1u8, 3, 5, 7] {
                assert!(w.coeff(&[k]).norm() < 1e-14);
            }
            assert!((w.coeff(&[2]) - g2(tau).unwrap()).norm() < 1e-9);
        }
    }

    #[test]
    fn witten_series_completed_modularity() {
        let d = 6;
        for tau in [c(0.1, 1.1), c(-0.3, 0.95)] {
            let f = |t: C64| -> FormalSeries {
                let x = FormalSeries::var(1, d, 0);
                let damp = x.mul(&x).scale(-g2(t).unwrap()).exp();
                damp.mul(&witten_series(1, t, d).unwrap())
            };
            let a = f(tau);
            let s = f(-1.0 / tau);
            for k in 0..=d as u8 {
                let lhs = s.coeff(&[k]);
                let rhs = a.coeff(&[k]) * tau.powi(k.into());
                assert!((lhs - rhs).norm() < 1e-8, "{k}");
            }
        }
    }

    #[test]
    fn a_hat_examples() {
        let a = a_hat_series(1, 6).unwrap();
        assert!((a.coeff(&[0]) - c(1.0, 0.0)).norm() < 1e-15);
        assert!((a.coeff(&[2]) - c(-1.0 / 24.0, 0.0)).norm() < 1e-15);
        assert!((a.coeff(&[4]) - c(7.0 / 5760.0, 0.0)).norm() < 1e-15);
        let two = a_hat_series(2, 6).unwrap();
        let direct = a_hat_series(1, 6).unwrap();
        assert!((two.coeff(&[2, 2]) - direct.coeff(&[2]) * direct.coeff(&[2])).norm() < 1e-15);
    }

    #[test]
    fn localization_identity() {
        let r = localization_identity_check(1, c(0.0, 1.5), 6, 2).unwrap();
        assert!(r.deviation < 1e-8, "{r:?}");
        assert!(r.division_remainder < 1e-12);
        let r = localization_identity_check(2, c(0.0, 1.0), 6, 4).unwrap();
        assert!(r.deviation < 1e-7, "{r:?}");
        let bad = localization_identity_check(2, c(0.0, 1.0), 6, 5).unwrap();
        assert!(bad.deviation > 1e-2, "{bad:?}");
    }

    fn alg4() -> ExtAlgebra {
        ExtAlgebra::new(4).unwrap()
    }

    fn random_curvature(rng: &mut impl Rng, n: usize, k: usize) -> Vec<GrassMat> {
        let mut mk = || DMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)));
        let (c12, c34, c1234) = (mk(), mk(), mk());
        (0..k)
            .map(|i| {
                let t = i as f64 / k as f64;
                let w = (2.0 * std::f64::consts::PI * t).cos();
                GrassMat::from_blades(
                    alg4(),
                    n,
                    vec![(b(&[1, 2]), &c12 * c(w, 0.0)), (b(&[3, 4]), c34.clone()), (b(&[1, 2, 3, 4]), &c1234 * c(1.0 - w, 0.0))],
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn degree_zero_is_holonomy_trace() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        let conn = synth::random_so_loop(4, 64, &mut rng, 0.7);
        let input = BChInput::new(conn.clone(), vec![GrassMat::zero(alg4(), 4); 64], None).unwrap();
        let v = bismut_chern(&input, None).unwrap();
        assert!((v.get(Blade::EMPTY) - parallel_transport(&conn).hol.trace()).norm() < 1e-12);
        assert!(v.parts().all(|(bl, x)| bl == Blade::EMPTY || x.norm() < 1e-14));
    }

    #[test]
    fn constant_loop_gives_trace_of_exponential() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(43);
        let curv = random_curvature(&mut rng, 3, 1)[0].clone();
        let conn = LoopConnection::new(Algebra::Gl, vec![DMatrix::zeros(3, 3); 16]).unwrap();
        let v = bismut_chern(&BChInput::new(conn, vec![curv.clone(); 16], None).unwrap(), None).unwrap();
        // nilpotent series: R^3 = 0 with four generators and even degree >= 2
        let r2 = crate::grassmann::g_mul(&curv, &curv).unwrap();
        let series = GrassMat::identity(alg4(), 3).try_add(&curv).unwrap().try_add(&r2.scale_by(c(0.5, 0.0))).unwrap();
        let expect = g_str(&series, None).unwrap();
        assert!(v.max_diff(&expect) < 1e-10);
    }

    #[test]
    fn central_bfield_factorizes() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(47);
        let k = 64;
        let conn = synth::random_so_loop(4, k, &mut rng, 0.6);
        let curv = random_curvature(&mut rng, 4, k);
        let bf: Vec<GrassScalar> = (0..k)
            .map(|i| {
                let t = i as f64 / k as f64;
                let s = (2.0 * std::f64::consts::PI * t).sin();
                GrassScalar::from_parts(alg4(), vec![(b(&[1, 3]), c(0.3 + s, 0.1)), (b(&[2, 4]), c(-0.2, 0.4 * s))]).unwrap()
            })
            .collect();
        let integral = bf.iter().fold(GrassScalar::zero(alg4()), |a, x| a.add(x)).scale(c(1.0 / k as f64, 0.0));
        let with = BChInput::new(conn, curv, Some(bf)).unwrap();
        let lhs = bismut_chern(&with, None).unwrap();
        let rhs = integral.exp().mul(&bismut_chern(&with.without_bfield(), None).unwrap());
        assert!(lhs.max_diff(&rhs) < 1e-9);
    }

    #[test]
    fn conjugation_invariance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(53);
        let conn = synth::random_so_loop(4, 32, &mut rng, 0.6);
        let input = BChInput::new(conn, random_curvature(&mut rng, 4, 32), None).unwrap();
        let g = expm(&synth::random_skew(4, &mut rng, 1.0));
        let a = bismut_chern(&input, None).unwrap();
        let bb = bismut_chern(&input.conjugated(&g).unwrap(), None).unwrap();
        assert!(a.max_diff(&bb) < 1e-10);
    }

    #[test]
    fn q_graded_levels_and_block_transport() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(59);
        let tau = c(0.1, 0.8);
        let k = 32;
        let levels: Vec<(Rat, BChInput)> = (0..3)
            .map(|n| {
                let conn = synth::random_so_loop(2, k, &mut rng, 0.5);
                (rat(n, 1), BChInput::new(conn, vec![GrassMat::zero(alg4(), 2); k], None).unwrap())
            })
            .collect();
        let single = q_graded_bismut_chern(&levels[..1], rat(1, 8), rat(5, 1), None).unwrap();
        let direct = bismut_chern(&levels[0].1, None).unwrap();
        let s0 = &single.coeffs[&Blade::EMPTY];
        assert_eq!(s0.terms().map(|(e, _)| e).collect::<Vec<_>>(), vec![rat(1, 8)]);
        assert_eq!(s0.coeff(rat(1, 8)), direct.get(Blade::EMPTY));
        // one block-diagonal transport carrying q^n on level n
        let total = q_graded_bismut_chern(&levels, Rat::zero(), rat(5, 1), None).unwrap();
        let p = QPoint::new(tau).unwrap();
        let dim = 6;
        let two_pi_i = 2.0 * std::f64::consts::PI * C64::i();
        let samples: Vec<DMatrix<C64>> = (0..k)
            .map(|s| {
                let mut m = DMatrix::zeros(dim, dim);
                for (n, (_, inp)) in levels.iter().enumerate() {
                    let blk = &inp.conn().samples()[s] + DMatrix::identity(2, 2) * (two_pi_i * tau * n as f64);
                    m.view_mut((2 * n, 2 * n), (2, 2)).copy_from(&blk);
                }
                m
            })
            .collect();
        let big = LoopConnection::new(Algebra::Gl, samples).unwrap();
        let tr = parallel_transport(&big).hol.trace();
        assert!((total.eval(&p).get(Blade::EMPTY) - tr).norm() < 1e-9);
    }

    #[test]
    fn restriction_identity_and_cutoff() {
        let alg = alg4();
        let r = vec![GrassScalar::from_parts(alg, vec![(b(&[1, 2]), c(0.3, 0.1)), (b(&[3, 4]), c(-0.2, 0.0))]).unwrap()];
        let z = CartanPoint::new(vec![c(0.17, 0.05)]);
        let tau = C64::new(0.0, 10f64.ln() / (2.0 * std::f64::consts::PI)); // |q| = 0.1
        for rep in LevelOneRep::ALL {
            let rep_r = ech_restriction_check(rep, &z, tau, &r, 3, 16).unwrap();
            assert!(rep_r.deviation < 1e-8, "{rep}: {rep_r:?}");
            assert!(rep_r.decay_ratio_over_q > 0.2 && rep_r.decay_ratio_over_q < 5.0, "{rep}: {rep_r:?}");
        }
        let zero = vec![GrassScalar::zero(alg)];
        for rep in LevelOneRep::ALL {
            let rep_r = ech_restriction_check(rep, &z, tau, &zero, 3, 16).unwrap();
            let expect = truncated_character(rep, &z, tau, 3).unwrap();
            assert!((rep_r.total_body - expect).norm() < 1e-12, "{rep}");
        }
    }

    #[test]
    fn bch_json_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(61);
        let conn = synth::random_so_loop(2, 16, &mut rng, 0.5);
        let bf = vec![GrassScalar::from_parts(alg4(), vec![(b(&[1, 2]), c(0.1, 0.0))]).unwrap()];
        let input = BChInput::new(conn, random_curvature(&mut rng, 2, 16), Some(bf)).unwrap();
        let j = serde_json::to_string(&input.to_json()).unwrap();
        let back = BChInput::from_json(&serde_json::from_str(&j).unwrap()).unwrap();
        assert_eq!(back, input);
    }
}
