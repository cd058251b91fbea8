//! Truncated Laurent series in the nome q with exact rational exponents.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64 as C64;
use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Rat = Ratio<i64>;

pub fn rat(n: i64, d: i64) -> Rat {
    Ratio::new(n, d)
}

pub fn rat_f64(r: Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// A point of the upper half plane together with its nome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QPoint {
    tau: C64,
    q: C64,
}

impl QPoint {
    pub fn new(tau: C64) -> Result<Self> {
        if tau.im.is_nan() || tau.im <= 0.0 || !tau.re.is_finite() {
            return Err(Error::NonConvergent(format!("Im tau must be positive, got {tau}")));
        }
        Ok(Self { tau, q: nome(tau) })
    }
    pub fn tau(&self) -> C64 {
        self.tau
    }
    pub fn q(&self) -> C64 {
        self.q
    }
    /// q^r, lifted through tau: exp(2 pi i r tau).
    pub fn qpow(&self, r: Rat) -> C64 {
        qpow(self.tau, rat_f64(r))
    }
}

pub fn nome(tau: C64) -> C64 {
    qpow(tau, 1.0)
}

/// exp(2 pi i r tau). Fractional powers of q are always taken through tau.
pub fn qpow(tau: C64, r: f64) -> C64 {
    (C64::new(0.0, 2.0 * PI * r) * tau).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct QSeries {
    terms: BTreeMap<Rat, C64>,
    trunc: Rat,
}

impl QSeries {
    /// The zero series known up to `trunc`.
    pub fn zero(trunc: Rat) -> Self {
        Self { terms: BTreeMap::new(), trunc }
    }

    pub fn one(trunc: Rat) -> Self {
        Self::monomial(Rat::zero(), C64::new(1.0, 0.0), trunc)
    }

    pub fn monomial(exp: Rat, c: C64, trunc: Rat) -> Self {
        Self::from_terms([(exp, c)], trunc)
    }

    /// Builds a canonical series: terms at or beyond `trunc` and exact zeros are dropped,
    /// repeated exponents are summed.
    pub fn from_terms<I: IntoIterator<Item = (Rat, C64)>>(terms: I, trunc: Rat) -> Self {
        let mut map: BTreeMap<Rat, C64> = BTreeMap::new();
        for (e, c) in terms {
            if e < trunc {
                *map.entry(e).or_insert(C64::new(0.0, 0.0)) += c;
            }
        }
        map.retain(|_, c| *c != C64::new(0.0, 0.0));
        Self { terms: map, trunc }
    }

    pub fn trunc(&self) -> Rat {
        self.trunc
    }

    pub fn terms(&self) -> impl Iterator<Item = (Rat, C64)> + '_ {
        self.terms.iter().map(|(e, c)| (*e, *c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, e: Rat) -> C64 {
        self.terms.get(&e).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    /// Smallest exponent present; for the zero series every term below trunc is
    /// known to vanish, so trunc plays that role.
    pub fn valuation(&self) -> Rat {
        self.terms.keys().next().copied().unwrap_or(self.trunc)
    }

    pub fn scale(&self, c: C64) -> Self {
        Self::from_terms(self.terms().map(|(e, v)| (e, v * c)), self.trunc)
    }

    /// Multiplication by q^r.
    pub fn shift(&self, r: Rat) -> Self {
        Self::from_terms(self.terms().map(|(e, v)| (e + r, v)), self.trunc + r)
    }

    pub fn with_trunc(&self, t: Rat) -> Self {
        Self::from_terms(self.terms(), t.min(self.trunc))
    }

    pub fn eval(&self, p: &QPoint) -> C64 {
        self.terms().map(|(e, c)| c * p.qpow(e)).sum()
    }

    pub fn to_json(&self) -> QSeriesJson {
        QSeriesJson {
            terms: self
                .terms()
                .map(|(e, c)| QTermJson { num: *e.numer(), den: *e.denom(), re: c.re, im: c.im })
                .collect(),
            trunc_num: *self.trunc.numer(),
            trunc_den: *self.trunc.denom(),
        }
    }

    pub fn from_json(j: &QSeriesJson) -> Result<Self> {
        if j.trunc_den == 0 || j.terms.iter().any(|t| t.den == 0) {
            return Err(Error::Validation("zero denominator in series".into()));
        }
        let trunc = rat(j.trunc_num, j.trunc_den);
        if j.terms.iter().any(|t| rat(t.num, t.den) >= trunc) {
            return Err(Error::Validation("exponent at or beyond truncation".into()));
        }
        Ok(Self::from_terms(
            j.terms.iter().map(|t| (rat(t.num, t.den), C64::new(t.re, t.im))),
            trunc,
        ))
    }
}

pub fn qs_add(a: &QSeries, b: &QSeries) -> QSeries {
    let trunc = a.trunc.min(b.trunc);
    QSeries::from_terms(a.terms().chain(b.terms()), trunc)
}

pub fn qs_mul(a: &QSeries, b: &QSeries) -> QSeries {
    let trunc = (a.trunc + b.valuation()).min(b.trunc + a.valuation());
    let mut out: BTreeMap<Rat, C64> = BTreeMap::new();
    for (ea, ca) in a.terms() {
        for (eb, cb) in b.terms() {
            let e = ea + eb;
            if e < trunc {
                *out.entry(e).or_insert(C64::new(0.0, 0.0)) += ca * cb;
            }
        }
    }
    QSeries::from_terms(out, trunc)
}

pub fn qs_eval(s: &QSeries, p: &QPoint) -> C64 {
    s.eval(p)
}

impl Add for &QSeries {
    type Output = QSeries;
    fn add(self, o: &QSeries) -> QSeries {
        qs_add(self, o)
    }
}

impl Sub for &QSeries {
    type Output = QSeries;
    fn sub(self, o: &QSeries) -> QSeries {
        qs_add(self, &-o)
    }
}

impl Neg for &QSeries {
    type Output = QSeries;
    fn neg(self) -> QSeries {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl Mul for &QSeries {
    type Output = QSeries;
    fn mul(self, o: &QSeries) -> QSeries {
        qs_mul(self, o)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTermJson {
    pub num: i64,
    pub den: i64,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QSeriesJson {
    pub terms: Vec<QTermJson>,
    pub trunc_num: i64,
    pub trunc_den: i64,
}

/// q^{1/24} prod_{n>=1} (1 - q^n), known below exponent t + 1/24.
pub fn eta_qseries(t: i64) -> QSeries {
    let trunc = rat(t, 1);
    let mut acc = QSeries::one(trunc);
    for n in 1..t.max(1) {
        let f = QSeries::from_terms(
            [(Rat::zero(), C64::new(1.0, 0.0)), (rat(n, 1), C64::new(-1.0, 0.0))],
            trunc,
        );
        acc = &acc * &f;
    }
    acc.shift(rat(1, 24))
}
