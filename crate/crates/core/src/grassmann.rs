//! Finite exterior algebra with square-matrix coefficients.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expm::{expm, ExpRing};

pub const MAX_GENERATORS: u8 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExtAlgebra {
    g: u8,
}

impl ExtAlgebra {
    pub fn new(g: u8) -> Result<Self> {
        if g > MAX_GENERATORS {
            return Err(Error::Validation(format!("at most {MAX_GENERATORS} generators, got {g}")));
        }
        Ok(Self { g })
    }
    pub fn generators(&self) -> u8 {
        self.g
    }
    /// All blades in basis order.
    pub fn basis(&self) -> Vec<Blade> {
        let mut v: Vec<Blade> = (0..1u32 << self.g).map(|m| Blade(m as u16)).collect();
        v.sort();
        v
    }
}

/// A subset of the generators e_1..e_g, stored as a bit mask (bit k <-> e_{k+1}).
/// Ordered by the subset's sorted tuple, lexicographically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Blade(pub u16);

impl Blade {
    pub const EMPTY: Blade = Blade(0);

    /// From 1-based generator indices.
    pub fn from_indices(idx: &[u8]) -> Result<Self> {
        let mut m = 0u16;
        for &i in idx {
            if i == 0 || i > MAX_GENERATORS {
                return Err(Error::Validation(format!("generator index {i} out of range")));
            }
            let bit = 1u16 << (i - 1);
            if m & bit != 0 {
                return Err(Error::Validation(format!("repeated generator e_{i}")));
            }
            m |= bit;
        }
        Ok(Blade(m))
    }
    pub fn indices(&self) -> Vec<u8> {
        (0..16).filter(|k| self.0 >> k & 1 == 1).map(|k| k as u8 + 1).collect()
    }
    pub fn degree(&self) -> u32 {
        self.0.count_ones()
    }
    pub fn is_even(&self) -> bool {
        self.degree().is_multiple_of(2)
    }
    pub fn fits(&self, alg: &ExtAlgebra) -> bool {
        u32::from(self.0) < (1u32 << alg.g)
    }
}

impl Ord for Blade {
    fn cmp(&self, o: &Self) -> Ordering {
        self.indices().cmp(&o.indices())
    }
}

impl PartialOrd for Blade {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// e_S e_T = sign e_{S u T} for disjoint S, T, else None.
pub fn blade_product(s: Blade, t: Blade) -> Option<(f64, Blade)> {
    if s.0 & t.0 != 0 {
        return None;
    }
    // inversions: pairs (a in S, b in T) with a > b
    let mut inv = 0u32;
    let mut rest = t.0;
    while rest != 0 {
        let b = rest.trailing_zeros();
        let above = if b >= 15 { 0 } else { s.0 & !((1u16 << (b + 1)) - 1) };
        inv += above.count_ones();
        rest &= rest - 1;
    }
    Some((if inv.is_multiple_of(2) { 1.0 } else { -1.0 }, Blade(s.0 | t.0)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrassMat {
    alg: ExtAlgebra,
    dim: usize,
    coeffs: BTreeMap<Blade, DMatrix<C64>>,
}

impl GrassMat {
    pub fn zero(alg: ExtAlgebra, dim: usize) -> Self {
        Self { alg, dim, coeffs: BTreeMap::new() }
    }

    pub fn identity(alg: ExtAlgebra, dim: usize) -> Self {
        Self::from_body(alg, DMatrix::identity(dim, dim))
    }

    pub fn from_body(alg: ExtAlgebra, m: DMatrix<C64>) -> Self {
        let dim = m.nrows();
        let mut g = Self::zero(alg, dim);
        g.set(Blade::EMPTY, m).expect("square body");
        g
    }

    pub fn from_blades(alg: ExtAlgebra, dim: usize, parts: Vec<(Blade, DMatrix<C64>)>) -> Result<Self> {
        let mut g = Self::zero(alg, dim);
        for (b, m) in parts {
            let cur = g.coeffs.get(&b).cloned().unwrap_or_else(|| DMatrix::zeros(dim, dim));
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::DimMismatch(format!("coefficient {}x{} in dimension {dim}", m.nrows(), m.ncols())));
            }
            g.set(b, cur + m)?;
        }
        Ok(g)
    }

    pub fn set(&mut self, b: Blade, m: DMatrix<C64>) -> Result<()> {
        if !b.fits(&self.alg) {
            return Err(Error::AlgebraMismatch);
        }
        if m.nrows() != self.dim || m.ncols() != self.dim {
            return Err(Error::DimMismatch(format!("coefficient {}x{} in dimension {}", m.nrows(), m.ncols(), self.dim)));
        }
        if m.iter().all(|c| *c == C64::new(0.0, 0.0)) {
            self.coeffs.remove(&b);
        } else {
            self.coeffs.insert(b, m);
        }
        Ok(())
    }

    pub fn algebra(&self) -> ExtAlgebra {
        self.alg
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn coeff(&self, b: Blade) -> DMatrix<C64> {
        self.coeffs.get(&b).cloned().unwrap_or_else(|| DMatrix::zeros(self.dim, self.dim))
    }
    pub fn parts(&self) -> impl Iterator<Item = (&Blade, &DMatrix<C64>)> {
        self.coeffs.iter()
    }
    pub fn body(&self) -> DMatrix<C64> {
        self.coeff(Blade::EMPTY)
    }

    /// Some(true) if all blades are even, Some(false) if all odd, None if mixed or zero.
    pub fn parity(&self) -> Option<bool> {
        let mut it = self.coeffs.keys().map(|b| b.is_even());
        let first = it.next()?;
        if it.all(|p| p == first) {
            Some(first)
        } else {
            None
        }
    }

    fn check(&self, o: &Self) -> Result<()> {
        if self.alg != o.alg {
            return Err(Error::AlgebraMismatch);
        }
        if self.dim != o.dim {
            return Err(Error::DimMismatch(format!("{} vs {}", self.dim, o.dim)));
        }
        Ok(())
    }

    pub fn try_add(&self, o: &Self) -> Result<Self> {
        self.check(o)?;
        Ok(ExpRing::add(self, o))
    }

    pub fn scale_by(&self, c: C64) -> Self {
        ExpRing::scale(self, c)
    }

    /// Largest coefficient entry magnitude difference.
    pub fn max_diff(&self, o: &Self) -> f64 {
        let mut keys: Vec<Blade> = self.coeffs.keys().chain(o.coeffs.keys()).copied().collect();
        keys.sort();
        keys.dedup();
        keys.iter()
            .map(|b| (self.coeff(*b) - o.coeff(*b)).iter().map(|c| c.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }

    /// Conjugation M -> g M g^{-1} of every coefficient.
    pub fn conjugate(&self, g: &DMatrix<C64>, ginv: &DMatrix<C64>) -> Self {
        let mut out = Self::zero(self.alg, self.dim);
        for (b, m) in &self.coeffs {
            out.coeffs.insert(*b, g * m * ginv);
        }
        out
    }
}

impl ExpRing for GrassMat {
    fn one_like(&self) -> Self {
        Self::identity(self.alg, self.dim)
    }
    fn zero_like(&self) -> Self {
        Self::zero(self.alg, self.dim)
    }
    fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (b, m) in &o.coeffs {
            let v = match out.coeffs.get(b) {
                Some(cur) => cur + m,
                None => m.clone(),
            };
            out.coeffs.insert(*b, v);
        }
        out
    }
    fn mul(&self, o: &Self) -> Self {
        let mut out: BTreeMap<Blade, DMatrix<C64>> = BTreeMap::new();
        for (s, a) in &self.coeffs {
            for (t, b) in &o.coeffs {
                if let Some((sign, u)) = blade_product(*s, *t) {
                    let p = a * b * C64::new(sign, 0.0);
                    match out.get_mut(&u) {
                        Some(cur) => *cur += p,
                        None => {
                            out.insert(u, p);
                        }
                    }
                }
            }
        }
        Self { alg: self.alg, dim: self.dim, coeffs: out }
    }
    fn scale(&self, c: C64) -> Self {
        let mut out = self.clone();
        for m in out.coeffs.values_mut() {
            *m *= c;
        }
        out
    }
    fn norm(&self) -> f64 {
        self.coeffs.values().map(|m| m.norm()).sum()
    }
}

pub fn g_mul(a: &GrassMat, b: &GrassMat) -> Result<GrassMat> {
    a.check(b)?;
    Ok(ExpRing::mul(a, b))
}

/// exp in the algebra: scaling and squaring over body and nilpotent part together.
pub fn g_exp(a: &GrassMat) -> GrassMat {
    expm(a)
}

/// Map from blade to complex number.
#[derive(Debug, Clone, PartialEq)]
pub struct GrassScalar {
    alg: ExtAlgebra,
    coeffs: BTreeMap<Blade, C64>,
}

impl GrassScalar {
    pub fn zero(alg: ExtAlgebra) -> Self {
        Self { alg, coeffs: BTreeMap::new() }
    }
    pub fn constant(alg: ExtAlgebra, c: C64) -> Self {
        let mut s = Self::zero(alg);
        s.insert(Blade::EMPTY, c);
        s
    }
    pub fn from_parts(alg: ExtAlgebra, parts: Vec<(Blade, C64)>) -> Result<Self> {
        let mut s = Self::zero(alg);
        for (b, c) in parts {
            if !b.fits(&alg) {
                return Err(Error::AlgebraMismatch);
            }
            let cur = s.get(b);
            s.insert(b, cur + c);
        }
        Ok(s)
    }
    fn insert(&mut self, b: Blade, c: C64) {
        if c == C64::new(0.0, 0.0) {
            self.coeffs.remove(&b);
        } else {
            self.coeffs.insert(b, c);
        }
    }
    pub fn algebra(&self) -> ExtAlgebra {
        self.alg
    }
    pub fn get(&self, b: Blade) -> C64 {
        self.coeffs.get(&b).copied().unwrap_or(C64::new(0.0, 0.0))
    }
    pub fn parts(&self) -> impl Iterator<Item = (Blade, C64)> + '_ {
        self.coeffs.iter().map(|(b, c)| (*b, *c))
    }
    pub fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (b, c) in o.parts() {
            let v = out.get(b) + c;
            out.insert(b, v);
        }
        out
    }
    pub fn scale(&self, c: C64) -> Self {
        let mut out = Self::zero(self.alg);
        for (b, v) in self.parts() {
            out.insert(b, v * c);
        }
        out
    }
    pub fn mul(&self, o: &Self) -> Self {
        let mut out = Self::zero(self.alg);
        for (s, a) in self.parts() {
            for (t, b) in o.parts() {
                if let Some((sign, u)) = blade_product(s, t) {
                    let v = out.get(u) + a * b * sign;
                    out.insert(u, v);
                }
            }
        }
        out
    }
    /// exp(c0 + N) = e^{c0} sum_k N^k / k!, finite because N is nilpotent.
    pub fn exp(&self) -> Self {
        let c0 = self.get(Blade::EMPTY);
        let mut n = self.clone();
        n.insert(Blade::EMPTY, C64::new(0.0, 0.0));
        let mut term = Self::constant(self.alg, C64::new(1.0, 0.0));
        let mut sum = term.clone();
        for k in 1..=self.alg.g as usize {
            term = term.mul(&n).scale(C64::new(1.0 / k as f64, 0.0));
            if term.coeffs.is_empty() {
                break;
            }
            sum = sum.add(&term);
        }
        sum.scale(c0.exp())
    }
    /// Scalar times identity matrix.
    pub fn to_grassmat(&self, dim: usize) -> GrassMat {
        let mut g = GrassMat::zero(self.alg, dim);
        for (b, c) in self.parts() {
            g.coeffs.insert(b, DMatrix::identity(dim, dim) * c);
        }
        g
    }
    pub fn max_diff(&self, o: &Self) -> f64 {
        let diff = self.add(&o.scale(C64::new(-1.0, 0.0)));
        diff.parts().map(|(_, c)| c.norm()).fold(0.0, f64::max)
    }
}

/// Coefficientwise trace of grading * coeff; the plain trace when no grading is given.
pub fn g_str(a: &GrassMat, grading: Option<&[f64]>) -> Result<GrassScalar> {
    if let Some(gr) = grading {
        if gr.len() != a.dim {
            return Err(Error::DimMismatch(format!("grading of length {} for dimension {}", gr.len(), a.dim)));
        }
        if gr.iter().any(|s| (s * s - 1.0).abs() > 0.0) {
            return Err(Error::Validation("grading entries must be +1 or -1".into()));
        }
    }
    let mut out = GrassScalar::zero(a.alg);
    for (b, m) in &a.coeffs {
        let tr: C64 = (0..a.dim).map(|i| m[(i, i)] * grading.map_or(1.0, |g| g[i])).sum();
        out.insert(*b, tr);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn alg(g: u8) -> ExtAlgebra {
        ExtAlgebra::new(g).unwrap()
    }

    fn b(idx: &[u8]) -> Blade {
        Blade::from_indices(idx).unwrap()
    }

    fn scalar(a: ExtAlgebra, parts: &[(&[u8], f64)]) -> GrassMat {
        GrassMat::from_blades(
            a,
            1,
            parts.iter().map(|(i, c)| (b(i), DMatrix::from_element(1, 1, C64::new(*c, 0.0)))).collect(),
        )
        .unwrap()
    }

    fn random_mat(rng: &mut impl Rng, d: usize) -> DMatrix<C64> {
        DMatrix::from_fn(d, d, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    fn random_elem(rng: &mut impl Rng, a: ExtAlgebra, d: usize, degree: Option<u32>) -> GrassMat {
        let mut parts = Vec::new();
        for bl in a.basis() {
            if degree.is_some_and(|k| bl.degree() != k) {
                continue;
            }
            if rng.gen_bool(0.6) {
                parts.push((bl, random_mat(rng, d)));
            }
        }
        GrassMat::from_blades(a, d, parts).unwrap()
    }

    #[test]
    fn basis_order_is_lexicographic_on_tuples() {
        let names: Vec<Vec<u8>> = alg(3).basis().iter().map(|x| x.indices()).collect();
        assert_eq!(
            names,
            vec![vec![], vec![1], vec![1, 2], vec![1, 2, 3], vec![1, 3], vec![2], vec![2, 3], vec![3]]
        );
    }

    #[test]
    fn nilpotence_and_anticommutation() {
        let a = alg(4);
        let e1 = scalar(a, &[(&[1], 1.0)]);
        let e2 = scalar(a, &[(&[2], 1.0)]);
        assert!(g_mul(&e1, &e1).unwrap().parts().next().is_none());
        let p = g_mul(&e1, &e2).unwrap();
        let q = g_mul(&e2, &e1).unwrap();
        assert_eq!(p.coeff(b(&[1, 2]))[(0, 0)], C64::new(1.0, 0.0));
        assert_eq!(q.coeff(b(&[1, 2]))[(0, 0)], C64::new(-1.0, 0.0));
    }

    #[test]
    fn even_blocks_multiply_with_plus_sign() {
        let a = alg(4);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let (m, n) = (random_mat(&mut rng, 3), random_mat(&mut rng, 3));
        let x = GrassMat::from_blades(a, 3, vec![(b(&[1, 2]), m.clone())]).unwrap();
        let y = GrassMat::from_blades(a, 3, vec![(b(&[3, 4]), n.clone())]).unwrap();
        let p = g_mul(&x, &y).unwrap();
        assert!((p.coeff(b(&[1, 2, 3, 4])) - m * n).norm() < 1e-15);
    }

    fn brute_sign(s: &[u8], t: &[u8]) -> f64 {
        // bubble sort the concatenation, counting swaps
        let mut v: Vec<u8> = s.iter().chain(t).copied().collect();
        let mut swaps = 0;
        for i in 0..v.len() {
            for j in 0..v.len() - 1 - i {
                if v[j] > v[j + 1] {
                    v.swap(j, j + 1);
                    swaps += 1;
                }
            }
        }
        if swaps % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    #[test]
    fn sign_rule_matches_brute_force() {
        for g in 1..=6u8 {
            for s in alg(g).basis() {
                for t in alg(g).basis() {
                    match blade_product(s, t) {
                        None => assert_ne!(s.0 & t.0, 0),
                        Some((sign, u)) => {
                            assert_eq!(sign, brute_sign(&s.indices(), &t.indices()));
                            assert_eq!(u.0, s.0 | t.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn exp_examples() {
        let a = alg(2);
        let z = GrassMat::zero(a, 2);
        assert_eq!(g_exp(&z).max_diff(&GrassMat::identity(a, 2)), 0.0);
        let x = scalar(a, &[(&[1, 2], 0.7)]);
        let e = g_exp(&x);
        assert!(e.max_diff(&scalar(a, &[(&[], 1.0), (&[1, 2], 0.7)])) < 1e-15);
    }

    #[test]
    fn supertrace_examples() {
        let a = alg(2);
        let id = GrassMat::identity(a, 4);
        assert_eq!(g_str(&id, None).unwrap().get(Blade::EMPTY), C64::new(4.0, 0.0));
        let bal = [1.0, -1.0, 1.0, -1.0];
        assert_eq!(g_str(&id, Some(&bal)).unwrap().get(Blade::EMPTY), C64::new(0.0, 0.0));
        assert!(g_str(&id, Some(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn supertrace_of_exponential_series() {
        let a = alg(2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let r = random_mat(&mut rng, 4);
        let x = GrassMat::from_blades(a, 4, vec![(b(&[1, 2]), r.clone())]).unwrap();
        let gr = [1.0, 1.0, -1.0, -1.0];
        let s = g_str(&g_exp(&x), Some(&gr)).unwrap();
        // (e1e2)^2 = 0: exp = 1 + R e1e2
        let str_r: C64 = (0..4).map(|i| r[(i, i)] * gr[i]).sum();
        assert!((s.get(Blade::EMPTY) - 0.0).norm() < 1e-15);
        assert!((s.get(b(&[1, 2])) - str_r).norm() < 1e-14);
    }

    #[test]
    fn body_exponential_with_nilpotent_part() {
        // exp(A0 + N) for commuting A0 = a I, N nilpotent: e^a (1 + N + N^2/2)
        let a = alg(4);
        let n = scalar(a, &[(&[1, 2], 0.3), (&[3, 4], -1.1)]);
        let x = ExpRing::add(&scalar(a, &[(&[], 0.4)]), &n);
        let e = g_exp(&x);
        let n2 = g_mul(&n, &n).unwrap();
        let expect = ExpRing::add(&ExpRing::add(&GrassMat::identity(a, 1), &n), &n2.scale_by(C64::new(0.5, 0.0)))
            .scale_by(C64::new(0.4f64.exp(), 0.0));
        assert!(e.max_diff(&expect) < 1e-14);
    }

    #[test]
    fn mismatches_are_errors() {
        let x = GrassMat::identity(alg(2), 2);
        let y = GrassMat::identity(alg(3), 2);
        let z = GrassMat::identity(alg(2), 3);
        assert_eq!(g_mul(&x, &y), Err(Error::AlgebraMismatch));
        assert!(matches!(g_mul(&x, &z), Err(Error::DimMismatch(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn associativity(seed in any::<u64>(), g in 1u8..5, d in 1usize..4) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a = alg(g);
            let (x, y, z) = (random_elem(&mut rng, a, d, None), random_elem(&mut rng, a, d, None), random_elem(&mut rng, a, d, None));
            let l = g_mul(&g_mul(&x, &y).unwrap(), &z).unwrap();
            let r = g_mul(&x, &g_mul(&y, &z).unwrap()).unwrap();
            prop_assert!(l.max_diff(&r) < 1e-13 * (1.0 + ExpRing::norm(&l)));
        }

        #[test]
        fn koszul_trace_property(seed in any::<u64>(), p in 0u32..3, q in 0u32..3) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a = alg(5);
            let x = random_elem(&mut rng, a, 3, Some(p));
            let y = random_elem(&mut rng, a, 3, Some(q));
            let sxy = g_str(&g_mul(&x, &y).unwrap(), None).unwrap();
            let syx = g_str(&g_mul(&y, &x).unwrap(), None).unwrap();
            let sign = if p * q % 2 == 0 { 1.0 } else { -1.0 };
            prop_assert!(sxy.max_diff(&syx.scale(C64::new(sign, 0.0))) < 1e-12);
        }

        #[test]
        fn commuting_central_exponentials(seed in any::<u64>()) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a = alg(4);
            let mut rand_central = || {
                let parts: Vec<(Blade, C64)> = a.basis().into_iter().filter(|bl| bl.is_even())
                    .map(|bl| (bl, C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))).collect();
                GrassScalar::from_parts(a, parts).unwrap().to_grassmat(2)
            };
            let (x, y) = (rand_central(), rand_central());
            let lhs = g_exp(&ExpRing::add(&x, &y));
            let rhs = g_mul(&g_exp(&x), &g_exp(&y)).unwrap();
            prop_assert!(lhs.max_diff(&rhs) < 1e-12);
        }
    }
}
