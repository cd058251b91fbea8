//! Root data of D_l = spin(2l), the four level-one virtual representations, their theta-product
//! characters and a free-fermion Fock space oracle.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qseries::{rat, QSeries, Rat};
use crate::special::{eta, theta};

#[derive(Debug, Clone, PartialEq)]
pub struct DRootData {
    pub rank: usize,
    pub level: i64,
}

impl DRootData {
    pub fn new(rank: usize) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidRank(rank));
        }
        Ok(Self { rank, level: 1 })
    }

    pub fn dual_coxeter(&self) -> i64 {
        2 * self.rank as i64 - 2
    }

    pub fn dim(&self) -> i64 {
        let l = self.rank as i64;
        l * (2 * l - 1)
    }

    pub fn rho(&self) -> Vec<Rat> {
        (0..self.rank).map(|i| rat((self.rank - 1 - i) as i64, 1)).collect()
    }

    /// Roots +-e_i +- e_j, i < j.
    pub fn roots(&self) -> Vec<Vec<i64>> {
        let l = self.rank;
        let mut out = Vec::new();
        for i in 0..l {
            for j in i + 1..l {
                for (si, sj) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                    let mut r = vec![0; l];
                    r[i] = si;
                    r[j] = sj;
                    out.push(r);
                }
            }
        }
        out
    }

    pub fn vector_weights(&self) -> Vec<Vec<Rat>> {
        let mut out = Vec::new();
        for i in 0..self.rank {
            for s in [1, -1] {
                let mut w = vec![Rat::zero(); self.rank];
                w[i] = rat(s, 1);
                out.push(w);
            }
        }
        out
    }

    /// Half-spin weights (+-1/2, ..., +-1/2); `even` selects an even number of minus signs.
    pub fn spinor_weights(&self, even: bool) -> Vec<Vec<Rat>> {
        let l = self.rank;
        (0..1u32 << l)
            .filter(|m| (m.count_ones() % 2 == 0) == even)
            .map(|m| (0..l).map(|i| if m >> i & 1 == 1 { rat(-1, 2) } else { rat(1, 2) }).collect())
            .collect()
    }

    pub fn central_charge(&self) -> Rat {
        rat(self.level * self.dim(), self.level + self.dual_coxeter())
    }

    /// <Lambda + 2 rho, Lambda> / (2 (k + h)).
    pub fn conformal_weight(&self, lambda: &[Rat]) -> Result<Rat> {
        if lambda.len() != self.rank {
            return Err(Error::DimMismatch(format!("weight of length {} for rank {}", lambda.len(), self.rank)));
        }
        let rho = self.rho();
        let ip: Rat = lambda.iter().zip(&rho).map(|(a, r)| (*a + *r * 2) * *a).sum();
        Ok(ip / rat(2 * (self.level + self.dual_coxeter()), 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LevelOneRep {
    S11,
    S10,
    S01,
    S00,
}

impl LevelOneRep {
    pub const ALL: [LevelOneRep; 4] = [Self::S11, Self::S10, Self::S01, Self::S00];

    pub fn ij(&self) -> (u8, u8) {
        match self {
            Self::S11 => (1, 1),
            Self::S10 => (1, 0),
            Self::S01 => (0, 1),
            Self::S00 => (0, 0),
        }
    }

    pub fn from_ij(i: u8, j: u8) -> Self {
        match (i & 1, j & 1) {
            (1, 1) => Self::S11,
            (1, 0) => Self::S10,
            (0, 1) => Self::S01,
            _ => Self::S00,
        }
    }

    pub fn is_ramond(&self) -> bool {
        self.ij().0 == 1
    }
}

impl fmt::Display for LevelOneRep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for LevelOneRep {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "S11" | "11" => Ok(Self::S11),
            "S10" | "10" => Ok(Self::S10),
            "S01" | "01" => Ok(Self::S01),
            "S00" | "00" => Ok(Self::S00),
            other => Err(Error::Parse(format!("unknown representation tag {other:?}"))),
        }
    }
}

/// A point of the complexified Cartan algebra in orthonormal e_i coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartanPoint(pub Vec<C64>);

impl CartanPoint {
    pub fn new(z: Vec<C64>) -> Self {
        Self(z)
    }
    pub fn zeros(l: usize) -> Self {
        Self(vec![C64::new(0.0, 0.0); l])
    }
    pub fn rank(&self) -> usize {
        self.0.len()
    }
    pub fn coords(&self) -> &[C64] {
        &self.0
    }
    /// mu(z) = sum mu_i z_i.
    pub fn pair(&self, mu: &[f64]) -> C64 {
        self.0.iter().zip(mu).map(|(z, m)| z * *m).sum()
    }
}

/// prod_j theta_ij(z_j) / eta.
pub fn char_level_one(rep: LevelOneRep, z: &CartanPoint, tau: C64) -> Result<C64> {
    let (i, j) = rep.ij();
    let e = eta(tau)?;
    let mut acc = C64::new(1.0, 0.0);
    for zj in z.coords() {
        acc *= theta(i, j, *zj, tau)? / e;
    }
    Ok(acc)
}

/// m = h - c/24: vacuum weight for the Neveu-Schwarz tags, half-spin weight for the Ramond tags.
pub fn modular_anomaly(rep: LevelOneRep, l: usize) -> Result<Rat> {
    let d = DRootData::new(l)?;
    let lambda = if rep.is_ramond() {
        vec![rat(1, 2); l]
    } else {
        vec![Rat::zero(); l]
    };
    Ok(d.conformal_weight(&lambda)? - d.central_charge() / 24)
}

/// q-expansion of the character at a fixed Cartan point, from the product forms of
/// theta_ij / eta; the (1 - q^n) factors cancel against eta.
pub fn char_qexpansion(rep: LevelOneRep, z: &CartanPoint, t: i64) -> Result<QSeries> {
    if t <= 0 {
        return Err(Error::TruncationTooSmall);
    }
    let (i, j) = rep.ij();
    let trunc = rat(t, 1);
    let one = C64::new(1.0, 0.0);
    let s = if j == 1 { -1.0 } else { 1.0 };
    let mut total = QSeries::one(rat(1 << 40, 1));
    for zj in z.coords() {
        let xi = 2.0 * PI * C64::new(0.0, 1.0) * zj;
        let (ep, em) = (xi.exp(), (-xi).exp());
        let mut f = if i == 1 {
            let c = (0.5 * xi).exp() + s * (-0.5 * xi).exp();
            QSeries::monomial(Rat::zero(), c, trunc)
        } else {
            QSeries::one(trunc)
        };
        let offset = if i == 1 { Rat::zero() } else { rat(1, 2) };
        let mut n = 1i64;
        while rat(n, 1) - offset < trunc {
            let e = rat(n, 1) - offset;
            let fac = QSeries::from_terms(
                [(Rat::zero(), one), (e, s * (ep + em)), (e * 2, ep * em)],
                trunc,
            );
            f = &f * &fac;
            n += 1;
        }
        let pre = if i == 1 { rat(1, 12) } else { rat(-1, 24) };
        total = &total * &f.shift(pre);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[allow(non_camel_case_types)]
pub enum FockSector {
    NS_even,
    NS_odd,
    R_plus,
    R_minus,
}

impl FromStr for FockSector {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "NS_even" => Ok(Self::NS_even),
            "NS_odd" => Ok(Self::NS_odd),
            "R_plus" => Ok(Self::R_plus),
            "R_minus" => Ok(Self::R_minus),
            other => Err(Error::Parse(format!("unknown Fock sector {other:?}"))),
        }
    }
}

fn add_checked(a: u64, b: u64) -> u64 {
    a.checked_add(b).expect("Fock dimension overflowed u64")
}

/// Energy-graded dimensions of the Fock space of 2l real fermions, by integer dynamic
/// programming. Exponents are measured from the ground state; NS levels are half-integers,
/// R levels integers. Parity (NS) and chirality (R) are tracked with one bit.
pub fn fock_energy_dims(sector: FockSector, l: usize, t: i64) -> Vec<(Rat, u64)> {
    if t <= 0 || l == 0 {
        return Vec::new();
    }
    let ns = matches!(sector, FockSector::NS_even | FockSector::NS_odd);
    let len = (2 * t) as usize; // half-units below 2t
    // table[parity][e2]
    let mut table = vec![vec![0u64; len]; 2];
    if ns {
        table[0][0] = 1;
    } else {
        let half = 1u64 << (l - 1);
        table[0][0] = half;
        table[1][0] = half;
    }
    let mut e2 = if ns { 1 } else { 2 };
    while e2 < len {
        for _ in 0..2 * l {
            let mut next = table.clone();
            for p in 0..2 {
                for k in e2..len {
                    next[p][k] = add_checked(next[p][k], table[1 - p][k - e2]);
                }
            }
            table = next;
        }
        e2 += 2;
    }
    let pick = match sector {
        FockSector::NS_even | FockSector::R_plus => 0,
        _ => 1,
    };
    let step = if ns { 1 } else { 2 };
    (0..len)
        .step_by(step)
        .map(|k| (rat(k as i64, 2), table[pick][k]))
        .collect()
}

/// One basis state of the energy-truncated Fock model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockState {
    /// twice the energy above the ground state
    pub e2: i64,
    /// twice the Cartan weight
    pub weight2: Vec<i64>,
    /// number of excited modes
    pub excitations: u32,
    /// chirality of the Ramond ground state (+1 in the NS sector)
    pub ground_sign: i8,
}

impl FockState {
    pub fn energy(&self) -> Rat {
        rat(self.e2, 2)
    }
    pub fn weight(&self) -> Vec<f64> {
        self.weight2.iter().map(|w| *w as f64 / 2.0).collect()
    }
    /// Sign with which the state enters the virtual representation `rep`.
    pub fn sign(&self, rep: LevelOneRep) -> f64 {
        let odd = self.excitations % 2 == 1;
        match rep {
            LevelOneRep::S00 | LevelOneRep::S10 => 1.0,
            LevelOneRep::S01 => {
                if odd {
                    -1.0
                } else {
                    1.0
                }
            }
            LevelOneRep::S11 => {
                let s = f64::from(self.ground_sign);
                if odd {
                    -s
                } else {
                    s
                }
            }
        }
    }
}

/// Explicit states of the sector underlying `rep` with energy at most max_e2 / 2, each
/// complex fermion pair j contributing modes of weight +e_j and -e_j.
pub fn fock_states(rep: LevelOneRep, l: usize, max_e2: i64) -> Vec<FockState> {
    let ramond = rep.is_ramond();
    let mut modes: Vec<(i64, usize, i64)> = Vec::new();
    let mut e2 = if ramond { 2 } else { 1 };
    while e2 <= max_e2 {
        for j in 0..l {
            modes.push((e2, j, 2));
            modes.push((e2, j, -2));
        }
        e2 += 2;
    }
    let grounds: Vec<(Vec<i64>, i8)> = if ramond {
        (0..1u32 << l)
            .map(|m| {
                let w: Vec<i64> = (0..l).map(|i| if m >> i & 1 == 1 { -1 } else { 1 }).collect();
                let sign = if m.count_ones() % 2 == 0 { 1 } else { -1 };
                (w, sign)
            })
            .collect()
    } else {
        vec![(vec![0; l], 1)]
    };
    let mut out = Vec::new();
    for (w0, s0) in grounds {
        let mut stack = vec![(0usize, 0i64, w0.clone(), 0u32)];
        while let Some((start, e, w, exc)) = stack.pop() {
            out.push(FockState { e2: e, weight2: w.clone(), excitations: exc, ground_sign: s0 });
            for (k, &(me, j, dw)) in modes.iter().enumerate().skip(start) {
                if e + me > max_e2 {
                    break;
                }
                let mut w2 = w.clone();
                w2[j] += dw;
                stack.push((k + 1, e + me, w2, exc + 1));
            }
        }
    }
    out.sort_by(|a, b| a.e2.cmp(&b.e2).then(a.weight2.cmp(&b.weight2)));
    out
}

/// Signed permutation acting on Cartan coordinates: (w z)_i = sign_i z_{perm_i}.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedPerm {
    pub perm: Vec<usize>,
    pub flips: Vec<bool>,
}

impl SignedPerm {
    pub fn identity(l: usize) -> Self {
        Self { perm: (0..l).collect(), flips: vec![false; l] }
    }

    pub fn validate(&self, l: usize) -> Result<()> {
        let mut seen = vec![false; l];
        if self.perm.len() != l || self.flips.len() != l {
            return Err(Error::DimMismatch("signed permutation has wrong length".into()));
        }
        for &p in &self.perm {
            if p >= l || seen[p] {
                return Err(Error::Validation("not a permutation".into()));
            }
            seen[p] = true;
        }
        Ok(())
    }

    pub fn flip_count(&self) -> usize {
        self.flips.iter().filter(|f| **f).count()
    }

    pub fn act(&self, z: &CartanPoint) -> CartanPoint {
        CartanPoint(
            self.perm
                .iter()
                .zip(&self.flips)
                .map(|(&p, &f)| if f { -z.0[p] } else { z.0[p] })
                .collect(),
        )
    }
}

/// |chi(w z) - chi(z)| for w in W(D_l).
pub fn weyl_check(rep: LevelOneRep, z: &CartanPoint, tau: C64, w: &SignedPerm) -> Result<f64> {
    w.validate(z.rank())?;
    if w.flip_count() % 2 == 1 {
        return Err(Error::NotInWeylGroup(format!("{} sign flips", w.flip_count())));
    }
    let a = char_level_one(rep, &w.act(z), tau)?;
    let b = char_level_one(rep, z, tau)?;
    Ok((a - b).norm())
}
