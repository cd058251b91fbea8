//! Thin adapters from parsed arguments to library calls and reports.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use ellhol::affine::{
    char_level_one, char_qexpansion, fock_energy_dims, modular_anomaly, CartanPoint, FockSector, LevelOneRep,
};
use ellhol::chern::{bismut_chern, localization_identity_check, BChInput, BChInputJson};
use ellhol::elliptic::{
    degeneration_check, elliptic_aw_check, elliptic_holonomy_field, epstein_zeta_det, zeta_det_torus, Pairing,
    TorusField, TorusFieldJson, EPSTEIN_CUTOFF,
};
use ellhol::qseries::{rat, QPoint, Rat};
use ellhol::special::{eta, g2, g2_hat, g_k, theta, theta_product, SpinStructure};
use ellhol::transport::{aw_check, parallel_transport, spin_supertrace, LoopConnection, LoopConnectionJson};
use ellhol::{synth, Error};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::cplx::{format_c64, format_cvec};
use crate::report::{Format, Report, RunConfig, Table};
use crate::{
    AwArgs, BchArgs, CharArgs, Cmd, DegenerateArgs, EawArgs, EholArgs, EisCheck, EisensteinArgs, EtaArgs, PairingArg,
    ThetaArgs, Transform, WittenArgs, ZetadetArgs, EXIT_CONTRACT, EXIT_USAGE, EXIT_VALIDATION,
};

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(m: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: m.into() }
    }
    fn validation(m: impl Into<String>) -> Self {
        Self { code: EXIT_VALIDATION, message: m.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse(_) | Error::InvalidRank(_) | Error::TruncationTooSmall | Error::NotInWeylGroup(_) => EXIT_USAGE,
            Error::Validation(_)
            | Error::DimMismatch(_)
            | Error::AlgebraMismatch
            | Error::NotSpecialOrthogonal(_)
            | Error::DefectiveMonodromy(_) => EXIT_VALIDATION,
            Error::NonConvergent(_) | Error::ZeroMode => EXIT_CONTRACT,
        };
        Self { code, message: e.to_string() }
    }
}

type Out = Result<Report, Failure>;

fn cs(z: C64) -> Value {
    Value::String(format_c64(z))
}

fn upper(tau: C64) -> Result<(), Failure> {
    if tau.im > 0.0 && tau.re.is_finite() && tau.im.is_finite() {
        Ok(())
    } else {
        Err(Failure::usage(format!("tau must lie in the upper half-plane, got {}", format_c64(tau))))
    }
}

fn bits(s: &str, what: &str) -> Result<(u8, u8), Failure> {
    let b: Vec<u8> = s.trim().bytes().collect();
    match b.as_slice() {
        [i @ (b'0' | b'1'), j @ (b'0' | b'1')] => Ok((i - b'0', j - b'0')),
        _ => Err(Failure::usage(format!("{what} must be two bits like 11, got {s:?}"))),
    }
}

fn need_seed(seed: Option<u64>, cmd: &str) -> Result<u64, Failure> {
    seed.ok_or_else(|| Failure::usage(format!("{cmd} draws random samples and needs --seed")))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &str) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {path}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| Failure::validation(format!("{path}: {e}")))
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

pub fn dispatch(cmd: Cmd, format: Format, seed: Option<u64>) -> Out {
    let cfg = RunConfig::new(format, seed);
    match cmd {
        Cmd::Theta(a) => cmd_theta(a, cfg),
        Cmd::Eta(a) => cmd_eta(a, cfg),
        Cmd::Eisenstein(a) => cmd_eisenstein(a, cfg),
        Cmd::Char(a) => cmd_char(a, cfg),
        Cmd::Aw(a) => cmd_aw(a, cfg),
        Cmd::Eaw(a) => cmd_eaw(a, cfg),
        Cmd::Zetadet(a) => cmd_zetadet(a, cfg),
        Cmd::Ehol(a) => cmd_ehol(a, cfg),
        Cmd::Degenerate(a) => cmd_degenerate(a, cfg),
        Cmd::Bch(a) => cmd_bch(a, cfg),
        Cmd::Witten(a) => cmd_witten(a, cfg),
    }
}

fn cmd_theta(a: ThetaArgs, cfg: RunConfig) -> Out {
    upper(a.tau)?;
    let (i, j) = bits(&a.ij, "--ij")?;
    let mut r = Report::new("theta", cfg);
    let v = theta(i, j, a.z, a.tau)?;
    r.set("ij", a.ij.clone()).set("z", cs(a.z)).set("tau", cs(a.tau)).set("value", cs(v));
    r.source("value", "theta sum form with tail-bounded truncation");
    match theta_product(i, j, a.z, a.tau) {
        Ok(p) => {
            let d = rel(p, v);
            r.set("product", cs(p)).set("diff", d);
            r.source("product", "theta product form");
            r.contract("sum_product_diff", d, 1e-12);
        }
        Err(e) => {
            r.set("product", Value::Null).set("product_error", e.to_string());
        }
    }
    Ok(r)
}

fn cmd_eta(a: EtaArgs, cfg: RunConfig) -> Out {
    upper(a.tau)?;
    let mut r = Report::new("eta", cfg);
    let v = eta(a.tau)?;
    r.set("tau", cs(a.tau)).set("value", cs(v));
    r.source("value", "q^{1/24} prod (1 - q^n), tail-bounded");
    if let Some(t) = a.check_transform {
        let (lhs, rhs, name) = match t {
            Transform::T => (eta(a.tau + 1.0)?, (C64::i() * PI / 12.0).exp() * v, "T"),
            Transform::S => (eta(-1.0 / a.tau)?, (-C64::i() * a.tau).sqrt() * v, "S"),
        };
        let diff = (lhs - rhs).norm();
        r.set("transform", name).set("lhs", cs(lhs)).set("rhs", cs(rhs)).set("diff", diff);
        r.source("lhs", "eta at the transformed point").source("rhs", "transformation law applied at tau");
        r.contract("transform_diff", diff, 1e-10);
    }
    Ok(r)
}

fn cmd_eisenstein(a: EisensteinArgs, cfg: RunConfig) -> Out {
    upper(a.tau)?;
    if a.k < 2 || a.k % 2 == 1 {
        return Err(Failure::usage(format!("--k must be even and >= 2, got {}", a.k)));
    }
    if a.hat && a.k != 2 {
        return Err(Failure::usage("--hat applies to k = 2 only"));
    }
    let f = |t: C64| -> ellhol::Result<C64> {
        if a.hat {
            g2_hat(t)
        } else {
            g_k(a.k, t)
        }
    };
    let mut r = Report::new("eisenstein", cfg);
    let v = f(a.tau)?;
    r.set("k", a.k).set("hat", a.hat).set("tau", cs(a.tau)).set("value", cs(v));
    r.source("value", if a.hat { "G2 q-expansion plus 1/(8 pi Im tau)" } else { "-B_k/(2k) + sum sigma_{k-1}(n) q^n" });
    if let Some(check) = a.check {
        let t = a.tau;
        let (name, residual) = match check {
            EisCheck::Periodic => ("periodic", (f(t + 1.0)? - v).norm()),
            EisCheck::Modular => {
                if a.k == 2 && !a.hat {
                    return Err(Failure::usage("G2 is only quasimodular; use --check quasimodular or --hat"));
                }
                ("modular", (f(-1.0 / t)? - t.powi(a.k as i32) * v).norm())
            }
            EisCheck::Quasimodular => {
                if a.k != 2 || a.hat {
                    return Err(Failure::usage("--check quasimodular applies to the holomorphic G2"));
                }
                let law = t * t * g2(t)? - t / (4.0 * PI * C64::i());
                ("quasimodular", (g2(-1.0 / t)? - law).norm())
            }
        };
        r.set("check", name).set("residual", residual);
        r.source("residual", "series at the transformed point against the transformation law");
        r.contract("residual", residual, 1e-9);
    }
    Ok(r)
}

fn signed_fock(rep: LevelOneRep, l: usize, t: i64) -> BTreeMap<Rat, i64> {
    let (a, b, sign) = match rep {
        LevelOneRep::S00 => (FockSector::NS_even, FockSector::NS_odd, 1),
        LevelOneRep::S01 => (FockSector::NS_even, FockSector::NS_odd, -1),
        LevelOneRep::S10 => (FockSector::R_plus, FockSector::R_minus, 1),
        LevelOneRep::S11 => (FockSector::R_plus, FockSector::R_minus, -1),
    };
    let mut out = BTreeMap::new();
    for (e, d) in fock_energy_dims(a, l, t) {
        *out.entry(e).or_insert(0) += d as i64;
    }
    for (e, d) in fock_energy_dims(b, l, t) {
        *out.entry(e).or_insert(0) += sign * d as i64;
    }
    out
}

fn cmd_char(a: CharArgs, cfg: RunConfig) -> Out {
    if a.l == 0 {
        return Err(Failure::usage("--l must be at least 1"));
    }
    let z = CartanPoint::new(a.z.clone().map(|v| v.0).unwrap_or_else(|| vec![C64::new(0.0, 0.0); a.l]));
    if z.rank() != a.l {
        return Err(Failure::usage(format!("--z has {} coordinates, --l is {}", z.rank(), a.l)));
    }
    let mut r = Report::new("char", cfg);
    r.set("rep", a.rep.to_string()).set("l", a.l);
    if a.anomaly {
        let m = modular_anomaly(a.rep, a.l)?;
        r.set("anomaly", m.to_string()).set("anomaly_f64", *m.numer() as f64 / *m.denom() as f64);
        r.source("anomaly", "h - c/24 in exact rationals");
        return Ok(r);
    }
    r.set("z", format_cvec(z.coords()));
    if let Some(t) = a.qexpand {
        r.run_config.truncations.q_series = Some(t);
        let s = char_qexpansion(a.rep, &z, t)?;
        if a.against_fock {
            let m = modular_anomaly(a.rep, a.l)?;
            let shifted = s.shift(-m);
            let fock = signed_fock(a.rep, a.l, t + 1);
            let mut exps: Vec<Rat> = shifted.terms().map(|(e, _)| e).collect();
            exps.extend(fock.iter().filter(|(_, d)| **d != 0).map(|(e, _)| *e));
            exps.sort();
            exps.dedup();
            let top = shifted.trunc();
            let mut rows = Vec::new();
            let mut mismatches = 0usize;
            for e in exps.into_iter().filter(|e| *e < top && *e < rat(t, 1)) {
                let c = shifted.coeff(e);
                let want = fock.get(&e).copied().unwrap_or(0);
                let rounded = c.re.round();
                let ok = (c - C64::new(rounded, 0.0)).norm() < 1e-9 && rounded as i64 == want;
                mismatches += usize::from(!ok);
                rows.push(vec![json!(e.to_string()), cs(c), json!(want), json!(ok)]);
            }
            r.set("anomaly", m.to_string()).set("rows", rows.len()).set("mismatches", mismatches);
            r.source("coeff", "theta product expansion divided by eta, shifted by q^{-m}");
            r.source("fock", "integer dynamic programming over free-fermion modes");
            r.table = Some(Table { columns: vec!["exponent".into(), "coeff".into(), "fock".into(), "match".into()], rows });
            r.require("fock_match", mismatches == 0);
        } else {
            let rows = s.terms().map(|(e, c)| vec![json!(e.to_string()), cs(c)]).collect();
            r.set("trunc", s.trunc().to_string());
            r.source("coeff", "theta product expansion divided by eta");
            r.table = Some(Table { columns: vec!["exponent".into(), "coeff".into()], rows });
        }
        return Ok(r);
    }
    let tau = a.tau.ok_or_else(|| Failure::usage("char needs --tau, --qexpand or --anomaly"))?;
    upper(tau)?;
    let v = char_level_one(a.rep, &z, tau)?;
    r.set("tau", cs(tau)).set("value", cs(v));
    r.source("value", "product of theta_ij(z_j) / eta");
    Ok(r)
}

fn cmd_aw(a: AwArgs, mut cfg: RunConfig) -> Out {
    let j: LoopConnectionJson = read_json(&a.loop_file)?;
    let conn = LoopConnection::from_json(&j)?;
    cfg.truncations.ode_k = Some(conn.len());
    let seed = match a.gauge_orbit {
        Some(_) => Some(need_seed(cfg.seed, "aw --gauge-orbit")?),
        None => None,
    };
    let mut r = Report::new("aw", cfg);
    let rep = aw_check(&conn)?;
    r.set("n", conn.n()).set("samples", conn.len());
    r.set("lhs", cs(rep.lhs)).set("rhs", cs(rep.rhs)).set("absdiff", rep.absdiff);
    r.set("angles", rep.angle_data.clone()).set("det_identity_err", rep.det_identity_err);
    r.set("floquet_residual", rep.floquet_residual).set("continuation_points", rep.continuation_points);
    r.source("lhs", "zeta-regularized Pfaffian from the Floquet logarithm, sign by continuation");
    r.source("rhs", "spinor supertrace of the CF4 holonomy, sign by continuation");
    r.contract("absdiff", rep.absdiff, 1e-7).contract("det_identity_err", rep.det_identity_err, 1e-9);
    if let (Some(count), Some(seed)) = (a.gauge_orbit, seed) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = spin_supertrace(&parallel_transport(&conn))?;
        let mut spread: f64 = 0.0;
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            let g = synth::random_gauge(conn.n(), &mut rng, a.gauge_scale);
            let v = spin_supertrace(&parallel_transport(&g.apply(&conn)?))?;
            spread = spread.max((v - base).norm());
            values.push(cs(v));
        }
        r.set("gauge_orbit", values).set("gauge_spread", spread);
        r.source("gauge_orbit", "supertrace after A -> g A g^-1 + g' g^-1 with random periodic g");
        r.contract("gauge_spread", spread, 1e-7);
    }
    Ok(r)
}

fn cmd_eaw(a: EawArgs, cfg: RunConfig) -> Out {
    upper(a.tau)?;
    if a.l == 0 {
        return Err(Failure::usage("--l must be at least 1"));
    }
    let points: Vec<CartanPoint> = if a.z.is_empty() {
        let seed = need_seed(cfg.seed, "eaw")?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..a.samples)
            .map(|_| {
                CartanPoint::new(
                    (0..a.l).map(|_| C64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.3..0.3))).collect(),
                )
            })
            .collect()
    } else {
        a.z.iter().map(|v| CartanPoint::new(v.0.clone())).collect()
    };
    if points.iter().any(|p| p.rank() != a.l) {
        return Err(Failure::usage(format!("every --z needs {} coordinates", a.l)));
    }
    let mut r = Report::new("eaw", cfg);
    let rep = elliptic_aw_check(a.rep, &points, a.tau, a.spin_pairing.primary())?;
    let rows = points
        .iter()
        .zip(rep.char_side.iter().zip(&rep.pfaffian_side).zip(&rep.ratio))
        .map(|(p, ((c, pf), ratio))| {
            vec![
                json!(format_cvec(p.coords())),
                cs(*c),
                cs(*pf),
                ratio.map_or(Value::Null, cs),
                ratio.map_or(Value::Null, |x| json!(x.norm())),
            ]
        })
        .collect();
    r.table = Some(Table {
        columns: vec!["z".into(), "char_side".into(), "pfaffian_side".into(), "ratio".into(), "ratio_abs".into()],
        rows,
    });
    r.set("rep", a.rep.to_string()).set("l", a.l).set("tau", cs(a.tau)).set("points", points.len());
    r.set("pairing", format!("{:?}", rep.pairing).to_lowercase());
    r.set("characteristic", vec![rep.characteristic.0, rep.characteristic.1]);
    r.set("anomaly", rep.anomaly).set("mean_modulus", rep.mean_modulus);
    r.set("unimodular_err", rep.unimodular_err).set("phase", rep.phase);
    r.source("char_side", "q^m times the theta-product character");
    r.source("pfaffian_side", "pushdown determinant over the vector weights");
    if rep.pairing == Pairing::Flipped {
        r.contract("unimodular_err", rep.unimodular_err, 1e-8);
    }
    if matches!(a.spin_pairing, PairingArg::Check) {
        let control = elliptic_aw_check(a.rep, &points, a.tau, Pairing::Unflipped)?;
        r.set("control_unimodular_err", control.unimodular_err);
        r.source("control_unimodular_err", "same points against the unflipped characteristic");
        r.require("control_deviates", control.unimodular_err > 1e-2);
    }
    Ok(r)
}

fn cmd_zetadet(a: ZetadetArgs, cfg: RunConfig) -> Out {
    upper(a.tau)?;
    let (i, j) = bits(&a.spin, "--spin")?;
    let spin = SpinStructure::new(i, j)?;
    let mut r = Report::new("zetadet", cfg);
    let closed = zeta_det_torus(a.z, a.tau, spin)?;
    r.set("z", cs(a.z)).set("tau", cs(a.tau)).set("spin", a.spin.clone()).set("value", closed);
    r.source("value", "e^{-2 pi (Im z)^2 / Im tau} |theta_ij(z) / eta|^2");
    match epstein_zeta_det(a.z, a.tau, spin) {
        Ok(e) => {
            let relerr = (e.value - closed).abs() / closed.abs().max(1e-300);
            r.set("spectral", e.value).set("zero_mode", false).set("relerr", relerr);
            r.set("zeta_prime", e.zeta_prime).set("calibration", e.calibration);
            r.set("calibration_point", cs(e.calibration_point)).set("doubling_change", e.doubling_change);
            r.set("ewald_cutoff", EPSTEIN_CUTOFF);
            r.source("spectral", "Ewald-split Epstein zeta derivative, calibrated once per (tau, spin)");
            r.contract("relerr", relerr, 1e-6);
        }
        Err(Error::ZeroMode) => {
            r.set("spectral", Value::Null).set("zero_mode", true);
            r.source("spectral", "twisted lattice contains 0: the operator has a kernel");
        }
        Err(e) => return Err(e.into()),
    }
    Ok(r)
}

fn cmd_ehol(a: EholArgs, mut cfg: RunConfig) -> Out {
    let j: TorusFieldJson = read_json(&a.field)?;
    let field = TorusField::from_json(&j)?;
    cfg.truncations.torus_n = Some(field.n());
    let mut r = Report::new("ehol", cfg);
    let (v, red) = elliptic_holonomy_field(a.rep, &field)?;
    r.set("rep", a.rep.to_string()).set("l", field.l()).set("N", field.n()).set("tau", cs(field.tau()));
    r.set("value", cs(v.value)).set("cartan", format_cvec(v.cartan.coords()));
    r.set("phase_log", cs(v.phase_log)).set("character", cs(v.character)).set("prefactor", cs(v.prefactor));
    r.set("reduction_residual", red.residual);
    r.source("cartan", "grid mean of the field");
    r.source("phase_log", "abelian cocycle from spectral derivatives of the FFT gauge");
    r.contract("reduction_residual", red.residual, 1e-8);
    Ok(r)
}

fn cmd_degenerate(a: DegenerateArgs, cfg: RunConfig) -> Out {
    if !(a.tmax >= 1.0 && a.tmax.is_finite()) {
        return Err(Failure::usage("--tmax must be at least 1"));
    }
    let mut taus = Vec::new();
    let mut t = 1.0;
    while t <= a.tmax {
        taus.push(C64::new(0.0, t));
        t *= 2.0;
    }
    let pts = degeneration_check(a.z, &taus)?;
    let mut r = Report::new("degenerate", cfg);
    let monotone = pts.windows(2).all(|w| w[1].relerr <= w[0].relerr || w[1].relerr < 1e-15);
    let rows = pts
        .iter()
        .map(|p| vec![cs(p.tau), json!(p.q_abs), cs(p.value), cs(p.limit), json!(p.relerr)])
        .collect();
    r.table = Some(Table {
        columns: vec!["tau".into(), "q_abs".into(), "value".into(), "limit".into(), "relerr".into()],
        rows,
    });
    r.set("z", cs(a.z)).set("monotone", monotone);
    r.source("value", "q^{-1/12} theta_11(z) / eta");
    r.source("limit", "2i sin(pi z)");
    r.require("monotone_relerr", monotone);
    Ok(r)
}

fn cmd_bch(a: BchArgs, cfg: RunConfig) -> Out {
    let j: BChInputJson = read_json(&a.input)?;
    let input = BChInput::from_json(&j)?;
    let mut cfg = cfg;
    cfg.truncations.ode_k = Some(input.conn().len());
    let mut r = Report::new("bch", cfg);
    let v = bismut_chern(&input, a.grading.as_ref().map(|g| g.0.as_slice()))?;
    let rows = v
        .parts()
        .map(|(b, c)| {
            let idx: Vec<String> = b.indices().iter().map(|k| k.to_string()).collect();
            vec![json!(format!("{{{}}}", idx.join(","))), json!(b.degree()), cs(c)]
        })
        .collect();
    r.table = Some(Table { columns: vec!["blade".into(), "degree".into(), "value".into()], rows });
    r.set("n", input.conn().n()).set("generators", input.algebra().generators());
    r.set("samples", input.conn().len()).set("bfield", input.bfield().is_some());
    r.source("value", "CF4 transport of d/dt - (A + R + B) lifted to Grassmann matrices, then the supertrace");
    Ok(r)
}

fn cmd_witten(a: WittenArgs, mut cfg: RunConfig) -> Out {
    upper(a.tau)?;
    if a.l == 0 {
        return Err(Failure::usage("--l must be at least 1"));
    }
    cfg.truncations.degree_cap = Some(a.degree);
    let holds = 2 * a.l as i32;
    let p = a.eta_power.unwrap_or(holds);
    let rep = localization_identity_check(a.l, a.tau, a.degree, p)?;
    cfg.truncations.q_series = Some(rep.q_terms);
    let mut r = Report::new("witten", cfg);
    r.set("l", a.l).set("tau", cs(a.tau)).set("D", a.degree).set("eta_power", p);
    r.set("deviation", rep.deviation).set("division_remainder", rep.division_remainder);
    r.set("q_abs", QPoint::new(a.tau)?.q().norm());
    r.source("lhs", "Fock-graded Chern character of S+ - S-, roots divided out, times A-hat");
    r.source("rhs", "product of x / (theta_11 / eta^3) over Chern roots");
    if p == holds {
        r.contract("deviation", rep.deviation, 1e-7);
    } else {
        r.set("negative_control", true);
        r.require("control_deviates", rep.deviation > 1e-2);
    }
    Ok(r)
}
