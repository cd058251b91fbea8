//! Reduced-size property suite behind `--selftest`, on a fixed seed.

use std::f64::consts::PI;

use ellhol::affine::{char_qexpansion, modular_anomaly, CartanPoint, LevelOneRep};
use ellhol::chern::{bismut_chern, ech_restriction_check, localization_identity_check, BChInput};
use ellhol::elliptic::{degeneration_check, elliptic_aw_check, epstein_zeta_det, zeta_det_torus, Pairing};
use ellhol::grassmann::{Blade, ExtAlgebra, GrassMat, GrassScalar};
use ellhol::special::{
    g2, g2_hat, heat_residual, modified_heat_residual, modular_check, theta, theta11_dz0, theta_product, eta,
    ModTarget, Modular, SpinStructure,
};
use ellhol::transport::{aw_check, parallel_transport};
use ellhol::synth;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::commands::Failure;
use crate::report::{Format, Report, RunConfig, Table};

pub const SELFTEST_SEED: u64 = 20240611;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

type Check = (&'static str, f64, f64);

fn theta_checks(rng: &mut ChaCha8Rng) -> ellhol::Result<Vec<Check>> {
    let (mut sp, mut quartic) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let tau = c(rng.gen_range(-0.5..0.5), rng.gen_range(0.1..2.0));
        let z = c(rng.gen_range(-0.5..0.5), rng.gen_range(-0.3..0.3));
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let s = theta(i, j, z, tau)?;
            sp = sp.max((theta_product(i, j, z, tau)? - s).norm() / s.norm().max(1.0));
        }
        let t4 = |i, j| theta(i, j, c(0.0, 0.0), tau).map(|v| v.powi(4));
        let lhs = t4(0, 0)?;
        quartic = quartic.max((t4(0, 1)? + t4(1, 0)? - lhs).norm() / lhs.norm().max(1.0));
    }
    Ok(vec![("theta sum vs product", sp, 1e-12), ("Jacobi quartic", quartic, 1e-11)])
}

fn modular_checks(rng: &mut ChaCha8Rng) -> ellhol::Result<Vec<Check>> {
    let (mut laws, mut g2law, mut hat) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let tau = c(rng.gen_range(-0.5..0.5), rng.gen_range(0.8..1.5));
        let z = c(rng.gen_range(-0.4..0.4), rng.gen_range(-0.2..0.2));
        for which in [Modular::T, Modular::S] {
            for t in [ModTarget::Theta11OverEta, ModTarget::Theta11OverEta3, ModTarget::CompletedSeries] {
                let m = modular_check(which, t, z, tau)?;
                laws = laws.max(m.absdiff / m.rhs.norm().max(1.0));
            }
        }
        let s = -1.0 / tau;
        g2law = g2law.max((g2(s)? - tau * tau * g2(tau)? + tau / (4.0 * PI * C64::i())).norm());
        hat = hat.max((g2_hat(s)? - tau * tau * g2_hat(tau)?).norm());
    }
    Ok(vec![("modular laws", laws, 1e-8), ("G2 quasimodularity", g2law, 1e-9), ("G2-hat covariance", hat, 1e-9)])
}

fn heat_checks() -> ellhol::Result<Vec<Check>> {
    let (z, tau) = (c(0.2, 0.05), c(0.1, 1.3));
    let mut worst = 0.0f64;
    let mut ratio_dev = 0.0f64;
    for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        for f in [heat_residual, modified_heat_residual] {
            let a = f(i, j, z, tau, 2e-3)?.norm();
            let b = f(i, j, z, tau, 1e-3)?.norm();
            worst = worst.max(b);
            ratio_dev = ratio_dev.max((a / b - 4.0).abs());
        }
    }
    Ok(vec![("heat residual", worst, 1e-5), ("Richardson |ratio - 4|", ratio_dev, 0.5)])
}

fn character_checks() -> ellhol::Result<Vec<Check>> {
    // integrality of the anomaly-shifted expansion at z = 0
    let mut worst = 0.0f64;
    for l in [2usize, 3] {
        for rep in LevelOneRep::ALL {
            let m = modular_anomaly(rep, l)?;
            for (_, v) in char_qexpansion(rep, &CartanPoint::zeros(l), 6)?.shift(-m).terms() {
                worst = worst.max((v - c(v.re.round(), 0.0)).norm());
            }
        }
    }
    Ok(vec![("character integrality", worst, 1e-9)])
}

fn aw_checks(rng: &mut ChaCha8Rng) -> ellhol::Result<Vec<Check>> {
    let mut worst = 0.0f64;
    for n in [4usize, 6] {
        for _ in 0..3 {
            worst = worst.max(aw_check(&synth::random_so_loop(n, 256, rng, 0.6))?.absdiff);
        }
    }
    Ok(vec![("circle Atiyah-Witten", worst, 1e-7)])
}

fn elliptic_checks(rng: &mut ChaCha8Rng) -> ellhol::Result<Vec<Check>> {
    let tau = c(0.0, 1.4);
    let zs: Vec<CartanPoint> =
        (0..8).map(|_| CartanPoint::new((0..2).map(|_| c(rng.gen_range(-0.5..0.5), rng.gen_range(-0.3..0.3))).collect())).collect();
    let mut good = 0.0f64;
    let mut bad = f64::INFINITY;
    for rep in LevelOneRep::ALL {
        good = good.max(elliptic_aw_check(rep, &zs, tau, Pairing::Flipped)?.unimodular_err);
        bad = bad.min(elliptic_aw_check(rep, &zs, tau, Pairing::Unflipped)?.unimodular_err);
    }
    let mut ep = 0.0f64;
    for spin in SpinStructure::all() {
        let z = c(0.21, 0.13);
        let closed = zeta_det_torus(z, tau, spin)?;
        ep = ep.max((epstein_zeta_det(z, tau, spin)?.value - closed).abs() / closed);
    }
    let deg = degeneration_check(c(0.3, 0.0), &[c(0.0, 8.0)])?[0].relerr;
    Ok(vec![
        ("elliptic Atiyah-Witten", good, 1e-8),
        ("wrong pairing control (inverted)", 1e-2 / bad, 1.0),
        ("Epstein vs closed form", ep, 1e-6),
        ("degeneration at tau = 8i", deg, 1e-12),
    ])
}

fn chern_checks(rng: &mut ChaCha8Rng) -> ellhol::Result<Vec<Check>> {
    let alg = ExtAlgebra::new(4)?;
    let conn = synth::random_so_loop(4, 64, rng, 0.6);
    let input = BChInput::new(conn.clone(), vec![GrassMat::zero(alg, 4); 64], None)?;
    let deg0 = (bismut_chern(&input, None)?.get(Blade::EMPTY) - parallel_transport(&conn).hol.trace()).norm();
    let r = vec![GrassScalar::from_parts(
        alg,
        vec![(Blade::from_indices(&[1, 2])?, c(0.3, 0.1)), (Blade::from_indices(&[3, 4])?, c(-0.2, 0.0))],
    )?];
    let z = CartanPoint::new(vec![c(0.17, 0.05)]);
    let tau = c(0.0, 10f64.ln() / (2.0 * PI));
    let mut dev = 0.0f64;
    for rep in LevelOneRep::ALL {
        dev = dev.max(ech_restriction_check(rep, &z, tau, &r, 2, 16)?.deviation);
    }
    let wit = localization_identity_check(1, c(0.0, 1.2), 6, 2)?.deviation;
    let mut norm = 0.0f64;
    for t in [c(0.0, 1.0), c(0.3, 1.1)] {
        norm = norm.max((theta11_dz0(t)? / eta(t)?.powi(3) - 2.0 * PI * C64::i()).norm());
    }
    Ok(vec![
        ("Bismut-Chern degree 0", deg0, 1e-12),
        ("restriction two-path", dev, 1e-8),
        ("Witten localization", wit, 1e-7),
        ("theta_11'(0) / eta^3 = 2 pi i", norm, 1e-10),
    ])
}

pub fn run(format: Format) -> Result<Report, Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(SELFTEST_SEED);
    let mut checks = Vec::new();
    checks.extend(theta_checks(&mut rng)?);
    checks.extend(modular_checks(&mut rng)?);
    checks.extend(heat_checks()?);
    checks.extend(character_checks()?);
    checks.extend(aw_checks(&mut rng)?);
    checks.extend(elliptic_checks(&mut rng)?);
    checks.extend(chern_checks(&mut rng)?);
    let mut r = Report::new("selftest", RunConfig::new(format, Some(SELFTEST_SEED)));
    let rows = checks.iter().map(|(n, v, b)| vec![json!(n), json!(v), json!(b), json!(v < b)]).collect();
    for (n, v, b) in &checks {
        r.contract(n, *v, *b);
    }
    r.set("checks", checks.len()).set("passed", checks.iter().filter(|(_, v, b)| v < b).count());
    r.source("suite", "reduced-size versions of the acceptance properties");
    r.table = Some(Table { columns: vec!["check".into(), "value".into(), "bound".into(), "pass".into()], rows });
    Ok(r)
}
