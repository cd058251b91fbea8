//! Complex numbers as `a+bi` (no spaces) and comma-separated vectors of them.

use num_complex::Complex64 as C64;

fn num(s: &str, whole: &str) -> Result<f64, String> {
    match s {
        "" | "+" => Ok(1.0),
        "-" => Ok(-1.0),
        _ => s.parse::<f64>().map_err(|_| format!("bad complex number {whole:?}")),
    }
}

pub fn parse_c64(s: &str) -> Result<C64, String> {
    let t = s.trim();
    if t.is_empty() || t.contains(char::is_whitespace) {
        return Err(format!("bad complex number {s:?}: expected a+bi without spaces"));
    }
    let Some(body) = t.strip_suffix('i') else {
        return t.parse::<f64>().map(|x| C64::new(x, 0.0)).map_err(|_| format!("bad complex number {s:?}"));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len()).rev().find(|&k| {
        (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E')
    });
    match split {
        Some(k) => {
            let re = body[..k].parse::<f64>().map_err(|_| format!("bad complex number {s:?}"))?;
            Ok(C64::new(re, num(&body[k..], s)?))
        }
        None => Ok(C64::new(0.0, num(body, s)?)),
    }
}

pub fn format_c64(z: C64) -> String {
    if z.im.is_sign_negative() {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

pub fn parse_cvec(s: &str) -> Result<Vec<C64>, String> {
    s.split(',').map(parse_c64).collect()
}

pub fn parse_rvec(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| format!("bad real {x:?}"))).collect()
}

pub fn format_cvec(v: &[C64]) -> String {
    v.iter().map(|z| format_c64(*z)).collect::<Vec<_>>().join(",")
}
