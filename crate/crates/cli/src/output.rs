//! File formats: CSV tables and JSON documents with numbers cut to 12
//! significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sls_core::ensemble::Histogram;
use sls_core::rpe::KRegion;
use sls_core::sim::StageRecord;

use crate::CliError;

pub const SIGNIFICANT_DIGITS: usize = 12;

/// Rounds to 12 significant digits; non-finite values pass through.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Number as written to CSV: at most 12 significant digits, exponent form
/// for very small or very large magnitudes.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let r = round_sig(x);
    let a = r.abs();
    if r == 0.0 {
        "0".into()
    } else if !(1e-5..1e15).contains(&a) {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(num) => {
            if num.is_f64() {
                if let Some(r) = num.as_f64().map(round_sig).and_then(serde_json::Number::from_f64) {
                    *num = r;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with every float rounded to 12 significant digits.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("output serializes");
    round_value(&mut v);
    serde_json::to_string_pretty(&v).expect("value serializes")
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn path_csv(records: &[StageRecord]) -> String {
    let mut out = String::from("k,S1,S2,I1,I2,g1,g2,g,V\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.k,
            fmt_num(r.s1),
            fmt_num(r.s2),
            fmt_num(r.i1),
            fmt_num(r.i2),
            fmt_num(r.g1),
            fmt_num(r.g2),
            fmt_num(r.gain()),
            fmt_num(r.v)
        );
    }
    out
}

pub fn histogram_csv(h: &Histogram) -> String {
    let mut out = String::from("bin_lo,bin_hi,count,density\n");
    for (i, (&count, &density)) in h.counts.iter().zip(&h.density).enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_num(h.edges[i]),
            fmt_num(h.edges[i + 1]),
            count,
            fmt_num(density)
        );
    }
    out
}

pub fn region_csv(region: &KRegion) -> String {
    let mut out = String::from("lo,hi,truncated\n");
    for iv in &region.intervals {
        let _ = writeln!(out, "{},{},{}", fmt_num(iv.lo), fmt_num(iv.hi.to_f64()), iv.truncated);
    }
    out
}
