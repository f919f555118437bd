//! CSV and JSON renderings of the data types.
//!
//! Every CSV starts with a `# ` line carrying the full parameter record,
//! followed by a column header. Reals are written in scientific notation
//! with 12 significant digits.

use std::fmt::Write;

use serde::Serialize;
use serde_json::Value;

use crate::aperture::AngularDensity;
use crate::correlate::ConditionalWavefunction;
use crate::criterion::CriterionReport;
use crate::oam::{Convergence, OamSpectrum, VarianceSeries};
use crate::{Error, Real, Result};

/// `x` in scientific notation with 12 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.11e}")
}

/// `x` rounded to 12 significant digits.
pub fn round_sig12(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    fmt_real(x).parse().unwrap_or(x)
}

fn header(record: &str, columns: &str) -> String {
    // the record must stay on one line
    let record = record.replace(['\n', '\r'], " ");
    format!("# {record}\n{columns}\n")
}

/// Columns `phi,p`.
pub fn density_csv<T: Real>(d: &AngularDensity<T>, record: &str) -> String {
    let mut out = header(record, "phi,p");
    for (phi, &p) in d.angles().zip(d.values()) {
        let _ = writeln!(out, "{},{}", fmt_real(phi.as_f64()), fmt_real(p.as_f64()));
    }
    out
}

/// Columns `phi,p,psi` for a conditional density and its wavefunction.
pub fn conditional_csv<T: Real>(
    p: &AngularDensity<T>,
    psi: &ConditionalWavefunction<T>,
    record: &str,
) -> Result<String> {
    if p.n() != psi.n() {
        return Err(Error::GridMismatch {
            left: p.n(),
            right: psi.n(),
        });
    }
    let mut out = header(record, "phi,p,psi");
    for ((phi, &v), &s) in p.angles().zip(p.values()).zip(psi.values()) {
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt_real(phi.as_f64()),
            fmt_real(v.as_f64()),
            fmt_real(s.as_f64())
        );
    }
    Ok(out)
}

/// Columns `m,c,c_squared`.
pub fn spectrum_csv<T: Real>(s: &OamSpectrum<T>, record: &str) -> String {
    let mut out = header(record, "m,c,c_squared");
    for (m, c) in s.iter() {
        let _ = writeln!(
            out,
            "{m},{},{}",
            fmt_real(c.as_f64()),
            fmt_real((c * c).as_f64())
        );
    }
    out
}

/// Columns `m_max,variance,classification`; the series classification is
/// repeated on every row.
pub fn series_csv<T: Real>(s: &VarianceSeries<T>, record: &str) -> String {
    let mut out = header(record, "m_max,variance,classification");
    for &(m, v) in &s.entries {
        let _ = writeln!(out, "{m},{},{}", fmt_real(v.as_f64()), s.classification);
    }
    out
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if let Some(x) = n.as_f64() {
                if !(n.is_i64() || n.is_u64()) {
                    if let Some(r) = serde_json::Number::from_f64(round_sig12(x)) {
                        *n = r;
                    }
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_value),
        Value::Object(o) => o.values_mut().for_each(round_value),
        _ => {}
    }
}

#[derive(Serialize)]
struct TauEntry {
    tau: f64,
    variance: f64,
}

#[derive(Serialize)]
struct ReportJson {
    lhs: f64,
    rhs: f64,
    verdict: bool,
    classification: Convergence,
    inputs: Value,
    rhs_at_tau: Vec<TauEntry>,
}

/// Pretty JSON with keys `lhs, rhs, verdict, classification, inputs,
/// rhs_at_tau` in that order and reals at 12 significant digits.
pub fn report_json<T: Real + Serialize>(r: &CriterionReport<T>) -> Result<String> {
    let mut inputs = serde_json::to_value(&r.inputs).map_err(|e| Error::InvalidArgument {
        name: "inputs",
        detail: e.to_string(),
    })?;
    round_value(&mut inputs);
    let doc = ReportJson {
        lhs: round_sig12(r.lhs.as_f64()),
        rhs: round_sig12(r.rhs.as_f64()),
        verdict: r.verdict,
        classification: r.classification,
        inputs,
        rhs_at_tau: r
            .rhs_at_tau
            .iter()
            .map(|&(t, v)| TauEntry {
                tau: round_sig12(t.as_f64()),
                variance: round_sig12(v.as_f64()),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).map_err(|e| Error::InvalidArgument {
        name: "report",
        detail: e.to_string(),
    })?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aperture::ApertureSpec;
    use crate::criterion::{evaluate, CriterionOptions, OamCorrelationModel};

    #[test]
    #[allow(clippy::approx_constant)]
    fn rounding() {
        assert_eq!(fmt_real(1.0), "1.00000000000e0");
        assert_eq!(round_sig12(std::f64::consts::PI), 3.14159265359);
        assert_eq!(round_sig12(0.0), 0.0);
    }

    #[test]
    fn csv_layout() {
        let d = ApertureSpec::rect(1.0).unwrap().sample(16).unwrap();
        let csv = density_csv(&d, "family=rect\nw=1");
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# family=rect w=1");
        assert_eq!(lines[1], "phi,p");
        assert_eq!(lines.len(), 18);
        assert!(lines[2].starts_with("-3.14159265359e0,"));
    }

    #[test]
    fn report_key_order() {
        let a = ApertureSpec::gauss(0.8).unwrap();
        let opts = CriterionOptions {
            tau_grid: 2,
            m_max: 8,
            grid_n: 64,
        };
        let r = evaluate(&OamCorrelationModel::perfect(0), &a, &a, &opts).unwrap();
        let json = report_json(&r).unwrap();
        let pos: Vec<usize> = [
            "\"lhs\"",
            "\"rhs\"",
            "\"verdict\"",
            "\"classification\"",
            "\"inputs\"",
            "\"rhs_at_tau\"",
        ]
        .iter()
        .map(|k| json.find(k).unwrap())
        .collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        let v: Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["verdict"], Value::Bool(true));
        assert_eq!(v["rhs_at_tau"].as_array().unwrap().len(), 2);
    }
}
