//! Deterministic output: JSON with 17 significant digits, field CSV dumps and
//! content hashes.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::system::PERIOD;

/// `d.dddddddddddddddde±x`: seventeen significant digits, enough to round-trip
/// every `f64`.
pub fn format_float(v: f64) -> String {
    if !v.is_finite() {
        return "null".into();
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0.0000000000000000e0" } else { "0.0000000000000000e0" }.into();
    }
    format!("{v:.16e}")
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    const STEP: usize = 2;
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN)));
            } else {
                let _ = write!(out, "{n}");
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            // short numeric rows stay on one line
            if items.len() <= 8 && items.iter().all(|x| x.is_number() || x.is_null()) {
                out.push('[');
                for (k, x) in items.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, x, indent);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (k, x) in items.iter().enumerate() {
                out.push_str(&" ".repeat(indent + STEP));
                write_value(out, x, indent + STEP);
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&" ".repeat(indent));
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (k, (key, x)) in map.iter().enumerate() {
                out.push_str(&" ".repeat(indent + STEP));
                out.push_str(&Value::String(key.clone()).to_string());
                out.push_str(": ");
                write_value(out, x, indent + STEP);
                out.push_str(if k + 1 < map.len() { ",\n" } else { "\n" });
            }
            out.push_str(&" ".repeat(indent));
            out.push('}');
        }
    }
}

/// Serializes with sorted keys and every float in [`format_float`] form.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&mut out, &v, 0);
    out.push('\n');
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Writes `x,t,u_1,…,u_n`, one row per node, `t` outermost, LF endings.
pub fn write_field_csv<W: Write>(out: W, u: &GridFunction) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let mut header = vec!["x".to_string(), "t".to_string()];
    header.extend((1..=u.n()).map(|j| format!("u_{j}")));
    w.write_record(&header).map_err(csv_error)?;
    let mut row = Vec::with_capacity(u.n() + 2);
    for (k, &t) in u.ts().iter().enumerate() {
        for (i, &x) in u.xs().iter().enumerate() {
            row.clear();
            row.push(format_float(x));
            row.push(format_float(t));
            row.extend((0..u.n()).map(|j| format_float(u.get(j, i, k))));
            w.write_record(&row).map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_field_csv(path: &Path, u: &GridFunction) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_field_csv(std::io::BufWriter::new(file), u)
}

fn csv_error(e: csv::Error) -> Error {
    Error::Invalid(format!("csv: {e}"))
}

/// Reads a dump written by [`write_field_csv`]. With `periodic` the times must
/// be `2πk/N_t`.
pub fn read_field_csv<R: Read>(input: R, periodic: bool) -> Result<GridFunction> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers().map_err(csv_error)?.clone();
    let n = header.len().saturating_sub(2);
    let expected: Vec<String> = ["x", "t"].iter().map(|s| s.to_string()).chain((1..=n).map(|j| format!("u_{j}"))).collect();
    if n == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Invalid(format!("csv header must be {}", expected.join(","))));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let vals = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Invalid(format!("csv row {}: {e}", line + 2)))?;
        rows.push(vals);
    }
    let mut xs: Vec<f64> = Vec::new();
    let mut ts: Vec<f64> = Vec::new();
    for row in &rows {
        if ts.last() != Some(&row[1]) {
            ts.push(row[1]);
        }
        if ts.len() == 1 {
            xs.push(row[0]);
        }
    }
    let (nx, nt) = (xs.len(), ts.len());
    if nx * nt != rows.len() {
        return Err(Error::Invalid("csv rows do not form a tensor grid".into()));
    }
    let mut u = if periodic {
        let g = GridFunction::periodic_on(n, xs.clone(), nt);
        if g.ts().iter().zip(&ts).any(|(a, b)| (a - b).abs() > 1e-12 * PERIOD) {
            return Err(Error::Invalid("csv times are not a uniform periodic grid".into()));
        }
        g
    } else {
        GridFunction::zeros(n, xs.clone(), ts.clone())
    };
    for (idx, row) in rows.iter().enumerate() {
        let (k, i) = (idx / nx, idx % nx);
        if row[0] != xs[i] || row[1] != ts[k] {
            return Err(Error::Invalid(format!("csv row {} is out of grid order", idx + 2)));
        }
        for j in 0..n {
            u.set(j, i, k, row[j + 2]);
        }
    }
    Ok(u)
}

pub fn load_field_csv(path: &Path, periodic: bool) -> Result<GridFunction> {
    read_field_csv(std::fs::File::open(path)?, periodic)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_with_seventeen_digits() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 1.0] {
            let s = format_float(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let mantissa = s.trim_start_matches('-').split('e').next().unwrap();
            assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
        }
        assert_eq!(format_float(f64::NAN), "null");
    }

    #[test]
    fn json_is_sorted_and_stable() {
        let v = serde_json::json!({"b": 1.5, "a": [1, 2.0], "c": {"z": null, "y": "q"}});
        let s = to_json(&v).unwrap();
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
        assert!(s.contains("[1, 2.0000000000000000e0]"));
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
        assert_eq!(to_json(&back).unwrap(), s);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let u = GridFunction::periodic(2, 5, 4).from_fn(|j, x, t| (j as f64 + 1.0) * x.sin() + t.cos() / 3.0);
        let mut buf = Vec::new();
        write_field_csv(&mut buf, &u).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,t,u_1,u_2\n"));
        assert!(!text.contains('\r'));
        let back = read_field_csv(&buf[..], true).unwrap();
        assert!(back.same_shape(&u));
        assert_eq!(back.max_abs_diff(&u).unwrap(), 0.0);
    }

    #[test]
    fn csv_rejects_bad_header() {
        let text = "x,t,v\n0,0,1\n";
        assert!(read_field_csv(text.as_bytes(), false).is_err());
    }
}
