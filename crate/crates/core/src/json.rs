//! Canonical JSON output and the complex-matrix wire format.
//!
//! Objects are emitted with sorted keys and every float as `{:.16e}`
//! (17 significant digits), so identical inputs give identical bytes.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::{c, CMat};

struct CanonicalFormatter<'a>(PrettyFormatter<'a>);

impl Formatter for CanonicalFormatter<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{:.16e}", value)
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serialize with sorted keys and fixed float formatting.
pub fn to_canonical_string<T: Serialize>(value: &T) -> Result<String> {
    // Round-tripping through `Value` sorts object keys.
    let v = serde_json::to_value(value)?;
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, CanonicalFormatter(PrettyFormatter::with_indent(b"  ")));
    v.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("json output is utf-8"))
}

pub fn matrix_to_value(m: &CMat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| {
                Value::Array(
                    (0..m.ncols())
                        .map(|j| serde_json::json!([m[(i, j)].re, m[(i, j)].im]))
                        .collect(),
                )
            })
            .collect(),
    )
}

fn entry(v: &Value, path: &str) -> Result<crate::linalg::C64> {
    match v {
        Value::Number(n) => Ok(c(n.as_f64().unwrap_or(f64::NAN), 0.0)),
        Value::Array(p) if p.len() == 2 => {
            let re = p[0].as_f64().ok_or_else(|| Error::schema(path, "real part is not a number"))?;
            let im = p[1].as_f64().ok_or_else(|| Error::schema(path, "imaginary part is not a number"))?;
            Ok(c(re, im))
        }
        _ => Err(Error::schema(path, "entry must be a number or an [re, im] pair")),
    }
}

/// Parse a row-major complex matrix. Entries are `[re, im]` pairs or plain
/// reals. The matrix must be square and non-empty.
pub fn matrix_from_value(v: &Value, path: &str) -> Result<CMat> {
    let rows = v.as_array().ok_or_else(|| Error::schema(path, "matrix must be an array of rows"))?;
    let n = rows.len();
    if n == 0 {
        return Err(Error::schema(path, "matrix is empty"));
    }
    let mut m = CMat::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        let row = row
            .as_array()
            .ok_or_else(|| Error::schema(format!("{path}[{i}]"), "row must be an array"))?;
        if row.len() != n {
            return Err(Error::schema(
                path,
                format!("matrix is not square: row {i} has {} entries, expected {n}", row.len()),
            ));
        }
        for (j, x) in row.iter().enumerate() {
            m[(i, j)] = entry(x, &format!("{path}[{i}][{j}]"))?;
        }
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::schema(path, "matrix has non-finite entries"));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn canonical_output_is_sorted_and_fixed_width() {
        let v = json!({ "b": 0.1, "a": [1.0, -2.5e-300], "c": 3 });
        let s = to_canonical_string(&v).unwrap();
        let a = s.find("\"a\"").unwrap();
        let b = s.find("\"b\"").unwrap();
        assert!(a < b);
        assert!(s.contains("1.0000000000000001e-1"));
        assert!(s.contains("-2.5000000000000000e-300"));
        assert!(s.contains("\"c\": 3"));
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["b"].as_f64().unwrap(), 0.1);
    }

    #[test]
    fn matrix_roundtrip() {
        let m = CMat::from_fn(2, 2, |i, j| c(i as f64 + 0.25, j as f64 - 0.5));
        let v = matrix_to_value(&m);
        assert_eq!(matrix_from_value(&v, "x").unwrap(), m);
        let real = json!([[1.0, 0.0], [0.0, 2]]);
        assert_eq!(matrix_from_value(&real, "x").unwrap()[(1, 1)], c(2.0, 0.0));
    }

    #[test]
    fn matrix_errors_name_the_path() {
        let bad = json!([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        match matrix_from_value(&bad, "system.H") {
            Err(Error::SchemaViolation { path, reason }) => {
                assert_eq!(path, "system.H");
                assert!(reason.contains("not square"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let bad = json!([[[1.0]]]);
        assert!(matches!(matrix_from_value(&bad, "m"), Err(Error::SchemaViolation { .. })));
    }
}
