//! Text matrix format and deterministic JSON output.
//!
//! Matrix files start with a header line `rows cols frequency_hz` followed by
//! one line per row of whitespace-separated `re:im` pairs. Every float is
//! written with 17 significant digits, which round-trips `f64` exactly.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, RMatrix, C64};

/// `x` with 17 significant digits in scientific notation.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_matrix(m: &CMatrix, frequency: f64) -> String {
    let mut out = format!("{} {} {}\n", m.nrows(), m.ncols(), format_f64(frequency));
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| format!("{}:{}", format_f64(m[(i, j)].re), format_f64(m[(i, j)].im)))
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

fn parse_float(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| Error::Parse(format!("line {line}: invalid number {tok:?}")))
}

/// Parses the matrix text format, returning the matrix and its frequency.
pub fn read_matrix(text: &str) -> Result<(CMatrix, f64)> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 3 {
        return Err(Error::Parse(format!(
            "line {}: header must be `rows cols frequency_hz`",
            hline + 1
        )));
    }
    let rows: usize = h[0]
        .parse()
        .map_err(|_| Error::Parse(format!("line {}: invalid row count {:?}", hline + 1, h[0])))?;
    let cols: usize = h[1]
        .parse()
        .map_err(|_| Error::Parse(format!("line {}: invalid column count {:?}", hline + 1, h[1])))?;
    let frequency = parse_float(h[2], hline + 1)?;
    let mut m = CMatrix::zeros(rows, cols);
    let mut seen = 0;
    for (ln, line) in lines {
        if seen == rows {
            return Err(Error::Parse(format!("line {}: more than {rows} rows", ln + 1)));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != cols {
            return Err(Error::Parse(format!(
                "line {}: expected {cols} entries, found {}",
                ln + 1,
                toks.len()
            )));
        }
        for (j, tok) in toks.iter().enumerate() {
            let (re, im) = tok
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("line {}: entry {tok:?} is not re:im", ln + 1)))?;
            m[(seen, j)] = C64::new(parse_float(re, ln + 1)?, parse_float(im, ln + 1)?);
        }
        seen += 1;
    }
    if seen != rows {
        return Err(Error::Parse(format!("expected {rows} rows, found {seen}")));
    }
    Ok((m, frequency))
}

pub fn write_real_matrix(m: &RMatrix, frequency: f64) -> String {
    write_matrix(&m.map(|x| C64::new(x, 0.0)), frequency)
}

/// Parses a matrix file whose imaginary parts must all be zero.
pub fn read_real_matrix(text: &str) -> Result<(RMatrix, f64)> {
    let (m, f) = read_matrix(text)?;
    if m.iter().any(|z| z.im != 0.0) {
        return Err(Error::Parse("expected a real matrix".into()));
    }
    Ok((m.map(|z| z.re), f))
}

/// Pretty JSON formatter writing floats with 17 significant digits.
struct FixedFloat<'a>(PrettyFormatter<'a>);

impl Formatter for FixedFloat<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_f64(value).as_bytes())
    }
    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
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

/// Serializes `value` as pretty JSON with fixed 17-digit floats.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloat(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[test]
    fn matrix_round_trip_is_bit_exact() {
        let m = CMatrix::from_row_slice(
            2,
            3,
            &[
                C64::new(0.1, -1.0 / 3.0),
                C64::new(1e-300, 5e300),
                C64::new(-0.0, 7.0),
                C64::new(std::f64::consts::PI, std::f64::consts::E),
                C64::new(f64::MIN_POSITIVE, -2.5),
                C64::new(123456789.123456789, 0.0),
            ],
        );
        let text = write_matrix(&m, 28e9);
        let (back, f) = read_matrix(&text).unwrap();
        assert_eq!(f, 28e9);
        for (a, b) in m.iter().zip(back.iter()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
        assert_eq!(write_matrix(&back, f), text);
    }

    #[test]
    fn malformed_matrices_rejected() {
        assert!(matches!(read_matrix(""), Err(Error::Parse(_))));
        assert!(matches!(read_matrix("2 2\n"), Err(Error::Parse(_))));
        assert!(matches!(read_matrix("1 2 0\n1:0\n"), Err(Error::Parse(_))));
        assert!(matches!(read_matrix("1 1 0\n1\n"), Err(Error::Parse(_))));
        assert!(matches!(read_matrix("2 1 0\n1:0\n"), Err(Error::Parse(_))));
        assert!(matches!(read_matrix("1 1 0\n1:0\n2:0\n"), Err(Error::Parse(_))));
        assert!(matches!(read_real_matrix("1 1 0\n1:1\n"), Err(Error::Parse(_))));
    }

    #[test]
    fn json_floats_have_seventeen_digits() {
        #[derive(Serialize, Deserialize, PartialEq, Debug)]
        struct Rec {
            x: f64,
            v: Vec<f64>,
            n: usize,
        }
        let r = Rec {
            x: 0.1,
            v: vec![1.0, -2.5e-7],
            n: 3,
        };
        let s = to_json(&r).unwrap();
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("\"n\": 3"));
        let back: Rec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }
}
