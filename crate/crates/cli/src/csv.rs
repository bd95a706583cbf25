//! Plain CSV output: `%.12g`-style numbers, LF line endings.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

const SIG_DIGITS: usize = 12;

/// Formats `x` like C's `%.12g`: shortest of fixed or exponent notation,
/// trailing zeros trimmed, `-0` written as `0`.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= SIG_DIGITS as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        let decimals = (SIG_DIGITS as i32 - 1 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes a `t,y,value` table, `m` outer and `i` inner.
pub fn write_surface<W: Write>(mut w: W, ts: &[f64], ys: &[f64], rows: &[Vec<f64>]) -> io::Result<()> {
    writeln!(w, "t,y,value")?;
    for (&t, row) in ts.iter().zip(rows) {
        let t = fmt_num(t);
        for (&y, &v) in ys.iter().zip(row) {
            writeln!(w, "{t},{},{}", fmt_num(y), fmt_num(v))?;
        }
    }
    w.flush()
}

pub fn export_surface_csv(path: &Path, ts: &[f64], ys: &[f64], rows: &[Vec<f64>]) -> io::Result<()> {
    write_surface(BufWriter::new(File::create(path)?), ts, ys, rows)
}

/// Row-oriented table writer; each cell is already formatted.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_like_percent_g() {
        let cases = [
            (0.0, "0"),
            (-0.0, "0"),
            (1.0, "1"),
            (-1.0, "-1"),
            (0.1, "0.1"),
            (1.0 / 3.0, "0.333333333333"),
            (2.0 / 3.0, "0.666666666667"),
            (123456.789, "123456.789"),
            (1e-5, "1e-05"),
            (-2.5e-7, "-2.5e-07"),
            (0.0001, "0.0001"),
            (1e12, "1e+12"),
            (999999999999.0, "999999999999"),
            (9999999999999.5, "1e+13"),
            (0.99999999999999, "1"),
            (1.5e300, "1.5e+300"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_num(x), want, "{x:e}");
        }
    }

    #[test]
    fn two_by_two_surface() {
        let mut buf = Vec::new();
        write_surface(&mut buf, &[0.0, 1.0], &[0.0, 1.0], &[vec![0.0, 1.0], vec![2.0, 3.0]]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,y,value\n0,0,0\n0,1,1\n1,0,2\n1,1,3\n"
        );
    }
}
