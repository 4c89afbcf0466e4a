//! Plain-text output helpers: 17 significant digit floats and RFC 4180 CSV.

use std::io::{self, Write};

use crate::scalar::Scalar;

/// Formats a float with 17 significant digits, enough to round-trip `f64`.
pub fn format_float<T: Scalar>(x: T) -> String {
    let v = x.to_f64().unwrap_or(f64::NAN);
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Writes one CSV record. Fields containing separators or quotes are quoted.
pub fn write_csv_record<W: Write, S: AsRef<str>>(w: &mut W, fields: &[S]) -> io::Result<()> {
    let mut first = true;
    for f in fields {
        if !first {
            w.write_all(b",")?;
        }
        first = false;
        let f = f.as_ref();
        if f.contains([',', '"', '\n', '\r']) {
            write!(w, "\"{}\"", f.replace('"', "\"\""))?;
        } else {
            w.write_all(f.as_bytes())?;
        }
    }
    w.write_all(b"\r\n")
}

/// Header `t,phi_1,...,phi_N` for trajectory files.
pub fn trajectory_header(n: usize) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain((1..=n).map(|j| format!("phi_{j}")))
        .collect()
}

/// Writes a trajectory, one record per sample.
pub fn write_trajectory_csv<W: Write, T: Scalar>(
    w: &mut W,
    times: &[T],
    states: &[Vec<T>],
) -> io::Result<()> {
    let n = states.first().map_or(0, Vec::len);
    write_csv_record(w, &trajectory_header(n))?;
    for (t, y) in times.iter().zip(states) {
        let row: Vec<String> = std::iter::once(format_float(*t))
            .chain(y.iter().map(|&v| format_float(v)))
            .collect();
        write_csv_record(w, &row)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1f64, -1.0 / 3.0, 6.02214076e23, 5e-324, -0.0, 2.0f64.sqrt()] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(format_float(f64::NAN), "NaN");
    }

    #[test]
    fn csv_quoting() {
        let mut buf = Vec::new();
        write_csv_record(&mut buf, &["a", "b,c", "d\"e"]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,\"b,c\",\"d\"\"e\"\r\n");
    }

    #[test]
    fn trajectory_layout() {
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &[0.0, 0.5], &[vec![1.0, 2.0], vec![1.5, 2.5]]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,phi_1,phi_2");
        assert_eq!(lines.len(), 3);
        let fields: Vec<f64> = lines[2].split(',').map(|f| f.parse().unwrap()).collect();
        assert_eq!(fields, vec![0.5, 1.5, 2.5]);
    }
}
