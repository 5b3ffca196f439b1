//! Number formatting and CSV assembly.

use std::fmt::Write as _;

/// `x` with 12 significant digits, `%.12g` style: fixed notation for
/// exponents in `[-5, 12)`, scientific otherwise, trailing zeros trimmed.
pub fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        trim_zeros(format!("{:.*}", (11 - exp) as usize, x))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(mut s: String) -> String {
    if s.contains('.') {
        let keep = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(keep);
    }
    s
}

/// Builds a CSV document: one `#` metadata line, a header, then rows, all
/// LF-terminated.
pub struct Table {
    out: Vec<u8>,
    writer: Option<csv::Writer<Vec<u8>>>,
}

impl Table {
    pub fn new(metadata: &[(&str, String)], header: &[&str]) -> Self {
        let mut line = String::from("# onebit");
        let _ = write!(line, " {}", env!("CARGO_PKG_VERSION"));
        for (k, v) in metadata {
            let _ = write!(line, "; {k}={v}");
        }
        line.push('\n');
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Self {
            out: line.into_bytes(),
            writer: Some(writer),
        }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer
            .as_mut()
            .expect("table open")
            .write_record(fields)
            .expect("in-memory write");
    }

    pub fn finish(mut self) -> String {
        let body = self
            .writer
            .take()
            .expect("table open")
            .into_inner()
            .expect("in-memory flush");
        self.out.extend(body);
        String::from_utf8(self.out).expect("CSV is UTF-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(sig12(0.825_385_365_269_249_9), "0.825385365269");
        assert_eq!(sig12(1.0), "1");
        assert_eq!(sig12(-2.5), "-2.5");
        assert_eq!(sig12(1e3), "1000");
        assert_eq!(sig12(1e-2), "0.01");
        assert_eq!(sig12(123_456_789_012_345.0), "1.23456789012e14");
        assert_eq!(sig12(1.5e-7), "1.5e-7");
        assert_eq!(sig12(0.367_589_557_123_456_7), "0.367589557123");
        // Rounding that carries into the next decade.
        assert_eq!(sig12(9.999_999_999_999_5), "10");
        assert_eq!(sig12(0.0), "0");
        assert_eq!(sig12(f64::INFINITY), "inf");
    }

    #[test]
    fn round_trips_to_twelve_digits() {
        for x in [std::f64::consts::PI, 1.0 / 3.0, 6.02e23, 1.6e-19, 0.1 + 0.2] {
            let back: f64 = sig12(x).parse().unwrap();
            assert!((back - x).abs() <= 5e-12 * x.abs(), "{x}");
        }
    }

    #[test]
    fn table_layout() {
        let mut t = Table::new(&[("sigma_sq", "1".into())], &["a", "b"]);
        t.row(["1", "x, y"]);
        let s = t.finish();
        assert!(s.starts_with("# onebit "));
        assert!(s.ends_with("a,b\n1,\"x, y\"\n"), "{s}");
        assert!(!s.contains('\r'));
    }
}
