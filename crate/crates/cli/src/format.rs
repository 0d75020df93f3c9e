//! CSV emission with fixed numeric formatting.
//!
//! Floats are written with 10 significant digits; the standard formatter rounds
//! the exact binary value half-to-even, so output is byte-stable for identical
//! arithmetic.

use std::fmt::Write;

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Formats a float rounded to 10 significant digits, trailing zeros dropped;
/// `""` for NaN.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        return String::new();
    }
    if x == 0.0 {
        return "0".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.9e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..10).contains(&exp) {
        let decimals = (9 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_owned()
    } else {
        let (mantissa, exp) = sci.split_at(sci.find('e').unwrap());
        format!("{}{exp}", trim_zeros(mantissa))
    }
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// A header, `#` comment lines and string cells.
#[derive(Debug, Clone, Default)]
pub struct CsvTable {
    comments: Vec<String>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        CsvTable {
            comments: Vec::new(),
            header: header.iter().map(|h| h.as_ref().to_owned()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, text: &str) {
        self.comments.extend(text.lines().map(str::to_owned));
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match header");
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            if c.is_empty() {
                out.push_str("#\n");
            } else {
                writeln!(out, "# {c}").unwrap();
            }
        }
        writeln!(out, "{}", self.header.join(",")).unwrap();
        for row in &self.rows {
            writeln!(out, "{}", row.join(",")).unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_significant_digits() {
        assert_eq!(num(0.3842160607232643), "0.3842160607");
        assert_eq!(num(1.0), "1");
        assert_eq!(num(6.3), "6.3");
        assert_eq!(num(123456.789), "123456.789");
        assert_eq!(num(9.99999999999), "10");
        assert_eq!(num(1.25e-7), "1.25e-7");
        assert_eq!(num(3e12), "3e12");
        assert_eq!(num(1234567890123.0), "1.23456789e12");
        assert_eq!(num(0.0), "0");
        assert_eq!(num(f64::NAN), "");
        assert_eq!(num(-0.5), "-0.5");
        assert_eq!(num(0.01), "0.01");
    }

    #[test]
    fn renders_comments_then_header() {
        let mut t = CsvTable::new(&["a", "b"]);
        t.comment("seed = 1\n\nx");
        t.push(vec!["1".into(), "2".into()]);
        assert_eq!(t.render(), "# seed = 1\n#\n# x\na,b\n1,2\n");
    }
}
