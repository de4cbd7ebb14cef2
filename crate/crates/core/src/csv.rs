//! Plain CSV helpers. Numbers are written with 12 significant digits.

use std::fmt::Write as _;

/// `%.12g`-style formatting.
pub fn num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        trim_zeros(s)
    } else {
        let s = format!("{x:.11e}");
        let (mantissa, e) = s.split_once('e').expect("exponent form");
        format!("{}e{e}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        let t = s.trim_end_matches('0').trim_end_matches('.');
        if t == "-0" { "0".into() } else { t.to_string() }
    } else {
        s
    }
}

/// Accumulates rows in memory; fields containing commas or quotes are quoted.
#[derive(Debug, Clone, Default)]
pub struct Table {
    out: String,
    width: usize,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut t = Self { out: String::new(), width: header.len() };
        t.push_fields(header.iter().map(|s| s.to_string()));
        t
    }

    pub fn row(&mut self, fields: impl IntoIterator<Item = String>) {
        self.push_fields(fields);
    }

    fn push_fields(&mut self, fields: impl IntoIterator<Item = String>) {
        let mut n = 0;
        for (i, f) in fields.into_iter().enumerate() {
            if i > 0 {
                self.out.push(',');
            }
            if f.contains([',', '"', '\n']) {
                let _ = write!(self.out, "\"{}\"", f.replace('"', "\"\""));
            } else {
                self.out.push_str(&f);
            }
            n += 1;
        }
        debug_assert!(self.width == 0 || n == self.width, "row width {n} != header {}", self.width);
        self.out.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.out
    }

    pub fn into_string(self) -> String {
        self.out
    }
}
