//! Deterministic float formatting for CSV output.

use std::fmt::Write as _;

/// Significant digits kept in CSV cells.
pub const CSV_DIGITS: usize = 12;

/// Shortest representation of `x` after rounding to 12 significant digits.
///
/// Plain notation is used for magnitudes in [1e-4, 1e12), scientific
/// otherwise; negative zero prints as `0`.
pub fn csv_float(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    // `{:.11e}` rounds to 12 significant digits; reparsing gives the nearest
    // double, which `{}` then prints in its shortest round-trip form.
    let rounded: f64 = format!("{:.*e}", CSV_DIGITS - 1, x).parse().expect("formatted float reparses");
    if rounded == 0.0 {
        return "0".into();
    }
    let a = rounded.abs();
    if (1e-4..1e12).contains(&a) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

/// Row-oriented CSV builder; all numeric cells go through [`csv_float`].
#[derive(Debug, Default)]
pub struct CsvWriter {
    text: String,
}

impl CsvWriter {
    pub fn new(header: &[String]) -> Self {
        let mut w = CsvWriter::default();
        w.text.push_str(&header.join(","));
        w.text.push('\n');
        w
    }

    pub fn row(&mut self, cells: &[Cell<'_>]) {
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            match c {
                Cell::F(x) => self.text.push_str(&csv_float(*x)),
                Cell::U(n) => write!(self.text, "{n}").unwrap(),
                Cell::S(s) => self.text.push_str(s),
            }
        }
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Cell<'a> {
    F(f64),
    U(usize),
    S(&'a str),
}
