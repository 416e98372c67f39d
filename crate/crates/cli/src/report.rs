//! Output model shared by all subcommands: one or more tables for CSV and
//! text output, plus a JSON document.

use std::fmt::Write as _;

use clap::ValueEnum;
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Text,
}

/// Six significant digits, fixed notation where reasonable.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..5).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // Rounding can carry into a new leading digit (9.999995 → 10.00000).
        let rounded: f64 = s.parse().unwrap_or(x);
        if decimals > 0 && rounded.abs().log10().floor() as i32 > exp {
            return format!("{x:.prec$}", prec = decimals - 1);
        }
        s
    } else {
        format!("{x:.5e}")
    }
}

/// `x` rounded to what [`sig6`] prints, as a JSON number.
pub fn num(x: f64) -> Value {
    sig6(x)
        .parse::<f64>()
        .map(Value::from)
        .unwrap_or(Value::Null)
}

pub fn opt_num(x: Option<f64>) -> Value {
    x.map(num).unwrap_or(Value::Null)
}

pub fn cell(x: f64) -> String {
    sig6(x)
}

pub fn opt_cell(x: Option<f64>) -> String {
    x.map(sig6).unwrap_or_default()
}

pub fn opt_int(x: Option<usize>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

#[derive(Clone, Debug)]
pub struct Table {
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(title: impl Into<String>, header: &[&str]) -> Self {
        Self {
            title: title.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_header(title: impl Into<String>, header: Vec<String>) -> Self {
        Self {
            title: title.into(),
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub tables: Vec<Table>,
    pub json: Value,
    /// Set when a solver reported a breakdown; maps to exit code 3.
    pub unstable: bool,
}

impl Report {
    pub fn render(&self, format: Format) -> anyhow::Result<String> {
        match format {
            Format::Json => Ok(serde_json::to_string_pretty(&self.json)? + "\n"),
            Format::Csv => self.csv(),
            Format::Text => Ok(self.text()),
        }
    }

    fn csv(&self) -> anyhow::Result<String> {
        let mut out = String::new();
        let sections = self.tables.len() > 1;
        for (i, t) in self.tables.iter().enumerate() {
            if sections {
                if i > 0 {
                    out.push('\n');
                }
                writeln!(out, "# {}", t.title)?;
            }
            let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
            w.write_record(&t.header)?;
            for r in &t.rows {
                w.write_record(r)?;
            }
            out.push_str(&String::from_utf8(w.into_inner()?)?);
        }
        Ok(out)
    }

    fn text(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.tables.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "{}", t.title);
            let mut widths: Vec<usize> = t.header.iter().map(|h| h.chars().count()).collect();
            for r in &t.rows {
                for (w, c) in widths.iter_mut().zip(r) {
                    *w = (*w).max(c.chars().count());
                }
            }
            let line = |cells: &[String]| {
                let padded: Vec<String> = cells
                    .iter()
                    .zip(&widths)
                    .map(|(c, &w)| format!("{c:>w$}"))
                    .collect();
                padded.join("  ").trim_end().to_string()
            };
            let _ = writeln!(out, "{}", line(&t.header));
            for r in &t.rows {
                let cells: Vec<String> = r
                    .iter()
                    .map(|c| if c.is_empty() { "-".into() } else { c.clone() })
                    .collect();
                let _ = writeln!(out, "{}", line(&cells));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.431100123), "0.431100");
        assert_eq!(sig6(5.705781), "5.70578");
        assert_eq!(sig6(-0.0163701), "-0.0163701");
        assert_eq!(sig6(123456.7), "1.23457e5");
        assert_eq!(sig6(3.2e-7), "3.20000e-7");
        assert_eq!(sig6(9.9999996), "10.0000");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(0.000335463), "0.000335463");
        assert_eq!(sig6(0.0009999996), "0.00100000");
    }

    #[test]
    fn json_numbers_are_rounded() {
        assert_eq!(num(0.2807255123), Value::from(0.280726));
        assert_eq!(opt_num(None), Value::Null);
    }

    #[test]
    fn csv_sections_only_for_several_tables() {
        let mut a = Table::new("a", &["x"]);
        a.push(vec!["1".into()]);
        let one = Report {
            tables: vec![a.clone()],
            json: Value::Null,
            unstable: false,
        };
        assert_eq!(one.render(Format::Csv).unwrap(), "x\n1\n");
        let two = Report {
            tables: vec![a.clone(), a],
            json: Value::Null,
            unstable: false,
        };
        assert_eq!(two.render(Format::Csv).unwrap(), "# a\nx\n1\n\n# a\nx\n1\n");
    }
}
