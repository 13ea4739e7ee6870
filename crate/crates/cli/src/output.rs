//! Tables and their CSV/JSON rendering with fixed number formatting.

use serde_json::{Map, Number, Value};

/// One table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Num(f64),
    Int(u64),
    Bool(bool),
    Empty,
}

impl Cell {
    pub fn opt(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }

    fn csv(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Num(v) => format_g(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Text(s) => Value::String(s.clone()),
            // Round-trip through the fixed format so CSV and JSON agree;
            // infinities and NaN have no JSON number form.
            Cell::Num(v) => {
                let text = format_g(*v);
                match text.parse::<f64>().ok().and_then(Number::from_f64) {
                    Some(n) => Value::Number(n),
                    None => Value::String(text),
                }
            }
            Cell::Int(v) => Value::Number((*v).into()),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Empty => Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Comma-separated, header first, `\n` line ends.
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Array of objects keyed by the header, pretty-printed.
    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self.header.iter().cloned().zip(row.iter().map(Cell::json)).collect();
                Value::Object(obj)
            })
            .collect();
        let mut text = serde_json::to_string_pretty(&Value::Array(rows)).expect("table serializes");
        text.push('\n');
        text
    }
}

/// Formats like C's `%.10g`: ten significant digits, trailing zeros
/// removed, exponent form outside `1e-4 ≤ |v| < 1e10`.
pub fn format_g(v: f64) -> String {
    const DIGITS: i32 = 10;
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= DIGITS {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        trim_zeros(&format!("{:.*}", (DIGITS - 1 - exp) as usize, v)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (-2.5, "-2.5"),
            (0.1, "0.1"),
            (1.0 / 3.0, "0.3333333333"),
            (2.0 / 3.0 * 1e-5, "6.666666667e-06"),
            (123456789.0, "123456789"),
            (12345678901.0, "1.23456789e+10"),
            (9999999999.5, "1e+10"),
            (0.0001, "0.0001"),
            (0.00012345, "0.00012345"),
            (1e-300, "1e-300"),
            (f64::NEG_INFINITY, "-inf"),
            (f64::NAN, "nan"),
            (6.658211482751795, "6.658211483"),
        ];
        for (v, want) in cases {
            assert_eq!(format_g(v), want, "{v:e}");
        }
    }

    #[test]
    fn csv_and_json_agree() {
        let mut t = Table::new(&["name", "value", "count", "ok", "missing"]);
        t.push(vec![Cell::Text("qpsk".into()), Cell::Num(1.0 / 3.0), Cell::Int(4), Cell::Bool(true), Cell::Empty]);
        t.push(vec![Cell::Text("ideal".into()), Cell::Num(f64::NEG_INFINITY), Cell::Int(0), Cell::Bool(false), Cell::opt(None)]);
        assert_eq!(t.to_csv(), "name,value,count,ok,missing\nqpsk,0.3333333333,4,true,\nideal,-inf,0,false,\n");
        let v: Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(v[0]["value"], serde_json::json!(0.3333333333));
        assert_eq!(v[1]["value"], serde_json::json!("-inf"));
        assert_eq!(v[1]["missing"], Value::Null);
    }
}
