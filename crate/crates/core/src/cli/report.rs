//! Report rows and their two output formats.
//!
//! `records` prints one JSON object per line with exactly the fields of [`Row`], in this
//! order: `quantity`, `value`, `oracle`, `abs_error`, `tol`, `pass`, `anchor`, `timing`.
//! Non-finite numbers are written as `null`.

use std::fmt::Write as _;

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub quantity: String,
    pub value: Option<f64>,
    pub oracle: Option<f64>,
    pub abs_error: Option<f64>,
    pub tol: Option<f64>,
    pub pass: bool,
    /// Label of the result the check belongs to.
    pub anchor: String,
    /// Wall-clock seconds; only filled when timings are requested.
    pub timing: Option<f64>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl Row {
    /// A value compared against an oracle; passes iff `|value − oracle| ≤ tol`.
    pub fn check(quantity: impl Into<String>, value: f64, oracle: f64, tol: f64, anchor: &str) -> Row {
        let err = (value - oracle).abs();
        Row {
            quantity: quantity.into(),
            value: finite(value),
            oracle: finite(oracle),
            abs_error: finite(err),
            tol: Some(tol),
            pass: err <= tol,
            anchor: anchor.to_string(),
            timing: None,
        }
    }

    /// A computed value with no oracle; informational, always passes if finite.
    pub fn value(quantity: impl Into<String>, value: f64, anchor: &str) -> Row {
        Row {
            quantity: quantity.into(),
            value: finite(value),
            oracle: None,
            abs_error: None,
            tol: None,
            pass: value.is_finite(),
            anchor: anchor.to_string(),
            timing: None,
        }
    }

    /// A computation that did not produce a value.
    pub fn failure(quantity: impl Into<String>, anchor: &str) -> Row {
        Row {
            quantity: quantity.into(),
            value: None,
            oracle: None,
            abs_error: None,
            tol: None,
            pass: false,
            anchor: anchor.to_string(),
            timing: None,
        }
    }
}

pub fn record_line(row: &Row) -> String {
    serde_json::to_string(row).expect("rows serialize")
}

fn num(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.6e}"),
        None => "-".to_string(),
    }
}

/// Aligned text table with a pass count footer.
pub fn table(rows: &[Row], with_timing: bool) -> String {
    let mut cells: Vec<Vec<String>> = vec![["quantity", "value", "oracle", "abs_error", "tol", "pass", "anchor"]
        .iter()
        .map(|s| s.to_string())
        .collect()];
    if with_timing {
        cells[0].push("timing".into());
    }
    for r in rows {
        let mut line = vec![
            r.quantity.clone(),
            num(r.value),
            num(r.oracle),
            num(r.abs_error),
            num(r.tol),
            if r.pass { "ok" } else { "FAIL" }.to_string(),
            r.anchor.clone(),
        ];
        if with_timing {
            line.push(r.timing.map_or("-".into(), |t| format!("{t:.2}s")));
        }
        cells.push(line);
    }
    let ncol = cells[0].len();
    let widths: Vec<usize> =
        (0..ncol).map(|c| cells.iter().map(|l| l[c].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for line in &cells {
        let mut s = String::new();
        for (c, cell) in line.iter().enumerate() {
            let pad = widths[c] - cell.chars().count();
            if c + 1 == ncol {
                s.push_str(cell);
            } else {
                s.push_str(cell);
                s.push_str(&" ".repeat(pad + 2));
            }
        }
        out.push_str(s.trim_end());
        out.push('\n');
    }
    let passed = rows.iter().filter(|r| r.pass).count();
    let _ = writeln!(out, "{passed}/{} checks passed", rows.len());
    out
}
