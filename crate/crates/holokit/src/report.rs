//! Report rows, CSV/JSON emission and float formatting.

use serde_json::Value;

/// Float with 17 significant digits as a JSON number (`null` when not finite).
pub fn num17(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    serde_json::from_str(&fmt17(x)).expect("formatted float parses")
}

/// `x` formatted with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{:.16e}", x)
}

/// One line of a residual table: `lhs` compared against `rhs`, with `margin`
/// positive when the checked inequality holds.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ResidualRow {
    pub id: usize,
    pub quantity: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

/// CSV with columns `sample_id,quantity,lhs,rhs,margin`.
pub fn residual_csv(rows: &[ResidualRow]) -> String {
    let mut out = String::from("sample_id,quantity,lhs,rhs,margin\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{},{}\n", r.id, r.quantity, fmt17(r.lhs), fmt17(r.rhs), fmt17(r.margin)));
    }
    out
}
