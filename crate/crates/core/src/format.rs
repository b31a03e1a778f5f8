//! Fixed float formatting for every file the crate writes.
//!
//! Values are rounded to 12 significant digits and then printed in the
//! shortest form that reads back to the rounded value, so identical
//! computations always produce identical bytes.

/// Significant digits kept in written output.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// `v` rounded to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return if v == 0.0 { 0.0 } else { v };
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v)
        .parse()
        .expect("scientific notation always parses")
}

/// Text form of `v` after rounding.
pub fn fmt_f64(v: f64) -> String {
    let r = round_sig(v);
    if r.is_nan() {
        "NaN".to_string()
    } else if r.is_infinite() {
        if r > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{r}")
    }
}

/// Rounds every number inside a JSON document in place.
pub fn round_json(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Number(n) => {
            if n.is_f64() {
                if let Some(f) = n.as_f64().map(round_sig).and_then(serde_json::Number::from_f64) {
                    *n = f;
                }
            }
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(round_json),
        serde_json::Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}
