//! Table formatting with a fixed, documented precision.

/// Formats a value with 9 significant digits (the precision of the quoted
/// reference tables), in plain decimal notation.
pub fn sig9(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (8 - magnitude).max(0) as usize;
    format!("{v:.decimals$}")
}

/// Right-aligns `s` in a column of width `w`.
pub fn pad(s: &str, w: usize) -> String {
    format!("{s:>w$}")
}
