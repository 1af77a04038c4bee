//! Number formatting shared by all CSV emitters.

/// Formats with 17 significant digits (round-trip exact for `f64`).
pub fn sig17(v: f64) -> String {
    if v.is_finite() {
        format!("{:.16e}", v)
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}
