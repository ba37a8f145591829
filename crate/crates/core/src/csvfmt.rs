//! Number formatting shared by every CSV writer.

/// Rounds to `digits` significant digits and prints the shortest decimal
/// representation of the rounded value.
pub fn sig(v: f64, digits: usize) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let rounded: f64 = format!("{:.*e}", digits.saturating_sub(1), v)
        .parse()
        .expect("scientific format round-trips");
    if rounded == 0.0 {
        "0".to_string()
    } else {
        format!("{rounded}")
    }
}

/// Nine significant digits, the precision used by all emitted tables.
pub fn num(v: f64) -> String {
    sig(v, 9)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_significant_digits() {
        assert_eq!(num(0.84), "0.84");
        assert_eq!(num(1.0 / 3.0), "0.333333333");
        assert_eq!(num(-123456.789012), "-123456.789");
        assert_eq!(num(-0.0), "0");
        assert_eq!(num(2.0), "2");
        assert_eq!(sig(7.2249, 3), "7.22");
    }
}
