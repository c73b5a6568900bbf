//! Deterministic number formatting for output files.

/// Round to at most 9 significant decimal digits.
///
/// Every float written to an output file passes through this so that
/// serialized artifacts are byte-reproducible and diffs stay readable.
/// Idempotent: a value that already fits in 9 significant digits is
/// returned unchanged.
pub(crate) fn sig9(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.8e}").parse().unwrap_or(v)
}

#[cfg(test)]
mod tests {
    use super::sig9;

    #[test]
    fn short_decimals_pass_through() {
        assert_eq!(sig9(57.2), 57.2);
        assert_eq!(sig9(10.0), 10.0);
        assert_eq!(sig9(0.0), 0.0);
        assert_eq!(sig9(-0.5), -0.5);
    }

    #[test]
    fn long_decimals_round_to_nine_digits() {
        assert_eq!(sig9(0.6321205588285577), 0.632120559);
        assert_eq!(sig9(1234567891.23), 1234567890.0);
    }

    #[test]
    fn idempotent() {
        for v in [0.1, 3.0f64.sqrt(), 1.0 / 3.0, 99999.99999] {
            assert_eq!(sig9(sig9(v)), sig9(v));
        }
    }
}
