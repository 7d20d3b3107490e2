//! Numeric rendering used by every report: values are *truncated*, not
//! rounded, to the stated number of decimals (a score of 25/6 = 4.1666…
//! renders as "4.16", a threshold of 2.58578… as "2.585"). All arithmetic
//! stays full-precision internally; truncation happens only at the edge.

/// Truncate toward zero at `decimals` places.
///
/// The tiny positive nudge before truncation absorbs binary-representation
/// artifacts: 4.3_f64 is stored fractionally below 4.3, and a naive
/// `(4.3 * 100).trunc()` would yield 429 ("4.29").
pub fn trunc(value: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    let nudge = if value >= 0.0 { 1e-9 } else { -1e-9 };
    (value * scale + nudge).trunc() / scale
}

/// Render with exactly `decimals` places, truncating.
pub fn fmt_trunc(value: f64, decimals: u32) -> String {
    format!("{:.*}", decimals as usize, trunc(value, decimals))
}

/// Scores (reputation aggregates, final ratings) render at 2 decimals.
pub fn fmt_score(value: f64) -> String {
    fmt_trunc(value, 2)
}

/// Thresholds render at 3 decimals.
pub fn fmt_threshold(value: f64) -> String {
    fmt_trunc(value, 3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncates_instead_of_rounding() {
        assert_eq!(fmt_score(25.0 / 6.0), "4.16"); // not 4.17
        assert_eq!(fmt_score(48.0 / 11.0), "4.36");
        assert_eq!(fmt_threshold(4.0 - 2.0_f64.sqrt()), "2.585"); // not 2.586
        assert_eq!(fmt_threshold(4.0 + 2.0_f64.sqrt()), "5.414");
    }

    #[test]
    fn representation_artifacts_do_not_drop_a_digit() {
        assert_eq!(fmt_score(4.3), "4.30"); // naive trunc gives "4.29"
        assert_eq!(fmt_score(43.0 / 10.0), "4.30");
        assert_eq!(fmt_threshold(2.845), "2.845");
        assert_eq!(fmt_score(0.07), "0.07");
    }

    #[test]
    fn negative_values_truncate_toward_zero() {
        assert_eq!(fmt_score(-4.1666), "-4.16");
        assert_eq!(fmt_trunc(-0.0518, 4), "-0.0518");
    }

    #[test]
    fn exact_values_pass_through() {
        assert_eq!(fmt_score(3.0), "3.00");
        assert_eq!(fmt_score(4.0), "4.00");
        assert_eq!(trunc(5.0, 3), 5.0);
    }
}
