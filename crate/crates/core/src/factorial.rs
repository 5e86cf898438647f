//! Rising and falling factorial powers, in linear and log domain.

use libm::lgamma;

use crate::error::{Error, Result};

/// `x (x+1) ... (x+n-1)`; the empty product for `n = 0` is 1.
pub fn rising_factorial(x: f64, n: u64) -> Result<f64> {
    let value = (0..n).fold(1.0, |acc, k| acc * (x + k as f64));
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Overflow("rising factorial"))
    }
}

/// `x (x-1) ... (x-n+1)`; the empty product for `n = 0` is 1.
pub fn falling_factorial(x: f64, n: u64) -> Result<f64> {
    let value = (0..n).fold(1.0, |acc, k| acc * (x - k as f64));
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Overflow("falling factorial"))
    }
}

/// `ln x^(n)` for `x > 0`.
pub fn ln_rising_factorial(x: f64, n: u64) -> f64 {
    debug_assert!(x > 0.0);
    if n == 0 {
        return 0.0;
    }
    // Short products are summed directly; lgamma differences lose a few
    // digits to cancellation when x is large relative to n.
    if n <= 64 {
        return (0..n).map(|k| (x + k as f64).ln()).sum();
    }
    lgamma(x + n as f64) - lgamma(x)
}

/// `ln x_(n)` for `x - n + 1 > 0`.
pub fn ln_falling_factorial(x: f64, n: u64) -> f64 {
    debug_assert!(x - n as f64 + 1.0 > 0.0);
    if n == 0 {
        return 0.0;
    }
    if n <= 64 {
        return (0..n).map(|k| (x - k as f64).ln()).sum();
    }
    lgamma(x + 1.0) - lgamma(x - n as f64 + 1.0)
}

/// `ln n!`.
pub fn ln_factorial(n: u64) -> f64 {
    ln_rising_factorial(1.0, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rising_factorial_examples() {
        assert_eq!(rising_factorial(1.0, 4).unwrap(), 24.0);
        assert_eq!(rising_factorial(2.0, 10).unwrap(), 39_916_800.0);
        assert_eq!(rising_factorial(0.8, 1).unwrap(), 0.8);
        assert_eq!(rising_factorial(3.3, 0).unwrap(), 1.0);
    }

    #[test]
    fn falling_factorial_examples() {
        assert_eq!(falling_factorial(5.0, 5).unwrap(), 120.0);
        assert_eq!(falling_factorial(10.0, 2).unwrap(), 90.0);
        assert_eq!(falling_factorial(3.5, 2).unwrap(), 8.75);
        assert_eq!(falling_factorial(7.0, 0).unwrap(), 1.0);
    }

    #[test]
    fn overflow_points_to_log_domain() {
        let err = rising_factorial(1.0, 200).unwrap_err();
        assert!(matches!(err, Error::Overflow(_)));
        assert!(err.to_string().contains("log-domain"));
        assert!(falling_factorial(400.0, 300).is_err());
    }

    #[test]
    fn log_variants_agree_with_linear() {
        for &(x, n) in &[(0.8, 10u64), (2.0, 10), (1.05, 100), (0.5, 150)] {
            let linear = rising_factorial(x, n).unwrap();
            assert!(
                (ln_rising_factorial(x, n) - linear.ln()).abs()
                    < 1e-11 * linear.ln().abs().max(1.0)
            );
        }
        for &(x, n) in &[(10.0, 4u64), (100.0, 80), (170.0, 170)] {
            let linear = falling_factorial(x, n).unwrap();
            assert!(
                (ln_falling_factorial(x, n) - linear.ln()).abs()
                    < 1e-11 * linear.ln().abs().max(1.0)
            );
        }
    }

    #[test]
    fn log_domain_handles_large_n() {
        // ln 1000! from Stirling's series.
        let n = 1000.0_f64;
        let stirling =
            n * n.ln() - n + 0.5 * (2.0 * std::f64::consts::PI * n).ln() + 1.0 / (12.0 * n)
                - 1.0 / (360.0 * n.powi(3));
        assert!((ln_factorial(1000) - stirling).abs() < 1e-9);
        assert!(ln_rising_factorial(0.8, 1000).is_finite());
    }
}
