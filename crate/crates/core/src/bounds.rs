//! Tail bounds for `P(Y >= t)` driven by an approximate zero-bias coupling
//! with `Y* - Y <= c`, remainder constants `B1`, `B2` and variance `sigma^2`,
//! plus the closed-form constants for the Ewens-Hoeffding application.
//!
//! ```text
//! bound 1:  exp(-t (t - 2 B1) / (2 (sigma^2 + B2 + c t)))
//! bound 2:  exp(-t (t - 2 B1) / (10 (sigma^2 + B2) / 3 + c t))        needs |Y* - Y| <= c
//! bound 3:  exp(-(x / c) (ln x - ln ln x - (sigma^2 + B2) / c))       x = t - B1 > e
//!        <= exp(-(x / (2c)) (ln x - 2 (sigma^2 + B2) / c))
//! ```
//!
//! Every reported value is capped at 1. Left tails reuse the same formulas
//! with `Y -> -Y` and `R -> -R`.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Everything the three bounds consume. `b1` and `b2` are already divided
/// by `lambda`; `lambda` is carried for reporting only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub sigma2: f64,
    pub b1: f64,
    pub b2: f64,
    pub c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

impl BoundInputs {
    pub fn new(sigma2: f64, b1: f64, b2: f64, c: f64) -> Result<Self> {
        let inputs = Self {
            sigma2,
            b1,
            b2,
            c,
            lambda: None,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must lie in (0, 1), got {lambda}"
            )));
        }
        self.lambda = Some(lambda);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma2", self.sigma2), ("b1", self.b1), ("b2", self.b2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "c must be finite and positive, got {}",
                self.c
            )));
        }
        Ok(())
    }

    fn variance_term(&self) -> f64 {
        self.sigma2 + self.b2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WhichBound {
    One,
    Two,
    Three,
}

/// `exp(-numerator / denominator)` capped at 1; a nonpositive numerator
/// means the bound is vacuous.
fn capped_exp(numerator: f64, denominator: f64) -> f64 {
    if numerator <= 0.0 {
        return 1.0;
    }
    (-numerator / denominator).exp().min(1.0)
}

pub fn bound1(t: f64, inputs: &BoundInputs) -> f64 {
    capped_exp(
        t * (t - 2.0 * inputs.b1),
        2.0 * (inputs.variance_term() + inputs.c * t),
    )
}

pub fn bound2(t: f64, inputs: &BoundInputs) -> f64 {
    capped_exp(
        t * (t - 2.0 * inputs.b1),
        10.0 * inputs.variance_term() / 3.0 + inputs.c * t,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound3 {
    pub line1: f64,
    pub line2: f64,
}

/// Both lines of bound 3, or `None` outside its domain `t > e + B1`.
pub fn bound3(t: f64, inputs: &BoundInputs) -> Option<Bound3> {
    let x = t - inputs.b1;
    if !(x > E) {
        return None;
    }
    let c = inputs.c;
    let k = inputs.variance_term() / c;
    let ln_x = x.ln();
    let exponent1 = (x / c) * (ln_x - ln_x.ln() - k);
    let exponent2 = (x / (2.0 * c)) * (ln_x - 2.0 * k);
    Some(Bound3 {
        line1: (-exponent1).exp().min(1.0),
        line2: (-exponent2).exp().min(1.0),
    })
}

/// Smallest `t` beyond which a bound can be informative: `2 B1` for bounds
/// 1 and 2, `e + B1` for bound 3 (its domain).
pub fn effective_threshold(inputs: &BoundInputs, which: WhichBound) -> f64 {
    match which {
        WhichBound::One | WhichBound::Two => 2.0 * inputs.b1,
        WhichBound::Three => inputs.b1.max(E + inputs.b1),
    }
}

/// The `R = 0` case (`B1 = B2 = 0`), which reduces the three bounds to the
/// classical zero-bias ones.
pub fn r_zero_specialization(sigma2: f64, c: f64) -> Result<BoundInputs> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma2 must be positive, got {sigma2}"
        )));
    }
    BoundInputs::new(sigma2, 0.0, 0.0, c)
}

/// Bound values on a grid of `t`. Bound 3 entries are `None` outside its
/// domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub t_values: Vec<f64>,
    pub bound1: Vec<f64>,
    pub bound2: Vec<f64>,
    pub bound3_line1: Vec<Option<f64>>,
    pub bound3_line2: Vec<Option<f64>>,
}

impl TailCurve {
    pub fn evaluate(t_values: &[f64], inputs: &BoundInputs) -> Result<Self> {
        inputs.validate()?;
        if let Some(t) = t_values.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "t values must be finite and >= 0, got {t}"
            )));
        }
        let b3: Vec<Option<Bound3>> = t_values.iter().map(|&t| bound3(t, inputs)).collect();
        Ok(Self {
            t_values: t_values.to_vec(),
            bound1: t_values.iter().map(|&t| bound1(t, inputs)).collect(),
            bound2: t_values.iter().map(|&t| bound2(t, inputs)).collect(),
            bound3_line1: b3.iter().map(|b| b.map(|b| b.line1)).collect(),
            bound3_line2: b3.iter().map(|b| b.map(|b| b.line2)).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.t_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_values.is_empty()
    }
}

/// `kappa_{theta,n,1} = sqrt(theta^2 n_(2) / (theta+n-1)_(2) + theta n / (theta+n-1))`.
pub fn kappa1(theta: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "kappa1 needs n >= 2, got {n}"
        )));
    }
    let nf = n as f64;
    let m = theta + nf - 1.0;
    let ratio = theta * theta * (nf * (nf - 1.0)) / (m * (m - 1.0));
    Ok((ratio + theta * nf / m).sqrt())
}

/// `kappa_{theta,n,2} = sqrt(theta^4 n_(4)/(theta+n-1)_(4) + 4 theta^3 n_(3)/(theta+n-1)_(3)
/// + 2 theta^2 n_(2)/(theta+n-1)_(2))`.
pub fn kappa2(theta: f64, n: usize) -> Result<f64> {
    if n < 4 {
        return Err(Error::InvalidParameter(format!(
            "kappa2 needs n >= 4 for the falling factorial n_(4), got {n}"
        )));
    }
    let nf = n as f64;
    let m = theta + nf - 1.0;
    // Ratios of falling factorials, built up one factor at a time.
    let mut ratio = 1.0;
    let mut terms = [0.0; 4];
    for (k, term) in terms.iter_mut().enumerate() {
        ratio *= (nf - k as f64) / (m - k as f64);
        *term = ratio;
    }
    let value =
        theta.powi(4) * terms[3] + 4.0 * theta.powi(3) * terms[2] + 2.0 * theta * theta * terms[1];
    Ok(value.sqrt())
}

fn require_application_range(n: usize) -> Result<()> {
    if n < 6 {
        return Err(Error::InvalidParameter(format!(
            "the Ewens-Hoeffding constants need n >= 6, got {n}"
        )));
    }
    Ok(())
}

/// Closed-form bound on `B1`: `(6n + 4.8 theta) M` in general, and the
/// constant-order bound when `|R|` and `e^{sY}` are negatively correlated.
pub fn theoretical_b1(n: usize, theta: f64, m: f64, negatively_correlated: bool) -> Result<f64> {
    require_application_range(n)?;
    let nf = n as f64;
    if !negatively_correlated {
        return Ok((6.0 * nf + 4.8 * theta) * m);
    }
    let shifted = theta + nf - 1.0;
    Ok(theta * m * (3.6 * nf + 2.4 * theta - 3.0) / shifted
        + theta * theta * nf * m / (2.0 * shifted * (shifted - 1.0)))
}

/// `B2 <= (3 kappa1 + 1.2 theta + 1.2 (kappa1 (theta + 1) + kappa2) / n) M sigma`.
pub fn theoretical_b2(n: usize, theta: f64, m: f64, sigma: f64) -> Result<f64> {
    require_application_range(n)?;
    if !(sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be >= 0, got {sigma}"
        )));
    }
    let k1 = kappa1(theta, n)?;
    let k2 = kappa2(theta, n)?;
    let nf = n as f64;
    Ok((3.0 * k1 + 1.2 * theta + 1.2 * (k1 * (theta + 1.0) + k2) / nf) * m * sigma)
}

/// Almost-sure bound `|E[R | Y]| <= (10n + 8 theta) M / (n - 1)`.
pub fn remainder_sup_bound(n: usize, theta: f64, m: f64) -> f64 {
    let nf = n as f64;
    (10.0 * nf + 8.0 * theta) * m / (nf - 1.0)
}

/// `E|R| <= theta M (12n + 8 theta - 10) / ((n-1)(theta+n-1)) + 2 theta^2 M / (theta+n-1)_(2)`.
pub fn remainder_mean_abs_bound(n: usize, theta: f64, m: f64) -> f64 {
    let nf = n as f64;
    let shifted = theta + nf - 1.0;
    theta * m * (12.0 * nf + 8.0 * theta - 10.0) / ((nf - 1.0) * shifted)
        + 2.0 * theta * theta * m / (shifted * (shifted - 1.0))
}

/// `|E Y R| <= (10 kappa1 + 4 theta + 4 (kappa1 (theta+1) + kappa2) / n) M sigma / (n - 1)`.
pub fn remainder_covariance_bound(n: usize, theta: f64, m: f64, sigma: f64) -> Result<f64> {
    let k1 = kappa1(theta, n)?;
    let k2 = kappa2(theta, n)?;
    let nf = n as f64;
    Ok((10.0 * k1 + 4.0 * theta + 4.0 * (k1 * (theta + 1.0) + k2) / nf) * m * sigma / (nf - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorial::falling_factorial;

    fn inputs(sigma2: f64, b1: f64, b2: f64, c: f64) -> BoundInputs {
        BoundInputs::new(sigma2, b1, b2, c).unwrap()
    }

    fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
        (0..points)
            .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
            .collect()
    }

    #[test]
    fn validation() {
        assert!(BoundInputs::new(1.0, 0.0, 0.0, 0.0).is_err());
        assert!(BoundInputs::new(-1.0, 0.0, 0.0, 1.0).is_err());
        assert!(BoundInputs::new(1.0, f64::NAN, 0.0, 1.0).is_err());
        assert!(inputs(1.0, 0.0, 0.0, 1.0).with_lambda(1.0).is_err());
        assert!(r_zero_specialization(0.0, 1.0).is_err());
    }

    #[test]
    fn bound1_examples() {
        let i = inputs(1.0, 0.0, 0.0, 1.0);
        assert_eq!(bound1(0.0, &i), 1.0);
        assert!((bound1(1.0, &i) - (-0.25f64).exp()).abs() < 1e-15);
        let j = inputs(1.0, 2.0, 0.5, 1.0);
        for t in grid(0.0, 4.0, 50) {
            assert_eq!(bound1(t, &j), 1.0);
        }
        assert_eq!(bound1(0.0, &inputs(0.0, 0.0, 0.0, 1.0)), 1.0);
    }

    #[test]
    fn bound2_examples_and_crossover() {
        let i = inputs(1.0, 0.0, 0.0, 1.0);
        assert_eq!(bound2(0.0, &i), 1.0);
        assert!((bound2(1.0, &i) - (-3.0f64 / 13.0).exp()).abs() < 1e-15);

        // bound2 <= bound1 exactly when t >= 4 (sigma^2 + B2) / (3c).
        for &(s2, b1, b2, c) in &[
            (1.0, 0.0, 0.0, 1.0),
            (20.0, 0.7, 3.0, 2.5),
            (5.0, 0.1, 0.0, 0.3),
        ] {
            let i = inputs(s2, b1, b2, c);
            let crossover = 4.0 * (s2 + b2) / (3.0 * c);
            for t in grid(2.0 * b1 + 1e-3, 4.0 * crossover + 10.0, 400) {
                if (t - crossover).abs() < 1e-6 {
                    continue;
                }
                let (b1v, b2v) = (bound1(t, &i), bound2(t, &i));
                if b1v < 1.0 && b2v < 1.0 && b1v > 0.0 {
                    assert_eq!(b2v <= b1v, t >= crossover, "t={t} crossover={crossover}");
                }
            }
        }
    }

    #[test]
    fn bound3_examples() {
        let i = inputs(1.0, 0.0, 0.0, 1.0);
        let t = E * E;
        let b = bound3(t, &i).unwrap();
        let expected = (-(E * E) * (1.0 - 2.0f64.ln())).exp();
        assert!((b.line1 - expected).abs() < 1e-14);
        assert!(bound3(5.0 + E, &inputs(1.0, 5.0, 0.0, 1.0)).is_none());
        assert!(bound3(E, &i).is_none());
        assert!(bound3(E + 1e-9, &i).is_some());

        for &(s2, b1, b2, c) in &[
            (1.0, 0.0, 0.0, 1.0),
            (2000.0, 0.74, 2.1, 72.0),
            (23.0, 1.3, 4.6, 54.0),
        ] {
            let i = inputs(s2, b1, b2, c);
            for t in grid(b1 + E + 1e-6, b1 + E + 5000.0, 100) {
                let b = bound3(t, &i).unwrap();
                assert!(b.line1 <= b.line2 + 1e-15, "t={t}");
                assert!(b.line1 <= 1.0 && b.line2 <= 1.0);
            }
        }
    }

    #[test]
    fn thresholds() {
        let zero = inputs(1.0, 0.0, 0.0, 1.0);
        assert_eq!(effective_threshold(&zero, WhichBound::One), 0.0);
        assert_eq!(effective_threshold(&zero, WhichBound::Two), 0.0);
        assert_eq!(effective_threshold(&zero, WhichBound::Three), E);
        let i = inputs(1.0, 0.74, 0.0, 1.0);
        assert!((effective_threshold(&i, WhichBound::One) - 1.48).abs() < 1e-15);
    }

    #[test]
    fn r_zero_curves() {
        let r0 = r_zero_specialization(4.0, 2.0).unwrap();
        assert_eq!(bound1(0.0, &r0), 1.0);
        let direct = inputs(4.0, 0.0, 0.0, 2.0);
        for t in grid(0.0, 50.0, 101) {
            assert_eq!(bound1(t, &r0), bound1(t, &direct));
            assert_eq!(bound2(t, &r0), bound2(t, &direct));
        }
        // Smaller c gives a smaller bound.
        let smaller = r_zero_specialization(4.0, 0.5).unwrap();
        for t in grid(0.0, 50.0, 101) {
            assert!(bound1(t, &smaller) <= bound1(t, &r0));
        }
    }

    #[test]
    fn monotone_in_t_beyond_threshold() {
        for &(s2, b1, b2, c) in &[
            (1.0, 0.0, 0.0, 1.0),
            (2000.0, 0.74, 2.1, 72.0),
            (23.0, 1.3, 4.6, 54.0),
            (0.5, 3.0, 0.0, 0.1),
        ] {
            let i = inputs(s2, b1, b2, c);
            let ts = grid(effective_threshold(&i, WhichBound::One), 5000.0, 2000);
            for w in ts.windows(2) {
                assert!(bound1(w[1], &i) <= bound1(w[0], &i));
                assert!(bound2(w[1], &i) <= bound2(w[0], &i));
            }
            let ts = grid(
                effective_threshold(&i, WhichBound::Three) + 1e-9,
                5000.0,
                2000,
            );
            for w in ts.windows(2) {
                let (a, b) = (bound3(w[0], &i).unwrap(), bound3(w[1], &i).unwrap());
                assert!(b.line1 <= a.line1 && b.line2 <= a.line2, "t={}", w[1]);
            }
        }
    }

    #[test]
    fn monotone_in_constants() {
        let base = (10.0, 0.5, 1.0, 2.0);
        let ts = grid(0.0, 300.0, 301);
        let bumped = [
            (20.0, 0.5, 1.0, 2.0),
            (10.0, 1.5, 1.0, 2.0),
            (10.0, 0.5, 5.0, 2.0),
            (10.0, 0.5, 1.0, 4.0),
        ];
        let lo = inputs(base.0, base.1, base.2, base.3);
        for (k, &(s2, b1, b2, c)) in bumped.iter().enumerate() {
            let hi = inputs(s2, b1, b2, c);
            for &t in &ts {
                assert!(bound1(t, &lo) <= bound1(t, &hi));
                assert!(bound2(t, &lo) <= bound2(t, &hi));
                // Bound 3 is monotone in sigma^2, B1 and B2 but not in c.
                if k < 3 {
                    if let (Some(a), Some(b)) = (bound3(t, &lo), bound3(t, &hi)) {
                        assert!(a.line1 <= b.line1 && a.line2 <= b.line2);
                    }
                }
            }
        }
    }

    #[test]
    fn bound3_is_not_monotone_in_c() {
        // x = e^5, sigma^2 + B2 = 10: raising c from 3 to 4 tightens line 1.
        let x = 5.0f64.exp();
        let a = bound3(x, &inputs(10.0, 0.0, 0.0, 3.0)).unwrap();
        let b = bound3(x, &inputs(10.0, 0.0, 0.0, 4.0)).unwrap();
        assert!(b.line1 < a.line1);
    }

    #[test]
    fn kappa_values() {
        for n in [2usize, 5, 10, 1000] {
            assert!((kappa1(1.0, n).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        }
        for n in [4usize, 6, 10, 1000] {
            assert!((kappa2(1.0, n).unwrap() - 7f64.sqrt()).abs() < 1e-12);
        }
        assert!((kappa1(2.0, 10).unwrap() - (56.0f64 / 11.0).sqrt()).abs() < 1e-14);
        assert!(kappa1(1e-12, 10).unwrap() < 1e-5);
        assert!(kappa2(1e-12, 10).unwrap() < 1e-5);
        assert!(kappa1(1.0, 1).is_err());
        assert!(kappa2(1.0, 3).is_err());

        // Second coding of kappa2 through explicit falling factorials.
        let (theta, n) = (2.0, 10usize);
        let nf = n as f64;
        let m = theta + nf - 1.0;
        let ff = |x: f64, k: u64| falling_factorial(x, k).unwrap();
        let direct = (theta.powi(4) * ff(nf, 4) / ff(m, 4)
            + 4.0 * theta.powi(3) * ff(nf, 3) / ff(m, 3)
            + 2.0 * theta.powi(2) * ff(nf, 2) / ff(m, 2))
        .sqrt();
        assert!((kappa2(theta, n).unwrap() - direct).abs() < 1e-13);
    }

    #[test]
    fn theoretical_b1_values() {
        assert!((theoretical_b1(1000, 1.0, 1.0, false).unwrap() - 6004.8).abs() < 1e-9);
        let neg = theoretical_b1(1000, 1.0, 1.0, true).unwrap();
        let expected = 3599.4 / 1000.0 + 1000.0 / (2.0 * 1000.0 * 999.0);
        assert!((neg - expected).abs() < 1e-12);
        assert!((neg - 3.5999).abs() < 1e-4);
        assert_eq!(theoretical_b1(50, 2.0, 0.0, false).unwrap(), 0.0);
        assert_eq!(theoretical_b1(50, 2.0, 0.0, true).unwrap(), 0.0);
        assert!(theoretical_b1(5, 1.0, 1.0, false).is_err());
        for n in 6..60 {
            for k in 1..=40 {
                let theta = n as f64 * k as f64 / 40.0;
                assert!(
                    theoretical_b1(n, theta, 1.0, true).unwrap()
                        <= theoretical_b1(n, theta, 1.0, false).unwrap()
                );
            }
        }
    }

    #[test]
    fn theoretical_b2_values() {
        assert_eq!(theoretical_b2(10, 2.0, 0.0, 3.0).unwrap(), 0.0);
        let large = theoretical_b2(1_000_000, 1.0, 1.0, 1.0).unwrap();
        assert!((large - (3.0 * 2f64.sqrt() + 1.2)).abs() < 1e-4);
        // Independent recoding.
        let (n, theta) = (10usize, 2.0f64);
        let nf = n as f64;
        let m = theta + nf - 1.0;
        let k1 = (theta * theta * nf * (nf - 1.0) / (m * (m - 1.0)) + theta * nf / m).sqrt();
        let k2 = (theta.powi(4) * (nf * (nf - 1.0) * (nf - 2.0) * (nf - 3.0))
            / (m * (m - 1.0) * (m - 2.0) * (m - 3.0))
            + 4.0 * theta.powi(3) * (nf * (nf - 1.0) * (nf - 2.0)) / (m * (m - 1.0) * (m - 2.0))
            + 2.0 * theta * theta * nf * (nf - 1.0) / (m * (m - 1.0)))
            .sqrt();
        let expected = 3.0 * k1 + 1.2 * theta + 1.2 * (k1 * (theta + 1.0) + k2) / nf;
        assert!((theoretical_b2(n, theta, 1.0, 1.0).unwrap() - expected).abs() < 1e-13);
    }

    #[test]
    fn tail_curve_marks_bound3_domain() {
        let i = inputs(1.0, 1.0, 0.0, 1.0);
        let curve = TailCurve::evaluate(&[0.0, 2.0, 3.0, 3.8, 10.0], &i).unwrap();
        assert_eq!(curve.len(), 5);
        assert_eq!(curve.bound1[0], 1.0);
        assert!(curve.bound3_line1[..3].iter().all(Option::is_none));
        assert!(curve.bound3_line1[3].is_some());
        assert!(curve.bound3_line2[4].is_some());
        assert!(TailCurve::evaluate(&[-1.0], &i).is_err());
    }
}
