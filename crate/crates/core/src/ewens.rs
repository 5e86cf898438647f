//! The Ewens distribution on `S_n` and its two samplers.
//!
//! `P_theta(pi) = theta^{#(pi)} / theta^(n)` where `#(pi)` is the number of
//! cycles and `theta^(n)` the rising factorial. `theta = 1` is uniform.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorial::{ln_factorial, ln_rising_factorial};
use crate::perm::{count_cycles, Permutation};

/// Proposal cap for [`EwensParams::sample_accept_reject`].
pub const DEFAULT_ITERATION_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct EwensParams {
    n: usize,
    theta: f64,
    ln_normalizer: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    n: usize,
    theta: f64,
}

impl TryFrom<RawParams> for EwensParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        EwensParams::new(raw.n, raw.theta)
    }
}

impl From<EwensParams> for RawParams {
    fn from(p: EwensParams) -> Self {
        RawParams {
            n: p.n,
            theta: p.theta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    /// Chinese restaurant process, one pass of `n - 1` insertions.
    Crp,
    /// Rejection sampling from uniform proposals.
    AcceptReject,
}

impl EwensParams {
    pub fn new(n: usize, theta: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "theta must be positive and finite, got {theta}"
            )));
        }
        Ok(Self {
            n,
            theta,
            ln_normalizer: ln_rising_factorial(theta, n as u64),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `ln P_theta(pi)`.
    pub fn log_pmf(&self, pi: &Permutation) -> f64 {
        assert_eq!(pi.len(), self.n, "permutation size does not match n");
        self.log_pmf_of_cycle_count(pi.cycle_count())
    }

    pub fn log_pmf_of_cycle_count(&self, cycles: usize) -> f64 {
        cycles as f64 * self.theta.ln() - self.ln_normalizer
    }

    /// `P_theta(pi(i) = k)` for one-based `i, k`.
    pub fn marginal_prob(&self, i: usize, k: usize) -> Result<f64> {
        let n = self.n;
        if !(1..=n).contains(&i) || !(1..=n).contains(&k) {
            return Err(Error::InvalidParameter(format!(
                "indices ({i}, {k}) outside 1..={n}"
            )));
        }
        let denom = self.theta + (n - 1) as f64;
        Ok(if i == k {
            self.theta / denom
        } else {
            1.0 / denom
        })
    }

    /// `E #(pi) = sum_{k=0}^{n-1} theta / (theta + k)`.
    pub fn expected_cycle_count(&self) -> f64 {
        (0..self.n)
            .map(|k| self.theta / (self.theta + k as f64))
            .sum()
    }

    /// Chinese restaurant process. Element `m` becomes a fixed point with
    /// probability `theta / (theta + m - 1)`; otherwise it is spliced in
    /// right after a uniformly chosen earlier element `j`, so that
    /// `pi(j) = m` and `pi(m)` takes the old `pi(j)`.
    pub fn sample_crp<R: Rng + ?Sized>(&self, rng: &mut R) -> Permutation {
        let mut image = Vec::with_capacity(self.n);
        image.push(0);
        for m in 1..self.n {
            // m earlier elements, total weight theta + m.
            let u = rng.random::<f64>() * (self.theta + m as f64);
            if u < self.theta {
                image.push(m);
            } else {
                let j = ((u - self.theta) as usize).min(m - 1);
                image.push(image[j]);
                image[j] = m;
            }
        }
        Permutation::from_zero_based_unchecked(image)
    }

    /// `ln C` where `C = sup_pi P_theta(pi) / (1/n!)`: the maximizing
    /// permutation has one cycle for `theta < 1` and `n` cycles for `theta > 1`.
    pub fn ln_acceptance_constant(&self) -> f64 {
        if self.theta == 1.0 {
            return 0.0;
        }
        ln_factorial(self.n as u64) + self.log_pmf_of_cycle_count(self.extremal_cycle_count())
    }

    fn extremal_cycle_count(&self) -> usize {
        if self.theta < 1.0 {
            1
        } else {
            self.n
        }
    }

    /// Rejection sampler with uniform (Fisher-Yates) proposals. Returns the
    /// accepted permutation and the number of proposals drawn; the expected
    /// count is `C = exp(ln_acceptance_constant())`.
    pub fn sample_accept_reject<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        iteration_cap: u64,
    ) -> Result<(Permutation, u64)> {
        let mut image: Vec<usize> = (0..self.n).collect();
        let ln_theta = self.theta.ln();
        let k_star = self.extremal_cycle_count() as f64;
        for iteration in 1..=iteration_cap {
            image.shuffle(rng);
            if self.theta == 1.0 {
                return Ok((Permutation::from_zero_based_unchecked(image), iteration));
            }
            // ln f_Y(v) - ln C - ln f_V(v) = (#(v) - k*) ln theta <= 0.
            let ln_ratio = (count_cycles(&image) as f64 - k_star) * ln_theta;
            let u: f64 = rng.random();
            if u.ln() <= ln_ratio {
                return Ok((Permutation::from_zero_based_unchecked(image), iteration));
            }
        }
        Err(Error::Infeasible {
            cap: iteration_cap,
            constant: self.ln_acceptance_constant().exp(),
        })
    }

    /// Draws one permutation with the chosen sampler; the second element is
    /// the proposal count (always 1 for the CRP).
    pub fn sample<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        sampler: SamplerKind,
        iteration_cap: u64,
    ) -> Result<(Permutation, u64)> {
        match sampler {
            SamplerKind::Crp => Ok((self.sample_crp(rng), 1)),
            SamplerKind::AcceptReject => self.sample_accept_reject(rng, iteration_cap),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::enumerate_sn;
    use crate::rng::substream;
    use crate::sum::compensated_sum;

    fn params(n: usize, theta: f64) -> EwensParams {
        EwensParams::new(n, theta).unwrap()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(EwensParams::new(0, 1.0).is_err());
        assert!(EwensParams::new(3, 0.0).is_err());
        assert!(EwensParams::new(3, -1.0).is_err());
        assert!(EwensParams::new(3, f64::NAN).is_err());
        assert!(EwensParams::new(3, f64::INFINITY).is_err());
        assert!(serde_json::from_str::<EwensParams>(r#"{"n":3,"theta":0}"#).is_err());
        let p: EwensParams = serde_json::from_str(r#"{"n":3,"theta":2.0}"#).unwrap();
        assert_eq!(p, params(3, 2.0));
    }

    #[test]
    fn log_pmf_examples() {
        let uniform = params(3, 1.0);
        for pi in enumerate_sn(3).unwrap() {
            assert!((uniform.log_pmf(&pi) - (1.0f64 / 6.0).ln()).abs() < 1e-14);
        }
        let p = params(3, 2.0);
        assert!((p.log_pmf(&Permutation::identity(3)) - (1.0f64 / 3.0).ln()).abs() < 1e-14);
        let three_cycle: Permutation = "2 3 1".parse().unwrap();
        assert!((p.log_pmf(&three_cycle) - (1.0f64 / 12.0).ln()).abs() < 1e-14);
    }

    #[test]
    fn pmf_normalizes_over_sn() {
        for n in 1..=7 {
            for &theta in &[0.5, 1.0, 2.0, 0.8, 3.7] {
                let p = params(n, theta);
                let total =
                    compensated_sum(enumerate_sn(n).unwrap().map(|pi| p.log_pmf(&pi).exp()));
                assert!(
                    (total - 1.0).abs() < 1e-12,
                    "n={n} theta={theta} total={total}"
                );
            }
        }
    }

    #[test]
    fn marginals_match_enumeration() {
        assert_eq!(params(2, 1.0).marginal_prob(1, 2).unwrap(), 0.5);
        assert!((params(10, 2.0).marginal_prob(3, 3).unwrap() - 2.0 / 11.0).abs() < 1e-15);
        assert!(params(3, 1.0).marginal_prob(0, 1).is_err());
        assert!(params(3, 1.0).marginal_prob(1, 4).is_err());

        let p = params(4, 0.5);
        assert!((p.marginal_prob(1, 2).unwrap() - 1.0 / 3.5).abs() < 1e-15);
        let mut exact = [[0.0; 4]; 4];
        for pi in enumerate_sn(4).unwrap() {
            let w = p.log_pmf(&pi).exp();
            for i in 1..=4 {
                exact[i - 1][pi.apply(i) - 1] += w;
            }
        }
        for i in 1..=4 {
            for k in 1..=4 {
                assert!((exact[i - 1][k - 1] - p.marginal_prob(i, k).unwrap()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn expected_cycle_count_examples() {
        assert!((params(3, 1.0).expected_cycle_count() - 11.0 / 6.0).abs() < 1e-15);
        assert!(
            (params(10, 2.0).expected_cycle_count() - 2.0 * (83_711.0 / 27_720.0 - 1.0)).abs()
                < 1e-13
        );
        assert_eq!(params(1, 0.3).expected_cycle_count(), 1.0);
        // Against enumeration.
        let p = params(6, 0.7);
        let exact = compensated_sum(
            enumerate_sn(6)
                .unwrap()
                .map(|pi| pi.cycle_count() as f64 * p.log_pmf(&pi).exp()),
        );
        assert!((exact - p.expected_cycle_count()).abs() < 1e-12);
    }

    #[test]
    fn acceptance_constant_examples() {
        assert_eq!(params(50, 1.0).ln_acceptance_constant(), 0.0);
        // 10! 2^10 / (2 * 3 * ... * 11)
        let c = params(10, 2.0).ln_acceptance_constant().exp();
        assert!((c - 3_628_800.0 * 1024.0 / 39_916_800.0).abs() < 1e-9);
        assert!((c - 93.0909).abs() < 1e-4);
        let c = params(1000, 0.8).ln_acceptance_constant().exp();
        assert!((3.6..3.8).contains(&c), "C = {c}");
        // Brute-force supremum of the likelihood ratio over S_5.
        for &theta in &[0.5, 1.7] {
            let p = params(5, theta);
            let sup = enumerate_sn(5)
                .unwrap()
                .map(|pi| p.log_pmf(&pi) + crate::factorial::ln_factorial(5))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((sup - p.ln_acceptance_constant()).abs() < 1e-12);
        }
    }

    #[test]
    fn crp_small_cases() {
        let mut rng = substream(1, 0);
        assert_eq!(
            params(1, 3.0).sample_crp(&mut rng),
            Permutation::identity(1)
        );
        let (pi, iters) = params(1, 0.5).sample_accept_reject(&mut rng, 10).unwrap();
        assert_eq!(pi, Permutation::identity(1));
        assert_eq!(iters, 1);
    }

    #[test]
    fn accept_reject_cap_reports_constant() {
        let p = params(60, 5.0);
        let mut rng = substream(3, 0);
        let err = p.sample_accept_reject(&mut rng, 5).unwrap_err();
        match err {
            Error::Infeasible { cap, constant } => {
                assert_eq!(cap, 5);
                assert!((constant.ln() - p.ln_acceptance_constant()).abs() < 1e-9);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn samplers_are_deterministic_per_seed() {
        let p = params(12, 1.3);
        let run = |seed| {
            let mut rng = substream(seed, 0);
            (0..50)
                .map(|_| {
                    p.sample_accept_reject(&mut rng, DEFAULT_ITERATION_CAP)
                        .unwrap()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
        let crp = |seed| {
            let mut rng = substream(seed, 0);
            (0..50).map(|_| p.sample_crp(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(crp(4), crp(4));
    }

    #[test]
    fn crp_marginals_within_three_standard_errors() {
        let n = 10;
        let p = params(n, 2.0);
        let draws = 200_000;
        let mut rng = substream(11, 0);
        let mut counts = vec![vec![0u32; n]; n];
        for _ in 0..draws {
            let pi = p.sample_crp(&mut rng);
            for (i, &v) in pi.as_zero_based().iter().enumerate() {
                counts[i][v] += 1;
            }
        }
        for (i, row) in counts.iter().enumerate() {
            for (k, &count) in row.iter().enumerate() {
                let q = p.marginal_prob(i + 1, k + 1).unwrap();
                let se = (q * (1.0 - q) / draws as f64).sqrt();
                let emp = count as f64 / draws as f64;
                // 100 cells: allow the Bonferroni-free 3 se plus a hair.
                assert!((emp - q).abs() < 4.0 * se, "cell ({i},{k}) emp={emp} q={q}");
            }
        }
    }

    #[test]
    fn accept_reject_mean_iterations_within_three_standard_errors() {
        let p = params(8, 1.8);
        let c = p.ln_acceptance_constant().exp();
        let draws = 20_000;
        let mut rng = substream(12, 0);
        let iters: Vec<f64> = (0..draws)
            .map(|_| {
                p.sample_accept_reject(&mut rng, DEFAULT_ITERATION_CAP)
                    .unwrap()
                    .1 as f64
            })
            .collect();
        let mean = iters.iter().sum::<f64>() / draws as f64;
        // Geometric(1/C): variance C (C - 1).
        let se = (c * (c - 1.0) / draws as f64).sqrt();
        assert!((mean - c).abs() < 3.0 * se, "mean={mean} C={c}");
    }

    #[test]
    fn cycle_invariants_on_sampled_permutations() {
        let p = params(50, 0.9);
        let mut rng = substream(13, 0);
        for _ in 0..100_000 {
            let pi = p.sample_crp(&mut rng);
            let d = pi.cycles();
            let weighted: usize = (1..=50).map(|q| q * d.count_of_length(q)).sum();
            assert_eq!(weighted, 50);
            assert_eq!(d.fixed_points(), pi.fixed_point_count());
        }
    }
}
