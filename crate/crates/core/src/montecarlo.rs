//! Sharded Monte Carlo engine.
//!
//! Samples are split into `worker_count` contiguous blocks. Worker `w` draws
//! its block from [`worker_stream`]`(seed, w)` and the blocks are concatenated
//! in worker order, so a run is a pure function of `(config, seed,
//! worker_count)`. `worker_count = 1` is the single-threaded audit mode.
//! Different worker counts use different streams and agree only up to Monte
//! Carlo error.

use std::path::PathBuf;
use std::thread;

use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundInputs, TailCurve};
use crate::error::{Error, Result};
use crate::ewens::{EwensParams, SamplerKind, DEFAULT_ITERATION_CAP};
use crate::hoeffding::{CenteredMatrix, TestMatrixGenerator, DEFAULT_GENERATOR_VARIANCE};
use crate::perm::Permutation;
use crate::rng::{substream, worker_stream, SimRng, MATRIX_STREAM};
use crate::sum::CompensatedSum;

pub const MIN_SAMPLE_COUNT: usize = 100;
pub const DEFAULT_T_POINTS: usize = 200;
pub const DEFAULT_S_POINTS: usize = 100;
/// Largest `s * max|y|` accepted before `exp(s y)` risks overflow.
pub const EXP_GUARD: f64 = 700.0;
/// Monte Carlo slack, in standard errors, for tail domination.
pub const DOMINATION_SLACK_SE: f64 = 3.0;
pub const R_ZERO_LABEL: &str = "R=0 specialization";
pub const GI14_LABEL: &str = "GI14";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum B1Mode {
    /// `mean|R_hat| / lambda`; valid when `|R|` and `exp(sY)` are
    /// negatively correlated.
    NegativeCorrelation,
    /// The closed-form general bound on `ess sup |E[R|Y]| / lambda`.
    EssSupTheoretical,
}

/// Pilot run used to screen generated matrices for negative correlation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PilotSpec {
    #[serde(default = "PilotSpec::default_samples")]
    pub samples: usize,
    #[serde(default = "PilotSpec::default_max_attempts")]
    pub max_attempts: usize,
    #[serde(default = "PilotSpec::default_grid_points")]
    pub grid_points: usize,
}

impl PilotSpec {
    fn default_samples() -> usize {
        2000
    }
    fn default_max_attempts() -> usize {
        100
    }
    fn default_grid_points() -> usize {
        20
    }
}

impl Default for PilotSpec {
    fn default() -> Self {
        Self {
            samples: Self::default_samples(),
            max_attempts: Self::default_max_attempts(),
            grid_points: Self::default_grid_points(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    #[serde(default = "default_variance")]
    pub variance: f64,
    #[serde(default)]
    pub resample_for_negative_correlation: bool,
    #[serde(default)]
    pub pilot: PilotSpec,
}

fn default_variance() -> f64 {
    DEFAULT_GENERATOR_VARIANCE
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            variance: DEFAULT_GENERATOR_VARIANCE,
            resample_for_negative_correlation: false,
            pilot: PilotSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixSource {
    /// CSV file; centered with the configured `theta` on load.
    File(PathBuf),
    Generator(GeneratorSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub params: EwensParams,
    pub matrix_source: MatrixSource,
    pub sample_count: usize,
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub worker_count: usize,
    pub sampler: SamplerKind,
    /// Defaults to 100 points on `(0, 2/c]`.
    #[serde(default)]
    pub s_grid: Option<Vec<f64>>,
    /// Defaults to 200 points on `[0, 1.05 max y]`.
    #[serde(default)]
    pub t_grid: Option<Vec<f64>>,
    pub b1_mode: B1Mode,
    /// Emit the `B1 = B2 = 0` comparison curve.
    #[serde(default)]
    pub comparison_curve: bool,
    /// `c` for the comparison curve. Unset means `20 M`, and the curve is
    /// labelled as the R=0 specialization rather than GI14.
    #[serde(default)]
    pub comparison_c: Option<f64>,
    #[serde(default = "default_cap")]
    pub iteration_cap: u64,
}

fn default_workers() -> usize {
    1
}

fn default_cap() -> u64 {
    DEFAULT_ITERATION_CAP
}

fn check_increasing(name: &str, grid: &[f64], lower_open: bool) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter(format!("{name} is empty")));
    }
    for &v in grid {
        let ok = v.is_finite() && if lower_open { v > 0.0 } else { v >= 0.0 };
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "{name} contains invalid value {v}"
            )));
        }
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(format!(
            "{name} must be strictly increasing"
        )));
    }
    Ok(())
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_count < MIN_SAMPLE_COUNT {
            return Err(Error::InvalidParameter(format!(
                "sample_count must be at least {MIN_SAMPLE_COUNT}, got {}",
                self.sample_count
            )));
        }
        if self.worker_count == 0 {
            return Err(Error::InvalidParameter(
                "worker_count must be positive".into(),
            ));
        }
        if self.iteration_cap == 0 {
            return Err(Error::InvalidParameter(
                "iteration_cap must be positive".into(),
            ));
        }
        if let Some(s) = &self.s_grid {
            check_increasing("s_grid", s, true)?;
        }
        if let Some(t) = &self.t_grid {
            check_increasing("t_grid", t, false)?;
        }
        if let Some(c) = self.comparison_c {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "comparison_c must be positive, got {c}"
                )));
            }
        }
        if let MatrixSource::Generator(g) = &self.matrix_source {
            TestMatrixGenerator::new(self.params.n())
                .with_variance(g.variance)
                .validate()?;
            if g.resample_for_negative_correlation
                && (g.pilot.samples < 2 || g.pilot.max_attempts == 0 || g.pilot.grid_points == 0)
            {
                return Err(Error::InvalidParameter(
                    "pilot needs samples >= 2, max_attempts >= 1, grid_points >= 1".into(),
                ));
            }
        }
        Ok(())
    }

    /// The centered matrix this configuration runs against.
    pub fn resolve_matrix(&self) -> Result<ResolvedMatrix> {
        let theta = self.params.theta();
        match &self.matrix_source {
            MatrixSource::File(path) => {
                let raw = crate::io::read_matrix_csv(path)?;
                if raw.n() != self.params.n() {
                    return Err(Error::InvalidParameter(format!(
                        "{} is {}x{} but params.n = {}",
                        path.display(),
                        raw.n(),
                        raw.n(),
                        self.params.n()
                    )));
                }
                Ok(ResolvedMatrix {
                    matrix: raw.center(theta),
                    generator_attempts: None,
                })
            }
            MatrixSource::Generator(spec) => {
                let generator =
                    TestMatrixGenerator::new(self.params.n()).with_variance(spec.variance);
                let mut rng = substream(self.seed, MATRIX_STREAM);
                if spec.resample_for_negative_correlation {
                    let (matrix, attempts) =
                        generate_negatively_correlated(&generator, theta, &spec.pilot, &mut rng)?;
                    Ok(ResolvedMatrix {
                        matrix,
                        generator_attempts: Some(attempts),
                    })
                } else {
                    Ok(ResolvedMatrix {
                        matrix: generator.generate(theta, &mut rng)?,
                        generator_attempts: Some(1),
                    })
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ResolvedMatrix {
    pub matrix: CenteredMatrix,
    pub generator_attempts: Option<usize>,
}

/// Runs `draw` `count` times across `workers` threads, each on its own
/// substream, and concatenates the results in worker order.
pub fn run_sharded<T, F>(count: usize, seed: u64, workers: usize, draw: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut SimRng) -> Result<T> + Sync,
{
    if workers == 0 {
        return Err(Error::InvalidParameter(
            "worker_count must be positive".into(),
        ));
    }
    let shard = |w: usize| -> Result<Vec<T>> {
        let lo = count * w / workers;
        let hi = count * (w + 1) / workers;
        let mut rng = worker_stream(seed, w);
        (lo..hi).map(|_| draw(&mut rng)).collect()
    };
    if workers == 1 {
        return shard(0);
    }
    let shards: Vec<Result<Vec<T>>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| scope.spawn(move || shard(w)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker thread panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(count);
    for s in shards {
        out.extend(s?);
    }
    Ok(out)
}

/// `count` Ewens permutations with their accept-reject proposal counts
/// (always 1 for the CRP).
pub fn sample_permutations(
    params: &EwensParams,
    sampler: SamplerKind,
    count: usize,
    seed: u64,
    workers: usize,
    cap: u64,
) -> Result<Vec<(Permutation, u64)>> {
    run_sharded(count, seed, workers, |rng| params.sample(rng, sampler, cap))
}

/// Per-sample output of a simulation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleSet {
    pub n: usize,
    pub y: Vec<f64>,
    pub t: Vec<f64>,
    /// Present for the accept-reject sampler.
    pub iterations: Option<Vec<u64>>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// `R_hat = T / (n (n - 1))`.
    pub fn r_hat(&self) -> Vec<f64> {
        let norm = self.n as f64 * (self.n as f64 - 1.0);
        self.t.iter().map(|t| t / norm).collect()
    }
}

/// Draws `(Y, T)` for `count` Ewens permutations.
pub fn simulate(
    matrix: &CenteredMatrix,
    sampler: SamplerKind,
    count: usize,
    seed: u64,
    workers: usize,
    cap: u64,
) -> Result<SampleSet> {
    let params = EwensParams::new(matrix.n(), matrix.theta())?;
    let draws = run_sharded(count, seed, workers, |rng| {
        let (pi, iterations) = params.sample(rng, sampler, cap)?;
        Ok((matrix.statistic_y(&pi), matrix.statistic_t(&pi), iterations))
    })?;
    Ok(SampleSet {
        n: matrix.n(),
        y: draws.iter().map(|d| d.0).collect(),
        t: draws.iter().map(|d| d.1).collect(),
        iterations: (sampler == SamplerKind::AcceptReject)
            .then(|| draws.iter().map(|d| d.2).collect()),
    })
}

fn mean(values: &[f64]) -> f64 {
    values.iter().copied().sum::<CompensatedSum>().value() / values.len() as f64
}

/// Unbiased sample covariance.
fn covariance(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let s: CompensatedSum = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    s.value() / (x.len() as f64 - 1.0)
}

/// Mean and its standard error.
fn mean_with_se(values: &[f64]) -> (f64, f64) {
    let m = mean(values);
    let var = covariance(values, values);
    (m, (var / values.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovPoint {
    pub s: f64,
    pub cov: f64,
}

/// Sample covariance of `exp(s y)` and `|r|` at each `s`.
pub fn cov_exp_curve(y: &[f64], r: &[f64], s_grid: &[f64]) -> Result<Vec<CovPoint>> {
    if y.len() != r.len() || y.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least two paired samples".into(),
        ));
    }
    let max_abs_y = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let abs_r: Vec<f64> = r.iter().map(|v| v.abs()).collect();
    s_grid
        .iter()
        .map(|&s| {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "s must be positive, got {s}"
                )));
            }
            if s * max_abs_y >= EXP_GUARD {
                return Err(Error::ExpOverflow { s, max_abs_y });
            }
            let e: Vec<f64> = y.iter().map(|v| (s * v).exp()).collect();
            Ok(CovPoint {
                s,
                cov: covariance(&e, &abs_r),
            })
        })
        .collect()
}

/// True iff every covariance on the curve is strictly negative.
pub fn negative_correlation_check(curve: &[CovPoint]) -> bool {
    !curve.is_empty() && curve.iter().all(|p| p.cov < 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub t: f64,
    pub fraction: f64,
    pub se: f64,
}

/// Fraction of samples with `y >= t`, with binomial standard errors.
pub fn empirical_tail(y: &[f64], t_grid: &[f64]) -> Vec<TailPoint> {
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let count = sorted.len() as f64;
    t_grid
        .iter()
        .map(|&t| {
            let below = sorted.partition_point(|&v| v < t);
            let fraction = if sorted.is_empty() {
                0.0
            } else {
                (sorted.len() - below) as f64 / count
            };
            TailPoint {
                t,
                fraction,
                se: (fraction * (1.0 - fraction) / count.max(1.0)).sqrt(),
            }
        })
        .collect()
}

/// Number of `T` values violating `|T| <= (10 n^2 + 8 theta n) M`.
pub fn t_bound_check(t: &[f64], n: usize, theta: f64, m: f64) -> usize {
    let bound = crate::hoeffding::t_bound(n, theta, m);
    t.iter().filter(|v| v.abs() > bound).count()
}

/// `k (2/c) / points` for `k = 1..=points`.
pub fn default_s_grid(c: f64, points: usize) -> Vec<f64> {
    let top = 2.0 / c;
    (1..=points)
        .map(|k| top * k as f64 / points as f64)
        .collect()
}

/// `points` equally spaced values on `[0, 1.05 max_y]` (or `[0, 1]` when
/// `max_y <= 0`).
pub fn default_t_grid(max_y: f64, points: usize) -> Vec<f64> {
    let top = if max_y > 0.0 { 1.05 * max_y } else { 1.0 };
    let steps = (points.max(2) - 1) as f64;
    (0..points.max(2)).map(|k| top * k as f64 / steps).collect()
}

/// Generates matrices until a pilot CRP run shows negative covariance of
/// `|R_hat|` and `exp(sY)` on `(0, 2/c]`. The pilot shares the matrix
/// stream.
pub fn generate_negatively_correlated(
    generator: &TestMatrixGenerator,
    theta: f64,
    pilot: &PilotSpec,
    rng: &mut SimRng,
) -> Result<(CenteredMatrix, usize)> {
    let params = EwensParams::new(generator.n, theta)?;
    let norm = generator.n as f64 * (generator.n as f64 - 1.0);
    for attempt in 1..=pilot.max_attempts {
        let matrix = generator.generate(theta, rng)?;
        if !(matrix.m_max() > 0.0) {
            continue;
        }
        let mut y = Vec::with_capacity(pilot.samples);
        let mut r = Vec::with_capacity(pilot.samples);
        for _ in 0..pilot.samples {
            let pi = params.sample_crp(rng);
            y.push(matrix.statistic_y(&pi));
            r.push(matrix.statistic_t(&pi) / norm);
        }
        let grid = default_s_grid(matrix.coupling_constant(), pilot.grid_points);
        match cov_exp_curve(&y, &r, &grid) {
            Ok(curve) if negative_correlation_check(&curve) => return Ok((matrix, attempt)),
            Ok(_) | Err(Error::ExpOverflow { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Err(Error::NegativeCorrelation(pilot.max_attempts))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalConstants {
    pub b1_general: Option<f64>,
    pub b1_negatively_correlated: Option<f64>,
    pub b2: Option<f64>,
}

/// The `B1 = B2 = 0` curve, evaluated with bound 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCurve {
    pub label: String,
    pub c: f64,
    pub bound1: Vec<f64>,
}

/// Grid points where the empirical tail exceeds a bound by more than the
/// slack.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub slack_se: f64,
    pub checked_points: usize,
    pub bound1_violations: Vec<f64>,
    pub bound2_violations: Vec<f64>,
    pub bound3_violations: Vec<f64>,
}

impl DominationReport {
    pub fn holds(&self) -> bool {
        self.bound1_violations.is_empty()
            && self.bound2_violations.is_empty()
            && self.bound3_violations.is_empty()
    }
}

/// Empirical tail against each bound on its effective range.
pub fn domination_check(
    tail: &[TailPoint],
    curve: &TailCurve,
    inputs: &BoundInputs,
    slack_se: f64,
) -> DominationReport {
    use bounds::WhichBound;
    let t12 = bounds::effective_threshold(inputs, WhichBound::One);
    let mut report = DominationReport {
        slack_se,
        ..Default::default()
    };
    for (k, p) in tail.iter().enumerate() {
        let lower = p.fraction - slack_se * p.se;
        let mut checked = false;
        if p.t >= t12 {
            checked = true;
            if lower > curve.bound1[k] {
                report.bound1_violations.push(p.t);
            }
            if lower > curve.bound2[k] {
                report.bound2_violations.push(p.t);
            }
        }
        if let Some(b3) = curve.bound3_line1[k] {
            checked = true;
            if lower > b3 {
                report.bound3_violations.push(p.t);
            }
        }
        report.checked_points += usize::from(checked);
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub schema: String,
    pub n: usize,
    pub theta: f64,
    pub sample_count: usize,
    pub seed: u64,
    pub worker_count: usize,
    pub sampler: SamplerKind,
    pub b1_mode: B1Mode,
    /// `sigma^2 = 0`: every statistic is reported as 0 and no bounds apply.
    pub degenerate: bool,
    pub generator_attempts: Option<usize>,
    pub sigma2_hat: f64,
    pub sigma2_se: f64,
    pub b1_hat: f64,
    pub b1_se: Option<f64>,
    pub b2_hat: f64,
    pub b2_se: f64,
    pub m_max: f64,
    pub c: f64,
    pub lambda: f64,
    pub sample_support: (f64, f64),
    pub support_min: f64,
    pub support_max: f64,
    pub cov_y_absr: f64,
    pub cov_curve: Vec<CovPoint>,
    pub negative_correlation_holds: bool,
    /// Covariance at bound 3's `alpha` for the largest `t` where bound 3 is
    /// defined.
    pub bound3_alpha_cov: Option<CovPoint>,
    pub tail: Vec<TailPoint>,
    pub bound_inputs: Option<BoundInputs>,
    pub bound_curves: Option<TailCurve>,
    pub comparison: Option<ComparisonCurve>,
    pub domination: Option<DominationReport>,
    pub mean_ar_iterations: Option<f64>,
    pub t_bound_violations: usize,
    pub max_abs_t: f64,
    pub theoretical: TheoreticalConstants,
}

impl SimulationSummary {
    /// Domination holds (vacuously true for degenerate runs) and `|T|` never
    /// exceeded its almost-sure bound.
    pub fn passed(&self) -> bool {
        self.t_bound_violations == 0
            && self
                .domination
                .as_ref()
                .map_or(true, DominationReport::holds)
    }
}

/// Reduces a sample set to a summary.
pub fn summarize(
    config: &SimulationConfig,
    resolved: &ResolvedMatrix,
    samples: &SampleSet,
) -> Result<SimulationSummary> {
    let matrix = &resolved.matrix;
    let n = matrix.n();
    let theta = matrix.theta();
    let m = matrix.m_max();
    let c = matrix.coupling_constant();
    let lambda = 4.0 / n as f64;
    let count = samples.len();
    let y = &samples.y;
    let r = samples.r_hat();

    let (sigma2, sigma2_se) = {
        let mu = mean(y);
        let centered: Vec<f64> = y.iter().map(|v| (v - mu) * (v - mu)).collect();
        let var = covariance(y, y);
        let m4 = mean(&centered.iter().map(|v| v * v).collect::<Vec<_>>());
        (var, ((m4 - var * var).max(0.0) / count as f64).sqrt())
    };
    let support_min = y.iter().copied().fold(f64::INFINITY, f64::min);
    let support_max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let abs_r: Vec<f64> = r.iter().map(|v| v.abs()).collect();
    let (mean_abs_r, mean_abs_r_se) = mean_with_se(&abs_r);
    let yr: Vec<f64> = y.iter().zip(&r).map(|(a, b)| a * b).collect();
    let (mean_yr, mean_yr_se) = mean_with_se(&yr);
    let cov_y_absr = covariance(y, &abs_r);
    let max_abs_t = samples.t.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let t_bound_violations = t_bound_check(&samples.t, n, theta, m);
    let mean_ar_iterations = samples
        .iterations
        .as_ref()
        .map(|it| it.iter().map(|&v| v as f64).sum::<CompensatedSum>().value() / count as f64);

    let sigma = sigma2.max(0.0).sqrt();
    let theoretical = TheoreticalConstants {
        b1_general: bounds::theoretical_b1(n, theta, m, false).ok(),
        b1_negatively_correlated: bounds::theoretical_b1(n, theta, m, true).ok(),
        b2: bounds::theoretical_b2(n, theta, m, sigma).ok(),
    };
    let (b1_hat, b1_se) = match config.b1_mode {
        B1Mode::NegativeCorrelation => (mean_abs_r / lambda, Some(mean_abs_r_se / lambda)),
        B1Mode::EssSupTheoretical => (bounds::theoretical_b1(n, theta, m, false)?, None),
    };
    let b2_hat = mean_yr.abs() / lambda;
    let b2_se = mean_yr_se / lambda;

    let t_grid = config
        .t_grid
        .clone()
        .unwrap_or_else(|| default_t_grid(support_max, DEFAULT_T_POINTS));
    let tail = empirical_tail(y, &t_grid);

    let mut summary = SimulationSummary {
        schema: crate::io::SCHEMA_VERSION.into(),
        n,
        theta,
        sample_count: count,
        seed: config.seed,
        worker_count: config.worker_count,
        sampler: config.sampler,
        b1_mode: config.b1_mode,
        degenerate: false,
        generator_attempts: resolved.generator_attempts,
        sigma2_hat: sigma2,
        sigma2_se,
        b1_hat,
        b1_se,
        b2_hat,
        b2_se,
        m_max: m,
        c,
        lambda,
        sample_support: (support_min, support_max),
        support_min,
        support_max,
        cov_y_absr,
        cov_curve: Vec::new(),
        negative_correlation_holds: false,
        bound3_alpha_cov: None,
        tail,
        bound_inputs: None,
        bound_curves: None,
        comparison: None,
        domination: None,
        mean_ar_iterations,
        t_bound_violations,
        max_abs_t,
        theoretical,
    };

    if !(sigma2 > 0.0) || !(c > 0.0) {
        summary.degenerate = true;
        summary.sigma2_hat = 0.0;
        summary.sigma2_se = 0.0;
        summary.b1_hat = 0.0;
        summary.b1_se = summary.b1_se.map(|_| 0.0);
        summary.b2_hat = 0.0;
        summary.b2_se = 0.0;
        summary.cov_y_absr = 0.0;
        return Ok(summary);
    }

    let s_grid = config
        .s_grid
        .clone()
        .unwrap_or_else(|| default_s_grid(c, DEFAULT_S_POINTS));
    summary.cov_curve = cov_exp_curve(y, &r, &s_grid)?;
    summary.negative_correlation_holds = negative_correlation_check(&summary.cov_curve);

    let inputs = BoundInputs::new(sigma2, b1_hat, b2_hat, c)?.with_lambda(lambda)?;
    let curve = TailCurve::evaluate(&t_grid, &inputs)?;
    if let Some(t_max) = t_grid
        .iter()
        .rev()
        .find(|&&t| bounds::bound3(t, &inputs).is_some())
    {
        let x = t_max - b1_hat;
        let alpha = (x.ln() - x.ln().ln()) / c;
        if alpha > 0.0 {
            // Past the exp guard the covariance is not computable; leave it unset.
            summary.bound3_alpha_cov = cov_exp_curve(y, &r, &[alpha]).ok().map(|v| v[0]);
        }
    }
    if config.comparison_curve {
        let (label, cc) = match config.comparison_c {
            Some(cc) => (GI14_LABEL, cc),
            None => (R_ZERO_LABEL, c),
        };
        let zero = bounds::r_zero_specialization(sigma2, cc)?;
        summary.comparison = Some(ComparisonCurve {
            label: label.into(),
            c: cc,
            bound1: t_grid.iter().map(|&t| bounds::bound1(t, &zero)).collect(),
        });
    }
    summary.domination = Some(domination_check(
        &summary.tail,
        &curve,
        &inputs,
        DOMINATION_SLACK_SE,
    ));
    summary.bound_inputs = Some(inputs);
    summary.bound_curves = Some(curve);
    Ok(summary)
}

/// Validates, resolves the matrix, samples, and summarizes.
pub fn run_simulation(config: &SimulationConfig) -> Result<SimulationSummary> {
    Ok(run_simulation_detailed(config)?.summary)
}

#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub matrix: ResolvedMatrix,
    pub samples: SampleSet,
    pub summary: SimulationSummary,
}

pub fn run_simulation_detailed(config: &SimulationConfig) -> Result<SimulationRun> {
    config.validate()?;
    let resolved = config.resolve_matrix()?;
    let samples = simulate(
        &resolved.matrix,
        config.sampler,
        config.sample_count,
        config.seed,
        config.worker_count,
        config.iteration_cap,
    )?;
    let summary = summarize(config, &resolved, &samples)?;
    Ok(SimulationRun {
        matrix: resolved,
        samples,
        summary,
    })
}
