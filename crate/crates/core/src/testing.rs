//! The conditional two-sample test, its covariate rejection region and
//! Monte Carlo positive rates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{bootstrap, split_quantiles, BootstrapConfig, BootstrapMethod, CalibrationResult, Side};
use crate::error::{Error, Result};
use crate::kernels::{gram, KernelSpec};
use crate::points::{check_compatible, Points};
use crate::regression::{fit, DataSet, FittedModel};
use crate::rng::derive_seed;
use crate::statistic::CmmdContext;
use crate::thresholds::{beta_fixed, beta_online, ThresholdParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdSource {
    AnalyticalOnline,
    AnalyticalFixed,
    BootstrapNaive,
    BootstrapWild,
    BootstrapWildStudentized,
    Fixed,
}

impl From<BootstrapMethod> for ThresholdSource {
    fn from(m: BootstrapMethod) -> Self {
        match m {
            BootstrapMethod::Naive => ThresholdSource::BootstrapNaive,
            BootstrapMethod::Wild => ThresholdSource::BootstrapWild,
            BootstrapMethod::WildStudentized => ThresholdSource::BootstrapWildStudentized,
        }
    }
}

/// Multiplier β for one data set; the band at `x` is `β·σ(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdModel {
    pub beta: f64,
    pub source: ThresholdSource,
}

impl ThresholdModel {
    pub fn fixed(beta: f64) -> Result<Self> {
        if !(beta >= 0.0) {
            return Err(Error::parameter(format!("beta must be nonnegative, got {beta}")));
        }
        Ok(Self { beta, source: ThresholdSource::Fixed })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestRecord {
    pub x: Vec<f64>,
    pub statistic: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub threshold: f64,
    pub reject: bool,
}

impl TestRecord {
    /// Statistic over threshold; `0` when both vanish.
    pub fn ratio(&self) -> f64 {
        if self.threshold > 0.0 {
            self.statistic / self.threshold
        } else if self.statistic > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestReport {
    pub records: Vec<TestRecord>,
}

impl TestReport {
    pub fn rejection_region(&self) -> Vec<&[f64]> {
        self.records.iter().filter(|r| r.reject).map(|r| r.x.as_slice()).collect()
    }

    pub fn rejects_anywhere(&self) -> bool {
        self.records.iter().any(|r| r.reject)
    }
}

/// Statistics and posterior scales on a tested set, before thresholds.
#[derive(Clone, Debug)]
struct Evaluation {
    statistic: Vec<f64>,
    sigma1: Vec<f64>,
    sigma2: Vec<f64>,
}

fn evaluate(m1: &FittedModel, m2: &FittedModel, xs: &Points) -> Result<Evaluation> {
    let ctx = CmmdContext::new(m1, m2)?;
    check_compatible(m1.covariates(), xs)?;
    check_compatible(m2.covariates(), xs)?;
    let q1 = m1.query(xs)?;
    let q2 = m2.query(xs)?;
    let statistic = (0..xs.len())
        .map(|g| {
            let a1: Vec<f64> = q1.coefficients.row(g).iter().copied().collect();
            let a2: Vec<f64> = q2.coefficients.row(g).iter().copied().collect();
            ctx.from_coefficients(&a1, &a2)
        })
        .collect();
    Ok(Evaluation { statistic, sigma1: q1.sigma, sigma2: q2.sigma })
}

fn decide(xs: &Points, ev: &Evaluation, beta1: f64, beta2: f64) -> TestReport {
    let records = xs
        .iter()
        .enumerate()
        .map(|(g, x)| {
            let threshold = beta1 * ev.sigma1[g] + beta2 * ev.sigma2[g];
            TestRecord {
                x: x.to_vec(),
                statistic: ev.statistic[g],
                sigma1: ev.sigma1[g],
                sigma2: ev.sigma2[g],
                threshold,
                reject: ev.statistic[g] > threshold,
            }
        })
        .collect();
    TestReport { records }
}

/// Rejects at `x` iff `CMMD(x) > β₁σ₁(x) + β₂σ₂(x)`.
pub fn run_test(
    m1: &FittedModel,
    m2: &FittedModel,
    thr1: &ThresholdModel,
    thr2: &ThresholdModel,
    xs: &Points,
) -> Result<TestReport> {
    let ev = evaluate(m1, m2, xs)?;
    Ok(decide(xs, &ev, thr1.beta, thr2.beta))
}

/// Tested covariates split by the truth of the null there.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ErrorRegions {
    /// Rejected although the null holds.
    pub type_i: Vec<usize>,
    /// Accepted although the null fails.
    pub type_ii: Vec<usize>,
}

/// `null_holds(x)` is the ground truth at each tested covariate.
pub fn error_regions(null_holds: impl Fn(&[f64]) -> bool, report: &TestReport) -> ErrorRegions {
    let mut out = ErrorRegions::default();
    for (i, r) in report.records.iter().enumerate() {
        match (r.reject, null_holds(&r.x)) {
            (true, true) => out.type_i.push(i),
            (false, false) => out.type_ii.push(i),
            _ => {}
        }
    }
    out
}

/// How the multipliers β₁, β₂ are obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum Calibration {
    Naive { replicates: usize },
    Wild { replicates: usize },
    WildStudentized { replicates: usize },
    AnalyticalOnline { params: ThresholdParams },
    AnalyticalFixed { params: ThresholdParams },
    Fixed { beta1: f64, beta2: f64 },
}

fn half() -> f64 {
    0.5
}

/// A complete test configuration: kernels, regularization, level and
/// calibration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pipeline {
    pub input_kernel: KernelSpec,
    pub output_kernel: KernelSpec,
    pub lambda: f64,
    pub alpha: f64,
    #[serde(default = "half")]
    pub split: f64,
    pub calibration: Calibration,
}

/// Outcome of a pipeline run at one level.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelOutcome {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub rejections: usize,
}

#[derive(Clone, Debug)]
pub struct PipelineRun {
    pub report: TestReport,
    pub thr1: ThresholdModel,
    pub thr2: ThresholdModel,
    pub calibration1: Option<CalibrationResult>,
    pub calibration2: Option<CalibrationResult>,
}

impl Pipeline {
    /// Lists every configuration problem at once.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(e) = self.input_kernel.validate() {
            out.push(format!("input_kernel: {e}"));
        }
        if let Err(e) = self.output_kernel.validate() {
            out.push(format!("output_kernel: {e}"));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            out.push(format!("lambda must be positive, got {}", self.lambda));
        }
        if let Err(e) = split_quantiles(self.alpha, self.split) {
            out.push(e.to_string());
        }
        match &self.calibration {
            Calibration::Naive { replicates } | Calibration::Wild { replicates } | Calibration::WildStudentized { replicates }
                if *replicates == 0 =>
            {
                out.push("calibration.replicates must be at least 1".into())
            }
            Calibration::AnalyticalOnline { params } | Calibration::AnalyticalFixed { params } => {
                // δ is set from the level; validate the remaining fields.
                if let Err(e) = params.with_delta(0.5).validate() {
                    out.push(format!("calibration.params: {e}"));
                }
            }
            Calibration::Fixed { beta1, beta2 } if !(*beta1 >= 0.0 && *beta2 >= 0.0) => {
                out.push("fixed betas must be nonnegative".into())
            }
            _ => {}
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::parameter(p.join("; ")))
        }
    }

    fn bootstrap_method(&self) -> Option<(BootstrapMethod, usize)> {
        match self.calibration {
            Calibration::Naive { replicates } => Some((BootstrapMethod::Naive, replicates)),
            Calibration::Wild { replicates } => Some((BootstrapMethod::Wild, replicates)),
            Calibration::WildStudentized { replicates } => Some((BootstrapMethod::WildStudentized, replicates)),
            _ => None,
        }
    }

    pub fn fit(&self, data: &DataSet) -> Result<FittedModel> {
        fit(data, &self.input_kernel, self.lambda, &self.output_kernel)
    }

    fn calibrate(&self, data: &DataSet, side: Side, grid: &Points, seed: u64) -> Result<Option<CalibrationResult>> {
        let Some((method, replicates)) = self.bootstrap_method() else {
            return Ok(None);
        };
        let cfg = BootstrapConfig {
            replicates,
            alpha: self.alpha,
            split: self.split,
            side,
            grid: Some(grid.clone()),
            seed,
        };
        bootstrap(method, data, &self.input_kernel, &self.output_kernel, self.lambda, &cfg).map(Some)
    }

    /// β for one side at level `alpha`, from bootstrap replicates if present.
    fn beta(&self, data: &DataSet, side: Side, alpha: f64, cal: Option<&CalibrationResult>) -> Result<ThresholdModel> {
        let (l1, l2) = split_quantiles(alpha, self.split)?;
        let (level, delta) = match side {
            Side::First => (l1, 1.0 - l1),
            Side::Second => (l2, 1.0 - l2),
        };
        match (&self.calibration, cal) {
            (_, Some(c)) => Ok(ThresholdModel { beta: c.beta_at(level), source: c.method.into() }),
            (Calibration::AnalyticalOnline { params }, None) => {
                let g = gram(&self.input_kernel, data.covariates())?;
                let beta = beta_online(&params.with_delta(delta), &g, self.lambda)?;
                Ok(ThresholdModel { beta, source: ThresholdSource::AnalyticalOnline })
            }
            (Calibration::AnalyticalFixed { params }, None) => {
                let g = gram(&self.input_kernel, data.covariates())?;
                let beta = beta_fixed(&params.with_delta(delta), &g, self.lambda)?;
                Ok(ThresholdModel { beta, source: ThresholdSource::AnalyticalFixed })
            }
            (Calibration::Fixed { beta1, beta2 }, None) => {
                ThresholdModel::fixed(if side == Side::First { *beta1 } else { *beta2 })
            }
            _ => Err(Error::misuse("bootstrap calibration result missing")),
        }
    }

    /// Fits, calibrates and tests; the tested set and calibration grid
    /// default to the union of both data sets' covariates.
    pub fn run(&self, d1: &DataSet, d2: &DataSet, grid: Option<&Points>, seed: u64) -> Result<PipelineRun> {
        self.validate()?;
        let union;
        let xs = match grid {
            Some(g) => g,
            None => {
                union = d1.covariates().concat(d2.covariates())?;
                &union
            }
        };
        let m1 = self.fit(d1)?;
        let m2 = self.fit(d2)?;
        let ev = evaluate(&m1, &m2, xs)?;
        let c1 = self.calibrate(d1, Side::First, xs, derive_seed(seed, &[1]))?;
        let c2 = self.calibrate(d2, Side::Second, xs, derive_seed(seed, &[2]))?;
        let thr1 = self.beta(d1, Side::First, self.alpha, c1.as_ref())?;
        let thr2 = self.beta(d2, Side::Second, self.alpha, c2.as_ref())?;
        Ok(PipelineRun {
            report: decide(xs, &ev, thr1.beta, thr2.beta),
            thr1,
            thr2,
            calibration1: c1,
            calibration2: c2,
        })
    }

    /// Runs the test at several levels, sharing fits and bootstrap replicates.
    pub fn run_levels(&self, d1: &DataSet, d2: &DataSet, alphas: &[f64], seed: u64) -> Result<Vec<LevelOutcome>> {
        self.validate()?;
        let xs = d1.covariates().concat(d2.covariates())?;
        let m1 = self.fit(d1)?;
        let m2 = self.fit(d2)?;
        let ev = evaluate(&m1, &m2, &xs)?;
        let c1 = self.calibrate(d1, Side::First, &xs, derive_seed(seed, &[1]))?;
        let c2 = self.calibrate(d2, Side::Second, &xs, derive_seed(seed, &[2]))?;
        alphas
            .iter()
            .map(|&alpha| {
                let t1 = self.beta(d1, Side::First, alpha, c1.as_ref())?;
                let t2 = self.beta(d2, Side::Second, alpha, c2.as_ref())?;
                let rejections = decide(&xs, &ev, t1.beta, t2.beta).records.iter().filter(|r| r.reject).count();
                Ok(LevelOutcome { alpha, beta1: t1.beta, beta2: t2.beta, rejections })
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Null,
    Alternative,
}

/// Empirical positive rate over Monte Carlo trials.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorEstimate {
    pub alpha: f64,
    pub positive_rate: f64,
    pub trials: usize,
    pub regime: Regime,
}

impl ErrorEstimate {
    /// Type I error under the null, type II error under an alternative.
    pub fn error(&self) -> f64 {
        match self.regime {
            Regime::Null => self.positive_rate,
            Regime::Alternative => 1.0 - self.positive_rate,
        }
    }
}

/// Positive rates at several levels. `generate(seed)` returns the data
/// pair of one trial; trial `t` uses a seed derived from `(seed, t)`.
pub fn positive_rates<G>(
    generate: G,
    pipeline: &Pipeline,
    alphas: &[f64],
    trials: usize,
    regime: Regime,
    seed: u64,
) -> Result<Vec<ErrorEstimate>>
where
    G: Fn(u64) -> Result<(DataSet, DataSet)> + Sync,
{
    if trials == 0 {
        return Err(Error::parameter("need at least one trial"));
    }
    pipeline.validate()?;
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| {
            let trial_seed = derive_seed(seed, &[t as u64]);
            let run = || {
                let (d1, d2) = generate(derive_seed(trial_seed, &[0]))?;
                pipeline.run_levels(&d1, &d2, alphas, derive_seed(trial_seed, &[1]))
            };
            run().map_err(|e| Error::Trial { trial: t, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(alphas
        .iter()
        .enumerate()
        .map(|(i, &alpha)| {
            let hits = outcomes.iter().filter(|o| o[i].rejections > 0).count();
            ErrorEstimate { alpha, positive_rate: hits as f64 / trials as f64, trials, regime }
        })
        .collect())
}

/// Positive rate at the pipeline's own level.
pub fn positive_rate<G>(generate: G, pipeline: &Pipeline, trials: usize, regime: Regime, seed: u64) -> Result<ErrorEstimate>
where
    G: Fn(u64) -> Result<(DataSet, DataSet)> + Sync,
{
    Ok(positive_rates(generate, pipeline, &[pipeline.alpha], trials, regime, seed)?[0])
}
