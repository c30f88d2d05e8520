//! Reproducible Monte Carlo ensembles and the statistical tests run on them.
//!
//! Replicate `r` always draws from substream `(seed, r)` and results are
//! collected in replicate order, so a summary does not depend on the thread
//! count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{
    self, ConditionCheck, ConditionReport, DiagnosticsError, EqualAdditionTrace, OppositeTrace,
};
use crate::distributions::LawSchedule;
use crate::rng::RandomStream;
use crate::stats::{self, SampleSummary, StatsError};
use crate::theory::{self, Model2Prediction, TheoryError, TheoryPrediction};
use crate::urn::{run_trajectory, CheckpointGrid, UrnConfig, UrnError, UrnState, Variant};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnsembleError {
    #[error("invalid ensemble: {0}")]
    Config(String),
    #[error("replicate {replicate}: {source}")]
    Urn {
        replicate: u64,
        #[source]
        source: UrnError,
    },
    #[error("replicate {replicate}: {source}")]
    Diagnostics {
        replicate: u64,
        #[source]
        source: DiagnosticsError,
    },
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub config: UrnConfig,
    pub replicates: u64,
    pub seed: u64,
    pub grid: CheckpointGrid,
    /// `None` uses every available core.
    pub threads: Option<usize>,
    /// Extract stochastic-approximation traces per replicate.
    pub diagnostics: bool,
    /// Exponent of `theta_n = n^lambda` for equal-addition traces; `None`
    /// takes the midpoint of the admissible range.
    pub lambda: Option<f64>,
}

impl EnsembleSpec {
    pub fn new(config: UrnConfig, replicates: u64, seed: u64) -> Self {
        Self {
            config,
            replicates,
            seed,
            grid: CheckpointGrid::default(),
            threads: None,
            diagnostics: false,
            lambda: None,
        }
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        if self.replicates < 2 {
            return Err(EnsembleError::Config(format!(
                "replicates must be at least 2 (got {})",
                self.replicates
            )));
        }
        if self.threads == Some(0) {
            return Err(EnsembleError::Config("threads must be positive".into()));
        }
        self.config
            .validate()
            .and_then(|_| self.grid.validate())
            .map_err(|e| EnsembleError::Config(e.to_string()))
    }

    pub fn lambda(&self) -> Option<f64> {
        match &self.config.variant {
            Variant::EqualAddition { schedule } => Some(self.lambda.unwrap_or_else(|| {
                let upper = theory::theta_exponent_upper(schedule);
                if upper.is_infinite() {
                    0.5
                } else {
                    upper / 2.0
                }
            })),
            Variant::Opposite { .. } => None,
        }
    }
}

/// What one replicate leaves behind.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutput {
    pub replicate: u64,
    pub checkpoints: Vec<UrnState>,
    pub opposite: Option<OppositeTrace>,
    pub equal_addition: Option<EqualAdditionTrace>,
}

impl ReplicateOutput {
    pub fn final_state(&self) -> UrnState {
        *self
            .checkpoints
            .last()
            .expect("checkpoints include the final step")
    }
}

fn run_one(
    spec: &EnsembleSpec,
    prediction: Option<&TheoryPrediction>,
    replicate: u64,
) -> Result<ReplicateOutput, EnsembleError> {
    let mut stream = RandomStream::substream(spec.seed, replicate);
    let record = run_trajectory(&spec.config, &mut stream, &spec.grid, spec.diagnostics)
        .map_err(|source| EnsembleError::Urn { replicate, source })?;
    let wrap = |source| EnsembleError::Diagnostics { replicate, source };
    let (mut opposite, mut equal_addition) = (None, None);
    if spec.diagnostics {
        match &spec.config.variant {
            Variant::Opposite { .. } => {
                let p = prediction.expect("prediction computed for the opposite variant");
                opposite = Some(
                    diagnostics::extract_model1_diagnostics(&record, &spec.config, p)
                        .map_err(wrap)?,
                );
            }
            Variant::EqualAddition { .. } => {
                let lambda = spec.lambda().expect("equal-addition lambda");
                equal_addition = Some(
                    diagnostics::extract_model2_diagnostics(&record, &spec.config, lambda)
                        .map_err(wrap)?,
                );
            }
        }
    }
    Ok(ReplicateOutput {
        replicate,
        checkpoints: record.checkpoints,
        opposite,
        equal_addition,
    })
}

/// Run every replicate on a pool of `spec.threads` workers; outputs come
/// back in replicate order.
pub fn run_ensemble(spec: &EnsembleSpec) -> Result<Vec<ReplicateOutput>, EnsembleError> {
    spec.validate()?;
    let prediction = match &spec.config.variant {
        Variant::Opposite { law_x, law_y } => {
            Some(theory::predict_model1(spec.config.draw_size, law_x, law_y)?)
        }
        Variant::EqualAddition { schedule } => {
            if spec.diagnostics {
                diagnostics::validate_model2_exponent(schedule, spec.lambda().unwrap_or(0.0))
                    .map_err(|e| EnsembleError::Config(e.to_string()))?;
            }
            None
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = spec.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| EnsembleError::ThreadPool(e.to_string()))?;
    pool.install(|| {
        (0..spec.replicates)
            .into_par_iter()
            .map(|r| run_one(spec, prediction.as_ref(), r))
            .collect()
    })
}

/// Thresholds every test is held to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative error allowed between an empirical and a predicted variance.
    pub variance_rel: f64,
    /// Means must match within this many standard errors.
    pub mean_se: f64,
    /// Minimum p-value of goodness-of-fit tests.
    pub ks_p: f64,
    /// Relative band for growth-rate limits.
    pub slln_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            variance_rel: 0.15,
            mean_se: 3.0,
            ks_p: 0.01,
            slln_rel: 0.02,
        }
    }
}

/// One named test and its verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    pub pass: bool,
    pub detail: String,
}

impl TestOutcome {
    fn failed(name: &str, detail: String) -> Self {
        Self {
            name: name.into(),
            statistic: f64::NAN,
            threshold: f64::NAN,
            p_value: None,
            pass: false,
            detail,
        }
    }

    fn from_check(name: &str, check: &ConditionCheck) -> Self {
        Self {
            name: name.into(),
            statistic: check.statistic,
            threshold: check.threshold,
            p_value: None,
            pass: check.passed(),
            detail: format!("{}; {}", check.description, check.detail),
        }
    }
}

pub const OPPOSITE_TESTS: &[&str] = &[
    "slln_z",
    "slln_t",
    "slln_w",
    "clt_z_ks",
    "clt_z_variance",
    "clt_w_variance",
    "clt_z_ks_full",
    "clt_z_variance_full",
    "clt_w_variance_full",
    "robbins_monro",
    "renlund",
];

pub const EQUAL_ADDITION_TESTS: &[&str] = &[
    "clt_t_ks",
    "scaled_total_decay",
    "proportion_cauchy_tail",
    "martingale_cauchy_tail",
    "remainder_cauchy_tail",
    "decomposition",
    "proportion_martingale",
    "martingale_part",
    "martingale_l2",
];

/// Tests that need per-replicate diagnostics traces.
pub fn needs_diagnostics(name: &str) -> bool {
    matches!(name, "robbins_monro" | "renlund")
        || (EQUAL_ADDITION_TESTS.contains(&name) && name != "clt_t_ks")
}

/// Distribution of `Z`, `T/n` and `W/n` across replicates at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSummary {
    pub step: u64,
    pub proportion: SampleSummary,
    pub total_rate: Option<SampleSummary>,
    pub white_rate: Option<SampleSummary>,
}

/// One kind of standardized fluctuation at the final step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltSample {
    pub replicate: u64,
    pub kind: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltSummary {
    pub kind: String,
    /// Variance used to standardize.
    pub target_variance: f64,
    /// Summary of the unstandardized fluctuation.
    pub raw: SampleSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub replicates: u64,
    pub horizon: u64,
    pub seed: u64,
    pub checkpoints: Vec<CheckpointSummary>,
    pub clt: Vec<CltSummary>,
    pub tests: Vec<TestOutcome>,
    pub conditions: Vec<ConditionReport>,
}

impl EnsembleSummary {
    pub fn all_pass(&self) -> bool {
        self.tests.iter().all(|t| t.pass)
    }

    pub fn test(&self, name: &str) -> Option<&TestOutcome> {
        self.tests.iter().find(|t| t.name == name)
    }
}

/// Everything `summarize` produces: the summary plus the per-replicate
/// standardized samples.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleReport {
    pub summary: EnsembleSummary,
    pub clt_samples: Vec<CltSample>,
}

fn per_checkpoint(outputs: &[ReplicateOutput]) -> Vec<CheckpointSummary> {
    let Some(first) = outputs.first() else {
        return Vec::new();
    };
    first
        .checkpoints
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let states: Vec<UrnState> = outputs.iter().map(|o| o.checkpoints[i]).collect();
            let z: Vec<f64> = states.iter().map(UrnState::proportion).collect();
            let rate = |f: &dyn Fn(&UrnState) -> u64| {
                (s.step > 0).then(|| {
                    let xs: Vec<f64> = states.iter().map(|u| f(u) as f64 / s.step as f64).collect();
                    SampleSummary::of(&xs)
                })
            };
            CheckpointSummary {
                step: s.step,
                proportion: SampleSummary::of(&z),
                total_rate: rate(&|u| u.total()),
                white_rate: rate(&|u| u.white),
            }
        })
        .collect()
}

fn is_decade(mut n: u64) -> bool {
    if n < 10 {
        return false;
    }
    while n.is_multiple_of(10) {
        n /= 10;
    }
    n == 1
}

/// Band test on ensemble means over checkpoints: the deviation from `target`
/// at the last decade must be below `band` and below the deviation at the
/// first decade.
pub fn slln_band_test(
    steps: &[u64],
    means: &[f64],
    target: f64,
    band: f64,
) -> Result<(bool, f64), StatsError> {
    let decades: Vec<usize> = steps
        .iter()
        .enumerate()
        .filter(|(_, &n)| is_decade(n))
        .map(|(i, _)| i)
        .collect();
    if steps.len() < 3 || decades.len() < 3 {
        return Err(StatsError::Degenerate(
            "need at least three checkpoints spanning two decades".into(),
        ));
    }
    let dev = |i: usize| (means[i] - target).abs();
    let first = dev(decades[0]);
    let last = dev(*decades.last().unwrap());
    Ok((last < band && last < first, last))
}

fn slln_rate_test(
    name: &str,
    summary: &[CheckpointSummary],
    target: f64,
    rel: f64,
    pick: fn(&CheckpointSummary) -> Option<&SampleSummary>,
) -> TestOutcome {
    let rows: Vec<(u64, f64)> = summary
        .iter()
        .filter_map(|c| pick(c).map(|s| (c.step, s.mean)))
        .collect();
    let steps: Vec<u64> = rows.iter().map(|r| r.0).collect();
    let means: Vec<f64> = rows.iter().map(|r| r.1).collect();
    match slln_band_test(&steps, &means, target, rel * target) {
        Ok((pass, dev)) => TestOutcome {
            name: name.into(),
            statistic: dev / target,
            threshold: rel,
            p_value: None,
            pass,
            detail: format!(
                "relative deviation of the final mean from {target:.6}; must also shrink from the first decade"
            ),
        },
        Err(e) => TestOutcome::failed(name, e.to_string()),
    }
}

fn ks_outcome(name: &str, standardized: &[f64], tol: &Tolerances) -> TestOutcome {
    match stats::ks_normal_test(standardized) {
        Ok(ks) => TestOutcome {
            name: name.into(),
            statistic: ks.statistic,
            threshold: tol.ks_p,
            p_value: Some(ks.p_value),
            pass: ks.p_value > tol.ks_p,
            detail: format!("one-sample KS against N(0, 1), {} samples", ks.samples),
        },
        Err(e) => TestOutcome::failed(name, e.to_string()),
    }
}

fn variance_outcome(name: &str, raw: &[f64], target: f64, tol: &Tolerances) -> TestOutcome {
    match stats::variance_match_test(raw, target, tol.variance_rel, 1e-12) {
        Ok(v) => TestOutcome {
            name: name.into(),
            statistic: v.relative_error,
            threshold: tol.variance_rel,
            p_value: None,
            pass: v.pass,
            detail: format!(
                "variance {:.6} (95% CI {:.6}..{:.6}) against {:.6}",
                v.estimate, v.ci_low, v.ci_high, v.target
            ),
        },
        Err(e) => TestOutcome::failed(name, e.to_string()),
    }
}

fn standardize(raw: &[f64], variance: f64) -> Vec<f64> {
    let sd = variance.sqrt();
    raw.iter().map(|x| x / sd).collect()
}

fn push_clt(
    samples: &mut Vec<CltSample>,
    summaries: &mut Vec<CltSummary>,
    outputs: &[ReplicateOutput],
    kind: &str,
    raw: &[f64],
    variance: f64,
) {
    summaries.push(CltSummary {
        kind: kind.into(),
        target_variance: variance,
        raw: SampleSummary::of(raw),
    });
    let sd = variance.sqrt();
    samples.extend(outputs.iter().zip(raw).map(|(o, x)| CltSample {
        replicate: o.replicate,
        kind: kind.into(),
        value: x / sd,
    }));
}

/// Build the summary and run `tests` (names from [`OPPOSITE_TESTS`] or
/// [`EQUAL_ADDITION_TESTS`]).
pub fn summarize(
    spec: &EnsembleSpec,
    outputs: &[ReplicateOutput],
    tests: &[String],
    tol: &Tolerances,
) -> Result<EnsembleReport, EnsembleError> {
    let checkpoints = per_checkpoint(outputs);
    let horizon = outputs.first().map(|o| o.final_state().step).unwrap_or(0);
    let n = horizon as f64;
    let mut outcomes = Vec::new();
    let mut conditions = Vec::new();
    let mut clt = Vec::new();
    let mut samples = Vec::new();
    let finals: Vec<UrnState> = outputs.iter().map(ReplicateOutput::final_state).collect();

    match &spec.config.variant {
        Variant::Opposite { law_x, law_y } => {
            let p = theory::predict_model1(spec.config.draw_size, law_x, law_y)?;
            let zs = p.z_star;
            let rz: Vec<f64> = finals
                .iter()
                .map(|s| n.sqrt() * (s.proportion() - zs))
                .collect();
            let rw: Vec<f64> = finals
                .iter()
                .map(|s| n.sqrt() * (s.white as f64 / n - s.total() as f64 / n * zs))
                .collect();
            push_clt(&mut samples, &mut clt, outputs, "z", &rz, p.clt_variance_z);
            push_clt(&mut samples, &mut clt, outputs, "w", &rw, p.clt_variance_w);
            push_clt(
                &mut samples,
                &mut clt,
                outputs,
                "z_full",
                &rz,
                p.clt_variance_z_full,
            );

            let traces: Vec<OppositeTrace> =
                outputs.iter().filter_map(|o| o.opposite.clone()).collect();
            let wants_traces = tests.iter().any(|t| needs_diagnostics(t));
            if wants_traces && traces.len() != outputs.len() {
                return Err(EnsembleError::Config(
                    "condition tests need diagnostics traces for every replicate".into(),
                ));
            }
            for name in tests {
                let outcome = match name.as_str() {
                    "slln_z" => {
                        let z: Vec<f64> = finals.iter().map(UrnState::proportion).collect();
                        let dev = (stats::mean(&z) - zs).abs();
                        let se = stats::standard_error(&z);
                        TestOutcome {
                            name: name.clone(),
                            statistic: dev / se,
                            threshold: tol.mean_se,
                            p_value: None,
                            pass: dev < tol.mean_se * se,
                            detail: format!("|mean Z_N - z*| in standard errors, z* = {zs:.7}"),
                        }
                    }
                    "slln_t" => slln_rate_test(name, &checkpoints, p.tn_rate, tol.slln_rel, |c| {
                        c.total_rate.as_ref()
                    }),
                    "slln_w" => slln_rate_test(name, &checkpoints, p.wn_rate, tol.slln_rel, |c| {
                        c.white_rate.as_ref()
                    }),
                    "clt_z_ks" => ks_outcome(name, &standardize(&rz, p.clt_variance_z), tol),
                    "clt_z_variance" => variance_outcome(name, &rz, p.clt_variance_z, tol),
                    "clt_w_variance" => variance_outcome(name, &rw, p.clt_variance_w, tol),
                    "clt_z_ks_full" => {
                        ks_outcome(name, &standardize(&rz, p.clt_variance_z_full), tol)
                    }
                    "clt_z_variance_full" => {
                        variance_outcome(name, &rz, p.clt_variance_z_full, tol)
                    }
                    "clt_w_variance_full" => {
                        variance_outcome(name, &rw, p.clt_variance_w_full, tol)
                    }
                    "robbins_monro" => {
                        let r =
                            diagnostics::check_robbins_monro_conditions(&p, law_x, law_y, &traces);
                        let o = report_outcome(name, &r);
                        conditions.push(r);
                        o
                    }
                    "renlund" => {
                        let floor = law_x.lower_bound().min(law_y.lower_bound());
                        match diagnostics::check_renlund_conditions(&p, floor, &traces) {
                            Ok(r) => {
                                let o = report_outcome(name, &r);
                                conditions.push(r);
                                o
                            }
                            Err(e) => TestOutcome::failed(name, e.to_string()),
                        }
                    }
                    other => {
                        TestOutcome::failed(other, "not defined for the opposite variant".into())
                    }
                };
                outcomes.push(outcome);
            }
        }
        Variant::EqualAddition { schedule } => {
            let p2 = theory::predict_model2(
                spec.config.initial_total(),
                spec.config.draw_size,
                schedule,
                horizon,
            )?;
            let rt: Vec<f64> = finals
                .iter()
                .map(|s| s.total() as f64 - p2.mean_tn)
                .collect();
            if p2.var_tn > 0.0 {
                push_clt(&mut samples, &mut clt, outputs, "t", &rt, p2.var_tn);
            }
            let traces: Vec<EqualAdditionTrace> = outputs
                .iter()
                .filter_map(|o| o.equal_addition.clone())
                .collect();
            let report = if tests.iter().any(|t| needs_diagnostics(t)) {
                if traces.len() != outputs.len() {
                    return Err(EnsembleError::Config(
                        "condition tests need diagnostics traces for every replicate".into(),
                    ));
                }
                Some(equal_addition_report(schedule, &traces)?)
            } else {
                None
            };
            for name in tests {
                let outcome = match (name.as_str(), &report) {
                    ("clt_t_ks", _) => {
                        if p2.var_tn > 0.0 {
                            ks_outcome(name, &standardize(&rt, p2.var_tn), tol)
                        } else {
                            TestOutcome::failed(name, "Var[T_N] = 0 for this schedule".into())
                        }
                    }
                    (other, Some(r)) => match r.get(other) {
                        Some(check) => TestOutcome::from_check(other, check),
                        None => TestOutcome::failed(
                            other,
                            "not defined for the equal-addition variant".into(),
                        ),
                    },
                    (other, None) => TestOutcome::failed(
                        other,
                        "not defined for the equal-addition variant".into(),
                    ),
                };
                outcomes.push(outcome);
            }
            conditions.extend(report);
        }
    }
    Ok(EnsembleReport {
        summary: EnsembleSummary {
            replicates: spec.replicates,
            horizon,
            seed: spec.seed,
            checkpoints,
            clt,
            tests: outcomes,
            conditions,
        },
        clt_samples: samples,
    })
}

fn equal_addition_report(
    schedule: &LawSchedule,
    traces: &[EqualAdditionTrace],
) -> Result<ConditionReport, EnsembleError> {
    diagnostics::check_equal_addition(schedule, traces).map_err(|source| {
        EnsembleError::Diagnostics {
            replicate: 0,
            source,
        }
    })
}

fn report_outcome(name: &str, report: &ConditionReport) -> TestOutcome {
    let failed: Vec<&str> = report
        .checks
        .iter()
        .filter(|c| !c.passed())
        .map(|c| c.label.as_str())
        .collect();
    TestOutcome {
        name: name.into(),
        statistic: (report.checks.len() - failed.len()) as f64,
        threshold: report.checks.len() as f64,
        p_value: None,
        pass: failed.is_empty(),
        detail: if failed.is_empty() {
            "all conditions pass".into()
        } else {
            format!("not passing: {}", failed.join(", "))
        },
    }
}

/// The prediction matching a config: opposite or equal-addition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Prediction {
    Opposite(TheoryPrediction),
    EqualAddition(Model2Prediction),
}

pub fn predict(config: &UrnConfig) -> Result<Prediction, TheoryError> {
    Ok(match &config.variant {
        Variant::Opposite { law_x, law_y } => {
            Prediction::Opposite(theory::predict_model1(config.draw_size, law_x, law_y)?)
        }
        Variant::EqualAddition { schedule } => Prediction::EqualAddition(theory::predict_model2(
            config.initial_total(),
            config.draw_size,
            schedule,
            config.horizon,
        )?),
    })
}
