//! Stochastic-approximation quantities along simulated paths, and empirical
//! checks of the hypotheses of the Robbins–Monro and Renlund theorems.
//!
//! Opposite variant, with `T' = T_{n+1}`:
//!
//! ```text
//! D_{n+1}   = X (1 - Z_n)(m - xi) - Z_n Y xi,      E[D | F_n] = f(Z_n)
//! eps_{n+1} = D_{n+1} - f(Z_n)
//! Z_{n+1}   = Z_n + (f(Z_n) + eps_{n+1}) / T'
//! K_n       = sqrt(n) (Z_n - z*)
//! K_{n+1}   = (1 - Gamma_{n+1} / n) K_n + V_{n+1} / sqrt(n)
//! ```
//!
//! Equal-addition variant: `Z_n = Z_0 + M_n + R_n` with martingale part
//! `M_n = sum delta~_k xi~_k` and remainder `R_n = sum (delta_k - delta~_k) xi~_k`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{hypergeometric_pmf, AdditionLaw, DistributionError, LawSchedule};
use crate::stats;
use crate::theory::{self, TheoryError, TheoryPrediction};
use crate::urn::{TrajectoryRecord, UrnConfig, UrnState, Variant};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("trajectory was recorded without a draw log; enable draw logging")]
    MissingDrawLog,
    #[error("draw log has {log} steps but the trajectory ran {steps}")]
    LogLength { log: usize, steps: u64 },
    #[error("expected the {expected} variant")]
    WrongVariant { expected: &'static str },
    #[error("need at least {needed} traces, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("E[X_n] vanishes at step {0}")]
    ZeroMean(u64),
    #[error("schedule has 2 alpha - gamma = {0}; need a positive value")]
    WeakSchedule(f64),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

/// `|V_k| > sqrt(LINDEBERG_LEVEL * k)` marks a term of the truncated sum.
pub const LINDEBERG_LEVEL: f64 = 0.01;
/// Renlund traces below this count are refused.
pub const MIN_RENLUND_TRACES: usize = 100;
/// Samples a (Z, T) bin needs before it counts.
pub const MIN_BIN_SAMPLES: usize = 50;
pub const PROPORTION_BINS: usize = 20;
/// Binned conditional means must sit within this many standard errors of 0.
pub const BIN_SE_LIMIT: f64 = 4.0;

/// Moments of the next step given `F_n`, by exact enumeration over the
/// draw and the addition laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalMoments {
    /// `E[D_{n+1} | F_n]`; equals `f(Z_n)`.
    pub drift: f64,
    /// `E[eps_{n+1}^2 | F_n]`.
    pub noise_second: f64,
    pub renlund_noise_mean: f64,
    pub renlund_noise_second: f64,
}

/// One checkpoint `n >= 1` of an opposite-variant path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OppositePoint {
    pub step: u64,
    pub white: u64,
    pub total: u64,
    pub proportion: f64,
    pub prev_proportion: f64,
    pub prev_total: u64,
    /// `1 / T_n`.
    pub step_size: f64,
    pub increment: f64,
    pub noise: f64,
    /// `K_n`.
    pub scaled_error: f64,
    /// `Gamma_n`.
    pub renlund_gain: f64,
    /// `V_n`.
    pub renlund_noise: f64,
    /// `sqrt(1 + 1/n) - 1`.
    pub alpha: f64,
    /// `(1/n) sum_{k <= n} V_k^2 1{V_k^2 > LINDEBERG_LEVEL k}`.
    pub lindeberg: f64,
    pub next: ConditionalMoments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OppositeTrace {
    pub initial: UrnState,
    pub points: Vec<OppositePoint>,
    /// Largest one-step gap between `Z_n + (f + eps)/T'` and the simulated
    /// proportion.
    pub max_reconstruction_error: f64,
    /// Largest gap in the Renlund recursion for `K_n`.
    pub max_renlund_error: f64,
}

impl OppositeTrace {
    pub fn at(&self, step: u64) -> Option<&OppositePoint> {
        self.points
            .binary_search_by_key(&step, |p| p.step)
            .ok()
            .map(|i| &self.points[i])
    }

    pub fn last(&self) -> Option<&OppositePoint> {
        self.points.last()
    }
}

fn opposite_laws(config: &UrnConfig) -> Result<(&AdditionLaw, &AdditionLaw), DiagnosticsError> {
    match &config.variant {
        Variant::Opposite { law_x, law_y } => Ok((law_x, law_y)),
        _ => Err(DiagnosticsError::WrongVariant {
            expected: "opposite",
        }),
    }
}

fn check_log(record: &TrajectoryRecord) -> Result<&crate::urn::DrawLog, DiagnosticsError> {
    let log = record
        .draws
        .as_ref()
        .ok_or(DiagnosticsError::MissingDrawLog)?;
    if log.len() as u64 != record.final_state.step - record.initial.step {
        return Err(DiagnosticsError::LogLength {
            log: log.len(),
            steps: record.final_state.step,
        });
    }
    Ok(log)
}

struct Enumerator {
    m: u64,
    x: Vec<(u64, f64)>,
    y: Vec<(u64, f64)>,
}

impl Enumerator {
    fn moments(&self, p: &TheoryPrediction, white: u64, total: u64, n: u64) -> ConditionalMoments {
        let z = white as f64 / total as f64;
        let f = p.drift(z);
        let scale = ((n * (n + 1)) as f64).sqrt();
        let mut out = ConditionalMoments {
            drift: 0.0,
            noise_second: 0.0,
            renlund_noise_mean: 0.0,
            renlund_noise_second: 0.0,
        };
        let draw = match hypergeometric_pmf(white, total, self.m) {
            Ok(d) => d,
            Err(_) => return out,
        };
        for (&xi, &pxi) in &draw {
            let rest = self.m - xi;
            for &(x, px) in &self.x {
                for &(y, py) in &self.y {
                    let w = pxi * px * py;
                    let d = x as f64 * (1.0 - z) * rest as f64 - z * y as f64 * xi as f64;
                    let eps = d - f;
                    let next_total = (total + x * rest + y * xi) as f64;
                    let v = eps * scale / next_total;
                    out.drift += w * d;
                    out.noise_second += w * eps * eps;
                    out.renlund_noise_mean += w * v;
                    out.renlund_noise_second += w * v * v;
                }
            }
        }
        out
    }
}

/// Walk the logged draws of an opposite-variant path and fill every
/// stochastic-approximation field at the recorded checkpoints.
pub fn extract_model1_diagnostics(
    record: &TrajectoryRecord,
    config: &UrnConfig,
    prediction: &TheoryPrediction,
) -> Result<OppositeTrace, DiagnosticsError> {
    let (law_x, law_y) = opposite_laws(config)?;
    let log = check_log(record)?;
    let m = config.draw_size;
    let enumerator = Enumerator {
        m,
        x: law_x.pmf(),
        y: law_y.pmf(),
    };
    let zs = prediction.z_star;

    let mut wanted = record.checkpoints.iter().filter(|s| s.step > 0).peekable();
    let mut points = Vec::with_capacity(record.checkpoints.len());
    let (mut white, mut total) = (record.initial.white, record.initial.total());
    let mut lindeberg_sum = 0.0;
    let mut max_rec = 0.0f64;
    let mut max_ren = 0.0f64;

    for (i, ((&xi, &x), &y)) in log.xi.iter().zip(&log.x).zip(&log.y).enumerate() {
        let n = i as u64; // state before the step is F_n
        let z = white as f64 / total as f64;
        let rest = m - xi;
        let next_white = white + x * rest;
        let next_total = total + x * rest + y * xi;
        let next_z = next_white as f64 / next_total as f64;
        let t_next = next_total as f64;

        let d = x as f64 * (1.0 - z) * rest as f64 - z * y as f64 * xi as f64;
        let f = prediction.drift(z);
        let eps = d - f;
        max_rec = max_rec.max((z + (f + eps) / t_next - next_z).abs());

        let nf = n as f64;
        let alpha = if n > 0 {
            (1.0 + 1.0 / nf).sqrt() - 1.0
        } else {
            0.0
        };
        let g = prediction.gain(z);
        let gain = nf * g / t_next - nf * alpha * (1.0 - g / t_next);
        let v = eps * (nf * (nf + 1.0)).sqrt() / t_next;
        let k_now = nf.sqrt() * (z - zs);
        let k_next = (nf + 1.0).sqrt() * (next_z - zs);
        if n > 0 {
            let rhs = (1.0 - gain / nf) * k_now + v / nf.sqrt();
            max_ren = max_ren.max((k_next - rhs).abs());
        }
        let step = n + 1;
        if v * v > LINDEBERG_LEVEL * step as f64 {
            lindeberg_sum += v * v;
        }

        if wanted.peek().map(|s| s.step) == Some(step) {
            wanted.next();
            let sf = step as f64;
            points.push(OppositePoint {
                step,
                white: next_white,
                total: next_total,
                proportion: next_z,
                prev_proportion: z,
                prev_total: total,
                step_size: 1.0 / t_next,
                increment: d,
                noise: eps,
                scaled_error: k_next,
                renlund_gain: gain,
                renlund_noise: v,
                alpha: (1.0 + 1.0 / sf).sqrt() - 1.0,
                lindeberg: lindeberg_sum / sf,
                next: enumerator.moments(prediction, next_white, next_total, step),
            });
        }
        white = next_white;
        total = next_total;
    }
    Ok(OppositeTrace {
        initial: record.initial,
        points,
        max_reconstruction_error: max_rec,
        max_renlund_error: max_ren,
    })
}

/// One checkpoint `n >= 1` of an equal-addition path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualAdditionPoint {
    pub step: u64,
    pub white: u64,
    pub total: u64,
    pub proportion: f64,
    pub prev_proportion: f64,
    pub prev_total: u64,
    /// `X_n / T_n`.
    pub weight: f64,
    /// `(alpha+1) X_n / (m n E[X_n])`.
    pub normalized_weight: f64,
    /// `xi_n - m Z_{n-1}`.
    pub centered_draw: f64,
    pub martingale_part: f64,
    pub remainder_part: f64,
    pub proportion_increment: f64,
    pub martingale_increment: f64,
    /// `n^lambda (T_n / (n E[X_n]) - m/(alpha+1))`.
    pub scaled_total_error: f64,
    /// `n^lambda`.
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualAdditionTrace {
    pub initial: UrnState,
    pub lambda: f64,
    pub points: Vec<EqualAdditionPoint>,
    /// Largest `|Z_n - Z_0 - M_n - R_n|` over every step.
    pub max_decomposition_error: f64,
}

impl EqualAdditionTrace {
    pub fn at(&self, step: u64) -> Option<&EqualAdditionPoint> {
        self.points
            .binary_search_by_key(&step, |p| p.step)
            .ok()
            .map(|i| &self.points[i])
    }
}

/// Reject `lambda` outside `(0, alpha - gamma/2)` and schedules with
/// `2 alpha - gamma <= 0`.
pub fn validate_model2_exponent(
    schedule: &LawSchedule,
    lambda: f64,
) -> Result<(), DiagnosticsError> {
    theory::validate_theta_exponent(schedule, lambda)?;
    if !matches!(schedule, LawSchedule::Constant { .. }) {
        let gap = 2.0 * schedule.mean_exponent() - schedule.variance_exponent();
        if gap <= 0.0 {
            return Err(DiagnosticsError::WeakSchedule(gap));
        }
    }
    Ok(())
}

pub fn extract_model2_diagnostics(
    record: &TrajectoryRecord,
    config: &UrnConfig,
    lambda: f64,
) -> Result<EqualAdditionTrace, DiagnosticsError> {
    let schedule = match &config.variant {
        Variant::EqualAddition { schedule } => schedule,
        _ => {
            return Err(DiagnosticsError::WrongVariant {
                expected: "equal-addition",
            })
        }
    };
    validate_model2_exponent(schedule, lambda)?;
    let log = check_log(record)?;
    let m = config.draw_size;
    let mf = m as f64;
    let order = schedule.mean_exponent() + 1.0;

    let z0 = record.initial.proportion();
    let mut wanted = record.checkpoints.iter().filter(|s| s.step > 0).peekable();
    let mut points = Vec::with_capacity(record.checkpoints.len());
    let (mut white, mut total) = (record.initial.white, record.initial.total());
    let (mut mart, mut rem) = (0.0f64, 0.0f64);
    let mut max_err = 0.0f64;

    for (i, (&xi, &x)) in log.xi.iter().zip(&log.x).enumerate() {
        let step = i as u64 + 1;
        let mean = schedule.mean_at(step);
        if mean <= 0.0 {
            return Err(DiagnosticsError::ZeroMean(step));
        }
        let z = white as f64 / total as f64;
        let next_white = white + x * xi;
        let next_total = total + x * m;
        let next_z = next_white as f64 / next_total as f64;

        let weight = x as f64 / next_total as f64;
        let normalized = order * x as f64 / (mf * step as f64 * mean);
        let centered = xi as f64 - mf * z;
        let dm = normalized * centered;
        mart += dm;
        rem += (weight - normalized) * centered;
        max_err = max_err.max((next_z - z0 - mart - rem).abs());

        if wanted.peek().map(|s| s.step) == Some(step) {
            wanted.next();
            let sf = step as f64;
            let theta = sf.powf(lambda);
            points.push(EqualAdditionPoint {
                step,
                white: next_white,
                total: next_total,
                proportion: next_z,
                prev_proportion: z,
                prev_total: total,
                weight,
                normalized_weight: normalized,
                centered_draw: centered,
                martingale_part: mart,
                remainder_part: rem,
                proportion_increment: next_z - z,
                martingale_increment: dm,
                scaled_total_error: theta * (next_total as f64 / (sf * mean) - mf / order),
                theta,
            });
        }
        white = next_white;
        total = next_total;
    }
    Ok(EqualAdditionTrace {
        initial: record.initial,
        lambda,
        points,
        max_decomposition_error: max_err,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionStatus {
    Pass,
    Fail,
    Unverifiable,
}

impl ConditionStatus {
    fn from_bool(ok: bool) -> Self {
        if ok {
            ConditionStatus::Pass
        } else {
            ConditionStatus::Fail
        }
    }
}

/// One hypothesis, the statistic measured for it and the threshold it was
/// held to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub label: String,
    pub description: String,
    pub statistic: f64,
    pub threshold: f64,
    pub status: ConditionStatus,
    pub detail: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub values: BTreeMap<String, f64>,
}

impl ConditionCheck {
    fn new(
        label: &str,
        description: &str,
        statistic: f64,
        threshold: f64,
        status: ConditionStatus,
    ) -> Self {
        Self {
            label: label.into(),
            description: description.into(),
            statistic,
            threshold,
            status,
            detail: String::new(),
            values: BTreeMap::new(),
        }
    }

    fn detail(mut self, detail: String) -> Self {
        self.detail = detail;
        self
    }

    fn value(mut self, key: &str, v: f64) -> Self {
        self.values.insert(key.into(), v);
        self
    }

    pub fn passed(&self) -> bool {
        self.status == ConditionStatus::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub theorem: String,
    pub checks: Vec<ConditionCheck>,
}

impl ConditionReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(ConditionCheck::passed)
    }

    pub fn get(&self, label: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.label == label)
    }
}

/// Outcome of binning `(Z, T)`-conditioned samples and testing each bin's
/// mean against zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinnedMean {
    pub bins_used: usize,
    pub bins_skipped: usize,
    /// Largest `|mean| / SE` over the used bins.
    pub max_abs_t: f64,
}

/// Bin `(z, total, value)` samples on 20 proportion bins times `log2 T`
/// buckets; bins with fewer than [`MIN_BIN_SAMPLES`] are skipped.
pub fn binned_zero_mean(samples: impl IntoIterator<Item = (f64, u64, f64)>) -> BinnedMean {
    let mut bins: BTreeMap<(usize, u32), (usize, f64, f64)> = BTreeMap::new();
    for (z, total, v) in samples {
        let zb = ((z * PROPORTION_BINS as f64) as usize).min(PROPORTION_BINS - 1);
        let tb = 63 - total.max(1).leading_zeros();
        let e = bins.entry((zb, tb)).or_insert((0, 0.0, 0.0));
        e.0 += 1;
        e.1 += v;
        e.2 += v * v;
    }
    let mut out = BinnedMean {
        bins_used: 0,
        bins_skipped: 0,
        max_abs_t: 0.0,
    };
    for &(count, sum, sum_sq) in bins.values() {
        if count < MIN_BIN_SAMPLES {
            out.bins_skipped += 1;
            continue;
        }
        out.bins_used += 1;
        let c = count as f64;
        let mean = sum / c;
        let var = ((sum_sq - c * mean * mean) / (c - 1.0)).max(0.0);
        let se = (var / c).sqrt();
        let t = if se > 0.0 {
            mean.abs() / se
        } else if mean.abs() <= 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        out.max_abs_t = out.max_abs_t.max(t);
    }
    out
}

fn binned_check(label: &str, description: &str, binned: BinnedMean) -> ConditionCheck {
    let status = if binned.bins_used == 0 {
        ConditionStatus::Unverifiable
    } else {
        ConditionStatus::from_bool(binned.max_abs_t <= BIN_SE_LIMIT)
    };
    ConditionCheck::new(label, description, binned.max_abs_t, BIN_SE_LIMIT, status)
        .detail(format!(
            "{} bins used, {} skipped (< {MIN_BIN_SAMPLES} samples)",
            binned.bins_used, binned.bins_skipped
        ))
        .value("bins_used", binned.bins_used as f64)
}

const DRIFT_GRID: usize = 1000;

/// Hypotheses (a)–(d) of the Robbins–Monro theorem for the opposite
/// variant. `traces` feed the empirical checks of (a) and (d).
pub fn check_robbins_monro_conditions(
    prediction: &TheoryPrediction,
    law_x: &AdditionLaw,
    law_y: &AdditionLaw,
    traces: &[OppositeTrace],
) -> ConditionReport {
    let zs = prediction.z_star;
    let m = prediction.draw_size;
    let mut checks = Vec::with_capacity(4);

    let noise = binned_zero_mean(traces.iter().flat_map(|t| {
        t.points
            .iter()
            .map(|p| (p.prev_proportion, p.prev_total, p.noise))
    }));
    checks.push(binned_check(
        "a",
        "noise has conditional mean zero (binned on Z, T)",
        noise,
    ));

    let mut worst = f64::NEG_INFINITY;
    let mut growth = 0.0f64;
    for i in 0..=DRIFT_GRID {
        let z = i as f64 / DRIFT_GRID as f64;
        let f = prediction.drift(z);
        growth = growth.max(f.abs() / (1.0 + z.abs()));
        if (z - zs).abs() > 1e-12 {
            worst = worst.max(f * (z - zs));
        }
    }
    checks.push(
        ConditionCheck::new(
            "b",
            "f(z)(z - z*) < 0 on a grid of [0, 1] without z*",
            worst,
            0.0,
            ConditionStatus::from_bool(worst < 0.0),
        )
        .detail(format!("{} grid points", DRIFT_GRID + 1)),
    );
    let k = prediction.drift_growth_k;
    checks.push(ConditionCheck::new(
        "c",
        "|f(z)| <= K (1 + |z|)",
        growth,
        k,
        ConditionStatus::from_bool(growth <= k),
    ));

    let floor = law_x.lower_bound().min(law_y.lower_bound());
    let check_d = if floor == 0 {
        ConditionCheck::new(
            "d",
            "sum 1/T_n diverges and sum 1/T_n^2 converges via T_n >= T0 + n m L",
            f64::NAN,
            1.0,
            ConditionStatus::Unverifiable,
        )
        .detail("growth floor L = 0; the floor argument needs L > 0".into())
    } else {
        let rate = (m * floor) as f64;
        let mut ratio = f64::INFINITY;
        for t in traces {
            let t0 = t.initial.total() as f64;
            for p in &t.points {
                ratio = ratio.min((p.total as f64 - t0) / (p.step as f64 * rate));
            }
        }
        let ok = !(ratio < 1.0);
        ConditionCheck::new(
            "d",
            "sum 1/T_n diverges and sum 1/T_n^2 converges via T_n >= T0 + n m L",
            ratio,
            1.0,
            ConditionStatus::from_bool(ok),
        )
        .detail(format!(
            "L = {floor}; T_n is between T0 + n m L and T0 + n m max(X, Y); statistic is min (T_n - T0)/(n m L) over checkpoints"
        ))
        .value("growth_floor", floor as f64)
    };
    checks.push(check_d);
    ConditionReport {
        theorem: "robbins_monro".into(),
        checks,
    }
}

/// Powers of ten up to `horizon` present among the trace checkpoints.
fn decades(trace: &OppositeTrace) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 10u64;
    while let Some(last) = trace.last() {
        if d > last.step {
            break;
        }
        if trace.at(d).is_some() {
            out.push(d);
        }
        d *= 10;
    }
    out
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

pub const GAIN_BAND: (f64, f64) = (1.4, 1.6);
pub const SECOND_MOMENT_DRIFT: f64 = 0.05;

/// Hypotheses (a)–(e) of Renlund's CLT for `K_n`, checked over an ensemble
/// of opposite-variant traces with a common checkpoint grid.
pub fn check_renlund_conditions(
    prediction: &TheoryPrediction,
    growth_floor: u64,
    traces: &[OppositeTrace],
) -> Result<ConditionReport, DiagnosticsError> {
    if traces.len() < MIN_RENLUND_TRACES {
        return Err(DiagnosticsError::InsufficientData {
            needed: MIN_RENLUND_TRACES,
            got: traces.len(),
        });
    }
    let m = prediction.draw_size as f64;
    let decades = decades(&traces[0]);
    let column = |step: u64, f: &dyn Fn(&OppositePoint) -> f64| -> Vec<f64> {
        traces.iter().filter_map(|t| t.at(step).map(f)).collect()
    };
    let mut checks = Vec::with_capacity(5);

    // (a)
    let tail: Vec<u64> = decades.iter().rev().take(3).rev().copied().collect();
    let rates: Vec<f64> = tail
        .iter()
        .map(|&n| {
            stats::median(&column(n, &|p| {
                (n as f64).sqrt() * p.next.renlund_noise_mean.abs()
            }))
        })
        .collect();
    let mut a = if tail.len() < 3 {
        ConditionCheck::new(
            "a",
            "sqrt(n) |E[V_{n+1} | F_n]| -> 0",
            f64::NAN,
            0.0,
            ConditionStatus::Unverifiable,
        )
        .detail("needs three decade checkpoints".into())
    } else {
        let last = *rates.last().unwrap();
        ConditionCheck::new(
            "a",
            "sqrt(n) |E[V_{n+1} | F_n]| -> 0",
            last,
            rates[rates.len() - 2],
            ConditionStatus::from_bool(strictly_decreasing(&rates)),
        )
        .detail("median over traces, exact conditional mean, strictly decreasing over the last three decades".into())
    };
    for (n, r) in tail.iter().zip(&rates) {
        a = a.value(&format!("n={n}"), *r);
    }
    checks.push(a);

    // (b)
    let mut sup = 0.0f64;
    for t in traces {
        for p in t.points.iter().filter(|p| p.step >= 2) {
            sup = sup.max(p.next.renlund_noise_second);
        }
    }
    let check_b = if growth_floor == 0 {
        ConditionCheck::new(
            "b",
            "E[V_{n+1}^2 | F_n] bounded",
            sup,
            f64::INFINITY,
            ConditionStatus::Unverifiable,
        )
        .detail("growth floor L = 0; no explicit bound".into())
    } else {
        let l = growth_floor as f64;
        let bound = 3.0 * prediction.noise_bound / (2.0 * m * m * l * l);
        ConditionCheck::new(
            "b",
            "E[V_{n+1}^2 | F_n] bounded",
            sup,
            bound,
            ConditionStatus::from_bool(sup <= bound),
        )
        .detail("sup over checkpoints n >= 2 against 3 C_eps / (2 m^2 L^2)".into())
    };
    checks.push(check_b);

    // (c)
    let last_two: Vec<u64> = decades.iter().rev().take(2).rev().copied().collect();
    let means: Vec<f64> = last_two
        .iter()
        .map(|&n| stats::mean(&column(n, &|p| p.next.renlund_noise_second)))
        .collect();
    let mut c = if means.len() < 2 {
        ConditionCheck::new(
            "c",
            "E[V_{n+1}^2 | F_n] converges to a positive constant",
            f64::NAN,
            SECOND_MOMENT_DRIFT,
            ConditionStatus::Unverifiable,
        )
    } else {
        let change = (means[1] - means[0]).abs() / means[1];
        ConditionCheck::new(
            "c",
            "E[V_{n+1}^2 | F_n] converges to a positive constant",
            change,
            SECOND_MOMENT_DRIFT,
            ConditionStatus::from_bool(change < SECOND_MOMENT_DRIFT && means[1] > 0.0),
        )
        .detail("relative change of the ensemble mean over the last two decades".into())
        .value("limit_estimate", means[1])
    };
    let zs = prediction.z_star;
    let t_rate = prediction.tn_rate;
    let (add, draw) = {
        let (a, d) = prediction.noise_variance_components(zs, u64::MAX);
        (a / (t_rate * t_rate), d / (t_rate * t_rate))
    };
    c = c
        .value("sigma_sq_closed_form", prediction.sigma_sq)
        .value("sigma_sq_full", prediction.sigma_sq_full)
        .value("sigma_sq_addition", add)
        .value("sigma_sq_draw", draw);
    checks.push(c);

    // (d)
    let final_step = traces[0].last().map(|p| p.step).unwrap_or(0);
    let gains = column(final_step, &|p| p.renlund_gain);
    let med = stats::median(&gains);
    checks.push(
        ConditionCheck::new(
            "d",
            "Gamma_n -> 3/2",
            med,
            prediction.gamma_limit,
            ConditionStatus::from_bool(med >= GAIN_BAND.0 && med <= GAIN_BAND.1),
        )
        .detail(format!(
            "median at n = {final_step} must lie in [{}, {}]",
            GAIN_BAND.0, GAIN_BAND.1
        )),
    );

    // (e)
    let lind_final = stats::mean(&column(final_step, &|p| p.lindeberg));
    let first = decades.first().copied().unwrap_or(final_step);
    let lind_first = stats::mean(&column(first, &|p| p.lindeberg));
    checks.push(
        ConditionCheck::new(
            "e",
            "(1/n) sum V_k^2 1{V_k^2 > eps k} -> 0",
            lind_final,
            LINDEBERG_LEVEL,
            ConditionStatus::from_bool(lind_final < LINDEBERG_LEVEL && lind_final < lind_first),
        )
        .detail(format!(
            "eps = {LINDEBERG_LEVEL}; ensemble mean at n = {final_step} below eps and below its value at n = {first}"
        ))
        .value("at_first_decade", lind_first),
    );

    Ok(ConditionReport {
        theorem: "renlund".into(),
        checks,
    })
}

/// Fraction of traces with `|T~_late| < |T~_early|`.
pub fn scaled_total_decay(traces: &[EqualAdditionTrace], early: u64, late: u64) -> f64 {
    let hits = traces
        .iter()
        .filter(|t| match (t.at(early), t.at(late)) {
            (Some(a), Some(b)) => b.scaled_total_error.abs() < a.scaled_total_error.abs(),
            _ => false,
        })
        .count();
    hits as f64 / traces.len().max(1) as f64
}

/// Cauchy-tail criterion for one path: `s(n0) = max_{n >= n0} |v_n - v_N|`
/// over checkpoints must strictly decrease across `starts`.
pub fn cauchy_tail_holds(steps: &[u64], values: &[f64], starts: &[u64]) -> bool {
    let Some(&last) = values.last() else {
        return false;
    };
    let tails: Vec<f64> = starts
        .iter()
        .map(|&n0| {
            steps
                .iter()
                .zip(values)
                .filter(|(s, _)| **s >= n0)
                .map(|(_, v)| (v - last).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    strictly_decreasing(&tails)
}

pub const PATH_FRACTION: f64 = 0.9;

/// Almost-sure convergence checks of the equal-addition variant.
pub fn check_equal_addition(
    schedule: &LawSchedule,
    traces: &[EqualAdditionTrace],
) -> Result<ConditionReport, DiagnosticsError> {
    let Some(first) = traces.first() else {
        return Err(DiagnosticsError::InsufficientData { needed: 1, got: 0 });
    };
    let horizon = first.points.last().map(|p| p.step).unwrap_or(0);
    let mut starts = Vec::new();
    let mut d = 10u64;
    while d < horizon {
        starts.push(d);
        d *= 10;
    }
    let mut checks = Vec::new();

    let early = 100.min(horizon);
    let decay = scaled_total_decay(traces, early, horizon);
    checks.push(
        ConditionCheck::new(
            "scaled_total_decay",
            "|T~_n| shrinks toward 0",
            decay,
            PATH_FRACTION,
            ConditionStatus::from_bool(decay >= PATH_FRACTION),
        )
        .detail(format!(
            "fraction of paths with |T~_{horizon}| < |T~_{early}|, lambda = {}",
            first.lambda
        )),
    );

    let tail_fraction = |pick: &dyn Fn(&EqualAdditionPoint) -> f64| -> f64 {
        let hits = traces
            .iter()
            .filter(|t| {
                let steps: Vec<u64> = t.points.iter().map(|p| p.step).collect();
                let values: Vec<f64> = t.points.iter().map(pick).collect();
                cauchy_tail_holds(&steps, &values, &starts)
            })
            .count();
        hits as f64 / traces.len() as f64
    };
    for (label, pick) in [
        (
            "proportion_cauchy_tail",
            &(|p: &EqualAdditionPoint| p.proportion) as &dyn Fn(&EqualAdditionPoint) -> f64,
        ),
        ("martingale_cauchy_tail", &|p: &EqualAdditionPoint| {
            p.martingale_part
        }),
        ("remainder_cauchy_tail", &|p: &EqualAdditionPoint| {
            p.remainder_part
        }),
    ] {
        let frac = tail_fraction(pick);
        let status = if starts.len() < 2 {
            ConditionStatus::Unverifiable
        } else {
            ConditionStatus::from_bool(frac >= PATH_FRACTION)
        };
        checks.push(
            ConditionCheck::new(
                label,
                "sup_{n >= n0} |v_n - v_N| decreasing in n0",
                frac,
                PATH_FRACTION,
                status,
            )
            .detail(format!("fraction of paths, n0 in {starts:?}")),
        );
    }

    let worst = traces
        .iter()
        .map(|t| t.max_decomposition_error)
        .fold(0.0, f64::max);
    checks.push(ConditionCheck::new(
        "decomposition",
        "Z_n = Z_0 + M_n + R_n",
        worst,
        1e-12,
        ConditionStatus::from_bool(worst <= 1e-12),
    ));

    checks.push(binned_check(
        "proportion_martingale",
        "Z_n increments have conditional mean zero",
        binned_zero_mean(traces.iter().flat_map(|t| {
            t.points
                .iter()
                .map(|p| (p.prev_proportion, p.prev_total, p.proportion_increment))
        })),
    ));
    checks.push(binned_check(
        "martingale_part",
        "M_n increments have conditional mean zero",
        binned_zero_mean(traces.iter().flat_map(|t| {
            t.points
                .iter()
                .map(|p| (p.prev_proportion, p.prev_total, p.martingale_increment))
        })),
    ));

    let finals: Vec<f64> = traces
        .iter()
        .filter_map(|t| {
            t.points
                .last()
                .map(|p| p.martingale_part * p.martingale_part)
        })
        .collect();
    let second = stats::mean(&finals);
    let bound = theory::martingale_part_l2_bound(schedule, 1_000_000)?;
    checks.push(ConditionCheck::new(
        "martingale_l2",
        "E[M_N^2] below the series bound",
        second,
        bound,
        ConditionStatus::from_bool(second <= bound),
    ));

    Ok(ConditionReport {
        theorem: "equal_addition".into(),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;
    use crate::urn::{run_trajectory, CheckpointGrid};

    fn reference() -> (UrnConfig, TheoryPrediction) {
        let x = AdditionLaw::uniform(1, 3).unwrap();
        let y = AdditionLaw::uniform(2, 6).unwrap();
        let p = theory::predict_model1(2, &x, &y).unwrap();
        let c = UrnConfig::new(2, 5, 5, Variant::Opposite { law_x: x, law_y: y }, 500).unwrap();
        (c, p)
    }

    #[test]
    fn missing_log_is_an_error() {
        let (c, p) = reference();
        let r = run_trajectory(
            &c,
            &mut RandomStream::from_seed(1),
            &CheckpointGrid::default(),
            false,
        )
        .unwrap();
        assert_eq!(
            extract_model1_diagnostics(&r, &c, &p),
            Err(DiagnosticsError::MissingDrawLog)
        );
    }

    #[test]
    fn reconstruction_and_renlund_identity() {
        let (c, p) = reference();
        let r = run_trajectory(
            &c,
            &mut RandomStream::from_seed(2),
            &CheckpointGrid::default(),
            true,
        )
        .unwrap();
        let t = extract_model1_diagnostics(&r, &c, &p).unwrap();
        assert!(
            t.max_reconstruction_error < 1e-14,
            "{}",
            t.max_reconstruction_error
        );
        assert!(t.max_renlund_error < 1e-10, "{}", t.max_renlund_error);
        assert_eq!(t.points.last().unwrap().step, 500);
    }

    #[test]
    fn enumerated_moments_match_closed_forms() {
        let (c, p) = reference();
        let r = run_trajectory(
            &c,
            &mut RandomStream::from_seed(3),
            &CheckpointGrid::default(),
            true,
        )
        .unwrap();
        let t = extract_model1_diagnostics(&r, &c, &p).unwrap();
        for q in &t.points {
            let z = q.proportion;
            assert!((q.next.drift - p.drift(z)).abs() < 1e-9);
            let v = p.noise_variance(z, Some(q.total));
            assert!((q.next.noise_second - v).abs() < 1e-9 * v.max(1.0));
            let (a, d) = p.noise_variance_components(z, q.total);
            assert!((a + d - v).abs() < 1e-9 * v.max(1.0));
        }
    }

    #[test]
    fn deterministic_laws_leave_only_draw_noise() {
        let x = AdditionLaw::constant(2);
        let y = AdditionLaw::constant(5);
        let p = theory::predict_model1(3, &x, &y).unwrap();
        for &(z, t) in &[(0.3, 40u64), (0.5, 1000), (0.8, 77)] {
            let (a, _) = p.noise_variance_components(z, t);
            assert_eq!(a, 0.0);
        }
    }

    #[test]
    fn wrong_variant_rejected() {
        let c = UrnConfig::new(
            2,
            1,
            1,
            Variant::EqualAddition {
                schedule: LawSchedule::Binomial { p: 0.5 },
            },
            10,
        )
        .unwrap();
        let r = run_trajectory(
            &c,
            &mut RandomStream::from_seed(1),
            &CheckpointGrid::default(),
            true,
        )
        .unwrap();
        let (_, p) = reference();
        assert!(matches!(
            extract_model1_diagnostics(&r, &c, &p),
            Err(DiagnosticsError::WrongVariant { .. })
        ));
        assert!(extract_model2_diagnostics(&r, &c, 0.25).is_ok());
        assert!(matches!(
            extract_model2_diagnostics(&r, &c, 0.5),
            Err(DiagnosticsError::Theory(
                TheoryError::InvalidThetaExponent { .. }
            ))
        ));
    }

    #[test]
    fn constant_schedule_weights_differ_by_offset() {
        let c = UrnConfig::new(
            2,
            3,
            4,
            Variant::EqualAddition {
                schedule: LawSchedule::Constant { c: 3 },
            },
            2000,
        )
        .unwrap();
        let r = run_trajectory(
            &c,
            &mut RandomStream::from_seed(9),
            &CheckpointGrid::default(),
            true,
        )
        .unwrap();
        let t = extract_model2_diagnostics(&r, &c, 0.5).unwrap();
        assert!(t.max_decomposition_error < 1e-13);
        for q in &t.points {
            // X_n/T_n = 1/(T0/3 + 2n) against 1/(2n)
            let n = q.step as f64;
            assert!((q.weight - 1.0 / (7.0 / 3.0 + 2.0 * n)).abs() < 1e-15);
            assert!((q.normalized_weight - 1.0 / (2.0 * n)).abs() < 1e-15);
        }
        let tail = t.points.last().unwrap().remainder_part - t.at(100).unwrap().remainder_part;
        assert!(tail.abs() < 0.01, "{tail}");
    }

    #[test]
    fn binned_mean_flags_bias() {
        let zero: Vec<_> = (0..1000)
            .map(|i| (0.5, 100, if i % 2 == 0 { 1.0 } else { -1.0 }))
            .collect();
        assert!(binned_zero_mean(zero).max_abs_t < 1e-9);
        let biased: Vec<_> = (0..1000)
            .map(|i| (0.5, 100, if i % 2 == 0 { 1.5 } else { -0.5 }))
            .collect();
        assert!(binned_zero_mean(biased).max_abs_t > 10.0);
        let sparse: Vec<_> = (0..10).map(|_| (0.5, 100, 1.0)).collect();
        assert_eq!(binned_zero_mean(sparse).bins_used, 0);
    }

    #[test]
    fn cauchy_tail_on_known_sequences() {
        let steps: Vec<u64> = (1..=1000).collect();
        let conv: Vec<f64> = steps.iter().map(|&n| 1.0 / n as f64).collect();
        assert!(cauchy_tail_holds(&steps, &conv, &[10, 100]));
        let flat: Vec<f64> = steps
            .iter()
            .map(|&n| if n == 999 { 1.0 } else { 0.0 })
            .collect();
        assert!(!cauchy_tail_holds(&steps, &flat, &[10, 100]));
    }

    #[test]
    fn robbins_monro_floor_zero_unverifiable() {
        let x = AdditionLaw::uniform(0, 2).unwrap();
        let y = AdditionLaw::uniform(1, 3).unwrap();
        let p = theory::predict_model1(2, &x, &y).unwrap();
        let r = check_robbins_monro_conditions(&p, &x, &y, &[]);
        assert_eq!(r.get("b").unwrap().status, ConditionStatus::Pass);
        assert_eq!(r.get("c").unwrap().status, ConditionStatus::Pass);
        assert_eq!(r.get("d").unwrap().status, ConditionStatus::Unverifiable);
    }

    #[test]
    fn renlund_needs_enough_traces() {
        let (_, p) = reference();
        assert_eq!(
            check_renlund_conditions(&p, 1, &[]),
            Err(DiagnosticsError::InsufficientData {
                needed: 100,
                got: 0
            })
        );
    }
}
