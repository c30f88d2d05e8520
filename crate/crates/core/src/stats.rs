//! Sample statistics and the hypothesis tests used against the closed forms.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::RandomStream;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub const KS_MIN_SAMPLES: usize = 50;
pub const VARIANCE_MIN_SAMPLES: usize = 100;
const BOOTSTRAP_RESAMPLES: usize = 1000;
const BOOTSTRAP_SEED: u64 = 0x5eed_b007;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (0 for fewer than two samples).
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mu = mean(xs);
    xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn standard_error(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Linear-interpolated quantile of an already sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// Mean, variance and quartiles of one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
}

impl SampleSummary {
    pub fn of(xs: &[f64]) -> Self {
        let mut sorted = xs.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            count: xs.len(),
            mean: mean(xs),
            variance: variance(xs),
            q05: quantile_sorted(&sorted, 0.05),
            q25: quantile_sorted(&sorted, 0.25),
            median: quantile_sorted(&sorted, 0.5),
            q75: quantile_sorted(&sorted, 0.75),
            q95: quantile_sorted(&sorted, 0.95),
        }
    }
}

pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse of [`standard_normal_cdf`]: Acklam's rational approximation
/// followed by one Halley refinement step.
pub fn standard_normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.38357751867269e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996,
        3.754408661907416,
    ];
    const P_LOW: f64 = 0.02425;
    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let e = standard_normal_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    x - u / (1.0 + x * u / 2.0)
}

/// Regularized upper incomplete gamma `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let ln_prefix = -x + a * x.ln() - libm::lgamma(a);
    if x < a + 1.0 {
        // series for P(a, x)
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..10_000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        (1.0 - sum * ln_prefix.exp()).clamp(0.0, 1.0)
    } else {
        // Lentz continued fraction for Q(a, x)
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (ln_prefix.exp() * h).clamp(0.0, 1.0)
    }
}

/// Upper tail of the chi-square distribution with `dof` degrees of freedom.
pub fn chi_square_survival(statistic: f64, dof: usize) -> f64 {
    gamma_q(dof as f64 / 2.0, statistic / 2.0)
}

/// Survival function of the Kolmogorov distribution,
/// `Q(t) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 t^2)`.
pub fn kolmogorov_survival(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t < 0.2 {
        // the alternating series converges too slowly here and Q(t) = 1 - O(e^{-1/t^2})
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * t * t).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub samples: usize,
}

/// Two-sided one-sample Kolmogorov-Smirnov test against `N(0, 1)`.
pub fn ks_normal_test(samples: &[f64]) -> Result<KsResult, StatsError> {
    if samples.len() < KS_MIN_SAMPLES {
        return Err(StatsError::TooFewSamples {
            needed: KS_MIN_SAMPLES,
            got: samples.len(),
        });
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(StatsError::Degenerate("NaN in sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = standard_normal_cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let root = n.sqrt();
    let p_value = kolmogorov_survival((root + 0.12 + 0.11 / root) * d);
    Ok(KsResult {
        statistic: d,
        p_value,
        samples: sorted.len(),
    })
}

/// Outcome of comparing a sample variance to a target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceMatch {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub target: f64,
    pub relative_error: f64,
    pub pass: bool,
}

/// Bootstrap 95% interval for the variance; passes when `target` lies in the
/// interval widened by `tolerance_rel` on each side. A zero target is
/// checked against `absolute_threshold` instead.
pub fn variance_match_test(
    samples: &[f64],
    target: f64,
    tolerance_rel: f64,
    absolute_threshold: f64,
) -> Result<VarianceMatch, StatsError> {
    if samples.len() < VARIANCE_MIN_SAMPLES {
        return Err(StatsError::TooFewSamples {
            needed: VARIANCE_MIN_SAMPLES,
            got: samples.len(),
        });
    }
    if !(target >= 0.0 && target.is_finite()) || samples.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::Degenerate(format!(
            "target {target} or sample is not a finite nonnegative variance problem"
        )));
    }
    let estimate = variance(samples);
    let mut stream = RandomStream::from_seed(BOOTSTRAP_SEED);
    let n = samples.len();
    let mut boots: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let resample: Vec<f64> = (0..n)
                .map(|_| samples[(stream.uniform() * n as f64) as usize % n])
                .collect();
            variance(&resample)
        })
        .collect();
    boots.sort_by(f64::total_cmp);
    let ci_low = quantile_sorted(&boots, 0.025);
    let ci_high = quantile_sorted(&boots, 0.975);
    let (relative_error, pass) = if target == 0.0 {
        (f64::INFINITY, estimate < absolute_threshold)
    } else {
        (
            (estimate - target).abs() / target,
            target >= ci_low * (1.0 - tolerance_rel) && target <= ci_high * (1.0 + tolerance_rel),
        )
    };
    Ok(VarianceMatch {
        estimate,
        ci_low,
        ci_high,
        target,
        relative_error,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// Pearson goodness of fit. Cells with expected count below 5 are pooled
/// with their right neighbour.
pub fn chi_square_gof(
    observed: &[u64],
    probabilities: &[f64],
) -> Result<ChiSquareResult, StatsError> {
    if observed.len() != probabilities.len() || observed.is_empty() {
        return Err(StatsError::Degenerate(
            "observed/expected length mismatch".into(),
        ));
    }
    let n: u64 = observed.iter().sum();
    if n == 0 {
        return Err(StatsError::TooFewSamples { needed: 1, got: 0 });
    }
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut acc_o, mut acc_e) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probabilities) {
        acc_o += o as f64;
        acc_e += p * n as f64;
        if acc_e >= 5.0 {
            cells.push((acc_o, acc_e));
            acc_o = 0.0;
            acc_e = 0.0;
        }
    }
    if acc_e > 0.0 || acc_o > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += acc_o;
                last.1 += acc_e;
            }
            None => cells.push((acc_o, acc_e)),
        }
    }
    if cells.len() < 2 {
        // a single cell carries no information
        return Ok(ChiSquareResult {
            statistic: 0.0,
            degrees_of_freedom: 0,
            p_value: 1.0,
        });
    }
    let statistic: f64 = cells.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let dof = cells.len() - 1;
    Ok(ChiSquareResult {
        statistic,
        degrees_of_freedom: dof,
        p_value: chi_square_survival(statistic, dof),
    })
}
