//! Integer-valued addition laws, step-indexed schedules and the exact
//! hypergeometric draw.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::RandomStream;

/// Tail mass below which Poisson series are truncated.
const POISSON_TAIL: f64 = 1e-17;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributionError {
    #[error("cannot draw {draw} balls from an urn holding {total}")]
    DrawImpossible { draw: u64, total: u64 },
    #[error("white count {white} exceeds urn total {total}")]
    WhiteExceedsTotal { white: u64, total: u64 },
    #[error("draw size must be at least 1")]
    EmptyDraw,
    #[error("invalid law parameters: {0}")]
    InvalidLaw(String),
    #[error("step {step}: mean {mean} and variance {variance} are not attainable by the schedule's law family")]
    Unattainable { step: u64, mean: f64, variance: f64 },
    #[error("step index must be at least 1")]
    ZeroStep,
}

/// Parametric family of an [`AdditionLaw`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LawFamily {
    Constant {
        value: u64,
    },
    /// Discrete uniform on `low..=high`.
    Uniform {
        low: u64,
        high: u64,
    },
    /// `base + jump * Bernoulli(p)`.
    ShiftedBernoulli {
        base: u64,
        jump: u64,
        p: f64,
    },
    Binomial {
        trials: u64,
        p: f64,
    },
    /// `max(floor, Poisson(lambda))`.
    TruncatedPoisson {
        lambda: f64,
        floor: u64,
    },
}

/// A nonnegative integer law together with its exact first two moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LawFamily", into = "LawFamily")]
pub struct AdditionLaw {
    family: LawFamily,
    mean: f64,
    second_moment: f64,
    lower_bound: u64,
}

fn check_probability(p: f64) -> Result<(), DistributionError> {
    if p.is_finite() && (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(DistributionError::InvalidLaw(format!(
            "probability {p} outside [0, 1]"
        )))
    }
}

/// Poisson pmf terms `(k, P(k))` until the remaining tail is negligible.
fn poisson_terms(lambda: f64) -> Vec<(u64, f64)> {
    if lambda == 0.0 {
        return vec![(0, 1.0)];
    }
    let ln_lambda = lambda.ln();
    let mut ln_p = -lambda;
    let mut cumulative = 0.0;
    let mut out = Vec::new();
    let mut k = 0u64;
    loop {
        let p = ln_p.exp();
        cumulative += p;
        out.push((k, p));
        // past the mode the tail is bounded by a geometric series
        if k as f64 > lambda && (1.0 - cumulative).max(0.0) < POISSON_TAIL && p < POISSON_TAIL {
            break;
        }
        if k as f64 > lambda + 60.0 * lambda.sqrt() + 60.0 {
            break;
        }
        k += 1;
        ln_p += ln_lambda - (k as f64).ln();
    }
    out
}

impl AdditionLaw {
    pub fn new(family: LawFamily) -> Result<Self, DistributionError> {
        let (mean, second_moment, lower_bound) = match family {
            LawFamily::Constant { value } => {
                let c = value as f64;
                (c, c * c, value)
            }
            LawFamily::Uniform { low, high } => {
                if low > high {
                    return Err(DistributionError::InvalidLaw(format!(
                        "uniform range {low}..={high} is empty"
                    )));
                }
                let count = (high - low + 1) as f64;
                let sum: f64 = (low..=high).map(|k| k as f64).sum();
                let sum_sq: f64 = (low..=high).map(|k| (k as f64) * (k as f64)).sum();
                (sum / count, sum_sq / count, low)
            }
            LawFamily::ShiftedBernoulli { base, jump, p } => {
                check_probability(p)?;
                let (l, k) = (base as f64, jump as f64);
                let lower = if p == 1.0 { base + jump } else { base };
                (l + k * p, l * l + 2.0 * l * k * p + k * k * p, lower)
            }
            LawFamily::Binomial { trials, p } => {
                check_probability(p)?;
                let n = trials as f64;
                let mean = n * p;
                let lower = if p == 1.0 { trials } else { 0 };
                (mean, n * p * (1.0 - p) + mean * mean, lower)
            }
            LawFamily::TruncatedPoisson { lambda, floor } => {
                if !(lambda.is_finite() && lambda >= 0.0) {
                    return Err(DistributionError::InvalidLaw(format!(
                        "poisson rate {lambda} must be finite and nonnegative"
                    )));
                }
                let (mut m1, mut m2) = (0.0, 0.0);
                for (k, p) in poisson_terms(lambda) {
                    let v = k.max(floor) as f64;
                    m1 += v * p;
                    m2 += v * v * p;
                }
                (m1, m2, floor)
            }
        };
        Ok(Self {
            family,
            mean,
            second_moment,
            lower_bound,
        })
    }

    pub fn constant(value: u64) -> Self {
        Self::new(LawFamily::Constant { value }).expect("constant law is always valid")
    }

    pub fn uniform(low: u64, high: u64) -> Result<Self, DistributionError> {
        Self::new(LawFamily::Uniform { low, high })
    }

    pub fn shifted_bernoulli(base: u64, jump: u64, p: f64) -> Result<Self, DistributionError> {
        Self::new(LawFamily::ShiftedBernoulli { base, jump, p })
    }

    pub fn binomial(trials: u64, p: f64) -> Result<Self, DistributionError> {
        Self::new(LawFamily::Binomial { trials, p })
    }

    pub fn truncated_poisson(lambda: f64, floor: u64) -> Result<Self, DistributionError> {
        Self::new(LawFamily::TruncatedPoisson { lambda, floor })
    }

    pub fn family(&self) -> &LawFamily {
        &self.family
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    /// `second_moment - mean^2`, clamped at zero against rounding.
    pub fn variance(&self) -> f64 {
        (self.second_moment - self.mean * self.mean).max(0.0)
    }

    /// Largest `L` with `P(X >= L) = 1`.
    pub fn lower_bound(&self) -> u64 {
        self.lower_bound
    }

    pub fn is_degenerate(&self) -> bool {
        self.variance() == 0.0
    }

    /// One draw from the law.
    pub fn sample(&self, stream: &mut RandomStream) -> u64 {
        match self.family {
            LawFamily::Constant { value } => value,
            LawFamily::Uniform { low, high } => stream.rng().random_range(low..=high),
            LawFamily::ShiftedBernoulli { base, jump, p } => {
                if stream.uniform() < p {
                    base + jump
                } else {
                    base
                }
            }
            LawFamily::Binomial { trials, p } => Binomial::new(trials, p)
                .expect("validated at construction")
                .sample(stream.rng()),
            LawFamily::TruncatedPoisson { lambda, floor } => {
                if lambda == 0.0 {
                    return floor;
                }
                let draw: f64 = Poisson::new(lambda)
                    .expect("validated at construction")
                    .sample(stream.rng());
                (draw as u64).max(floor)
            }
        }
    }

    /// Support points with their probabilities, ascending. Infinite supports
    /// are truncated once the remaining tail falls below 1e-17.
    pub fn pmf(&self) -> Vec<(u64, f64)> {
        match self.family {
            LawFamily::Constant { value } => vec![(value, 1.0)],
            LawFamily::Uniform { low, high } => {
                let p = 1.0 / (high - low + 1) as f64;
                (low..=high).map(|k| (k, p)).collect()
            }
            LawFamily::ShiftedBernoulli { base, jump, p } => {
                if jump == 0 || p == 0.0 {
                    vec![(base, 1.0)]
                } else if p == 1.0 {
                    vec![(base + jump, 1.0)]
                } else {
                    vec![(base, 1.0 - p), (base + jump, p)]
                }
            }
            LawFamily::Binomial { trials, p } => binomial_pmf(trials, p),
            LawFamily::TruncatedPoisson { lambda, floor } => {
                let mut at_floor = 0.0;
                let mut out = Vec::new();
                for (k, p) in poisson_terms(lambda) {
                    if k <= floor {
                        at_floor += p;
                    } else {
                        out.push((k, p));
                    }
                }
                out.insert(0, (floor, at_floor));
                out
            }
        }
    }
}

impl TryFrom<LawFamily> for AdditionLaw {
    type Error = DistributionError;

    fn try_from(family: LawFamily) -> Result<Self, Self::Error> {
        Self::new(family)
    }
}

impl From<AdditionLaw> for LawFamily {
    fn from(law: AdditionLaw) -> Self {
        law.family
    }
}

impl fmt::Display for AdditionLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            LawFamily::Constant { value } => write!(f, "Constant({value})"),
            LawFamily::Uniform { low, high } => write!(f, "Uniform{{{low}..{high}}}"),
            LawFamily::ShiftedBernoulli { base, jump, p } => {
                write!(f, "{base} + {jump}*Bernoulli({p})")
            }
            LawFamily::Binomial { trials, p } => write!(f, "Binomial({trials}, {p})"),
            LawFamily::TruncatedPoisson { lambda, floor } => {
                write!(f, "max({floor}, Poisson({lambda}))")
            }
        }
    }
}

fn binomial_pmf(trials: u64, p: f64) -> Vec<(u64, f64)> {
    if p == 0.0 {
        return vec![(0, 1.0)];
    }
    if p == 1.0 {
        return vec![(trials, 1.0)];
    }
    // outward recursion from the mode keeps every weight in (0, 1]
    let n = trials as f64;
    let mode = (((n + 1.0) * p).floor() as u64).min(trials);
    let ratio_up = p / (1.0 - p);
    let mut weights = vec![0.0; trials as usize + 1];
    weights[mode as usize] = 1.0;
    for k in mode..trials {
        let w = weights[k as usize] * (n - k as f64) / (k as f64 + 1.0) * ratio_up;
        weights[k as usize + 1] = w;
    }
    for k in (1..=mode).rev() {
        let w = weights[k as usize] * (k as f64) / (n - k as f64 + 1.0) / ratio_up;
        weights[k as usize - 1] = w;
    }
    let total: f64 = weights.iter().sum();
    weights
        .into_iter()
        .enumerate()
        .filter(|&(_, w)| w > 0.0)
        .map(|(k, w)| (k as u64, w / total))
        .collect()
}

/// Slowly varying factor attached to a regularly varying schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlowlyVarying {
    Constant {
        c: f64,
    },
    /// `c * ln(n + 1)^beta`.
    Log {
        c: f64,
        beta: f64,
    },
}

impl SlowlyVarying {
    pub fn eval(&self, n: f64) -> f64 {
        match *self {
            SlowlyVarying::Constant { c } => c,
            SlowlyVarying::Log { c, beta } => c * (n + 1.0).ln().powf(beta),
        }
    }
}

/// Step-indexed addition laws for the equal-addition model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LawSchedule {
    /// `X_n ~ Binomial(n, p)`: orders 1 and 1, `l1 = p`, `l2 = p(1-p)`.
    Binomial { p: f64 },
    /// `X_n = c` for every n.
    Constant { c: u64 },
    /// `E[X_n] = n^mean_exponent l1(n)`, `Var[X_n] = n^variance_exponent l2(n)`,
    /// realized as `Binomial(N, q)` with `q = 1 - Var/E` and integral `N = E/q`.
    RegularlyVarying {
        mean_exponent: f64,
        variance_exponent: f64,
        mean_factor: SlowlyVarying,
        variance_factor: SlowlyVarying,
    },
}

impl LawSchedule {
    pub fn validate(&self) -> Result<(), DistributionError> {
        match *self {
            LawSchedule::Binomial { p } => check_probability(p),
            LawSchedule::Constant { .. } => Ok(()),
            LawSchedule::RegularlyVarying {
                mean_exponent,
                variance_exponent,
                ..
            } => {
                if mean_exponent > -1.0 && variance_exponent > -1.0 {
                    Ok(())
                } else {
                    Err(DistributionError::InvalidLaw(format!(
                        "schedule orders must exceed -1 (got {mean_exponent}, {variance_exponent})"
                    )))
                }
            }
        }
    }

    /// Regular-variation order of `E[X_n]`.
    pub fn mean_exponent(&self) -> f64 {
        match *self {
            LawSchedule::Binomial { .. } => 1.0,
            LawSchedule::Constant { .. } => 0.0,
            LawSchedule::RegularlyVarying { mean_exponent, .. } => mean_exponent,
        }
    }

    /// Regular-variation order of `Var[X_n]` (0 for the degenerate schedule).
    pub fn variance_exponent(&self) -> f64 {
        match *self {
            LawSchedule::Binomial { .. } => 1.0,
            LawSchedule::Constant { .. } => 0.0,
            LawSchedule::RegularlyVarying {
                variance_exponent, ..
            } => variance_exponent,
        }
    }

    pub fn mean_factor(&self, n: f64) -> f64 {
        match *self {
            LawSchedule::Binomial { p } => p,
            LawSchedule::Constant { c } => c as f64,
            LawSchedule::RegularlyVarying { mean_factor, .. } => mean_factor.eval(n),
        }
    }

    pub fn variance_factor(&self, n: f64) -> f64 {
        match *self {
            LawSchedule::Binomial { p } => p * (1.0 - p),
            LawSchedule::Constant { .. } => 0.0,
            LawSchedule::RegularlyVarying {
                variance_factor, ..
            } => variance_factor.eval(n),
        }
    }

    /// Target `E[X_n]`.
    pub fn mean_at(&self, n: u64) -> f64 {
        match *self {
            LawSchedule::Binomial { p } => n as f64 * p,
            LawSchedule::Constant { c } => c as f64,
            LawSchedule::RegularlyVarying { mean_exponent, .. } => {
                let x = n as f64;
                x.powf(mean_exponent) * self.mean_factor(x)
            }
        }
    }

    /// Target `Var[X_n]`.
    pub fn variance_at(&self, n: u64) -> f64 {
        match *self {
            LawSchedule::Binomial { p } => n as f64 * p * (1.0 - p),
            LawSchedule::Constant { .. } => 0.0,
            LawSchedule::RegularlyVarying {
                variance_exponent, ..
            } => {
                let x = n as f64;
                x.powf(variance_exponent) * self.variance_factor(x)
            }
        }
    }

    /// The concrete law of `X_n`.
    pub fn law_at_step(&self, n: u64) -> Result<AdditionLaw, DistributionError> {
        if n == 0 {
            return Err(DistributionError::ZeroStep);
        }
        match *self {
            LawSchedule::Binomial { p } => AdditionLaw::binomial(n, p),
            LawSchedule::Constant { c } => Ok(AdditionLaw::constant(c)),
            LawSchedule::RegularlyVarying { .. } => {
                let mean = self.mean_at(n);
                let variance = self.variance_at(n);
                let unattainable = DistributionError::Unattainable {
                    step: n,
                    mean,
                    variance,
                };
                if !(mean.is_finite() && variance.is_finite()) || mean < 0.0 || variance < 0.0 {
                    return Err(unattainable);
                }
                let rounded = mean.round();
                if variance == 0.0 {
                    return if (mean - rounded).abs() <= 1e-9 * mean.max(1.0) {
                        Ok(AdditionLaw::constant(rounded as u64))
                    } else {
                        Err(unattainable)
                    };
                }
                if variance >= mean {
                    return Err(unattainable);
                }
                let q = 1.0 - variance / mean;
                let trials = mean / q;
                let trials_rounded = trials.round();
                if (trials - trials_rounded).abs() > 1e-9 * trials.max(1.0) {
                    return Err(unattainable);
                }
                AdditionLaw::binomial(trials_rounded as u64, q)
            }
        }
    }
}

fn check_urn(white: u64, total: u64, draw: u64) -> Result<(), DistributionError> {
    if draw == 0 {
        return Err(DistributionError::EmptyDraw);
    }
    if white > total {
        return Err(DistributionError::WhiteExceedsTotal { white, total });
    }
    if draw > total {
        return Err(DistributionError::DrawImpossible { draw, total });
    }
    Ok(())
}

/// Support bounds `(lo, hi)` of the number of white balls in the draw.
pub fn hypergeometric_support(white: u64, total: u64, draw: u64) -> (u64, u64) {
    let black = total - white;
    (draw.saturating_sub(black), draw.min(white))
}

/// Unnormalized weights `C(white, k) C(black, draw - k)` over the support,
/// scaled so the mode has weight one. Returns the weight sum.
fn hypergeometric_weights(white: u64, total: u64, draw: u64, lo: u64, weights: &mut [f64]) -> f64 {
    let black = (total - white) as f64;
    let (w, m) = (white as f64, draw as f64);
    let hi = lo + weights.len() as u64 - 1;
    let mode = ((((draw + 1) as f64) * ((white + 1) as f64) / ((total + 2) as f64)).floor() as u64)
        .clamp(lo, hi);
    let at = |k: u64| (k - lo) as usize;
    weights[at(mode)] = 1.0;
    for k in mode..hi {
        let kf = k as f64;
        weights[at(k + 1)] =
            weights[at(k)] * (w - kf) * (m - kf) / ((kf + 1.0) * (black - m + kf + 1.0));
    }
    for k in (lo + 1..=mode).rev() {
        let kf = k as f64;
        weights[at(k - 1)] =
            weights[at(k)] * kf * (black - m + kf) / ((w - kf + 1.0) * (m - kf + 1.0));
    }
    weights.iter().sum()
}

const INLINE_SUPPORT: usize = 65;

/// Number of white balls among `draw` balls taken without replacement from an
/// urn holding `white` white balls out of `total`.
pub fn hypergeometric_sample(
    white: u64,
    total: u64,
    draw: u64,
    stream: &mut RandomStream,
) -> Result<u64, DistributionError> {
    check_urn(white, total, draw)?;
    let (lo, hi) = hypergeometric_support(white, total, draw);
    if lo == hi {
        return Ok(lo);
    }
    let len = (hi - lo + 1) as usize;
    let mut inline = [0.0f64; INLINE_SUPPORT];
    let mut heap;
    let weights: &mut [f64] = if len <= INLINE_SUPPORT {
        &mut inline[..len]
    } else {
        heap = vec![0.0; len];
        &mut heap
    };
    let total_weight = hypergeometric_weights(white, total, draw, lo, weights);
    let mut target = stream.uniform() * total_weight;
    for (i, &w) in weights.iter().enumerate() {
        if target < w {
            return Ok(lo + i as u64);
        }
        target -= w;
    }
    // rounding left a sliver past the last point; return the last positive one
    let last = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
    Ok(lo + last as u64)
}

/// Exact hypergeometric probabilities over the support.
pub fn hypergeometric_pmf(
    white: u64,
    total: u64,
    draw: u64,
) -> Result<BTreeMap<u64, f64>, DistributionError> {
    check_urn(white, total, draw)?;
    let (lo, hi) = hypergeometric_support(white, total, draw);
    let mut weights = vec![0.0; (hi - lo + 1) as usize];
    let sum = hypergeometric_weights(white, total, draw, lo, &mut weights);
    Ok(weights
        .into_iter()
        .enumerate()
        .map(|(i, w)| (lo + i as u64, w / sum))
        .collect())
}
