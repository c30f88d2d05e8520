//! Closed-form limits of the urn and the algebraic identities between them.
//!
//! For the opposite-reinforcement variant the white proportion follows the
//! stochastic-approximation recursion `Z_{n+1} = Z_n + (f(Z_n) + eps_{n+1}) / T_{n+1}`
//! with the quadratic drift
//!
//! ```text
//! f(z) = m ((mu_X - mu_Y) z^2 - 2 mu_X z + mu_X)
//! ```
//!
//! whose unique root in `(0, 1)` is `z* = sqrt(mu_X) / (sqrt(mu_X) + sqrt(mu_Y))`.
//!
//! Two families of fluctuation constants are exposed. The `P(z*)`-based
//! fields (`p_at_zstar`, `sigma_sq`, `clt_variance_z`, `clt_variance_w`) are
//! the published closed forms. The `*_full` fields come from the exact
//! conditional noise variance
//!
//! ```text
//! Var[eps | Z, T] = m^2 ((1-Z)^4 s_X^2 + Z^4 s_Y^2) + v(Z, T) E[((1-Z) X + Z Y)^2]
//! ```
//!
//! with `v(Z, T) = m Z (1-Z) (T-m)/(T-1)` the hypergeometric variance; they
//! include the draw noise that the closed forms leave out.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{AdditionLaw, LawSchedule, SlowlyVarying};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TheoryError {
    #[error("addition means must be positive (got mu_X = {mean_x}, mu_Y = {mean_y})")]
    NonPositiveMean { mean_x: f64, mean_y: f64 },
    #[error("draw size must be at least 1")]
    EmptyDraw,
    #[error("regular-variation order {0} must exceed -1")]
    InvalidOrder(f64),
    #[error("theta exponent {lambda} outside (0, {upper})")]
    InvalidThetaExponent { lambda: f64, upper: f64 },
    #[error("schedule moments are not finite at step {0}")]
    NonFiniteMoment(u64),
}

/// First two moments of one addition law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LawMoments {
    pub mean: f64,
    pub second_moment: f64,
}

impl LawMoments {
    pub fn variance(&self) -> f64 {
        (self.second_moment - self.mean * self.mean).max(0.0)
    }
}

impl From<&AdditionLaw> for LawMoments {
    fn from(law: &AdditionLaw) -> Self {
        Self {
            mean: law.mean(),
            second_moment: law.second_moment(),
        }
    }
}

/// Grid resolution used when bounding the conditional noise variance.
const NOISE_BOUND_GRID: usize = 10_000;
const NOISE_BOUND_MARGIN: f64 = 1.01;

/// Every closed-form limit of the opposite-reinforcement urn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryPrediction {
    pub draw_size: u64,
    pub law_x: LawMoments,
    pub law_y: LawMoments,
    pub z_star: f64,
    /// `f(z) = quadratic z^2 + linear z + constant`.
    pub drift_quadratic: f64,
    pub drift_linear: f64,
    pub drift_constant: f64,
    pub p_at_zstar: f64,
    pub clt_variance_z: f64,
    pub clt_variance_w: f64,
    pub tn_rate: f64,
    pub wn_rate: f64,
    pub gamma_limit: f64,
    pub sigma_sq: f64,
    /// `C_eps` with `E[eps^2 | F_n] <= C_eps` for every state.
    pub noise_bound: f64,
    pub drift_growth_k: f64,
    /// `lim E[eps^2 | F_n]` including the draw noise.
    pub noise_variance_limit: f64,
    pub sigma_sq_full: f64,
    pub clt_variance_z_full: f64,
    pub clt_variance_w_full: f64,
}

impl TheoryPrediction {
    pub fn drift(&self, z: f64) -> f64 {
        (self.drift_quadratic * z + self.drift_linear) * z + self.drift_constant
    }

    pub fn drift_derivative(&self, z: f64) -> f64 {
        2.0 * self.drift_quadratic * z + self.drift_linear
    }

    /// `g(z) = f(z) / (z* - z)`, extended continuously through `z*`.
    pub fn gain(&self, z: f64) -> f64 {
        -(self.drift_quadratic * (z + self.z_star) + self.drift_linear)
    }

    /// The published right-hand side bounding `E[eps^2 | F_n]`, evaluated
    /// with `E[xi^2 | F_n] = xi_second_moment`.
    pub fn noise_bound_expression(&self, z: f64, xi_second_moment: f64) -> f64 {
        let m = self.draw_size as f64;
        let (mx, my) = (self.law_x.mean, self.law_y.mean);
        let (ex2, ey2) = (self.law_x.second_moment, self.law_y.second_moment);
        let bracket = z * z * (ex2 + ey2 - 2.0 * mx * my) + 2.0 * z * (mx * my - ex2) + ex2;
        let centre = z * (mx - my) - mx;
        xi_second_moment * bracket - m * m * z * z * centre * centre
            + m * m * (1.0 - z) * (1.0 - z) * self.law_x.variance()
    }

    /// Exact `Var[eps_{n+1} | Z_n = z, T_n = total]`. `total = None` takes
    /// the large-urn limit of the hypergeometric variance.
    pub fn noise_variance(&self, z: f64, total: Option<u64>) -> f64 {
        let m = self.draw_size as f64;
        let finite = match total {
            Some(t) if t > 1 => (t as f64 - m) / (t as f64 - 1.0),
            Some(_) => 0.0,
            None => 1.0,
        };
        let draw_var = m * z * (1.0 - z) * finite;
        let (vx, vy) = (self.law_x.variance(), self.law_y.variance());
        let one_minus = 1.0 - z;
        let addition = m * m * (one_minus.powi(4) * vx + z.powi(4) * vy);
        let mix = one_minus * one_minus * self.law_x.second_moment
            + 2.0 * z * one_minus * self.law_x.mean * self.law_y.mean
            + z * z * self.law_y.second_moment;
        addition + draw_var * mix
    }

    /// Law-of-total-variance split of `Var[eps_{n+1} | Z_n = z, T_n = total]`
    /// into the part driven by the addition laws, `E[Var(D | xi)]`, and the
    /// part driven by the draw, `Var(E[D | xi])`.
    pub fn noise_variance_components(&self, z: f64, total: u64) -> (f64, f64) {
        let m = self.draw_size as f64;
        let finite = if total > 1 {
            (total as f64 - m) / (total as f64 - 1.0)
        } else {
            0.0
        };
        let draw_var = m * z * (1.0 - z) * finite;
        let xi_sq = draw_var + m * m * z * z;
        let rest_sq = draw_var + m * m * (1.0 - z) * (1.0 - z);
        let addition = (1.0 - z).powi(2) * self.law_x.variance() * rest_sq
            + z * z * self.law_y.variance() * xi_sq;
        let slope = self.law_x.mean * (1.0 - z) + z * self.law_y.mean;
        (addition, slope * slope * draw_var)
    }
}

/// `P(z) = (s_X^2 + s_Y^2) z^4 - 2 s_X^2 z^3 + 2 s_X^2 z^2 - 2 s_X^2 z + s_X^2`.
pub fn variance_polynomial(var_x: f64, var_y: f64, z: f64) -> f64 {
    let z2 = z * z;
    (var_x + var_y) * z2 * z2 - 2.0 * var_x * z2 * z + 2.0 * var_x * z2 - 2.0 * var_x * z + var_x
}

fn check_means(x: &LawMoments, y: &LawMoments) -> Result<(), TheoryError> {
    if x.mean > 0.0 && y.mean > 0.0 && x.mean.is_finite() && y.mean.is_finite() {
        Ok(())
    } else {
        Err(TheoryError::NonPositiveMean {
            mean_x: x.mean,
            mean_y: y.mean,
        })
    }
}

pub fn z_star(mean_x: f64, mean_y: f64) -> f64 {
    let (a, b) = (mean_x.sqrt(), mean_y.sqrt());
    a / (a + b)
}

pub fn predict_model1(
    draw_size: u64,
    law_x: &AdditionLaw,
    law_y: &AdditionLaw,
) -> Result<TheoryPrediction, TheoryError> {
    predict_from_moments(draw_size, law_x.into(), law_y.into())
}

pub fn predict_from_moments(
    draw_size: u64,
    x: LawMoments,
    y: LawMoments,
) -> Result<TheoryPrediction, TheoryError> {
    if draw_size == 0 {
        return Err(TheoryError::EmptyDraw);
    }
    check_means(&x, &y)?;
    let m = draw_size as f64;
    let (mx, my) = (x.mean, y.mean);
    let zs = z_star(mx, my);
    let p = variance_polynomial(x.variance(), y.variance(), zs);
    let root = (mx * my).sqrt();
    let mut prediction = TheoryPrediction {
        draw_size,
        law_x: x,
        law_y: y,
        z_star: zs,
        drift_quadratic: m * (mx - my),
        drift_linear: -2.0 * m * mx,
        drift_constant: m * mx,
        p_at_zstar: p,
        clt_variance_z: p / (3.0 * mx * my),
        clt_variance_w: m * m * p / 3.0,
        tn_rate: m * root,
        wn_rate: m * mx * my.sqrt() / (mx.sqrt() + my.sqrt()),
        gamma_limit: 1.5,
        sigma_sq: p / (mx * my),
        noise_bound: 0.0,
        drift_growth_k: m * ((mx - my).abs() + 2.0 * mx),
        noise_variance_limit: 0.0,
        sigma_sq_full: 0.0,
        clt_variance_z_full: 0.0,
        clt_variance_w_full: 0.0,
    };
    let noise = prediction.noise_variance(zs, None);
    prediction.noise_variance_limit = noise;
    prediction.sigma_sq_full = noise / (m * m * mx * my);
    prediction.clt_variance_z_full = prediction.sigma_sq_full / 3.0;
    prediction.clt_variance_w_full = noise / 3.0;
    prediction.noise_bound = noise_bound(&prediction);
    Ok(prediction)
}

/// Grid maximum of the published noise bound over `Z` in `[0, 1]` and
/// `xi` in `[0, m]`, inflated by 1%.
fn noise_bound(p: &TheoryPrediction) -> f64 {
    let m = p.draw_size as f64;
    let xi_points = 64;
    let mut best = 0.0f64;
    for i in 0..=NOISE_BOUND_GRID {
        let z = i as f64 / NOISE_BOUND_GRID as f64;
        for j in 0..=xi_points {
            let xi = m * j as f64 / xi_points as f64;
            best = best.max(p.noise_bound_expression(z, xi * xi));
        }
    }
    best * NOISE_BOUND_MARGIN
}

/// The three-line expression for `sigma^2` in terms of raw second moments,
/// evaluated at `z*`. Must agree with `P(z*) / (mu_X mu_Y)`.
pub fn sigma_sq_longform(
    draw_size: u64,
    law_x: &AdditionLaw,
    law_y: &AdditionLaw,
) -> Result<f64, TheoryError> {
    sigma_sq_longform_from_moments(draw_size, law_x.into(), law_y.into())
}

pub fn sigma_sq_longform_from_moments(
    draw_size: u64,
    x: LawMoments,
    y: LawMoments,
) -> Result<f64, TheoryError> {
    if draw_size == 0 {
        return Err(TheoryError::EmptyDraw);
    }
    check_means(&x, &y)?;
    let (mx, my) = (x.mean, y.mean);
    let (ex2, ey2) = (x.second_moment, y.second_moment);
    let z = z_star(mx, my);
    let z2 = z * z;
    let prod = mx * my;
    let first = z2 / prod * (z2 * (ex2 + ey2 - 2.0 * prod) + 2.0 * z * (prod - ex2) + ex2);
    let second = z2 / prod * (z2 * (mx - my).powi(2) - 2.0 * z * mx * (mx - my) + mx * mx);
    let third = (1.0 - z).powi(2) * x.variance() / prod;
    Ok(first - second + third)
}

/// Finite-horizon moments and asymptotic targets of the equal-addition urn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model2Prediction {
    pub step: u64,
    pub mean_tn: f64,
    pub var_tn: f64,
    /// `sum_{k <= n} E[X_k]`.
    pub sum_mean_x: f64,
    pub tilde_t_target: f64,
    /// Default `lambda` for `theta_n = n^lambda`; midpoint of the admissible range.
    pub theta_exponent: f64,
    /// Upper end of the admissible `lambda` range, `alpha - gamma/2`
    /// (infinite for degenerate schedules).
    pub theta_exponent_upper: f64,
    /// `E[T_n] / (m sum E[X_k]) = 1 + T0 / (m sum E[X_k])`; tends to 1 as the
    /// sum diverges.
    pub l_ratio: f64,
}

/// Largest admissible `lambda` for a schedule (`inf` when `Var[X_n] = 0`).
pub fn theta_exponent_upper(schedule: &LawSchedule) -> f64 {
    if matches!(schedule, LawSchedule::Constant { .. }) {
        return f64::INFINITY;
    }
    schedule.mean_exponent() - schedule.variance_exponent() / 2.0
}

/// Check `lambda` against `(0, alpha - gamma/2)`.
pub fn validate_theta_exponent(schedule: &LawSchedule, lambda: f64) -> Result<(), TheoryError> {
    let upper = theta_exponent_upper(schedule);
    if lambda > 0.0 && lambda < upper {
        Ok(())
    } else {
        Err(TheoryError::InvalidThetaExponent { lambda, upper })
    }
}

pub fn predict_model2(
    initial_total: u64,
    draw_size: u64,
    schedule: &LawSchedule,
    step: u64,
) -> Result<Model2Prediction, TheoryError> {
    if draw_size == 0 {
        return Err(TheoryError::EmptyDraw);
    }
    let alpha = schedule.mean_exponent();
    if alpha <= -1.0 {
        return Err(TheoryError::InvalidOrder(alpha));
    }
    let m = draw_size as f64;
    let (mut sum_mean, mut sum_var) = (0.0, 0.0);
    for k in 1..=step {
        let (mean, var) = (schedule.mean_at(k), schedule.variance_at(k));
        if !(mean.is_finite() && var.is_finite()) {
            return Err(TheoryError::NonFiniteMoment(k));
        }
        sum_mean += mean;
        sum_var += var;
    }
    let upper = theta_exponent_upper(schedule);
    let theta_exponent = if upper.is_infinite() {
        0.5
    } else {
        upper.max(0.0) / 2.0
    };
    let mean_tn = initial_total as f64 + m * sum_mean;
    Ok(Model2Prediction {
        step,
        mean_tn,
        var_tn: m * m * sum_var,
        sum_mean_x: sum_mean,
        tilde_t_target: m / (alpha + 1.0),
        theta_exponent,
        theta_exponent_upper: upper,
        l_ratio: if sum_mean > 0.0 {
            mean_tn / (m * sum_mean)
        } else {
            f64::INFINITY
        },
    })
}

/// Bound on `E[M_n^2]` for the martingale part `M_n = sum delta~_k xi~_k` of
/// the equal-addition proportion, valid for every `n`:
///
/// ```text
/// 4 (alpha+1)^2 sum_k ( Var[X_k] / (k^2 E[X_k]^2) + 1 / k^2 )
/// ```
///
/// The first series is `sum l2(k) / (k^{2 alpha - gamma + 2} l1(k)^2)`; the
/// `1/k^2` series accounts for the mean of `delta~_k^2`. Summed to
/// `terms` and closed with an integral tail estimate.
pub fn martingale_part_l2_bound(schedule: &LawSchedule, terms: u64) -> Result<f64, TheoryError> {
    let alpha = schedule.mean_exponent();
    if alpha <= -1.0 {
        return Err(TheoryError::InvalidOrder(alpha));
    }
    let mut sum = 0.0;
    let mut last = 0.0;
    for k in 1..=terms {
        let (mean, var) = (schedule.mean_at(k), schedule.variance_at(k));
        if !(mean.is_finite() && var.is_finite()) || mean <= 0.0 {
            return Err(TheoryError::NonFiniteMoment(k));
        }
        let kf = k as f64;
        last = var / (kf * kf * mean * mean);
        sum += last + 1.0 / (kf * kf);
    }
    let k = terms as f64;
    let decay = 2.0 * alpha - schedule.variance_exponent() + 2.0;
    let tail = if decay > 1.0 {
        last * k / (decay - 1.0)
    } else if last > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    sum += tail + 1.0 / k;
    Ok(4.0 * (alpha + 1.0).powi(2) * sum)
}

/// `n^{alpha+1} l(n) / (alpha + 1)`, the asymptotic value of
/// `sum_{k <= n} k^alpha l(k)`.
pub fn regvar_partial_sum(alpha: f64, slow: SlowlyVarying, n: u64) -> Result<f64, TheoryError> {
    if alpha <= -1.0 {
        return Err(TheoryError::InvalidOrder(alpha));
    }
    let x = n as f64;
    Ok(x.powf(alpha + 1.0) * slow.eval(x) / (alpha + 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(mean: f64, var: f64) -> LawMoments {
        LawMoments {
            mean,
            second_moment: var + mean * mean,
        }
    }

    #[test]
    fn symmetric_means_give_half() {
        let p = predict_from_moments(3, moments(2.0, 1.0), moments(2.0, 0.5)).unwrap();
        assert!((p.z_star - 0.5).abs() < 1e-15);
    }

    #[test]
    fn four_to_one() {
        let p = predict_from_moments(3, moments(4.0, 0.0), moments(1.0, 0.0)).unwrap();
        assert!((p.z_star - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.tn_rate - 6.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_variance_polynomial() {
        let (mu, s2) = (3.0, 1.7);
        let p = predict_from_moments(2, moments(mu, s2), moments(mu, s2)).unwrap();
        assert!((p.p_at_zstar - 3.0 * s2 / 8.0).abs() < 1e-14);
        assert!((p.clt_variance_z - s2 / (8.0 * mu * mu)).abs() < 1e-14);
        let long = sigma_sq_longform_from_moments(2, moments(mu, s2), moments(mu, s2)).unwrap();
        assert!((long - 3.0 * s2 / (8.0 * mu * mu)).abs() < 1e-14);
    }

    #[test]
    fn deterministic_laws_have_zero_polynomial() {
        let x = AdditionLaw::constant(2);
        let y = AdditionLaw::constant(5);
        let p = predict_model1(2, &x, &y).unwrap();
        assert_eq!(p.p_at_zstar, 0.0);
        assert_eq!(p.clt_variance_z, 0.0);
        assert_eq!(sigma_sq_longform(2, &x, &y).unwrap(), 0.0);
        // the draw noise does not vanish
        assert!(p.clt_variance_z_full > 0.0);
    }

    #[test]
    fn constant_schedule_bound_is_mean_series() {
        let b = martingale_part_l2_bound(&LawSchedule::Constant { c: 2 }, 100_000).unwrap();
        let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((b - 4.0 * pi2_6).abs() < 1e-6);
        let binom = martingale_part_l2_bound(&LawSchedule::Binomial { p: 0.5 }, 100_000).unwrap();
        // Var/(k^2 E^2) = 1/k^3 for p = 1/2
        assert!((binom - 16.0 * (pi2_6 + 1.2020569031595942)).abs() < 1e-6);
    }

    #[test]
    fn zero_mean_rejected() {
        let err = predict_from_moments(2, moments(0.0, 0.0), moments(1.0, 0.0)).unwrap_err();
        assert!(matches!(err, TheoryError::NonPositiveMean { .. }));
        assert!(sigma_sq_longform_from_moments(2, moments(1.0, 0.0), moments(0.0, 0.0)).is_err());
    }

    #[test]
    fn reference_configuration_values() {
        let x = AdditionLaw::uniform(1, 3).unwrap();
        let y = AdditionLaw::uniform(2, 6).unwrap();
        let p = predict_model1(2, &x, &y).unwrap();
        let zs = 2f64.sqrt() / (2f64.sqrt() + 2.0);
        assert!((p.z_star - zs).abs() < 1e-15);
        assert!((p.z_star - 0.414_213_562_373_095).abs() < 1e-12);
        assert!((p.tn_rate - 2.0 * 8f64.sqrt()).abs() < 1e-12);
        assert!((p.wn_rate - 2.0 * 2.0 * 2.0 / (2f64.sqrt() + 2.0)).abs() < 1e-12);
        // hand evaluation: s_Y^2 z^4 + s_X^2 (1-z)^2 (1+z^2)
        let hand = 2.0 * zs.powi(4) + (2.0 / 3.0) * (1.0 - zs).powi(2) * (1.0 + zs * zs);
        assert!((p.p_at_zstar - hand).abs() < 1e-12);
        assert!((p.drift_growth_k - 2.0 * (2.0 + 4.0)).abs() < 1e-12);
    }

    #[test]
    fn consistency_identities() {
        let p = predict_from_moments(3, moments(2.5, 1.3), moments(1.2, 0.4)).unwrap();
        assert!((p.drift(p.z_star)).abs() < 1e-12);
        let expected = -2.0 * 3.0 * (2.5f64 * 1.2).sqrt();
        assert!((p.drift_derivative(p.z_star) - expected).abs() < 1e-12);
        assert!((p.clt_variance_z - p.sigma_sq / (2.0 * p.gamma_limit)).abs() < 1e-12);
        assert!((p.clt_variance_z * 3.0 * 2.5 * 1.2 - p.p_at_zstar).abs() < 1e-12);
        assert!((p.clt_variance_w - 9.0 * p.p_at_zstar / 3.0).abs() < 1e-12);
        assert!((p.gain(p.z_star) + p.drift_derivative(p.z_star)).abs() < 1e-12);
        for i in 0..=20 {
            let z = i as f64 / 20.0;
            if (z - p.z_star).abs() > 1e-9 {
                let g = p.drift(z) / (p.z_star - z);
                assert!((g - p.gain(z)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn noise_bound_dominates_exact_variance() {
        let x = AdditionLaw::uniform(1, 3).unwrap();
        let y = AdditionLaw::uniform(2, 6).unwrap();
        let p = predict_model1(2, &x, &y).unwrap();
        for i in 0..=1000 {
            let z = i as f64 / 1000.0;
            for t in [2u64, 3, 10, 1000] {
                assert!(p.noise_variance(z, Some(t)) <= p.noise_bound);
            }
            assert!(p.noise_variance(z, None) <= p.noise_bound);
        }
    }

    #[test]
    fn model2_binomial_sums() {
        let s = LawSchedule::Binomial { p: 0.5 };
        let pred = predict_model2(10, 2, &s, 100).unwrap();
        assert!((pred.mean_tn - (10.0 + 2.0 * 0.5 * 5050.0)).abs() < 1e-9);
        assert!((pred.var_tn - 4.0 * 0.25 * 5050.0).abs() < 1e-9);
        assert_eq!(pred.tilde_t_target, 1.0);
        assert!((pred.theta_exponent_upper - 0.5).abs() < 1e-15);
        assert!(validate_theta_exponent(&s, 0.25).is_ok());
        assert!(validate_theta_exponent(&s, 0.5).is_err());
        assert!(validate_theta_exponent(&s, 0.0).is_err());
    }

    #[test]
    fn model2_constant_schedule() {
        let s = LawSchedule::Constant { c: 3 };
        let pred = predict_model2(7, 2, &s, 50).unwrap();
        assert_eq!(pred.mean_tn, 7.0 + 2.0 * 3.0 * 50.0);
        assert_eq!(pred.var_tn, 0.0);
        assert_eq!(pred.tilde_t_target, 2.0);
    }

    #[test]
    fn regvar_examples() {
        let c = SlowlyVarying::Constant { c: 1.0 };
        let approx = regvar_partial_sum(1.0, c, 1000).unwrap();
        assert_eq!(approx, 500_000.0);
        assert!(((500_500.0 - approx) / 500_500.0 - 1e-3).abs() < 1e-5);
        assert_eq!(regvar_partial_sum(0.0, c, 100).unwrap(), 100.0);
        assert!(regvar_partial_sum(-1.0, c, 10).is_err());
    }

    #[test]
    fn regvar_log_factor_against_direct_sum() {
        let n = 10_000u64;
        let exact: f64 = (1..=n)
            .map(|k| (k as f64).powi(2) * ((k + 1) as f64).ln())
            .sum();
        let approx = regvar_partial_sum(2.0, SlowlyVarying::Log { c: 1.0, beta: 1.0 }, n).unwrap();
        assert!(((exact - approx) / exact).abs() < 0.05);
    }
}
