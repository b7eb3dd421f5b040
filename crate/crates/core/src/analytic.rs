//! Closed-form expected gain-loss of the long-short controller, plus the
//! stage recursion on expectations that the closed forms are checked against.

use crate::error::{Error, Result};
use crate::model::{ControllerParams, Horizon};

fn finite(value: f64, what: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Overflow(what))
    }
}

/// `(1 + y)^n - 1`, accurate when `y` is small.
///
/// Bases at or below zero fall back to a plain integer power.
pub(crate) fn pow_minus_one(y: f64, n: i32) -> f64 {
    if y > -1.0 {
        (n as f64 * y.ln_1p()).exp_m1()
    } else {
        (1.0 + y).powi(n) - 1.0
    }
}

/// `(1 + a)^n + (1 + b)^n - 2` without the leading-order cancellation.
pub(crate) fn paired_power_excess(a: f64, b: f64, n: i32) -> f64 {
    pow_minus_one(a, n) + pow_minus_one(b, n)
}

fn check_controller_inputs(i0: f64, k: f64) -> Result<()> {
    if !(i0 > 0.0) {
        return Err(Error::NonPositiveInvestment(i0));
    }
    if !(k > 0.0) {
        return Err(Error::NonPositiveFeedback(k));
    }
    Ok(())
}

/// Expected gain of a single-stock controller after `N` periods:
/// `(I0/K) [(1 + K mu)^N + (1 - K mu)^N - 2]`.
pub fn expected_gain_single(i0: f64, k: f64, mu: f64, n: Horizon) -> Result<f64> {
    check_controller_inputs(i0, k)?;
    let x = k * mu;
    let bracket = finite(paired_power_excess(x, -x, n.as_i32()), "(1 + K mu)^N + (1 - K mu)^N")?;
    finite(i0 / k * bracket, "expected gain")
}

/// Expected two-stock gain `G_N(K, mu_1, eps)`.
///
/// Depends on `beta_0` only through the controller construction, which
/// cancels it out of the expectation.
pub fn expected_gain_two(params: &ControllerParams, mu_1: f64, eps: f64, n: Horizon) -> Result<f64> {
    let k = params.k();
    let theta = k * mu_1;
    let bracket = finite(
        paired_power_excess(theta, -theta * (1.0 + eps), n.as_i32()),
        "(1 + K mu_1)^N + (1 - K mu_1 (1 + eps))^N",
    )?;
    finite(params.i0() / k * bracket, "expected gain")
}

/// `dG_N / d eps = -I0 N mu_1 (1 - K mu_1 (1 + eps))^(N-1)`.
pub fn expected_gain_two_eps_derivative(params: &ControllerParams, mu_1: f64, eps: f64, n: Horizon) -> f64 {
    let base = 1.0 - params.k() * mu_1 * (1.0 + eps);
    -params.i0() * n.n() as f64 * mu_1 * base.powi(n.as_i32() - 1)
}

/// Iterates the expectation recursions for both arms from zero:
///
/// ```text
/// E[g1(k+1)] = (1 + K1 mu_long)  E[g1(k)] + I01 mu_long
/// E[g2(k+1)] = (1 - K2 mu_short) E[g2(k)] - I02 mu_short
/// ```
///
/// and returns `E[g1(steps)] + E[g2(steps)]`. For the two-stock controller
/// pass `mu_short = mu_2`; for the single-stock case use `beta_0 = 1` and
/// `mu_short = mu_long`.
pub fn expected_gain_recursion(params: &ControllerParams, mu_long: f64, mu_short: f64, steps: u32) -> Result<f64> {
    let (i01, k1) = (params.i0_1(), params.k1());
    let (i02, k2) = (params.i0_2(), params.k2());
    let mut g1 = 0.0_f64;
    let mut g2 = 0.0_f64;
    for _ in 0..steps {
        g1 = (1.0 + k1 * mu_long) * g1 + i01 * mu_long;
        g2 = (1.0 - k2 * mu_short) * g2 - i02 * mu_short;
    }
    finite(g1 + g2, "expectation recursion")
}
