//! Robust positive expectation for the two-stock controller.
//!
//! For `theta = K mu_1` the sign of the expected gain is the sign of
//!
//! ```text
//! G_theta(eps) = (1 + theta)^N + (1 - theta (1 + eps))^N - 2
//! ```
//!
//! The critical uncertainty bound `eps_c(theta)` is the smallest `eps > 0`
//! where that polynomial stops being positive. The feasibility test on `K`
//! only needs `G` at a couple of corners of the uncertainty box; the grid
//! search in [`worst_case_gain_grid`] is the brute-force check of that claim.

use std::fmt;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::analytic::{expected_gain_two, paired_power_excess};
use crate::error::{Error, Result};
use crate::model::{ControllerParams, Horizon, UncertaintySet};

/// Distance from `2^(1/N) - 1` inside which `f` and `eps_c'` are treated as singular.
pub const SINGULARITY_GUARD: f64 = 1e-9;

/// Relative width at which region boundaries stop being bisected.
pub const BOUNDARY_REL_TOL: f64 = 1e-4;

/// Absolute tolerance of the bisection on `eps_max` in [`corollary_delta`].
pub const DELTA_ABS_TOL: f64 = 1e-12;

/// Non-negative extended real: a finite value or `+inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PosInfinity,
}

/// `eps_c(theta)`.
pub type CriticalBound = ExtReal;

impl ExtReal {
    pub fn is_infinite(self) -> bool {
        matches!(self, ExtReal::PosInfinity)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::PosInfinity => None,
        }
    }

    /// Lossy view as a float, `+inf` mapping to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    /// Strict comparison `x < self`.
    pub fn exceeds(self, x: f64) -> bool {
        match self {
            ExtReal::Finite(v) => x < v,
            ExtReal::PosInfinity => true,
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PosInfinity => f.write_str("inf"),
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(v) => s.serialize_f64(*v),
            ExtReal::PosInfinity => s.serialize_str("inf"),
        }
    }
}

/// `G_theta(eps)`.
pub fn g_theta(theta: f64, eps: f64, n: Horizon) -> f64 {
    paired_power_excess(theta, -theta * (1.0 + eps), n.as_i32())
}

/// Real `n`-th root with the sign convention used throughout: the positive
/// root for `x > 0`, `-|x|^(1/n)` for `x < 0` and odd `n`; undefined for
/// negative `x` with even `n`.
pub fn nth_root(x: f64, n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::RootDomain { x, n });
    }
    if x >= 0.0 {
        Ok(positive_root(x, n))
    } else if n % 2 == 1 {
        Ok(-positive_root(-x, n))
    } else {
        Err(Error::RootDomain { x, n })
    }
}

fn positive_root(x: f64, n: u32) -> f64 {
    match n {
        1 => x,
        2 => x.sqrt(),
        3 => x.cbrt(),
        _ => x.powf(1.0 / n as f64),
    }
}

/// `X^(1/N - m)` for integer `m`, evaluated as `(X^(1/N))^(1 - mN)`.
///
/// Equal to `Y^(1/N)` with `Y = X^(1 - mN)` under the root convention, but
/// without forming `Y`, which overflows for realistic `N`.
pub fn shifted_root(x: f64, n: u32, m: i32) -> Result<f64> {
    let r = nth_root(x, n)?;
    Ok(r.powi(1 - m * n as i32))
}

/// The root `R = (2 - (1 + theta)^N)^(1/N)` together with `1 - R`, both
/// computed without forming `(1 + theta)^N` directly.
fn doubling_root(theta: f64, n: Horizon) -> Result<(f64, f64)> {
    let nf = n.n() as f64;
    let log_growth = nf * theta.ln_1p();
    let excess = log_growth.exp_m1(); // (1 + theta)^N - 1
    if excess <= 1.0 {
        // 2 - (1+theta)^N = 1 - excess >= 0
        let log_r = (-excess).ln_1p() / nf;
        Ok((log_r.exp(), -log_r.exp_m1()))
    } else if n.is_odd() {
        // 2 - p = -p (1 - 2/p), root = -(1 + theta) (1 - 2/p)^(1/N)
        let inv = 2.0 * (-log_growth).exp();
        let r = -(1.0 + theta) * ((-inv).ln_1p() / nf).exp();
        Ok((r, 1.0 - r))
    } else {
        Err(Error::RootDomain {
            x: 1.0 - excess,
            n: n.n(),
        })
    }
}

/// Critical uncertainty bound `eps_c(theta) = inf { eps > 0 : G_theta(eps) <= 0 }`.
///
/// `+inf` for `theta < 0`, and for even `N` with `theta > 2^(1/N) - 1`;
/// zero at `theta = 0`; otherwise `(1 - (2 - (1 + theta)^N)^(1/N)) / theta - 1`.
pub fn critical_uncertainty(theta: f64, n: Horizon) -> CriticalBound {
    if theta < 0.0 {
        return ExtReal::PosInfinity;
    }
    if theta == 0.0 {
        return ExtReal::Finite(0.0);
    }
    let threshold = n.doubling_theta();
    if n.is_even() && theta > threshold {
        return ExtReal::PosInfinity;
    }
    let one_minus_root = match doubling_root(theta, n) {
        Ok((_, omr)) => omr,
        // theta <= threshold but rounding pushed (1+theta)^N just past 2
        Err(_) => 1.0,
    };
    ExtReal::Finite((one_minus_root / theta - 1.0).max(0.0))
}

fn check_regular_theta(theta: f64, n: Horizon) -> Result<()> {
    if !(theta > 0.0) {
        return Err(Error::NonPositiveTheta(theta));
    }
    if (theta - n.doubling_theta()).abs() < SINGULARITY_GUARD {
        return Err(Error::Singularity { theta, n: n.n() });
    }
    Ok(())
}

/// `f(theta) = R - 1 + theta (1 + theta)^(N-1) R^(1-N)` with `R = (2 - (1 + theta)^N)^(1/N)`.
///
/// Numerator of `eps_c'(theta)`. Defined for positive `theta` away from
/// `2^(1/N) - 1`; for even `N` beyond that point the root does not exist.
pub fn f_theta(theta: f64, n: Horizon) -> Result<f64> {
    check_regular_theta(theta, n)?;
    let (r, one_minus_r) = doubling_root(theta, n)?;
    let ratio = (1.0 + theta) / r;
    Ok(-one_minus_r + theta * ratio.powi(n.as_i32() - 1))
}

/// `f'(theta) = 2 (N - 1) theta (1 + theta)^(N-2) R^(1-2N)`.
pub fn f_prime(theta: f64, n: Horizon) -> Result<f64> {
    check_regular_theta(theta, n)?;
    let (r, _) = doubling_root(theta, n)?;
    let nn = n.as_i32();
    let ratio = (1.0 + theta) / r;
    Ok(2.0 * (nn - 1) as f64 * theta * ratio.powi(nn - 2) * r.powi(-(nn + 1)))
}

/// `eps_c'(theta) = f(theta) / theta^2`.
pub fn critical_uncertainty_derivative(theta: f64, n: Horizon) -> Result<f64> {
    Ok(f_theta(theta, n)? / (theta * theta))
}

/// Which inequality of the feasibility test decided the outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "branch", rename_all = "snake_case")]
pub enum RpeReason {
    /// Odd `N`: both `G_N(K, mu_min, eps_max)` and `G_N(K, mu_max, eps_max)` must be positive.
    OddCorners { gain_at_mu_min: f64, gain_at_mu_max: f64 },
    /// Even `N`, `K > (2^(1/N) - 1) / mu_min`: the long arm alone beats the loss floor.
    EvenAboveDoubling { threshold: f64 },
    /// Even `N`, `K <= 1 / (mu_min (1 + eps_max))`: decided by `G_N(K, mu_min, eps_max) > 0`.
    EvenBelowCrossing { crossing: f64, gain_at_mu_min: f64 },
    /// Even `N`, `1 / (mu_min (1 + eps_max)) < K <= (2^(1/N) - 1) / mu_min`: always fails.
    EvenGap { crossing: f64, threshold: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RpeVerdict {
    pub holds: bool,
    pub reason: RpeReason,
}

/// Expected gain at one point, with the sign preserved when the powers overflow.
fn corner_gain(params: &ControllerParams, mu_1: f64, eps: f64, n: Horizon) -> f64 {
    match expected_gain_two(params, mu_1, eps, n) {
        Ok(g) => g,
        Err(_) => {
            // Both powers dwarf the constant; compare magnitudes in log space.
            let theta = params.k() * mu_1;
            let short_base = 1.0 - theta * (1.0 + eps);
            let short_wins = short_base.abs().ln() > (1.0 + theta).abs().ln();
            let short_negative = short_base < 0.0 && n.is_odd();
            if short_wins && short_negative {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            }
        }
    }
}

/// Decides whether `K` guarantees a positive expected gain for every admissible
/// `(mu_1, eps)`.
pub fn rpe_holds(k: f64, set: &UncertaintySet, i0: f64, n: Horizon) -> Result<RpeVerdict> {
    let params = ControllerParams::new(i0, k, set.beta_0())?;
    let (mu_min, mu_max, eps_max) = (set.mu_min(), set.mu_max(), set.eps_max());
    if n.is_odd() {
        let gain_at_mu_min = corner_gain(&params, mu_min, eps_max, n);
        let gain_at_mu_max = corner_gain(&params, mu_max, eps_max, n);
        return Ok(RpeVerdict {
            holds: gain_at_mu_min > 0.0 && gain_at_mu_max > 0.0,
            reason: RpeReason::OddCorners {
                gain_at_mu_min,
                gain_at_mu_max,
            },
        });
    }
    let threshold = n.doubling_theta() / mu_min;
    let crossing = 1.0 / (mu_min * (1.0 + eps_max));
    if k > threshold {
        Ok(RpeVerdict {
            holds: true,
            reason: RpeReason::EvenAboveDoubling { threshold },
        })
    } else if k <= crossing {
        let gain_at_mu_min = corner_gain(&params, mu_min, eps_max, n);
        Ok(RpeVerdict {
            holds: gain_at_mu_min > 0.0,
            reason: RpeReason::EvenBelowCrossing {
                crossing,
                gain_at_mu_min,
            },
        })
    } else {
        Ok(RpeVerdict {
            holds: false,
            reason: RpeReason::EvenGap { crossing, threshold },
        })
    }
}

/// Resolution of the brute-force search over the uncertainty box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GridSpec {
    /// Points on the `mu_1` axis, split evenly between the negative and
    /// positive intervals; each half includes both endpoints.
    pub mu_points: usize,
    /// Points on `[0, eps_max]`, endpoints included.
    pub eps_points: usize,
}

impl GridSpec {
    pub fn new(mu_points: usize, eps_points: usize) -> Result<Self> {
        if mu_points < 4 {
            return Err(Error::InvalidGrid("need at least 4 points on the mu_1 axis"));
        }
        if eps_points < 2 {
            return Err(Error::InvalidGrid("need at least 2 points on the eps axis"));
        }
        Ok(GridSpec { mu_points, eps_points })
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            mu_points: 200,
            eps_points: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridMinimum {
    pub value: f64,
    pub mu_1: f64,
    pub eps: f64,
    /// Minimum over the `mu_1 < 0` half alone.
    pub negative_half: f64,
}

fn linspace(lo: f64, hi: f64, count: usize) -> impl Iterator<Item = f64> {
    let last = count - 1;
    (0..count).map(move |i| {
        if i == last {
            hi
        } else {
            lo + (hi - lo) * i as f64 / last as f64
        }
    })
}

/// Minimum expected gain over a rectangular grid on the admissible set,
/// covering both `mu_1 < 0` and `mu_1 > 0`.
///
/// Evaluates the expected-gain polynomial with plain integer powers,
/// independently of the closed-form helpers used by [`rpe_holds`].
pub fn worst_case_gain_grid(k: f64, set: &UncertaintySet, i0: f64, n: Horizon, grid: GridSpec) -> Result<GridMinimum> {
    let grid = GridSpec::new(grid.mu_points, grid.eps_points)?;
    ControllerParams::new(i0, k, set.beta_0())?;
    let half = grid.mu_points / 2;
    let scale = i0 / k;
    let p = n.as_i32();
    let eps_axis: Vec<f64> = linspace(0.0, set.eps_max(), grid.eps_points).collect();

    let mut best = GridMinimum {
        value: f64::INFINITY,
        mu_1: f64::NAN,
        eps: f64::NAN,
        negative_half: f64::INFINITY,
    };
    for sign in [-1.0, 1.0] {
        if sign > 0.0 {
            best.negative_half = best.value;
        }
        for m in linspace(set.mu_min(), set.mu_max(), half) {
            let mu_1 = sign * m;
            let theta = k * mu_1;
            let long = (1.0 + theta).powi(p);
            for &eps in &eps_axis {
                let short = (1.0 - theta * (1.0 + eps)).powi(p);
                let g = scale * (long + short - 2.0);
                if g < best.value {
                    best.value = g;
                    best.mu_1 = mu_1;
                    best.eps = eps;
                }
            }
        }
    }
    if best.value.is_nan() || best.mu_1.is_nan() {
        return Err(Error::Overflow("grid evaluation"));
    }
    Ok(best)
}

/// One open interval `(lo, hi)` of feasible `K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KInterval {
    pub lo: f64,
    pub hi: ExtReal,
    /// `hi` is the end of the scan range rather than a located boundary.
    pub truncated: bool,
}

impl KInterval {
    pub fn contains(&self, k: f64) -> bool {
        k > self.lo && self.hi.exceeds(k)
    }
}

/// Feasible feedback parameters as disjoint, ordered open intervals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KRegion {
    pub intervals: Vec<KInterval>,
    pub k_max_scan: f64,
    pub sweep_resolution: f64,
    pub refined: bool,
}

impl KRegion {
    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, k: f64) -> bool {
        self.intervals.iter().any(|iv| iv.contains(k))
    }
}

/// Default sweep: `K` up to `10 / mu_min` in `10^4` equal steps.
pub fn default_scan(set: &UncertaintySet) -> (f64, f64) {
    let k_max = 10.0 / set.mu_min();
    (k_max, k_max / 1e4)
}

/// Sweeps the feasibility test over `(0, k_max_scan]` and bisects every
/// change of outcome down to `1e-4` relative width.
///
/// Points are evaluated in parallel; the result does not depend on the
/// number of worker threads.
pub fn admissible_k_region(set: &UncertaintySet, i0: f64, n: Horizon, k_max_scan: f64, step: f64) -> Result<KRegion> {
    if !(step > 0.0 && k_max_scan > step) || !k_max_scan.is_finite() {
        return Err(Error::InvalidScan {
            k_max: k_max_scan,
            step,
        });
    }
    ControllerParams::new(i0, 1.0, set.beta_0())?;
    let count = (k_max_scan / step).floor() as usize;
    let k_at = |j: usize| {
        if j == count {
            k_max_scan.min(j as f64 * step)
        } else {
            j as f64 * step
        }
    };
    let feasible: Vec<bool> = (1..=count)
        .into_par_iter()
        .map(|j| rpe_holds(k_at(j), set, i0, n).map(|v| v.holds))
        .collect::<Result<_>>()?;

    let holds = |k: f64| -> Result<bool> {
        if k <= 0.0 {
            // First-order term -N K mu eps_max < 0 as K -> 0+
            Ok(set.is_degenerate())
        } else {
            Ok(rpe_holds(k, set, i0, n)?.holds)
        }
    };

    let mut intervals = Vec::new();
    let mut open_lo: Option<f64> = None;
    let mut prev_k = 0.0;
    let mut prev = holds(0.0)?;
    if prev {
        open_lo = Some(0.0);
    }
    for (idx, &now) in feasible.iter().enumerate() {
        let k = k_at(idx + 1);
        if now != prev {
            let boundary = bisect_transition(prev_k, k, prev, &holds)?;
            if now {
                open_lo = Some(boundary);
            } else if let Some(lo) = open_lo.take() {
                intervals.push(KInterval {
                    lo,
                    hi: ExtReal::Finite(boundary),
                    truncated: false,
                });
            }
        }
        prev = now;
        prev_k = k;
    }
    if let Some(lo) = open_lo {
        let unbounded = set.is_degenerate() || (n.is_even() && prev_k > n.doubling_theta() / set.mu_min());
        intervals.push(KInterval {
            lo,
            hi: if unbounded {
                ExtReal::PosInfinity
            } else {
                ExtReal::Finite(prev_k)
            },
            truncated: !unbounded,
        });
    }
    Ok(KRegion {
        intervals,
        k_max_scan,
        sweep_resolution: step,
        refined: true,
    })
}

fn bisect_transition<F>(mut lo: f64, mut hi: f64, lo_state: bool, holds: &F) -> Result<f64>
where
    F: Fn(f64) -> Result<bool>,
{
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= BOUNDARY_REL_TOL * mid {
            break;
        }
        if holds(mid)? == lo_state {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Largest `eps_max` for which `K` stays feasible with the given momentum
/// bounds. Any `eps_max` strictly below the returned value is feasible.
///
/// `+inf` when feasibility does not depend on `eps_max` (even `N` with
/// `K > (2^(1/N) - 1) / mu_min`).
pub fn corollary_delta(k: f64, mu_min: f64, mu_max: f64, beta_0: f64, i0: f64, n: Horizon) -> Result<ExtReal> {
    let base = UncertaintySet::new(mu_min, mu_max, 0.0, beta_0)?;
    ControllerParams::new(i0, k, beta_0)?;
    if n.is_even() && k > n.doubling_theta() / mu_min {
        return Ok(ExtReal::PosInfinity);
    }
    let holds = |eps: f64| -> Result<bool> { Ok(rpe_holds(k, &base.with_eps_max(eps)?, i0, n)?.holds) };

    let mut lo = 0.0;
    let mut hi = 1.0;
    while holds(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Ok(ExtReal::PosInfinity);
        }
    }
    while hi - lo > DELTA_ABS_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if holds(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ExtReal::Finite(lo))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(n: u32) -> Horizon {
        Horizon::new(n).unwrap()
    }

    fn paper_set() -> UncertaintySet {
        UncertaintySet::new(0.00055, 0.002, 0.8, 1.0).unwrap()
    }

    /// Smallest eps > 0 with G_theta(eps) <= 0, by scanning then bisecting.
    fn eps_c_by_bisection(theta: f64, n: Horizon) -> Option<f64> {
        let p = n.as_i32();
        let g = |e: f64| (1.0 + theta).powi(p) + (1.0 - theta * (1.0 + e)).powi(p) - 2.0;
        let step = 1e-3;
        let mut lo = 0.0;
        let mut hi = step;
        while g(hi) > 0.0 {
            lo = hi;
            hi += step;
            if hi > 1e4 {
                return None;
            }
        }
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        Some(0.5 * (lo + hi))
    }

    #[test]
    fn g_theta_values() {
        assert_eq!(g_theta(0.0, 0.5, h(7)), 0.0);
        assert!((g_theta(1.0, 0.0, h(2)) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn g_theta_matches_expected_gain() {
        let c = ControllerParams::new(7.0, 3.0, 1.3).unwrap();
        let (mu, eps, n) = (0.01, 0.4, h(9));
        let lhs = g_theta(3.0 * mu, eps, n) * 7.0 / 3.0;
        let rhs = expected_gain_two(&c, mu, eps, n).unwrap();
        assert!((lhs - rhs).abs() < 1e-14 * rhs.abs().max(1.0));
    }

    #[test]
    fn root_convention() {
        assert!((nth_root(8.0, 3).unwrap() - 2.0).abs() < 1e-15);
        assert!((nth_root(-8.0, 3).unwrap() + 2.0).abs() < 1e-15);
        assert_eq!(nth_root(-4.0, 2).unwrap_err().kind(), "root_domain");
        assert!((nth_root(32.0, 5).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn shifted_root_agrees_with_direct_power() {
        // X^(1/N - 1) for X < 0, N = 3: Y = X^(-2) > 0
        let x: f64 = -8.0;
        let direct = nth_root(x.powi(-2), 3).unwrap();
        assert!((shifted_root(x, 3, 1).unwrap() - direct).abs() < 1e-15);
        // X^(1/N - 2): Y = X^(-5) < 0
        let direct = nth_root(x.powi(-5), 3).unwrap();
        assert!((shifted_root(x, 3, 2).unwrap() - direct).abs() < 1e-15);
    }

    #[test]
    fn critical_bound_special_cases() {
        assert_eq!(critical_uncertainty(-0.1, h(5)), ExtReal::PosInfinity);
        for n in [2, 3, 5, 10] {
            assert_eq!(critical_uncertainty(0.0, h(n)), ExtReal::Finite(0.0));
        }
        assert_eq!(critical_uncertainty(0.3, h(4)), ExtReal::PosInfinity);
    }

    #[test]
    fn critical_bound_matches_bisection_oracle() {
        // Frozen from a 30-digit root solve of G_theta(eps) = 0 at theta = 0.05, N = 5.
        let eps_c = critical_uncertainty(0.05, h(5)).finite().unwrap();
        assert!((eps_c - 0.252_475_792_892_882_3).abs() < 1e-12, "{eps_c}");
        assert!((eps_c_by_bisection(0.05, h(5)).unwrap() - 0.252_475_792_892_882_3).abs() < 1e-11);
        for &(theta, n) in &[(0.05, 5u32), (0.1, 3), (0.5, 7), (2.0, 5), (0.01, 125), (0.15, 4)] {
            let n = h(n);
            let oracle = eps_c_by_bisection(theta, n).unwrap();
            let got = critical_uncertainty(theta, n).finite().unwrap();
            assert!((oracle - got).abs() < 1e-9, "theta {theta}: oracle {oracle} got {got}");
        }
    }

    #[test]
    fn f_limits() {
        let n = h(5);
        assert!(f_theta(1e-8, n).unwrap().abs() < 1e-6);
        assert!((f_theta(1e3, n).unwrap() + 2.0).abs() < 0.05);
        let star = n.doubling_theta();
        assert_eq!(f_theta(star, n).unwrap_err().kind(), "singularity");
        assert_eq!(f_prime(star + 1e-10, n).unwrap_err().kind(), "singularity");
        assert_eq!(f_theta(0.3, h(4)).unwrap_err().kind(), "root_domain");
        assert_eq!(f_theta(-0.1, n).unwrap_err().kind(), "non_positive_theta");
    }

    #[test]
    fn f_prime_matches_central_differences() {
        for &(theta, n) in &[(0.05, 5u32), (0.1, 3), (0.5, 7), (2.0, 5), (0.05, 8)] {
            let n = h(n);
            let d = 1e-6 * theta;
            let fd = (f_theta(theta + d, n).unwrap() - f_theta(theta - d, n).unwrap()) / (2.0 * d);
            let exact = f_prime(theta, n).unwrap();
            assert!(
                (fd - exact).abs() <= 1e-5 * exact.abs(),
                "theta {theta}: fd {fd} exact {exact}"
            );
        }
    }

    #[test]
    fn eps_c_derivative_matches_central_differences() {
        for &(theta, n) in &[(0.05, 5u32), (0.1, 3), (0.5, 7), (2.0, 5), (0.1, 6)] {
            let n = h(n);
            let d = 1e-6 * theta;
            let ec = |t: f64| critical_uncertainty(t, n).finite().unwrap();
            let fd = (ec(theta + d) - ec(theta - d)) / (2.0 * d);
            let exact = critical_uncertainty_derivative(theta, n).unwrap();
            assert!(
                (fd - exact).abs() <= 1e-5 * exact.abs(),
                "theta {theta}: fd {fd} exact {exact}"
            );
            assert_eq!(exact, f_theta(theta, n).unwrap() / (theta * theta));
        }
    }

    #[test]
    fn paper_design_is_feasible() {
        let set = paper_set();
        let n = h(125);
        assert!(rpe_holds(25.0, &set, 10_000.0, n).unwrap().holds);
        assert!(!rpe_holds(1.0, &set, 10_000.0, n).unwrap().holds);
        assert!(!rpe_holds(2000.0, &set, 10_000.0, n).unwrap().holds);
        assert_eq!(
            rpe_holds(0.0, &set, 10_000.0, n).unwrap_err().kind(),
            "non_positive_feedback"
        );
    }

    #[test]
    fn even_horizon_branches() {
        let set = UncertaintySet::new(0.01, 0.02, 3.0, 1.0).unwrap();
        let n = h(2);
        let threshold = n.doubling_theta() / 0.01; // ~41.4
        let crossing = 1.0 / (0.01 * 4.0); // 25
        let v = rpe_holds(threshold * 1.01, &set, 1.0, n).unwrap();
        assert!(v.holds);
        assert!(matches!(v.reason, RpeReason::EvenAboveDoubling { .. }));
        let v = rpe_holds(0.5 * (threshold + crossing), &set, 1.0, n).unwrap();
        assert!(!v.holds);
        assert!(matches!(v.reason, RpeReason::EvenGap { .. }));
        let v = rpe_holds(10.0, &set, 1.0, n).unwrap();
        assert!(matches!(v.reason, RpeReason::EvenBelowCrossing { .. }));
    }

    #[test]
    fn gap_witness_is_non_positive() {
        // K in the gap: eps = 1/(K mu_min) - 1 zeroes the short term.
        let set = UncertaintySet::new(0.01, 0.02, 3.0, 1.0).unwrap();
        let n = h(2);
        let k = 35.0;
        let c = ControllerParams::new(1.0, k, 1.0).unwrap();
        let eps = 1.0 / (k * 0.01) - 1.0;
        assert!(eps <= set.eps_max());
        assert!(expected_gain_two(&c, 0.01, eps, n).unwrap() <= 0.0);
    }

    #[test]
    fn grid_agrees_on_paper_design() {
        let set = paper_set();
        let n = h(125);
        let grid = GridSpec::default();
        assert!(worst_case_gain_grid(25.0, &set, 10_000.0, n, grid).unwrap().value > 0.0);
        assert!(worst_case_gain_grid(1.0, &set, 10_000.0, n, grid).unwrap().value <= 0.0);
        assert!(worst_case_gain_grid(2000.0, &set, 10_000.0, n, grid).unwrap().value <= 0.0);
        assert!(GridSpec::new(2, 10).is_err());
    }

    #[test]
    fn grid_negative_half_is_positive() {
        let set = paper_set();
        for k in [0.5, 5.0, 25.0, 500.0, 5000.0] {
            let min = worst_case_gain_grid(k, &set, 1.0, h(125), GridSpec::new(40, 40).unwrap()).unwrap();
            assert!(min.negative_half > 0.0, "k {k}: {min:?}");
        }
        let even = UncertaintySet::new(0.01, 0.05, 3.0, -2.0).unwrap();
        for k in [1.0, 30.0, 300.0] {
            let min = worst_case_gain_grid(k, &even, 1.0, h(6), GridSpec::new(40, 40).unwrap()).unwrap();
            assert!(min.negative_half > 0.0, "k {k}: {min:?}");
        }
    }

    #[test]
    fn paper_region() {
        let set = paper_set();
        let (k_max, step) = default_scan(&set);
        let region = admissible_k_region(&set, 10_000.0, h(125), k_max, step).unwrap();
        assert_eq!(region.intervals.len(), 1, "{region:?}");
        let iv = region.intervals[0];
        assert!((iv.lo - 6.33).abs() / 6.33 < 0.01, "{iv:?}");
        let hi = iv.hi.finite().unwrap();
        assert!((hi - 1250.0).abs() / 1250.0 < 0.01, "{iv:?}");
        assert!(region.contains(25.0) && !region.contains(6.0) && !region.contains(1300.0));
    }

    #[test]
    fn zero_uncertainty_region_is_everything() {
        for n in [5, 6, 125] {
            let set = UncertaintySet::new(0.00055, 0.002, 0.0, 1.0).unwrap();
            let (k_max, step) = default_scan(&set);
            let region = admissible_k_region(&set, 1.0, h(n), k_max, step).unwrap();
            assert_eq!(region.intervals.len(), 1);
            assert_eq!(region.intervals[0].lo, 0.0);
            assert!(region.intervals[0].hi.is_infinite());
        }
    }

    #[test]
    fn large_uncertainty_empties_region() {
        // With these momentum bounds and N = 125 the best K tolerates eps_max ~ 98.8.
        let set = UncertaintySet::new(0.00055, 0.002, 50.0, 1.0).unwrap();
        let (k_max, step) = default_scan(&set);
        let region = admissible_k_region(&set, 1.0, h(125), k_max, step).unwrap();
        assert_eq!(region.intervals.len(), 1);
        assert!(region.contains(12.0));

        let set = UncertaintySet::new(0.00055, 0.002, 150.0, 1.0).unwrap();
        let (k_max, step) = default_scan(&set);
        let region = admissible_k_region(&set, 1.0, h(125), k_max, step).unwrap();
        assert!(region.is_empty(), "{region:?}");
    }

    #[test]
    fn scan_validation() {
        let set = paper_set();
        assert_eq!(
            admissible_k_region(&set, 1.0, h(5), 1.0, 2.0).unwrap_err().kind(),
            "invalid_scan"
        );
        assert!(admissible_k_region(&set, 1.0, h(5), 10.0, 0.0).is_err());
    }

    #[test]
    fn delta_is_positive_and_covers_paper_bound() {
        let n = h(125);
        let d = corollary_delta(25.0, 0.00055, 0.002, 1.0, 10_000.0, n).unwrap();
        assert!(d.finite().unwrap() >= 0.8, "{d}");
        for k in [0.1, 1.0, 25.0, 1000.0, 1e4] {
            let d = corollary_delta(k, 0.00055, 0.002, 1.0, 1.0, n).unwrap();
            assert!(d.to_f64() > 0.0);
        }
    }

    #[test]
    fn delta_is_the_minimum_critical_bound() {
        // Feasible iff eps_max < eps_c(K mu) for every mu in [mu_min, mu_max].
        let (mu_min, mu_max) = (0.00055, 0.002);
        for &(k, n) in &[(25.0, 125u32), (300.0, 125), (3.0, 7), (40.0, 11)] {
            let n = h(n);
            let oracle = (0..=2000)
                .map(|i| mu_min + (mu_max - mu_min) * i as f64 / 2000.0)
                .map(|mu| critical_uncertainty(k * mu, n).to_f64())
                .fold(f64::INFINITY, f64::min);
            let d = corollary_delta(k, mu_min, mu_max, 1.0, 1.0, n).unwrap().to_f64();
            assert!((d - oracle).abs() <= 1e-9 * oracle.max(1.0), "k {k}: {d} vs {oracle}");
        }
    }

    #[test]
    fn even_delta_unbounded_above_doubling() {
        let n = h(4);
        let k = 2.0 * n.doubling_theta() / 0.01;
        assert!(corollary_delta(k, 0.01, 0.02, 1.0, 1.0, n).unwrap().is_infinite());
    }
}
