//! Domain types shared by the analytic, theorem and simulation layers.
//!
//! Everything here is an immutable value object: constructors validate and
//! the fields are only reachable through accessors afterwards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Trader-known bounds on the admissible market family.
///
/// The first stock's drift satisfies `mu_min <= |mu_1| <= mu_max` and the
/// second stock's drift is `mu_2 = (1 + eps) * beta_0 * mu_1` with
/// `0 <= eps <= eps_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawUncertaintySet", into = "RawUncertaintySet")]
pub struct UncertaintySet {
    mu_min: f64,
    mu_max: f64,
    eps_max: f64,
    beta_0: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUncertaintySet {
    mu_min: f64,
    mu_max: f64,
    eps_max: f64,
    beta_0: f64,
}

impl TryFrom<RawUncertaintySet> for UncertaintySet {
    type Error = Error;

    fn try_from(raw: RawUncertaintySet) -> Result<Self> {
        UncertaintySet::new(raw.mu_min, raw.mu_max, raw.eps_max, raw.beta_0)
    }
}

impl From<UncertaintySet> for RawUncertaintySet {
    fn from(set: UncertaintySet) -> Self {
        RawUncertaintySet {
            mu_min: set.mu_min,
            mu_max: set.mu_max,
            eps_max: set.eps_max,
            beta_0: set.beta_0,
        }
    }
}

impl UncertaintySet {
    pub fn new(mu_min: f64, mu_max: f64, eps_max: f64, beta_0: f64) -> Result<Self> {
        if !(mu_min > 0.0) || !mu_min.is_finite() {
            return Err(Error::NonPositiveMuMin(mu_min));
        }
        if !(mu_min <= mu_max) || !mu_max.is_finite() {
            return Err(Error::InvertedMomentumBounds { mu_min, mu_max });
        }
        if !(eps_max >= 0.0) || !eps_max.is_finite() {
            return Err(Error::NegativeEpsMax(eps_max));
        }
        if beta_0 == 0.0 || !beta_0.is_finite() {
            return Err(Error::InvalidBeta(beta_0));
        }
        Ok(UncertaintySet {
            mu_min,
            mu_max,
            eps_max,
            beta_0,
        })
    }

    pub fn mu_min(&self) -> f64 {
        self.mu_min
    }

    pub fn mu_max(&self) -> f64 {
        self.mu_max
    }

    pub fn eps_max(&self) -> f64 {
        self.eps_max
    }

    pub fn beta_0(&self) -> f64 {
        self.beta_0
    }

    /// Same momentum bounds and `beta_0`, different correlation uncertainty.
    pub fn with_eps_max(&self, eps_max: f64) -> Result<Self> {
        UncertaintySet::new(self.mu_min, self.mu_max, eps_max, self.beta_0)
    }

    /// Zero correlation uncertainty: the pair degenerates to the single-stock problem.
    pub fn is_degenerate(&self) -> bool {
        self.eps_max == 0.0
    }

    /// Bounds `(lo, hi)` on `|mu_2|` implied by the set.
    pub fn mu_2_magnitude_bounds(&self) -> (f64, f64) {
        let b = self.beta_0.abs();
        (b * self.mu_min, (1.0 + self.eps_max) * b * self.mu_max)
    }
}

/// Checks the raw bounds and hands back the validated set.
pub fn validate_uncertainty(mu_min: f64, mu_max: f64, eps_max: f64, beta_0: f64) -> Result<UncertaintySet> {
    UncertaintySet::new(mu_min, mu_max, eps_max, beta_0)
}

/// One admissible market: the first stock's drift and the correlation
/// uncertainty. The second drift is always derived, never stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarketRealization {
    mu_1: f64,
    eps: f64,
}

impl MarketRealization {
    /// Endpoints are admissible: `|mu_1| = mu_min` and `eps = eps_max` are accepted.
    pub fn new(mu_1: f64, eps: f64, set: &UncertaintySet) -> Result<Self> {
        let m = mu_1.abs();
        if !(m >= set.mu_min && m <= set.mu_max) {
            return Err(Error::NotAdmissible {
                mu_1,
                eps,
                reason: "|mu_1| outside [mu_min, mu_max]",
            });
        }
        if !(eps >= 0.0 && eps <= set.eps_max) {
            return Err(Error::NotAdmissible {
                mu_1,
                eps,
                reason: "eps outside [0, eps_max]",
            });
        }
        Ok(MarketRealization { mu_1, eps })
    }

    pub fn mu_1(&self) -> f64 {
        self.mu_1
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `beta = (1 + eps) * beta_0`.
    pub fn beta(&self, beta_0: f64) -> f64 {
        (1.0 + self.eps) * beta_0
    }

    pub fn mu_2(&self, beta_0: f64) -> f64 {
        self.beta(beta_0) * self.mu_1
    }
}

/// Controller design: the trader picks `i0` and `k`; the per-arm values are
/// rescaled by `beta_0` so both arms see the same effective momentum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControllerParams {
    i0: f64,
    k: f64,
    beta_0: f64,
}

impl ControllerParams {
    pub fn new(i0: f64, k: f64, beta_0: f64) -> Result<Self> {
        if !(i0 > 0.0) || !i0.is_finite() {
            return Err(Error::NonPositiveInvestment(i0));
        }
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::NonPositiveFeedback(k));
        }
        if beta_0 == 0.0 || !beta_0.is_finite() {
            return Err(Error::InvalidBeta(beta_0));
        }
        Ok(ControllerParams { i0, k, beta_0 })
    }

    pub fn i0(&self) -> f64 {
        self.i0
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn beta_0(&self) -> f64 {
        self.beta_0
    }

    /// Initial investment of the long arm.
    pub fn i0_1(&self) -> f64 {
        self.i0
    }

    /// Initial investment magnitude of the short arm.
    pub fn i0_2(&self) -> f64 {
        self.i0 / self.beta_0
    }

    pub fn k1(&self) -> f64 {
        self.k
    }

    pub fn k2(&self) -> f64 {
        self.k / self.beta_0
    }

    /// Long-arm investment `I_1 = I_{0,1} + K_1 g_1`.
    pub fn long_investment(&self, g1: f64) -> f64 {
        self.i0_1() + self.k1() * g1
    }

    /// Short-arm investment `I_2 = -I_{0,2} - K_2 g_2`.
    pub fn short_investment(&self, g2: f64) -> f64 {
        -self.i0_2() - self.k2() * g2
    }
}

/// Builds the per-arm controller parameters for the given set's `beta_0`.
pub fn derive_controller(i0: f64, k: f64, set: &UncertaintySet) -> Result<ControllerParams> {
    ControllerParams::new(i0, k, set.beta_0)
}

/// Number of trading periods `N >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Horizon(u32);

impl Horizon {
    pub fn new(n: u32) -> Result<Self> {
        if n < 2 {
            return Err(Error::HorizonTooShort(n));
        }
        Ok(Horizon(n))
    }

    pub fn n(self) -> u32 {
        self.0
    }

    pub fn as_i32(self) -> i32 {
        self.0 as i32
    }

    pub fn is_odd(self) -> bool {
        self.0 % 2 == 1
    }

    pub fn is_even(self) -> bool {
        !self.is_odd()
    }

    /// `2^(1/N) - 1`, the value of `theta` where `(1 + theta)^N = 2`.
    pub fn doubling_theta(self) -> f64 {
        (std::f64::consts::LN_2 / self.0 as f64).exp_m1()
    }
}

impl TryFrom<u32> for Horizon {
    type Error = Error;

    fn try_from(n: u32) -> Result<Self> {
        Horizon::new(n)
    }
}

impl From<Horizon> for u32 {
    fn from(h: Horizon) -> u32 {
        h.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn paper_bounds_validate() {
        let set = validate_uncertainty(0.00055, 0.002, 0.8, 1.0).unwrap();
        assert_eq!(set.mu_min(), 0.00055);
        assert_eq!(set.eps_max(), 0.8);
    }

    #[test]
    fn point_interval_with_zero_uncertainty() {
        let set = validate_uncertainty(0.001, 0.001, 0.0, 1.0).unwrap();
        assert!(set.is_degenerate());
    }

    #[test]
    fn each_violation_has_its_own_kind() {
        let cases = [
            (validate_uncertainty(0.0, 0.002, 0.8, 1.0), "non_positive_mu_min"),
            (validate_uncertainty(-1e-3, 0.002, 0.8, 1.0), "non_positive_mu_min"),
            (validate_uncertainty(0.002, 0.001, 0.8, 1.0), "inverted_momentum_bounds"),
            (validate_uncertainty(0.001, 0.002, -0.1, 1.0), "negative_eps_max"),
            (validate_uncertainty(0.001, 0.002, 0.1, 0.0), "invalid_beta"),
            (validate_uncertainty(f64::NAN, 0.002, 0.1, 1.0), "non_positive_mu_min"),
        ];
        for (res, kind) in cases {
            assert_eq!(res.unwrap_err().kind(), kind);
        }
    }

    #[test]
    fn deserialize_validates() {
        let ok: UncertaintySet =
            serde_json::from_str(r#"{"mu_min":0.00055,"mu_max":0.002,"eps_max":0.8,"beta_0":1.0}"#).unwrap();
        assert_eq!(ok.mu_max(), 0.002);
        let bad =
            serde_json::from_str::<UncertaintySet>(r#"{"mu_min":0.003,"mu_max":0.002,"eps_max":0.8,"beta_0":1.0}"#);
        assert!(bad.is_err());
        let unknown = serde_json::from_str::<UncertaintySet>(
            r#"{"mu_min":0.001,"mu_max":0.002,"eps_max":0.8,"beta_0":1.0,"extra":1}"#,
        );
        assert!(unknown.is_err());
    }

    #[test]
    fn controller_with_unit_beta() {
        let set = validate_uncertainty(0.00055, 0.002, 0.8, 1.0).unwrap();
        let c = derive_controller(10_000.0, 25.0, &set).unwrap();
        assert_eq!((c.i0_1(), c.i0_2(), c.k1(), c.k2()), (10_000.0, 10_000.0, 25.0, 25.0));
    }

    #[test]
    fn controller_scales_short_arm_by_beta() {
        let set = validate_uncertainty(0.00055, 0.002, 0.8, 2.0).unwrap();
        let c = derive_controller(10_000.0, 25.0, &set).unwrap();
        assert_eq!(c.i0_2(), 5_000.0);
        assert_eq!(c.k2(), 12.5);

        let set = validate_uncertainty(0.00055, 0.002, 0.8, -1.0).unwrap();
        let c = derive_controller(10_000.0, 25.0, &set).unwrap();
        assert_eq!(c.i0_2(), -10_000.0);
        assert_eq!(c.k2(), -25.0);
    }

    #[test]
    fn controller_rejects_non_positive_inputs() {
        let set = validate_uncertainty(0.001, 0.002, 0.1, 1.0).unwrap();
        assert_eq!(
            derive_controller(0.0, 1.0, &set).unwrap_err().kind(),
            "non_positive_investment"
        );
        assert_eq!(
            derive_controller(1.0, -2.0, &set).unwrap_err().kind(),
            "non_positive_feedback"
        );
    }

    #[test]
    fn realization_endpoints_are_admissible() {
        let set = validate_uncertainty(0.001, 0.002, 0.5, 1.0).unwrap();
        assert!(MarketRealization::new(0.001, 0.5, &set).is_ok());
        assert!(MarketRealization::new(-0.002, 0.0, &set).is_ok());
        assert!(MarketRealization::new(0.0009, 0.1, &set).is_err());
        assert!(MarketRealization::new(0.0015, 0.51, &set).is_err());
        assert!(MarketRealization::new(0.0015, -0.01, &set).is_err());
    }

    #[test]
    fn horizon_parity_and_minimum() {
        assert!(Horizon::new(1).is_err());
        assert!(Horizon::new(125).unwrap().is_odd());
        assert!(Horizon::new(2).unwrap().is_even());
        let h = Horizon::new(4).unwrap();
        assert!(((1.0 + h.doubling_theta()).powi(4) - 2.0).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn per_arm_ratio_is_i0_over_k(
            i0 in 1e-3f64..1e6,
            k in 1e-3f64..1e4,
            beta in prop_oneof![-10.0f64..-0.01, 0.01f64..10.0],
        ) {
            let c = ControllerParams::new(i0, k, beta).unwrap();
            let r = i0 / k;
            prop_assert!((c.i0_1() / c.k1() - r).abs() <= 1e-12 * r);
            prop_assert!((c.i0_2() / c.k2() - r).abs() <= 1e-12 * r);
            prop_assert!((c.i0_1() * c.k2() - c.i0_2() * c.k1()).abs() <= 1e-9 * (c.i0_1() * c.k2()).abs());
        }

        #[test]
        fn mu_2_sign_follows_beta_and_mu_1(
            mu_min in 1e-5f64..1e-2,
            spread in 1.0f64..5.0,
            eps_max in 0.0f64..3.0,
            beta in prop_oneof![-5.0f64..-0.01, 0.01f64..5.0],
            u in 0.0f64..1.0,
            v in 0.0f64..1.0,
            negative in any::<bool>(),
        ) {
            let set = UncertaintySet::new(mu_min, mu_min * spread, eps_max, beta).unwrap();
            let m = mu_min + u * (set.mu_max() - mu_min);
            let mu_1 = if negative { -m } else { m };
            let real = MarketRealization::new(mu_1, v * eps_max, &set).unwrap();
            let mu_2 = real.mu_2(beta);
            prop_assert_eq!(mu_2.signum(), beta.signum() * mu_1.signum());
            let (lo, hi) = set.mu_2_magnitude_bounds();
            prop_assert!(mu_2.abs() >= lo * (1.0 - 1e-12) && mu_2.abs() <= hi * (1.0 + 1e-12));
        }
    }
}
