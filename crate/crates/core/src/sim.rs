//! Discrete-time GBM prices driving the two-arm controller.
//!
//! Per stage: compute both investments from the feedback laws, scale them
//! back if the leverage cap binds, accrue `g_i += I_i * rho_i`, then set
//! `V = V(0) + g_1 + g_2`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ControllerParams, Horizon, MarketRealization};

/// Initial price used when none is configured. Gains only depend on returns.
pub const DEFAULT_INITIAL_PRICE: f64 = 100.0;

/// Lower bound on the one-period price factor `1 + mu + sigma w`.
pub const PRICE_FACTOR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GbmParams {
    pub mu_1: f64,
    pub mu_2: f64,
    pub sigma_1: f64,
    pub sigma_2: f64,
    pub s1_0: f64,
    pub s2_0: f64,
}

impl GbmParams {
    pub fn new(mu_1: f64, mu_2: f64, sigma_1: f64, sigma_2: f64, s1_0: f64, s2_0: f64) -> Result<Self> {
        if !(mu_1.is_finite() && mu_2.is_finite()) {
            return Err(Error::InvalidGbm("drifts must be finite"));
        }
        if !(sigma_1 >= 0.0 && sigma_2 >= 0.0) || !(sigma_1.is_finite() && sigma_2.is_finite()) {
            return Err(Error::InvalidGbm("volatilities must be finite and non-negative"));
        }
        if !(s1_0 > 0.0 && s2_0 > 0.0) || !(s1_0.is_finite() && s2_0.is_finite()) {
            return Err(Error::InvalidGbm("initial prices must be positive"));
        }
        Ok(GbmParams {
            mu_1,
            mu_2,
            sigma_1,
            sigma_2,
            s1_0,
            s2_0,
        })
    }

    /// Drifts taken from a market realization: `mu_2 = (1 + eps) beta_0 mu_1`.
    pub fn for_realization(
        real: &MarketRealization,
        beta_0: f64,
        sigma_1: f64,
        sigma_2: f64,
        s1_0: f64,
        s2_0: f64,
    ) -> Result<Self> {
        GbmParams::new(real.mu_1(), real.mu_2(beta_0), sigma_1, sigma_2, s1_0, s2_0)
    }
}

/// Broker leverage limit `|I_1| + |I_2| <= gamma V`, or no limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeverageConfig {
    gamma: Option<f64>,
    v0: f64,
}

impl LeverageConfig {
    pub fn new(gamma: Option<f64>, v0: f64) -> Result<Self> {
        if let Some(g) = gamma {
            if !(g >= 1.0) || !g.is_finite() {
                return Err(Error::InvalidLeverage(g));
            }
        }
        if !(v0 > 0.0) || !v0.is_finite() {
            return Err(Error::NonPositiveAccountValue(v0));
        }
        Ok(LeverageConfig { gamma, v0 })
    }

    pub fn uncapped(v0: f64) -> Result<Self> {
        LeverageConfig::new(None, v0)
    }

    pub fn capped(gamma: f64, v0: f64) -> Result<Self> {
        LeverageConfig::new(Some(gamma), v0)
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControllerState {
    pub g1: f64,
    pub g2: f64,
    /// Investments held over the most recent period.
    pub i1: f64,
    pub i2: f64,
    pub v: f64,
    pub stage: u32,
}

impl ControllerState {
    pub fn initial(v0: f64) -> Self {
        ControllerState {
            g1: 0.0,
            g2: 0.0,
            i1: 0.0,
            i2: 0.0,
            v: v0,
            stage: 0,
        }
    }

    pub fn gain(&self) -> f64 {
        self.g1 + self.g2
    }
}

/// One GBM update `price * (1 + mu + sigma w)`, with no floor applied.
pub fn gbm_step(price: f64, mu: f64, sigma: f64, w: f64) -> f64 {
    price * (1.0 + mu + sigma * w)
}

/// Scales both investments by `gamma V / (|I_1| + |I_2|)` when the cap binds.
///
/// Signs and the ratio of the two positions are kept. A non-positive account
/// value closes both positions.
pub fn apply_leverage_cap(i1: f64, i2: f64, gamma: f64, v: f64) -> (f64, f64) {
    if v <= 0.0 {
        return (0.0, 0.0);
    }
    let total = i1.abs() + i2.abs();
    let limit = gamma * v;
    if total > limit {
        let scale = limit / total;
        (i1 * scale, i2 * scale)
    } else {
        (i1, i2)
    }
}

/// Investments the controller would hold from `state`, after the cap.
pub fn investments(state: &ControllerState, params: &ControllerParams, lev: &LeverageConfig) -> (f64, f64) {
    let i1 = params.long_investment(state.g1);
    let i2 = params.short_investment(state.g2);
    match lev.gamma {
        Some(gamma) => apply_leverage_cap(i1, i2, gamma, state.v),
        None => (i1, i2),
    }
}

/// Advances the controller by one period with realized returns `rho_1`, `rho_2`.
pub fn controller_step(
    state: &ControllerState,
    rho_1: f64,
    rho_2: f64,
    params: &ControllerParams,
    lev: &LeverageConfig,
) -> ControllerState {
    let (i1, i2) = investments(state, params, lev);
    let g1 = state.g1 + i1 * rho_1;
    let g2 = state.g2 + i2 * rho_2;
    ControllerState {
        g1,
        g2,
        i1,
        i2,
        v: lev.v0 + g1 + g2,
        stage: state.stage + 1,
    }
}

/// Row `k` of a simulated path: prices at `k`, investments held over
/// `[k, k+1)` (at `k = N`, the positions the controller would take next),
/// cumulative gains and account value at `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageRecord {
    pub k: u32,
    pub s1: f64,
    pub s2: f64,
    pub i1: f64,
    pub i2: f64,
    pub g1: f64,
    pub g2: f64,
    pub v: f64,
}

impl StageRecord {
    pub fn gain(&self) -> f64 {
        self.g1 + self.g2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathResult {
    pub records: Vec<StageRecord>,
    /// `(V(N) - V(0)) / V(0)`.
    pub final_return: f64,
    /// Some price factor hit [`PRICE_FACTOR_FLOOR`].
    pub price_floor_hit: bool,
}

impl PathResult {
    pub fn gain_series(&self) -> Vec<f64> {
        self.records.iter().map(StageRecord::gain).collect()
    }

    pub fn value_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.v).collect()
    }

    pub fn final_gain(&self) -> f64 {
        self.records.last().map_or(0.0, StageRecord::gain)
    }
}

/// Final state of a path without per-stage records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    pub state: ControllerState,
    pub final_return: f64,
    pub price_floor_hit: bool,
}

fn floored_return(mu: f64, sigma: f64, w: f64, floor_hit: &mut bool) -> f64 {
    let rho = mu + sigma * w;
    if 1.0 + rho < PRICE_FACTOR_FLOOR {
        *floor_hit = true;
        PRICE_FACTOR_FLOOR - 1.0
    } else {
        rho
    }
}

/// Runs one path, drawing `w_1(k)` then `w_2(k)` from `rng` at every stage.
///
/// `records` receives the `N + 1` stage rows when given.
pub fn simulate_path<R: Rng + ?Sized>(
    gbm: &GbmParams,
    params: &ControllerParams,
    lev: &LeverageConfig,
    n: Horizon,
    rng: &mut R,
    mut records: Option<&mut Vec<StageRecord>>,
) -> Result<PathOutcome> {
    let mut state = ControllerState::initial(lev.v0);
    let (mut s1, mut s2) = (gbm.s1_0, gbm.s2_0);
    let mut floor_hit = false;
    for _ in 0..n.n() {
        let w1: f64 = StandardNormal.sample(rng);
        let w2: f64 = StandardNormal.sample(rng);
        let rho_1 = floored_return(gbm.mu_1, gbm.sigma_1, w1, &mut floor_hit);
        let rho_2 = floored_return(gbm.mu_2, gbm.sigma_2, w2, &mut floor_hit);
        let next = controller_step(&state, rho_1, rho_2, params, lev);
        if let Some(rows) = records.as_deref_mut() {
            rows.push(StageRecord {
                k: state.stage,
                s1,
                s2,
                i1: next.i1,
                i2: next.i2,
                g1: state.g1,
                g2: state.g2,
                v: state.v,
            });
        }
        s1 *= 1.0 + rho_1;
        s2 *= 1.0 + rho_2;
        state = next;
        if !state.v.is_finite() {
            return Err(Error::Overflow("account value"));
        }
    }
    if let Some(rows) = records {
        let (i1, i2) = investments(&state, params, lev);
        rows.push(StageRecord {
            k: state.stage,
            s1,
            s2,
            i1,
            i2,
            g1: state.g1,
            g2: state.g2,
            v: state.v,
        });
    }
    Ok(PathOutcome {
        state,
        final_return: (state.v - lev.v0) / lev.v0,
        price_floor_hit: floor_hit,
    })
}

/// Simulates one sample path; a pure function of its arguments and `seed`.
pub fn run_path(
    gbm: &GbmParams,
    params: &ControllerParams,
    lev: &LeverageConfig,
    n: Horizon,
    seed: u64,
) -> Result<PathResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(n.n() as usize + 1);
    let outcome = simulate_path(gbm, params, lev, n, &mut rng, Some(&mut records))?;
    Ok(PathResult {
        records,
        final_return: outcome.final_return,
        price_floor_hit: outcome.price_floor_hit,
    })
}
