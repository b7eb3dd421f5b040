//! Randomized agreement check between [`rpe_holds`] and the brute-force grid
//! minimum of the expected gain.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::ensemble::path_rng;
use crate::error::{Error, Result};
use crate::model::{Horizon, UncertaintySet};
use crate::rpe::{rpe_holds, worst_case_gain_grid, GridSpec};

/// Grid minima this close to zero are treated as boundary cases.
pub const BOUNDARY_ABS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub horizons: Vec<u32>,
    pub sets_per_horizon: usize,
    pub ks_per_set: usize,
    pub seed: u64,
    pub grid: GridSpec,
    pub i0: f64,
}

impl VerifyConfig {
    pub fn new(horizons: Vec<u32>, sets_per_horizon: usize, ks_per_set: usize, seed: u64) -> Result<Self> {
        if horizons.is_empty() || sets_per_horizon == 0 || ks_per_set == 0 {
            return Err(Error::InvalidGrid("verification needs at least one horizon, set and K"));
        }
        for &n in &horizons {
            Horizon::new(n)?;
        }
        Ok(VerifyConfig {
            horizons,
            sets_per_horizon,
            ks_per_set,
            seed,
            grid: GridSpec::default(),
            i0: 1.0,
        })
    }
}

/// Random uncertainty set: `mu_min` log-uniform on `[1e-4, 1e-2]`,
/// `mu_max = mu_min (1 + 4u)`, `eps_max ~ U[0, 2]`, `|beta_0| ~ U[0.5, 2]`
/// with a random sign.
pub fn random_set<R: Rng + ?Sized>(rng: &mut R) -> UncertaintySet {
    let mu_min = 10f64.powf(rng.random_range(-4.0..-2.0));
    let mu_max = mu_min * (1.0 + 4.0 * rng.random::<f64>());
    let eps_max = 2.0 * rng.random::<f64>();
    let magnitude = rng.random_range(0.5..2.0);
    let beta_0 = if rng.random_bool(0.5) { magnitude } else { -magnitude };
    UncertaintySet::new(mu_min, mu_max, eps_max, beta_0).expect("random set is valid")
}

/// `K` log-uniform on `[0.01 / mu_max, 3 / mu_min]`.
pub fn random_k<R: Rng + ?Sized>(set: &UncertaintySet, rng: &mut R) -> f64 {
    let lo = (0.01 / set.mu_max()).ln();
    let hi = (3.0 / set.mu_min()).ln();
    rng.random_range(lo..hi).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mismatch {
    pub n: u32,
    pub k: f64,
    pub set: UncertaintySet,
    pub theorem: bool,
    pub grid_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HorizonTally {
    pub n: u32,
    pub checked: u64,
    pub agree: u64,
    pub boundary: u64,
    pub disagree: u64,
    /// Cases the grid could not evaluate in floating point.
    pub skipped: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub per_horizon: Vec<HorizonTally>,
    pub checked: u64,
    pub agree: u64,
    pub boundary: u64,
    pub disagree: u64,
    pub skipped: u64,
    pub mismatches: Vec<Mismatch>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.disagree == 0
    }
}

enum Outcome {
    Agree,
    Boundary,
    Disagree(Mismatch),
    Skipped,
}

fn check(k: f64, set: &UncertaintySet, n: Horizon, config: &VerifyConfig) -> Result<Outcome> {
    let theorem = rpe_holds(k, set, config.i0, n)?.holds;
    let grid = match worst_case_gain_grid(k, set, config.i0, n, config.grid) {
        Ok(g) => g,
        Err(e) if e.is_overflow() => return Ok(Outcome::Skipped),
        Err(e) => return Err(e),
    };
    if !grid.value.is_finite() && grid.value > 0.0 {
        return Ok(Outcome::Skipped);
    }
    Ok(if theorem == (grid.value > 0.0) {
        Outcome::Agree
    } else if grid.value.abs() < BOUNDARY_ABS_TOL {
        Outcome::Boundary
    } else {
        Outcome::Disagree(Mismatch {
            n: n.n(),
            k,
            set: *set,
            theorem,
            grid_min: grid.value,
        })
    })
}

/// Runs the check for every horizon. Set `j` of horizon `n` draws from its own
/// RNG stream, so the report is independent of thread scheduling.
pub fn verify_theorem(config: &VerifyConfig) -> Result<VerifyReport> {
    let mut report = VerifyReport {
        seed: config.seed,
        per_horizon: Vec::new(),
        checked: 0,
        agree: 0,
        boundary: 0,
        disagree: 0,
        skipped: 0,
        mismatches: Vec::new(),
    };
    for &n_raw in &config.horizons {
        let n = Horizon::new(n_raw)?;
        let outcomes: Vec<Vec<Outcome>> = (0..config.sets_per_horizon)
            .into_par_iter()
            .map(|j| {
                let mut rng = path_rng(config.seed, (u64::from(n_raw) << 32) | j as u64);
                let set = random_set(&mut rng);
                (0..config.ks_per_set)
                    .map(|_| check(random_k(&set, &mut rng), &set, n, config))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let mut tally = HorizonTally {
            n: n_raw,
            checked: 0,
            agree: 0,
            boundary: 0,
            disagree: 0,
            skipped: 0,
        };
        for outcome in outcomes.into_iter().flatten() {
            tally.checked += 1;
            match outcome {
                Outcome::Agree => tally.agree += 1,
                Outcome::Boundary => tally.boundary += 1,
                Outcome::Skipped => tally.skipped += 1,
                Outcome::Disagree(m) => {
                    tally.disagree += 1;
                    report.mismatches.push(m);
                }
            }
        }
        report.checked += tally.checked;
        report.agree += tally.agree;
        report.boundary += tally.boundary;
        report.disagree += tally.disagree;
        report.skipped += tally.skipped;
        report.per_horizon.push(tally);
    }
    Ok(report)
}
