//! Monte Carlo over the admissible market family.
//!
//! Each path draws its own `(mu_1, eps)` uniformly from the uncertainty set
//! and then a GBM sample path. Path `i` uses the ChaCha8 stream `i` keyed by
//! the master seed, so its draws do not depend on how many paths run or on
//! which thread runs them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ControllerParams, Horizon, MarketRealization, UncertaintySet};
use crate::sim::{simulate_path, GbmParams, LeverageConfig};

pub const DEFAULT_BINS: usize = 200;
pub const DEFAULT_QUANTILES: [f64; 7] = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99];

/// Loss threshold, as a fraction of `V(0)`, for the loss-tail statistic.
pub const LOSS_TAIL_THRESHOLD: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleConfig {
    pub n_paths: u64,
    pub master_seed: u64,
    pub set: UncertaintySet,
    pub params: ControllerParams,
    pub leverage: LeverageConfig,
    pub horizon: Horizon,
    pub sigma_1: f64,
    pub sigma_2: f64,
    pub s1_0: f64,
    pub s2_0: f64,
    pub bins: usize,
    pub quantiles: Vec<f64>,
}

/// Draws `eps ~ U[0, eps_max]` and `mu_1` uniformly on
/// `[-mu_max, -mu_min] U [mu_min, mu_max]` (each sign with probability 1/2).
pub fn sample_realization<R: Rng + ?Sized>(set: &UncertaintySet, rng: &mut R) -> MarketRealization {
    let eps = rng.random::<f64>() * set.eps_max();
    let u: f64 = rng.random();
    let magnitude = (set.mu_min() + u * (set.mu_max() - set.mu_min())).min(set.mu_max());
    let mu_1 = if rng.random_bool(0.5) { magnitude } else { -magnitude };
    MarketRealization::new(mu_1, eps, set).expect("sampled point lies in the admissible set")
}

/// RNG for path `index`: stream `index` of the ChaCha8 generator keyed by `master_seed`.
pub fn path_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// One sampled path of the ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathSample {
    pub mu_1: f64,
    pub eps: f64,
    pub final_return: f64,
    pub final_gain: f64,
    pub price_floor_hit: bool,
}

pub fn run_single(config: &EnsembleConfig, index: u64) -> Result<PathSample> {
    let mut rng = path_rng(config.master_seed, index);
    let real = sample_realization(&config.set, &mut rng);
    let gbm = GbmParams::for_realization(
        &real,
        config.set.beta_0(),
        config.sigma_1,
        config.sigma_2,
        config.s1_0,
        config.s2_0,
    )?;
    let out = simulate_path(&gbm, &config.params, &config.leverage, config.horizon, &mut rng, None)?;
    Ok(PathSample {
        mu_1: real.mu_1(),
        eps: real.eps(),
        final_return: out.final_return,
        final_gain: out.state.gain(),
        price_floor_hit: out.price_floor_hit,
    })
}

/// Runs every path, in path order. `workers = None` uses the global rayon pool.
pub fn run_paths(config: &EnsembleConfig, workers: Option<usize>) -> Result<Vec<PathSample>> {
    if config.n_paths == 0 {
        return Err(Error::NoPaths);
    }
    let work = || {
        (0..config.n_paths)
            .into_par_iter()
            .map(|i| run_single(config, i))
            .collect::<Result<Vec<_>>>()
    };
    match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .expect("thread pool")
            .install(work),
        None => work(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantilePoint {
    pub p: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub n_paths: u64,
    pub seed: u64,
    #[serde(rename = "mean")]
    pub mean_return: f64,
    #[serde(rename = "median")]
    pub median_return: f64,
    pub prob_profit: f64,
    pub quantiles: Vec<QuantilePoint>,
    /// Share of unprofitable paths that lost less than 10% of `V(0)`;
    /// `None` when no path was unprofitable.
    pub loss_tail: Option<f64>,
    pub mean_gain: f64,
    pub floor_hits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleOutput {
    pub stats: EnsembleStats,
    pub histogram: Histogram,
}

/// Runs the ensemble and reduces it to summary statistics and a histogram.
///
/// Results are bit-identical for any `workers`.
pub fn run_ensemble(config: &EnsembleConfig, workers: Option<usize>) -> Result<EnsembleOutput> {
    let samples = run_paths(config, workers)?;
    let returns: Vec<f64> = samples.iter().map(|s| s.final_return).collect();
    let gains: Vec<f64> = samples.iter().map(|s| s.final_gain).collect();
    let floor_hits = samples.iter().filter(|s| s.price_floor_hit).count() as u64;
    let mut stats = summarize(&returns, &config.quantiles)?;
    stats.n_paths = config.n_paths;
    stats.seed = config.master_seed;
    stats.mean_gain = compensated_mean(&gains);
    stats.floor_hits = floor_hits;
    let histogram = histogram(&returns, &Bins::Count(config.bins.max(1)))?;
    Ok(EnsembleOutput { stats, histogram })
}

/// Neumaier-compensated mean.
pub fn compensated_mean(values: &[f64]) -> f64 {
    let mut sum = 0.0_f64;
    let mut carry = 0.0_f64;
    for &x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            carry += (sum - t) + x;
        } else {
            carry += (x - t) + sum;
        }
        sum = t;
    }
    (sum + carry) / values.len() as f64
}

/// Linear-interpolation quantile of an ascending sample.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Exact median by selection.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut buf = values.to_vec();
    let n = buf.len();
    let mid = n / 2;
    let (left, upper, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        Ok(upper)
    } else {
        let lower = left.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(0.5 * (lower + upper))
    }
}

/// Summary statistics of a sample of returns. Profit means a return `> 0`.
pub fn summarize(returns: &[f64], quantiles: &[f64]) -> Result<EnsembleStats> {
    if returns.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = returns.len();
    let mut sorted = returns.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let profitable = returns.iter().filter(|&&x| x > 0.0).count();
    let unprofitable = n - profitable;
    let small_losses = returns
        .iter()
        .filter(|&&x| x <= 0.0 && x > -LOSS_TAIL_THRESHOLD)
        .count();
    Ok(EnsembleStats {
        n_paths: n as u64,
        seed: 0,
        mean_return: compensated_mean(returns),
        median_return: median(returns)?,
        prob_profit: profitable as f64 / n as f64,
        quantiles: quantiles
            .iter()
            .map(|&p| QuantilePoint {
                p,
                value: quantile_sorted(&sorted, p),
            })
            .collect(),
        loss_tail: (unprofitable > 0).then(|| small_losses as f64 / unprofitable as f64),
        mean_gain: f64::NAN,
        floor_hits: 0,
    })
}

pub enum Bins {
    /// Equal-width bins spanning the observed range.
    Count(usize),
    /// Explicit ascending edges; values outside are not counted.
    Edges(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// `count / (n * bin_width)`, with `n` the full sample size.
    pub density: Vec<f64>,
}

impl Histogram {
    /// Bin with the largest count (first one on ties).
    pub fn mode_bin(&self) -> (f64, f64) {
        let mut best = 0;
        for (i, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = i;
            }
        }
        (self.edges[best], self.edges[best + 1])
    }
}

pub fn histogram(values: &[f64], bins: &Bins) -> Result<Histogram> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    let edges = match bins {
        Bins::Count(0) => return Err(Error::InvalidBins("need at least one bin")),
        Bins::Count(count) => {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
            let mut e: Vec<f64> = (0..=*count)
                .map(|i| lo + (hi - lo) * i as f64 / *count as f64)
                .collect();
            e[*count] = hi;
            e
        }
        Bins::Edges(e) => {
            if e.len() < 2 || e.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidBins("edges must be strictly increasing"));
            }
            e.clone()
        }
    };
    let nb = edges.len() - 1;
    let (lo, hi) = (edges[0], edges[nb]);
    let mut counts = vec![0u64; nb];
    for &x in values {
        if !(x >= lo && x <= hi) {
            continue;
        }
        // partition_point gives the first edge > x
        let idx = edges.partition_point(|&e| e <= x).saturating_sub(1).min(nb - 1);
        counts[idx] += 1;
    }
    let n = values.len() as f64;
    let density = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, w)| c as f64 / (n * (w[1] - w[0])))
        .collect();
    Ok(Histogram { edges, counts, density })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_config(n_paths: u64, gamma: Option<f64>) -> EnsembleConfig {
        let set = UncertaintySet::new(0.00055, 0.002, 0.8, 1.0).unwrap();
        EnsembleConfig {
            n_paths,
            master_seed: 2024,
            set,
            params: ControllerParams::new(10_000.0, 25.0, 1.0).unwrap(),
            leverage: LeverageConfig::new(gamma, 10_000.0).unwrap(),
            horizon: Horizon::new(125).unwrap(),
            sigma_1: 0.0094,
            sigma_2: 0.0094,
            s1_0: 100.0,
            s2_0: 100.0,
            bins: DEFAULT_BINS,
            quantiles: DEFAULT_QUANTILES.to_vec(),
        }
    }

    #[test]
    fn degenerate_sampling() {
        let set = UncertaintySet::new(0.001, 0.001, 0.0, 1.0).unwrap();
        let mut rng = path_rng(1, 0);
        let mut signs = [0, 0];
        for _ in 0..1000 {
            let r = sample_realization(&set, &mut rng);
            assert_eq!(r.eps(), 0.0);
            assert_eq!(r.mu_1().abs(), 0.001);
            signs[(r.mu_1() > 0.0) as usize] += 1;
        }
        assert!(signs[0] > 400 && signs[1] > 400);
    }

    #[test]
    fn magnitude_mean_is_midpoint() {
        let set = UncertaintySet::new(0.00055, 0.002, 0.8, 1.0).unwrap();
        let mut rng = path_rng(99, 3);
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_realization(&set, &mut rng).mu_1().abs())
            .collect();
        let mean = compensated_mean(&draws);
        let sd = (0.002 - 0.00055) / 12f64.sqrt();
        let se = sd / (n as f64).sqrt();
        assert!((mean - 0.001275).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn streams_are_independent_of_path_count() {
        let a = run_paths(&paper_config(20, Some(2.0)), Some(1)).unwrap();
        let b = run_paths(&paper_config(50, Some(2.0)), Some(1)).unwrap();
        assert_eq!(a[..], b[..20]);
    }

    #[test]
    fn identical_across_worker_counts() {
        let cfg = paper_config(500, Some(2.0));
        let one = run_ensemble(&cfg, Some(1)).unwrap();
        let four = run_ensemble(&cfg, Some(4)).unwrap();
        let sixteen = run_ensemble(&cfg, Some(16)).unwrap();
        assert_eq!(one, four);
        assert_eq!(one, sixteen);
    }

    #[test]
    fn single_path_collapses() {
        let out = run_ensemble(&paper_config(1, Some(2.0)), None).unwrap();
        let s = &out.stats;
        assert_eq!(s.mean_return, s.median_return);
        assert!(s.prob_profit == 0.0 || s.prob_profit == 1.0);
        assert_eq!(out.histogram.counts.iter().sum::<u64>(), 1);
    }

    #[test]
    fn stats_identities() {
        let out = run_ensemble(&paper_config(2000, Some(2.0)), None).unwrap();
        let s = &out.stats;
        assert_eq!(out.histogram.counts.iter().sum::<u64>(), 2000);
        assert!((0.0..=1.0).contains(&s.prob_profit));
        let samples = run_paths(&paper_config(2000, Some(2.0)), None).unwrap();
        let non_positive = samples.iter().filter(|p| p.final_return <= 0.0).count() as f64 / 2000.0;
        assert_eq!(s.prob_profit + non_positive, 1.0);
        assert_eq!(s.median_return, s.quantiles[3].value);
    }

    fn mean_and_se(xs: &[f64]) -> (f64, f64) {
        let m = compensated_mean(xs);
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        (m, (var / xs.len() as f64).sqrt())
    }

    fn simpson(n: usize, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn uncapped_fixed_market_matches_closed_form() {
        let cfg = paper_config(100_000, None);
        let real = MarketRealization::new(0.002, 0.3, &cfg.set).unwrap();
        let gbm = GbmParams::for_realization(&real, 1.0, 0.0094, 0.0094, 100.0, 100.0).unwrap();
        let gains: Vec<f64> = (0..cfg.n_paths)
            .into_par_iter()
            .map(|i| {
                let mut rng = path_rng(5, i);
                simulate_path(&gbm, &cfg.params, &cfg.leverage, cfg.horizon, &mut rng, None)
                    .unwrap()
                    .state
                    .gain()
            })
            .collect();
        let (m, se) = mean_and_se(&gains);
        let exact = crate::analytic::expected_gain_two(&cfg.params, 0.002, 0.3, cfg.horizon).unwrap();
        assert!((m - exact).abs() < 4.0 * se, "mean {m} exact {exact} se {se}");
    }

    #[test]
    fn uncapped_ensemble_matches_averaged_closed_form() {
        let cfg = paper_config(100_000, None);
        let gains: Vec<f64> = run_paths(&cfg, None).unwrap().iter().map(|p| p.final_gain).collect();
        let (m, se) = mean_and_se(&gains);
        let (lo, hi, e) = (cfg.set.mu_min(), cfg.set.mu_max(), cfg.set.eps_max());
        let g = |mu: f64, eps: f64| crate::analytic::expected_gain_two(&cfg.params, mu, eps, cfg.horizon).unwrap();
        let inner = |mu: f64| simpson(400, 0.0, e, |eps| 0.5 * (g(mu, eps) + g(-mu, eps))) / e;
        let oracle = simpson(400, lo, hi, inner) / (hi - lo);
        assert!((m - oracle).abs() < 4.0 * se, "mean {m} oracle {oracle} se {se}");
    }

    #[test]
    fn paper_ensemble_loss_distribution() {
        let out = run_ensemble(&paper_config(20_000, Some(2.0)), None).unwrap();
        let h = &out.histogram;
        let integral: f64 = h
            .density
            .iter()
            .zip(h.edges.windows(2))
            .map(|(d, w)| d * (w[1] - w[0]))
            .sum();
        assert!((integral - 1.0).abs() < 1e-9);
        assert!(out.stats.loss_tail.unwrap() > 0.99);
    }

    #[test]
    fn zero_paths_rejected() {
        assert_eq!(run_ensemble(&paper_config(0, None), None).unwrap_err(), Error::NoPaths);
    }

    #[test]
    fn histogram_basics() {
        let h = histogram(&[0.3], &Bins::Count(1)).unwrap();
        assert_eq!(h.counts, vec![1]);
        let values: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let h = histogram(&values, &Bins::Count(17)).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>(), 1000);
        let integral: f64 = h
            .density
            .iter()
            .zip(h.edges.windows(2))
            .map(|(d, w)| d * (w[1] - w[0]))
            .sum();
        assert!((integral - 1.0).abs() < 1e-9);
        assert_eq!(histogram(&[], &Bins::Count(3)).unwrap_err(), Error::EmptySample);
        assert!(histogram(&[1.0], &Bins::Edges(vec![1.0, 1.0])).is_err());
        let h = histogram(&[0.0, 0.5, 1.0, 2.0], &Bins::Edges(vec![0.0, 0.5, 1.0])).unwrap();
        assert_eq!(h.counts, vec![1, 2]);
    }

    #[test]
    fn median_and_quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]).unwrap(), 2.5);
        assert_eq!(quantile_sorted(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.25), 2.0);
        assert_eq!(quantile_sorted(&[7.0], 0.9), 7.0);
    }

    #[test]
    fn compensated_mean_survives_cancellation() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_mean(&v), 0.5);
    }
}
