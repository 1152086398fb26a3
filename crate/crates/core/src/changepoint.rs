//! Sequential covariance change point detection on a residual series.
//!
//! Candidates are ranked by the deviation profile `D̂(τ)`. The largest
//! remaining value is accepted while it exceeds a single bootstrap threshold:
//! the `(1 − α)` quantile of `max_τ D̂(τ)` over stationary-bootstrap
//! resamples of the whole series. Each acceptance masks `[τ − N, τ + N]`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng;
use crate::series::MultivariateSeries;
use crate::sim::bootstrap::{block_length, stationary_bootstrap};
use crate::spectral::{default_window, DeviationProfile, ProfileEngine, SpectralConfig};
use crate::stats::quantile_sorted;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct DetectorConfig {
    pub alpha: f64,
    /// Half-window `N`; defaults to `⌊T/6⌋` clamped to `[32, 256]`.
    pub window: Option<usize>,
    pub spectral: SpectralConfig,
    pub n_boot: usize,
    pub seed: u64,
    /// Exclusion radius after an acceptance; defaults to `N`.
    pub min_separation: Option<usize>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            window: None,
            spectral: SpectralConfig::default(),
            n_boot: 199,
            seed: 0,
            min_separation: None,
        }
    }
}

impl DetectorConfig {
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = Some(window);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn resolved_window(&self, len: usize) -> usize {
        self.window.unwrap_or_else(|| default_window(len))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChangePointResult {
    /// Accepted `τ` values, ascending. Segment `k` is `(τ_k, τ_{k+1}]`.
    pub change_points: Vec<usize>,
    pub alpha: f64,
    pub window: usize,
    /// `D̂` at each accepted point, aligned with `change_points`.
    pub statistics: Vec<f64>,
    pub threshold: f64,
    pub seed: u64,
    #[serde(skip)]
    pub profile: DeviationProfile,
    /// Bootstrap maxima, ascending.
    #[serde(skip)]
    pub null_maxima: Vec<f64>,
}

impl ChangePointResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn check_inputs(r: &MultivariateSeries, alpha: f64, window: usize) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha {alpha} not in (0, 1)")));
    }
    if window < 2 || r.len() < 2 * window + 1 {
        return Err(Error::Window(format!(
            "series of length {} too short for window {window} (needs {})",
            r.len(),
            2 * window + 1
        )));
    }
    Ok(())
}

/// Sorted bootstrap maxima of `D̂` under the stationary null.
///
/// Replicate `i` draws from its own stream derived from `(seed, i)`, so the
/// result does not depend on the number of worker threads.
pub fn null_distribution(
    r: &MultivariateSeries,
    window: usize,
    spectral: &SpectralConfig,
    n_boot: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_boot < 100 {
        return Err(Error::Config(format!("n_boot {n_boot} below 100")));
    }
    if window < 2 || r.len() < 2 * window + 1 {
        return Err(Error::Window(format!(
            "series of length {} too short for window {window}",
            r.len()
        )));
    }
    let engine = ProfileEngine::new(window, r.dim(), spectral)?;
    let expected_block = block_length(r).unwrap_or(1) as f64;
    let mut maxima = (0..n_boot as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::child_rng(seed, i);
            let resample = stationary_bootstrap(r, expected_block, r.len(), &mut rng);
            engine.max_stat(&resample)
        })
        .collect::<Result<Vec<f64>>>()?;
    maxima.sort_by(f64::total_cmp);
    Ok(maxima)
}

/// Empirical `(1 − α)` quantile of the bootstrap maxima.
pub fn null_threshold(
    r: &MultivariateSeries,
    alpha: f64,
    window: usize,
    spectral: &SpectralConfig,
    n_boot: usize,
    seed: u64,
) -> Result<f64> {
    check_inputs(r, alpha, window)?;
    let maxima = null_distribution(r, window, spectral, n_boot, seed)?;
    Ok(quantile_sorted(&maxima, 1.0 - alpha))
}

/// Greedy acceptance over a profile: take the largest unmasked value while
/// it exceeds `threshold`, masking `separation` on either side.
pub fn sequential_select(profile: &DeviationProfile, threshold: f64, separation: usize) -> (Vec<usize>, Vec<f64>) {
    let mut masked = vec![false; profile.d_hat.len()];
    let mut accepted: Vec<(usize, f64)> = Vec::new();
    loop {
        let mut best: Option<usize> = None;
        for (i, &v) in profile.d_hat.iter().enumerate() {
            if !masked[i] && best.is_none_or(|b| v > profile.d_hat[b]) {
                best = Some(i);
            }
        }
        let Some(i) = best else { break };
        let value = profile.d_hat[i];
        if value <= threshold {
            break;
        }
        let tau = profile.tau_values[i];
        accepted.push((tau, value));
        let lo = i.saturating_sub(separation);
        let hi = (i + separation).min(masked.len() - 1);
        masked[lo..=hi].iter_mut().for_each(|m| *m = true);
    }
    accepted.sort_by_key(|&(t, _)| t);
    accepted.into_iter().unzip()
}

/// `r` should have zero mean (a residual); a constant level interacts with
/// each window's sample-mean fluctuation at low frequencies and dominates `D̂`.
pub fn detect_changepoints(r: &MultivariateSeries, cfg: &DetectorConfig) -> Result<ChangePointResult> {
    let window = cfg.resolved_window(r.len());
    check_inputs(r, cfg.alpha, window)?;
    let engine = ProfileEngine::new(window, r.dim(), &cfg.spectral)?;
    let profile = engine.profile(r)?;
    let null_maxima = null_distribution(r, window, &cfg.spectral, cfg.n_boot, cfg.seed)?;
    let threshold = quantile_sorted(&null_maxima, 1.0 - cfg.alpha);
    let separation = cfg.min_separation.unwrap_or(window);
    let (change_points, statistics) = sequential_select(&profile, threshold, separation);
    Ok(ChangePointResult {
        change_points,
        alpha: cfg.alpha,
        window,
        statistics,
        threshold,
        seed: cfg.seed,
        profile,
        null_maxima,
    })
}

/// A stationary stretch `(lo, hi]` of the series (0-based bounds, so rows
/// `lo..hi` in slice terms).
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub lo: usize,
    pub hi: usize,
    pub data: MultivariateSeries,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi == self.lo
    }
}

/// Splits `r` at `change_points` into `M + 1` segments tiling `(0, T]`.
pub fn segment_at(r: &MultivariateSeries, change_points: &[usize]) -> Result<Vec<Segment>> {
    let mut bounds = Vec::with_capacity(change_points.len() + 2);
    bounds.push(0);
    for &c in change_points {
        if c == 0 || c >= r.len() || c <= *bounds.last().unwrap() {
            return Err(Error::Config(format!(
                "change points must be strictly increasing inside (0, {}); got {change_points:?}",
                r.len()
            )));
        }
        bounds.push(c);
    }
    bounds.push(r.len());
    Ok(bounds
        .windows(2)
        .map(|w| Segment {
            lo: w[0],
            hi: w[1],
            data: r.slice_rows(w[0], w[1]),
        })
        .collect())
}

pub fn segment(r: &MultivariateSeries, cps: &ChangePointResult) -> Result<Vec<Segment>> {
    segment_at(r, &cps.change_points)
}
