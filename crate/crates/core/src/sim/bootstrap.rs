//! Block resampling: moving-block bootstrap for simulation, stationary
//! bootstrap for null calibration, and the automatic block-length rule.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::series::MultivariateSeries;
use crate::stats::autocovariance;

/// Flat-top lag window.
fn flat_top(x: f64) -> f64 {
    let a = x.abs();
    if a <= 0.5 {
        1.0
    } else if a <= 1.0 {
        2.0 * (1.0 - a)
    } else {
        0.0
    }
}

/// Automatic block length for one component, moving/circular block variant.
///
/// Picks the bandwidth `M` from the first run of `K_N` insignificant
/// autocorrelations, estimates `G = Σ λ(k/M)|k|R(k)` and the long-run
/// variance with a flat-top window, then returns
/// `(2G² / D)^(1/3) n^(1/3)` with `D = (4/3)·σ_lr⁴`, capped at
/// `min(3√n, n/3)`.
pub fn univariate_block_length(x: &[f64]) -> f64 {
    let n = x.len();
    let nf = n as f64;
    let b_max = (3.0 * nf.sqrt()).min(nf / 3.0).ceil();
    let kn = 5usize.max(nf.log10() as usize);
    let m_max = (nf.sqrt().ceil() as usize + kn).min(n - 1);
    let cv = 2.0 * (nf.log10() / nf).sqrt();

    let acv: Vec<f64> = (0..=m_max).map(|k| autocovariance(x, k)).collect();
    if acv[0] <= 0.0 {
        return 1.0;
    }
    let rho: Vec<f64> = acv.iter().map(|c| (c / acv[0]).abs()).collect();

    // smallest m with |ρ(m+1)| … |ρ(m+K_N)| all insignificant
    let mut m_hat = None;
    for m in 0..=m_max.saturating_sub(kn) {
        if (1..=kn).all(|k| rho[m + k] < cv) {
            m_hat = Some(m);
            break;
        }
    }
    let big_m = match m_hat {
        Some(m) => (2 * m.max(1)).min(m_max),
        None => m_max,
    };

    let mut g = 0.0;
    let mut lr = acv[0];
    for k in 1..=big_m {
        let lam = flat_top(k as f64 / big_m as f64);
        g += 2.0 * lam * k as f64 * acv[k];
        lr += 2.0 * lam * acv[k];
    }
    let d = 4.0 / 3.0 * lr * lr;
    if d <= 0.0 || !d.is_finite() {
        return 1.0;
    }
    let b = (2.0 * g * g / d).cbrt() * nf.cbrt();
    b.min(b_max)
}

/// Average of the per-component automatic block lengths, rounded half-up
/// and clamped to `[1, n/3]`.
pub fn block_length(seg: &MultivariateSeries) -> Result<usize> {
    let n = seg.len();
    if n < 20 {
        return Err(Error::InsufficientData(format!(
            "block length selection needs at least 20 rows, got {n}"
        )));
    }
    let avg = (0..seg.dim())
        .map(|j| univariate_block_length(&seg.column(j)))
        .sum::<f64>()
        / seg.dim() as f64;
    let b = (avg + 0.5).floor() as usize;
    Ok(b.clamp(1, (n / 3).max(1)))
}

/// Moving-block resampler over a fixed source segment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapSampler {
    #[serde(skip)]
    source: MultivariateSeries,
    block_length: usize,
}

impl BootstrapSampler {
    pub fn new(source: MultivariateSeries, block_length: usize) -> Result<Self> {
        if block_length == 0 || block_length > source.len() {
            return Err(Error::Config(format!(
                "block length {block_length} outside [1, {}]",
                source.len()
            )));
        }
        Ok(Self { source, block_length })
    }

    /// Sampler with the automatic block length.
    pub fn automatic(source: MultivariateSeries) -> Result<Self> {
        let b = block_length(&source)?;
        Self::new(source, b)
    }

    pub fn block_length(&self) -> usize {
        self.block_length
    }

    pub fn source(&self) -> &MultivariateSeries {
        &self.source
    }
}

/// Concatenates whole-row blocks of length `b` with uniform start indices,
/// truncated to `length` rows.
pub fn block_bootstrap(sampler: &BootstrapSampler, length: usize, seed: u64) -> MultivariateSeries {
    let mut rng = rng_from_seed(seed);
    let src = &sampler.source;
    let (n, l, b) = (src.len(), src.dim(), sampler.block_length);
    let mut values = Vec::with_capacity(length * l);
    let mut filled = 0;
    while filled < length {
        let start = rng.random_range(0..=n - b);
        let take = b.min(length - filled);
        values.extend_from_slice(&src.values()[start * l..(start + take) * l]);
        filled += take;
    }
    MultivariateSeries::from_parts_unchecked(length, l, values, src.names().to_vec())
}

/// Stationary bootstrap with geometric block lengths of mean
/// `expected_block`, wrapping circularly.
pub fn stationary_bootstrap<R: Rng>(
    src: &MultivariateSeries,
    expected_block: f64,
    length: usize,
    rng: &mut R,
) -> MultivariateSeries {
    let (n, l) = (src.len(), src.dim());
    let p = 1.0 / expected_block.max(1.0);
    let mut values = Vec::with_capacity(length * l);
    let mut idx = rng.random_range(0..n);
    for t in 0..length {
        if t > 0 {
            if rng.random::<f64>() < p {
                idx = rng.random_range(0..n);
            } else {
                idx = (idx + 1) % n;
            }
        }
        values.extend_from_slice(src.row(idx));
    }
    MultivariateSeries::from_parts_unchecked(length, l, values, src.names().to_vec())
}
