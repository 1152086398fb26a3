//! Windowed DFT, periodogram, kernel-smoothed spectral density matrices and
//! the integrated spectral deviation `D̂(τ)` between adjacent windows.
//!
//! Indices passed to the public functions are 1-based and inclusive, and the
//! DFT phase uses the absolute time index of each observation. Periodogram
//! matrices are outer products, so they do not depend on that phase.
//!
//! Smoothing is a Riemann sum over the window's Fourier grid,
//! `f̂(ω) = (2π/N) Σ_j K_h(ω − ω_j) I(ω_j)`, with kernel arguments wrapped
//! to `(−π, π]`. [`deviation_profile`] uses a sliding DFT and only the
//! non-negative half of the grid (real input makes the rest conjugate);
//! [`deviation_stat`] computes the same quantity directly.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::MultivariateSeries;

/// Smoothing kernel on `[-1, 1]`, non-negative, symmetric, unit mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    #[default]
    Epanechnikov,
    Uniform,
    Triangular,
}

impl Kernel {
    pub fn eval(self, u: f64) -> f64 {
        if u.abs() > 1.0 {
            return 0.0;
        }
        match self {
            Kernel::Epanechnikov => 0.75 * (1.0 - u * u),
            Kernel::Uniform => 0.5,
            Kernel::Triangular => 1.0 - u.abs(),
        }
    }

    /// `K_h(x) = K(x / h) / h`.
    pub fn scaled(self, x: f64, h: f64) -> f64 {
        self.eval(x / h) / h
    }
}

impl std::str::FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "epanechnikov" => Ok(Kernel::Epanechnikov),
            "uniform" => Ok(Kernel::Uniform),
            "triangular" => Ok(Kernel::Triangular),
            other => Err(Error::Config(format!("unknown kernel '{other}'"))),
        }
    }
}

/// Kernel choice and bandwidth rule `h = c · N^(-1/5)` unless fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    pub kernel: Kernel,
    pub bandwidth_c: f64,
    /// Overrides the rate rule when set.
    pub bandwidth: Option<f64>,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            kernel: Kernel::Epanechnikov,
            bandwidth_c: 1.0,
            bandwidth: None,
        }
    }
}

impl SpectralConfig {
    pub fn with_bandwidth(kernel: Kernel, h: f64) -> Self {
        Self {
            kernel,
            bandwidth_c: 1.0,
            bandwidth: Some(h),
        }
    }

    pub fn bandwidth_for(&self, window: usize) -> Result<f64> {
        let h = self
            .bandwidth
            .unwrap_or_else(|| self.bandwidth_c * (window as f64).powf(-0.2));
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Config(format!("bandwidth must be positive, got {h}")));
        }
        Ok(h)
    }
}

/// Default half-window: `⌊T/6⌋` clamped to `[32, 256]`.
pub fn default_window(len: usize) -> usize {
    (len / 6).clamp(32, 256)
}

/// Signed Fourier indices `⌊−(N−1)/2⌋ ..= ⌊N/2⌋`, ascending.
pub fn fourier_indices(n: usize) -> impl Iterator<Item = i64> {
    let lo = -(((n as i64) - 1) / 2);
    let hi = (n as i64) / 2;
    lo..=hi
}

pub fn fourier_frequency(j: i64, n: usize) -> f64 {
    2.0 * PI * j as f64 / n as f64
}

/// Wraps an angle to `(−π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// Spectral matrices on a window's Fourier grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEstimate {
    pub frequencies: Vec<f64>,
    /// One row-major `L × L` matrix per frequency.
    pub matrices: Vec<Vec<Complex64>>,
    pub dim: usize,
    pub window_length: usize,
    /// `None` for the raw periodogram.
    pub bandwidth: Option<f64>,
}

impl SpectralEstimate {
    pub fn matrix(&self, idx: usize) -> &[Complex64] {
        &self.matrices[idx]
    }

    /// Index of the grid point `−ω_idx` (circularly), if on the grid.
    pub fn negated_index(&self, idx: usize) -> usize {
        let n = self.window_length as i64;
        let lo = -((n - 1) / 2);
        let j = idx as i64 + lo;
        let neg = (-j).rem_euclid(n);
        // map back into the symmetric range
        let neg = if neg > n / 2 { neg - n } else { neg };
        (neg - lo) as usize
    }
}

fn check_window(r: &MultivariateSeries, lo: usize, hi: usize) -> Result<usize> {
    if lo < 1 || hi > r.len() || lo > hi {
        return Err(Error::Window(format!(
            "window [{lo}, {hi}] outside series of length {}",
            r.len()
        )));
    }
    let n = hi - lo + 1;
    if n < 2 {
        return Err(Error::Window(format!("window [{lo}, {hi}] has fewer than 2 points")));
    }
    Ok(n)
}

/// `J(ω) = (2πN)^(−1/2) Σ_{s=lo}^{hi} r_s e^{−isω}` over 1-based rows.
pub fn dft_window(r: &MultivariateSeries, lo: usize, hi: usize, omega: f64) -> Result<Vec<Complex64>> {
    let n = check_window(r, lo, hi)?;
    Ok(dft_unchecked(r, lo, hi, n, omega))
}

fn dft_unchecked(r: &MultivariateSeries, lo: usize, hi: usize, n: usize, omega: f64) -> Vec<Complex64> {
    let l = r.dim();
    let mut out = vec![Complex64::new(0.0, 0.0); l];
    for s in lo..=hi {
        let phase = Complex64::from_polar(1.0, -(s as f64) * omega);
        for (o, &v) in out.iter_mut().zip(r.row(s - 1)) {
            *o += phase * v;
        }
    }
    let norm = 1.0 / (2.0 * PI * n as f64).sqrt();
    out.iter_mut().for_each(|o| *o *= norm);
    out
}

fn outer(j: &[Complex64]) -> Vec<Complex64> {
    let l = j.len();
    let mut m = vec![Complex64::new(0.0, 0.0); l * l];
    for a in 0..l {
        for b in 0..l {
            m[a * l + b] = j[a] * j[b].conj();
        }
    }
    m
}

/// Raw periodogram `I(ω_j) = J(ω_j) J(ω_j)*` on the window's Fourier grid.
pub fn periodogram(r: &MultivariateSeries, lo: usize, hi: usize) -> Result<SpectralEstimate> {
    let n = check_window(r, lo, hi)?;
    let mut frequencies = Vec::with_capacity(n);
    let mut matrices = Vec::with_capacity(n);
    for j in fourier_indices(n) {
        let w = fourier_frequency(j, n);
        frequencies.push(w);
        matrices.push(outer(&dft_unchecked(r, lo, hi, n, w)));
    }
    Ok(SpectralEstimate {
        frequencies,
        matrices,
        dim: r.dim(),
        window_length: n,
        bandwidth: None,
    })
}

/// Kernel-smoothed spectral density matrix at the window's Fourier grid.
pub fn smoothed_spectral_density(
    r: &MultivariateSeries,
    lo: usize,
    hi: usize,
    kernel: Kernel,
    h: f64,
) -> Result<SpectralEstimate> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Config(format!("bandwidth must be positive, got {h}")));
    }
    let raw = periodogram(r, lo, hi)?;
    let n = raw.window_length;
    let l2 = raw.dim * raw.dim;
    let step = 2.0 * PI / n as f64;
    let mut matrices = Vec::with_capacity(n);
    for &w in &raw.frequencies {
        let mut acc = vec![Complex64::new(0.0, 0.0); l2];
        for (wj, ij) in raw.frequencies.iter().zip(&raw.matrices) {
            let k = step * kernel.scaled(wrap_angle(w - wj), h);
            if k == 0.0 {
                continue;
            }
            for (a, b) in acc.iter_mut().zip(ij) {
                *a += b * k;
            }
        }
        matrices.push(acc);
    }
    Ok(SpectralEstimate {
        frequencies: raw.frequencies,
        matrices,
        dim: raw.dim,
        window_length: n,
        bandwidth: Some(h),
    })
}

fn check_tau(len: usize, tau: usize, window: usize) -> Result<()> {
    if window < 2 {
        return Err(Error::Window(format!("window {window} must be at least 2")));
    }
    if tau < window || tau + window > len {
        return Err(Error::Window(format!(
            "tau {tau} outside [{window}, {}]",
            len as i64 - window as i64
        )));
    }
    Ok(())
}

/// `D̂(τ)` from windows `(τ−N, τ]` and `(τ, τ+N]`, computed directly.
pub fn deviation_stat(r: &MultivariateSeries, tau: usize, window: usize, cfg: &SpectralConfig) -> Result<f64> {
    check_tau(r.len(), tau, window)?;
    let h = cfg.bandwidth_for(window)?;
    let left = smoothed_spectral_density(r, tau - window + 1, tau, cfg.kernel, h)?;
    let right = smoothed_spectral_density(r, tau + 1, tau + window, cfg.kernel, h)?;
    Ok(integrated_distance(&left, &right))
}

/// `(1/2π)·(2π/N)·Σ_j ‖vec(f_L(ω_j) − f_R(ω_j))‖²`.
pub fn integrated_distance(left: &SpectralEstimate, right: &SpectralEstimate) -> f64 {
    let n = left.window_length;
    let sum: f64 = left
        .matrices
        .iter()
        .zip(&right.matrices)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>())
        .sum();
    sum / n as f64
}

/// `D̂(τ)` for every candidate `τ ∈ [N, T−N]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationProfile {
    pub tau_values: Vec<usize>,
    pub d_hat: Vec<f64>,
    pub window: usize,
}

impl DeviationProfile {
    pub fn max(&self) -> f64 {
        self.d_hat.iter().copied().fold(0.0, f64::max)
    }

    /// τ with the largest statistic (first one on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.d_hat.iter().enumerate() {
            if v > self.d_hat[best] {
                best = i;
            }
        }
        self.tau_values[best]
    }

    pub fn value_at(&self, tau: usize) -> Option<f64> {
        tau.checked_sub(self.window).and_then(|i| self.d_hat.get(i).copied())
    }
}

pub fn deviation_profile(r: &MultivariateSeries, window: usize, cfg: &SpectralConfig) -> Result<DeviationProfile> {
    let engine = ProfileEngine::new(window, r.dim(), cfg)?;
    engine.profile(r)
}

/// Precomputed twiddles and kernel taps for repeated profile evaluation on
/// series with a fixed window length and dimension.
#[derive(Debug, Clone)]
pub struct ProfileEngine {
    window: usize,
    dim: usize,
    half: usize,
    twiddle: Vec<Complex64>,
    /// (circular offset, weight) pairs with non-zero weight
    taps: Vec<(i64, f64)>,
    /// multiplicity of each half-grid frequency in the full grid
    grid_weight: Vec<f64>,
    /// upper-triangle (a, b) pairs with a ≤ b
    pairs: Vec<(usize, usize)>,
    norm: f64,
}

impl ProfileEngine {
    pub fn new(window: usize, dim: usize, cfg: &SpectralConfig) -> Result<Self> {
        if window < 2 {
            return Err(Error::Window(format!("window {window} must be at least 2")));
        }
        let h = cfg.bandwidth_for(window)?;
        let n = window;
        let half = n / 2;
        let step = 2.0 * PI / n as f64;
        let twiddle = (0..n)
            .map(|m| Complex64::from_polar(1.0, -step * m as f64))
            .collect();
        let taps = fourier_indices(n)
            .filter_map(|m| {
                let w = step * cfg.kernel.scaled(wrap_angle(step * m as f64), h);
                (w != 0.0).then_some((m, w))
            })
            .collect();
        let grid_weight = (0..=half)
            .map(|k| if k == 0 || (n % 2 == 0 && k == half) { 1.0 } else { 2.0 })
            .collect();
        let pairs = (0..dim).flat_map(|a| (a..dim).map(move |b| (a, b))).collect();
        Ok(Self {
            window,
            dim,
            half,
            twiddle,
            taps,
            grid_weight,
            pairs,
            norm: 1.0 / (2.0 * PI * n as f64).sqrt(),
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    fn direct_dft(&self, r: &MultivariateSeries, end: usize, out: &mut [Complex64]) {
        let (n, l) = (self.window, self.dim);
        out.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for s in end + 1 - n..=end {
            let row = r.row(s - 1);
            let sm = s % n;
            for k in 0..=self.half {
                let tw = self.twiddle[(sm * k) % n];
                for (a, &v) in row.iter().enumerate() {
                    out[k * l + a] += tw * v;
                }
            }
        }
        out.iter_mut().for_each(|v| *v *= self.norm);
    }

    fn slide_dft(&self, r: &MultivariateSeries, new_end: usize, out: &mut [Complex64]) {
        let (n, l) = (self.window, self.dim);
        let incoming = r.row(new_end - 1);
        let outgoing = r.row(new_end - n - 1);
        let sm = new_end % n;
        for k in 0..=self.half {
            let tw = self.twiddle[(sm * k) % n] * self.norm;
            for a in 0..l {
                out[k * l + a] += tw * (incoming[a] - outgoing[a]);
            }
        }
    }

    /// Smoothed upper-triangle spectra of the window ending at the DFT in `dft`.
    fn smooth(&self, dft: &[Complex64], pgram: &mut [Complex64], out: &mut [Complex64]) {
        let (n, l) = (self.window, self.dim);
        let u = self.pairs.len();
        for k in 0..=self.half {
            for (p, &(a, b)) in self.pairs.iter().enumerate() {
                pgram[k * u + p] = dft[k * l + a] * dft[k * l + b].conj();
            }
        }
        out.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for k in 0..=self.half {
            let dst = &mut out[k * u..(k + 1) * u];
            for &(m, w) in &self.taps {
                let idx = (k as i64 + m).rem_euclid(n as i64) as usize;
                if idx <= self.half {
                    let src = &pgram[idx * u..(idx + 1) * u];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += s * w;
                    }
                } else {
                    let src = &pgram[(n - idx) * u..(n - idx + 1) * u];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += s.conj() * w;
                    }
                }
            }
        }
    }

    fn distance(&self, left: &[Complex64], right: &[Complex64]) -> f64 {
        let u = self.pairs.len();
        let mut total = 0.0;
        for k in 0..=self.half {
            let mut acc = 0.0;
            for (p, &(a, b)) in self.pairs.iter().enumerate() {
                let d = (left[k * u + p] - right[k * u + p]).norm_sqr();
                acc += if a == b { d } else { 2.0 * d };
            }
            total += self.grid_weight[k] * acc;
        }
        total / self.window as f64
    }

    /// Full deviation profile for `r`.
    pub fn profile(&self, r: &MultivariateSeries) -> Result<DeviationProfile> {
        let mut d_hat = Vec::new();
        self.for_each_stat(r, |v| d_hat.push(v))?;
        let n = self.window;
        Ok(DeviationProfile {
            tau_values: (n..=r.len() - n).collect(),
            d_hat,
            window: n,
        })
    }

    /// `max_τ D̂(τ)` without materialising the profile.
    pub fn max_stat(&self, r: &MultivariateSeries) -> Result<f64> {
        let mut best = 0.0f64;
        self.for_each_stat(r, |v| best = best.max(v))?;
        Ok(best)
    }

    fn for_each_stat(&self, r: &MultivariateSeries, mut sink: impl FnMut(f64)) -> Result<()> {
        let n = self.window;
        if r.dim() != self.dim {
            return Err(Error::Window(format!(
                "engine built for dimension {}, series has {}",
                self.dim,
                r.dim()
            )));
        }
        if r.len() < 2 * n + 1 {
            return Err(Error::Window(format!(
                "series of length {} too short for window {n} (needs {})",
                r.len(),
                2 * n + 1
            )));
        }
        let block = (self.half + 1) * self.pairs.len();
        let mut dft = vec![Complex64::new(0.0, 0.0); (self.half + 1) * self.dim];
        let mut pgram = vec![Complex64::new(0.0, 0.0); block];
        // ring of smoothed spectra for window ends e .. e+N
        let mut ring = vec![Complex64::new(0.0, 0.0); block * (n + 1)];
        for end in n..=r.len() {
            // periodic exact restart bounds the drift of the sliding update
            if end == n || (end - n) % n == 0 {
                self.direct_dft(r, end, &mut dft);
            } else {
                self.slide_dft(r, end, &mut dft);
            }
            let slot = (end - n) % (n + 1);
            let (head, tail) = ring.split_at_mut(slot * block);
            let dst = &mut tail[..block];
            self.smooth(&dft, &mut pgram, dst);
            if end >= 2 * n {
                // window ending at tau = end - N is N+1 slots back (== next slot)
                let left_slot = (end - 2 * n) % (n + 1);
                let left = if left_slot < slot {
                    &head[left_slot * block..(left_slot + 1) * block]
                } else {
                    &tail[(left_slot - slot) * block..(left_slot - slot + 1) * block]
                };
                let right = &tail[..block];
                sink(self.distance(left, right));
            }
        }
        Ok(())
    }
}
