//! Trend/seasonal/residual decomposition `w = x + s + r`.
//!
//! The trend is a per-component Loess smooth (tricube-weighted local
//! polynomial regression on the time index). The seasonal term, when a
//! period is supplied, is the centered phase-wise mean of the detrended
//! series. The residual is whatever is left after subtraction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::MultivariateSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoessConfig {
    /// Fraction of the series used in each local window, in `(0, 1]`.
    pub span: f64,
    /// Local polynomial degree, 1 or 2.
    pub degree: usize,
    pub robustness_iters: usize,
}

impl Default for LoessConfig {
    fn default() -> Self {
        Self {
            span: 0.25,
            degree: 2,
            robustness_iters: 0,
        }
    }
}

impl LoessConfig {
    pub fn validate(&self, len: usize) -> Result<()> {
        if !(self.span > 0.0 && self.span <= 1.0) {
            return Err(Error::Config(format!("loess span {} not in (0, 1]", self.span)));
        }
        if !(1..=2).contains(&self.degree) {
            return Err(Error::Config(format!("loess degree {} not in {{1, 2}}", self.degree)));
        }
        if self.span * (len as f64) < (self.degree + 2) as f64 {
            return Err(Error::Config(format!(
                "loess window {:.2} points is smaller than degree + 2 = {}",
                self.span * len as f64,
                self.degree + 2
            )));
        }
        Ok(())
    }

    fn window_points(&self, len: usize) -> usize {
        ((self.span * len as f64).floor() as usize).clamp(self.degree + 2, len)
    }
}

fn tricube(u: f64) -> f64 {
    let a = u.abs();
    if a >= 1.0 {
        0.0
    } else {
        let c = 1.0 - a * a * a;
        c * c * c
    }
}

fn bisquare(u: f64) -> f64 {
    let a = u.abs();
    if a >= 1.0 {
        0.0
    } else {
        let c = 1.0 - a * a;
        c * c
    }
}

/// Solves a small symmetric system by Gaussian elimination with partial
/// pivoting. Returns `None` when singular.
fn solve_small(mut a: [[f64; 3]; 3], mut b: [f64; 3], n: usize) -> Option<[f64; 3]> {
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

/// One Loess pass over a univariate series with optional robustness weights.
fn loess_pass(y: &[f64], cfg: &LoessConfig, robust: Option<&[f64]>) -> Vec<f64> {
    let n = y.len();
    let q = cfg.window_points(n);
    let p = cfg.degree + 1;
    let mut out = vec![0.0; n];
    for (i, fit) in out.iter_mut().enumerate() {
        // q nearest neighbours of i; windows are truncated at the ends
        let lo = i.saturating_sub((q - 1) / 2).min(n - q);
        let hi = lo + q;
        let h = (i - lo).max(hi - 1 - i) as f64;
        let h = if h > 0.0 { h } else { 1.0 };

        let mut ata = [[0.0; 3]; 3];
        let mut atb = [0.0; 3];
        for k in lo..hi {
            let u = (k as f64 - i as f64) / h;
            let mut w = tricube(u);
            if let Some(r) = robust {
                w *= r[k];
            }
            if w == 0.0 {
                continue;
            }
            let basis = [1.0, u, u * u];
            for a in 0..p {
                atb[a] += w * basis[a] * y[k];
                for b in 0..p {
                    ata[a][b] += w * basis[a] * basis[b];
                }
            }
        }
        *fit = match solve_small(ata, atb, p) {
            Some(c) => c[0],
            // all weight collapsed (robustness zeroed the window): fall back to local degree 0
            None => {
                let (mut sw, mut swy) = (0.0, 0.0);
                for k in lo..hi {
                    let w = tricube((k as f64 - i as f64) / h).max(1e-12);
                    sw += w;
                    swy += w * y[k];
                }
                swy / sw
            }
        };
    }
    out
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Loess smooth of a single component.
pub fn loess_smooth(y: &[f64], cfg: &LoessConfig) -> Result<Vec<f64>> {
    cfg.validate(y.len())?;
    let mut fit = loess_pass(y, cfg, None);
    for _ in 0..cfg.robustness_iters {
        let abs_res: Vec<f64> = y.iter().zip(&fit).map(|(a, b)| (a - b).abs()).collect();
        let s = median(abs_res.clone());
        if s <= 0.0 {
            break;
        }
        let weights: Vec<f64> = abs_res.iter().map(|e| bisquare(e / (6.0 * s))).collect();
        fit = loess_pass(y, cfg, Some(&weights));
    }
    Ok(fit)
}

/// Per-component Loess trend.
pub fn loess_trend(s: &MultivariateSeries, cfg: &LoessConfig) -> Result<MultivariateSeries> {
    cfg.validate(s.len())?;
    let cols: Vec<Vec<f64>> = (0..s.dim())
        .into_par_iter()
        .map(|j| loess_smooth(&s.column(j), cfg))
        .collect::<Result<_>>()?;
    let out = MultivariateSeries::from_columns(&cols)?;
    Ok(out.with_names(s.names().to_vec())?.with_start_index(s.start_index()))
}

/// Phase-wise means with period `period`, centered to sum to zero over one
/// period and tiled to the input length.
pub fn seasonal_periodic_mean(s: &MultivariateSeries, period: usize) -> Result<MultivariateSeries> {
    if period <= 1 {
        return Err(Error::Config(format!("seasonal period {period} must be at least 2")));
    }
    if s.len() < period {
        return Err(Error::Config(format!(
            "series length {} shorter than seasonal period {period}",
            s.len()
        )));
    }
    if s.len() < 2 * period {
        log::warn!("series covers fewer than two seasonal periods; phase means are noisy");
    }
    let l = s.dim();
    let mut sums = vec![0.0; period * l];
    let mut counts = vec![0usize; period];
    for (t, row) in s.rows().enumerate() {
        let ph = t % period;
        counts[ph] += 1;
        for (j, v) in row.iter().enumerate() {
            sums[ph * l + j] += v;
        }
    }
    let mut phase_means = vec![0.0; period * l];
    for ph in 0..period {
        for j in 0..l {
            phase_means[ph * l + j] = sums[ph * l + j] / counts[ph] as f64;
        }
    }
    for j in 0..l {
        let centre = (0..period).map(|ph| phase_means[ph * l + j]).sum::<f64>() / period as f64;
        for ph in 0..period {
            phase_means[ph * l + j] -= centre;
        }
    }
    let values: Vec<f64> = (0..s.len())
        .flat_map(|t| {
            let ph = t % period;
            phase_means[ph * l..(ph + 1) * l].to_vec()
        })
        .collect();
    let out = MultivariateSeries::new(s.len(), l, values, Some(s.names().to_vec()))?;
    Ok(out.with_start_index(s.start_index()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub trend: MultivariateSeries,
    pub seasonal: MultivariateSeries,
    pub residual: MultivariateSeries,
    pub period: Option<usize>,
}

impl Decomposition {
    /// `trend + seasonal + residual`.
    pub fn reconstruct(&self) -> MultivariateSeries {
        self.trend
            .zip_with(&self.seasonal, |a, b| a + b)
            .zip_with(&self.residual, |a, b| a + b)
    }

    /// Adds trend and seasonal terms to a simulated residual of the same shape.
    pub fn recompose(&self, residual: &MultivariateSeries) -> MultivariateSeries {
        self.trend
            .zip_with(&self.seasonal, |a, b| a + b)
            .zip_with(residual, |a, b| a + b)
    }
}

pub fn decompose(s: &MultivariateSeries, cfg: &LoessConfig, period: Option<usize>) -> Result<Decomposition> {
    let trend = loess_trend(s, cfg)?;
    let detrended = s.zip_with(&trend, |w, x| w - x);
    let seasonal = match period {
        Some(p) => seasonal_periodic_mean(&detrended, p)?,
        None => MultivariateSeries::zeros_like(s),
    };
    let residual = detrended.zip_with(&seasonal, |d, x| d - x);
    Ok(Decomposition {
        trend,
        seasonal,
        residual,
        period,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    fn uni(x: Vec<f64>) -> MultivariateSeries {
        MultivariateSeries::univariate(&x).unwrap()
    }

    /// Independent weighted least-squares oracle: full normal equations in
    /// the raw time coordinate solved with nalgebra's LU.
    fn wls_oracle(y: &[f64], i: usize, lo: usize, hi: usize, h: f64, degree: usize) -> f64 {
        let rows = hi - lo;
        let p = degree + 1;
        let mut xm = nalgebra::DMatrix::zeros(rows, p);
        let mut w = nalgebra::DVector::zeros(rows);
        let mut yv = nalgebra::DVector::zeros(rows);
        for (r, k) in (lo..hi).enumerate() {
            for d in 0..p {
                xm[(r, d)] = (k as f64).powi(d as i32);
            }
            w[r] = tricube((k as f64 - i as f64) / h);
            yv[r] = y[k];
        }
        let wx = nalgebra::DMatrix::from_fn(rows, p, |r, c| w[r] * xm[(r, c)]);
        let beta = (xm.transpose() * &wx).lu().solve(&(wx.transpose() * yv)).unwrap();
        (0..p).map(|d| beta[d] * (i as f64).powi(d as i32)).sum()
    }

    #[test]
    fn constant_trend() {
        let t = loess_trend(&uni(vec![3.5; 50]), &LoessConfig::default()).unwrap();
        for v in t.values() {
            assert!((v - 3.5).abs() < 1e-12);
        }
    }

    #[test]
    fn reproduces_line_and_quadratic() {
        let line: Vec<f64> = (1..=120).map(|t| 2.0 * t as f64 + 1.0).collect();
        for span in [0.1, 0.25, 0.6, 1.0] {
            let cfg = LoessConfig { span, degree: 1, robustness_iters: 0 };
            let fit = loess_smooth(&line, &cfg).unwrap();
            for (a, b) in fit.iter().zip(&line) {
                assert!((a - b).abs() < 1e-8, "span {span}: {a} vs {b}");
            }
        }
        let quad: Vec<f64> = (1..=120).map(|t| 0.01 * (t * t) as f64 - 0.7 * t as f64 + 3.0).collect();
        let fit = loess_smooth(&quad, &LoessConfig::default()).unwrap();
        for (a, b) in fit.iter().zip(&quad) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn matches_weighted_least_squares_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let y: Vec<f64> = (0..80).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let cfg = LoessConfig { span: 0.3, degree: 2, robustness_iters: 0 };
        let fit = loess_smooth(&y, &cfg).unwrap();
        let q = 24;
        for i in [0usize, 5, 40, 79] {
            let lo = i.saturating_sub((q - 1) / 2).min(80 - q);
            let h = (i - lo).max(lo + q - 1 - i) as f64;
            let oracle = wls_oracle(&y, i, lo, lo + q, h, 2);
            assert!((fit[i] - oracle).abs() < 1e-8, "{i}: {} vs {oracle}", fit[i]);
        }
    }

    #[test]
    fn robustness_downweights_outlier() {
        let mut y: Vec<f64> = (0..60).map(|t| (t as f64 / 10.0).sin()).collect();
        y[30] += 50.0;
        let plain = loess_smooth(&y, &LoessConfig { span: 0.3, degree: 2, robustness_iters: 0 }).unwrap();
        let robust = loess_smooth(&y, &LoessConfig { span: 0.3, degree: 2, robustness_iters: 3 }).unwrap();
        let truth = (3.0f64).sin();
        assert!((robust[30] - truth).abs() < (plain[30] - truth).abs());
        assert!((robust[30] - truth).abs() < 0.1);
    }

    #[test]
    fn window_too_small() {
        let cfg = LoessConfig { span: 0.05, degree: 2, robustness_iters: 0 };
        assert!(matches!(loess_trend(&uni(vec![1.0; 40]), &cfg), Err(Error::Config(_))));
        let cfg = LoessConfig { span: 0.5, degree: 3, robustness_iters: 0 };
        assert!(matches!(loess_trend(&uni(vec![1.0; 40]), &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn seasonal_zero_and_errors() {
        let s = seasonal_periodic_mean(&uni(vec![0.0; 48]), 12).unwrap();
        assert!(s.values().iter().all(|&v| v == 0.0));
        assert!(matches!(seasonal_periodic_mean(&uni(vec![0.0; 48]), 1), Err(Error::Config(_))));
    }

    #[test]
    fn seasonal_recovers_sinusoid() {
        let x: Vec<f64> = (0..240).map(|t| (2.0 * std::f64::consts::PI * t as f64 / 12.0).sin()).collect();
        let s = seasonal_periodic_mean(&uni(x.clone()), 12).unwrap();
        // phase-group means oracle: each phase holds identical values
        for t in 0..240 {
            assert!((s.values()[t] - x[t]).abs() < 1e-8);
        }
        let period_sum: f64 = s.values()[..12].iter().sum();
        assert!(period_sum.abs() < 1e-9 * 12.0);
    }

    #[test]
    fn seasonal_of_white_noise_is_small() {
        let (p, t, reps) = (12usize, 2400usize, 20);
        let bound = 4.0 / ((t / p) as f64).sqrt();
        for seed in 0..reps {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..t).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let s = seasonal_periodic_mean(&uni(x), p).unwrap();
            let amp = s.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(amp <= bound, "seed {seed}: amplitude {amp} > {bound}");
        }
    }

    #[test]
    fn no_period_means_zero_seasonal() {
        let w = uni((0..100).map(|t| (t as f64 * 0.3).cos() + t as f64 * 0.01).collect());
        let d = decompose(&w, &LoessConfig::default(), None).unwrap();
        assert!(d.seasonal.values().iter().all(|&v| v == 0.0));
        for t in 0..100 {
            assert_eq!(d.residual.values()[t], w.values()[t] - d.trend.values()[t]);
        }
    }

    #[test]
    fn day_of_five_minute_data_without_seasonal() {
        let w = uni((0..288).map(|t| 8.0 + 2.0 * (t as f64 / 288.0 * 6.0).sin()).collect());
        let d = decompose(&w, &LoessConfig::default(), None).unwrap();
        assert_eq!(d.period, None);
        assert_eq!(d.residual.len(), 288);
        assert!(d.seasonal.values().iter().all(|&v| v == 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn reconstruction_is_exact(xs in prop::collection::vec(-100.0f64..100.0, 48..120), period in prop::option::of(2usize..12)) {
            let w = uni(xs);
            let d = decompose(&w, &LoessConfig::default(), period).unwrap();
            for t in 0..w.len() {
                let resid = w.values()[t] - d.trend.values()[t] - d.seasonal.values()[t] - d.residual.values()[t];
                prop_assert_eq!(resid, 0.0);
            }
            if let Some(p) = period {
                for t in p..w.len() {
                    prop_assert_eq!(d.seasonal.values()[t], d.seasonal.values()[t - p]);
                }
            }
        }

        #[test]
        fn loess_idempotent_on_polynomials(a in -3.0f64..3.0, b in -1.0f64..1.0, c in -0.01f64..0.01, span in 0.1f64..1.0) {
            let y: Vec<f64> = (0..90).map(|t| a + b * t as f64 + c * (t * t) as f64).collect();
            let cfg = LoessConfig { span, degree: 2, robustness_iters: 0 };
            let once = loess_smooth(&y, &cfg).unwrap();
            let twice = loess_smooth(&once, &cfg).unwrap();
            for (u, v) in once.iter().zip(&twice) {
                prop_assert!((u - v).abs() < 1e-8);
            }
        }
    }
}
