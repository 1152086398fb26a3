//! Least-squares VAR(p) fitting, AIC order selection and residual-resampling
//! simulation.
//!
//! Fits are on mean-centred data with an intercept column, so the stored
//! intercept is numerically zero and the segment mean is kept separately.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::series::MultivariateSeries;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarModel {
    pub order: usize,
    pub dim: usize,
    /// `W_1 … W_p`, each `L × L` row-major; `W_i[a][b]` maps `r_{t-i,b}` to `r_{t,a}`.
    pub coefficients: Vec<Vec<f64>>,
    pub intercept: Vec<f64>,
    pub mean: Vec<f64>,
    /// Innovation sample, one row per fitted time point.
    pub residuals: Vec<Vec<f64>>,
    pub segment_length: usize,
    #[serde(skip)]
    pub names: Vec<String>,
}

impl VarModel {
    /// Zero-mean model from explicit coefficients and an innovation sample.
    pub fn new(coefficients: Vec<Vec<f64>>, dim: usize, innovations: Vec<Vec<f64>>) -> Result<Self> {
        if coefficients.iter().any(|w| w.len() != dim * dim) {
            return Err(Error::Config(format!("coefficient matrices must be {dim}x{dim}")));
        }
        if innovations.iter().any(|r| r.len() != dim) {
            return Err(Error::Config("innovation rows have wrong width".into()));
        }
        Ok(Self {
            order: coefficients.len(),
            dim,
            coefficients,
            intercept: vec![0.0; dim],
            mean: vec![0.0; dim],
            segment_length: innovations.len(),
            residuals: innovations,
            names: (1..=dim).map(|i| format!("series{i}")).collect(),
        })
    }

    pub fn coefficient(&self, lag: usize, row: usize, col: usize) -> f64 {
        self.coefficients[lag - 1][row * self.dim + col]
    }

    /// Spectral radius of the `pL × pL` companion matrix.
    pub fn spectral_radius(&self) -> f64 {
        let (p, l) = (self.order, self.dim);
        if p == 0 {
            return 0.0;
        }
        let k = p * l;
        let mut c = DMatrix::<f64>::zeros(k, k);
        for (lag, w) in self.coefficients.iter().enumerate() {
            for a in 0..l {
                for b in 0..l {
                    c[(a, lag * l + b)] = w[a * l + b];
                }
            }
        }
        for i in l..k {
            c[(i, i - l)] = 1.0;
        }
        c.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_stable(&self) -> bool {
        self.spectral_radius() < 1.0
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Result of a least-squares regression on a fixed estimation sample.
struct LsFit {
    /// `(pL + 1) × L`, intercept row first.
    beta: DMatrix<f64>,
    residuals: DMatrix<f64>,
}

fn centred(seg: &MultivariateSeries) -> (DMatrix<f64>, Vec<f64>) {
    let mean = seg.means();
    let m = DMatrix::from_fn(seg.len(), seg.dim(), |t, j| seg.get(t, j) - mean[j]);
    (m, mean)
}

/// Regresses `y_t` for `t ∈ start..n` on an intercept and `p` lags.
fn least_squares(y: &DMatrix<f64>, p: usize, start: usize) -> Result<LsFit> {
    let (n, l) = (y.nrows(), y.ncols());
    let rows = n - start;
    let k = p * l + 1;
    let x = DMatrix::from_fn(rows, k, |r, c| {
        if c == 0 {
            1.0
        } else {
            let lag = (c - 1) / l + 1;
            y[(start + r - lag, (c - 1) % l)]
        }
    });
    let target = y.rows(start, rows).into_owned();

    // column equilibration so the rank check is scale free
    let scale = DVector::from_fn(k, |c, _| {
        let nrm = x.column(c).norm();
        if nrm > 0.0 {
            1.0 / nrm
        } else {
            0.0
        }
    });
    if scale.iter().any(|&s| s == 0.0) {
        return Err(Error::RankDeficient);
    }
    let xs = DMatrix::from_fn(rows, k, |r, c| x[(r, c)] * scale[c]);
    let xtx = xs.transpose() * &xs;
    let chol = xtx.clone().cholesky().ok_or(Error::RankDeficient)?;
    let diag = chol.l_dirty().diagonal();
    let (dmin, dmax) = diag
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d.abs()), hi.max(d.abs())));
    if dmin * dmin < 1e-13 * dmax * dmax {
        return Err(Error::RankDeficient);
    }
    let beta_s = chol.solve(&(xs.transpose() * &target));
    let beta = DMatrix::from_fn(k, l, |r, c| beta_s[(r, c)] * scale[r]);
    let residuals = &target - &x * &beta;
    Ok(LsFit { beta, residuals })
}

fn check_sample(n: usize, p: usize, l: usize, start: usize) -> Result<()> {
    let rows = n.saturating_sub(start);
    if rows <= p * l + 1 {
        return Err(Error::InsufficientData(format!(
            "{rows} usable rows for {} regressors at order {p}",
            p * l + 1
        )));
    }
    Ok(())
}

/// Multivariate least squares of `r_t` on `r_{t−1} … r_{t−p}`.
pub fn fit_var(seg: &MultivariateSeries, p: usize) -> Result<VarModel> {
    let (n, l) = (seg.len(), seg.dim());
    check_sample(n, p, l, p)?;
    if (n as f64) < 3.0 * (p * l * l + l) as f64 / l as f64 {
        log::warn!("VAR({p}) on {n} rows: parameter estimates are unreliable");
    }
    let (y, mean) = centred(seg);
    let fit = least_squares(&y, p, p)?;
    let coefficients = (0..p)
        .map(|lag| {
            let mut w = vec![0.0; l * l];
            for a in 0..l {
                for b in 0..l {
                    w[a * l + b] = fit.beta[(1 + lag * l + b, a)];
                }
            }
            w
        })
        .collect();
    let residuals = (0..fit.residuals.nrows())
        .map(|r| fit.residuals.row(r).iter().copied().collect())
        .collect();
    Ok(VarModel {
        order: p,
        dim: l,
        coefficients,
        intercept: (0..l).map(|a| fit.beta[(0, a)]).collect(),
        mean,
        residuals,
        segment_length: n,
        names: seg.names().to_vec(),
    })
}

/// `min(10, ⌊(n − 1)/(3L)⌋)`.
pub fn default_max_order(n: usize, dim: usize) -> usize {
    10.min(n.saturating_sub(1) / (3 * dim))
}

/// `n·ln det Σ̂_p + 2(pL² + L)` for `p = 0 ..= p_max` on the common sample
/// `t > p_max`. Orders whose fit is singular are reported as `None`.
pub fn aic_table(seg: &MultivariateSeries, p_max: usize) -> Result<Vec<Option<f64>>> {
    let (n, l) = (seg.len(), seg.dim());
    check_sample(n, p_max, l, p_max)?;
    let (y, _) = centred(seg);
    let n_eff = (n - p_max) as f64;
    let mut out = Vec::with_capacity(p_max + 1);
    for p in 0..=p_max {
        let aic = least_squares(&y, p, p_max).ok().and_then(|fit| {
            let sigma = fit.residuals.transpose() * &fit.residuals / n_eff;
            let det = sigma.determinant();
            (det > 0.0 && det.is_finite()).then(|| n_eff * det.ln() + 2.0 * (p * l * l + l) as f64)
        });
        out.push(aic);
    }
    Ok(out)
}

/// Order in `0 ..= p_max` minimising AIC; ties go to the smaller order.
pub fn select_order(seg: &MultivariateSeries, p_max: usize) -> Result<usize> {
    let table = aic_table(seg, p_max)?;
    let mut best: Option<(usize, f64)> = None;
    for (p, aic) in table.iter().enumerate() {
        if let Some(a) = *aic {
            if best.is_none_or(|(_, b)| a < b) {
                best = Some((p, a));
            }
        }
    }
    match best {
        Some((p, _)) => Ok(p),
        None => Err(Error::InsufficientData(
            "innovation covariance is singular at every order".into(),
        )),
    }
}

/// Simulates `length` rows from a stable model, drawing innovations i.i.d.
/// from the stored residuals and discarding a burn-in of `10·p` rows.
pub fn simulate_var(model: &VarModel, length: usize, seed: u64) -> Result<MultivariateSeries> {
    let rho = model.spectral_radius();
    if rho >= 1.0 {
        return Err(Error::UnstableModel(rho));
    }
    if model.residuals.is_empty() {
        return Err(Error::InsufficientData("model has no innovation sample".into()));
    }
    if length == 0 {
        return Err(Error::Config("simulation length must be positive".into()));
    }
    let (p, l) = (model.order, model.dim);
    let burn = 10 * p;
    let mut rng = rng_from_seed(seed);
    // history[0] is r_{t-1}
    let mut history: Vec<Vec<f64>> = vec![vec![0.0; l]; p];
    let mut values = Vec::with_capacity(length * l);
    for step in 0..burn + length {
        let shock = &model.residuals[rng.random_range(0..model.residuals.len())];
        let mut next: Vec<f64> = model.intercept.iter().zip(shock).map(|(c, e)| c + e).collect();
        for (lag, w) in model.coefficients.iter().enumerate() {
            let prev = &history[lag];
            for a in 0..l {
                next[a] += (0..l).map(|b| w[a * l + b] * prev[b]).sum::<f64>();
            }
        }
        if step >= burn {
            values.extend(next.iter().zip(&model.mean).map(|(v, m)| v + m));
        }
        if p > 0 {
            history.rotate_right(1);
            history[0] = next;
        }
    }
    Ok(MultivariateSeries::from_parts_unchecked(length, l, values, model.names.clone()))
}
