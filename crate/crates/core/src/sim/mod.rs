//! Per-segment simulation: a VAR fit for low orders, block bootstrap
//! otherwise.

pub mod bootstrap;
pub mod var;

use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::series::MultivariateSeries;

pub use bootstrap::{block_bootstrap, block_length, stationary_bootstrap, BootstrapSampler};
pub use var::{default_max_order, fit_var, select_order, simulate_var, VarModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMethod {
    Var(usize),
    Bootstrap(usize),
}

impl SimMethod {
    pub fn is_var(&self) -> bool {
        matches!(self, SimMethod::Var(_))
    }
}

impl fmt::Display for SimMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimMethod::Var(p) => write!(f, "var({p})"),
            SimMethod::Bootstrap(b) => write!(f, "bootstrap({b})"),
        }
    }
}

impl Serialize for SimMethod {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    /// `None` uses [`default_max_order`].
    pub p_max: Option<usize>,
    /// Orders below this are simulated from the fitted VAR.
    pub var_order_cutoff: usize,
    /// Shorter segments are resampled row by row.
    pub min_segment: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            p_max: None,
            var_order_cutoff: 5,
            min_segment: 20,
        }
    }
}

/// How one segment was simulated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentModel {
    /// AIC order, `None` when the segment was too short or degenerate.
    pub selected_order: Option<usize>,
    pub method: SimMethod,
}

/// Simulator for a single segment, built once and sampled many times.
#[derive(Debug, Clone)]
pub enum SegmentSimulator {
    Var(VarModel),
    Bootstrap(BootstrapSampler),
}

impl SegmentSimulator {
    /// Selects the order by AIC and builds a VAR when it is below the cutoff,
    /// a moving-block sampler otherwise. A VAR that cannot be fitted or is
    /// unstable also falls back to the block bootstrap.
    pub fn build(seg: &MultivariateSeries, cfg: &SimConfig) -> Result<(Self, SegmentModel)> {
        let n = seg.len();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        if n < cfg.min_segment.max(20) {
            log::warn!("segment of {n} rows is too short to model; resampling rows independently");
            let sampler = BootstrapSampler::new(seg.clone(), 1)?;
            let model = SegmentModel { selected_order: None, method: SimMethod::Bootstrap(1) };
            return Ok((SegmentSimulator::Bootstrap(sampler), model));
        }
        let p_max = cfg.p_max.unwrap_or_else(|| default_max_order(n, seg.dim()));
        let p = match select_order(seg, p_max) {
            Ok(p) => p,
            Err(e @ (Error::RankDeficient | Error::InsufficientData(_))) => {
                log::warn!("order selection failed ({e}); using block bootstrap");
                let sampler = BootstrapSampler::automatic(seg.clone())?;
                let model = SegmentModel {
                    selected_order: None,
                    method: SimMethod::Bootstrap(sampler.block_length()),
                };
                return Ok((SegmentSimulator::Bootstrap(sampler), model));
            }
            Err(e) => return Err(e),
        };
        if p < cfg.var_order_cutoff {
            match fit_var(seg, p) {
                Ok(m) if m.is_stable() => {
                    let model = SegmentModel { selected_order: Some(p), method: SimMethod::Var(p) };
                    return Ok((SegmentSimulator::Var(m), model));
                }
                Ok(m) => log::warn!(
                    "VAR({p}) fit has spectral radius {:.4}; using block bootstrap",
                    m.spectral_radius()
                ),
                Err(e) => log::warn!("VAR({p}) fit failed ({e}); using block bootstrap"),
            }
        }
        let sampler = BootstrapSampler::automatic(seg.clone())?;
        let model = SegmentModel {
            selected_order: Some(p),
            method: SimMethod::Bootstrap(sampler.block_length()),
        };
        Ok((SegmentSimulator::Bootstrap(sampler), model))
    }

    pub fn sample(&self, length: usize, seed: u64) -> Result<MultivariateSeries> {
        match self {
            SegmentSimulator::Var(m) => simulate_var(m, length, seed),
            SegmentSimulator::Bootstrap(s) => Ok(block_bootstrap(s, length, seed)),
        }
    }
}

/// One simulated copy of `seg`, same shape.
pub fn simulate_segment(seg: &MultivariateSeries, cfg: &SimConfig, seed: u64) -> Result<(MultivariateSeries, SegmentModel)> {
    let (sim, model) = SegmentSimulator::build(seg, cfg)?;
    Ok((sim.sample(seg.len(), seed)?, model))
}
