//! Decompose, detect, simulate each stationary segment, reassemble.

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::changepoint::{detect_changepoints, segment_at, ChangePointResult, DetectorConfig};
use crate::decompose::{decompose, Decomposition, LoessConfig};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::series::{write_csv, MultivariateSeries};
use crate::sim::{SegmentModel, SegmentSimulator, SimConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub loess: LoessConfig,
    /// Seasonal period in rows; `None` skips the seasonal term.
    pub period: Option<usize>,
    /// `alpha` and `seed` are overridden by the arguments of [`simulate_wind`].
    pub detector: DetectorConfig,
    pub sim: SimConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            loess: LoessConfig::default(),
            period: None,
            detector: DetectorConfig::default(),
            sim: SimConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentSummary {
    pub lo: usize,
    pub hi: usize,
    #[serde(flatten)]
    pub model: SegmentModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationBundle {
    pub decomposition: Decomposition,
    pub change_points: ChangePointResult,
    pub segments: Vec<SegmentSummary>,
    pub simulations: Vec<MultivariateSeries>,
    pub sim_seeds: Vec<u64>,
    pub master_seed: u64,
    pub config: PipelineConfig,
}

/// Seed of simulation `i` (0-based).
pub fn simulation_seed(master: u64, i: usize) -> u64 {
    derive_seed(master, i as u64 + 1)
}

pub fn simulate_wind(
    w: &MultivariateSeries,
    alpha: f64,
    n_sims: usize,
    master_seed: u64,
    cfg: &PipelineConfig,
) -> Result<SimulationBundle> {
    if n_sims == 0 {
        return Err(Error::Config("number of simulations must be at least 1".into()));
    }
    let mut cfg = cfg.clone();
    cfg.detector.alpha = alpha;
    cfg.detector.seed = master_seed;

    let decomposition = decompose(w, &cfg.loess, cfg.period)?;
    let residual = &decomposition.residual;
    let change_points = detect_changepoints(residual, &cfg.detector)?;
    let segments = segment_at(residual, &change_points.change_points)?;

    let mut simulators = Vec::with_capacity(segments.len());
    let mut summaries = Vec::with_capacity(segments.len());
    for seg in &segments {
        let (sim, model) = SegmentSimulator::build(&seg.data, &cfg.sim)?;
        log::info!("segment ({}, {}]: {}", seg.lo, seg.hi, model.method);
        simulators.push(sim);
        summaries.push(SegmentSummary { lo: seg.lo, hi: seg.hi, model });
    }

    let sim_seeds: Vec<u64> = (0..n_sims).map(|i| simulation_seed(master_seed, i)).collect();
    let simulations = sim_seeds
        .par_iter()
        .map(|&seed| {
            let parts = simulators
                .iter()
                .zip(&segments)
                .enumerate()
                .map(|(k, (sim, seg))| sim.sample(seg.len(), derive_seed(seed, k as u64)))
                .collect::<Result<Vec<_>>>()?;
            let r = MultivariateSeries::concat(&parts)?;
            Ok(decomposition.recompose(&r))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SimulationBundle {
        decomposition,
        change_points,
        segments: summaries,
        simulations,
        sim_seeds,
        master_seed,
        config: cfg,
    })
}

#[derive(Serialize)]
struct SimEntry<'a> {
    file: &'a str,
    seed: u64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    rows: usize,
    columns: &'a [String],
    n_sims: usize,
    master_seed: u64,
    change_points: &'a [usize],
    segments: &'a [SegmentSummary],
    simulations: Vec<SimEntry<'a>>,
    config: &'a PipelineConfig,
}

pub fn simulation_file_name(i: usize) -> String {
    format!("sim_{:04}.csv", i + 1)
}

fn write_series(path: &Path, s: &MultivariateSeries) -> Result<()> {
    let f = fs::File::create(path)?;
    write_csv(s, BufWriter::new(f))
}

impl SimulationBundle {
    pub fn manifest_json(&self) -> Result<String> {
        let names: Vec<String> = (0..self.simulations.len()).map(simulation_file_name).collect();
        let manifest = Manifest {
            rows: self.decomposition.residual.len(),
            columns: self.decomposition.residual.names(),
            n_sims: self.simulations.len(),
            master_seed: self.master_seed,
            change_points: &self.change_points.change_points,
            segments: &self.segments,
            simulations: names
                .iter()
                .zip(&self.sim_seeds)
                .map(|(file, &seed)| SimEntry { file, seed })
                .collect(),
            config: &self.config,
        };
        Ok(serde_json::to_string_pretty(&manifest)? + "\n")
    }

    /// Writes the decomposition, change points, every simulation and a
    /// manifest into `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_series(&dir.join("original_trend.csv"), &self.decomposition.trend)?;
        write_series(&dir.join("original_seasonal.csv"), &self.decomposition.seasonal)?;
        write_series(&dir.join("original_residual.csv"), &self.decomposition.residual)?;
        fs::write(dir.join("changepoints.json"), self.change_points.to_json()? + "\n")?;
        for (i, s) in self.simulations.iter().enumerate() {
            write_series(&dir.join(simulation_file_name(i)), s)?;
        }
        fs::write(dir.join("manifest.json"), self.manifest_json()?)?;
        Ok(())
    }
}
