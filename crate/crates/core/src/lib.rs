//! Change point detection, segment-wise simulation and rolling-horizon
//! economic dispatch for multivariate wind speed series.

pub mod changepoint;
pub mod decompose;
pub mod dispatch;
pub mod error;
pub mod pipeline;
pub mod rng;
pub mod series;
pub mod sim;
pub mod spectral;
pub mod stats;

pub use changepoint::{detect_changepoints, segment, ChangePointResult, DetectorConfig, Segment};
pub use decompose::{decompose, Decomposition, LoessConfig};
pub use dispatch::{rolling_horizon, DispatchTrace, NetworkCase, PowerCurve, QpOptions};
pub use error::{Error, Result};
pub use pipeline::{simulate_wind, PipelineConfig, SimulationBundle};
pub use series::{load_csv, write_csv, CsvOptions, MultivariateSeries};
pub use sim::{SimConfig, SimMethod};
pub use spectral::{Kernel, SpectralConfig};
