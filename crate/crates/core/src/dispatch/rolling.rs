//! Period-by-period dispatch where each optimum sets the next period's
//! ramp window.

use std::io::Write;

use serde::Serialize;

use super::{build_qp, extract_lmp, solve_qp, wind_to_power, NetworkCase, PowerCurve, QpOptions};
use crate::error::{Error, Result};
use crate::series::MultivariateSeries;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DispatchTrace {
    pub generation: Vec<Vec<f64>>,
    pub demand: Vec<Vec<f64>>,
    pub flows: Vec<Vec<f64>>,
    /// Per-period bus prices in `case.buses` order.
    pub lmp: Vec<Vec<f64>>,
    pub objective: Vec<f64>,
    /// Sum of non-wind generation per period.
    pub total_conventional: Vec<f64>,
    pub bus_ids: Vec<usize>,
}

impl DispatchTrace {
    pub fn len(&self) -> usize {
        self.generation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generation.is_empty()
    }

    /// `t, g_1…, d_1…, pi_<bus id>…, total_conventional`, one row per period.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink);
        let ng = self.generation.first().map_or(0, Vec::len);
        let nd = self.demand.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((1..=ng).map(|i| format!("g_{i}")));
        header.extend((1..=nd).map(|i| format!("d_{i}")));
        header.extend(self.bus_ids.iter().map(|b| format!("pi_{b}")));
        header.push("total_conventional".into());
        w.write_record(&header).map_err(csv_err)?;
        for t in 0..self.len() {
            let mut rec = vec![(t + 1).to_string()];
            rec.extend(self.generation[t].iter().map(f64::to_string));
            rec.extend(self.demand[t].iter().map(f64::to_string));
            rec.extend(self.lmp[t].iter().map(f64::to_string));
            rec.push(self.total_conventional[t].to_string());
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn total_conventional_series(&self) -> Result<MultivariateSeries> {
        MultivariateSeries::univariate(&self.total_conventional).and_then(|s| s.with_names(vec!["total_conventional".into()]))
    }

    /// Price series of the bus at position `bus` in case order.
    pub fn lmp_series(&self, bus: usize) -> Vec<f64> {
        self.lmp.iter().map(|p| p[bus]).collect()
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Dispatches every row of `wind_speeds` in order. Column `k` of
/// `wind_speeds` drives the `k`-th wind generator. Demand caps come from
/// `demand` (one row per period, one column per load) or, when absent, from
/// the case's per-load lists.
pub fn rolling_horizon(
    case: &NetworkCase,
    wind_speeds: &MultivariateSeries,
    curve: &PowerCurve,
    demand: Option<&MultivariateSeries>,
    opts: &QpOptions,
) -> Result<DispatchTrace> {
    case.validate()?;
    curve.validate()?;
    let wind = case.wind_generators();
    if wind_speeds.dim() != wind.len() {
        return Err(Error::Config(format!(
            "wind input has {} columns but the case has {} wind generators",
            wind_speeds.dim(),
            wind.len()
        )));
    }
    let periods = wind_speeds.len();
    match demand {
        Some(d) if d.len() != periods || d.dim() != case.loads.len() => {
            return Err(Error::Config(format!(
                "demand profile must be {periods} x {}, got {} x {}",
                case.loads.len(),
                d.len(),
                d.dim()
            )))
        }
        Some(_) => {}
        None => case.check_periods(periods)?,
    }

    let mut trace = DispatchTrace {
        bus_ids: case.buses.iter().map(|b| b.id).collect(),
        ..DispatchTrace::default()
    };
    let mut g_star: Option<Vec<f64>> = None;
    for t in 0..periods {
        let caps = wind_speeds
            .row(t)
            .iter()
            .map(|&v| wind_to_power(v, curve))
            .collect::<Result<Vec<_>>>()?;
        let dem: Vec<f64> = match demand {
            Some(d) => d.row(t).to_vec(),
            None => (0..case.loads.len()).map(|k| case.demand_at(k, t)).collect(),
        };
        let q = build_qp(case, &caps, g_star.as_deref(), &dem)?;
        let sol = match solve_qp(&q.qp, opts) {
            Ok(s) => s,
            Err(e @ (Error::Infeasible | Error::IterationLimit(_))) => {
                log::warn!("period {} failed: {e}", t + 1);
                return Err(Error::PeriodInfeasible { period: t + 1, partial: Box::new(trace) });
            }
            Err(e) => return Err(e),
        };
        let g = sol.x[q.gen_vars.clone()].to_vec();
        trace.total_conventional.push(
            g.iter()
                .zip(&case.generators)
                .filter(|(_, gen)| !gen.wind)
                .map(|(g, _)| g)
                .sum(),
        );
        trace.lmp.push(extract_lmp(&sol, &q)?);
        trace.demand.push(sol.x[q.load_vars.clone()].to_vec());
        trace.flows.push(sol.x[q.flow_vars.clone()].to_vec());
        trace.objective.push(sol.objective);
        trace.generation.push(g.clone());
        g_star = Some(g);
    }
    Ok(trace)
}
