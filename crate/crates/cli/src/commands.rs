use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nonstat_core::dispatch::{rolling_horizon, DispatchTrace, NetworkCase, PowerCurve, QpOptions};
use nonstat_core::spectral::DeviationProfile;
use nonstat_core::{
    decompose as split, detect_changepoints, load_csv, simulate_wind, write_csv, CsvOptions, DetectorConfig, Error,
    LoessConfig, MultivariateSeries, PipelineConfig, SimConfig, SpectralConfig,
};
use serde_json::{json, Value};

use crate::plot::Chart;
use crate::{CliError, DecomposeArgs, DetectArgs, DetectorArgs, DispatchArgs, InputArgs, LoessArgs, SimulateArgs};

type Result<T> = std::result::Result<T, CliError>;

fn io_context(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn load(path: &Path, no_header: bool) -> Result<MultivariateSeries> {
    let f = File::open(path).map_err(|e| io_context(path, e))?;
    Ok(load_csv(f, CsvOptions { has_header: !no_header })?)
}

fn load_input(a: &InputArgs) -> Result<MultivariateSeries> {
    load(&a.input, a.no_header)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_context(path, e))
}

fn write_series(path: &Path, s: &MultivariateSeries) -> Result<()> {
    let f = File::create(path).map_err(|e| io_context(path, e))?;
    let mut w = BufWriter::new(f);
    write_csv(s, &mut w)?;
    w.flush().map_err(|e| io_context(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_context(dir, e))
}

/// `dir/stem<suffix>` for an output file `dir/stem.ext`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn pretty(v: &impl serde::Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(v).map_err(Error::from)? + "\n")
}

fn loess_config(a: &LoessArgs) -> (LoessConfig, Option<usize>) {
    let cfg = LoessConfig {
        span: a.span,
        degree: a.degree as usize,
        robustness_iters: a.robust_iters,
    };
    (cfg, a.period.map(|p| p as usize))
}

fn detector_config(a: &DetectorArgs, alpha: f64, seed: u64) -> DetectorConfig {
    DetectorConfig {
        alpha,
        window: a.window.map(|w| w as usize),
        spectral: SpectralConfig {
            kernel: a.kernel,
            bandwidth_c: a.bandwidth_c,
            bandwidth: a.bandwidth,
        },
        n_boot: a.n_boot as usize,
        seed,
        min_separation: None,
    }
}

fn column_name(s: &MultivariateSeries, l: usize) -> String {
    s.names().get(l).cloned().unwrap_or_else(|| format!("x{}", l + 1))
}

fn series_chart(path: &Path, title: &str, s: &MultivariateSeries, change_points: &[usize]) -> Result<()> {
    let cols: Vec<Vec<f64>> = (0..s.dim()).map(|l| s.column(l)).collect();
    let mut chart = Chart::new(title, "t", "value");
    for (l, c) in cols.iter().enumerate() {
        chart = chart.line(column_name(s, l), c);
    }
    chart.vlines = change_points.iter().map(|&c| c as f64).collect();
    write_text(path, &chart.render())
}

fn profile_chart(path: &Path, p: &DeviationProfile, threshold: f64) -> Result<()> {
    let mut chart = Chart::new("Spectral deviation profile", "tau", "D(tau)").line("D", &p.d_hat);
    chart.x0 = p.window as f64;
    chart.hlines.push(("threshold".into(), threshold));
    write_text(path, &chart.render())
}

fn profile_csv(p: &DeviationProfile) -> String {
    let mut s = String::from("tau,d_hat\n");
    for (t, d) in p.tau_values.iter().zip(&p.d_hat) {
        s.push_str(&format!("{t},{d}\n"));
    }
    s
}

pub fn decompose(a: &DecomposeArgs) -> Result<()> {
    let s = load_input(&a.input)?;
    let (cfg, period) = loess_config(&a.loess);
    let d = split(&s, &cfg, period)?;
    create_dir(&a.out)?;
    write_series(&a.out.join("trend.csv"), &d.trend)?;
    write_series(&a.out.join("seasonal.csv"), &d.seasonal)?;
    write_series(&a.out.join("residual.csv"), &d.residual)?;
    let manifest = json!({
        "input": a.input.input.display().to_string(),
        "rows": s.len(),
        "columns": s.names(),
        "loess": cfg,
        "period": period,
        "files": ["trend.csv", "seasonal.csv", "residual.csv"],
    });
    write_text(&a.out.join("manifest.json"), &pretty(&manifest)?)?;
    if a.emit_plot.is_some() {
        series_chart(&a.out.join("residual.svg"), "Residual", &d.residual, &[])?;
        series_chart(&a.out.join("trend.svg"), "Trend", &d.trend, &[])?;
    }
    Ok(())
}

pub fn detect(a: &DetectArgs) -> Result<()> {
    let s = load_input(&a.input)?;
    let (loess, period) = loess_config(&a.loess);
    // the statistic assumes a zero-mean input; a level left in the data
    // swamps it at low frequencies
    let target = if a.detrend { split(&s, &loess, period)?.residual } else { s.centered() };
    let cfg = detector_config(&a.detector, a.alpha, a.seed);
    let res = detect_changepoints(&target, &cfg)?;

    let mut doc = serde_json::to_value(&res).map_err(Error::from)?;
    let mut echo = json!({
        "input": a.input.input.display().to_string(),
        "rows": target.len(),
        "columns": target.names(),
        "detrend": a.detrend,
        "centered": !a.detrend,
        "detector": cfg,
    });
    if a.detrend {
        echo["loess"] = json!(loess);
        echo["period"] = json!(period);
    }
    if let Value::Object(m) = &mut doc {
        m.insert("config".into(), echo);
    }
    write_text(&a.output, &pretty(&doc)?)?;
    if let Some(p) = &a.profile {
        write_text(p, &profile_csv(&res.profile))?;
    }
    if a.emit_plot.is_some() {
        let title = if a.detrend { "Residual series and change points" } else { "Series and change points" };
        series_chart(&sibling(&a.output, "_series.svg"), title, &target, &res.change_points)?;
        profile_chart(&sibling(&a.output, "_profile.svg"), &res.profile, res.threshold)?;
    }
    Ok(())
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let w = load_input(&a.input)?;
    let (loess, period) = loess_config(&a.loess);
    let cfg = PipelineConfig {
        loess,
        period,
        detector: detector_config(&a.detector, a.alpha, a.seed),
        sim: SimConfig {
            p_max: a.p_max,
            var_order_cutoff: a.var_cutoff,
            ..SimConfig::default()
        },
    };
    let bundle = simulate_wind(&w, a.alpha, a.n_sims as usize, a.seed, &cfg)?;
    bundle.write_to(&a.out).map_err(|e| match e {
        Error::Io(io) => io_context(&a.out, io),
        other => CliError::Data(other),
    })?;
    for s in &bundle.segments {
        log::info!("segment ({}, {}]: {}", s.lo, s.hi, s.model.method);
    }
    if a.emit_plot.is_some() {
        let cps = &bundle.change_points;
        series_chart(&a.out.join("residual.svg"), "Residual series and change points", &bundle.decomposition.residual, &cps.change_points)?;
        profile_chart(&a.out.join("profile.svg"), &cps.profile, cps.threshold)?;
    }
    Ok(())
}

fn resolve_case(name: &str) -> Result<NetworkCase> {
    let path = Path::new(name);
    if path.exists() {
        return Ok(NetworkCase::load(path).map_err(|e| match e {
            Error::Io(io) => io_context(path, io),
            other => CliError::Data(other),
        })?);
    }
    match name.to_ascii_lowercase().as_str() {
        "ieee30" => Ok(NetworkCase::ieee30()),
        "five-bus" | "five_bus" => Ok(NetworkCase::five_bus()),
        _ => Err(io_context(path, std::io::ErrorKind::NotFound.into())),
    }
}

fn clip_negative(w: &MultivariateSeries) -> Result<MultivariateSeries> {
    let clipped = w.values().iter().filter(|v| **v < 0.0).count();
    if clipped == 0 {
        return Ok(w.clone());
    }
    log::warn!("{clipped} negative wind speeds set to 0");
    let values = w.values().iter().map(|v| v.max(0.0)).collect();
    Ok(MultivariateSeries::new(w.len(), w.dim(), values, Some(w.names().to_vec()))?.with_start_index(w.start_index()))
}

fn write_trace(path: &Path, trace: &DispatchTrace) -> Result<()> {
    let f = File::create(path).map_err(|e| io_context(path, e))?;
    trace.write_csv(BufWriter::new(f))?;
    Ok(())
}

pub fn dispatch(a: &DispatchArgs) -> Result<()> {
    let case = resolve_case(&a.case)?;
    let mut wind = load(&a.wind, a.no_header)?;
    if a.clip_negative {
        wind = clip_negative(&wind)?;
    }
    let demand = a.demand.as_deref().map(|p| load(p, a.no_header)).transpose()?;
    let curve = PowerCurve {
        cut_in: a.cut_in,
        rated_speed: a.rated_speed,
        cut_out: a.cut_out,
        rated_power: a.rated_power,
    };
    curve.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let opts = QpOptions { tol: a.tol, max_iter: a.max_iter as usize };

    let (trace, failure) = match rolling_horizon(&case, &wind, &curve, demand.as_ref(), &opts) {
        Ok(t) => (t, None),
        Err(Error::PeriodInfeasible { period, partial }) => {
            log::warn!("writing the {} solved periods before period {period}", partial.len());
            let t = (*partial).clone();
            (t, Some(Error::PeriodInfeasible { period, partial }))
        }
        Err(e) => return Err(e.into()),
    };
    write_trace(&a.out, &trace)?;
    let manifest = json!({
        "case": case.name,
        "case_source": a.case,
        "wind": a.wind.display().to_string(),
        "demand": a.demand.as_ref().map(|p| p.display().to_string()),
        "periods": wind.len(),
        "solved_periods": trace.len(),
        "clip_negative": a.clip_negative,
        "power_curve": curve,
        "qp": opts,
        "total_objective": trace.objective.iter().sum::<f64>(),
    });
    write_text(&sibling(&a.out, ".manifest.json"), &pretty(&manifest)?)?;

    if a.emit_plot.is_some() && !trace.is_empty() {
        let gens: Vec<Vec<f64>> = (0..case.generators.len())
            .map(|i| trace.generation.iter().map(|g| g[i]).collect())
            .collect();
        let mut chart = Chart::new("Generation", "t", "MW").line("total conventional", &trace.total_conventional);
        for (i, g) in gens.iter().enumerate() {
            let kind = if case.generators[i].wind { "wind" } else { "unit" };
            chart = chart.line(format!("{kind} {} (bus {})", i + 1, case.generators[i].bus), g);
        }
        write_text(&sibling(&a.out, "_generation.svg"), &chart.render())?;

        let idx = case.bus_index().get(&1).copied().unwrap_or_else(|| case.reference_bus());
        let lmp = trace.lmp_series(idx);
        let title = format!("LMP at bus {}", case.buses[idx].id);
        write_text(&sibling(&a.out, "_lmp.svg"), &Chart::new(title, "t", "price").line("LMP", &lmp).render())?;
    }
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}
