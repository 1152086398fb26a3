//! Economic dispatch with DC power flow, priced by the duals of the
//! per-bus balance rows.

pub mod case;
pub mod power_curve;
pub mod qp;
pub mod rolling;

use std::ops::Range;

use crate::error::{Error, Result};

pub use case::{Bus, Generator, Line, Load, NetworkCase};
pub use power_curve::{wind_to_power, PowerCurve};
pub use qp::{solve_qp, KktResiduals, QpInstance, QpOptions, QpSolution, QpStatus};
pub use rolling::{rolling_horizon, DispatchTrace};

/// A dispatch QP together with the map from model quantities to columns
/// and rows. Columns are ordered `g`, `d`, `f`, `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchQp {
    pub qp: QpInstance,
    pub gen_vars: Range<usize>,
    pub load_vars: Range<usize>,
    pub flow_vars: Range<usize>,
    pub angle_vars: Range<usize>,
    /// Balance row of each bus, in `case.buses` order.
    pub balance_rows: Vec<usize>,
    pub flow_rows: Vec<usize>,
}

const BOUND_SLACK: f64 = 1e-7;

/// Builds one period's dispatch problem.
///
/// `wind_cap` has one entry per wind generator in case order; `g_star` is
/// the previous period's generation, `None` in the first period (no ramp
/// limits); `demand` has one cap per load.
pub fn build_qp(case: &NetworkCase, wind_cap: &[f64], g_star: Option<&[f64]>, demand: &[f64]) -> Result<DispatchQp> {
    case.validate()?;
    let wind = case.wind_generators();
    if wind_cap.len() != wind.len() {
        return Err(Error::Config(format!(
            "{} wind capacities for {} wind generators",
            wind_cap.len(),
            wind.len()
        )));
    }
    if demand.len() != case.loads.len() {
        return Err(Error::Config(format!("{} demand values for {} loads", demand.len(), case.loads.len())));
    }
    if let Some(gs) = g_star {
        if gs.len() != case.generators.len() {
            return Err(Error::Config("previous generation has the wrong length".into()));
        }
        for (i, (g, gen)) in gs.iter().zip(&case.generators).enumerate() {
            if *g < gen.gmin - BOUND_SLACK || *g > gen.gmax + BOUND_SLACK {
                return Err(Error::Config(format!("previous generation of unit {i} is outside its bounds")));
            }
        }
    }
    if wind_cap.iter().chain(demand).any(|v| !(*v >= 0.0)) {
        return Err(Error::Config("wind capacities and demands must be non-negative".into()));
    }

    let bus = case.bus_index();
    let reference = case.reference_bus();
    let mut qp = QpInstance::new();

    let mut cap = vec![f64::INFINITY; case.generators.len()];
    for (&i, &c) in wind.iter().zip(wind_cap) {
        cap[i] = c;
    }
    let g0 = qp.num_vars();
    for (i, g) in case.generators.iter().enumerate() {
        let mut lo = g.gmin;
        let mut hi = g.gmax.min(cap[i]);
        if let Some(gs) = g_star {
            lo = lo.max(gs[i] + g.ramp_dn);
            hi = hi.min(gs[i] + g.ramp_up);
        }
        qp.add_var(format!("g_{}", i + 1), 2.0 * g.a, g.b, lo, hi);
    }
    let d0 = qp.num_vars();
    for (k, l) in case.loads.iter().enumerate() {
        qp.add_var(format!("d_{}", k + 1), 0.0, -l.beta, 0.0, demand[k]);
    }
    let f0 = qp.num_vars();
    for (k, l) in case.lines.iter().enumerate() {
        qp.add_var(format!("f_{}_{}_{}", k + 1, l.from, l.to), 0.0, 0.0, l.fmin, l.fmax);
    }
    let t0 = qp.num_vars();
    for (i, b) in case.buses.iter().enumerate() {
        let (lo, hi) = if i == reference { (0.0, 0.0) } else { (f64::NEG_INFINITY, f64::INFINITY) };
        qp.add_var(format!("theta_{}", b.id), 0.0, 0.0, lo, hi);
    }
    let end = qp.num_vars();

    let mut entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); case.buses.len()];
    for (k, l) in case.lines.iter().enumerate() {
        entries[bus[&l.from]].push((f0 + k, -1.0));
        entries[bus[&l.to]].push((f0 + k, 1.0));
    }
    for (i, g) in case.generators.iter().enumerate() {
        entries[bus[&g.bus]].push((g0 + i, 1.0));
    }
    for (k, l) in case.loads.iter().enumerate() {
        entries[bus[&l.bus]].push((d0 + k, -1.0));
    }
    let balance_rows = entries.into_iter().map(|e| qp.add_row(e, 0.0)).collect();

    let flow_rows = case
        .lines
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let (i, j) = (bus[&l.from], bus[&l.to]);
            let coef = case.buses[i].v * case.buses[j].v / l.x;
            qp.add_row(vec![(f0 + k, 1.0), (t0 + i, -coef), (t0 + j, coef)], 0.0)
        })
        .collect();

    Ok(DispatchQp {
        qp,
        gen_vars: g0..d0,
        load_vars: d0..f0,
        flow_vars: f0..t0,
        angle_vars: t0..end,
        balance_rows,
        flow_rows,
    })
}

/// Price of one more MW of load at each bus, in `case.buses` order.
pub fn extract_lmp(sol: &QpSolution, q: &DispatchQp) -> Result<Vec<f64>> {
    if sol.status != QpStatus::Optimal || sol.y.len() != q.qp.num_rows() {
        return Err(Error::State("prices need an optimal solution of this instance".into()));
    }
    Ok(q.balance_rows.iter().map(|&r| sol.y[r]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(lines: Vec<Line>, gens: Vec<Generator>, loads: Vec<Load>, nbus: usize) -> NetworkCase {
        NetworkCase {
            name: "t".into(),
            buses: (1..=nbus).map(|id| Bus { id, v: 1.0 }).collect(),
            lines,
            generators: gens,
            loads,
        }
    }

    fn gen(bus: usize, a: f64, b: f64, gmax: f64, wind: bool) -> Generator {
        Generator { bus, a, b, gmin: 0.0, gmax, ramp_dn: -gmax, ramp_up: gmax, wind }
    }

    #[allow(dead_code)]
    fn line(from: usize, to: usize, x: f64, fmax: f64) -> Line {
        Line { from, to, x, fmin: -fmax, fmax }
    }

    #[test]
    fn single_bus_instance() {
        let c = tiny(vec![], vec![gen(1, 1.0, 0.0, 100.0, false)], vec![Load { bus: 1, beta: 10.0, demand: vec![10.0] }], 1);
        let q = build_qp(&c, &[], None, &[10.0]).unwrap();
        assert_eq!(q.qp.num_vars(), 3); // g, d and the pinned angle
        assert_eq!(q.qp.num_rows(), 1);
        assert!(q.flow_vars.is_empty());
        let s = solve_qp(&q.qp, &QpOptions::default()).unwrap();
        assert!((s.x[0] - 5.0).abs() < 1e-6 && (s.x[1] - 5.0).abs() < 1e-6);
        assert!((s.objective + 25.0).abs() < 1e-6);
        assert!((extract_lmp(&s, &q).unwrap()[0] - 10.0).abs() < 1e-6);
    }

    #[test]
    fn variable_count_and_bounds() {
        let c = NetworkCase::ieee30();
        let demand: Vec<f64> = (0..c.loads.len()).map(|k| c.demand_at(k, 0)).collect();
        let q = build_qp(&c, &[5.0, 30.0], None, &demand).unwrap();
        assert_eq!(q.qp.num_vars(), 6 + 21 + 41 + 30);
        assert_eq!(q.qp.num_rows(), 30 + 41);
        assert_eq!(q.qp.upper[3], 5.0);
        assert_eq!(q.qp.upper[5], 21.02);
        let g_star = [100.0, 50.0, 20.0, 5.0, 10.0, 0.0];
        let q = build_qp(&c, &[5.0, 30.0], Some(&g_star), &demand).unwrap();
        assert_eq!((q.qp.lower[0], q.qp.upper[0]), (40.0, 160.0));
        assert_eq!((q.qp.lower[2], q.qp.upper[2]), (0.0, 45.0));
        assert!(build_qp(&c, &[5.0], None, &demand).is_err());
    }

    #[test]
    fn disconnected_case_rejected() {
        let c = tiny(vec![], vec![gen(1, 1.0, 0.0, 10.0, false)], vec![], 2);
        assert!(matches!(build_qp(&c, &[], None, &[]), Err(Error::Case(_))));
    }

    #[test]
    fn ieee30_solves_with_consistent_prices() {
        let c = NetworkCase::ieee30();
        let demand: Vec<f64> = (0..c.loads.len()).map(|k| c.demand_at(k, 0)).collect();
        let q = build_qp(&c, &[12.0, 7.0], None, &demand).unwrap();
        let s = solve_qp(&q.qp, &QpOptions::default()).unwrap();
        assert!(s.kkt_residual <= 1e-6, "{:?}", s.kkt);
        for &r in &q.balance_rows {
            let bal: f64 = q.qp.rows[r].iter().map(|&(j, a)| a * s.x[j]).sum();
            assert!(bal.abs() <= 1e-8, "{bal}");
        }
        let lmp = extract_lmp(&s, &q).unwrap();
        assert!(lmp.iter().all(|p| *p >= -1e-6));
        // wind is free and the wind buses are not congested here
        assert!((s.x[3] - 12.0).abs() < 1e-6 && (s.x[5] - 7.0).abs() < 1e-6);
    }
}
