//! Network case description and validation.

use std::collections::{BTreeMap, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: usize,
    #[serde(rename = "V")]
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    #[serde(rename = "X")]
    pub x: f64,
    pub fmin: f64,
    pub fmax: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: usize,
    /// Quadratic cost coefficient, cost is `a·g² + b·g`.
    pub a: f64,
    pub b: f64,
    pub gmin: f64,
    pub gmax: f64,
    pub ramp_dn: f64,
    pub ramp_up: f64,
    #[serde(default)]
    pub wind: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Load {
    pub bus: usize,
    pub beta: f64,
    /// Demand cap per period; a shorter list is repeated (see [`NetworkCase::demand_at`]).
    pub demand: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCase {
    #[serde(default)]
    pub name: String,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    pub loads: Vec<Load>,
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Case(msg()))
    }
}

impl NetworkCase {
    pub fn from_json(s: &str) -> Result<Self> {
        let case: Self = serde_json::from_str(s).map_err(|e| Error::Case(e.to_string()))?;
        case.validate()?;
        Ok(case)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// 30 buses, 41 lines capped at 50 MW, four thermal units and two wind
    /// units, 21 loads.
    pub fn ieee30() -> Self {
        Self::from_json(include_str!("../../data/ieee30.json")).expect("bundled case is valid")
    }

    /// Small meshed network with two thermal and two wind units.
    pub fn five_bus() -> Self {
        Self::from_json(include_str!("../../data/five_bus.json")).expect("bundled case is valid")
    }

    /// Position of each bus id in `buses`.
    pub fn bus_index(&self) -> BTreeMap<usize, usize> {
        self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect()
    }

    /// Index into `buses` of the lowest-numbered bus.
    pub fn reference_bus(&self) -> usize {
        self.buses
            .iter()
            .enumerate()
            .min_by_key(|(_, b)| b.id)
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    pub fn wind_generators(&self) -> Vec<usize> {
        (0..self.generators.len()).filter(|&i| self.generators[i].wind).collect()
    }

    /// Demand cap of load `k` in 0-based period `t`. Lists of length one are
    /// constant; shorter lists are cycled.
    pub fn demand_at(&self, k: usize, t: usize) -> f64 {
        let d = &self.loads[k].demand;
        d[t % d.len()]
    }

    /// Checks that every load's demand list fits `periods`: a single value,
    /// one value per period, or a divisor of `periods` that is repeated.
    pub fn check_periods(&self, periods: usize) -> Result<()> {
        for (k, l) in self.loads.iter().enumerate() {
            let n = l.demand.len();
            check(n == 1 || n == periods || (n < periods && periods % n == 0), || {
                format!("load {k} has {n} demand values, which does not fit {periods} periods")
            })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        check(!self.buses.is_empty(), || "no buses".into())?;
        let index = self.bus_index();
        check(index.len() == self.buses.len(), || "duplicate bus id".into())?;
        for b in &self.buses {
            check(b.v > 0.0 && b.v.is_finite(), || format!("bus {} has invalid V {}", b.id, b.v))?;
        }
        let known = |id: usize, what: &str| check(index.contains_key(&id), || format!("{what} refers to unknown bus {id}"));
        for (k, l) in self.lines.iter().enumerate() {
            known(l.from, "line")?;
            known(l.to, "line")?;
            check(l.from != l.to, || format!("line {k} is a self-loop"))?;
            check(l.x > 0.0 && l.x.is_finite(), || format!("line {k} has X = {}", l.x))?;
            check(l.fmin <= l.fmax, || format!("line {k} has fmin > fmax"))?;
        }
        for (k, g) in self.generators.iter().enumerate() {
            known(g.bus, "generator")?;
            check(g.a >= 0.0 && g.a.is_finite() && g.b.is_finite(), || format!("generator {k} cost is not convex"))?;
            check(g.gmin <= g.gmax, || format!("generator {k} has gmin > gmax"))?;
            check(g.ramp_dn <= 0.0 && 0.0 <= g.ramp_up, || format!("generator {k} ramp limits must bracket 0"))?;
        }
        for (k, l) in self.loads.iter().enumerate() {
            known(l.bus, "load")?;
            check(l.beta.is_finite(), || format!("load {k} bid is not finite"))?;
            check(!l.demand.is_empty(), || format!("load {k} has no demand values"))?;
            check(l.demand.iter().all(|d| *d >= 0.0 && d.is_finite()), || format!("load {k} has negative demand"))?;
        }
        self.check_connected()
    }

    fn check_connected(&self) -> Result<()> {
        let index = self.bus_index();
        let n = self.buses.len();
        let mut adj = vec![Vec::new(); n];
        for l in &self.lines {
            let (i, j) = (index[&l.from], index[&l.to]);
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            None => Ok(()),
            Some(i) => Err(Error::Case(format!("bus {} is not connected to bus {}", self.buses[i].id, self.buses[0].id))),
        }
    }
}
