#![allow(dead_code)]

use nonstat_core::dispatch::{Bus, Generator, Line, Load, NetworkCase};
use nonstat_core::MultivariateSeries;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Bivariate white noise, identity covariance before `brk` and
/// `scale2 · I` from `brk` on.
pub fn bivariate_break(t: usize, brk: usize, scale2: f64, seed: u64) -> MultivariateSeries {
    let mut r = rng(seed);
    let mut v = Vec::with_capacity(2 * t);
    for i in 0..t {
        let s = if i >= brk { scale2.sqrt() } else { 1.0 };
        v.push(s * gauss(&mut r));
        v.push(s * gauss(&mut r));
    }
    MultivariateSeries::new(t, 2, v, None).unwrap()
}

pub fn white(t: usize, l: usize, seed: u64) -> MultivariateSeries {
    let mut r = rng(seed);
    let v = (0..t * l).map(|_| gauss(&mut r)).collect();
    MultivariateSeries::new(t, l, v, None).unwrap()
}

pub fn ar1(n: usize, phi: f64, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let mut x = 0.0;
    let mut out = Vec::with_capacity(n);
    for t in 0..n + 200 {
        x = phi * x + gauss(&mut r);
        if t >= 200 {
            out.push(x);
        }
    }
    out
}

/// `x_t = W x_{t−1} + e_t` with Gaussian `e_t`, `W` row-major.
pub fn var1(w: &[f64], l: usize, n: usize, seed: u64) -> MultivariateSeries {
    let mut r = rng(seed);
    let mut prev = vec![0.0; l];
    let mut v = Vec::with_capacity(n * l);
    for t in 0..n + 200 {
        let next: Vec<f64> = (0..l)
            .map(|a| (0..l).map(|b| w[a * l + b] * prev[b]).sum::<f64>() + gauss(&mut r))
            .collect();
        if t >= 200 {
            v.extend_from_slice(&next);
        }
        prev = next;
    }
    MultivariateSeries::new(n, l, v, None).unwrap()
}

/// Two wind-speed columns with regime changes at `breaks`: each regime has
/// its own mean and AR(1) innovation scale, shared across columns with
/// correlated shocks.
pub fn piecewise_wind(t: usize, breaks: &[usize], seed: u64) -> MultivariateSeries {
    let regimes = [(6.0, 0.4), (10.0, 2.5), (6.5, 0.4), (11.0, 2.5)];
    let mut r = rng(seed);
    let mut dev = [0.0f64; 2];
    let mut v = Vec::with_capacity(2 * t);
    for i in 0..t {
        let k = breaks.iter().filter(|&&b| i >= b).count();
        let (mean, sd) = regimes[k % regimes.len()];
        let z1 = gauss(&mut r);
        let z2 = 0.6 * z1 + 0.8 * gauss(&mut r);
        dev[0] = 0.5 * dev[0] + sd * z1;
        dev[1] = 0.5 * dev[1] + sd * z2;
        v.push((mean + dev[0]).max(0.0));
        v.push((mean + dev[1]).max(0.0));
    }
    MultivariateSeries::new(t, 2, v, None).unwrap()
}

/// Cheap unit at bus 1 behind a single line, expensive unit and the load at
/// bus 2.
pub struct TwoBus {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
    pub beta: f64,
    pub demand: f64,
    pub fmax: f64,
}

impl TwoBus {
    pub fn congested() -> Self {
        Self { a1: 0.01, b1: 1.0, a2: 0.05, b2: 5.0, beta: 30.0, demand: 20.0, fmax: 1.0 }
    }

    pub fn uncongested() -> Self {
        Self { fmax: 500.0, ..Self::congested() }
    }

    pub fn case(&self) -> NetworkCase {
        let gen = |bus, a, b| Generator { bus, a, b, gmin: 0.0, gmax: 100.0, ramp_dn: -100.0, ramp_up: 100.0, wind: false };
        NetworkCase {
            name: "two".into(),
            buses: vec![Bus { id: 1, v: 1.0 }, Bus { id: 2, v: 1.0 }],
            lines: vec![Line { from: 1, to: 2, x: 0.1, fmin: -self.fmax, fmax: self.fmax }],
            generators: vec![gen(1, self.a1, self.b1), gen(2, self.a2, self.b2)],
            loads: vec![Load { bus: 2, beta: self.beta, demand: vec![self.demand] }],
        }
    }

    /// Optimal value and `g1` with `e1`, `e2` MW of fixed extra load at each
    /// bus: a fine grid over the line flow, with the bus-2 problem solved in
    /// closed form for each flow.
    pub fn value(&self, e1: f64, e2: f64) -> (f64, f64) {
        let steps = 40_000;
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..=steps {
            let f = -self.fmax + 2.0 * self.fmax * k as f64 / steps as f64;
            let g1 = f + e1;
            if !(0.0..=100.0).contains(&g1) {
                continue;
            }
            let lo = 0.0f64.max(f - e2);
            let hi = self.demand.min(100.0 + f - e2);
            if lo > hi {
                continue;
            }
            let g2_free = (self.beta - self.b2) / (2.0 * self.a2);
            let d = (g2_free - e2 + f).clamp(lo, hi);
            let g2 = d + e2 - f;
            let obj = self.a1 * g1 * g1 + self.b1 * g1 + self.a2 * g2 * g2 + self.b2 * g2 - self.beta * d;
            if obj < best.0 {
                best = (obj, g1);
            }
        }
        best
    }

    /// Central difference of the optimal value in the bus's fixed load.
    pub fn lmp(&self, bus: usize) -> f64 {
        let h = 1e-3;
        let (p, m) = if bus == 0 { ((h, 0.0), (-h, 0.0)) } else { ((0.0, h), (0.0, -h)) };
        (self.value(p.0, p.1).0 - self.value(m.0, m.1).0) / (2.0 * h)
    }
}
