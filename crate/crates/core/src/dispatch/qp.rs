//! Convex QP with a diagonal Hessian, affine equalities and box bounds,
//! solved by a primal-dual interior-point method (Mehrotra
//! predictor-corrector) on a dense, equilibrated KKT system.
//!
//! Sign convention: the Lagrangian is `½x'Qx + c'x − y'(Ax − b) − z_l'(x − l)
//! − z_u'(u − x)`, so `y` is the marginal objective change per unit of `b`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QpInstance {
    /// Diagonal of `Q`, all entries ≥ 0.
    pub quad: Vec<f64>,
    pub lin: Vec<f64>,
    /// Sparse equality rows `(column, coefficient)`.
    pub rows: Vec<Vec<(usize, f64)>>,
    pub rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub names: Vec<String>,
}

impl QpInstance {
    pub fn new() -> Self {
        Self {
            quad: Vec::new(),
            lin: Vec::new(),
            rows: Vec::new(),
            rhs: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            names: Vec::new(),
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, quad: f64, lin: f64, lower: f64, upper: f64) -> usize {
        self.quad.push(quad);
        self.lin.push(lin);
        self.lower.push(lower);
        self.upper.push(upper);
        self.names.push(name.into());
        self.quad.len() - 1
    }

    pub fn add_row(&mut self, entries: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.rows.push(entries);
        self.rhs.push(rhs);
        self.rows.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.quad.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.quad)
            .zip(&self.lin)
            .map(|((x, q), c)| 0.5 * q * x * x + c * x)
            .sum()
    }

    fn residual_eq(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(row, b)| row.iter().map(|&(j, a)| a * x[j]).sum::<f64>() - b)
            .collect()
    }

    /// `Qx + c − A'y`.
    fn reduced_cost(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = (0..self.num_vars()).map(|j| self.quad[j] * x[j] + self.lin[j]).collect();
        for (row, yi) in self.rows.iter().zip(y) {
            for &(j, a) in row {
                g[j] -= a * yi;
            }
        }
        g
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.quad.iter().any(|&q| !(q >= 0.0) || !q.is_finite()) {
            return Err(Error::Config("Hessian diagonal must be finite and non-negative".into()));
        }
        if self.lin.iter().chain(&self.rhs).any(|v| !v.is_finite()) {
            return Err(Error::Config("non-finite cost or right-hand side".into()));
        }
        if self.rows.iter().flatten().any(|&(j, a)| j >= n || !a.is_finite()) {
            return Err(Error::Config("constraint entry out of range".into()));
        }
        if self.lower.iter().chain(&self.upper).any(|v| v.is_nan()) {
            return Err(Error::Config("NaN bound".into()));
        }
        Ok(())
    }
}

impl Default for QpInstance {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QpOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum QpStatus {
    Optimal,
}

/// Absolute KKT residuals in the original (unscaled) problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktResiduals {
    pub primal: f64,
    pub stationarity: f64,
    pub complementarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QpSolution {
    pub x: Vec<f64>,
    /// One dual per equality row.
    pub y: Vec<f64>,
    pub z_lower: Vec<f64>,
    pub z_upper: Vec<f64>,
    pub objective: f64,
    pub status: QpStatus,
    pub kkt: KktResiduals,
    /// Largest of the three residuals, each divided by `1 + scale`.
    pub kkt_residual: f64,
    pub iterations: usize,
}

pub fn kkt_residuals(q: &QpInstance, x: &[f64], y: &[f64], zl: &[f64], zu: &[f64]) -> (KktResiduals, f64) {
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let mut primal = inf(&q.residual_eq(x));
    let mut comp = 0.0f64;
    let mut stat = 0.0f64;
    let g = q.reduced_cost(x, y);
    for j in 0..q.num_vars() {
        primal = primal.max(q.lower[j] - x[j]).max(x[j] - q.upper[j]);
        if q.lower[j].is_finite() {
            comp = comp.max(((x[j] - q.lower[j]) * zl[j]).abs());
        }
        if q.upper[j].is_finite() {
            comp = comp.max(((q.upper[j] - x[j]) * zu[j]).abs());
        }
        comp = comp.max(-zl[j]).max(-zu[j]);
        stat = stat.max((g[j] - zl[j] + zu[j]).abs());
    }
    let scale_p = 1.0 + inf(&q.rhs).max(inf(x));
    let scale_s = 1.0 + inf(&q.lin).max(inf(y));
    let scale_c = 1.0 + q.objective(x).abs();
    let k = KktResiduals { primal, stationarity: stat, complementarity: comp };
    let rel = (primal / scale_p).max(stat / scale_s).max(comp / scale_c);
    (k, rel)
}

/// Reduced problem on the free (non-fixed) variables with Ruiz scaling.
struct Scaled {
    q: Vec<f64>,
    c: Vec<f64>,
    a: DMatrix<f64>,
    b: Vec<f64>,
    l: Vec<f64>,
    u: Vec<f64>,
    col: Vec<f64>,
    row: Vec<f64>,
    cost: f64,
}

fn equilibrate(q: &QpInstance, keep: &[usize], b: Vec<f64>) -> Scaled {
    let n = keep.len();
    let m = q.num_rows();
    let mut pos = vec![usize::MAX; q.num_vars()];
    for (k, &j) in keep.iter().enumerate() {
        pos[j] = k;
    }
    let mut a = DMatrix::<f64>::zeros(m, n);
    for (i, row) in q.rows.iter().enumerate() {
        for &(j, v) in row {
            if pos[j] != usize::MAX {
                a[(i, pos[j])] += v;
            }
        }
    }
    let mut col = vec![1.0; n];
    let mut rowsc = vec![1.0; m];
    let mut qd: Vec<f64> = keep.iter().map(|&j| q.quad[j]).collect();
    for _ in 0..10 {
        for i in 0..m {
            let nrm = (0..n).fold(0.0f64, |s, j| s.max(a[(i, j)].abs()));
            if nrm > 0.0 {
                let f = 1.0 / nrm.sqrt();
                rowsc[i] *= f;
                for j in 0..n {
                    a[(i, j)] *= f;
                }
            }
        }
        for j in 0..n {
            let nrm = (0..m).fold(qd[j].abs(), |s, i| s.max(a[(i, j)].abs()));
            if nrm > 0.0 {
                let f = 1.0 / nrm.sqrt();
                col[j] *= f;
                qd[j] *= f * f;
                for i in 0..m {
                    a[(i, j)] *= f;
                }
            }
        }
    }
    let c: Vec<f64> = keep.iter().enumerate().map(|(k, &j)| q.lin[j] * col[k]).collect();
    let cmax = c.iter().chain(&qd).fold(0.0f64, |s, v| s.max(v.abs()));
    let cost = if cmax > 0.0 { 1.0 / cmax.max(1e-6) } else { 1.0 };
    Scaled {
        q: qd.iter().map(|v| v * cost).collect(),
        c: c.iter().map(|v| v * cost).collect(),
        b: b.iter().zip(&rowsc).map(|(b, r)| b * r).collect(),
        l: keep.iter().enumerate().map(|(k, &j)| q.lower[j] / col[k]).collect(),
        u: keep.iter().enumerate().map(|(k, &j)| q.upper[j] / col[k]).collect(),
        a,
        col,
        row: rowsc,
        cost,
    }
}

struct IpmOutput {
    x: Vec<f64>,
    y: Vec<f64>,
    zl: Vec<f64>,
    zu: Vec<f64>,
    iterations: usize,
    converged: bool,
    best_residual: f64,
}

const REG: f64 = 1e-10;

fn max_step(v: &[f64], dv: &[f64], mask: &[bool], sign: f64) -> f64 {
    let mut alpha = 1.0f64;
    for ((&v, &d), &m) in v.iter().zip(dv).zip(mask) {
        let d = sign * d;
        if m && d < 0.0 {
            alpha = alpha.min(-v / d);
        }
    }
    alpha
}

fn ipm(p: &Scaled, opts: &QpOptions) -> Result<IpmOutput> {
    let n = p.q.len();
    let m = p.b.len();
    let has_l: Vec<bool> = p.l.iter().map(|v| v.is_finite()).collect();
    let has_u: Vec<bool> = p.u.iter().map(|v| v.is_finite()).collect();
    let nb = has_l.iter().chain(&has_u).filter(|&&b| b).count();

    let mut x: Vec<f64> = (0..n)
        .map(|j| match (has_l[j], has_u[j]) {
            (true, true) => 0.5 * (p.l[j] + p.u[j]),
            (true, false) => p.l[j] + 1.0,
            (false, true) => p.u[j] - 1.0,
            (false, false) => 0.0,
        })
        .collect();
    let mut y = vec![0.0; m];
    let mut zl: Vec<f64> = has_l.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let mut zu: Vec<f64> = has_u.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();

    let bnorm = p.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let cnorm = p.c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let at = p.a.transpose();
    let mut best = f64::INFINITY;

    for iter in 0..opts.max_iter {
        let xv = DVector::from_column_slice(&x);
        let yv = DVector::from_column_slice(&y);
        let rp: Vec<f64> = (&p.a * &xv).iter().zip(&p.b).map(|(ax, b)| ax - b).collect();
        let aty = &at * &yv;
        let rd: Vec<f64> = (0..n).map(|j| p.q[j] * x[j] + p.c[j] - aty[j] - zl[j] + zu[j]).collect();
        let sl: Vec<f64> = (0..n).map(|j| if has_l[j] { x[j] - p.l[j] } else { 1.0 }).collect();
        let su: Vec<f64> = (0..n).map(|j| if has_u[j] { p.u[j] - x[j] } else { 1.0 }).collect();
        let gap: f64 = (0..n).map(|j| sl[j] * zl[j] + su[j] * zu[j]).sum();
        let mu = if nb > 0 { gap / nb as f64 } else { 0.0 };
        let rp_n = rp.iter().fold(0.0f64, |a, v| a.max(v.abs())) / (1.0 + bnorm);
        let rd_n = rd.iter().fold(0.0f64, |a, v| a.max(v.abs())) / (1.0 + cnorm);
        let obj: f64 = (0..n).map(|j| 0.5 * p.q[j] * x[j] * x[j] + p.c[j] * x[j]).sum();
        let mu_n = mu / (1.0 + obj.abs());
        let res = if rp_n.is_nan() || rd_n.is_nan() || mu_n.is_nan() {
            f64::NAN
        } else {
            rp_n.max(rd_n).max(mu_n)
        };
        if res.is_nan() {
            break;
        }
        best = best.min(res);
        if res <= opts.tol {
            return Ok(IpmOutput { x, y, zl, zu, iterations: iter, converged: true, best_residual: res });
        }
        if !res.is_finite() || y.iter().any(|v| v.abs() > 1e14) || x.iter().any(|v| v.abs() > 1e14) {
            break;
        }

        let d: Vec<f64> = (0..n).map(|j| zl[j] / sl[j] + zu[j] / su[j]).collect();
        let dim = n + m;
        let mut k = DMatrix::<f64>::zeros(dim, dim);
        for j in 0..n {
            k[(j, j)] = p.q[j] + d[j] + REG;
        }
        for i in 0..m {
            for j in 0..n {
                let a = p.a[(i, j)];
                if a != 0.0 {
                    k[(n + i, j)] = a;
                    k[(j, n + i)] = a;
                }
            }
            k[(n + i, n + i)] = -REG;
        }
        let lu = k.clone().lu();
        let mut kexact = k;
        for j in 0..n {
            kexact[(j, j)] -= REG;
        }
        for i in 0..m {
            kexact[(n + i, n + i)] = 0.0;
        }
        let solve = |rho_l: &[f64], rho_u: &[f64]| -> Option<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
            let mut rhs = DVector::zeros(dim);
            for j in 0..n {
                let mut v = -rd[j];
                if has_l[j] {
                    v += rho_l[j] / sl[j];
                }
                if has_u[j] {
                    v -= rho_u[j] / su[j];
                }
                rhs[j] = v;
            }
            for i in 0..m {
                rhs[n + i] = -rp[i];
            }
            let mut sol = lu.solve(&rhs)?;
            for _ in 0..2 {
                let r = &rhs - &kexact * &sol;
                sol += lu.solve(&r)?;
            }
            let dx: Vec<f64> = sol.rows(0, n).iter().copied().collect();
            let dy: Vec<f64> = sol.rows(n, m).iter().map(|w| -w).collect();
            let dzl: Vec<f64> = (0..n)
                .map(|j| if has_l[j] { (rho_l[j] - zl[j] * dx[j]) / sl[j] } else { 0.0 })
                .collect();
            let dzu: Vec<f64> = (0..n)
                .map(|j| if has_u[j] { (rho_u[j] + zu[j] * dx[j]) / su[j] } else { 0.0 })
                .collect();
            Some((dx, dy, dzl, dzu))
        };

        let rho_l: Vec<f64> = (0..n).map(|j| -sl[j] * zl[j]).collect();
        let rho_u: Vec<f64> = (0..n).map(|j| -su[j] * zu[j]).collect();
        let Some((dx, _, dzl, dzu)) = solve(&rho_l, &rho_u) else { break };
        let ap = max_step(&sl, &dx, &has_l, 1.0).min(max_step(&su, &dx, &has_u, -1.0));
        let ad = max_step(&zl, &dzl, &has_l, 1.0).min(max_step(&zu, &dzu, &has_u, 1.0));
        let mu_aff = if nb > 0 {
            (0..n)
                .map(|j| {
                    let mut s = 0.0;
                    if has_l[j] {
                        s += (sl[j] + ap * dx[j]) * (zl[j] + ad * dzl[j]);
                    }
                    if has_u[j] {
                        s += (su[j] - ap * dx[j]) * (zu[j] + ad * dzu[j]);
                    }
                    s
                })
                .sum::<f64>()
                / nb as f64
        } else {
            0.0
        };
        let sigma = if mu > 0.0 { (mu_aff / mu).powi(3).min(1.0) } else { 0.0 };

        let rho_l: Vec<f64> = (0..n).map(|j| sigma * mu - sl[j] * zl[j] - dx[j] * dzl[j]).collect();
        let rho_u: Vec<f64> = (0..n).map(|j| sigma * mu - su[j] * zu[j] + dx[j] * dzu[j]).collect();
        let Some((dx, dy, dzl, dzu)) = solve(&rho_l, &rho_u) else { break };
        let ap = max_step(&sl, &dx, &has_l, 1.0).min(max_step(&su, &dx, &has_u, -1.0));
        let ad = max_step(&zl, &dzl, &has_l, 1.0).min(max_step(&zu, &dzu, &has_u, 1.0));
        let alpha = (0.995 * ap.min(ad)).min(1.0);
        for j in 0..n {
            x[j] += alpha * dx[j];
            zl[j] += alpha * dzl[j];
            zu[j] += alpha * dzu[j];
        }
        for i in 0..m {
            y[i] += alpha * dy[i];
        }
    }
    Ok(IpmOutput { x, y, zl, zu, iterations: opts.max_iter, converged: false, best_residual: best })
}

fn solve_reduced(q: &QpInstance, opts: &QpOptions) -> Result<(Vec<f64>, Vec<f64>, IpmOutput)> {
    let n = q.num_vars();
    let fixed: Vec<bool> = (0..n)
        .map(|j| q.lower[j].is_finite() && q.upper[j] - q.lower[j] <= 1e-12 * (1.0 + q.lower[j].abs()))
        .collect();
    let mut x = vec![0.0; n];
    let mut b = q.rhs.clone();
    for j in (0..n).filter(|&j| fixed[j]) {
        x[j] = q.lower[j];
    }
    for (row, bi) in q.rows.iter().zip(b.iter_mut()) {
        for &(j, a) in row {
            if fixed[j] {
                *bi -= a * x[j];
            }
        }
    }
    let keep: Vec<usize> = (0..n).filter(|&j| !fixed[j]).collect();
    let p = equilibrate(q, &keep, b);
    let out = ipm(&p, opts)?;
    for (k, &j) in keep.iter().enumerate() {
        x[j] = out.x[k] * p.col[k];
        // keep the reported point inside its box despite rounding
        x[j] = x[j].clamp(q.lower[j], q.upper[j]);
    }
    let y: Vec<f64> = out.y.iter().zip(&p.row).map(|(y, r)| y * r / p.cost).collect();
    let mut zl = vec![0.0; n];
    let mut zu = vec![0.0; n];
    for (k, &j) in keep.iter().enumerate() {
        zl[j] = out.zl[k] / (p.cost * p.col[k]);
        zu[j] = out.zu[k] / (p.cost * p.col[k]);
    }
    // a fixed variable's bound multipliers absorb its reduced cost
    let g = q.reduced_cost(&x, &y);
    for j in (0..n).filter(|&j| fixed[j]) {
        if g[j] >= 0.0 {
            zl[j] = g[j];
        } else {
            zu[j] = -g[j];
        }
    }
    let out = IpmOutput { zl: zl.clone(), zu: zu.clone(), ..out };
    Ok((x, y, out))
}

/// Minimum total violation `Σ|Ax − b|` over the box, via an elastic LP.
fn phase_one(q: &QpInstance, opts: &QpOptions) -> Result<Option<f64>> {
    let mut lp = QpInstance::new();
    for j in 0..q.num_vars() {
        lp.add_var(q.names[j].clone(), 0.0, 0.0, q.lower[j], q.upper[j]);
    }
    for (row, &b) in q.rows.iter().zip(&q.rhs) {
        let p = lp.add_var("p", 0.0, 1.0, 0.0, f64::INFINITY);
        let m = lp.add_var("n", 0.0, 1.0, 0.0, f64::INFINITY);
        let mut r = row.clone();
        r.push((p, 1.0));
        r.push((m, -1.0));
        lp.add_row(r, b);
    }
    let (x, _, out) = solve_reduced(&lp, opts)?;
    Ok(out.converged.then(|| lp.objective(&x)))
}

/// Solves the instance to relative KKT tolerance `opts.tol`.
pub fn solve_qp(q: &QpInstance, opts: &QpOptions) -> Result<QpSolution> {
    q.validate()?;
    if (0..q.num_vars()).any(|j| q.lower[j] > q.upper[j]) {
        return Err(Error::Infeasible);
    }
    let (x, y, out) = solve_reduced(q, opts)?;
    let (kkt, rel) = kkt_residuals(q, &x, &y, &out.zl, &out.zu);
    if out.converged && rel <= opts.tol.max(1e-12) * 1e3 {
        return Ok(QpSolution {
            objective: q.objective(&x),
            x,
            y,
            z_lower: out.zl,
            z_upper: out.zu,
            status: QpStatus::Optimal,
            kkt,
            kkt_residual: rel,
            iterations: out.iterations,
        });
    }
    let scale = 1.0 + q.rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    match phase_one(q, opts)? {
        Some(v) if v > 1e-6 * scale => Err(Error::Infeasible),
        _ => Err(Error::IterationLimit(out.best_residual.min(rel))),
    }
}
