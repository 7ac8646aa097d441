//! Log-barrier interior-point solver for the convex MM subproblems.
//!
//! Every subproblem maximizes one scalar variable subject to smooth constraints
//! built from block quadratics, linear terms and logarithms of affine
//! functions. Complex variables are stored as interleaved (re, im) pairs.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::io::Write as _;
use std::path::Path;

/// `z^T P z` with `z = x[offset .. offset + P.nrows()]` and symmetric `P`.
#[derive(Debug, Clone)]
pub struct QuadBlock {
    pub offset: usize,
    pub mat: DMatrix<f64>,
}

/// `coef * ln(a^T x + b)`.
#[derive(Debug, Clone)]
pub struct LogTerm {
    pub coef: f64,
    pub a: Vec<(usize, f64)>,
    pub b: f64,
}

impl LogTerm {
    fn arg(&self, x: &[f64]) -> f64 {
        self.a.iter().map(|&(i, v)| v * x[i]).sum::<f64>() + self.b
    }
}

/// `coef * ||z - center||^2` with `z = x[offset .. offset + center.len()]`.
/// Kept centered so large curvature around a distant point does not cancel
/// against the constant.
#[derive(Debug, Clone)]
pub struct ProxTerm {
    pub offset: usize,
    pub coef: f64,
    pub center: DVector<f64>,
}

impl ProxTerm {
    fn diff(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(&x[self.offset..self.offset + self.center.len()]) - &self.center
    }
}

/// Sum of block quadratics, centered isotropic quadratics, a sparse linear
/// part, a constant and log terms.
#[derive(Debug, Clone, Default)]
pub struct SmoothFn {
    pub quad: Vec<QuadBlock>,
    pub prox: Vec<ProxTerm>,
    pub lin: Vec<(usize, f64)>,
    pub constant: f64,
    pub logs: Vec<LogTerm>,
}

impl SmoothFn {
    pub fn linear(lin: Vec<(usize, f64)>, constant: f64) -> Self {
        SmoothFn {
            lin,
            constant,
            ..Default::default()
        }
    }

    /// Value, or `None` outside the domain of a log term.
    pub fn value(&self, x: &[f64]) -> Option<f64> {
        let mut v = self.constant;
        for &(i, c) in &self.lin {
            v += c * x[i];
        }
        for q in &self.quad {
            let d = q.mat.nrows();
            let z = DVector::from_column_slice(&x[q.offset..q.offset + d]);
            v += z.dot(&(&q.mat * &z));
        }
        for p in &self.prox {
            v += p.coef * p.diff(x).norm_squared();
        }
        for l in &self.logs {
            let a = l.arg(x);
            if !(a > 0.0) {
                return None;
            }
            v += l.coef * a.ln();
        }
        Some(v)
    }

    /// Dense gradient.
    pub fn gradient(&self, x: &[f64]) -> DVector<f64> {
        let mut g = DVector::zeros(x.len());
        for &(i, c) in &self.lin {
            g[i] += c;
        }
        for q in &self.quad {
            let d = q.mat.nrows();
            let z = DVector::from_column_slice(&x[q.offset..q.offset + d]);
            let pz = &q.mat * z * 2.0;
            for r in 0..d {
                g[q.offset + r] += pz[r];
            }
        }
        for p in &self.prox {
            let dz = p.diff(x) * (2.0 * p.coef);
            for r in 0..dz.len() {
                g[p.offset + r] += dz[r];
            }
        }
        for l in &self.logs {
            let s = l.coef / l.arg(x);
            for &(i, v) in &l.a {
                g[i] += s * v;
            }
        }
        g
    }

    /// Adds `w * Hessian` into `h`.
    pub fn add_hessian(&self, x: &[f64], w: f64, h: &mut DMatrix<f64>) {
        for q in &self.quad {
            let d = q.mat.nrows();
            let mut view = h.view_mut((q.offset, q.offset), (d, d));
            view += &q.mat * (2.0 * w);
        }
        for p in &self.prox {
            for r in 0..p.center.len() {
                h[(p.offset + r, p.offset + r)] += 2.0 * w * p.coef;
            }
        }
        for l in &self.logs {
            let a = l.arg(x);
            let s = -w * l.coef / (a * a);
            for &(i, vi) in &l.a {
                for &(j, vj) in &l.a {
                    h[(i, j)] += s * vi * vj;
                }
            }
        }
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for q in &mut self.quad {
            q.mat *= s;
        }
        for p in &mut self.prox {
            p.coef *= s;
        }
        for l in &mut self.lin {
            l.1 *= s;
        }
        self.constant *= s;
        for l in &mut self.logs {
            l.coef *= s;
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sense {
    /// f(x) <= 0 with f convex.
    ConvexLe0,
    /// f(x) >= 0 with f concave.
    ConcaveGe0,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    pub f: SmoothFn,
    pub sense: Sense,
}

impl Constraint {
    pub fn le0(name: impl Into<String>, f: SmoothFn) -> Self {
        Constraint {
            name: name.into(),
            f,
            sense: Sense::ConvexLe0,
        }
    }

    pub fn ge0(name: impl Into<String>, f: SmoothFn) -> Self {
        Constraint {
            name: name.into(),
            f,
            sense: Sense::ConcaveGe0,
        }
    }

    /// g(x) in the normalized form g(x) <= 0.
    pub fn g(&self, x: &[f64]) -> Option<f64> {
        self.f.value(x).map(|v| match self.sense {
            Sense::ConvexLe0 => v,
            Sense::ConcaveGe0 => -v,
        })
    }

    fn sign(&self) -> f64 {
        match self.sense {
            Sense::ConvexLe0 => 1.0,
            Sense::ConcaveGe0 => -1.0,
        }
    }

    /// Slack (>= 0 when satisfied).
    pub fn slack(&self, x: &[f64]) -> f64 {
        self.g(x).map_or(f64::NEG_INFINITY, |g| -g)
    }
}

/// A named range of variables.
#[derive(Debug, Clone, Serialize)]
pub struct VarBlock {
    pub name: String,
    pub offset: usize,
    pub len: usize,
    pub complex: bool,
}

#[derive(Debug, Clone)]
pub struct ConvexSubproblem {
    pub n_vars: usize,
    /// Index of the scalar being maximized.
    pub objective: usize,
    pub constraints: Vec<Constraint>,
    pub blocks: Vec<VarBlock>,
}

impl ConvexSubproblem {
    pub fn new(n_vars: usize, objective: usize) -> Self {
        ConvexSubproblem {
            n_vars,
            objective,
            constraints: Vec::new(),
            blocks: Vec::new(),
        }
    }

    pub fn push(&mut self, c: Constraint) {
        self.constraints.push(c);
    }

    /// x[i] >= lb.
    pub fn add_lower_bound(&mut self, i: usize, lb: f64) {
        self.push(Constraint::ge0(
            format!("x{i}>={lb}"),
            SmoothFn::linear(vec![(i, 1.0)], -lb),
        ));
    }

    /// x[i] <= ub.
    pub fn add_upper_bound(&mut self, i: usize, ub: f64) {
        self.push(Constraint::le0(
            format!("x{i}<={ub}"),
            SmoothFn::linear(vec![(i, 1.0)], -ub),
        ));
    }

    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.g(x).unwrap_or(f64::INFINITY))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_strictly_feasible(&self, x: &[f64]) -> bool {
        self.constraints
            .iter()
            .all(|c| matches!(c.g(x), Some(g) if g < 0.0))
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolverSettings {
    pub mu: f64,
    pub tol: f64,
    pub tol_feas: f64,
    pub t0: f64,
    pub newton_tol: f64,
    pub max_newton_per_stage: usize,
    pub max_stages: usize,
    pub armijo: f64,
    pub shrink: f64,
    pub reg_start: f64,
    pub reg_max: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            mu: 10.0,
            tol: 1e-7,
            tol_feas: 1e-8,
            t0: 1.0,
            newton_tol: 1e-10,
            max_newton_per_stage: 100,
            max_stages: 60,
            armijo: 0.01,
            shrink: 0.5,
            reg_start: 1e-10,
            reg_max: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub stage: usize,
    pub newton_steps: usize,
    pub objective: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverReport {
    pub status: SolverStatus,
    pub objective: f64,
    pub x: Vec<f64>,
    pub iterations: usize,
    /// m / t at exit.
    pub gap: f64,
    pub slacks: Vec<f64>,
    pub trace: Vec<TraceRow>,
    pub message: String,
}

impl SolverReport {
    pub fn write_trace_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "stage,newton_steps,objective,gap")?;
        for r in &self.trace {
            writeln!(
                f,
                "{},{},{:e},{:e}",
                r.stage, r.newton_steps, r.objective, r.gap
            )?;
        }
        Ok(())
    }
}

/// Constraints seen by the barrier loop: the subproblem itself or its phase-I
/// augmentation with an extra slack variable.
trait BarrierView {
    fn n(&self) -> usize;
    fn m(&self) -> usize;
    fn objective_index(&self) -> usize;
    /// +1 to maximize the objective variable, -1 to minimize it.
    fn objective_sign(&self) -> f64 {
        1.0
    }
    /// All g_i(x), or None if any is outside its domain.
    fn g_all(&self, x: &[f64]) -> Option<Vec<f64>>;
    /// Adds sum_i w_i * (grad g_i) to `grad` and the matching barrier Hessian
    /// contributions to `h`, with w_i = 1 / (-g_i).
    fn accumulate(&self, x: &[f64], g: &[f64], grad: &mut DVector<f64>, h: &mut DMatrix<f64>);
}

struct Plain<'a>(&'a ConvexSubproblem);

impl BarrierView for Plain<'_> {
    fn n(&self) -> usize {
        self.0.n_vars
    }
    fn m(&self) -> usize {
        self.0.constraints.len()
    }
    fn objective_index(&self) -> usize {
        self.0.objective
    }
    fn g_all(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.0.constraints.iter().map(|c| c.g(x)).collect()
    }
    fn accumulate(&self, x: &[f64], g: &[f64], grad: &mut DVector<f64>, h: &mut DMatrix<f64>) {
        for (c, &gi) in self.0.constraints.iter().zip(g) {
            let w = 1.0 / (-gi);
            let dg = c.f.gradient(x) * c.sign();
            *grad += &dg * w;
            h.ger(w * w, &dg, &dg, 1.0);
            c.f.add_hessian(x, w * c.sign(), h);
        }
    }
}

/// Phase I: variables (x, s), maximize -s subject to g_i(x) - s <= 0.
/// Phase-I view: minimizes a common shift `s` of all constraints, with an
/// extra ball constraint around the start so that free directions (such as the
/// epigraph variable) cannot run off to infinity.
struct PhaseOne<'a> {
    sp: &'a ConvexSubproblem,
    center: Vec<f64>,
    radius2: f64,
}

impl PhaseOne<'_> {
    fn ball(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.center)
            .map(|(a, c)| (a - c) * (a - c))
            .sum::<f64>()
            - self.radius2
    }
}

impl BarrierView for PhaseOne<'_> {
    fn n(&self) -> usize {
        self.sp.n_vars + 1
    }
    fn m(&self) -> usize {
        self.sp.constraints.len() + 1
    }
    fn objective_index(&self) -> usize {
        self.sp.n_vars
    }
    fn objective_sign(&self) -> f64 {
        -1.0
    }
    fn g_all(&self, x: &[f64]) -> Option<Vec<f64>> {
        let n = self.sp.n_vars;
        let s = x[n];
        let mut g: Vec<f64> = self
            .sp
            .constraints
            .iter()
            .map(|c| c.g(&x[..n]).map(|g| g - s))
            .collect::<Option<_>>()?;
        g.push(self.ball(&x[..n]));
        Some(g)
    }
    fn accumulate(&self, x: &[f64], g: &[f64], grad: &mut DVector<f64>, h: &mut DMatrix<f64>) {
        let n = self.sp.n_vars;
        let xs = &x[..n];
        let mut hx = DMatrix::zeros(n, n);
        for (c, &gi) in self.sp.constraints.iter().zip(g) {
            let w = 1.0 / (-gi);
            let mut dg = DVector::zeros(n + 1);
            dg.rows_mut(0, n).copy_from(&(c.f.gradient(xs) * c.sign()));
            dg[n] = -1.0;
            *grad += &dg * w;
            h.ger(w * w, &dg, &dg, 1.0);
            c.f.add_hessian(xs, w * c.sign(), &mut hx);
        }
        let w = 1.0 / (-g[g.len() - 1]);
        let mut dg = DVector::zeros(n + 1);
        for i in 0..n {
            dg[i] = 2.0 * (xs[i] - self.center[i]);
            hx[(i, i)] += 2.0 * w;
        }
        *grad += &dg * w;
        h.ger(w * w, &dg, &dg, 1.0);
        let mut top = h.view_mut((0, 0), (n, n));
        top += &hx;
    }
}

fn barrier_value(t: f64, obj: f64, g: &[f64]) -> f64 {
    -t * obj - g.iter().map(|gi| (-gi).ln()).sum::<f64>()
}

struct LoopResult {
    x: Vec<f64>,
    status: SolverStatus,
    iterations: usize,
    gap: f64,
    trace: Vec<TraceRow>,
    message: String,
}

const STALL_DECREMENT: f64 = 1e-6;

/// Path-following loop. `stop_early` is checked after every Newton step.
fn barrier_loop(
    view: &dyn BarrierView,
    x0: Vec<f64>,
    t0: f64,
    set: &SolverSettings,
    stop_early: &dyn Fn(&[f64]) -> bool,
) -> LoopResult {
    let n = view.n();
    let m = view.m().max(1) as f64;
    let oi = view.objective_index();
    let sign = view.objective_sign();
    let mut x = x0;
    let mut t = t0;
    let mut iterations = 0;
    let mut trace = Vec::new();
    for stage in 0..set.max_stages {
        let mut steps = 0;
        loop {
            let g = match view.g_all(&x) {
                Some(g) if g.iter().all(|v| *v < 0.0) => g,
                _ => {
                    return LoopResult {
                        x,
                        status: SolverStatus::MaxIter,
                        iterations,
                        gap: m / t,
                        trace,
                        message: "iterate left the strict interior".into(),
                    }
                }
            };
            let mut grad = DVector::zeros(n);
            grad[oi] = -t * sign;
            let mut h = DMatrix::zeros(n, n);
            view.accumulate(&x, &g, &mut grad, &mut h);
            let Some(dx) = newton_direction(&h, &grad, set) else {
                return LoopResult {
                    x,
                    status: SolverStatus::MaxIter,
                    iterations,
                    gap: m / t,
                    trace,
                    message: "Newton system not positive definite after regularization".into(),
                };
            };
            let slope = grad.dot(&dx);
            let decrement = -slope / 2.0;
            let f0 = barrier_value(t, sign * x[oi], &g);
            // Below this the Armijo test only sees rounding in f0.
            let floor = set.newton_tol.max(1e-13 * f0.abs());
            if !(decrement > floor) || steps >= set.max_newton_per_stage {
                break;
            }
            let mut s = 1.0;
            let mut accepted = false;
            for _ in 0..80 {
                let xn: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + s * d).collect();
                if let Some(gn) = view.g_all(&xn) {
                    if gn.iter().all(|v| *v < 0.0)
                        && barrier_value(t, sign * xn[oi], &gn) <= f0 + set.armijo * s * slope
                    {
                        x = xn;
                        accepted = true;
                        break;
                    }
                }
                s *= set.shrink;
            }
            steps += 1;
            iterations += 1;
            if !accepted {
                // Rounding noise near the centre point is fine; a stall far
                // from it is not.
                if decrement < STALL_DECREMENT {
                    break;
                }
                return LoopResult {
                    x,
                    status: SolverStatus::MaxIter,
                    iterations,
                    gap: m / t,
                    trace,
                    message: format!("line search failed with Newton decrement {decrement:e}"),
                };
            }
            if stop_early(&x) {
                trace.push(TraceRow {
                    stage,
                    newton_steps: steps,
                    objective: x[oi],
                    gap: m / t,
                });
                return LoopResult {
                    x,
                    status: SolverStatus::Optimal,
                    iterations,
                    gap: m / t,
                    trace,
                    message: "stopped early".into(),
                };
            }
        }
        trace.push(TraceRow {
            stage,
            newton_steps: steps,
            objective: x[oi],
            gap: m / t,
        });
        if m / t <= set.tol {
            return LoopResult {
                x,
                status: SolverStatus::Optimal,
                iterations,
                gap: m / t,
                trace,
                message: "barrier gap below tolerance".into(),
            };
        }
        t *= set.mu;
    }
    LoopResult {
        x,
        status: SolverStatus::MaxIter,
        iterations,
        gap: m / t,
        trace,
        message: "stage limit reached".into(),
    }
}

/// Solves H dx = -grad by Cholesky on the Jacobi-scaled system
/// D^{-1/2} H D^{-1/2}, adding reg * I and growing reg tenfold on failure.
fn newton_direction(
    h: &DMatrix<f64>,
    grad: &DVector<f64>,
    set: &SolverSettings,
) -> Option<DVector<f64>> {
    let n = h.nrows();
    let d: DVector<f64> = h
        .diagonal()
        .map(|v| if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 });
    let mut hs = h.clone();
    for j in 0..n {
        for i in 0..n {
            hs[(i, j)] *= d[i] * d[j];
        }
    }
    let gs = grad.component_mul(&d);
    let mut reg = 0.0;
    loop {
        let mut hr = hs.clone();
        if reg > 0.0 {
            for i in 0..n {
                hr[(i, i)] += reg;
            }
        }
        if let Some(ch) = hr.cholesky() {
            let dx = ch.solve(&(-&gs)).component_mul(&d);
            if dx.iter().all(|v| v.is_finite()) {
                return Some(dx);
            }
        }
        reg = if reg == 0.0 {
            set.reg_start
        } else {
            reg * 10.0
        };
        if reg > set.reg_max {
            return None;
        }
    }
}

/// Best point phase I reached when no strictly feasible one was found.
#[derive(Debug, Clone)]
pub struct PhaseOneFailure {
    pub x: Vec<f64>,
    pub violation: f64,
}

/// Finds a strictly feasible point, starting the search at `x0`.
pub fn phase1_feasible(
    sp: &ConvexSubproblem,
    x0: &[f64],
    set: &SolverSettings,
) -> Result<Vec<f64>, PhaseOneFailure> {
    if sp.is_strictly_feasible(x0) {
        return Ok(x0.to_vec());
    }
    let n = sp.n_vars;
    let viol = sp.max_violation(x0);
    if !viol.is_finite() {
        return Err(PhaseOneFailure {
            x: x0.to_vec(),
            violation: f64::INFINITY,
        });
    }
    let s0 = viol + 1e-3 * viol.abs().max(1.0);
    let mut z = x0.to_vec();
    z.push(s0);
    let norm2: f64 = x0.iter().map(|v| v * v).sum();
    let view = PhaseOne {
        sp,
        center: x0.to_vec(),
        radius2: 100.0 * (norm2 + n as f64),
    };
    let stop = |z: &[f64]| z[n] < 0.0 && sp.is_strictly_feasible(&z[..n]);
    // Start with the shift term dominating so that s moves down right away.
    let t0 = set.t0.max(view.m() as f64 / s0.abs().max(1e-6));
    let res = barrier_loop(&view, z, t0, set, &stop);
    let x = res.x[..n].to_vec();
    if sp.is_strictly_feasible(&x) {
        return Ok(x);
    }
    let violation = sp.max_violation(&x);
    if violation <= viol {
        Err(PhaseOneFailure { x, violation })
    } else {
        Err(PhaseOneFailure {
            x: x0.to_vec(),
            violation: viol,
        })
    }
}

/// Log-barrier path following from a strictly feasible (or phase-I repaired)
/// start.
pub fn solve_barrier(sp: &ConvexSubproblem, start: &[f64], set: &SolverSettings) -> SolverReport {
    let x0 = match phase1_feasible(sp, start, set) {
        Ok(x) => x,
        Err(fail) => {
            return SolverReport {
                status: SolverStatus::Infeasible,
                objective: f64::NAN,
                x: start.to_vec(),
                iterations: 0,
                gap: f64::INFINITY,
                slacks: sp.constraints.iter().map(|c| c.slack(start)).collect(),
                trace: Vec::new(),
                message: format!("phase I ended with max violation {:e}", fail.violation),
            }
        }
    };
    let res = barrier_loop(&Plain(sp), x0, set.t0, set, &|_| false);
    let slacks: Vec<f64> = sp.constraints.iter().map(|c| c.slack(&res.x)).collect();
    let mut status = res.status;
    if status == SolverStatus::Optimal && slacks.iter().any(|s| *s < -set.tol_feas) {
        status = SolverStatus::MaxIter;
    }
    SolverReport {
        status,
        objective: res.x[sp.objective],
        x: res.x,
        iterations: res.iterations,
        gap: res.gap,
        slacks,
        trace: res.trace,
        message: res.message,
    }
}
