//! Alternating MM over node variables, waveforms/powers and the time split.

use crate::channel::ChannelSet;
use crate::linalg::{ComplexMatrix, ComplexVector, C64};
use crate::model::{
    eh_curve, feasibility_report_tol, harvested_energy, harvester_input_power, min_rate,
    node_energy_lhs, Design, Mode, NodeDesign, SystemConfig,
};
use crate::solver::{
    phase1_feasible, solve_barrier, ConvexSubproblem, SolverReport, SolverSettings, SolverStatus,
};
use crate::subproblem::{
    build_node_subproblem_at, build_node_subproblem_at_scaled, build_waveform_subproblem,
    build_waveform_subproblem_scaled, rate_sum_min, BuildError, NodeLayout, NodeVarMap,
    WaveformVarMap,
};
use crate::surrogates::C5Kind;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Full,
    TStatic,
    TFStatic,
    Baseline1,
    Baseline2,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Full,
        Variant::TStatic,
        Variant::TFStatic,
        Variant::Baseline1,
        Variant::Baseline2,
    ];

    pub fn layout(self) -> NodeLayout {
        match self {
            Variant::TStatic => NodeLayout::TStatic,
            Variant::TFStatic => NodeLayout::TFStatic,
            _ => NodeLayout::Full,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::TStatic => "t_static",
            Variant::TFStatic => "t_f_static",
            Variant::Baseline1 => "baseline1",
            Variant::Baseline2 => "baseline2",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                format!(
                    "unknown variant '{s}' (expected full|t_static|t_f_static|baseline1|baseline2)"
                )
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InitStrategy {
    /// Scaled identity / all-ones node, equal-power zero-phase waveforms.
    Deterministic,
    /// Random node directions and waveform phases, same power split.
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSettings {
    /// Inner stop: alpha gain below `eps_inner`.
    pub eps_inner: f64,
    /// Outer stop: min-rate change below `eps_outer`.
    pub eps_outer: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    pub init_strategy: InitStrategy,
    pub variant: Variant,
    pub c5_kind: C5Kind,
    /// Try each inner step with a reduced energy curvature constant first and
    /// keep it only if the true constraints and min rate accept the result.
    pub beta_backtrack: bool,
    /// Try moving further along each accepted inner step (checked exactly).
    pub extrapolate: bool,
    #[serde(skip, default)]
    pub solver: SolverSettings,
}

impl OptimizerSettings {
    fn beta_scales(&self) -> &'static [f64] {
        if self.beta_backtrack {
            &[0.0, 1.0 / 16.0, 1.0]
        } else {
            &[1.0]
        }
    }
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            eps_inner: 1e-4,
            eps_outer: 1e-4,
            max_inner: 30,
            max_outer: 50,
            init_strategy: InitStrategy::Deterministic,
            variant: Variant::Full,
            c5_kind: C5Kind::LogTangent,
            beta_backtrack: true,
            extrapolate: true,
            solver: SolverSettings::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("invalid settings: {0}")]
    Settings(String),
    #[error("variant {0:?} is not available in {1:?} mode")]
    Variant(Variant, Mode),
    #[error("no feasible initial point: {0}")]
    InitInfeasible(String),
    #[error("precondition: {0}")]
    Precondition(String),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Tau(#[from] TauError),
}

/// Statistics of one inner MM loop.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct InnerStats {
    /// min_k sum_n log2(1 + SINR) at the start and after each accepted step.
    pub alpha: Vec<f64>,
    pub subproblems: usize,
    pub newton_steps: usize,
    /// Set when a step was rejected or the solver did not converge.
    pub note: Option<String>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OuterRecord {
    pub iteration: usize,
    pub min_rate: f64,
    pub tau: f64,
    pub energies: Vec<f64>,
    pub matrices: InnerStats,
    pub waveforms: InnerStats,
    pub tau_note: Option<String>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunTrace {
    pub variant: Variant,
    pub mode: Mode,
    pub initial_min_rate: f64,
    pub initial_tau: f64,
    pub outer: Vec<OuterRecord>,
    pub converged: bool,
}

impl RunTrace {
    pub fn min_rates(&self) -> Vec<f64> {
        std::iter::once(self.initial_min_rate)
            .chain(self.outer.iter().map(|o| o.min_rate))
            .collect()
    }

    pub fn final_min_rate(&self) -> f64 {
        self.outer
            .last()
            .map_or(self.initial_min_rate, |o| o.min_rate)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }
}

const FEAS_TOL: f64 = 1e-8;

fn feasible(d: &Design, ch: &ChannelSet, cfg: &SystemConfig) -> bool {
    feasibility_report_tol(d, ch, cfg, FEAS_TOL).feasible
}

/// Largest common scale c with C3 met at equality for U = c U0 on subband n.
fn node_scale_for_budget(d: &Design, ch: &ChannelSet, cfg: &SystemConfig, n: usize) -> f64 {
    let lhs = node_energy_lhs(d, ch, cfg, n);
    if lhs <= 0.0 {
        return 1.0;
    }
    (cfg.t * cfg.p_rf_node[n] / lhs).sqrt()
}

fn scale_node(d: &mut Design, n: usize, c: f64) {
    if let NodeDesign::Relay { u_e, u_i } = &mut d.node {
        u_e[n] *= C64::from(c);
        u_i[n] *= C64::from(c);
    }
}

/// Initial design at a given tau.
pub fn initial_design(
    ch: &ChannelSet,
    cfg: &SystemConfig,
    tau: f64,
    strategy: InitStrategy,
) -> Design {
    let (t, rho) = (cfg.t, cfg.rho);
    let mut rng = match strategy {
        InitStrategy::Random { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        InitStrategy::Deterministic => None,
    };
    let phase = |rng: &mut Option<ChaCha8Rng>| match rng {
        Some(r) => C64::from_polar(1.0, std::f64::consts::TAU * r.random::<f64>()),
        None => C64::new(1.0, 0.0),
    };
    let mut s_e = Vec::with_capacity(cfg.n);
    let mut p_i = Vec::with_capacity(cfg.n);
    for n in 0..cfg.n {
        s_e.push(ComplexVector::from_fn(cfg.k, |k, _| {
            phase(&mut rng) * (0.9 * 2.0 * rho * t * cfg.p_rf_tx[k][n] / tau).sqrt()
        }));
        p_i.push(DVector::from_fn(cfg.k, |k, _| {
            0.1 * 2.0 * rho * t * cfg.p_rf_tx[k][n] / (t - tau)
        }));
    }
    let m = cfg.m;
    let node = match cfg.mode {
        Mode::Relay => {
            let base = |rng: &mut Option<ChaCha8Rng>| match rng {
                Some(r) => ComplexMatrix::from_fn(m, m, |_, _| crate::channel::cn01(r)),
                None => ComplexMatrix::identity(m, m),
            };
            let u: Vec<ComplexMatrix> = (0..cfg.n).map(|_| base(&mut rng)).collect();
            NodeDesign::Relay {
                u_e: u.clone(),
                u_i: u,
            }
        }
        Mode::ActiveIrs => {
            let th = ComplexVector::from_fn(m, |_, _| phase(&mut rng));
            NodeDesign::Irs {
                theta_e: th.clone(),
                theta_i: th,
            }
        }
    };
    let mut d = Design {
        tau,
        s_e,
        p_i,
        node,
    };
    match cfg.mode {
        Mode::Relay => {
            for n in 0..cfg.n {
                let c = node_scale_for_budget(&d, ch, cfg, n);
                scale_node(&mut d, n, c);
            }
        }
        Mode::ActiveIrs => {
            // Common amplitude up to the IRS budget. When even |theta| = 1
            // overshoots it, the waveforms shrink instead.
            let c = (0..cfg.n)
                .map(|n| node_scale_for_budget(&d, ch, cfg, n))
                .fold(f64::INFINITY, f64::min);
            if c >= 1.0 {
                if let NodeDesign::Irs { theta_e, theta_i } = &mut d.node {
                    *theta_e *= C64::from(c);
                    *theta_i *= C64::from(c);
                }
            } else {
                let worst = (0..cfg.n)
                    .map(|n| node_energy_lhs(&d, ch, cfg, n) / (cfg.t * cfg.p_rf_node[n]))
                    .fold(0.0, f64::max);
                let kappa = 1.0 / worst;
                for n in 0..cfg.n {
                    d.s_e[n] *= C64::from(kappa.sqrt());
                    d.p_i[n] *= kappa;
                }
            }
        }
    }
    d
}

pub const INIT_TAU_FRACTIONS: [f64; 7] = [0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99];

/// Ties the node variables the way `layout` requires: one common scale for
/// all subbands under t-f-static. Energy and information slots already share
/// the initial node variables.
fn tie_for_layout(
    mut d: Design,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    layout: NodeLayout,
) -> Design {
    if layout == NodeLayout::TFStatic {
        if let NodeDesign::Relay { u_e, u_i } = &mut d.node {
            let base = u_e[0].clone();
            for n in 0..cfg.n {
                u_e[n] = base.clone();
                u_i[n] = base.clone();
            }
        }
        let c = (0..cfg.n)
            .map(|n| node_scale_for_budget(&d, ch, cfg, n))
            .fold(f64::INFINITY, f64::min);
        for n in 0..cfg.n {
            scale_node(&mut d, n, c);
        }
    }
    d
}

const REPAIR_ROUNDS: usize = 30;

/// Alternating phase-I passes over the node and waveform subproblems. The
/// surrogate constraints imply the true ones, so every pass can only lower
/// the true violation.
fn repair(
    mut d: Design,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    settings: &OptimizerSettings,
) -> Result<Design, String> {
    let map = NodeVarMap::new(cfg.mode, settings.variant.layout(), cfg.n, cfg.m)
        .map_err(|e| e.to_string())?;
    let mut last = f64::INFINITY;
    for _ in 0..REPAIR_ROUNDS {
        let (sp, x0, _) = build_node_subproblem_at(&d, ch, cfg, &map, settings.c5_kind)
            .map_err(|e| e.to_string())?;
        let (x, _) = phase1_point(&sp, &x0, &settings.solver);
        map.unpack(&x, &mut d);
        if feasible(&d, ch, cfg) {
            return Ok(d);
        }
        let (sp, x0, wmap, _) =
            build_waveform_subproblem(&d, ch, cfg, false).map_err(|e| e.to_string())?;
        let (x, v) = phase1_point(&sp, &x0, &settings.solver);
        wmap.unpack(&x, &mut d);
        if feasible(&d, ch, cfg) {
            return Ok(d);
        }
        if !(v < last - 1e-6 * last.abs().max(1e-3)) {
            break;
        }
        last = v;
    }
    Err(feasibility_report_tol(&d, ch, cfg, FEAS_TOL)
        .violations
        .join("; "))
}

fn phase1_point(sp: &ConvexSubproblem, x0: &[f64], set: &SolverSettings) -> (Vec<f64>, f64) {
    match phase1_feasible(sp, x0, set) {
        Ok(x) => (x, 0.0),
        Err(f) => (f.x, f.violation),
    }
}

/// First feasible initial design over increasing energy-slot fractions. When
/// none is feasible, the first one goes through phase-I repair.
pub fn initialize(
    ch: &ChannelSet,
    cfg: &SystemConfig,
    settings: &OptimizerSettings,
) -> Result<Design, OptimizerError> {
    let layout = settings.variant.layout();
    let make = |f: f64| {
        tie_for_layout(
            initial_design(ch, cfg, f * cfg.t, settings.init_strategy),
            ch,
            cfg,
            layout,
        )
    };
    for f in INIT_TAU_FRACTIONS {
        let d = make(f);
        if feasible(&d, ch, cfg) {
            return Ok(d);
        }
    }
    repair(make(INIT_TAU_FRACTIONS[0]), ch, cfg, settings).map_err(OptimizerError::InitInfeasible)
}

/// Node step: surrogate build and solve until alpha stalls.
pub fn inner_loop_matrices(
    design: &Design,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    settings: &OptimizerSettings,
) -> Result<(Design, InnerStats), OptimizerError> {
    let map = NodeVarMap::new(cfg.mode, settings.variant.layout(), cfg.n, cfg.m)?;
    let mut d = design.clone();
    let mut alpha = rate_sum_min(&d, ch, cfg);
    let started = Instant::now();
    let mut stats = InnerStats {
        alpha: vec![alpha],
        ..Default::default()
    };
    for _ in 0..settings.max_inner {
        let step = try_scales(
            settings,
            &mut stats,
            "node",
            |scale| {
                let (sp, x0, _) =
                    build_node_subproblem_at_scaled(&d, ch, cfg, &map, settings.c5_kind, scale)?;
                let rep = solve_barrier(&sp, &x0, &settings.solver);
                let mut cand = d.clone();
                map.unpack(&rep.x, &mut cand);
                Ok((rep, cand))
            },
            |cand| accept(cand, alpha, ch, cfg),
        )?;
        let Some((mut cand, mut a)) = step else { break };
        if settings.extrapolate {
            if let Some((e, ea)) = extrapolate(
                &d,
                &cand,
                a,
                |x| map.pack(x, 0.0),
                |x, t| map.unpack(x, t),
                ch,
                cfg,
            ) {
                (cand, a) = (e, ea);
            }
        }
        d = cand;
        let gain = a - alpha;
        alpha = a;
        stats.alpha.push(a);
        if gain < settings.eps_inner {
            break;
        }
    }
    stats.wall_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok((d, stats))
}

/// Min rate of `cand` if it is feasible and does not fall below `alpha`.
fn accept(cand: &Design, alpha: f64, ch: &ChannelSet, cfg: &SystemConfig) -> Option<f64> {
    let a = rate_sum_min(cand, ch, cfg);
    (a >= alpha && feasible(cand, ch, cfg)).then_some(a)
}

/// Safeguarded extrapolation along the last step: tries `new + g (new - old)`
/// for g = 1, 2, 4, ... and keeps the last point that is feasible and raises
/// the min rate.
#[allow(clippy::too_many_arguments)]
fn extrapolate(
    old: &Design,
    new: &Design,
    a_new: f64,
    pack: impl Fn(&Design) -> Vec<f64>,
    unpack: impl Fn(&[f64], &mut Design),
    ch: &ChannelSet,
    cfg: &SystemConfig,
) -> Option<(Design, f64)> {
    let (xo, xn) = (pack(old), pack(new));
    let mut best: Option<(Design, f64)> = None;
    let mut g = 1.0;
    for _ in 0..8 {
        let x: Vec<f64> = xn.iter().zip(&xo).map(|(n, o)| n + g * (n - o)).collect();
        let mut t = new.clone();
        unpack(&x, &mut t);
        let floor = best.as_ref().map_or(a_new, |b| b.1);
        match accept(&t, floor, ch, cfg) {
            Some(a) if a > floor => best = Some((t, a)),
            _ => break,
        }
        g *= 2.0;
    }
    best
}

/// Runs one inner step over the curvature schedule. `None` ends the loop,
/// with the reason left in `stats.note`.
fn try_scales(
    settings: &OptimizerSettings,
    stats: &mut InnerStats,
    what: &str,
    mut solve: impl FnMut(f64) -> Result<(SolverReport, Design), BuildError>,
    check: impl Fn(&Design) -> Option<f64>,
) -> Result<Option<(Design, f64)>, OptimizerError> {
    let scales = settings.beta_scales();
    for (i, &scale) in scales.iter().enumerate() {
        let last = i + 1 == scales.len();
        let (rep, cand) = solve(scale)?;
        stats.subproblems += 1;
        stats.newton_steps += rep.iterations;
        if rep.status == SolverStatus::Infeasible {
            if last {
                stats.note = Some(format!("{what} step infeasible: {}", rep.message));
            }
            continue;
        }
        if let Some(a) = check(&cand) {
            return Ok(Some((cand, a)));
        }
        if last {
            stats.note = Some(format!("{what} step rejected ({:?})", rep.status));
        }
    }
    Ok(None)
}

/// Waveform/power step. Baseline 1 keeps the energy waveforms fixed.
pub fn inner_loop_waveforms(
    design: &Design,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    settings: &OptimizerSettings,
) -> Result<(Design, InnerStats), OptimizerError> {
    if !(design.tau < cfg.t) {
        return Err(OptimizerError::Precondition(format!(
            "tau = {} leaves no information slot",
            design.tau
        )));
    }
    let fix_s = settings.variant == Variant::Baseline1;
    let mut d = design.clone();
    let mut alpha = rate_sum_min(&d, ch, cfg);
    let started = Instant::now();
    let mut stats = InnerStats {
        alpha: vec![alpha],
        ..Default::default()
    };
    let wmap = WaveformVarMap {
        k: cfg.k,
        n: cfg.n,
        fix_s,
    };
    for _ in 0..settings.max_inner {
        let step = try_scales(
            settings,
            &mut stats,
            "waveform",
            |scale| {
                let (sp, x0, map, _) = build_waveform_subproblem_scaled(&d, ch, cfg, fix_s, scale)?;
                let rep = solve_barrier(&sp, &x0, &settings.solver);
                let mut cand = d.clone();
                map.unpack(&rep.x, &mut cand);
                Ok((rep, cand))
            },
            |cand| accept(cand, alpha, ch, cfg),
        )?;
        let Some((mut cand, mut a)) = step else { break };
        if settings.extrapolate {
            if let Some((e, ea)) = extrapolate(
                &d,
                &cand,
                a,
                |x| wmap.pack(x, 0.0),
                |x, t| wmap.unpack(x, t),
                ch,
                cfg,
            ) {
                (cand, a) = (e, ea);
            }
        }
        d = cand;
        let gain = a - alpha;
        alpha = a;
        stats.alpha.push(a);
        if gain < settings.eps_inner {
            break;
        }
    }
    stats.wall_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok((d, stats))
}

/// Which condition of the time-split problem fails.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("time split infeasible: condition {condition} ({detail})")]
pub struct TauError {
    /// 1: energy bound above T; 2: transmitter budget fails at every tau;
    /// 3: node budget fails at every tau; 4: transmitter bound below the
    /// energy bound; 5: node bound below the energy bound.
    pub condition: u8,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct TauSolution {
    pub tau: f64,
    /// `[k]` rho E_min,k / f(p_E,k).
    pub v_bar: Vec<f64>,
    /// Largest lower bound from the budgets (0 when none binds).
    pub budget_lower: f64,
    /// Smallest upper bound from the budgets (T when none binds).
    pub upper: f64,
}

/// Smallest tau feasible for the transmitter budgets, node budgets and energy
/// targets with everything else fixed; the rate prefactor decreases in tau.
pub fn tau_closed_form(
    design: &Design,
    ch: &ChannelSet,
    cfg: &SystemConfig,
) -> Result<TauSolution, TauError> {
    let (t, rho) = (cfg.t, cfg.rho);
    let v_bar: Vec<f64> = (0..cfg.k)
        .map(|k| {
            if cfg.e_min[k] <= 0.0 {
                return 0.0;
            }
            let f = eh_curve(harvester_input_power(design, ch, k), cfg);
            if f > 0.0 {
                rho * cfg.e_min[k] / f
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let vbar_max = v_bar.iter().copied().fold(0.0, f64::max);
    if vbar_max > t {
        return Err(TauError {
            condition: 1,
            detail: format!("max_k rho E_min / f(p_E) = {vbar_max:e} > T"),
        });
    }
    // Every budget has the form tau * a <= b.
    let mut lower = 0.0f64;
    let mut upper = t;
    let mut upper_src = 0u8;
    let mut lower_src = 0u8;
    for n in 0..cfg.n {
        for k in 0..cfg.k {
            let s2 = design.s_e[n][k].norm_sqr();
            let p = design.p_i[n][k];
            let a = (s2 - p) / (2.0 * rho);
            let b = t * (cfg.p_rf_tx[k][n] - p / (2.0 * rho));
            apply_bound(
                a,
                b,
                (2, 4),
                (&mut lower, &mut lower_src),
                (&mut upper, &mut upper_src),
                || format!("k={k}, n={n}"),
            )?;
        }
        let h = &ch.h[n];
        let ue = design.u_e(n);
        let ui = design.u_i(n);
        let ve = h.adjoint() * ue.adjoint() * &ue * h;
        let vi = h.adjoint() * ui.adjoint() * &ui * h;
        let sig = cfg.sigma2_node[n];
        let e_part = crate::linalg::quad_form(&ve, &design.s_e[n]) + sig * ue.norm_squared();
        let i_part = (design.q_i(n) * vi).trace().re + sig * ui.norm_squared();
        let a = (e_part - i_part) / (2.0 * rho);
        let b = t * (cfg.p_rf_node[n] - i_part / (2.0 * rho));
        apply_bound(
            a,
            b,
            (3, 5),
            (&mut lower, &mut lower_src),
            (&mut upper, &mut upper_src),
            || format!("n={n}"),
        )?;
    }
    let tau = vbar_max.max(lower);
    if tau > upper {
        let (condition, what) = if vbar_max >= lower {
            (upper_src, "energy bound")
        } else {
            (lower_src, "budget lower bound")
        };
        return Err(TauError {
            condition,
            detail: format!("{what} {tau:e} exceeds upper bound {upper:e}"),
        });
    }
    Ok(TauSolution {
        tau,
        v_bar,
        budget_lower: lower,
        upper,
    })
}

/// Folds `tau * a <= b` into the running bounds. `cond` holds the condition
/// numbers for (budget fails everywhere, upper bound source).
fn apply_bound(
    a: f64,
    b: f64,
    cond: (u8, u8),
    lower: (&mut f64, &mut u8),
    upper: (&mut f64, &mut u8),
    what: impl Fn() -> String,
) -> Result<(), TauError> {
    if a > 0.0 {
        if b / a < *upper.0 {
            *upper.0 = b / a;
            *upper.1 = cond.1;
        }
    } else if a < 0.0 {
        if b / a > *lower.0 {
            *lower.0 = b / a;
            *lower.1 = cond.0;
        }
    } else if b < 0.0 {
        return Err(TauError {
            condition: cond.0,
            detail: format!("budget violated for every tau ({})", what()),
        });
    }
    if *upper.0 < 0.0 {
        return Err(TauError {
            condition: cond.0,
            detail: format!("budget violated for every tau >= 0 ({})", what()),
        });
    }
    Ok(())
}

/// U = c I (relay) or theta = c 1 (IRS) with one scalar per subband meeting
/// the node budget at equality for the current waveforms and tau.
pub fn baseline2_node(design: &Design, ch: &ChannelSet, cfg: &SystemConfig) -> Design {
    let mut d = design.clone();
    match &mut d.node {
        NodeDesign::Relay { u_e, u_i } => {
            for n in 0..cfg.n {
                u_e[n] = ComplexMatrix::identity(cfg.m, cfg.m);
                u_i[n] = ComplexMatrix::identity(cfg.m, cfg.m);
            }
        }
        NodeDesign::Irs { theta_e, theta_i } => {
            *theta_e = ComplexVector::from_element(cfg.m, C64::new(1.0, 0.0));
            *theta_i = theta_e.clone();
        }
    }
    match cfg.mode {
        Mode::Relay => {
            for n in 0..cfg.n {
                let c = node_scale_for_budget(&d, ch, cfg, n);
                scale_node(&mut d, n, c);
            }
        }
        Mode::ActiveIrs => {
            let c = (0..cfg.n)
                .map(|n| node_scale_for_budget(&d, ch, cfg, n))
                .fold(f64::INFINITY, f64::min)
                .max(1.0);
            if let NodeDesign::Irs { theta_e, theta_i } = &mut d.node {
                *theta_e *= C64::from(c);
                *theta_i *= C64::from(c);
            }
        }
    }
    d
}

/// Applies the closed-form time split, nudged inside the energy constraint.
fn tau_step(d: &Design, ch: &ChannelSet, cfg: &SystemConfig) -> (Design, Option<String>) {
    match tau_closed_form(d, ch, cfg) {
        Ok(sol) => {
            let floor = 1e-6 * cfg.t;
            let tau = (sol.tau * (1.0 + 1e-9)).max(floor).min(sol.upper);
            if tau >= d.tau {
                return (d.clone(), None);
            }
            let mut cand = d.clone();
            cand.tau = tau;
            if feasible(&cand, ch, cfg) && min_rate(&cand, ch, cfg) >= min_rate(d, ch, cfg) {
                (cand, None)
            } else {
                (
                    d.clone(),
                    Some("closed-form tau rejected by feasibility check".into()),
                )
            }
        }
        Err(e) => (d.clone(), Some(e.to_string())),
    }
}

fn check_variant(cfg: &SystemConfig, settings: &OptimizerSettings) -> Result<(), OptimizerError> {
    if settings.variant == Variant::TFStatic && cfg.mode == Mode::ActiveIrs {
        return Err(OptimizerError::Variant(settings.variant, cfg.mode));
    }
    if !(settings.eps_inner > 0.0 && settings.eps_outer > 0.0) {
        return Err(OptimizerError::Settings(
            "eps_inner and eps_outer must be positive".into(),
        ));
    }
    Ok(())
}

/// Full alternating optimization with the variant in `settings`.
pub fn run_variant(
    ch: &ChannelSet,
    cfg: &SystemConfig,
    settings: &OptimizerSettings,
) -> Result<(Design, RunTrace), OptimizerError> {
    check_variant(cfg, settings)?;
    cfg.validate()
        .map_err(|e| OptimizerError::Settings(e.to_string()))?;
    let mut d = initialize(ch, cfg, settings)?;
    if settings.variant == Variant::Baseline2 {
        let b = baseline2_node(&d, ch, cfg);
        if feasible(&b, ch, cfg) {
            d = b;
        }
    }
    run_from(d, ch, cfg, settings)
}

/// True when the node variables already carry the ties of `layout`.
pub fn satisfies_layout(d: &Design, layout: NodeLayout) -> bool {
    match (&d.node, layout) {
        (_, NodeLayout::Full) => true,
        (NodeDesign::Relay { u_e, u_i }, NodeLayout::TStatic) => u_e == u_i,
        (NodeDesign::Relay { u_e, u_i }, NodeLayout::TFStatic) => {
            u_e == u_i && u_e.iter().all(|u| *u == u_e[0])
        }
        (NodeDesign::Irs { theta_e, theta_i }, NodeLayout::TStatic) => theta_e == theta_i,
        (NodeDesign::Irs { .. }, NodeLayout::TFStatic) => false,
    }
}

/// Runs the variant from a given feasible design instead of the built-in
/// initialization. Baseline variants are not accepted here because their
/// fixed parts come from the initialization.
pub fn run_variant_from(
    start: &Design,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    settings: &OptimizerSettings,
) -> Result<(Design, RunTrace), OptimizerError> {
    check_variant(cfg, settings)?;
    cfg.validate()
        .map_err(|e| OptimizerError::Settings(e.to_string()))?;
    if matches!(settings.variant, Variant::Baseline1 | Variant::Baseline2) {
        return Err(OptimizerError::Precondition(
            "baselines start from their own initialization".into(),
        ));
    }
    if !satisfies_layout(start, settings.variant.layout()) {
        return Err(OptimizerError::Precondition(format!(
            "start is not tied as {:?} requires",
            settings.variant
        )));
    }
    if !feasible(start, ch, cfg) {
        return Err(OptimizerError::Precondition(
            "start design is infeasible".into(),
        ));
    }
    run_from(start.clone(), ch, cfg, settings)
}

fn run_from(
    mut d: Design,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    settings: &OptimizerSettings,
) -> Result<(Design, RunTrace), OptimizerError> {
    let mut trace = RunTrace {
        variant: settings.variant,
        mode: cfg.mode,
        initial_min_rate: min_rate(&d, ch, cfg),
        initial_tau: d.tau,
        outer: Vec::new(),
        converged: false,
    };
    let mut prev = trace.initial_min_rate;
    for it in 0..settings.max_outer {
        let start = Instant::now();
        let matrices = if settings.variant == Variant::Baseline2 {
            let b = baseline2_node(&d, ch, cfg);
            let mut st = InnerStats {
                alpha: vec![rate_sum_min(&d, ch, cfg)],
                ..Default::default()
            };
            if feasible(&b, ch, cfg) && rate_sum_min(&b, ch, cfg) >= st.alpha[0] {
                d = b;
                st.alpha.push(rate_sum_min(&d, ch, cfg));
            } else {
                st.note = Some("scaled identity rejected".into());
            }
            st
        } else {
            let (nd, st) = inner_loop_matrices(&d, ch, cfg, settings)?;
            d = nd;
            st
        };
        let (nd, waveforms) = inner_loop_waveforms(&d, ch, cfg, settings)?;
        d = nd;
        let (nd, tau_note) = tau_step(&d, ch, cfg);
        d = nd;
        let rate = min_rate(&d, ch, cfg);
        trace.outer.push(OuterRecord {
            iteration: it + 1,
            min_rate: rate,
            tau: d.tau,
            energies: (0..cfg.k)
                .map(|k| harvested_energy(&d, ch, cfg, k))
                .collect(),
            matrices,
            waveforms,
            tau_note,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        if (rate - prev).abs() < settings.eps_outer {
            trace.converged = true;
            break;
        }
        prev = rate;
    }
    Ok((d, trace))
}

/// Full MM optimization with the full variant unless `settings` selects another.
pub fn optimize(
    ch: &ChannelSet,
    cfg: &SystemConfig,
    settings: &OptimizerSettings,
) -> Result<(Design, RunTrace), OptimizerError> {
    run_variant(ch, cfg, settings)
}

/// Result of one variant inside [`compare_variants`].
#[derive(Debug, Clone)]
pub struct VariantRun {
    pub variant: Variant,
    pub design: Design,
    pub trace: RunTrace,
    /// Variant whose solution seeded the kept run, if it was a warm start.
    pub warm_from: Option<Variant>,
}

/// Runs several variants on one channel draw. Each tied variant keeps the
/// better of a cold run and a run started at the best solution of the more
/// restricted variants, so t-f-static <= t-static <= full and
/// baselines <= full hold for the returned local solutions.
pub fn compare_variants(
    ch: &ChannelSet,
    cfg: &SystemConfig,
    settings: &OptimizerSettings,
    variants: &[Variant],
) -> Vec<(Variant, Result<VariantRun, OptimizerError>)> {
    let order = [
        Variant::TFStatic,
        Variant::Baseline1,
        Variant::Baseline2,
        Variant::TStatic,
        Variant::Full,
    ];
    let mut done: Vec<(Variant, Result<VariantRun, OptimizerError>)> = Vec::new();
    for v in order {
        let wanted = variants.contains(&v);
        let feeds_later = match v {
            Variant::Full => false,
            Variant::TStatic => variants.contains(&Variant::Full),
            _ => variants
                .iter()
                .any(|w| matches!(w, Variant::Full | Variant::TStatic)),
        };
        if !wanted && !feeds_later {
            continue;
        }
        if v == Variant::TFStatic && cfg.mode == Mode::ActiveIrs {
            done.push((v, Err(OptimizerError::Variant(v, cfg.mode))));
            continue;
        }
        let s = OptimizerSettings {
            variant: v,
            ..*settings
        };
        let cold = run_variant(ch, cfg, &s).map(|(design, trace)| VariantRun {
            variant: v,
            design,
            trace,
            warm_from: None,
        });
        // Restricted solutions that are admissible starts for v.
        let seeds: Vec<&VariantRun> = done
            .iter()
            .filter_map(|(w, r)| r.as_ref().ok().filter(|_| dominates(v, *w)))
            .collect();
        let best_seed = seeds
            .into_iter()
            .filter(|r| satisfies_layout(&r.design, v.layout()))
            .max_by(|a, b| {
                a.trace
                    .final_min_rate()
                    .total_cmp(&b.trace.final_min_rate())
            });
        let warm = best_seed.map(|r| {
            let from = r.variant;
            run_variant_from(&r.design, ch, cfg, &s).map(|(design, trace)| VariantRun {
                variant: v,
                design,
                trace,
                warm_from: Some(from),
            })
        });
        let kept = match (cold, warm) {
            (Ok(c), Some(Ok(w))) => Ok(if w.trace.final_min_rate() > c.trace.final_min_rate() {
                w
            } else {
                c
            }),
            (Err(_), Some(Ok(w))) => Ok(w),
            (c, _) => c,
        };
        done.push((v, kept));
    }
    // Requested order; a repeated variant reports an error the second time.
    variants
        .iter()
        .map(|v| {
            let i = done
                .iter()
                .position(|(w, _)| w == v)
                .expect("every requested variant ran");
            let taken = std::mem::replace(
                &mut done[i].1,
                Err(OptimizerError::Settings(format!("{v:?} requested twice"))),
            );
            (*v, taken)
        })
        .collect()
}

/// Whether `outer` has a feasible set containing that of `inner`.
fn dominates(outer: Variant, inner: Variant) -> bool {
    match outer {
        Variant::Full => inner != Variant::Full,
        Variant::TStatic => inner == Variant::TFStatic,
        _ => false,
    }
}
