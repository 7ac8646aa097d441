//! Assembly of the convex MM subproblems: node variables (relay matrices or IRS
//! vectors) with waveforms fixed, and waveforms/powers with the node fixed.

use crate::channel::ChannelSet;
use crate::linalg::{
    from_real, real_composite, to_real, unvec, ComplexVector, HermitianMatrix, C64,
};
use crate::model::{
    assemble_quadratic_forms, assemble_xi, psi, psi_tilde, Design, Mode, NodeDesign,
    QuadraticForms, Slot, SystemConfig,
};
use crate::solver::{
    Constraint, ConvexSubproblem, LogTerm, ProxTerm, QuadBlock, SmoothFn, VarBlock,
};
use crate::surrogates::{
    beta_bound_within, c4_surrogate, c5_power_surrogate, c5_surrogate, C4Pieces, C5Kind,
    ConcaveSurrogate, SurrogateError, SurrogatePack,
};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::f64::consts::LOG2_E;
use thiserror::Error;

/// How node variables are shared across slots and subbands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeLayout {
    /// Separate U_E,n and U_I,n (relay) or theta_E and theta_I (IRS).
    Full,
    /// One node variable per subband used in both slots.
    TStatic,
    /// One relay matrix for both slots and all subbands.
    TFStatic,
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("layout {0:?} is not available in {1:?} mode")]
    Layout(NodeLayout, Mode),
    #[error("precondition: {0}")]
    Precondition(String),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
}

/// Placement of the node variables in the real solver vector. Index 0 is alpha.
#[derive(Debug, Clone)]
pub struct NodeVarMap {
    pub mode: Mode,
    pub layout: NodeLayout,
    pub n: usize,
    pub m: usize,
    pub dim: usize,
}

impl NodeVarMap {
    pub fn new(mode: Mode, layout: NodeLayout, n: usize, m: usize) -> Result<Self, BuildError> {
        if mode == Mode::ActiveIrs && layout == NodeLayout::TFStatic {
            return Err(BuildError::Layout(layout, mode));
        }
        Ok(NodeVarMap {
            mode,
            layout,
            n,
            m,
            dim: mode.node_dim(m),
        })
    }

    pub fn n_blocks(&self) -> usize {
        match (self.mode, self.layout) {
            (Mode::Relay, NodeLayout::Full) => 2 * self.n,
            (Mode::Relay, NodeLayout::TStatic) => self.n,
            (Mode::ActiveIrs, NodeLayout::Full) => 2,
            _ => 1,
        }
    }

    pub fn block(&self, slot: Slot, n: usize) -> usize {
        let info = (slot == Slot::Info) as usize;
        match (self.mode, self.layout) {
            (Mode::Relay, NodeLayout::Full) => 2 * n + info,
            (Mode::Relay, NodeLayout::TStatic) => n,
            (Mode::ActiveIrs, NodeLayout::Full) => info,
            _ => 0,
        }
    }

    pub fn block_offset(&self, b: usize) -> usize {
        1 + 2 * self.dim * b
    }

    pub fn offset(&self, slot: Slot, n: usize) -> usize {
        self.block_offset(self.block(slot, n))
    }

    pub fn n_vars(&self) -> usize {
        1 + 2 * self.dim * self.n_blocks()
    }

    /// Distinct blocks holding energy-slot variables, in subband order.
    pub fn energy_blocks(&self) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        for n in 0..self.n {
            let b = self.block(Slot::Energy, n);
            if !out.contains(&b) {
                out.push(b);
            }
        }
        out
    }

    pub fn var_blocks(&self) -> Vec<VarBlock> {
        let mut v = vec![VarBlock {
            name: "alpha".into(),
            offset: 0,
            len: 1,
            complex: false,
        }];
        for b in 0..self.n_blocks() {
            v.push(VarBlock {
                name: format!("node{b}"),
                offset: self.block_offset(b),
                len: self.dim,
                complex: true,
            });
        }
        v
    }

    pub fn pack(&self, d: &Design, alpha: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.n_vars()];
        x[0] = alpha;
        // Later writes win, so the energy slot defines shared blocks.
        for slot in [Slot::Info, Slot::Energy] {
            for n in 0..self.n {
                let off = self.offset(slot, n);
                let r = to_real(&d.node_vector(slot, n));
                x[off..off + r.len()].copy_from_slice(&r);
            }
        }
        x
    }

    pub fn unpack(&self, x: &[f64], d: &mut Design) {
        let get = |slot: Slot, n: usize| {
            let off = self.offset(slot, n);
            from_real(&x[off..off + 2 * self.dim])
        };
        match &mut d.node {
            NodeDesign::Relay { u_e, u_i } => {
                for n in 0..self.n {
                    u_e[n] = unvec(&get(Slot::Energy, n), self.m, self.m)
                        .expect("node block has M^2 entries");
                    u_i[n] = unvec(&get(Slot::Info, n), self.m, self.m)
                        .expect("node block has M^2 entries");
                }
            }
            NodeDesign::Irs { theta_e, theta_i } => {
                *theta_e = get(Slot::Energy, 0);
                *theta_i = get(Slot::Info, 0);
            }
        }
    }
}

/// (start in the complex vector, length, real offset in the solver vector).
type Segment = (usize, usize, usize);

fn push_linear(lin: &mut Vec<(usize, f64)>, c: &ComplexVector, segs: &[Segment]) {
    for &(start, len, off) in segs {
        for i in 0..len {
            let z = c[start + i];
            lin.push((off + 2 * i, z.re));
            lin.push((off + 2 * i + 1, z.im));
        }
    }
}

/// Embeds a concave surrogate into the solver layout. The quadratic part must
/// be block diagonal with respect to `segs`.
pub fn concave_to_smooth(s: &ConcaveSurrogate, segs: &[Segment]) -> SmoothFn {
    let mut f = SmoothFn {
        constant: s.constant,
        ..Default::default()
    };
    for &(start, len, off) in segs {
        let g = s.g.view((start, start), (len, len)).into_owned();
        if g.iter().any(|z| *z != C64::new(0.0, 0.0)) {
            f.quad.push(QuadBlock {
                offset: off,
                mat: -real_composite(&g),
            });
        }
    }
    if let Some(p) = &s.prox {
        for &(start, len, off) in segs {
            f.prox.push(ProxTerm {
                offset: off,
                coef: -p.weight,
                center: DVector::from_vec(crate::linalg::to_real(
                    &p.center.rows(start, len).into_owned(),
                )),
            });
        }
    }
    push_linear(&mut f.lin, &s.l, segs);
    if let Some(lp) = &s.log {
        let mut a = Vec::new();
        push_linear(&mut a, &lp.w, segs);
        f.logs.push(LogTerm {
            coef: lp.coef,
            a,
            b: lp.c0,
        });
    }
    f
}

fn quad_at(a: &HermitianMatrix, off: usize, scale: f64) -> QuadBlock {
    QuadBlock {
        offset: off,
        mat: real_composite(a) * scale,
    }
}

/// Energy-slot form for pair k over the stacked distinct energy blocks.
fn stacked_energy_form(forms: &QuadraticForms, map: &NodeVarMap, k: usize) -> HermitianMatrix {
    let eb = map.energy_blocks();
    let d = map.dim;
    let mut a = HermitianMatrix::zeros(d * eb.len(), d * eb.len());
    for n in 0..map.n {
        let i = eb
            .iter()
            .position(|&b| b == map.block(Slot::Energy, n))
            .expect("energy block");
        let mut view = a.view_mut((i * d, i * d), (d, d));
        view += &forms.a_bar[k][n];
    }
    a
}

fn stacked_energy_vector(d: &Design, map: &NodeVarMap) -> ComplexVector {
    let eb = map.energy_blocks();
    let mut out = ComplexVector::zeros(map.dim * eb.len());
    for (i, &b) in eb.iter().enumerate() {
        let n = (0..map.n)
            .find(|&n| map.block(Slot::Energy, n) == b)
            .expect("block has a subband");
        out.rows_mut(i * map.dim, map.dim)
            .copy_from(&d.node_vector(Slot::Energy, n));
    }
    out
}

fn energy_segments(map: &NodeVarMap) -> Vec<Segment> {
    map.energy_blocks()
        .iter()
        .enumerate()
        .map(|(i, &b)| (i * map.dim, map.dim, map.block_offset(b)))
        .collect()
}

/// Upper bound of p_E,k = 1/2 sum_n u_n^H A_bar_kn u_n over the node budget
/// set, from u_n^H A_tilde_E,n u_n <= 2 rho T p_node,n / tau on each subband.
pub fn node_input_power_cap(forms: &QuadraticForms, cfg: &SystemConfig, tau: f64, k: usize) -> f64 {
    (0..cfg.n)
        .map(|n| {
            let cap = 2.0 * cfg.rho * cfg.t * cfg.p_rf_node[n] / tau;
            let mu =
                crate::linalg::max_generalized_eigenvalue(&forms.a_bar[k][n], &forms.a_tilde_e[n])
                    .unwrap_or(f64::INFINITY);
            0.5 * mu * cap
        })
        .sum()
}

/// Upper bound of p_E,k = 1/2 sum_n s_n^H Xi_kn s_n over the transmitter
/// budgets |s_jn|^2 <= 2 rho T p_tx,jn / tau, using |Xi_ij| <= sqrt(Xi_ii Xi_jj).
pub fn waveform_input_power_cap(xi: &[HermitianMatrix], cfg: &SystemConfig, tau: f64) -> f64 {
    xi.iter()
        .enumerate()
        .map(|(n, x)| {
            let s: f64 = (0..cfg.k)
                .map(|j| {
                    (x[(j, j)].re.max(0.0) * 2.0 * cfg.rho * cfg.t * cfg.p_rf_tx[j][n] / tau).sqrt()
                })
                .sum();
            0.5 * s * s
        })
        .sum()
}

/// Every surrogate of the node step, built at `design`.
pub fn node_pack(
    forms: &QuadraticForms,
    design: &Design,
    cfg: &SystemConfig,
    map: &NodeVarMap,
    kind: C5Kind,
) -> Result<SurrogatePack, BuildError> {
    node_pack_scaled(forms, design, cfg, map, kind, 1.0)
}

/// As [`node_pack`] with the energy curvature constant multiplied by
/// `beta_scale`. Only `beta_scale >= 1` gives a guaranteed minorizer.
pub fn node_pack_scaled(
    forms: &QuadraticForms,
    design: &Design,
    cfg: &SystemConfig,
    map: &NodeVarMap,
    kind: C5Kind,
    beta_scale: f64,
) -> Result<SurrogatePack, BuildError> {
    let tau = design.tau;
    let u0: Vec<ComplexVector> = (0..cfg.n)
        .map(|n| design.node_vector(Slot::Info, n))
        .collect();
    let c5 = c5_surrogate(forms, &u0, tau, cfg, kind)?;
    let x0 = stacked_energy_vector(design, map);
    let c4 = (0..cfg.k)
        .map(|k| {
            (cfg.e_min[k] > 0.0).then(|| {
                let a = stacked_energy_form(forms, map, k);
                let lam = block_max_eigenvalue(&a, map.dim);
                let w_max = node_input_power_cap(forms, cfg, tau, k);
                c4_surrogate(
                    &a,
                    &x0,
                    tau,
                    beta_scale * beta_bound_within(lam, tau, cfg, w_max),
                    cfg,
                )
            })
        })
        .collect();
    Ok(SurrogatePack {
        c5,
        c4,
        expansion: design.clone(),
    })
}

/// lambda_max of a block-diagonal matrix with square blocks of size `d`.
fn block_max_eigenvalue(a: &HermitianMatrix, d: usize) -> f64 {
    (0..a.nrows() / d)
        .map(|i| crate::linalg::max_eigenvalue(&a.view((i * d, i * d), (d, d)).into_owned()))
        .fold(0.0, f64::max)
}

fn check_tau(tau: f64, cfg: &SystemConfig) -> Result<(), BuildError> {
    if !(tau > 0.0 && tau < cfg.t) {
        return Err(BuildError::Precondition(format!(
            "tau = {tau} must lie strictly inside (0, T = {})",
            cfg.t
        )));
    }
    Ok(())
}

/// Alpha start just inside the rate constraints.
fn alpha_start(alpha0: f64) -> f64 {
    alpha0 - 1e-3 * (1.0 + alpha0.abs())
}

/// Node subproblem (relay matrices or IRS vectors). Returns the problem, a
/// start vector at the expansion point and the surrogate pack.
pub fn build_node_subproblem(
    forms: &QuadraticForms,
    design: &Design,
    cfg: &SystemConfig,
    map: &NodeVarMap,
    kind: C5Kind,
) -> Result<(ConvexSubproblem, Vec<f64>, SurrogatePack), BuildError> {
    build_node_subproblem_scaled(forms, design, cfg, map, kind, 1.0)
}

pub fn build_node_subproblem_scaled(
    forms: &QuadraticForms,
    design: &Design,
    cfg: &SystemConfig,
    map: &NodeVarMap,
    kind: C5Kind,
    beta_scale: f64,
) -> Result<(ConvexSubproblem, Vec<f64>, SurrogatePack), BuildError> {
    let tau = design.tau;
    check_tau(tau, cfg)?;
    let pack = node_pack_scaled(forms, design, cfg, map, kind, beta_scale)?;
    let mut sp = ConvexSubproblem::new(map.n_vars(), 0);
    sp.blocks = map.var_blocks();
    let (t, rho) = (cfg.t, cfg.rho);
    for n in 0..cfg.n {
        let budget = t * cfg.p_rf_node[n];
        let s = 1.0 / budget.max(f64::MIN_POSITIVE);
        let f = SmoothFn {
            quad: vec![
                quad_at(
                    &forms.a_tilde_e[n],
                    map.offset(Slot::Energy, n),
                    s * tau / (2.0 * rho),
                ),
                quad_at(
                    &forms.a_tilde_i[n],
                    map.offset(Slot::Info, n),
                    s * (t - tau) / (2.0 * rho),
                ),
            ],
            constant: -1.0,
            ..Default::default()
        };
        sp.push(Constraint::le0(format!("C3[n={n}]"), f));
    }
    let esegs = energy_segments(map);
    for (k, c4) in pack.c4.iter().enumerate() {
        if let Some(p) = c4 {
            let mut f = concave_to_smooth(&p.surrogate, &esegs);
            f.constant -= cfg.e_min[k];
            sp.push(Constraint::ge0(
                format!("C4[k={k}]"),
                f.scaled(1.0 / cfg.e_min[k]),
            ));
        }
    }
    let mut alpha0 = f64::INFINITY;
    let x_start = map.pack(design, 0.0);
    for k in 0..cfg.k {
        let mut f = SmoothFn::default();
        let mut at0 = 0.0;
        for n in 0..cfg.n {
            let seg = [(0, map.dim, map.offset(Slot::Info, n))];
            let piece = concave_to_smooth(&pack.c5[k][n], &seg);
            at0 += pack.c5[k][n].value(&design.node_vector(Slot::Info, n));
            f.quad.extend(piece.quad);
            f.prox.extend(piece.prox);
            f.lin.extend(piece.lin);
            f.logs.extend(piece.logs);
            f.constant += piece.constant;
        }
        f.lin.push((0, -1.0));
        alpha0 = alpha0.min(at0);
        sp.push(Constraint::ge0(format!("C5[k={k}]"), f));
    }
    if map.mode == Mode::ActiveIrs {
        let mut seen = Vec::new();
        for slot in [Slot::Energy, Slot::Info] {
            let b = map.block(slot, 0);
            if seen.contains(&b) {
                continue;
            }
            seen.push(b);
            let off = map.block_offset(b);
            let th0 = design.node_vector(slot, 0);
            for (i, z) in th0.iter().enumerate() {
                let r = z.norm();
                if r == 0.0 {
                    return Err(SurrogateError::ZeroPhase.into());
                }
                let f = SmoothFn::linear(
                    vec![(off + 2 * i, z.re / r), (off + 2 * i + 1, z.im / r)],
                    -1.0,
                );
                sp.push(Constraint::ge0(format!("C_IRS[b={b},m={i}]"), f));
            }
        }
    }
    let mut x0 = x_start;
    x0[0] = alpha_start(alpha0);
    Ok((sp, x0, pack))
}

/// Placement of waveform variables. Index 0 is alpha, then s_E,n (unless
/// fixed) as interleaved complex K-vectors, then p_I,n.
#[derive(Debug, Clone)]
pub struct WaveformVarMap {
    pub k: usize,
    pub n: usize,
    pub fix_s: bool,
}

impl WaveformVarMap {
    pub fn s_offset(&self, n: usize) -> usize {
        1 + 2 * self.k * n
    }

    pub fn p_index(&self, k: usize, n: usize) -> usize {
        let base = if self.fix_s {
            1
        } else {
            1 + 2 * self.k * self.n
        };
        base + self.k * n + k
    }

    pub fn n_vars(&self) -> usize {
        self.p_index(0, self.n)
    }

    pub fn pack(&self, d: &Design, alpha: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.n_vars()];
        x[0] = alpha;
        for n in 0..self.n {
            if !self.fix_s {
                let r = to_real(&d.s_e[n]);
                let o = self.s_offset(n);
                x[o..o + r.len()].copy_from_slice(&r);
            }
            for k in 0..self.k {
                x[self.p_index(k, n)] = d.p_i[n][k];
            }
        }
        x
    }

    pub fn unpack(&self, x: &[f64], d: &mut Design) {
        for n in 0..self.n {
            if !self.fix_s {
                let o = self.s_offset(n);
                d.s_e[n] = from_real(&x[o..o + 2 * self.k]);
            }
            for k in 0..self.k {
                d.p_i[n][k] = x[self.p_index(k, n)];
            }
        }
    }
}

/// Quantities of the waveform step that depend only on the fixed node design.
#[derive(Debug, Clone)]
pub struct WaveformData {
    /// `[n]` H^H U_E^H U_E H.
    pub v_e: Vec<HermitianMatrix>,
    /// `[n][k]` diagonal of H^H U_I^H U_I H.
    pub v_i_diag: Vec<DVector<f64>>,
    /// `[n]` sigma_n^2 ||U_E||^2 and sigma_n^2 ||U_I||^2.
    pub noise_e: Vec<f64>,
    pub noise_i: Vec<f64>,
    /// `[k][n]`
    pub xi: Vec<Vec<HermitianMatrix>>,
    /// `[k][n]` row psi_{k, ., n}.
    pub psi: Vec<Vec<DVector<f64>>>,
    /// `[k][n]` sigma_n^2 psi~_{k,n} + zeta_a.
    pub zeta_b: Vec<Vec<f64>>,
}

pub fn waveform_data(design: &Design, ch: &ChannelSet, cfg: &SystemConfig) -> WaveformData {
    let mut v_e = Vec::new();
    let mut v_i_diag = Vec::new();
    let mut noise_e = Vec::new();
    let mut noise_i = Vec::new();
    for n in 0..cfg.n {
        let h = &ch.h[n];
        let ue = design.u_e(n);
        let ui = design.u_i(n);
        let ve = h.adjoint() * ue.adjoint() * &ue * h;
        let vi = h.adjoint() * ui.adjoint() * &ui * h;
        v_e.push(crate::linalg::hermitian_part(&ve));
        v_i_diag.push(DVector::from_fn(cfg.k, |j, _| vi[(j, j)].re));
        noise_e.push(cfg.sigma2_node[n] * ue.norm_squared());
        noise_i.push(cfg.sigma2_node[n] * ui.norm_squared());
    }
    let psi_rows = (0..cfg.k)
        .map(|k| {
            (0..cfg.n)
                .map(|n| DVector::from_fn(cfg.k, |j, _| psi(design, ch, k, j, n)))
                .collect()
        })
        .collect();
    let zeta_b = (0..cfg.k)
        .map(|k| {
            (0..cfg.n)
                .map(|n| cfg.sigma2_node[n] * psi_tilde(design, ch, k, n) + cfg.zeta_a(k, n))
                .collect()
        })
        .collect();
    WaveformData {
        v_e,
        v_i_diag,
        noise_e,
        noise_i,
        xi: assemble_xi(design, ch, cfg),
        psi: psi_rows,
        zeta_b,
    }
}

/// Waveform/power subproblem at fixed node design and tau. With `fix_s` the
/// energy waveforms are constants and only the powers are optimized.
pub fn build_waveform_subproblem(
    design: &Design,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    fix_s: bool,
) -> Result<
    (
        ConvexSubproblem,
        Vec<f64>,
        WaveformVarMap,
        Vec<Option<C4Pieces>>,
    ),
    BuildError,
> {
    build_waveform_subproblem_scaled(design, ch, cfg, fix_s, 1.0)
}

/// As [`build_waveform_subproblem`] with the energy curvature constant
/// multiplied by `beta_scale`.
pub fn build_waveform_subproblem_scaled(
    design: &Design,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    fix_s: bool,
    beta_scale: f64,
) -> Result<
    (
        ConvexSubproblem,
        Vec<f64>,
        WaveformVarMap,
        Vec<Option<C4Pieces>>,
    ),
    BuildError,
> {
    let tau = design.tau;
    check_tau(tau, cfg)?;
    let data = waveform_data(design, ch, cfg);
    let map = WaveformVarMap {
        k: cfg.k,
        n: cfg.n,
        fix_s,
    };
    let (t, rho) = (cfg.t, cfg.rho);
    let (ce, ci) = (tau / (2.0 * rho), (t - tau) / (2.0 * rho));
    let mut sp = ConvexSubproblem::new(map.n_vars(), 0);
    sp.blocks.push(VarBlock {
        name: "alpha".into(),
        offset: 0,
        len: 1,
        complex: false,
    });
    if !fix_s {
        for n in 0..cfg.n {
            sp.blocks.push(VarBlock {
                name: format!("s_e{n}"),
                offset: map.s_offset(n),
                len: cfg.k,
                complex: true,
            });
        }
    }
    for n in 0..cfg.n {
        sp.blocks.push(VarBlock {
            name: format!("p_i{n}"),
            offset: map.p_index(0, n),
            len: cfg.k,
            complex: false,
        });
    }

    for n in 0..cfg.n {
        for k in 0..cfg.k {
            let budget = t * cfg.p_rf_tx[k][n];
            let s = 1.0 / budget.max(f64::MIN_POSITIVE);
            let mut f = SmoothFn::linear(vec![(map.p_index(k, n), s * ci)], -1.0);
            if fix_s {
                f.constant += s * ce * design.s_e[n][k].norm_sqr();
            } else {
                let o = map.s_offset(n) + 2 * k;
                f.quad.push(QuadBlock {
                    offset: o,
                    mat: nalgebra::DMatrix::identity(2, 2) * (s * ce),
                });
            }
            sp.push(Constraint::le0(format!("C2[k={k},n={n}]"), f));
        }
    }
    for n in 0..cfg.n {
        let budget = t * cfg.p_rf_node[n];
        let s = 1.0 / budget.max(f64::MIN_POSITIVE);
        let mut f = SmoothFn::linear(
            (0..cfg.k)
                .map(|k| (map.p_index(k, n), s * ci * data.v_i_diag[n][k]))
                .collect(),
            s * (ce * data.noise_e[n] + ci * data.noise_i[n]) - 1.0,
        );
        if fix_s {
            f.constant += s * ce * crate::linalg::quad_form(&data.v_e[n], &design.s_e[n]);
        } else {
            f.quad.push(quad_at(&data.v_e[n], map.s_offset(n), s * ce));
        }
        sp.push(Constraint::le0(format!("C3[n={n}]"), f));
    }
    let mut c4_out = vec![None; cfg.k];
    if !fix_s {
        let kd = cfg.k;
        let mut x0 = ComplexVector::zeros(kd * cfg.n);
        for n in 0..cfg.n {
            x0.rows_mut(n * kd, kd).copy_from(&design.s_e[n]);
        }
        let segs: Vec<Segment> = (0..cfg.n).map(|n| (n * kd, kd, map.s_offset(n))).collect();
        for k in 0..cfg.k {
            if cfg.e_min[k] <= 0.0 {
                continue;
            }
            let mut a = HermitianMatrix::zeros(kd * cfg.n, kd * cfg.n);
            let mut lam = 0.0f64;
            for n in 0..cfg.n {
                a.view_mut((n * kd, n * kd), (kd, kd))
                    .copy_from(&data.xi[k][n]);
                lam = lam.max(crate::linalg::max_eigenvalue(&data.xi[k][n]));
            }
            let w_max = waveform_input_power_cap(&data.xi[k], cfg, tau);
            let p = c4_surrogate(
                &a,
                &x0,
                tau,
                beta_scale * beta_bound_within(lam, tau, cfg, w_max),
                cfg,
            );
            let mut f = concave_to_smooth(&p.surrogate, &segs);
            f.constant -= cfg.e_min[k];
            sp.push(Constraint::ge0(
                format!("C4[k={k}]"),
                f.scaled(1.0 / cfg.e_min[k]),
            ));
            c4_out[k] = Some(p);
        }
    }
    let mut alpha0 = f64::INFINITY;
    for k in 0..cfg.k {
        let mut f = SmoothFn::linear(vec![(0, -1.0)], 0.0);
        let mut at0 = 0.0;
        for n in 0..cfg.n {
            let s = c5_power_surrogate(&data.psi[k][n], k, data.zeta_b[k][n], &design.p_i[n]);
            at0 += s.value(&design.p_i[n]);
            let den0 = s.b.dot(&s.p0) + s.zeta;
            f.logs.push(LogTerm {
                coef: LOG2_E,
                a: (0..cfg.k).map(|j| (map.p_index(j, n), s.q[j])).collect(),
                b: s.zeta,
            });
            for j in 0..cfg.k {
                if s.b[j] != 0.0 {
                    f.lin.push((map.p_index(j, n), -LOG2_E * s.b[j] / den0));
                }
            }
            f.constant += -den0.log2() + LOG2_E * s.b.dot(&s.p0) / den0;
        }
        alpha0 = alpha0.min(at0);
        sp.push(Constraint::ge0(format!("C5[k={k}]"), f));
    }
    for n in 0..cfg.n {
        for k in 0..cfg.k {
            sp.add_lower_bound(map.p_index(k, n), 0.0);
        }
    }
    let mut x0 = map.pack(design, 0.0);
    x0[0] = alpha_start(alpha0);
    Ok((sp, x0, map, c4_out))
}

/// min_k sum_n log2(1 + SINR) at a design (the alpha of the subproblems).
pub fn rate_sum_min(design: &Design, ch: &ChannelSet, cfg: &SystemConfig) -> f64 {
    (0..cfg.k)
        .map(|k| {
            (0..cfg.n)
                .map(|n| (1.0 + crate::model::sinr(design, ch, cfg, k, n)).log2())
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Convenience: forms at the design, then the node subproblem.
pub fn build_node_subproblem_at(
    design: &Design,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    map: &NodeVarMap,
    kind: C5Kind,
) -> Result<(ConvexSubproblem, Vec<f64>, SurrogatePack), BuildError> {
    build_node_subproblem_at_scaled(design, ch, cfg, map, kind, 1.0)
}

pub fn build_node_subproblem_at_scaled(
    design: &Design,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    map: &NodeVarMap,
    kind: C5Kind,
    beta_scale: f64,
) -> Result<(ConvexSubproblem, Vec<f64>, SurrogatePack), BuildError> {
    let forms = assemble_quadratic_forms(design, ch, cfg);
    build_node_subproblem_scaled(&forms, design, cfg, map, kind, beta_scale)
}
