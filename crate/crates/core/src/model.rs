//! Physical-layer quantities: power budgets, SINR, rates, harvested energy and
//! the quadratic forms in the node variables (relay matrices or IRS vectors).

use crate::channel::ChannelSet;
use crate::linalg::{
    hadamard, hermitian_part, kron, quad_form, vec, ComplexMatrix, ComplexVector, HermitianMatrix,
    C64,
};
use crate::serde_cplx;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Relay,
    ActiveIrs,
}

impl Mode {
    pub fn rho(self) -> f64 {
        match self {
            Mode::Relay => 2.0,
            Mode::ActiveIrs => 1.0,
        }
    }

    /// Length of the vectorized node variable: M^2 for a relay, M for an IRS.
    pub fn node_dim(self, m: usize) -> usize {
        match self {
            Mode::Relay => m * m,
            Mode::ActiveIrs => m,
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "relay" => Ok(Mode::Relay),
            "irs" | "active_irs" => Ok(Mode::ActiveIrs),
            other => Err(format!("unknown mode '{other}' (expected relay|irs)")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{0}")]
    Invalid(String),
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// All scenario constants in SI units (W, J, s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub mode: Mode,
    pub t: f64,
    pub rho: f64,
    /// `[k][n]` transmitter budget.
    pub p_rf_tx: Vec<Vec<f64>>,
    /// `[n]` relay budget, or the single IRS budget repeated per subband.
    pub p_rf_node: Vec<f64>,
    pub sigma2_node: Vec<f64>,
    pub sigma2_rx: Vec<Vec<f64>>,
    pub delta2_rx: Vec<Vec<f64>>,
    pub a_t: f64,
    pub b_t: f64,
    pub c_t: f64,
    pub e_min: Vec<f64>,
}

impl SystemConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |s: String| Err(ConfigError::Invalid(s));
        if self.k == 0 || self.n == 0 || self.m == 0 {
            return bad("K, N, M must be positive".into());
        }
        if self.rho != self.mode.rho() {
            return bad(format!(
                "rho {} does not match mode {:?}",
                self.rho, self.mode
            ));
        }
        if !(self.t > 0.0) {
            return bad("T must be positive".into());
        }
        let kn_ok = |v: &Vec<Vec<f64>>| {
            v.len() == self.k
                && v.iter()
                    .all(|r| r.len() == self.n && r.iter().all(|x| *x >= 0.0))
        };
        if !kn_ok(&self.p_rf_tx) || !kn_ok(&self.sigma2_rx) || !kn_ok(&self.delta2_rx) {
            return bad("per-(k,n) arrays must be K x N and nonnegative".into());
        }
        let n_ok = |v: &Vec<f64>| v.len() == self.n && v.iter().all(|x| *x >= 0.0);
        if !n_ok(&self.p_rf_node) || !n_ok(&self.sigma2_node) {
            return bad("per-n arrays must have N nonnegative entries".into());
        }
        if self.e_min.len() != self.k || self.e_min.iter().any(|e| *e < 0.0) {
            return bad("E_min must have K nonnegative entries".into());
        }
        Ok(())
    }

    pub fn node_dim(&self) -> usize {
        self.mode.node_dim(self.m)
    }

    /// sigma_k^2 + delta_k^2 for pair k on subband n.
    pub fn zeta_a(&self, k: usize, n: usize) -> f64 {
        self.sigma2_rx[k][n] + self.delta2_rx[k][n]
    }
}

/// Scalar scenario description in engineering units, expanded to a
/// [`SystemConfig`] once. Powers and noises are in dBm, E_min in J.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub mode: Mode,
    pub k: usize,
    pub n: usize,
    pub m: usize,
    #[serde(default = "one")]
    pub t: f64,
    pub p_rf_tx_dbm: f64,
    pub p_rf_node_dbm: f64,
    pub sigma2_node_dbm: f64,
    pub sigma2_rx_dbm: f64,
    pub delta2_rx_dbm: f64,
    #[serde(default = "default_eh")]
    pub eh: [f64; 3],
    pub e_min: f64,
}

fn one() -> f64 {
    1.0
}

fn default_eh() -> [f64; 3] {
    [-0.11, -1.17, -12.0]
}

impl ScenarioParams {
    /// Full-scale scenario: K=5, N=8, M=6, 28 dBm relay/transmitters, 20 dBm IRS,
    /// -80 dBm noise (-100 dBm at the IRS), E_min = 10 uJ.
    pub fn full_scale(mode: Mode) -> Self {
        let (node_dbm, node_noise) = match mode {
            Mode::Relay => (28.0, -80.0),
            Mode::ActiveIrs => (20.0, -100.0),
        };
        ScenarioParams {
            mode,
            k: 5,
            n: 8,
            m: 6,
            t: 1.0,
            p_rf_tx_dbm: 28.0,
            p_rf_node_dbm: node_dbm,
            sigma2_node_dbm: node_noise,
            sigma2_rx_dbm: -80.0,
            delta2_rx_dbm: -80.0,
            eh: default_eh(),
            e_min: 10e-6,
        }
    }

    /// CI-sized profile (K=3, N=4, M=4) with the full-scale power levels.
    pub fn desk(mode: Mode) -> Self {
        ScenarioParams {
            k: 3,
            n: 4,
            m: 4,
            e_min: match mode {
                Mode::Relay => DESK_E_MIN,
                Mode::ActiveIrs => DESK_E_MIN_IRS,
            },
            ..Self::full_scale(mode)
        }
    }

    pub fn to_config(&self) -> Result<SystemConfig, ConfigError> {
        let (k, n) = (self.k, self.n);
        let kn = |dbm: f64| vec![vec![dbm_to_watts(dbm); n]; k];
        let cfg = SystemConfig {
            k,
            n,
            m: self.m,
            mode: self.mode,
            t: self.t,
            rho: self.mode.rho(),
            p_rf_tx: kn(self.p_rf_tx_dbm),
            p_rf_node: vec![dbm_to_watts(self.p_rf_node_dbm); n],
            sigma2_node: vec![dbm_to_watts(self.sigma2_node_dbm); n],
            sigma2_rx: kn(self.sigma2_rx_dbm),
            delta2_rx: kn(self.delta2_rx_dbm),
            a_t: self.eh[0],
            b_t: self.eh[1],
            c_t: self.eh[2],
            e_min: vec![self.e_min; k],
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Energy target of the desk profile. The full-scale 10 uJ target sits above
/// what the K=3, N=4, M=4 geometry can harvest for most seeds.
pub const DESK_E_MIN: f64 = 1e-7;

/// The IRS path carries far less power than the relay at desk scale.
pub const DESK_E_MIN_IRS: f64 = 5e-10;

/// Relay amplification matrices or IRS reflection vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeDesign {
    Relay {
        #[serde(with = "serde_cplx::matrix_list")]
        u_e: Vec<ComplexMatrix>,
        #[serde(with = "serde_cplx::matrix_list")]
        u_i: Vec<ComplexMatrix>,
    },
    Irs {
        #[serde(with = "serde_cplx::vector")]
        theta_e: ComplexVector,
        #[serde(with = "serde_cplx::vector")]
        theta_i: ComplexVector,
    },
}

/// Full decision variable set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub tau: f64,
    /// `[n]` energy waveform across transmitters (length K).
    #[serde(with = "serde_cplx::vector_list")]
    pub s_e: Vec<ComplexVector>,
    /// `[n]` information powers across transmitters (length K).
    #[serde(with = "serde_cplx::real_vector_list")]
    pub p_i: Vec<DVector<f64>>,
    pub node: NodeDesign,
}

/// Energy slot or information slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Energy,
    Info,
}

impl Design {
    pub fn mode(&self) -> Mode {
        match self.node {
            NodeDesign::Relay { .. } => Mode::Relay,
            NodeDesign::Irs { .. } => Mode::ActiveIrs,
        }
    }

    pub fn node_matrix(&self, slot: Slot, n: usize) -> ComplexMatrix {
        match (&self.node, slot) {
            (NodeDesign::Relay { u_e, .. }, Slot::Energy) => u_e[n].clone(),
            (NodeDesign::Relay { u_i, .. }, Slot::Info) => u_i[n].clone(),
            (NodeDesign::Irs { theta_e, .. }, Slot::Energy) => {
                ComplexMatrix::from_diagonal(theta_e)
            }
            (NodeDesign::Irs { theta_i, .. }, Slot::Info) => ComplexMatrix::from_diagonal(theta_i),
        }
    }

    pub fn u_e(&self, n: usize) -> ComplexMatrix {
        self.node_matrix(Slot::Energy, n)
    }

    pub fn u_i(&self, n: usize) -> ComplexMatrix {
        self.node_matrix(Slot::Info, n)
    }

    /// The node variable in the space the quadratic forms act on: vec(U) for a
    /// relay, theta for an IRS.
    pub fn node_vector(&self, slot: Slot, n: usize) -> ComplexVector {
        match (&self.node, slot) {
            (NodeDesign::Relay { u_e, .. }, Slot::Energy) => vec(&u_e[n]),
            (NodeDesign::Relay { u_i, .. }, Slot::Info) => vec(&u_i[n]),
            (NodeDesign::Irs { theta_e, .. }, Slot::Energy) => theta_e.clone(),
            (NodeDesign::Irs { theta_i, .. }, Slot::Info) => theta_i.clone(),
        }
    }

    /// Q_I,n = Diag(p_I,n).
    pub fn q_i(&self, n: usize) -> ComplexMatrix {
        ComplexMatrix::from_diagonal(&self.p_i[n].map(C64::from))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("design serializes")
    }
}

/// g_k,n as a column vector (k-th row of G_n).
pub fn g_row(ch: &ChannelSet, k: usize, n: usize) -> ComplexVector {
    ch.g[n].row(k).transpose()
}

/// h_j,n (j-th column of H_n).
pub fn h_col(ch: &ChannelSet, j: usize, n: usize) -> ComplexVector {
    ch.h[n].column(j).into_owned()
}

fn bilinear_t(g: &ComplexVector, u: &ComplexMatrix, h: &ComplexVector) -> C64 {
    // g^T U h
    (g.transpose() * u * h)[(0, 0)]
}

/// psi_{k,j,n} = |g_k^T U_I h_j|^2.
pub fn psi(design: &Design, ch: &ChannelSet, k: usize, j: usize, n: usize) -> f64 {
    bilinear_t(&g_row(ch, k, n), &design.u_i(n), &h_col(ch, j, n)).norm_sqr()
}

/// psi~_{k,n} = ||g_k^T U_I||^2.
pub fn psi_tilde(design: &Design, ch: &ChannelSet, k: usize, n: usize) -> f64 {
    (g_row(ch, k, n).transpose() * design.u_i(n)).norm_squared()
}

/// SINR from the channel products directly.
pub fn sinr(design: &Design, ch: &ChannelSet, cfg: &SystemConfig, k: usize, n: usize) -> f64 {
    let p = &design.p_i[n];
    let signal = p[k] * psi(design, ch, k, k, n);
    let interference: f64 = (0..cfg.k)
        .filter(|&j| j != k)
        .map(|j| p[j] * psi(design, ch, k, j, n))
        .sum();
    let noise = cfg.sigma2_node[n] * psi_tilde(design, ch, k, n) + cfg.zeta_a(k, n);
    signal / (interference + noise)
}

/// SINR through the quadratic forms A and A_hat.
pub fn sinr_vectorized(
    forms: &QuadraticForms,
    design: &Design,
    cfg: &SystemConfig,
    k: usize,
    n: usize,
) -> f64 {
    let u = design.node_vector(Slot::Info, n);
    quad_form(&forms.a[k][n], &u) / (quad_form(&forms.a_hat[k][n], &u) + cfg.zeta_a(k, n))
}

pub fn rate_prefactor(tau: f64, cfg: &SystemConfig) -> f64 {
    (cfg.t - tau) / (cfg.rho * cfg.t)
}

pub fn pair_rate(design: &Design, ch: &ChannelSet, cfg: &SystemConfig, k: usize) -> f64 {
    let sum: f64 = (0..cfg.n)
        .map(|n| (1.0 + sinr(design, ch, cfg, k, n)).log2())
        .sum();
    rate_prefactor(design.tau, cfg) * sum
}

pub fn pair_rates(design: &Design, ch: &ChannelSet, cfg: &SystemConfig) -> Vec<f64> {
    (0..cfg.k).map(|k| pair_rate(design, ch, cfg, k)).collect()
}

pub fn min_rate(design: &Design, ch: &ChannelSet, cfg: &SystemConfig) -> f64 {
    pair_rates(design, ch, cfg)
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

/// p_E,k = 1/2 sum_n |g_k^T U_E H s_E|^2.
pub fn harvester_input_power(design: &Design, ch: &ChannelSet, k: usize) -> f64 {
    0.5 * (0..ch.h.len())
        .map(|n| {
            let x = &ch.h[n] * &design.s_e[n];
            bilinear_t(&g_row(ch, k, n), &design.u_e(n), &x).norm_sqr()
        })
        .sum::<f64>()
}

/// p_E,k through the vectorized node form A_bar.
pub fn harvester_input_power_vectorized(forms: &QuadraticForms, design: &Design, k: usize) -> f64 {
    0.5 * (0..forms.n())
        .map(|n| quad_form(&forms.a_bar[k][n], &design.node_vector(Slot::Energy, n)))
        .sum::<f64>()
}

/// p_E,k through the waveform form Xi.
pub fn harvester_input_power_waveform(forms: &QuadraticForms, design: &Design, k: usize) -> f64 {
    0.5 * (0..forms.n())
        .map(|n| quad_form(&forms.xi[k][n], &design.s_e[n]))
        .sum::<f64>()
}

/// Nonlinear harvester curve exp(a ln^2 p) p^b e^c with natural logs. Zero at p = 0.
pub fn eh_curve(p: f64, cfg: &SystemConfig) -> f64 {
    eh_curve_abc(p, cfg.a_t, cfg.b_t, cfg.c_t)
}

pub fn eh_curve_abc(p: f64, a: f64, b: f64, c: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    let l = p.ln();
    (a * l * l + b * l + c).exp()
}

/// d/dp of the harvester curve.
pub fn eh_curve_derivative(p: f64, cfg: &SystemConfig) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    let l = p.ln();
    eh_curve(p, cfg) * (2.0 * cfg.a_t * l + cfg.b_t) / p
}

/// d^2/dp^2 of the harvester curve.
pub fn eh_curve_second_derivative(p: f64, cfg: &SystemConfig) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    let l = p.ln();
    let g = 2.0 * cfg.a_t * l + cfg.b_t;
    eh_curve(p, cfg) / (p * p) * (g * g + 2.0 * cfg.a_t - g)
}

pub fn energy_from_power(tau: f64, p_e: f64, cfg: &SystemConfig) -> f64 {
    tau / cfg.rho * eh_curve(p_e, cfg)
}

pub fn harvested_energy(design: &Design, ch: &ChannelSet, cfg: &SystemConfig, k: usize) -> f64 {
    energy_from_power(design.tau, harvester_input_power(design, ch, k), cfg)
}

/// Transmitter energy slack T p_rf - tau/(2 rho)|s|^2 - (T-tau)/(2 rho) p.
pub fn tx_energy_check(design: &Design, cfg: &SystemConfig, k: usize, n: usize) -> f64 {
    let tau = design.tau;
    let s2 = design.s_e[n][k].norm_sqr();
    let p = design.p_i[n][k];
    cfg.t * cfg.p_rf_tx[k][n] - tau / (2.0 * cfg.rho) * s2 - (cfg.t - tau) / (2.0 * cfg.rho) * p
}

/// Left side of the node energy constraint from V_E, V_I and the noise traces.
pub fn node_energy_lhs(design: &Design, ch: &ChannelSet, cfg: &SystemConfig, n: usize) -> f64 {
    let h = &ch.h[n];
    let ue = design.u_e(n);
    let ui = design.u_i(n);
    let ve = h.adjoint() * ue.adjoint() * &ue * h;
    let vi = h.adjoint() * ui.adjoint() * &ui * h;
    let sig = cfg.sigma2_node[n];
    let energy = quad_form(&ve, &design.s_e[n]) + sig * ue.norm_squared();
    let info = (design.q_i(n) * vi).trace().re + sig * ui.norm_squared();
    let (tau, t, rho) = (design.tau, cfg.t, cfg.rho);
    tau / (2.0 * rho) * energy + (t - tau) / (2.0 * rho) * info
}

/// Left side of the node energy constraint through A_tilde_E and A_tilde_I.
pub fn node_energy_lhs_vectorized(
    forms: &QuadraticForms,
    design: &Design,
    cfg: &SystemConfig,
    n: usize,
) -> f64 {
    let (tau, t, rho) = (design.tau, cfg.t, cfg.rho);
    let ue = design.node_vector(Slot::Energy, n);
    let ui = design.node_vector(Slot::Info, n);
    tau / (2.0 * rho) * quad_form(&forms.a_tilde_e[n], &ue)
        + (t - tau) / (2.0 * rho) * quad_form(&forms.a_tilde_i[n], &ui)
}

pub fn node_energy_check(design: &Design, ch: &ChannelSet, cfg: &SystemConfig, n: usize) -> f64 {
    cfg.t * cfg.p_rf_node[n] - node_energy_lhs(design, ch, cfg, n)
}

/// Quadratic forms of the model in the node variable, plus the waveform-side
/// matrices (Xi, psi) that depend on the node design.
#[derive(Debug, Clone)]
pub struct QuadraticForms {
    pub mode: Mode,
    pub a_tilde_e: Vec<HermitianMatrix>,
    pub a_tilde_i: Vec<HermitianMatrix>,
    /// `[k][n]`
    pub a: Vec<Vec<HermitianMatrix>>,
    pub a_hat: Vec<Vec<HermitianMatrix>>,
    pub a_bar: Vec<Vec<HermitianMatrix>>,
    pub b: Vec<Vec<HermitianMatrix>>,
    /// `[k][n]`, K x K: H^H U_E^H g* g^T U_E H.
    pub xi: Vec<Vec<HermitianMatrix>>,
}

impl QuadraticForms {
    pub fn n(&self) -> usize {
        self.a_tilde_e.len()
    }
}

/// x (op) y where op is the Kronecker product for a relay and the Hadamard
/// product for an IRS.
fn combine(x: &ComplexMatrix, y: &ComplexMatrix, mode: Mode) -> ComplexMatrix {
    match mode {
        Mode::Relay => kron(x, y),
        Mode::ActiveIrs => hadamard(x, y).expect("same shape"),
    }
}

/// Node-variable forms only (A_tilde, A, A_hat, A_bar, B). They depend on the
/// waveforms and powers but not on the node design.
pub fn assemble_node_forms(
    ch: &ChannelSet,
    s_e: &[ComplexVector],
    p_i: &[DVector<f64>],
    cfg: &SystemConfig,
) -> (
    Vec<HermitianMatrix>,
    Vec<HermitianMatrix>,
    Vec<Vec<HermitianMatrix>>,
    Vec<Vec<HermitianMatrix>>,
    Vec<Vec<HermitianMatrix>>,
) {
    let (k_n, n_n, m) = (cfg.k, cfg.n, cfg.m);
    let mode = cfg.mode;
    let dim = mode.node_dim(m);
    let eye_m = ComplexMatrix::identity(m, m);
    let eye_d = ComplexMatrix::identity(dim, dim);
    let mut a_tilde_e = Vec::with_capacity(n_n);
    let mut a_tilde_i = Vec::with_capacity(n_n);
    let mut a = vec![Vec::with_capacity(n_n); k_n];
    let mut a_hat = vec![Vec::with_capacity(n_n); k_n];
    let mut a_bar = vec![Vec::with_capacity(n_n); k_n];
    for n in 0..n_n {
        let h = &ch.h[n];
        let sig = C64::from(cfg.sigma2_node[n]);
        let hs = h * &s_e[n];
        let e_cov = (&hs * hs.adjoint()).transpose();
        let q = ComplexMatrix::from_diagonal(&p_i[n].map(C64::from));
        let i_cov = (h * q * h.adjoint()).transpose();
        a_tilde_e.push(hermitian_part(
            &(combine(&e_cov, &eye_m, mode) + &eye_d * sig),
        ));
        a_tilde_i.push(hermitian_part(
            &(combine(&i_cov, &eye_m, mode) + &eye_d * sig),
        ));
        let hh: Vec<ComplexMatrix> = (0..k_n)
            .map(|j| {
                let hj = h_col(ch, j, n);
                (&hj * hj.adjoint()).transpose()
            })
            .collect();
        for k in 0..k_n {
            let g = g_row(ch, k, n);
            let gg = g.conjugate() * g.transpose();
            a[k].push(hermitian_part(
                &(combine(&hh[k], &gg, mode) * C64::from(p_i[n][k])),
            ));
            let mut ah = combine(&eye_m, &gg, mode) * sig;
            for j in (0..k_n).filter(|&j| j != k) {
                ah += combine(&hh[j], &gg, mode) * C64::from(p_i[n][j]);
            }
            a_hat[k].push(hermitian_part(&ah));
            a_bar[k].push(hermitian_part(&combine(&e_cov, &gg, mode)));
        }
    }
    (a_tilde_e, a_tilde_i, a, a_hat, a_bar)
}

/// Xi_{k,n} = H^H U_E^H g* g^T U_E H for every (k, n).
pub fn assemble_xi(
    design: &Design,
    ch: &ChannelSet,
    cfg: &SystemConfig,
) -> Vec<Vec<HermitianMatrix>> {
    (0..cfg.k)
        .map(|k| {
            (0..cfg.n)
                .map(|n| {
                    let w = (g_row(ch, k, n).transpose() * design.u_e(n) * &ch.h[n]).adjoint();
                    hermitian_part(&(&w * w.adjoint()))
                })
                .collect()
        })
        .collect()
}

pub fn assemble_quadratic_forms(
    design: &Design,
    ch: &ChannelSet,
    cfg: &SystemConfig,
) -> QuadraticForms {
    let (a_tilde_e, a_tilde_i, a, a_hat, a_bar) =
        assemble_node_forms(ch, &design.s_e, &design.p_i, cfg);
    let b = a
        .iter()
        .zip(&a_hat)
        .map(|(ak, hk)| ak.iter().zip(hk).map(|(x, y)| x + y).collect())
        .collect();
    QuadraticForms {
        mode: cfg.mode,
        a_tilde_e,
        a_tilde_i,
        a,
        a_hat,
        a_bar,
        b,
        xi: assemble_xi(design, ch, cfg),
    }
}

/// Per-constraint slacks of the original problem. Nonnegative means satisfied.
#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityReport {
    /// C1: min(tau, T - tau).
    pub c1_tau: f64,
    /// C2 `[k][n]`.
    pub c2_tx: Vec<Vec<f64>>,
    /// Smallest information power.
    pub c2_p_nonneg: f64,
    /// C3 `[n]`.
    pub c3_node: Vec<f64>,
    /// C4 `[k]`: E_k - E_min,k.
    pub c4_energy: Vec<f64>,
    /// |theta_m| - 1 for theta_E then theta_I; empty for a relay.
    pub c_irs: Vec<f64>,
    pub rates: Vec<f64>,
    pub energies: Vec<f64>,
    pub feasible: bool,
    pub violations: Vec<String>,
}

pub const FEAS_TOL: f64 = 1e-8;

pub fn feasibility_report(
    design: &Design,
    ch: &ChannelSet,
    cfg: &SystemConfig,
) -> FeasibilityReport {
    feasibility_report_tol(design, ch, cfg, FEAS_TOL)
}

/// Feasibility with a relative tolerance: a slack passes when it is at least
/// `-tol * scale`, where scale is the budget or target it is measured against.
pub fn feasibility_report_tol(
    design: &Design,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    tol: f64,
) -> FeasibilityReport {
    let mut violations = Vec::new();
    let c1 = design.tau.min(cfg.t - design.tau);
    if c1 < -tol * cfg.t {
        violations.push(format!("C1: tau={} outside [0, T]", design.tau));
    }
    let c2_tx: Vec<Vec<f64>> = (0..cfg.k)
        .map(|k| {
            (0..cfg.n)
                .map(|n| tx_energy_check(design, cfg, k, n))
                .collect()
        })
        .collect();
    for k in 0..cfg.k {
        for n in 0..cfg.n {
            if c2_tx[k][n] < -tol * cfg.t * cfg.p_rf_tx[k][n].max(f64::MIN_POSITIVE) {
                violations.push(format!("C2[{k}][{n}]: slack {}", c2_tx[k][n]));
            }
        }
    }
    let c2_p = design
        .p_i
        .iter()
        .flat_map(|p| p.iter().copied())
        .fold(f64::INFINITY, f64::min);
    if c2_p < 0.0 {
        violations.push(format!("C2: negative information power {c2_p}"));
    }
    let c3: Vec<f64> = (0..cfg.n)
        .map(|n| node_energy_check(design, ch, cfg, n))
        .collect();
    for (n, s) in c3.iter().enumerate() {
        if *s < -tol * cfg.t * cfg.p_rf_node[n].max(f64::MIN_POSITIVE) {
            violations.push(format!("C3[{n}]: slack {s}"));
        }
    }
    let energies: Vec<f64> = (0..cfg.k)
        .map(|k| harvested_energy(design, ch, cfg, k))
        .collect();
    let c4: Vec<f64> = energies
        .iter()
        .zip(&cfg.e_min)
        .map(|(e, m)| e - m)
        .collect();
    for (k, s) in c4.iter().enumerate() {
        if *s < -tol * cfg.e_min[k] {
            violations.push(format!("C4[{k}]: energy short by {}", -s));
        }
    }
    let c_irs: Vec<f64> = match &design.node {
        NodeDesign::Relay { .. } => Vec::new(),
        NodeDesign::Irs { theta_e, theta_i } => theta_e
            .iter()
            .chain(theta_i.iter())
            .map(|z| z.norm() - 1.0)
            .collect(),
    };
    for (i, s) in c_irs.iter().enumerate() {
        if *s < -tol {
            violations.push(format!("C_IRS[{i}]: modulus {}", s + 1.0));
        }
    }
    FeasibilityReport {
        c1_tau: c1,
        c2_tx,
        c2_p_nonneg: c2_p,
        c3_node: c3,
        c4_energy: c4,
        c_irs,
        rates: pair_rates(design, ch, cfg),
        energies,
        feasible: violations.is_empty(),
        violations,
    }
}
