//! Minorizers and majorizers used by the MM steps.
//!
//! Every surrogate of a rate or energy constraint is expressed as a
//! [`ConcaveSurrogate`] in one complex vector, which the solver builders embed
//! into the real variable layout.

use crate::linalg::{
    max_eigenvalue, principal_eigenpair, quad_form, ComplexVector, HermitianMatrix, C64,
    POWER_ITER_TOL,
};
use crate::model::{eh_curve_abc, QuadraticForms, SystemConfig};
use nalgebra::DVector;
use std::f64::consts::LOG2_E;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurrogateError {
    #[error("expansion point {0} must be positive")]
    NonPositiveExpansion(f64),
    #[error("w^H Q w = 0: curvature of the quadratic majorizer is unbounded")]
    DegenerateCurvature,
    #[error("expansion phase theta0 = 0")]
    ZeroPhase,
    #[error("negative discriminant: E_min cannot be reached for any input power")]
    EnergyUnreachable,
    #[error("{0}")]
    Linalg(#[from] crate::linalg::LinalgError),
}

/// log2(x0) + log2(e) (x - x0) / x0, an upper bound of log2(x).
pub fn log_affine_minorizer(x: f64, x0: f64) -> Result<f64, SurrogateError> {
    if !(x0 > 0.0) {
        return Err(SurrogateError::NonPositiveExpansion(x0));
    }
    Ok(x0.log2() + LOG2_E * (x - x0) / x0)
}

/// s(x) = -log2(x^H T x + nu).
pub fn neg_log_target(tm: &HermitianMatrix, nu: f64, x: &ComplexVector) -> f64 {
    -(quad_form(tm, x) + nu).log2()
}

/// Quadratic upper bound s(x0) + Re{b^H (x - x0)} + d (x - x0)^H (x - x0).
#[derive(Debug, Clone)]
pub struct QuadraticMajorizer {
    pub b: ComplexVector,
    /// 4P / (w^H Q w).
    pub d_printed: f64,
    /// log2(e) lambda_max(T) / (2 nu), valid for every x.
    pub d_safe: f64,
    pub s0: f64,
    pub x0: ComplexVector,
}

impl QuadraticMajorizer {
    /// Coefficient actually used.
    pub fn d(&self) -> f64 {
        self.d_printed.max(self.d_safe)
    }

    pub fn value(&self, x: &ComplexVector) -> f64 {
        let dx = x - &self.x0;
        self.s0 + self.b.dotc(&dx).re + self.d() * dx.norm_squared()
    }

    pub fn value_with(&self, d: f64, x: &ComplexVector) -> f64 {
        let dx = x - &self.x0;
        self.s0 + self.b.dotc(&dx).re + d * dx.norm_squared()
    }
}

/// Quadratic majorizer of -log2(x^H T x + nu) around x0 over {x^H Q x <= P}.
///
/// Along any segment the second derivative of s is at most
/// log2(e) (x^H T x) lambda_max(T) / (x^H T x + nu)^2 <= log2(e) lambda_max(T) / (4 nu)
/// times 4, which gives `d_safe`. The larger of the two coefficients is used.
pub fn quadratic_majorizer(
    tm: &HermitianMatrix,
    nu: f64,
    q: &HermitianMatrix,
    p: f64,
    x0: &ComplexVector,
) -> Result<QuadraticMajorizer, SurrogateError> {
    let t0 = quad_form(tm, x0) + nu;
    let b = tm * x0 * C64::from(-2.0 * LOG2_E / t0);
    let lam = max_eigenvalue(tm).max(0.0);
    let w = principal_eigenpair(tm, POWER_ITER_TOL)?.vector;
    let wqw = quad_form(q, &w);
    if !(wqw > 0.0) {
        return Err(SurrogateError::DegenerateCurvature);
    }
    let d_safe = if nu > 0.0 {
        LOG2_E * lam / (2.0 * nu)
    } else {
        f64::INFINITY
    };
    Ok(QuadraticMajorizer {
        b,
        d_printed: 4.0 * p / wqw,
        d_safe,
        s0: -t0.log2(),
        x0: x0.clone(),
    })
}

/// coef * ln(Re{w^H u} + c0).
#[derive(Debug, Clone)]
pub struct LogPart {
    pub coef: f64,
    pub w: ComplexVector,
    pub c0: f64,
}

/// weight ||u - center||^2.
#[derive(Debug, Clone)]
pub struct Prox {
    pub weight: f64,
    pub center: ComplexVector,
}

/// constant + Re{l^H u} - u^H G u - prox + log part, concave for G PSD,
/// weight >= 0 and coef >= 0.
#[derive(Debug, Clone)]
pub struct ConcaveSurrogate {
    pub g: HermitianMatrix,
    pub l: ComplexVector,
    pub constant: f64,
    pub prox: Option<Prox>,
    pub log: Option<LogPart>,
}

impl ConcaveSurrogate {
    pub fn dim(&self) -> usize {
        self.l.len()
    }

    /// `-inf` outside the log domain.
    pub fn value(&self, u: &ComplexVector) -> f64 {
        let mut v = self.constant + self.l.dotc(u).re - quad_form(&self.g, u);
        if let Some(p) = &self.prox {
            v -= p.weight * (u - &p.center).norm_squared();
        }
        if let Some(lp) = &self.log {
            let arg = lp.w.dotc(u).re + lp.c0;
            if !(arg > 0.0) {
                return f64::NEG_INFINITY;
            }
            v += lp.coef * arg.ln();
        }
        v
    }

    /// Gradient as the complex vector c with dv = Re{c^H du}.
    pub fn gradient(&self, u: &ComplexVector) -> ComplexVector {
        let mut c = &self.l - &self.g * u * C64::from(2.0);
        if let Some(p) = &self.prox {
            c -= (u - &p.center) * C64::from(2.0 * p.weight);
        }
        if let Some(lp) = &self.log {
            let arg = lp.w.dotc(u).re + lp.c0;
            c += &lp.w * C64::from(lp.coef / arg);
        }
        c
    }
}

/// Which minorizer of log2(u^H B u + zeta) the rate constraint uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum C5Kind {
    /// log2 of the tangent plane of the convex quadratic.
    #[default]
    LogTangent,
    /// Quadratic majorizer with an isotropic curvature term.
    Quadratic,
}

/// Lower bound of log2(1 + SINR) = log2(u^H B u + zeta) - log2(u^H A_hat u + zeta)
/// touching at u0. `q`, `p` define the power ball for the majorizer coefficient.
pub fn c5_pair_surrogate(
    b: &HermitianMatrix,
    a_hat: &HermitianMatrix,
    zeta: f64,
    u0: &ComplexVector,
    q: &HermitianMatrix,
    p: f64,
    kind: C5Kind,
) -> Result<ConcaveSurrogate, SurrogateError> {
    let x0 = quad_form(a_hat, u0) + zeta;
    let ahat0 = quad_form(a_hat, u0);
    let g_hat = a_hat * C64::from(LOG2_E / x0);
    match kind {
        C5Kind::LogTangent => {
            let b0 = quad_form(b, u0);
            Ok(ConcaveSurrogate {
                g: g_hat,
                l: ComplexVector::zeros(u0.len()),
                constant: -x0.log2() + LOG2_E * ahat0 / x0,
                prox: None,
                log: Some(LogPart {
                    coef: LOG2_E,
                    w: b * u0 * C64::from(2.0),
                    c0: zeta - b0,
                }),
            })
        }
        C5Kind::Quadratic => {
            // -bound(u) - tangent of log2(u^H A_hat u + zeta), with the
            // d term centered at u0.
            let lb = quadratic_majorizer(b, zeta, q, p, u0)?;
            Ok(ConcaveSurrogate {
                g: g_hat,
                l: -&lb.b,
                constant: -lb.s0 + lb.b.dotc(u0).re - x0.log2() + LOG2_E * ahat0 / x0,
                prox: Some(Prox {
                    weight: lb.d(),
                    center: u0.clone(),
                }),
                log: None,
            })
        }
    }
}

/// Surrogates of every pair's rate constraint, `[k][n]`. `u0[n]` is the
/// information-slot node vector on subband n, `q`/`p` the info-slot form and
/// scaled budget used by the majorizer coefficient.
pub fn c5_surrogate(
    forms: &QuadraticForms,
    u0: &[ComplexVector],
    tau: f64,
    cfg: &SystemConfig,
    kind: C5Kind,
) -> Result<Vec<Vec<ConcaveSurrogate>>, SurrogateError> {
    let mut out = Vec::with_capacity(cfg.k);
    for k in 0..cfg.k {
        let mut row = Vec::with_capacity(cfg.n);
        for n in 0..cfg.n {
            let p = 2.0 * cfg.rho * cfg.t * cfg.p_rf_node[n] / (cfg.t - tau);
            row.push(c5_pair_surrogate(
                &forms.b[k][n],
                &forms.a_hat[k][n],
                cfg.zeta_a(k, n),
                &u0[n],
                &forms.a_tilde_i[n],
                p,
                kind,
            )?);
        }
        out.push(row);
    }
    Ok(out)
}

fn eh_derivs(w: f64, a: f64, b: f64, c: f64) -> (f64, f64) {
    if w <= 0.0 {
        return (0.0, 0.0);
    }
    let f = eh_curve_abc(w, a, b, c);
    let l = w.ln();
    let g = 2.0 * a * l + b;
    (f * g / w, f / (w * w) * (g * g + 2.0 * a - g))
}

/// sup over w > 0 of 2w max(0, -f''(w)) + max(0, -f'(w)) for the harvester
/// curve, on a log-spaced grid.
pub fn eh_curvature_sup(a: f64, b: f64, c: f64) -> f64 {
    eh_curvature_sup_below(a, b, c, f64::INFINITY)
}

/// Same supremum restricted to 0 < w <= `w_max`.
pub fn eh_curvature_sup_below(a: f64, b: f64, c: f64, w_max: f64) -> f64 {
    const STEPS: usize = 40_000;
    let lo = -60.0f64;
    let hi = 15.0f64.min(w_max.ln());
    if !(hi > lo) {
        return 0.0;
    }
    (0..=STEPS)
        .map(|i| {
            let w = (lo + (hi - lo) * i as f64 / STEPS as f64).exp();
            let (d1, d2) = eh_derivs(w, a, b, c);
            2.0 * w * (-d2).max(0.0) + (-d1).max(0.0)
        })
        .fold(0.0, f64::max)
}

pub const BETA_SAFETY: f64 = 1.1;

/// Curvature constant making E(x) + beta/2 ||x||^2 convex for
/// E(x) = tau/rho f(x^H A x / 2) with lambda_max(A) = `lambda_max`.
pub fn beta_bound(lambda_max: f64, tau: f64, cfg: &SystemConfig) -> f64 {
    beta_bound_within(lambda_max, tau, cfg, f64::INFINITY)
}

/// As [`beta_bound`], but only along segments on which x^H A x / 2 stays at
/// most `w_max`. The resulting surrogate is a minorizer on any convex set
/// with that property, e.g. the budget set of a subproblem.
pub fn beta_bound_within(lambda_max: f64, tau: f64, cfg: &SystemConfig, w_max: f64) -> f64 {
    BETA_SAFETY * tau / cfg.rho
        * lambda_max.max(0.0)
        * eh_curvature_sup_below(cfg.a_t, cfg.b_t, cfg.c_t, w_max)
}

/// The closed-form waveform curvature constant as printed, per pair k.
/// `lam[n]` = lambda_max(Xi_kn), `lam_pair[n][n']` = lambda_max(Xi_kn Xi_kn'),
/// `p_sum[n]` = sum_k p_rf[k][n], `p_root[n][n']` = sum_k sqrt(p_rf[k][n] p_rf[k][n']).
/// Diagnostic only.
pub fn beta_closed_form(
    lam: &[f64],
    lam_pair: &[Vec<f64>],
    p_sum: &[f64],
    p_root: &[Vec<f64>],
    tau: f64,
    e_min: f64,
    cfg: &SystemConfig,
) -> Result<f64, SurrogateError> {
    let (a, b, c) = (cfg.a_t, cfg.b_t, cfg.c_t);
    // Root of a L^2 + b L + c = ln(rho E_min / tau); the discriminant sign
    // follows from solving that quadratic.
    let disc = b * b + 4.0 * a * (cfg.rho * e_min / (tau * c.exp())).ln();
    if disc < 0.0 || e_min <= 0.0 {
        return Err(SurrogateError::EnergyUnreachable);
    }
    let f_tilde = ((-b - disc.sqrt()) / (2.0 * a)).exp();
    let n_n = lam.len();
    let lam_p: f64 = (0..n_n).map(|n| lam[n] * p_sum[n]).sum();
    let big = cfg.t * lam_p;
    let cross: f64 = (0..n_n)
        .flat_map(|n| (0..n_n).map(move |m| (n, m)))
        .map(|(n, m)| lam_pair[n][m] * p_root[n][m])
        .sum();
    let lam_sum: f64 = lam.iter().sum();
    let inner = ((4.0 * a * b - 2.0 * a) * f_tilde.ln() + 2.0 * a) * cross + b * f_tilde * lam_sum;
    Ok(-tau / cfg.rho
        * c.exp()
        * (2.0 * a * big.ln().powi(2)).exp()
        * f_tilde.powf(b - 2.0)
        * inner)
}

/// Smallest beta >= 0 that makes the real Hessian of E + beta/2 ||x||^2 PSD at
/// the given sample points. Diagnostic cross-check for [`beta_bound`].
pub fn beta_sampled(
    a: &HermitianMatrix,
    tau: f64,
    cfg: &SystemConfig,
    samples: &[ComplexVector],
) -> f64 {
    let r = crate::linalg::real_composite(a);
    let mut beta = 0.0f64;
    for x in samples {
        let xr = DVector::from_vec(crate::linalg::to_real(x));
        let w = 0.5 * quad_form(a, x);
        let (d1, d2) = eh_derivs(w, cfg.a_t, cfg.b_t, cfg.c_t);
        let gw = &r * &xr;
        let h = (&gw * gw.transpose() * d2 + &r * d1) * (tau / cfg.rho);
        let lmin = nalgebra::SymmetricEigen::new(h).eigenvalues.min();
        beta = beta.max(-lmin);
    }
    beta
}

/// Energy minorizer pieces.
#[derive(Debug, Clone)]
pub struct C4Pieces {
    /// Row vector, stored as a column; enters as Re{vartheta^T x}.
    pub vartheta: ComplexVector,
    pub omega: f64,
    pub beta: f64,
    pub surrogate: ConcaveSurrogate,
}

/// Lower bound of E(x) = tau/rho f(x^H A x / 2) touching at x0:
/// E(x0) + beta/2 ||x0||^2 + Re{vartheta (x - x0)} - beta/2 ||x||^2.
pub fn c4_surrogate(
    a: &HermitianMatrix,
    x0: &ComplexVector,
    tau: f64,
    beta: f64,
    cfg: &SystemConfig,
) -> C4Pieces {
    let omega = 0.5 * quad_form(a, x0);
    let (d1, _) = eh_derivs(omega, cfg.a_t, cfg.b_t, cfg.c_t);
    let e0 = tau / cfg.rho * eh_curve_abc(omega, cfg.a_t, cfg.b_t, cfg.c_t);
    // Gradient direction c with dE = Re{c^H dx}.
    let grad = x0 * C64::from(beta) + a * x0 * C64::from(tau / cfg.rho * d1);
    let vartheta = grad.conjugate();
    let n = x0.len();
    // Same bound written as E(x0) + Re{grad_E^H (x - x0)} - beta/2 ||x - x0||^2.
    let grad_e = a * x0 * C64::from(tau / cfg.rho * d1);
    C4Pieces {
        vartheta,
        omega,
        beta,
        surrogate: ConcaveSurrogate {
            g: HermitianMatrix::zeros(n, n),
            constant: e0 - grad_e.dotc(x0).re,
            l: grad_e,
            prox: Some(Prox {
                weight: 0.5 * beta,
                center: x0.clone(),
            }),
            log: None,
        },
    }
}

/// All surrogate pieces of one MM step, built at `expansion`.
#[derive(Debug, Clone)]
pub struct SurrogatePack {
    /// `[k][n]` rate surrogates in the information-slot variable.
    pub c5: Vec<Vec<ConcaveSurrogate>>,
    /// `[k]` energy surrogates in the stacked energy variable; `None` when the
    /// pair has no energy target.
    pub c4: Vec<Option<C4Pieces>>,
    pub expansion: crate::model::Design,
}

/// E(x) = tau/rho f(x^H A x / 2).
pub fn energy_of(a: &HermitianMatrix, x: &ComplexVector, tau: f64, cfg: &SystemConfig) -> f64 {
    tau / cfg.rho * eh_curve_abc(0.5 * quad_form(a, x), cfg.a_t, cfg.b_t, cfg.c_t)
}

/// Re{theta* theta0 / |theta0|}, a lower bound of |theta|.
pub fn unit_modulus_minorizer(theta: C64, theta0: C64) -> Result<f64, SurrogateError> {
    let r = theta0.norm();
    if r == 0.0 {
        return Err(SurrogateError::ZeroPhase);
    }
    Ok((theta.conj() * theta0).re / r)
}

/// Rate-in-power minorizer for one (k, n):
/// log2(q^T p + zeta) - log2(b^T p0 + zeta) - log2(e) b^T (p - p0) / (b^T p0 + zeta).
#[derive(Debug, Clone)]
pub struct PowerRateSurrogate {
    pub q: DVector<f64>,
    pub b: DVector<f64>,
    pub zeta: f64,
    pub p0: DVector<f64>,
}

impl PowerRateSurrogate {
    pub fn value(&self, p: &DVector<f64>) -> f64 {
        let den0 = self.b.dot(&self.p0) + self.zeta;
        (self.q.dot(p) + self.zeta).log2()
            - den0.log2()
            - LOG2_E * self.b.dot(&(p - &self.p0)) / den0
    }

    /// log2(1 + SINR) at p.
    pub fn exact(&self, p: &DVector<f64>) -> f64 {
        ((self.q.dot(p) + self.zeta) / (self.b.dot(p) + self.zeta)).log2()
    }
}

/// `psi_row[j]` = psi_{k,j,n}; `zeta_b` = sigma_n^2 psi~_{k,n} + zeta_a.
pub fn c5_power_surrogate(
    psi_row: &DVector<f64>,
    k: usize,
    zeta_b: f64,
    p0: &DVector<f64>,
) -> PowerRateSurrogate {
    let mut b = psi_row.clone();
    b[k] = 0.0;
    PowerRateSurrogate {
        q: psi_row.clone(),
        b,
        zeta: zeta_b,
        p0: p0.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{channels, desk_config, random_feasible_design};
    use crate::model::{assemble_quadratic_forms, Mode, Slot};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> HermitianMatrix {
        let x = crate::linalg::ComplexMatrix::from_fn(n, rank, |_, _| crate::channel::cn01(rng));
        &x * x.adjoint()
    }

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> ComplexVector {
        ComplexVector::from_fn(n, |_, _| crate::channel::cn01(rng) * scale)
    }

    #[test]
    fn log_affine_cases() {
        assert_eq!(log_affine_minorizer(3.0, 3.0).unwrap(), 3f64.log2());
        assert!((log_affine_minorizer(2.0, 1.0).unwrap() - LOG2_E).abs() < 1e-15);
        assert!(log_affine_minorizer(1.0, 0.0).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let x: f64 = rng.random_range(1e-3..50.0);
            let x0: f64 = rng.random_range(1e-3..50.0);
            assert!(log_affine_minorizer(x, x0).unwrap() >= x.log2() - 1e-12);
        }
    }

    #[test]
    fn quadratic_majorizer_touches_and_dominates() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let tm = rand_psd(&mut rng, 4, 2);
        let q = rand_psd(&mut rng, 4, 4);
        let nu = 0.3;
        let x0 = rand_vec(&mut rng, 4, 0.5);
        let p = quad_form(&q, &x0) * 2.0;
        let lb = quadratic_majorizer(&tm, nu, &q, p, &x0).unwrap();
        assert!((lb.value(&x0) - neg_log_target(&tm, nu, &x0)).abs() < 1e-12);
        // central differences along re/im of each coordinate
        let h = 1e-6;
        for i in 0..4 {
            for dir in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                let mut xp = x0.clone();
                let mut xm = x0.clone();
                xp[i] += dir * h;
                xm[i] -= dir * h;
                let fd = (neg_log_target(&tm, nu, &xp) - neg_log_target(&tm, nu, &xm)) / (2.0 * h);
                let an = (lb.b[i].conj() * dir).re;
                assert!((fd - an).abs() <= 1e-4 * an.abs().max(1e-3), "{fd} vs {an}");
            }
        }
        let mut checked = 0;
        while checked < 1000 {
            let x = rand_vec(&mut rng, 4, 1.0);
            if quad_form(&q, &x) > p {
                continue;
            }
            checked += 1;
            assert!(lb.value(&x) >= neg_log_target(&tm, nu, &x) - 1e-12);
        }
    }

    #[test]
    fn quadratic_majorizer_degenerate_q() {
        let tm = HermitianMatrix::identity(2, 2);
        let q = HermitianMatrix::zeros(2, 2);
        let x0 = ComplexVector::from_element(2, C64::new(0.1, 0.0));
        assert_eq!(
            quadratic_majorizer(&tm, 1.0, &q, 1.0, &x0).unwrap_err(),
            SurrogateError::DegenerateCurvature
        );
    }

    #[test]
    fn printed_coefficient_alone_can_fail() {
        // Rescaling the power budget P changes the printed coefficient but not
        // the curvature of s, so a small P gives a quadratic that dips below s.
        let tm = HermitianMatrix::identity(1, 1);
        let q = HermitianMatrix::identity(1, 1);
        let nu = 1e-6;
        let x0 = ComplexVector::from_element(1, C64::new(1e-3, 0.0));
        let p = 1e-5;
        let lb = quadratic_majorizer(&tm, nu, &q, p, &x0).unwrap();
        let x = ComplexVector::from_element(1, C64::new(3e-3, 0.0));
        assert!(quad_form(&q, &x) <= p);
        assert!(lb.value_with(lb.d_printed, &x) < neg_log_target(&tm, nu, &x));
        assert!(lb.value(&x) >= neg_log_target(&tm, nu, &x));
    }

    fn rate_pair(
        b: &HermitianMatrix,
        a_hat: &HermitianMatrix,
        zeta: f64,
        u: &ComplexVector,
    ) -> f64 {
        ((quad_form(b, u) + zeta) / (quad_form(a_hat, u) + zeta)).log2()
    }

    #[test]
    fn c5_pair_touching_dominance_both_kinds() {
        for kind in [C5Kind::LogTangent, C5Kind::Quadratic] {
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let a = rand_psd(&mut rng, 4, 1);
            let a_hat = rand_psd(&mut rng, 4, 2);
            let b = &a + &a_hat;
            let q = rand_psd(&mut rng, 4, 4);
            let zeta = 0.2;
            let u0 = rand_vec(&mut rng, 4, 0.7);
            let p = 2.0 * quad_form(&q, &u0);
            let s = c5_pair_surrogate(&b, &a_hat, zeta, &u0, &q, p, kind).unwrap();
            let t0 = rate_pair(&b, &a_hat, zeta, &u0);
            assert!((s.value(&u0) - t0).abs() <= 1e-9 * t0.abs().max(1.0));
            for _ in 0..500 {
                let u = rand_vec(&mut rng, 4, 1.0);
                assert!(s.value(&u) <= rate_pair(&b, &a_hat, zeta, &u) + 1e-12);
            }
        }
    }

    #[test]
    fn c5_zero_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a_hat = rand_psd(&mut rng, 3, 2);
        let b = &a_hat + rand_psd(&mut rng, 3, 1);
        let q = HermitianMatrix::identity(3, 3);
        let u0 = ComplexVector::zeros(3);
        let s = c5_pair_surrogate(&b, &a_hat, 0.5, &u0, &q, 1.0, C5Kind::Quadratic).unwrap();
        assert!(s.gradient(&u0).iter().all(|z| z.norm() < 1e-15));
        assert!(s.value(&u0).abs() < 1e-15);
    }

    #[test]
    fn c5_from_forms_touches_true_rate() {
        let cfg = desk_config(Mode::Relay, 2, 2, 2);
        let ch = channels(&cfg, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = random_feasible_design(&cfg, &ch, &mut rng);
        let forms = assemble_quadratic_forms(&d, &ch, &cfg);
        let u0: Vec<_> = (0..cfg.n).map(|n| d.node_vector(Slot::Info, n)).collect();
        let s = c5_surrogate(&forms, &u0, d.tau, &cfg, C5Kind::LogTangent).unwrap();
        for k in 0..cfg.k {
            let sur: f64 = (0..cfg.n).map(|n| s[k][n].value(&u0[n])).sum();
            let tru: f64 = (0..cfg.n)
                .map(|n| (1.0 + crate::model::sinr(&d, &ch, &cfg, k, n)).log2())
                .sum();
            assert!((sur - tru).abs() <= 1e-9 * tru.abs().max(1.0));
        }
    }

    #[test]
    fn c4_touching_dominance_and_beta_doubling() {
        let cfg = desk_config(Mode::Relay, 2, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        // Scale so that x^H A x / 2 spans both sides of the curve's peak.
        let a = rand_psd(&mut rng, 3, 2) * C64::from(1e-3);
        let x0 = rand_vec(&mut rng, 3, 1.5);
        let tau = 0.4;
        let beta = beta_bound(max_eigenvalue(&a), tau, &cfg);
        let p1 = c4_surrogate(&a, &x0, tau, beta, &cfg);
        let p2 = c4_surrogate(&a, &x0, tau, 2.0 * beta, &cfg);
        let e0 = energy_of(&a, &x0, tau, &cfg);
        assert!((p1.surrogate.value(&x0) - e0).abs() <= 1e-9 * e0);
        assert!((p1.omega - 0.5 * quad_form(&a, &x0)).abs() < 1e-18);
        for _ in 0..500 {
            let scale = rng.random_range(0.1..6.0);
            let x = rand_vec(&mut rng, 3, scale);
            let e = energy_of(&a, &x, tau, &cfg);
            let v1 = p1.surrogate.value(&x);
            assert!(v1 <= e + 1e-12 * e0, "{v1} > {e}");
            assert!(p2.surrogate.value(&x) <= v1 + 1e-12 * e0);
        }
    }

    #[test]
    fn c4_vartheta_is_gradient() {
        let cfg = desk_config(Mode::Relay, 2, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = rand_psd(&mut rng, 3, 2) * C64::from(1e-4);
        let x0 = rand_vec(&mut rng, 3, 1.0);
        let tau = 0.5;
        let pc = c4_surrogate(&a, &x0, tau, 0.0, &cfg);
        let h = 1e-6;
        for i in 0..3 {
            for dir in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                let mut xp = x0.clone();
                let mut xm = x0.clone();
                xp[i] += dir * h;
                xm[i] -= dir * h;
                let fd =
                    (energy_of(&a, &xp, tau, &cfg) - energy_of(&a, &xm, tau, &cfg)) / (2.0 * h);
                let an = (pc.vartheta[i] * dir).re;
                assert!(
                    (fd - an).abs() <= 1e-4 * an.abs().max(1e-12),
                    "{fd} vs {an}"
                );
            }
        }
    }

    #[test]
    fn beta_zero_for_zero_form() {
        let cfg = desk_config(Mode::Relay, 2, 2, 2);
        assert_eq!(beta_bound(0.0, 0.5, &cfg), 0.0);
    }

    #[test]
    fn beta_bound_covers_sampled_hessians() {
        let cfg = desk_config(Mode::Relay, 2, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = rand_psd(&mut rng, 3, 3) * C64::from(1e-3);
        let samples: Vec<_> = (0..200)
            .map(|_| {
                let scale = rng.random_range(0.1..8.0);
                rand_vec(&mut rng, 3, scale)
            })
            .collect();
        let tau = 0.6;
        let sampled = beta_sampled(&a, tau, &cfg, &samples);
        let bound = beta_bound(max_eigenvalue(&a), tau, &cfg);
        assert!(sampled > 0.0);
        assert!(bound >= sampled, "{bound} < {sampled}");
    }

    #[test]
    fn eh_sup_matches_fine_scan() {
        // Oracle: brute-force scan with finite-difference derivatives.
        let (a, b, c) = (-0.11, -1.17, -12.0);
        let f = |w: f64| eh_curve_abc(w, a, b, c);
        let mut best = 0.0f64;
        for i in 0..20000 {
            let w = (-20.0 + 25.0 * i as f64 / 20000.0f64).exp();
            let h = 1e-4 * w;
            let d1 = (f(w + h) - f(w - h)) / (2.0 * h);
            let d2 = (f(w + h) - 2.0 * f(w) + f(w - h)) / (h * h);
            best = best.max(2.0 * w * (-d2).max(0.0) + (-d1).max(0.0));
        }
        let sup = eh_curvature_sup(a, b, c);
        assert!((sup - best).abs() <= 1e-3 * best, "{sup} vs {best}");
    }

    #[test]
    fn closed_form_beta_signals_unreachable_target() {
        let cfg = desk_config(Mode::Relay, 2, 2, 2);
        let lam = vec![1e-3, 2e-3];
        let pair = vec![vec![1e-6, 2e-6], vec![2e-6, 4e-6]];
        let ps = vec![1.0, 1.0];
        let pr = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert!(beta_closed_form(&lam, &pair, &ps, &pr, 0.5, 1e-6, &cfg)
            .unwrap()
            .is_finite());
        assert_eq!(
            beta_closed_form(&lam, &pair, &ps, &pr, 0.5, 1.0, &cfg).unwrap_err(),
            SurrogateError::EnergyUnreachable
        );
    }

    #[test]
    fn unit_modulus_cases() {
        let e = C64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        assert!((unit_modulus_minorizer(e, e).unwrap() - 1.0).abs() < 1e-15);
        assert!(
            unit_modulus_minorizer(C64::new(1.0, 0.0), C64::new(0.0, 1.0))
                .unwrap()
                .abs()
                < 1e-15
        );
        assert!(unit_modulus_minorizer(e, C64::new(0.0, 0.0)).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..1000 {
            let t = crate::channel::cn01(&mut rng) * 3.0;
            let t0 = crate::channel::cn01(&mut rng);
            assert!(unit_modulus_minorizer(t, t0).unwrap() <= t.norm() + 1e-12);
        }
    }

    #[test]
    fn power_surrogate_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // K = 1: no interference, exact everywhere.
        let s1 = c5_power_surrogate(
            &DVector::from_vec(vec![2.0]),
            0,
            0.1,
            &DVector::from_vec(vec![0.3]),
        );
        for _ in 0..100 {
            let p = DVector::from_vec(vec![rng.random_range(0.0..5.0)]);
            assert!((s1.value(&p) - s1.exact(&p)).abs() < 1e-12);
        }
        let psi = DVector::from_fn(3, |_, _| rng.random_range(0.1..2.0));
        let p0 = DVector::from_fn(3, |_, _| rng.random_range(0.0..1.0));
        let s = c5_power_surrogate(&psi, 1, 0.05, &p0);
        assert!((s.value(&p0) - s.exact(&p0)).abs() < 1e-12);
        for _ in 0..500 {
            let p = DVector::from_fn(3, |_, _| rng.random_range(0.0..3.0));
            assert!(s.value(&p) <= s.exact(&p) + 1e-12);
        }
    }
}
