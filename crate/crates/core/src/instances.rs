//! Random instance builders shared by tests, benches and the acceptance suite.

use crate::channel::{cn01, generate_scenario, ChannelSet, ScenarioGeometry};
use crate::linalg::{ComplexMatrix, ComplexVector, C64};
use crate::model::{node_energy_lhs, Design, Mode, NodeDesign, ScenarioParams, SystemConfig};
use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn desk_config(mode: Mode, k: usize, n: usize, m: usize) -> SystemConfig {
    ScenarioParams {
        k,
        n,
        m,
        ..ScenarioParams::desk(mode)
    }
    .to_config()
    .expect("valid desk config")
}

pub fn channels(cfg: &SystemConfig, seed: u64) -> ChannelSet {
    generate_scenario(cfg, &ScenarioGeometry::default(), seed)
}

fn rand_cmat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(r, c, |_, _| cn01(rng))
}

fn rand_cvec(rng: &mut ChaCha8Rng, n: usize) -> ComplexVector {
    ComplexVector::from_fn(n, |_, _| cn01(rng))
}

/// Unconstrained random design of the right shape.
pub fn random_design(cfg: &SystemConfig, rng: &mut ChaCha8Rng) -> Design {
    let tau = cfg.t * rng.random_range(0.1..0.9);
    let s_e = (0..cfg.n).map(|_| rand_cvec(rng, cfg.k)).collect();
    let p_i = (0..cfg.n)
        .map(|_| DVector::from_fn(cfg.k, |_, _| rng.random_range(0.0..1.0)))
        .collect();
    let node = match cfg.mode {
        Mode::Relay => NodeDesign::Relay {
            u_e: (0..cfg.n).map(|_| rand_cmat(rng, cfg.m, cfg.m)).collect(),
            u_i: (0..cfg.n).map(|_| rand_cmat(rng, cfg.m, cfg.m)).collect(),
        },
        Mode::ActiveIrs => NodeDesign::Irs {
            theta_e: random_unimodular_plus(rng, cfg.m),
            theta_i: random_unimodular_plus(rng, cfg.m),
        },
    };
    Design {
        tau,
        s_e,
        p_i,
        node,
    }
}

fn random_unimodular_plus(rng: &mut ChaCha8Rng, m: usize) -> ComplexVector {
    ComplexVector::from_fn(m, |_, _| {
        let r = 1.0 + rng.random_range(0.0..0.5);
        C64::from_polar(r, std::f64::consts::TAU * rng.random::<f64>())
    })
}

/// Random design that satisfies the transmitter and node budgets with slack.
pub fn random_feasible_design(cfg: &SystemConfig, ch: &ChannelSet, rng: &mut ChaCha8Rng) -> Design {
    let mut d = random_design(cfg, rng);
    let (t, rho, tau) = (cfg.t, cfg.rho, d.tau);
    for n in 0..cfg.n {
        for k in 0..cfg.k {
            let f1 = rng.random_range(0.05..0.6);
            let f2 = rng.random_range(0.05..0.35);
            let s_abs2 = f1 * 2.0 * rho * t * cfg.p_rf_tx[k][n] / tau;
            let phase = d.s_e[n][k] / C64::from(d.s_e[n][k].norm().max(1e-300));
            d.s_e[n][k] = phase * s_abs2.sqrt();
            d.p_i[n][k] = f2 * 2.0 * rho * t * cfg.p_rf_tx[k][n] / (t - tau);
        }
    }
    match cfg.mode {
        Mode::Relay => {
            for n in 0..cfg.n {
                let lhs = node_energy_lhs(&d, ch, cfg, n);
                let frac = rng.random_range(0.3..0.9);
                let c = C64::from((frac * t * cfg.p_rf_node[n] / lhs).sqrt());
                if let NodeDesign::Relay { u_e, u_i } = &mut d.node {
                    u_e[n] *= c;
                    u_i[n] *= c;
                }
            }
        }
        Mode::ActiveIrs => {
            // theta has modulus >= 1, so shrink the waveforms until the IRS
            // budget holds on every subband.
            for _ in 0..200 {
                let worst = (0..cfg.n)
                    .map(|n| node_energy_lhs(&d, ch, cfg, n) / (t * cfg.p_rf_node[n]))
                    .fold(0.0, f64::max);
                if worst <= 0.9 {
                    break;
                }
                for n in 0..cfg.n {
                    d.s_e[n] *= C64::from(0.5f64.sqrt());
                    d.p_i[n] *= 0.5;
                }
            }
        }
    }
    d
}
