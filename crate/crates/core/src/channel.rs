//! Seeded geometry and Rayleigh block-fading channel generation.
//!
//! The relay/IRS sits at the origin, elevated by `d3`. Transmitters are spread
//! uniformly over a disk of radius `r_t` centred `d1` away on one side and
//! receivers over a disk of radius `r_r` centred `d2` away on the other side.
//! A link's length is sqrt(horizontal^2 + d3^2).

use crate::linalg::{ComplexMatrix, C64};
use crate::model::SystemConfig;
use crate::serde_cplx;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioGeometry {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub r_t: f64,
    pub r_r: f64,
    pub d0: f64,
    pub gamma_tilde: f64,
}

impl Default for ScenarioGeometry {
    fn default() -> Self {
        ScenarioGeometry {
            d1: 10.0,
            d2: 10.0,
            d3: 10.0,
            r_t: 5.0,
            r_r: 5.0,
            d0: 1.0,
            gamma_tilde: 3.0,
        }
    }
}

impl ScenarioGeometry {
    pub fn validate(&self) -> Result<(), ChannelError> {
        let pos = [self.d1, self.d2, self.d3, self.d0];
        if pos.iter().any(|d| !(*d > 0.0)) || self.r_t < 0.0 || self.r_r < 0.0 {
            return Err(ChannelError::Geometry(
                "distances must be positive and radii nonnegative".into(),
            ));
        }
        if self.gamma_tilde < 2.0 {
            return Err(ChannelError::Geometry(format!(
                "path-loss exponent {} < 2",
                self.gamma_tilde
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("channel file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("channel json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("channel set shape: {0}")]
    Shape(String),
}

/// Per-subband channels: `h[n]` is M x K (transmitters to node), `g[n]` is
/// K x M (node to receivers).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    #[serde(with = "serde_cplx::matrix_list")]
    pub h: Vec<ComplexMatrix>,
    #[serde(with = "serde_cplx::matrix_list")]
    pub g: Vec<ComplexMatrix>,
    pub seed: u64,
    /// Transmitter k to node distance.
    #[serde(default)]
    pub tx_distance: Vec<f64>,
    /// Node to receiver k distance.
    #[serde(default)]
    pub rx_distance: Vec<f64>,
}

impl ChannelSet {
    pub fn k(&self) -> usize {
        self.h.first().map_or(0, |h| h.ncols())
    }

    pub fn m(&self) -> usize {
        self.h.first().map_or(0, |h| h.nrows())
    }

    pub fn n(&self) -> usize {
        self.h.len()
    }

    pub fn check_shape(&self) -> Result<(), ChannelError> {
        let (k, m) = (self.k(), self.m());
        if self.h.len() != self.g.len() {
            return Err(ChannelError::Shape(format!(
                "{} H vs {} G matrices",
                self.h.len(),
                self.g.len()
            )));
        }
        for (h, g) in self.h.iter().zip(&self.g) {
            if h.shape() != (m, k) || g.shape() != (k, m) {
                return Err(ChannelError::Shape("inconsistent matrix sizes".into()));
            }
            if h.iter()
                .chain(g.iter())
                .any(|z| !z.re.is_finite() || !z.im.is_finite())
            {
                return Err(ChannelError::Shape("non-finite entry".into()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("channel set serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ChannelError> {
        let ch: ChannelSet = serde_json::from_str(s)?;
        ch.check_shape()?;
        Ok(ch)
    }

    pub fn save(&self, path: &Path) -> Result<(), ChannelError> {
        std::fs::write(path, self.to_json()).map_err(|source| ChannelError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ChannelError> {
        let s = std::fs::read_to_string(path).map_err(|source| ChannelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&s)
    }
}

/// 0.1 (d/d0)^(-gamma/2).
pub fn path_loss_scale(d: f64, geo: &ScenarioGeometry) -> f64 {
    0.1 * (d / geo.d0).powf(-geo.gamma_tilde / 2.0)
}

#[derive(Clone, Copy)]
enum Stream {
    TxPosition = 1,
    RxPosition = 2,
    TxFading = 3,
    RxFading = 4,
}

/// Independent ChaCha stream per (role, node, subband), so adding pairs or
/// subbands never shifts the draws of existing ones.
fn stream_rng(seed: u64, role: Stream, node: usize, subband: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((role as u64) << 56) | ((node as u64) << 28) | subband as u64);
    rng
}

fn disk_offset(rng: &mut ChaCha8Rng, radius: f64) -> (f64, f64) {
    let r = radius * rng.random::<f64>().sqrt();
    let phi = std::f64::consts::TAU * rng.random::<f64>();
    (r * phi.cos(), r * phi.sin())
}

fn link_distance(center: f64, radius: f64, d3: f64, rng: &mut ChaCha8Rng) -> f64 {
    let (dx, dy) = disk_offset(rng, radius);
    let x = center + dx;
    (x * x + dy * dy + d3 * d3).sqrt()
}

/// Circularly-symmetric complex Gaussian with unit variance.
pub fn cn01(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn generate_scenario(cfg: &SystemConfig, geo: &ScenarioGeometry, seed: u64) -> ChannelSet {
    let (k_n, n_n, m) = (cfg.k, cfg.n, cfg.m);
    let tx_distance: Vec<f64> = (0..k_n)
        .map(|k| {
            link_distance(
                -geo.d1,
                geo.r_t,
                geo.d3,
                &mut stream_rng(seed, Stream::TxPosition, k, 0),
            )
        })
        .collect();
    let rx_distance: Vec<f64> = (0..k_n)
        .map(|k| {
            link_distance(
                geo.d2,
                geo.r_r,
                geo.d3,
                &mut stream_rng(seed, Stream::RxPosition, k, 0),
            )
        })
        .collect();
    let mut h = Vec::with_capacity(n_n);
    let mut g = Vec::with_capacity(n_n);
    for n in 0..n_n {
        let mut hn = ComplexMatrix::zeros(m, k_n);
        let mut gn = ComplexMatrix::zeros(k_n, m);
        for k in 0..k_n {
            let st = path_loss_scale(tx_distance[k], geo);
            let mut rng = stream_rng(seed, Stream::TxFading, k, n);
            for i in 0..m {
                hn[(i, k)] = cn01(&mut rng) * st;
            }
            let sr = path_loss_scale(rx_distance[k], geo);
            let mut rng = stream_rng(seed, Stream::RxFading, k, n);
            for i in 0..m {
                gn[(k, i)] = cn01(&mut rng) * sr;
            }
        }
        h.push(hn);
        g.push(gn);
    }
    ChannelSet {
        h,
        g,
        seed,
        tx_distance,
        rx_distance,
    }
}
