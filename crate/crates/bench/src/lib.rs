//! Shared fixtures for the criterion benches.

use mmwpc::channel::ChannelSet;
use mmwpc::instances::{channels, desk_config};
use mmwpc::model::{Design, Mode, SystemConfig};
use mmwpc::optimizer::{initialize, OptimizerSettings};

pub struct Fixture {
    pub cfg: SystemConfig,
    pub ch: ChannelSet,
    pub design: Design,
}

/// Feasible starting point of the desk profile for one seed.
pub fn desk(mode: Mode, k: usize, n: usize, m: usize, seed: u64) -> Fixture {
    let cfg = desk_config(mode, k, n, m);
    let ch = channels(&cfg, seed);
    let design = initialize(&ch, &cfg, &OptimizerSettings::default())
        .expect("desk seed has a feasible start");
    Fixture { cfg, ch, design }
}
