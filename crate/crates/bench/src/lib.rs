//! Shared instance builders for the benchmarks.

use relay_optim::objectives::Objective;
use relay_optim::sim::SimConfig;
use relay_optim::verify::{random_network, ErrorRegime};
use relay_optim::NetworkModel;

/// A 4x4 network with transmit-side correlated errors, the regime the
/// designer solves exactly.
pub fn bench_network(k_hops: usize, seed: u64) -> NetworkModel {
    random_network(seed, k_hops, 4, 4, ErrorRegime::SigmaProportional)
}

/// Simulation campaign config sized for a single-trial benchmark.
pub fn bench_sim_config(k_hops: usize, objective: Objective) -> SimConfig {
    SimConfig {
        k_hops,
        n_streams: 4,
        n_antennas: 4,
        alpha: 0.6,
        beta: 0.0,
        sigma_e_sq: 0.004,
        snr_db: vec![30.0; k_hops],
        trials: 1,
        symbols_per_stream: 1000,
        seed: 0xBE6C,
        objective,
    }
}
