//! Gossip-style distributed gradient iteration.
//!
//! Each round one adjacent area pair activates uniformly at random. The
//! activated areas apply the gradient step x <- x - tau (L x - u) on the
//! state rows they own and then exchange their boundary values. With the
//! synchronous option every area updates every round, which is exactly the
//! full iteration x(k+1) = (I - tau L) x(k) + tau u.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::clock::Clock;
use crate::error::{Error, Result};
use crate::governor::{Governor, GovernorConfig, IterationRecord, SolverTrace};
use crate::network::{AreaView, Network, StateVector};
use crate::wls::GainSystem;

const DIVERGENCE_LIMIT: f64 = 1e12;

/// Gossip run configuration.
#[derive(Debug, Clone, Copy)]
pub struct GossipConfig {
    /// Gradient step size; must lie in (0, 2/||L||).
    pub tau: f64,
    /// Seed for the pair-activation sequence.
    pub seed: u64,
    /// Update every area each round instead of one random pair.
    pub synchronous: bool,
    /// Restrict updates to boundary (shared) states only.
    pub shared_only: bool,
}

impl GossipConfig {
    pub fn new(tau: f64, seed: u64) -> Self {
        GossipConfig {
            tau,
            seed,
            synchronous: false,
            shared_only: false,
        }
    }
}

struct AreaRows {
    /// Global state indices owned by the area.
    owned: Vec<usize>,
    /// Owned state indices that are replicated by some neighbor.
    boundary: Vec<usize>,
}

fn area_rows(views: &[AreaView], network: &Network) -> Vec<AreaRows> {
    let n_areas = views.len();
    let mut rows: Vec<AreaRows> = views
        .iter()
        .map(|v| AreaRows {
            owned: v
                .owned_states
                .iter()
                .filter_map(|&b| network.state_position(b))
                .collect(),
            boundary: Vec::new(),
        })
        .collect();
    for k in 0..n_areas {
        for &bus in &views[k].replicated_states {
            if let Some(si) = network.state_position(bus) {
                for r in rows.iter_mut() {
                    if r.owned.contains(&si) && !r.boundary.contains(&si) {
                        r.boundary.push(si);
                    }
                }
            }
        }
    }
    rows
}

/// Adjacent area pairs derived from tie lines. Every tie line appears in the
/// tie_lines of exactly the two areas it connects.
pub(crate) fn adjacent_pairs(views: &[AreaView], network: &Network) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for bi in 0..network.branches().len() {
        let endpoints: Vec<usize> = views
            .iter()
            .filter(|v| v.tie_lines.contains(&bi))
            .map(|v| v.area)
            .collect();
        if endpoints.len() == 2 {
            let p = (
                endpoints[0].min(endpoints[1]),
                endpoints[0].max(endpoints[1]),
            );
            if !pairs.contains(&p) {
                pairs.push(p);
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Count of unfrozen states shared between the two areas of a pair.
fn pair_shared_unfrozen(
    views: &[AreaView],
    network: &Network,
    governor: &Governor,
    k: usize,
    l: usize,
) -> usize {
    let mut count = 0;
    for (a, b) in [(k, l), (l, k)] {
        for &bus in &views[a].replicated_states {
            if views[b].owned_states.contains(&bus) {
                if let Some(si) = network.state_position(bus) {
                    if !governor.mask().is_frozen(si) {
                        count += 1;
                    }
                }
            }
        }
    }
    count
}

/// Runs the gossip iteration under the governor.
pub fn gossip_run(
    gain: &GainSystem,
    views: &[AreaView],
    network: &Network,
    config: &GossipConfig,
    governor_config: &GovernorConfig,
    clock: &dyn Clock,
) -> Result<SolverTrace> {
    let n = gain.state_count();
    if views.len() < 2 {
        return Err(Error::InvalidPartition("need at least 2 areas".into()));
    }
    let norm = crate::splitting::operator_norm(gain);
    if !(config.tau > 0.0 && config.tau < 2.0 / norm) {
        return Err(Error::InvalidArgument(alloc::format!(
            "tau {} outside (0, {})",
            config.tau,
            2.0 / norm
        )));
    }
    let rows = area_rows(views, network);
    let pairs = adjacent_pairs(views, network);
    if pairs.is_empty() {
        return Err(Error::NoAdjacentAreas);
    }

    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut governor = Governor::new(*governor_config, n);
    let mut records = Vec::new();
    let mut states = Vec::new();
    let mut x = DVector::zeros(n);
    let mut cb = 0.0;
    let mut cb_par = 0.0;
    let mut total_floats = 0;
    if governor_config.record_states {
        states.push(x.clone());
    }

    loop {
        let active: Vec<usize> = if config.synchronous {
            (0..views.len()).collect()
        } else {
            let (k, l) = pairs[rng.random_range(0..pairs.len())];
            vec![k, l]
        };

        let mut x_next = x.clone();
        let mut updated = vec![false; n];
        let mut max_area_time = 0.0f64;
        for &area in &active {
            let t0 = clock.now_seconds();
            let targets: &[usize] = if config.shared_only {
                &rows[area].boundary
            } else {
                &rows[area].owned
            };
            for &i in targets {
                if governor.mask().is_frozen(i) {
                    continue;
                }
                let grad = gain.a().row(i).dot(&x.transpose()) - gain.u()[i];
                x_next[i] = x[i] - config.tau * grad;
                updated[i] = true;
            }
            let dt = clock.now_seconds() - t0;
            cb += dt;
            max_area_time = max_area_time.max(dt);
        }
        cb_par += max_area_time;

        if x_next.amax() > DIVERGENCE_LIMIT {
            return Err(Error::Diverged {
                iteration: governor.iteration() + 1,
                norm: x_next.amax(),
            });
        }

        let stop = governor.step_partial(&x, &x_next, &updated)?;
        let floats = if config.synchronous {
            crate::governor::comm_volume(governor.mask(), views, network)
        } else {
            pair_shared_unfrozen(views, network, &governor, active[0], active[1])
        };
        total_floats += floats;
        records.push(IterationRecord {
            iteration: governor.iteration(),
            max_delta: governor.max_delta(),
            frozen_count: governor.mask().frozen_count(),
            floats_sent: floats,
            cumulative_cb_seconds: cb,
        });
        if governor_config.record_states {
            states.push(x_next.clone());
        }
        x = x_next;
        if stop {
            break;
        }
    }

    let converged = governor.criterion_satisfied();
    Ok(SolverTrace {
        records,
        states,
        final_state: StateVector { angles: x },
        mask: governor.mask().clone(),
        iterations: governor.iteration(),
        total_floats,
        cb_seconds: cb,
        cb_parallel_seconds: cb_par,
        converged,
    })
}
