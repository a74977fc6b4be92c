//! Area partition search driven by the boundary cut cost.
//!
//! The cost of a partition is the weighted number of tie lines counted from
//! both sides: for each area, every branch leaving it contributes its weight,
//! so a branch cut once shows up twice in the total. The optimizer runs a
//! seeded multi-start local search over single-bus moves and cross-area
//! swaps; an exhaustive scan is available for very small networks.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::network::{Network, Partition};

/// Symmetric bus adjacency matrix: 1 where a branch connects the pair.
pub fn connection_matrix(network: &Network) -> DMatrix<f64> {
    let n = network.bus_count();
    let mut c = DMatrix::zeros(n, n);
    for branch in network.branches() {
        let i = network.bus_position(branch.from).expect("validated branch");
        let j = network.bus_position(branch.to).expect("validated branch");
        c[(i, j)] = 1.0;
        c[(j, i)] = 1.0;
    }
    c
}

/// Uniformly weighted adjacency matrix, `weight` on every connected pair.
pub fn weight_matrix(network: &Network, weight: f64) -> DMatrix<f64> {
    connection_matrix(network) * weight
}

/// Cut cost of one area: sum of weights of branches with exactly one endpoint
/// inside it.
pub fn area_cut_cost(network: &Network, partition: &Partition, area: usize, weight: f64) -> f64 {
    let mut cost = 0.0;
    for branch in network.branches() {
        let fa = partition.area_of(branch.from);
        let ta = partition.area_of(branch.to);
        if (fa == Some(area)) != (ta == Some(area)) {
            cost += weight;
        }
    }
    cost
}

/// Total cut cost: per-area boundary costs summed, so every cut branch counts
/// twice.
pub fn cut_cost(network: &Network, partition: &Partition, weight: f64) -> Result<f64> {
    partition.validate_for(network)?;
    let mut total = 0.0;
    for area in 0..partition.areas().len() {
        total += area_cut_cost(network, partition, area, weight);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy)]
pub struct PartitionerOptions {
    /// Number of areas.
    pub k: usize,
    /// Minimum bus count per area.
    pub b_lim: usize,
    /// Uniform branch weight.
    pub weight: f64,
    /// Independent random restarts of the local search.
    pub restarts: usize,
    pub seed: u64,
    /// Improvement passes per restart before giving up.
    pub max_passes: usize,
}

impl Default for PartitionerOptions {
    fn default() -> Self {
        PartitionerOptions {
            k: 2,
            b_lim: 2,
            weight: 0.01,
            restarts: 16,
            seed: 42,
            max_passes: 200,
        }
    }
}

fn check_feasible(options: &PartitionerOptions, buses: usize) -> Result<()> {
    if options.k < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 areas".into(),
        ));
    }
    if options.b_lim == 0 {
        return Err(Error::InvalidArgument("b_lim must be at least 1".into()));
    }
    if options.k * options.b_lim > buses {
        return Err(Error::InfeasiblePartition {
            requested: options.k * options.b_lim,
            buses,
        });
    }
    Ok(())
}

/// Number of cut branches for an assignment of bus positions to areas.
fn cut_edges(edges: &[(usize, usize)], assign: &[usize]) -> usize {
    edges
        .iter()
        .filter(|&&(i, j)| assign[i] != assign[j])
        .count()
}

fn assignment_to_partition(network: &Network, assign: &[usize], k: usize) -> Partition {
    let mut areas: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (pos, &area) in assign.iter().enumerate() {
        areas[area].push(network.buses()[pos].id);
    }
    Partition::new(areas).expect("search maintains non-empty areas")
}

fn edge_list(network: &Network) -> Vec<(usize, usize)> {
    network
        .branches()
        .iter()
        .map(|b| {
            (
                network.bus_position(b.from).expect("validated branch"),
                network.bus_position(b.to).expect("validated branch"),
            )
        })
        .collect()
}

/// Local search from a random balanced start: best single-bus move or swap
/// per pass, repeated until no strict improvement remains.
pub fn optimize_partition(
    network: &Network,
    options: &PartitionerOptions,
) -> Result<(Partition, f64)> {
    let n = network.bus_count();
    check_feasible(options, n)?;
    let edges = edge_list(network);
    let mut rng = ChaCha12Rng::seed_from_u64(options.seed);

    let mut best_assign: Option<Vec<usize>> = None;
    let mut best_cut = usize::MAX;
    for _ in 0..options.restarts.max(1) {
        // Fisher-Yates order, then round-robin areas for balance
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut assign = vec![0usize; n];
        for (rank, &pos) in order.iter().enumerate() {
            assign[pos] = rank % options.k;
        }
        let mut sizes = vec![0usize; options.k];
        for &a in &assign {
            sizes[a] += 1;
        }
        let mut cut = cut_edges(&edges, &assign);

        for _ in 0..options.max_passes {
            let mut improved = false;
            // single-bus moves
            for pos in 0..n {
                let from = assign[pos];
                if sizes[from] <= options.b_lim {
                    continue;
                }
                for to in 0..options.k {
                    if to == from {
                        continue;
                    }
                    assign[pos] = to;
                    let candidate = cut_edges(&edges, &assign);
                    if candidate < cut {
                        cut = candidate;
                        sizes[from] -= 1;
                        sizes[to] += 1;
                        improved = true;
                        break;
                    }
                    assign[pos] = from;
                }
            }
            // cross-area swaps keep sizes intact
            for a in 0..n {
                for b in (a + 1)..n {
                    if assign[a] == assign[b] {
                        continue;
                    }
                    assign.swap(a, b);
                    let candidate = cut_edges(&edges, &assign);
                    if candidate < cut {
                        cut = candidate;
                        improved = true;
                    } else {
                        assign.swap(a, b);
                    }
                }
            }
            if !improved {
                break;
            }
        }

        if cut < best_cut {
            best_cut = cut;
            best_assign = Some(assign);
        }
    }

    let assign = best_assign.expect("at least one restart ran");
    let partition = assignment_to_partition(network, &assign, options.k);
    let cost = 2.0 * options.weight * best_cut as f64;
    Ok((partition, cost))
}

/// Exhaustive scan over all assignments; only sensible for 10 buses or fewer.
pub fn exhaustive_optimum(
    network: &Network,
    options: &PartitionerOptions,
) -> Result<(Partition, f64)> {
    let n = network.bus_count();
    check_feasible(options, n)?;
    if n > 10 {
        return Err(Error::InvalidArgument(alloc::format!(
            "exhaustive search limited to 10 buses, got {n}"
        )));
    }
    let edges = edge_list(network);
    let k = options.k;
    let mut best: Option<(Vec<usize>, usize)> = None;
    let mut assign = vec![0usize; n];
    loop {
        // canonical labeling: area labels appear in first-use order, which
        // skips permuted duplicates
        let mut seen = 0usize;
        let mut canonical = true;
        for &a in &assign {
            if a > seen {
                canonical = false;
                break;
            }
            if a == seen {
                seen += 1;
            }
        }
        if canonical && seen == k {
            let mut sizes = vec![0usize; k];
            for &a in &assign {
                sizes[a] += 1;
            }
            if sizes.iter().all(|&s| s >= options.b_lim) {
                let cut = cut_edges(&edges, &assign);
                if best.as_ref().map_or(true, |&(_, c)| cut < c) {
                    best = Some((assign.clone(), cut));
                }
            }
        }
        // odometer increment in base k
        let mut i = n;
        loop {
            if i == 0 {
                break;
            }
            i -= 1;
            assign[i] += 1;
            if assign[i] < k {
                break;
            }
            assign[i] = 0;
        }
        if assign.iter().all(|&a| a == 0) {
            break;
        }
    }
    let (assign, cut) = best.ok_or(Error::InfeasiblePartition {
        requested: k * options.b_lim,
        buses: n,
    })?;
    let partition = assignment_to_partition(network, &assign, k);
    Ok((partition, 2.0 * options.weight * cut as f64))
}
