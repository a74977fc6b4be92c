//! Unified entry point over all estimation methods.
//!
//! The caller picks a method and supplies one parameter bundle; the runner
//! builds whatever intermediate structures the method needs (gain system,
//! area views) and returns the common trace type.

use alloc::vec::Vec;

use nalgebra::DVector;

use crate::admm::{admm_run, AdmmOptions};
use crate::clock::Clock;
use crate::decomposition::{decomposition_run, DecompositionOptions};
use crate::error::{Error, Result};
use crate::governor::{FreezeMask, GovernorConfig, IterationRecord, SolverTrace};
use crate::gossip::{gossip_run, GossipConfig};
use crate::network::{make_area_views, MeasurementModel, Network, Partition, StateVector};
use crate::splitting::{choose_tau, split_gain, splitting_run, SplittingOptions};
use crate::wls::{build_gain, solve_wls};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Centralized,
    Splitting,
    Gossip,
    Decomposition,
    Admm,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Centralized,
        Method::Splitting,
        Method::Gossip,
        Method::Decomposition,
        Method::Admm,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Centralized => "centralized",
            Method::Splitting => "splitting",
            Method::Gossip => "gossip",
            Method::Decomposition => "decomposition",
            Method::Admm => "admm",
        }
    }

    /// Whether the method needs an area partition to run.
    pub fn needs_partition(&self) -> bool {
        !matches!(self, Method::Centralized | Method::Splitting)
    }
}

/// Method-specific tuning knobs with sensible defaults.
#[derive(Debug, Clone, Copy)]
pub struct SolverParams {
    /// Splitting diagonal-dominance factor alpha.
    pub alpha: f64,
    /// Run the splitting iteration even when its spectral radius is >= 1.
    pub force_splitting: bool,
    /// Gossip step size as a fraction of the stability bound 2/||L||.
    pub tau_fraction: f64,
    /// Seed for randomized schedules (gossip pair activation).
    pub seed: u64,
    /// Update all areas every gossip round.
    pub synchronous_gossip: bool,
    /// Decomposition consensus penalty.
    pub omega_x: f64,
    /// Gauss-Seidel sweep order for decomposition.
    pub gauss_seidel: bool,
    /// ADMM penalty parameter.
    pub admm_c: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            alpha: 1.0,
            force_splitting: false,
            tau_fraction: 0.5,
            seed: 42,
            synchronous_gossip: false,
            omega_x: 1e4,
            gauss_seidel: false,
            admm_c: 1.0,
        }
    }
}

fn centralized_trace(
    model: &MeasurementModel,
    z: &DVector<f64>,
    n: usize,
    clock: &dyn Clock,
) -> Result<SolverTrace> {
    let t0 = clock.now_seconds();
    let gain = build_gain(model, z)?;
    let solution = solve_wls(&gain)?;
    let cb = clock.now_seconds() - t0;
    let records = alloc::vec![IterationRecord {
        iteration: 1,
        max_delta: 0.0,
        frozen_count: 0,
        floats_sent: 0,
        cumulative_cb_seconds: cb,
    }];
    Ok(SolverTrace {
        records,
        states: Vec::new(),
        final_state: solution,
        mask: FreezeMask::new(n),
        iterations: 1,
        total_floats: 0,
        cb_seconds: cb,
        cb_parallel_seconds: cb,
        converged: true,
    })
}

/// Runs `method` on the given case and returns its trace.
pub fn run_method(
    method: Method,
    network: &Network,
    model: &MeasurementModel,
    z: &DVector<f64>,
    partition: Option<&Partition>,
    params: &SolverParams,
    config: &GovernorConfig,
    clock: &dyn Clock,
) -> Result<SolverTrace> {
    let n = network.state_count();
    if method.needs_partition() && partition.is_none() {
        return Err(Error::InvalidArgument(alloc::format!(
            "method {} requires a partition",
            method.name()
        )));
    }
    match method {
        Method::Centralized => centralized_trace(model, z, n, clock),
        Method::Splitting => {
            let gain = build_gain(model, z)?;
            let split = split_gain(&gain, params.alpha)?;
            let options = SplittingOptions {
                force: params.force_splitting,
            };
            let x0 = StateVector::zeros(n);
            splitting_run(&split, &x0, config, &options, clock)
        }
        Method::Gossip => {
            let gain = build_gain(model, z)?;
            let partition = partition.expect("checked above");
            partition.validate_for(network)?;
            let views = make_area_views(network, model, partition)?;
            let tau = choose_tau(&gain, params.tau_fraction)?;
            let mut gossip = GossipConfig::new(tau, params.seed);
            gossip.synchronous = params.synchronous_gossip;
            gossip_run(&gain, &views, network, &gossip, config, clock)
        }
        Method::Decomposition => {
            let partition = partition.expect("checked above");
            partition.validate_for(network)?;
            let views = make_area_views(network, model, partition)?;
            let options = DecompositionOptions {
                omega_x: params.omega_x,
                gauss_seidel: params.gauss_seidel,
            };
            decomposition_run(&views, network, model, z, &options, config, clock)
        }
        Method::Admm => {
            let partition = partition.expect("checked above");
            partition.validate_for(network)?;
            let views = make_area_views(network, model, partition)?;
            let options = AdmmOptions { c: params.admm_c };
            admm_run(&views, network, model, z, &options, config, clock)
        }
    }
}

/// eps1 (sum of absolute errors) and eps2 (largest absolute error) of a state
/// vector against a reference, usually the centralized solution.
pub fn error_metrics(estimate: &StateVector, reference: &StateVector) -> (f64, f64) {
    let diff = &estimate.angles - &reference.angles;
    (diff.iter().map(|d| d.abs()).sum(), diff.amax())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::NullClock;
    use crate::governor::Mode;
    use crate::network::{build_measurement_model, MeasurementConfig};
    use approx::assert_abs_diff_eq;

    fn chain_inputs() -> (
        crate::network::Network,
        MeasurementModel,
        DVector<f64>,
        Partition,
    ) {
        let net = crate::network::tests::chain3();
        let model = build_measurement_model(
            &net,
            &MeasurementConfig {
                sigma2: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        let z = DVector::from_row_slice(&[0.1, 0.2, 0.1, 0.1, -0.2]);
        let part = Partition::new(alloc::vec![alloc::vec![1, 2], alloc::vec![3]]).unwrap();
        (net, model, z, part)
    }

    #[test]
    fn every_method_recovers_chain_solution() {
        let (net, model, z, part) = chain_inputs();
        let params = SolverParams::default();
        let config = GovernorConfig::new(1e-9, Mode::Wocc, 200_000);
        for method in Method::ALL {
            let trace = run_method(
                method,
                &net,
                &model,
                &z,
                Some(&part),
                &params,
                &config,
                &NullClock,
            )
            .unwrap();
            assert!(trace.converged, "{} did not converge", method.name());
            assert_abs_diff_eq!(trace.final_state.angles[0], -0.1, epsilon = 1e-5);
            assert_abs_diff_eq!(trace.final_state.angles[1], -0.3, epsilon = 1e-5);
        }
    }

    #[test]
    fn partition_requirement_enforced() {
        let (net, model, z, _) = chain_inputs();
        let err = run_method(
            Method::Gossip,
            &net,
            &model,
            &z,
            None,
            &SolverParams::default(),
            &GovernorConfig::new(1e-6, Mode::Wocc, 100),
            &NullClock,
        );
        assert!(err.is_err());
    }

    #[test]
    fn error_metrics_are_absolute_sums_and_max() {
        let a = StateVector {
            angles: DVector::from_row_slice(&[1.0, -2.0, 0.5]),
        };
        let b = StateVector {
            angles: DVector::from_row_slice(&[0.5, -1.0, 0.5]),
        };
        let (eps1, eps2) = error_metrics(&a, &b);
        assert_abs_diff_eq!(eps1, 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(eps2, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn method_names_are_stable() {
        let names: alloc::vec::Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
        assert_eq!(
            names,
            alloc::vec!["centralized", "splitting", "gossip", "decomposition", "admm"]
        );
    }
}