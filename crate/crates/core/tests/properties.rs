use dse_core::chi2::chi_square_threshold;
use dse_core::clock::NullClock;
use dse_core::governor::{GovernorConfig, Mode};
use dse_core::network::{
    build_measurement_model, simulate_measurements, Branch, Bus, MeasurementConfig, Network,
    Partition, StateVector,
};
use dse_core::partitioner::cut_cost;
use dse_core::runner::error_metrics;
use dse_core::splitting::{split_gain, splitting_run, SplittingOptions};
use dse_core::wls::{build_gain, objective, solve_wls};
use nalgebra::DVector;
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct RandomNet {
    network: Network,
    seed: u64,
}

fn random_net() -> impl Strategy<Value = RandomNet> {
    (3usize..8)
        .prop_flat_map(|n| {
            (
                Just(n),
                proptest::collection::vec(0usize..100, n - 1),
                proptest::collection::vec(0.5f64..2.0, n - 1),
                proptest::collection::vec(-1.0f64..1.0, n),
                any::<u64>(),
            )
        })
        .prop_map(|(n, parents, reactances, injections, seed)| {
            let buses: Vec<Bus> = (1..=n)
                .map(|id| Bus {
                    id,
                    injection: injections[id - 1],
                })
                .collect();
            // random spanning tree: bus i attaches to one earlier bus
            let branches: Vec<Branch> = (2..=n)
                .map(|i| Branch {
                    from: parents[i - 2] % (i - 1) + 1,
                    to: i,
                    reactance: reactances[i - 2],
                })
                .collect();
            RandomNet {
                network: Network::new(buses, branches, 1).unwrap(),
                seed,
            }
        })
}

fn model_and_z(net: &RandomNet) -> (dse_core::MeasurementModel, DVector<f64>) {
    let model = build_measurement_model(&net.network, &MeasurementConfig::default()).unwrap();
    let z = simulate_measurements(&model, net.seed);
    (model, z)
}

proptest! {
    #[test]
    fn split_reassembles_exactly(net in random_net(), alpha in 1.0f64..3.0) {
        let (model, z) = model_and_z(&net);
        let gain = build_gain(&model, &z).unwrap();
        let split = split_gain(&gain, alpha).unwrap();
        let back = split.reassemble();
        let diff = (&back - gain.a()).amax();
        prop_assert!(diff <= 1e-9 * gain.a().amax().max(1.0));
    }

    #[test]
    fn wls_objective_is_minimal(net in random_net(), dir in proptest::collection::vec(-1.0f64..1.0, 2..7)) {
        let (model, z) = model_and_z(&net);
        let gain = build_gain(&model, &z).unwrap();
        let star = solve_wls(&gain).unwrap();
        let n = star.angles.len();
        let mut d = DVector::zeros(n);
        for i in 0..n {
            d[i] = dir[i % dir.len()];
        }
        let moved = StateVector { angles: &star.angles + d * 1e-2 };
        prop_assert!(objective(&model, &z, &star) <= objective(&model, &z, &moved) + 1e-12);
    }

    #[test]
    fn error_metric_sandwich(a in proptest::collection::vec(-10.0f64..10.0, 1..12),
                             b in proptest::collection::vec(-10.0f64..10.0, 1..12)) {
        let n = a.len().min(b.len());
        let x = StateVector { angles: DVector::from_row_slice(&a[..n]) };
        let y = StateVector { angles: DVector::from_row_slice(&b[..n]) };
        let (eps1, eps2) = error_metrics(&x, &y);
        prop_assert!(eps2 <= eps1 + 1e-15);
        prop_assert!(eps1 <= n as f64 * eps2 + 1e-15);
    }

    #[test]
    fn cut_cost_is_twice_weighted_cut_edges(net in random_net(), mask in 1u32..127, w in 0.001f64..1.0) {
        let n = net.network.bus_count();
        let mut areas = vec![Vec::new(), Vec::new()];
        for (pos, bus) in net.network.buses().iter().enumerate() {
            areas[((mask >> (pos % 7)) & 1) as usize].push(bus.id);
        }
        prop_assume!(!areas[0].is_empty() && !areas[1].is_empty());
        let part = Partition::new(areas.clone()).unwrap();
        let cost = cut_cost(&net.network, &part, w).unwrap();
        let cut = net
            .network
            .branches()
            .iter()
            .filter(|b| part.area_of(b.from) != part.area_of(b.to))
            .count();
        prop_assert!((cost - 2.0 * w * cut as f64).abs() <= 1e-12 * n as f64);
    }

    #[test]
    fn stable_splitting_converges_to_wls(net in random_net()) {
        let (model, z) = model_and_z(&net);
        let gain = build_gain(&model, &z).unwrap();
        let split = split_gain(&gain, 1.0).unwrap();
        prop_assume!(split.rho() < 0.999);
        let star = solve_wls(&gain).unwrap();
        let config = GovernorConfig::new(1e-10, Mode::Wocc, 500_000);
        let trace = splitting_run(
            &split,
            &StateVector::zeros(gain.state_count()),
            &config,
            &SplittingOptions::default(),
            &NullClock,
        )
        .unwrap();
        prop_assert!(trace.converged);
        let (_, eps2) = error_metrics(&trace.final_state, &star);
        prop_assert!(eps2 <= 1e-6, "eps2 = {eps2}");
    }

    #[test]
    fn wcc_freezing_is_monotone(net in random_net()) {
        let (model, z) = model_and_z(&net);
        let gain = build_gain(&model, &z).unwrap();
        let split = split_gain(&gain, 1.0).unwrap();
        prop_assume!(split.rho() < 0.999);
        let config = GovernorConfig::new(1e-6, Mode::Wcc, 500_000);
        let trace = splitting_run(
            &split,
            &StateVector::zeros(gain.state_count()),
            &config,
            &SplittingOptions::default(),
            &NullClock,
        )
        .unwrap();
        let mut last_frozen = 0;
        let mut last_floats = usize::MAX;
        for rec in &trace.records {
            prop_assert!(rec.frozen_count >= last_frozen);
            prop_assert!(rec.floats_sent <= last_floats);
            last_frozen = rec.frozen_count;
            last_floats = rec.floats_sent;
        }
        prop_assert_eq!(trace.mask.frozen_count(), last_frozen);
    }

    #[test]
    fn overall_time_is_affine_in_iterations(net in random_net(), tdelay in 0.0f64..2.0) {
        let (model, z) = model_and_z(&net);
        let gain = build_gain(&model, &z).unwrap();
        let split = split_gain(&gain, 1.0).unwrap();
        prop_assume!(split.rho() < 0.999);
        let config = GovernorConfig::new(1e-8, Mode::Wocc, 500_000);
        let trace = splitting_run(
            &split,
            &StateVector::zeros(gain.state_count()),
            &config,
            &SplittingOptions::default(),
            &NullClock,
        )
        .unwrap();
        // a null clock contributes zero compute time
        let ot = trace.overall_time(tdelay);
        prop_assert!((ot - tdelay * trace.iterations as f64).abs() <= 1e-12);
    }

    #[test]
    fn chi_square_threshold_monotone(dof in 1usize..30, lo in 0.5f64..0.9) {
        let hi = lo + 0.05;
        let t_lo = chi_square_threshold(dof, lo).unwrap();
        let t_hi = chi_square_threshold(dof, hi).unwrap();
        prop_assert!(t_hi > t_lo);
        let t_next = chi_square_threshold(dof + 1, lo).unwrap();
        prop_assert!(t_next > t_lo);
    }
}