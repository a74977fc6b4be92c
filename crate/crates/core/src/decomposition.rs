//! Penalty-coupled area decomposition.
//!
//! Each area solves a local least-squares problem over its owned and
//! replicated states: weighted residuals of its assigned measurements plus
//! quadratic penalties tying every replicated state to the value last
//! broadcast by its owning area. Because the DC model is linear the local
//! minimizer is a closed-form SPD solve, and the local normal matrix never
//! changes, so each area factorizes once and back-substitutes per iteration.

use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::clock::Clock;
use crate::error::{Error, Result};
use crate::governor::{comm_volume, Governor, GovernorConfig, IterationRecord, SolverTrace};
use crate::network::{AreaView, MeasurementModel, Network, StateVector};
use crate::wls::objective;

const DIVERGENCE_LIMIT: f64 = 1e12;
const OSCILLATION_LIMIT: usize = 50;

#[derive(Debug, Clone, Copy)]
pub struct DecompositionOptions {
    /// Consensus penalty weight omega_x on replicated-state anchors.
    pub omega_x: f64,
    /// Use a Gauss-Seidel sweep (areas see earlier areas' fresh values)
    /// instead of the default Jacobi schedule.
    pub gauss_seidel: bool,
}

impl Default for DecompositionOptions {
    fn default() -> Self {
        DecompositionOptions {
            omega_x: 1e4,
            gauss_seidel: false,
        }
    }
}

/// Prefactorized local solver for one area.
pub struct AreaSolver {
    pub area: usize,
    /// Local variable bus ids: owned states first, then replicated.
    pub vars: Vec<usize>,
    pub owned_count: usize,
    /// Global state index of each local variable.
    var_state: Vec<usize>,
    chol: Cholesky<f64, Dyn>,
    /// F_local' W, applied to the local measurement vector.
    ftw: DMatrix<f64>,
    z_local: DVector<f64>,
    omega_x: f64,
}

impl AreaSolver {
    pub fn new(
        view: &AreaView,
        network: &Network,
        model: &MeasurementModel,
        z: &DVector<f64>,
        omega_x: f64,
    ) -> Result<Self> {
        if omega_x <= 0.0 {
            return Err(Error::InvalidArgument(alloc::format!(
                "omega_x must be > 0, got {omega_x}"
            )));
        }
        let vars: Vec<usize> = view
            .owned_states
            .iter()
            .chain(view.replicated_states.iter())
            .copied()
            .collect();
        let var_state: Vec<usize> = vars
            .iter()
            .map(|&b| network.state_position(b).expect("non-slack bus"))
            .collect();
        let p = vars.len();
        let m_local = view.local_measurements.len();

        let mut f_local = DMatrix::zeros(m_local, p);
        let mut z_local = DVector::zeros(m_local);
        let weights = model.weights();
        let mut w_local = DVector::zeros(m_local);
        for (r, &mi) in view.local_measurements.iter().enumerate() {
            for (c, &si) in var_state.iter().enumerate() {
                f_local[(r, c)] = model.f()[(mi, si)];
            }
            z_local[r] = z[mi];
            w_local[r] = weights[mi];
        }

        let mut ftw = f_local.transpose();
        for (j, mut col) in ftw.column_iter_mut().enumerate() {
            col *= w_local[j];
        }
        let mut normal = &ftw * &f_local;
        for c in view.owned_states.len()..p {
            normal[(c, c)] += omega_x;
        }
        let chol = normal.cholesky().ok_or(Error::SingularSystem)?;

        Ok(AreaSolver {
            area: view.area,
            owned_count: view.owned_states.len(),
            vars,
            var_state,
            chol,
            ftw,
            z_local,
            omega_x,
        })
    }

    /// Exact minimizer of the local objective given the current broadcast of
    /// neighbor values (indexed by global state index).
    pub fn solve(&self, broadcast: &DVector<f64>) -> DVector<f64> {
        let mut rhs = &self.ftw * &self.z_local;
        for c in self.owned_count..self.vars.len() {
            rhs[c] += self.omega_x * broadcast[self.var_state[c]];
        }
        self.chol.solve(&rhs)
    }
}

/// Runs the decomposition iteration to convergence under the governor.
pub fn decomposition_run(
    views: &[AreaView],
    network: &Network,
    model: &MeasurementModel,
    z: &DVector<f64>,
    options: &DecompositionOptions,
    config: &GovernorConfig,
    clock: &dyn Clock,
) -> Result<SolverTrace> {
    let n = network.state_count();
    let solvers: Vec<AreaSolver> = views
        .iter()
        .map(|v| AreaSolver::new(v, network, model, z, options.omega_x))
        .collect::<Result<_>>()?;

    let mut governor = Governor::new(*config, n);
    let mut records = Vec::new();
    let mut states = Vec::new();
    let mut x = DVector::zeros(n);
    let mut cb = 0.0;
    let mut cb_par = 0.0;
    let mut total_floats = 0;
    let mut prev_objective = f64::INFINITY;
    let mut rising = 0usize;
    if config.record_states {
        states.push(x.clone());
    }

    loop {
        let mut x_next = x.clone();
        let mut max_area_time = 0.0f64;
        for solver in &solvers {
            let t0 = clock.now_seconds();
            let source = if options.gauss_seidel { &x_next } else { &x };
            let local = solver.solve(source);
            let owned = local.rows(0, solver.owned_count).into_owned();
            for (c, &bus) in solver.vars[..solver.owned_count].iter().enumerate() {
                let si = network.state_position(bus).expect("non-slack bus");
                x_next[si] = owned[c];
            }
            let dt = clock.now_seconds() - t0;
            cb += dt;
            max_area_time = max_area_time.max(dt);
        }
        cb_par += max_area_time;
        governor.pin_frozen(&x, &mut x_next);

        if x_next.amax() > DIVERGENCE_LIMIT {
            return Err(Error::Diverged {
                iteration: governor.iteration() + 1,
                norm: x_next.amax(),
            });
        }

        let obj = objective(
            model,
            z,
            &StateVector {
                angles: x_next.clone(),
            },
        );
        if obj > prev_objective {
            rising += 1;
            if rising >= OSCILLATION_LIMIT {
                return Err(Error::Oscillation(rising));
            }
        } else {
            rising = 0;
        }
        prev_objective = obj;

        let stop = governor.step(&x, &x_next)?;
        let floats = comm_volume(governor.mask(), views, network);
        total_floats += floats;
        records.push(IterationRecord {
            iteration: governor.iteration(),
            max_delta: governor.max_delta(),
            frozen_count: governor.mask().frozen_count(),
            floats_sent: floats,
            cumulative_cb_seconds: cb,
        });
        if config.record_states {
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::NullClock;
    use crate::governor::Mode;
    use crate::network::{build_measurement_model, make_area_views, MeasurementConfig, Partition};
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn chain_setup() -> (
        crate::network::Network,
        MeasurementModel,
        DVector<f64>,
        Vec<AreaView>,
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
        let views = make_area_views(&net, &model, &part).unwrap();
        (net, model, z, views)
    }

    #[test]
    fn noiseless_chain_converges_to_truth() {
        let (net, model, z, views) = chain_setup();
        let trace = decomposition_run(
            &views,
            &net,
            &model,
            &z,
            &DecompositionOptions::default(),
            &GovernorConfig::new(1e-10, Mode::Wocc, 1_000),
            &NullClock,
        )
        .unwrap();
        assert!(trace.converged);
        assert_abs_diff_eq!(trace.final_state.angles[0], -0.1, epsilon = 1e-7);
        assert_abs_diff_eq!(trace.final_state.angles[1], -0.3, epsilon = 1e-7);
    }

    #[test]
    fn gauss_seidel_variant_converges() {
        let (net, model, z, views) = chain_setup();
        let opts = DecompositionOptions {
            gauss_seidel: true,
            ..Default::default()
        };
        let trace = decomposition_run(
            &views,
            &net,
            &model,
            &z,
            &opts,
            &GovernorConfig::new(1e-10, Mode::Wocc, 1_000),
            &NullClock,
        )
        .unwrap();
        assert!(trace.converged);
        assert_abs_diff_eq!(trace.final_state.angles[0], -0.1, epsilon = 1e-7);
        assert_abs_diff_eq!(trace.final_state.angles[1], -0.3, epsilon = 1e-7);
    }

    #[test]
    fn large_penalty_pins_replicated_values_to_broadcast() {
        let (net, model, z, views) = chain_setup();
        let solver = AreaSolver::new(&views[0], &net, &model, &z, 1e8).unwrap();
        let broadcast = DVector::from_row_slice(&[0.0, -0.25]);
        let local = solver.solve(&broadcast);
        // area 0 owns bus 2 and replicates bus 3; the replicated slot must
        // track the broadcast almost exactly under a huge penalty
        assert_eq!(solver.vars, alloc::vec![2, 3]);
        assert_abs_diff_eq!(local[1], -0.25, epsilon = 1e-6);
    }

    #[test]
    fn jacobi_iterates_match_two_block_oracle() {
        let (net, model, z, views) = chain_setup();
        let omega = 1e4;
        let mut gov = GovernorConfig::new(1e-30, Mode::Wocc, 5);
        gov.record_states = true;
        let trace = decomposition_run(
            &views,
            &net,
            &model,
            &z,
            &DecompositionOptions::default(),
            &gov,
            &NullClock,
        )
        .unwrap();
        assert_eq!(trace.iterations, 5);
        assert_eq!(trace.states.len(), 6);

        // hand-rolled oracle: area 0 holds measurements {0,1,2,3} over
        // (theta2, theta3) owning theta2; area 1 holds measurement {4}
        // owning theta3. Jacobi sweep from the zero vector.
        let f0 = DMatrix::from_row_slice(4, 2, &[-1.0, 0.0, 1.0, -1.0, -1.0, 0.0, 2.0, -1.0]);
        let z0 = DVector::from_row_slice(&[0.1, 0.2, 0.1, 0.1]);
        let f1 = DMatrix::from_row_slice(1, 2, &[-1.0, 1.0]);
        let z1 = DVector::from_row_slice(&[-0.2]);
        let mut n0 = f0.transpose() * &f0;
        n0[(1, 1)] += omega;
        // area 1 orders its variables owned-first: (theta3, theta2)
        let mut n1 = DMatrix::zeros(2, 2);
        let g1 = f1.transpose() * &f1;
        n1[(0, 0)] = g1[(1, 1)];
        n1[(0, 1)] = g1[(1, 0)];
        n1[(1, 0)] = g1[(0, 1)];
        n1[(1, 1)] = g1[(0, 0)] + omega;
        let c0 = n0.cholesky().unwrap();
        let c1 = n1.cholesky().unwrap();

        let mut x = DVector::zeros(2);
        for step in 1..=5 {
            let mut r0 = f0.transpose() * &z0;
            r0[1] += omega * x[1];
            let s0 = c0.solve(&r0);
            let mut r1 = DVector::zeros(2);
            let ftz = f1.transpose() * &z1;
            r1[0] = ftz[1];
            r1[1] = ftz[0] + omega * x[0];
            let s1 = c1.solve(&r1);
            x = DVector::from_row_slice(&[s0[0], s1[0]]);
            assert_abs_diff_eq!((&trace.states[step] - &x).amax(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn non_positive_penalty_rejected() {
        let (net, model, z, views) = chain_setup();
        assert!(AreaSolver::new(&views[0], &net, &model, &z, 0.0).is_err());
    }
}
