//! Centralized weighted-least-squares estimator and objective.

use alloc::format;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::network::{MeasurementModel, StateVector};

/// Normal-equations system of the WLS problem: A x = u with
/// A = F' R^-1 F and u = F' R^-1 z.
#[derive(Debug, Clone)]
pub struct GainSystem {
    a: DMatrix<f64>,
    u: DVector<f64>,
}

impl GainSystem {
    /// Gain matrix A (symmetric positive definite for an observable model).
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Right-hand side u.
    pub fn u(&self) -> &DVector<f64> {
        &self.u
    }

    pub fn state_count(&self) -> usize {
        self.u.len()
    }
}

/// Builds the gain system for a measurement vector.
pub fn build_gain(model: &MeasurementModel, z: &DVector<f64>) -> Result<GainSystem> {
    if z.len() != model.measurement_count() {
        return Err(Error::DimensionMismatch(format!(
            "z has {} entries, model has {} measurements",
            z.len(),
            model.measurement_count()
        )));
    }
    let w = model.weights();
    let f = model.f();
    let mut fw = f.transpose();
    for (j, mut col) in fw.column_iter_mut().enumerate() {
        col *= w[j];
    }
    let mut a = &fw * f;
    let u = &fw * z;
    // enforce exact symmetry lost to rounding
    for i in 0..a.nrows() {
        for j in 0..i {
            let s = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = s;
            a[(j, i)] = s;
        }
    }
    if a.clone().cholesky().is_none() {
        return Err(Error::Unobservable);
    }
    Ok(GainSystem { a, u })
}

/// Solves A x = u by SPD factorization.
pub fn solve_wls(gain: &GainSystem) -> Result<StateVector> {
    let chol = gain.a.clone().cholesky().ok_or(Error::SingularSystem)?;
    Ok(StateVector {
        angles: chol.solve(&gain.u),
    })
}

/// Weighted residual objective [z - F x]' R^-1 [z - F x].
pub fn objective(model: &MeasurementModel, z: &DVector<f64>, x: &StateVector) -> f64 {
    let r = z - model.f() * &x.angles;
    let w = model.weights();
    r.iter().zip(w.iter()).map(|(ri, wi)| wi * ri * ri).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{
        build_measurement_model, dc_power_flow, Branch, Bus, MeasurementConfig, Network,
    };
    use alloc::vec;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;

    fn chain3_unit_weights() -> (Network, MeasurementModel) {
        let net = Network::new(
            vec![
                Bus {
                    id: 1,
                    injection: 0.1,
                },
                Bus {
                    id: 2,
                    injection: 0.1,
                },
                Bus {
                    id: 3,
                    injection: -0.2,
                },
            ],
            vec![
                Branch {
                    from: 1,
                    to: 2,
                    reactance: 1.0,
                },
                Branch {
                    from: 2,
                    to: 3,
                    reactance: 1.0,
                },
            ],
            1,
        )
        .unwrap();
        // sigma2 = 0 gives unit weights (R = I for the gain algebra)
        let model = build_measurement_model(
            &net,
            &MeasurementConfig {
                sigma2: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        (net, model)
    }

    #[test]
    fn chain_gain_matches_hand_products() {
        let (_, model) = chain3_unit_weights();
        let z = DVector::from_row_slice(&[0.1, 0.2, 0.1, 0.1, -0.2]);
        let gain = build_gain(&model, &z).unwrap();
        let a = gain.a();
        assert_abs_diff_eq!(a[(0, 0)], 8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a[(0, 1)], -4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a[(1, 0)], -4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a[(1, 1)], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gain.u()[0], 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(gain.u()[1], -0.5, epsilon = 1e-12);
    }

    #[test]
    fn zero_measurements_give_zero_rhs() {
        let (_, model) = chain3_unit_weights();
        let z = DVector::zeros(5);
        let gain = build_gain(&model, &z).unwrap();
        assert_eq!(gain.u().amax(), 0.0);
        assert_eq!(solve_wls(&gain).unwrap().angles.amax(), 0.0);
    }

    #[test]
    fn chain_solution_matches_cramer() {
        let (_, model) = chain3_unit_weights();
        let z = DVector::from_row_slice(&[0.1, 0.2, 0.1, 0.1, -0.2]);
        let x = solve_wls(&build_gain(&model, &z).unwrap()).unwrap();
        assert_abs_diff_eq!(x.angles[0], -0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(x.angles[1], -0.3, epsilon = 1e-12);
    }

    #[test]
    fn noiseless_objective_is_zero_at_truth() {
        let (net, model) = chain3_unit_weights();
        let truth = dc_power_flow(&net).unwrap();
        let z = model.true_values();
        assert_abs_diff_eq!(objective(&model, &z, &truth), 0.0, epsilon = 1e-24);
    }

    #[test]
    fn objective_is_minimized_at_wls_solution() {
        let (_, model) = chain3_unit_weights();
        let z = DVector::from_row_slice(&[0.11, 0.19, 0.12, 0.08, -0.21]);
        let xs = solve_wls(&build_gain(&model, &z).unwrap()).unwrap();
        let base = objective(&model, &z, &xs);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1);
        for _ in 0..100 {
            let delta =
                DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0) * 0.01);
            let perturbed = StateVector {
                angles: &xs.angles + delta,
            };
            assert!(objective(&model, &z, &perturbed) > base);
        }
    }

    #[test]
    fn normal_equation_optimality() {
        let (_, model) = chain3_unit_weights();
        let z = DVector::from_row_slice(&[0.11, 0.19, 0.12, 0.08, -0.21]);
        let xs = solve_wls(&build_gain(&model, &z).unwrap()).unwrap();
        let resid = &z - model.f() * &xs.angles;
        let grad = model.f().transpose() * resid;
        assert!(grad.amax() < 1e-8);
    }

    #[test]
    fn doubling_r_preserves_argmin_and_halves_objective() {
        let net = crate::network::tests::chain3();
        let m1 = build_measurement_model(&net, &MeasurementConfig::default()).unwrap();
        let m2 = build_measurement_model(
            &net,
            &MeasurementConfig {
                sigma2: 2e-4,
                ..Default::default()
            },
        )
        .unwrap();
        let z = crate::network::simulate_measurements(&m1, 5);
        let x1 = solve_wls(&build_gain(&m1, &z).unwrap()).unwrap();
        let x2 = solve_wls(&build_gain(&m2, &z).unwrap()).unwrap();
        assert_abs_diff_eq!((x1.angles.clone() - x2.angles).amax(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            objective(&m2, &z, &x1),
            0.5 * objective(&m1, &z, &x1),
            epsilon = 1e-9
        );
    }
}
