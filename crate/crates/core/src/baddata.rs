//! Bad-data sensitivity sweep.
//!
//! One measurement at a time is scaled by a perturbation factor, the selected
//! distributed estimator is run to convergence, and every area's local
//! weighted residual objective is compared against a chi-square threshold.
//! Detections are deduplicated per measurement: several areas flagging the
//! same perturbed measurement count once.

use alloc::vec::Vec;

use nalgebra::DVector;

use crate::chi2::chi_square_threshold;
use crate::clock::Clock;
use crate::error::{Error, Result};
use crate::governor::GovernorConfig;
use crate::network::{make_area_views, AreaView, MeasurementModel, Network, Partition};
use crate::runner::{run_method, Method, SolverParams};

/// Returns a copy of `z` with one entry scaled by `factor`.
pub fn perturb_measurement(z: &DVector<f64>, index: usize, factor: f64) -> Result<DVector<f64>> {
    if index >= z.len() {
        return Err(Error::MeasurementIndex {
            index,
            len: z.len(),
        });
    }
    let mut out = z.clone();
    out[index] *= factor;
    Ok(out)
}

/// Weighted residual objective restricted to one area's measurements.
pub fn local_objective(
    view: &AreaView,
    model: &MeasurementModel,
    z: &DVector<f64>,
    x: &DVector<f64>,
) -> f64 {
    let weights = model.weights();
    let mut total = 0.0;
    for &mi in &view.local_measurements {
        let predicted = model.f().row(mi).dot(&x.transpose());
        let r = z[mi] - predicted;
        total += weights[mi] * r * r;
    }
    total
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub measurement: usize,
    /// Areas whose objective exceeded their threshold.
    pub areas: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// Per-measurement, per-area local objectives at the converged state;
    /// None marks a solver failure on that perturbed instance.
    pub grid: Vec<Vec<Option<f64>>>,
    /// Per-area chi-square thresholds; infinite when an area has no local
    /// redundancy (degrees of freedom zero).
    pub thresholds: Vec<f64>,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub factor: f64,
    pub confidence: f64,
    pub method: Method,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            factor: 1.1,
            confidence: 0.95,
            method: Method::Decomposition,
        }
    }
}

/// Perturbs every measurement in turn and collects per-area objectives and
/// threshold exceedances.
#[allow(clippy::too_many_arguments)]
pub fn sensitivity_sweep(
    network: &Network,
    model: &MeasurementModel,
    z: &DVector<f64>,
    partition: &Partition,
    options: &SweepOptions,
    params: &SolverParams,
    config: &GovernorConfig,
    clock: &dyn Clock,
) -> Result<SweepResult> {
    if options.method == Method::Centralized {
        return Err(Error::InvalidArgument(
            "sweep requires a distributed method".into(),
        ));
    }
    if !(options.confidence > 0.0 && options.confidence < 1.0) {
        return Err(Error::InvalidArgument(alloc::format!(
            "confidence must lie in (0, 1), got {}",
            options.confidence
        )));
    }
    partition.validate_for(network)?;
    let views = make_area_views(network, model, partition)?;

    let mut thresholds = Vec::with_capacity(views.len());
    for view in &views {
        let dof = view
            .local_measurements
            .len()
            .saturating_sub(view.owned_states.len());
        let t = if dof == 0 {
            f64::INFINITY
        } else {
            chi_square_threshold(dof, options.confidence)?
        };
        thresholds.push(t);
    }

    let m = model.measurement_count();
    let mut grid: Vec<Vec<Option<f64>>> = Vec::with_capacity(m);
    let mut detections = Vec::new();
    for index in 0..m {
        let perturbed = perturb_measurement(z, index, options.factor)?;
        let run = run_method(
            options.method,
            network,
            model,
            &perturbed,
            Some(partition),
            params,
            config,
            clock,
        );
        match run {
            Ok(trace) => {
                let mut row = Vec::with_capacity(views.len());
                let mut exceeding = Vec::new();
                for (k, view) in views.iter().enumerate() {
                    let obj = local_objective(view, model, &perturbed, &trace.final_state.angles);
                    if obj > thresholds[k] {
                        exceeding.push(k);
                    }
                    row.push(Some(obj));
                }
                grid.push(row);
                if !exceeding.is_empty() {
                    detections.push(Detection {
                        measurement: index,
                        areas: exceeding,
                    });
                }
            }
            Err(_) => grid.push(alloc::vec![None; views.len()]),
        }
    }

    Ok(SweepResult {
        grid,
        thresholds,
        detections,
    })
}

/// Deduplicated detection count: a measurement flagged by several areas
/// counts once.
pub fn count_detections(sweep: &SweepResult) -> usize {
    let mut seen: Vec<usize> = sweep.detections.iter().map(|d| d.measurement).collect();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::NullClock;
    use crate::governor::Mode;
    use crate::network::{build_measurement_model, MeasurementConfig};
    use crate::wls::{build_gain, solve_wls};
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
    fn perturbation_scales_one_entry() {
        let z = DVector::from_row_slice(&[0.2, 0.0, -0.5]);
        let p = perturb_measurement(&z, 0, 1.1).unwrap();
        assert_abs_diff_eq!(p[0], 0.22, epsilon = 1e-15);
        assert_eq!(p[1], 0.0);
        assert_eq!(p[2], -0.5);

        let zero = perturb_measurement(&z, 1, 1.1).unwrap();
        assert_eq!(zero, z);

        let identity = perturb_measurement(&z, 2, 1.0).unwrap();
        assert_eq!(identity, z);

        assert!(perturb_measurement(&z, 3, 1.1).is_err());
    }

    #[test]
    fn noiseless_identity_sweep_detects_nothing() {
        let (net, model, z, part) = chain_inputs();
        let options = SweepOptions {
            factor: 1.0,
            ..Default::default()
        };
        let sweep = sensitivity_sweep(
            &net,
            &model,
            &z,
            &part,
            &options,
            &SolverParams::default(),
            &GovernorConfig::new(1e-10, Mode::Wocc, 2_000),
            &NullClock,
        )
        .unwrap();
        assert_eq!(count_detections(&sweep), 0);
        for row in &sweep.grid {
            for cell in row {
                assert!(cell.unwrap() <= 1e-12);
            }
        }
    }

    #[test]
    fn gross_error_detected_in_owning_area() {
        let (net, model, z, part) = chain_inputs();
        let views = make_area_views(&net, &model, &part).unwrap();

        // derive the minimal detectable scaling of measurement 1 (flow on
        // branch 2-3, assigned to area 0) from the centralized residual,
        // then inject twice that
        let threshold = chi_square_threshold(
            views[0].local_measurements.len() - views[0].owned_states.len(),
            0.95,
        )
        .unwrap();
        let probe = perturb_measurement(&z, 1, 2.0).unwrap(); // delta = 0.2
        let gain = build_gain(&model, &probe).unwrap();
        let x = solve_wls(&gain).unwrap();
        let obj_unit = local_objective(&views[0], &model, &probe, &x.angles);
        // objective grows quadratically in the injected delta
        let delta_min = 0.2 * libm::sqrt(threshold / obj_unit);
        let factor = 1.0 + 2.0 * delta_min / 0.2;

        let options = SweepOptions {
            factor,
            ..Default::default()
        };
        let sweep = sensitivity_sweep(
            &net,
            &model,
            &z,
            &part,
            &options,
            &SolverParams::default(),
            &GovernorConfig::new(1e-10, Mode::Wocc, 5_000),
            &NullClock,
        )
        .unwrap();
        let detection = sweep
            .detections
            .iter()
            .find(|d| d.measurement == 1)
            .expect("perturbed flow must be detected");
        assert!(detection.areas.contains(&0));
    }

    #[test]
    fn detection_count_deduplicates_multi_area_events() {
        let sweep = SweepResult {
            grid: Vec::new(),
            thresholds: Vec::new(),
            detections: alloc::vec![
                Detection {
                    measurement: 4,
                    areas: alloc::vec![1, 2],
                },
                Detection {
                    measurement: 7,
                    areas: alloc::vec![0],
                },
            ],
        };
        assert_eq!(count_detections(&sweep), 2);

        let empty = SweepResult {
            grid: Vec::new(),
            thresholds: Vec::new(),
            detections: Vec::new(),
        };
        assert_eq!(count_detections(&empty), 0);
    }

    #[test]
    fn centralized_method_rejected() {
        let (net, model, z, part) = chain_inputs();
        let options = SweepOptions {
            method: Method::Centralized,
            ..Default::default()
        };
        assert!(sensitivity_sweep(
            &net,
            &model,
            &z,
            &part,
            &options,
            &SolverParams::default(),
            &GovernorConfig::new(1e-8, Mode::Wocc, 100),
            &NullClock,
        )
        .is_err());
    }
}