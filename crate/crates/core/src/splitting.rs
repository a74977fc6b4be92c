//! Matrix-splitting fixed-point iteration and gradient step-size selection.
//!
//! The gain matrix is split as A = M + N with M = D + E'_ii (diagonal) and
//! N = E - E'_ii, where D and E are the diagonal and off-diagonal parts of A
//! and E'_ii = alpha * sum_j |E_ij|. The iteration
//! x <- M^-1 (u - N x) has A x = u as its fixed point and converges whenever
//! the spectral radius of M^-1 N is below one.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::clock::Clock;
use crate::error::{Error, Result};
use crate::governor::{Governor, GovernorConfig, IterationRecord, SolverTrace};
use crate::network::StateVector;
use crate::spectral::{spectral_radius, symmetric_radius, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::wls::GainSystem;

const DIVERGENCE_LIMIT: f64 = 1e12;

/// A = M + N split with diagonal M, plus the recorded spectral radius of
/// M^-1 N.
#[derive(Debug, Clone)]
pub struct SplitSystem {
    m_diag: DVector<f64>,
    n: DMatrix<f64>,
    y: DVector<f64>,
    rho: f64,
    /// Off-diagonal gain-graph degree per state, used for communication
    /// accounting.
    degrees: Vec<usize>,
}

impl SplitSystem {
    pub fn m_diag(&self) -> &DVector<f64> {
        &self.m_diag
    }

    pub fn n(&self) -> &DMatrix<f64> {
        &self.n
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// Spectral radius of the iteration matrix M^-1 N.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn state_count(&self) -> usize {
        self.y.len()
    }

    /// Reassembled A = M + N.
    pub fn reassemble(&self) -> DMatrix<f64> {
        let mut a = self.n.clone();
        for i in 0..self.m_diag.len() {
            a[(i, i)] += self.m_diag[i];
        }
        a
    }
}

/// Splits a gain system with scaling factor `alpha` for E'_ii.
pub fn split_gain(gain: &GainSystem, alpha: f64) -> Result<SplitSystem> {
    if alpha <= 0.0 {
        return Err(Error::InvalidArgument(alloc::format!(
            "alpha must be > 0, got {alpha}"
        )));
    }
    let a = gain.a();
    let n_states = gain.state_count();
    let mut n = a.clone();
    let mut m_diag = DVector::zeros(n_states);
    let mut degrees = vec![0usize; n_states];
    for i in 0..n_states {
        let mut abs_off = 0.0;
        for j in 0..n_states {
            if j != i {
                abs_off += a[(i, j)].abs();
                if a[(i, j)] != 0.0 {
                    degrees[i] += 1;
                }
            }
        }
        let e_prime = alpha * abs_off;
        m_diag[i] = a[(i, i)] + e_prime;
        n[(i, i)] = -e_prime;
        if m_diag[i] <= 0.0 {
            return Err(Error::SingularSystem);
        }
    }

    // M^-1 N is similar to the symmetric M^-1/2 N M^-1/2, so its radius can
    // be taken from a dense symmetric eigendecomposition. Power iteration is
    // avoided here: near the stability boundary the top eigenvalues cluster
    // and it underestimates the radius.
    let rho = {
        let mut sym = n.clone();
        for i in 0..n_states {
            for j in 0..n_states {
                sym[(i, j)] /= libm::sqrt(m_diag[i] * m_diag[j]);
            }
        }
        symmetric_radius(&sym)
    };

    Ok(SplitSystem {
        m_diag,
        n,
        y: gain.u().clone(),
        rho,
        degrees,
    })
}

/// Fraction of the stability interval (0, 2/||L||) to use as the gradient
/// step size tau.
pub fn choose_tau(gain: &GainSystem, fraction: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&fraction) || fraction == 0.0 {
        return Err(Error::InvalidArgument(alloc::format!(
            "fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let norm = operator_norm(gain);
    if norm == 0.0 {
        return Err(Error::SingularSystem);
    }
    Ok(fraction * 2.0 / norm)
}

/// ||A||_2 of the SPD gain matrix by power iteration.
pub fn operator_norm(gain: &GainSystem) -> f64 {
    let a = gain.a().clone();
    spectral_radius(gain.state_count(), DEFAULT_TOL, DEFAULT_MAX_ITER, move |v| &a * v)
}

/// Options for [`splitting_run`].
#[derive(Debug, Clone, Copy, Default)]
pub struct SplittingOptions {
    /// Iterate even when rho >= 1 (normally refused).
    pub force: bool,
}

/// Runs the splitting iteration from `x0` under the governor.
///
/// Per-iteration communication counts every unfrozen state as one float per
/// gain-graph neighbor of its bus.
pub fn splitting_run(
    split: &SplitSystem,
    x0: &StateVector,
    config: &GovernorConfig,
    options: &SplittingOptions,
    clock: &dyn Clock,
) -> Result<SolverTrace> {
    if split.rho >= 1.0 && !options.force {
        return Err(Error::NonConvergentSplit { rho: split.rho });
    }
    let n = split.state_count();
    if x0.len() != n {
        return Err(Error::DimensionMismatch(alloc::format!(
            "x0 has {} states, system has {n}",
            x0.len()
        )));
    }

    let mut governor = Governor::new(*config, n);
    let mut records = Vec::new();
    let mut states = Vec::new();
    let mut x = x0.angles.clone();
    let mut cb = 0.0;
    let mut total_floats = 0;
    if config.record_states {
        states.push(x.clone());
    }

    loop {
        let t0 = clock.now_seconds();
        let mut x_next = split.y() - &split.n * &x;
        x_next.component_div_assign(&split.m_diag);
        governor.pin_frozen(&x, &mut x_next);
        cb += clock.now_seconds() - t0;

        if x_next.amax() > DIVERGENCE_LIMIT {
            return Err(Error::Diverged {
                iteration: governor.iteration() + 1,
                norm: x_next.amax(),
            });
        }

        let stop = governor.step(&x, &x_next)?;
        let floats: usize = (0..n)
            .filter(|&i| !governor.mask().is_frozen(i))
            .map(|i| split.degrees[i])
            .sum();
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
        cb_parallel_seconds: cb,
        converged,
    })
}
