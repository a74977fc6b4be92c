//! Convergence governor: global stop rule, per-state freezing and run metrics.
//!
//! In WOCC mode the governor only stops the run once every state's latest
//! per-iteration change is at or below epsilon. In WCC mode a state whose
//! change drops below epsilon is frozen permanently: its value is pinned to
//! the prior iterate and it is excluded from further transmission. The run
//! stops when every state is frozen or all unfrozen changes are within
//! epsilon.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::network::{AreaView, Network, StateVector};

/// Whether the per-state freezing criterion is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Without the modified convergence criterion: plain global stop.
    Wocc,
    /// With the modified criterion: per-state freezing and transmission
    /// suppression.
    Wcc,
}

#[derive(Debug, Clone, Copy)]
pub struct GovernorConfig {
    /// Convergence limit epsilon.
    pub epsilon: f64,
    pub mode: Mode,
    /// Iteration cap.
    pub max_iter: usize,
    /// Simulated per-iteration data-transmission delay (seconds), used for
    /// the overall-time metric.
    pub tdelay: f64,
    /// Keep full iterate history in the trace (memory-heavy; for tests and
    /// plots).
    pub record_states: bool,
}

impl GovernorConfig {
    pub fn new(epsilon: f64, mode: Mode, max_iter: usize) -> Self {
        GovernorConfig {
            epsilon,
            mode,
            max_iter,
            tdelay: 0.5,
            record_states: false,
        }
    }
}

/// Permanent per-state freeze flags with the iteration each state froze at.
#[derive(Debug, Clone)]
pub struct FreezeMask {
    frozen_at: Vec<Option<usize>>,
}

impl FreezeMask {
    pub fn new(n: usize) -> Self {
        FreezeMask {
            frozen_at: vec![None; n],
        }
    }

    pub fn len(&self) -> usize {
        self.frozen_at.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frozen_at.is_empty()
    }

    pub fn is_frozen(&self, i: usize) -> bool {
        self.frozen_at[i].is_some()
    }

    pub fn frozen_at(&self, i: usize) -> Option<usize> {
        self.frozen_at[i]
    }

    pub fn frozen_count(&self) -> usize {
        self.frozen_at.iter().filter(|f| f.is_some()).count()
    }

    pub fn all_frozen(&self) -> bool {
        self.frozen_at.iter().all(|f| f.is_some())
    }

    fn freeze(&mut self, i: usize, iteration: usize) {
        if self.frozen_at[i].is_none() {
            self.frozen_at[i] = Some(iteration);
        }
    }
}

/// Drives the stop/freeze decisions for one run over a monitored state
/// vector (the globally assembled estimate).
#[derive(Debug, Clone)]
pub struct Governor {
    config: GovernorConfig,
    mask: FreezeMask,
    /// Latest observed per-state change; infinity until first update.
    last_delta: Vec<f64>,
    iteration: usize,
}

impl Governor {
    pub fn new(config: GovernorConfig, n: usize) -> Self {
        Governor {
            config,
            mask: FreezeMask::new(n),
            last_delta: vec![f64::INFINITY; n],
            iteration: 0,
        }
    }

    pub fn config(&self) -> &GovernorConfig {
        &self.config
    }

    pub fn mask(&self) -> &FreezeMask {
        &self.mask
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Largest change observed for any unfrozen state in the last step.
    pub fn max_delta(&self) -> f64 {
        let mut max = 0.0f64;
        for (i, &d) in self.last_delta.iter().enumerate() {
            if !self.mask.is_frozen(i) && d.is_finite() {
                max = max.max(d);
            }
        }
        max
    }

    /// Processes one synchronous iteration where every state was updated.
    /// Returns `stop`.
    pub fn step(&mut self, prev: &DVector<f64>, curr: &DVector<f64>) -> Result<bool> {
        let all = vec![true; prev.len()];
        self.step_partial(prev, curr, &all)
    }

    /// Processes one iteration where only the states with `updated[i] = true`
    /// were recomputed (gossip rounds update a pair of areas at a time).
    ///
    /// In WCC mode, updated unfrozen states whose change falls below epsilon
    /// freeze at this iteration. The stop condition requires every state to
    /// have been updated at least once.
    pub fn step_partial(
        &mut self,
        prev: &DVector<f64>,
        curr: &DVector<f64>,
        updated: &[bool],
    ) -> Result<bool> {
        let n = self.mask.len();
        if prev.len() != n || curr.len() != n || updated.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "governor monitors {n} states, got {}/{}/{}",
                prev.len(),
                curr.len(),
                updated.len()
            )));
        }
        self.iteration += 1;
        for i in 0..n {
            if !updated[i] || self.mask.is_frozen(i) {
                continue;
            }
            let d = (curr[i] - prev[i]).abs();
            if !d.is_finite() {
                return Err(Error::NanIterate(self.iteration));
            }
            self.last_delta[i] = d;
            if self.config.mode == Mode::Wcc && d < self.config.epsilon {
                self.mask.freeze(i, self.iteration);
            }
        }

        Ok(self.criterion_satisfied() || self.iteration >= self.config.max_iter)
    }

    /// Whether the stop criterion proper holds (ignoring the iteration cap).
    pub fn criterion_satisfied(&self) -> bool {
        match self.config.mode {
            Mode::Wocc => self.last_delta.iter().all(|&d| d <= self.config.epsilon),
            Mode::Wcc => {
                self.mask.all_frozen()
                    || (0..self.mask.len()).all(|i| {
                        self.mask.is_frozen(i) || self.last_delta[i] <= self.config.epsilon
                    })
            }
        }
    }

    /// Pins frozen entries of `curr` to their values in `prev`. Solvers call
    /// this after computing a candidate iterate so frozen states never move.
    pub fn pin_frozen(&self, prev: &DVector<f64>, curr: &mut DVector<f64>) {
        for i in 0..self.mask.len() {
            if self.mask.is_frozen(i) {
                curr[i] = prev[i];
            }
        }
    }
}

/// Counts the boundary floats every area must transmit this iteration: one
/// per unfrozen shared state per replicating neighbor. The mask is indexed
/// by global state index.
pub fn comm_volume(mask: &FreezeMask, views: &[AreaView], network: &Network) -> usize {
    let mut total = 0;
    for view in views {
        for &bus in &view.replicated_states {
            if let Some(si) = network.state_position(bus) {
                if !mask.is_frozen(si) {
                    total += 1;
                }
            }
        }
    }
    total
}

/// Overall time OT = tdelay * Iter + CB.
pub fn overall_time(iter: usize, cb_seconds: f64, tdelay: f64) -> f64 {
    tdelay * iter as f64 + cb_seconds
}

/// (eps1, eps2) = (sum |x_cent - x_dist|, max |x_cent - x_dist|).
pub fn solution_metrics(x_cent: &StateVector, x_dist: &StateVector) -> Result<(f64, f64)> {
    if x_cent.len() != x_dist.len() {
        return Err(Error::DimensionMismatch(format!(
            "state vectors of lengths {} and {}",
            x_cent.len(),
            x_dist.len()
        )));
    }
    let diff = &x_cent.angles - &x_dist.angles;
    Ok((diff.iter().map(|d| d.abs()).sum(), diff.amax()))
}

/// Per-iteration record of a solver run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub max_delta: f64,
    pub frozen_count: usize,
    pub floats_sent: usize,
    pub cumulative_cb_seconds: f64,
}

/// Complete outcome of a solver run.
#[derive(Debug, Clone)]
pub struct SolverTrace {
    pub records: Vec<IterationRecord>,
    /// Full iterate history, present only when requested.
    pub states: Vec<DVector<f64>>,
    pub final_state: StateVector,
    pub mask: FreezeMask,
    pub iterations: usize,
    pub total_floats: usize,
    /// Summed per-area local-solve wall time.
    pub cb_seconds: f64,
    /// Max-per-iteration local-solve time summed over iterations, i.e. the
    /// wall time of an ideally parallel execution.
    pub cb_parallel_seconds: f64,
    pub converged: bool,
}

impl SolverTrace {
    pub fn overall_time(&self, tdelay: f64) -> f64 {
        overall_time(self.iterations, self.cb_seconds, tdelay)
    }
}
