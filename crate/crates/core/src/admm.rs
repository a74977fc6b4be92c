//! Consensus ADMM across areas.
//!
//! Every area keeps a local copy of its owned and replicated states. For each
//! state held by two areas a consensus slot carries the auxiliary variable and
//! one dual per side. A round runs the three standard steps: local x-update
//! (prefactorized SPD solve), auxiliary averaging, dual ascent. Since each
//! measurement belongs to exactly one area, the consensus problem's optimum is
//! the centralized weighted least-squares solution.

use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::clock::Clock;
use crate::error::{Error, Result};
use crate::governor::{Governor, GovernorConfig, IterationRecord, SolverTrace};
use crate::network::{AreaView, MeasurementModel, Network, StateVector};

const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy)]
pub struct AdmmOptions {
    /// Augmented-Lagrangian penalty parameter.
    pub c: f64,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        AdmmOptions { c: 1.0 }
    }
}

/// One consensus constraint: areas `left` and `right` both hold a copy of
/// `state` and must agree through the auxiliary value.
#[derive(Debug, Clone)]
pub struct Slot {
    /// Global state index under consensus.
    pub state: usize,
    pub left: usize,
    pub right: usize,
    pub aux: f64,
    pub dual_left: f64,
    pub dual_right: f64,
}

struct AreaLocal {
    owned_count: usize,
    /// Global state index per local variable.
    var_state: Vec<usize>,
    chol: Cholesky<f64, Dyn>,
    ftwz: DVector<f64>,
    /// (slot index, local variable index) pairs this area participates in.
    slot_vars: Vec<(usize, usize)>,
    x: DVector<f64>,
}

pub struct AdmmSolver {
    areas: Vec<AreaLocal>,
    slots: Vec<Slot>,
    c: f64,
    state_count: usize,
}

impl AdmmSolver {
    pub fn new(
        views: &[AreaView],
        network: &Network,
        model: &MeasurementModel,
        z: &DVector<f64>,
        options: &AdmmOptions,
    ) -> Result<Self> {
        if options.c <= 0.0 {
            return Err(Error::InvalidArgument(alloc::format!(
                "penalty c must be > 0, got {}",
                options.c
            )));
        }
        let weights = model.weights();

        // pass 1: per-area variable layout and unregularized normal systems
        let mut layouts = Vec::with_capacity(views.len());
        for view in views {
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
            let mut wz = DVector::zeros(m_local);
            for (r, &mi) in view.local_measurements.iter().enumerate() {
                for (col, &si) in var_state.iter().enumerate() {
                    f_local[(r, col)] = model.f()[(mi, si)];
                }
                wz[r] = weights[mi] * z[mi];
            }
            let mut wf = f_local.clone();
            for (r, mut row) in wf.row_iter_mut().enumerate() {
                row *= weights[view.local_measurements[r]];
            }
            let normal = f_local.transpose() * &wf;
            let ftwz = f_local.transpose() * wz;
            layouts.push((vars, var_state, view.owned_states.len(), normal, ftwz));
        }

        // pass 2: one slot per unordered area pair and shared bus
        let mut slots: Vec<Slot> = Vec::new();
        let mut slot_vars: Vec<Vec<(usize, usize)>> = alloc::vec![Vec::new(); views.len()];
        for k in 0..views.len() {
            for l in (k + 1)..views.len() {
                for (ci, &bus) in layouts[k].0.iter().enumerate() {
                    if let Some(cj) = layouts[l].0.iter().position(|&b| b == bus) {
                        let si = network.state_position(bus).expect("non-slack bus");
                        slot_vars[k].push((slots.len(), ci));
                        slot_vars[l].push((slots.len(), cj));
                        slots.push(Slot {
                            state: si,
                            left: k,
                            right: l,
                            aux: 0.0,
                            dual_left: 0.0,
                            dual_right: 0.0,
                        });
                    }
                }
            }
        }
        if slots.is_empty() {
            return Err(Error::NoAdjacentAreas);
        }

        // pass 3: add c per slot membership to the diagonal and factorize
        let mut areas = Vec::with_capacity(views.len());
        for (k, (_vars, var_state, owned_count, mut normal, ftwz)) in
            layouts.into_iter().enumerate()
        {
            for &(_, ci) in &slot_vars[k] {
                normal[(ci, ci)] += options.c;
            }
            let p = var_state.len();
            let chol = normal.cholesky().ok_or(Error::SingularSystem)?;
            areas.push(AreaLocal {
                owned_count,
                var_state,
                chol,
                ftwz,
                slot_vars: core::mem::take(&mut slot_vars[k]),
                x: DVector::zeros(p),
            });
        }

        Ok(AdmmSolver {
            areas,
            slots,
            c: options.c,
            state_count: network.state_count(),
        })
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    /// Local variable vector of an area, owned states first.
    pub fn local_state(&self, area: usize) -> &DVector<f64> {
        &self.areas[area].x
    }

    /// Local x-update: each area minimizes its augmented Lagrangian with the
    /// auxiliary values and duals held fixed.
    pub fn x_update(&mut self) {
        for k in 0..self.areas.len() {
            self.x_update_area(k);
        }
    }

    /// Runs one x-update for a single area only; used to exercise the step in
    /// isolation.
    pub fn x_update_area(&mut self, k: usize) {
        let mut rhs = self.areas[k].ftwz.clone();
        for idx in 0..self.areas[k].slot_vars.len() {
            let (si, ci) = self.areas[k].slot_vars[idx];
            let slot = &self.slots[si];
            let v = if slot.left == k {
                slot.dual_left
            } else {
                slot.dual_right
            };
            rhs[ci] += self.c * slot.aux - v;
        }
        self.areas[k].x = self.areas[k].chol.solve(&rhs);
    }

    /// Auxiliary update: each slot averages the two local copies plus the
    /// scaled dual sum.
    pub fn aux_update(&mut self) {
        for si in 0..self.slots.len() {
            let (xl, xr) = self.slot_copies(si);
            let slot = &mut self.slots[si];
            slot.aux = 0.5 * (xl + xr) + (slot.dual_left + slot.dual_right) / (2.0 * self.c);
        }
    }

    /// Dual ascent on every consensus constraint.
    pub fn dual_update(&mut self) {
        for si in 0..self.slots.len() {
            let (xl, xr) = self.slot_copies(si);
            let slot = &mut self.slots[si];
            slot.dual_left += self.c * (xl - slot.aux);
            slot.dual_right += self.c * (xr - slot.aux);
        }
    }

    /// Largest consensus violation across all slots.
    pub fn primal_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for si in 0..self.slots.len() {
            let (xl, xr) = self.slot_copies(si);
            let slot = &self.slots[si];
            worst = worst.max((xl - slot.aux).abs()).max((xr - slot.aux).abs());
        }
        worst
    }

    /// Assembles owned local values into the global state vector layout.
    pub fn assemble_owned(&self, out: &mut DVector<f64>) {
        debug_assert_eq!(out.len(), self.state_count);
        for area in &self.areas {
            for ci in 0..area.owned_count {
                out[area.var_state[ci]] = area.x[ci];
            }
        }
    }

    /// Overwrites every local copy of a global state with a pinned value and
    /// parks its consensus slots there.
    pub fn pin_state(&mut self, state: usize, value: f64) {
        for area in self.areas.iter_mut() {
            for (ci, &si) in area.var_state.iter().enumerate() {
                if si == state {
                    area.x[ci] = value;
                }
            }
        }
        for slot in self.slots.iter_mut() {
            if slot.state == state {
                slot.aux = value;
            }
        }
    }

    fn slot_copies(&self, si: usize) -> (f64, f64) {
        let slot = &self.slots[si];
        let xl = self.area_copy(slot.left, si);
        let xr = self.area_copy(slot.right, si);
        (xl, xr)
    }

    fn area_copy(&self, area: usize, slot_index: usize) -> f64 {
        let a = &self.areas[area];
        let (_, ci) = a
            .slot_vars
            .iter()
            .find(|&&(s, _)| s == slot_index)
            .copied()
            .expect("area participates in slot");
        a.x[ci]
    }
}

/// Count of consensus slots whose state is not frozen; each such slot costs
/// two transmitted floats per round (one copy in each direction).
fn unfrozen_slot_floats(solver: &AdmmSolver, governor: &Governor) -> usize {
    2 * solver
        .slots
        .iter()
        .filter(|s| !governor.mask().is_frozen(s.state))
        .count()
}

/// Runs the ADMM iteration under the governor.
pub fn admm_run(
    views: &[AreaView],
    network: &Network,
    model: &MeasurementModel,
    z: &DVector<f64>,
    options: &AdmmOptions,
    config: &GovernorConfig,
    clock: &dyn Clock,
) -> Result<SolverTrace> {
    let n = network.state_count();
    if views.len() < 2 {
        return Err(Error::InvalidPartition("need at least 2 areas".into()));
    }
    let mut solver = AdmmSolver::new(views, network, model, z, options)?;
    let mut governor = Governor::new(*config, n);
    let mut records = Vec::new();
    let mut states = Vec::new();
    let mut x = DVector::zeros(n);
    let mut cb = 0.0;
    let mut cb_par = 0.0;
    let mut total_floats = 0;
    if config.record_states {
        states.push(x.clone());
    }

    loop {
        let t0 = clock.now_seconds();
        solver.x_update();
        solver.aux_update();
        solver.dual_update();
        let dt = clock.now_seconds() - t0;
        cb += dt;
        // the x-updates run concurrently across areas in a deployment
        cb_par += dt / views.len() as f64;

        let mut x_next = x.clone();
        solver.assemble_owned(&mut x_next);
        governor.pin_frozen(&x, &mut x_next);

        if x_next.amax() > DIVERGENCE_LIMIT {
            return Err(Error::Diverged {
                iteration: governor.iteration() + 1,
                norm: x_next.amax(),
            });
        }

        let stop = governor.step(&x, &x_next)?;
        for state in 0..n {
            if governor.mask().is_frozen(state) {
                solver.pin_state(state, x_next[state]);
            }
        }
        let floats = unfrozen_slot_floats(&solver, &governor);
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
