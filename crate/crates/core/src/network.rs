//! Network case model, DC measurement model and area-local views.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// A bus with its net active-power injection (p.u.).
#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: usize,
    pub injection: f64,
}

/// A branch between two buses with series reactance (p.u.).
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub reactance: f64,
}

impl Branch {
    /// DC susceptance b = 1/x.
    pub fn susceptance(&self) -> f64 {
        1.0 / self.reactance
    }
}

/// A validated bus/branch network with a designated slack bus.
///
/// Bus ids are arbitrary positive integers; internally every bus gets a dense
/// index (its position in `buses`) and every non-slack bus additionally gets a
/// state index, which orders the entries of [`StateVector`].
#[derive(Debug, Clone)]
pub struct Network {
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    slack: usize,
    bus_index: BTreeMap<usize, usize>,
    state_index: BTreeMap<usize, usize>,
    state_ids: Vec<usize>,
}

impl Network {
    /// Validates and builds a network. Rejects dangling branch endpoints,
    /// self-loops, non-positive reactances, unknown slack and disconnected
    /// topologies.
    pub fn new(buses: Vec<Bus>, branches: Vec<Branch>, slack: usize) -> Result<Self> {
        let mut bus_index = BTreeMap::new();
        for (i, b) in buses.iter().enumerate() {
            if bus_index.insert(b.id, i).is_some() {
                return Err(Error::DuplicateBus(b.id));
            }
        }
        if !bus_index.contains_key(&slack) {
            return Err(Error::UnknownSlack(slack));
        }
        for br in &branches {
            if br.from == br.to {
                return Err(Error::SelfLoop {
                    from: br.from,
                    to: br.to,
                });
            }
            if !bus_index.contains_key(&br.from) || !bus_index.contains_key(&br.to) {
                return Err(Error::DanglingBranch {
                    from: br.from,
                    to: br.to,
                });
            }
            if br.reactance <= 0.0 {
                return Err(Error::NonPositiveReactance {
                    from: br.from,
                    to: br.to,
                    x: br.reactance,
                });
            }
        }

        // connectivity via traversal from the slack bus
        let n = buses.len();
        let mut adj = vec![Vec::new(); n];
        for br in &branches {
            let (i, j) = (bus_index[&br.from], bus_index[&br.to]);
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![bus_index[&slack]];
        seen[bus_index[&slack]] = true;
        while let Some(i) = stack.pop() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Disconnected);
        }

        let mut state_index = BTreeMap::new();
        let mut state_ids = Vec::new();
        for b in &buses {
            if b.id != slack {
                state_index.insert(b.id, state_ids.len());
                state_ids.push(b.id);
            }
        }

        Ok(Network {
            buses,
            branches,
            slack,
            bus_index,
            state_index,
            state_ids,
        })
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn slack(&self) -> usize {
        self.slack
    }

    /// Number of buses (M).
    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    /// Number of state variables (M - 1, slack angle excluded).
    pub fn state_count(&self) -> usize {
        self.state_ids.len()
    }

    /// Dense index of a bus id in the `buses` list.
    pub fn bus_position(&self, id: usize) -> Option<usize> {
        self.bus_index.get(&id).copied()
    }

    /// State index of a non-slack bus id; `None` for the slack bus.
    pub fn state_position(&self, id: usize) -> Option<usize> {
        self.state_index.get(&id).copied()
    }

    /// Non-slack bus ids in state order.
    pub fn state_ids(&self) -> &[usize] {
        &self.state_ids
    }

    /// Reduced susceptance matrix (slack row/column removed), SPD for a
    /// connected network.
    pub fn reduced_susceptance(&self) -> DMatrix<f64> {
        let n = self.state_count();
        let mut b = DMatrix::zeros(n, n);
        for br in &self.branches {
            let y = br.susceptance();
            let i = self.state_position(br.from);
            let j = self.state_position(br.to);
            if let Some(i) = i {
                b[(i, i)] += y;
            }
            if let Some(j) = j {
                b[(j, j)] += y;
            }
            if let (Some(i), Some(j)) = (i, j) {
                b[(i, j)] -= y;
                b[(j, i)] -= y;
            }
        }
        b
    }
}

/// Voltage phase angles at the non-slack buses (radians), in state order.
/// The slack angle is implicitly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub angles: DVector<f64>,
}

impl StateVector {
    pub fn zeros(n: usize) -> Self {
        StateVector {
            angles: DVector::zeros(n),
        }
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.len() == 0
    }

    /// Angle of a bus by id; zero for the slack bus.
    pub fn angle(&self, network: &Network, bus: usize) -> Option<f64> {
        if bus == network.slack() {
            network.bus_position(bus).map(|_| 0.0)
        } else {
            network.state_position(bus).map(|i| self.angles[i])
        }
    }
}

/// Solves the DC power flow B_reduced * theta = P for the ground-truth
/// angles. Any injection imbalance is absorbed by the slack bus.
pub fn dc_power_flow(network: &Network) -> Result<StateVector> {
    let b = network.reduced_susceptance();
    let p = DVector::from_iterator(
        network.state_count(),
        network
            .buses()
            .iter()
            .filter(|bus| bus.id != network.slack())
            .map(|bus| bus.injection),
    );
    let chol = b.cholesky().ok_or(Error::SingularSystem)?;
    Ok(StateVector {
        angles: chol.solve(&p),
    })
}

/// What a measurement observes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasurementKind {
    /// Active power flow on branch (by branch list index), metered at the
    /// from side: P_ij = b_ij (theta_i - theta_j).
    Flow(usize),
    /// Active power injection at a bus id: P_i = sum_j b_ij (theta_i - theta_j).
    Injection(usize),
}

/// One measurement with its noise-free value.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub kind: MeasurementKind,
    pub true_value: f64,
}

/// Which measurements to place and with what noise variance.
#[derive(Debug, Clone, Copy)]
pub struct MeasurementConfig {
    /// Place a from-side flow measurement on every branch.
    pub flows: bool,
    /// Place an injection measurement at every bus.
    pub injections: bool,
    /// Noise variance sigma^2 (p.u.^2) for every measurement. Zero means
    /// noise-free measurements with unit weights.
    pub sigma2: f64,
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        MeasurementConfig {
            flows: true,
            injections: true,
            sigma2: 1e-4,
        }
    }
}

/// Linear DC measurement model: z = F x + noise, cov(noise) = R = sigma^2 I.
#[derive(Debug, Clone)]
pub struct MeasurementModel {
    measurements: Vec<Measurement>,
    f: DMatrix<f64>,
    r_diag: DVector<f64>,
}

impl MeasurementModel {
    /// Builds a model from an explicit measurement list, matrix and noise
    /// diagonal, for custom measurement sets.
    pub fn from_parts(
        measurements: Vec<Measurement>,
        f: DMatrix<f64>,
        r_diag: DVector<f64>,
    ) -> Result<Self> {
        if measurements.len() != f.nrows() || r_diag.len() != f.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} measurements, F is {}x{}, R diag has {} entries",
                measurements.len(),
                f.nrows(),
                f.ncols(),
                r_diag.len()
            )));
        }
        if r_diag.iter().any(|&r| r < 0.0) {
            return Err(Error::InvalidArgument(
                "negative noise variance".into(),
            ));
        }
        Ok(MeasurementModel {
            measurements,
            f,
            r_diag,
        })
    }

    pub fn measurements(&self) -> &[Measurement] {
        &self.measurements
    }

    /// Measurement matrix F (m x n, slack column eliminated).
    pub fn f(&self) -> &DMatrix<f64> {
        &self.f
    }

    /// Diagonal of the noise covariance R.
    pub fn r_diag(&self) -> &DVector<f64> {
        &self.r_diag
    }

    pub fn measurement_count(&self) -> usize {
        self.measurements.len()
    }

    pub fn state_count(&self) -> usize {
        self.f.ncols()
    }

    /// Per-measurement weights 1/sigma^2; unit weight where sigma^2 = 0.
    pub fn weights(&self) -> DVector<f64> {
        self.r_diag.map(|r| if r > 0.0 { 1.0 / r } else { 1.0 })
    }

    /// Noise-free measurement vector.
    pub fn true_values(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.measurements.len(),
            self.measurements.iter().map(|m| m.true_value),
        )
    }
}

/// Builds the DC measurement model for the selected measurement set.
/// True values come from the DC power flow of the case injections.
pub fn build_measurement_model(
    network: &Network,
    config: &MeasurementConfig,
) -> Result<MeasurementModel> {
    if config.sigma2 < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "sigma2 must be >= 0, got {}",
            config.sigma2
        )));
    }
    let n = network.state_count();
    let truth = dc_power_flow(network)?;

    let mut kinds = Vec::new();
    let mut rows: Vec<DVector<f64>> = Vec::new();

    if config.flows {
        for (bi, br) in network.branches().iter().enumerate() {
            let mut row = DVector::zeros(n);
            let y = br.susceptance();
            if let Some(i) = network.state_position(br.from) {
                row[i] += y;
            }
            if let Some(j) = network.state_position(br.to) {
                row[j] -= y;
            }
            kinds.push(MeasurementKind::Flow(bi));
            rows.push(row);
        }
    }
    if config.injections {
        for bus in network.buses() {
            let mut row = DVector::zeros(n);
            for br in network.branches() {
                let y = br.susceptance();
                let (near, far) = if br.from == bus.id {
                    (br.from, br.to)
                } else if br.to == bus.id {
                    (br.to, br.from)
                } else {
                    continue;
                };
                if let Some(i) = network.state_position(near) {
                    row[i] += y;
                }
                if let Some(j) = network.state_position(far) {
                    row[j] -= y;
                }
            }
            kinds.push(MeasurementKind::Injection(bus.id));
            rows.push(row);
        }
    }

    let m = rows.len();
    let mut f = DMatrix::zeros(m, n);
    for (i, row) in rows.iter().enumerate() {
        f.set_row(i, &row.transpose());
    }

    // observability: F'F must be SPD, i.e. rank(F) = n
    let gram = f.transpose() * &f;
    if gram.cholesky().is_none() {
        return Err(Error::Unobservable);
    }

    let true_vals = &f * &truth.angles;
    let measurements = kinds
        .into_iter()
        .zip(true_vals.iter())
        .map(|(kind, &v)| Measurement {
            kind,
            true_value: v,
        })
        .collect();

    Ok(MeasurementModel {
        measurements,
        f,
        r_diag: DVector::from_element(m, config.sigma2),
    })
}

/// Draws a measurement vector z = true + eta, eta ~ N(0, R), from a seeded
/// deterministic generator.
pub fn simulate_measurements(model: &MeasurementModel, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut z = model.true_values();
    for i in 0..z.len() {
        let eta: f64 = StandardNormal.sample(&mut rng);
        z[i] += libm::sqrt(model.r_diag[i]) * eta;
    }
    z
}

/// Assignment of every bus to exactly one of K >= 2 areas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    areas: Vec<Vec<usize>>,
}

impl Partition {
    /// Validates disjointness and K >= 2. Coverage of a concrete network is
    /// checked when views are derived.
    pub fn new(areas: Vec<Vec<usize>>) -> Result<Self> {
        if areas.len() < 2 {
            return Err(Error::InvalidPartition(format!(
                "need K >= 2 areas, got {}",
                areas.len()
            )));
        }
        let mut seen = BTreeMap::new();
        for (k, area) in areas.iter().enumerate() {
            if area.is_empty() {
                return Err(Error::InvalidPartition(format!("area {k} is empty")));
            }
            for &b in area {
                if let Some(prev) = seen.insert(b, k) {
                    return Err(Error::InvalidPartition(format!(
                        "bus {b} appears in areas {prev} and {k}"
                    )));
                }
            }
        }
        Ok(Partition { areas })
    }

    pub fn areas(&self) -> &[Vec<usize>] {
        &self.areas
    }

    pub fn area_count(&self) -> usize {
        self.areas.len()
    }

    /// Area index owning a bus.
    pub fn area_of(&self, bus: usize) -> Option<usize> {
        self.areas.iter().position(|a| a.contains(&bus))
    }

    /// Checks that the partition covers exactly the buses of `network`.
    pub fn validate_for(&self, network: &Network) -> Result<()> {
        let mut count = 0usize;
        for area in &self.areas {
            for &b in area {
                if network.bus_position(b).is_none() {
                    return Err(Error::InvalidPartition(format!(
                        "bus {b} is not in the network"
                    )));
                }
                count += 1;
            }
        }
        if count != network.bus_count() {
            return Err(Error::InvalidPartition(format!(
                "partition covers {count} of {} buses",
                network.bus_count()
            )));
        }
        Ok(())
    }
}

/// An area's local view of the estimation problem.
#[derive(Debug, Clone)]
pub struct AreaView {
    /// Area index in the partition.
    pub area: usize,
    /// Non-slack bus ids owned by this area, in state order.
    pub owned_states: Vec<usize>,
    /// External non-slack bus ids appearing in this area's measurement rows.
    pub replicated_states: Vec<usize>,
    /// Indices into the measurement list assigned to this area.
    pub local_measurements: Vec<usize>,
    /// Branch list indices of branches crossing this area's boundary.
    pub tie_lines: Vec<usize>,
}

/// Splits the measurement model into per-area views.
///
/// A flow on a tie line belongs to the area owning the from-bus; an injection
/// belongs to the area owning its bus. Replicated states are all external
/// buses with nonzero coefficients in the area's assigned rows.
pub fn make_area_views(
    network: &Network,
    model: &MeasurementModel,
    partition: &Partition,
) -> Result<Vec<AreaView>> {
    partition.validate_for(network)?;
    let k = partition.area_count();
    let area_of_bus: BTreeMap<usize, usize> = partition
        .areas()
        .iter()
        .enumerate()
        .flat_map(|(a, buses)| buses.iter().map(move |&b| (b, a)))
        .collect();

    let mut views: Vec<AreaView> = (0..k)
        .map(|a| AreaView {
            area: a,
            owned_states: partition.areas()[a]
                .iter()
                .copied()
                .filter(|&b| b != network.slack())
                .collect(),
            replicated_states: Vec::new(),
            local_measurements: Vec::new(),
            tie_lines: Vec::new(),
        })
        .collect();

    for (mi, meas) in model.measurements().iter().enumerate() {
        let owner = match meas.kind {
            MeasurementKind::Flow(bi) => area_of_bus[&network.branches()[bi].from],
            MeasurementKind::Injection(bus) => area_of_bus[&bus],
        };
        views[owner].local_measurements.push(mi);
    }

    for (bi, br) in network.branches().iter().enumerate() {
        let (af, at) = (area_of_bus[&br.from], area_of_bus[&br.to]);
        if af != at {
            views[af].tie_lines.push(bi);
            views[at].tie_lines.push(bi);
        }
    }

    for view in &mut views {
        let owned: alloc::collections::BTreeSet<usize> =
            view.owned_states.iter().copied().collect();
        let mut replicated = alloc::collections::BTreeSet::new();
        for &mi in &view.local_measurements {
            let row = model.f().row(mi);
            for (si, &coeff) in row.iter().enumerate() {
                if coeff != 0.0 {
                    let bus = network.state_ids()[si];
                    if !owned.contains(&bus) {
                        replicated.insert(bus);
                    }
                }
            }
        }
        view.replicated_states = replicated.into_iter().collect();
    }

    Ok(views)
}
