//! Feeder topology, device fleets, injections, and scenario presets.

use serde::{Deserialize, Serialize};

use conic::ConicError;

#[derive(Debug, thiserror::Error)]
pub enum GridError {
    #[error("topology error: {0}")]
    Topology(String),
    #[error("device error: {0}")]
    Device(String),
    #[error("injection error: {0}")]
    Injection(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("solver: {0}")]
    Conic(#[from] ConicError),
    #[error("solve did not reach optimality: {0:?}")]
    NotOptimal(conic::SolveStatus),
}

// ---------------------------------------------------------------------------
// JSON schema
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub schema_version: u32,
    pub name: String,
    pub base: BaseFile,
    /// Slack bus id.
    pub slack: usize,
    pub slack_voltage_pu: f64,
    pub buses: Vec<BusFile>,
    pub branches: Vec<BranchFile>,
    pub devices: DevicesFile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseFile {
    pub mva: f64,
    pub kv: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusFile {
    pub id: usize,
    pub p_load_kw: f64,
    pub q_load_kvar: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchFile {
    pub from: usize,
    pub to: usize,
    pub r_ohm: f64,
    pub x_ohm: f64,
    pub i_max_a: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DevicesFile {
    #[serde(default)]
    pub pv: Vec<PvSite>,
    #[serde(default)]
    pub svc: Vec<SvcUnit>,
    #[serde(default)]
    pub dg: Vec<DgUnit>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PvSite {
    pub bus: usize,
    pub kw: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvcUnit {
    pub bus: usize,
    pub kvar_min: f64,
    pub kvar_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgUnit {
    pub bus: usize,
    pub kva: f64,
}

const IEEE33_JSON: &str = include_str!("../assets/ieee33.json");

/// The embedded 33-bus feeder description (Baran-Wu data, six PV sites,
/// five SVCs, and inverter DG ratings at the PV buses).
pub fn ieee33_file() -> NetworkFile {
    serde_json::from_str(IEEE33_JSON).expect("embedded ieee33 asset parses")
}

pub fn ieee33_raw_json() -> &'static str {
    IEEE33_JSON
}

/// A three-bus feeder fixture (slack - 2 - 3) used by small end-to-end
/// gradient checks: one PV at bus 3, one SVC at bus 2.
pub fn three_bus_file() -> NetworkFile {
    serde_json::from_value(serde_json::json!({
        "schema_version": 1,
        "name": "three-bus",
        "base": {"mva": 1.0, "kv": 12.66},
        "slack": 1,
        "slack_voltage_pu": 1.0,
        "buses": [
            {"id": 1, "p_load_kw": 0.0, "q_load_kvar": 0.0},
            {"id": 2, "p_load_kw": 150.0, "q_load_kvar": 50.0},
            {"id": 3, "p_load_kw": 100.0, "q_load_kvar": 30.0}
        ],
        "branches": [
            {"from": 1, "to": 2, "r_ohm": 3.0, "x_ohm": 2.4, "i_max_a": 200.0},
            {"from": 2, "to": 3, "r_ohm": 2.5, "x_ohm": 2.0, "i_max_a": 200.0}
        ],
        "devices": {
            "pv": [{"bus": 3, "kw": 300.0}],
            "svc": [{"bus": 2, "kvar_min": -200.0, "kvar_max": 200.0}],
            "dg": [{"bus": 3, "kva": 330.0}]
        }
    }))
    .expect("three-bus fixture parses")
}

// ---------------------------------------------------------------------------
// Scenario presets
// ---------------------------------------------------------------------------

/// Operating scenario: the economic preset widens the voltage box to
/// [0.94, 1.06] p.u. and doubles line impedance so losses dominate; the
/// safety preset keeps nominal impedance with a [0.95, 1.05] p.u. box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Economic,
    Safety,
}

impl Scenario {
    pub fn voltage_limits(self) -> (f64, f64) {
        match self {
            Scenario::Economic => (0.94, 1.06),
            Scenario::Safety => (0.95, 1.05),
        }
    }

    pub fn impedance_multiplier(self) -> f64 {
        match self {
            Scenario::Economic => 2.0,
            Scenario::Safety => 1.0,
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = GridError;
    fn from_str(s: &str) -> Result<Self, GridError> {
        match s {
            "economic" => Ok(Scenario::Economic),
            "safety" => Ok(Scenario::Safety),
            other => Err(GridError::Schema(format!(
                "unknown scenario '{other}' (expected one of: economic, safety)"
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// In-memory network (per-unit, slack reindexed to 0)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Bus {
    pub id: usize,
    pub p_load_kw: f64,
    pub q_load_kvar: f64,
}

#[derive(Debug, Clone)]
pub struct Branch {
    /// Parent bus index (towards the slack).
    pub from: usize,
    /// Child bus index.
    pub to: usize,
    pub r_pu: f64,
    pub x_pu: f64,
    /// Upper bound on squared current, per unit.
    pub l_max_pu: f64,
}

#[derive(Debug, Clone)]
pub struct Network {
    /// Buses with the slack first; `buses[k].id` maps back to file ids.
    pub buses: Vec<Bus>,
    /// Branches oriented from parent to child, in breadth-first order.
    pub branches: Vec<Branch>,
    pub v_min: f64,
    pub v_max: f64,
    pub slack_voltage_pu: f64,
    pub base_mva: f64,
    pub base_kv: f64,
}

impl Network {
    /// Builds the per-unit network for a scenario: ohmic data over the base
    /// impedance, the scenario's impedance multiplier and voltage box, and
    /// branches re-oriented away from the slack bus.
    pub fn from_file(file: &NetworkFile, scenario: Scenario) -> Result<Self, GridError> {
        let (v_min, v_max) = scenario.voltage_limits();
        Self::from_file_with_box(file, v_min, v_max, scenario.impedance_multiplier())
    }

    pub fn from_file_with_box(
        file: &NetworkFile,
        v_min: f64,
        v_max: f64,
        impedance_multiplier: f64,
    ) -> Result<Self, GridError> {
        if file.schema_version != 1 {
            return Err(GridError::Schema(format!(
                "unsupported network schema version {}",
                file.schema_version
            )));
        }
        if v_min >= v_max {
            return Err(GridError::Schema(format!(
                "voltage limits must satisfy v_min < v_max, got [{v_min}, {v_max}]"
            )));
        }
        let nb = file.buses.len();
        if file.branches.len() + 1 != nb {
            return Err(GridError::Topology(format!(
                "{} branches cannot form a tree over {} buses",
                file.branches.len(),
                nb
            )));
        }
        // reindex: slack first, remaining buses in file order
        let mut order: Vec<usize> = Vec::with_capacity(nb);
        let slack_pos = file
            .buses
            .iter()
            .position(|b| b.id == file.slack)
            .ok_or_else(|| GridError::Topology(format!("slack bus {} not found", file.slack)))?;
        order.push(slack_pos);
        order.extend((0..nb).filter(|&i| i != slack_pos));
        let mut index_of_id = std::collections::HashMap::new();
        let buses: Vec<Bus> = order
            .iter()
            .enumerate()
            .map(|(k, &i)| {
                let b = &file.buses[i];
                index_of_id.insert(b.id, k);
                Bus {
                    id: b.id,
                    p_load_kw: b.p_load_kw,
                    q_load_kvar: b.q_load_kvar,
                }
            })
            .collect();
        if index_of_id.len() != nb {
            return Err(GridError::Topology("duplicate bus ids".into()));
        }

        let z_base = file.base.kv * file.base.kv / file.base.mva;
        let i_base_a = file.base.mva * 1e6 / (3f64.sqrt() * file.base.kv * 1e3);
        let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nb]; // (neighbor, branch idx)
        let mut raw: Vec<(usize, usize, f64, f64, f64)> = Vec::with_capacity(file.branches.len());
        for (bi, br) in file.branches.iter().enumerate() {
            let f = *index_of_id
                .get(&br.from)
                .ok_or_else(|| GridError::Topology(format!("branch endpoint {} unknown", br.from)))?;
            let t = *index_of_id
                .get(&br.to)
                .ok_or_else(|| GridError::Topology(format!("branch endpoint {} unknown", br.to)))?;
            if !(br.r_ohm > 0.0 && br.x_ohm > 0.0) {
                return Err(GridError::Topology(format!(
                    "branch {}-{} must have positive impedance",
                    br.from, br.to
                )));
            }
            let r = br.r_ohm * impedance_multiplier / z_base;
            let x = br.x_ohm * impedance_multiplier / z_base;
            let l_max = (br.i_max_a / i_base_a).powi(2);
            adjacency[f].push((t, bi));
            adjacency[t].push((f, bi));
            raw.push((f, t, r, x, l_max));
        }

        // breadth-first orientation away from the slack; also the tree check
        let mut visited = vec![false; nb];
        visited[0] = true;
        let mut queue = std::collections::VecDeque::from([0usize]);
        let mut branches = Vec::with_capacity(raw.len());
        while let Some(u) = queue.pop_front() {
            for &(v, bi) in &adjacency[u] {
                if visited[v] {
                    continue;
                }
                visited[v] = true;
                let (_, _, r, x, l_max) = raw[bi];
                branches.push(Branch {
                    from: u,
                    to: v,
                    r_pu: r,
                    x_pu: x,
                    l_max_pu: l_max,
                });
                queue.push_back(v);
            }
        }
        if branches.len() != raw.len() || visited.iter().any(|&v| !v) {
            return Err(GridError::Topology(
                "network is not a tree rooted at the slack bus".into(),
            ));
        }
        Ok(Network {
            buses,
            branches,
            v_min,
            v_max,
            slack_voltage_pu: file.slack_voltage_pu,
            base_mva: file.base.mva,
            base_kv: file.base.kv,
        })
    }

    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn base_kw(&self) -> f64 {
        self.base_mva * 1e3
    }

    pub fn v_min2(&self) -> f64 {
        self.v_min * self.v_min
    }

    pub fn v_max2(&self) -> f64 {
        self.v_max * self.v_max
    }

    pub fn slack_v2(&self) -> f64 {
        self.slack_voltage_pu * self.slack_voltage_pu
    }

    pub fn index_of_id(&self, id: usize) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    /// Nominal per-bus load shares (fraction of total system load), used to
    /// disaggregate a system-level load series.
    pub fn load_shares(&self) -> Vec<f64> {
        let total: f64 = self.buses.iter().map(|b| b.p_load_kw).sum();
        self.buses.iter().map(|b| b.p_load_kw / total).collect()
    }
}

/// PV, SVC, and DG placements, with bus indices resolved against a network.
#[derive(Debug, Clone)]
pub struct DeviceSet {
    pub pv: Vec<(usize, f64)>,
    pub svc: Vec<(usize, f64, f64)>,
    pub dg: Vec<(usize, f64)>,
}

impl DeviceSet {
    pub fn from_file(devices: &DevicesFile, net: &Network) -> Result<Self, GridError> {
        let resolve = |id: usize| {
            net.index_of_id(id)
                .ok_or_else(|| GridError::Device(format!("device bus {id} not in network")))
        };
        let pv = devices
            .pv
            .iter()
            .map(|p| {
                if p.kw <= 0.0 {
                    return Err(GridError::Device(format!("pv at bus {} needs kw > 0", p.bus)));
                }
                Ok((resolve(p.bus)?, p.kw))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let svc = devices
            .svc
            .iter()
            .map(|s| {
                if s.kvar_min > s.kvar_max {
                    return Err(GridError::Device(format!(
                        "svc at bus {} has kvar_min > kvar_max",
                        s.bus
                    )));
                }
                Ok((resolve(s.bus)?, s.kvar_min, s.kvar_max))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let dg = devices
            .dg
            .iter()
            .map(|d| {
                if d.kva <= 0.0 {
                    return Err(GridError::Device(format!("dg at bus {} needs kva > 0", d.bus)));
                }
                Ok((resolve(d.bus)?, d.kva))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DeviceSet { pv, svc, dg })
    }
}

/// Injection series in physical units: PV output per site, load per bus.
#[derive(Debug, Clone)]
pub struct Injections {
    /// kW, indexed [site][t].
    pub p_pv: Vec<Vec<f64>>,
    /// kW, indexed [bus][t].
    pub p_d: Vec<Vec<f64>>,
    /// kvar, indexed [bus][t].
    pub q_d: Vec<Vec<f64>>,
    pub horizon: usize,
}

impl Injections {
    pub fn new(
        p_pv: Vec<Vec<f64>>,
        p_d: Vec<Vec<f64>>,
        q_d: Vec<Vec<f64>>,
        horizon: usize,
    ) -> Result<Self, GridError> {
        for series in p_pv.iter().chain(p_d.iter()).chain(q_d.iter()) {
            if series.len() != horizon {
                return Err(GridError::Injection(format!(
                    "series length {} != horizon {horizon}",
                    series.len()
                )));
            }
        }
        if p_pv.iter().flatten().any(|&v| v < 0.0) {
            return Err(GridError::Injection("negative PV output".into()));
        }
        Ok(Self {
            p_pv,
            p_d,
            q_d,
            horizon,
        })
    }

    /// All-zero injections, handy for tests and the zero-flow fixed point.
    pub fn zeros(n_pv: usize, n_bus: usize, horizon: usize) -> Self {
        Self {
            p_pv: vec![vec![0.0; horizon]; n_pv],
            p_d: vec![vec![0.0; horizon]; n_bus],
            q_d: vec![vec![0.0; horizon]; n_bus],
            horizon,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ieee33_asset_loads_and_validates() {
        let file = ieee33_file();
        assert_eq!(file.buses.len(), 33);
        assert_eq!(file.branches.len(), 32);
        let net = Network::from_file(&file, Scenario::Safety).unwrap();
        assert_eq!(net.bus_count(), 33);
        assert_eq!(net.branch_count(), 32);
        assert_eq!(net.buses[0].id, 1);
        let total_load: f64 = net.buses.iter().map(|b| b.p_load_kw).sum();
        assert!((total_load - 3715.0).abs() < 1e-9);
        // branch 1-2: 0.0922 ohm over 16.0276 ohm base
        let z_base = 12.66 * 12.66 / 10.0;
        assert!((net.branches[0].r_pu - 0.0922 / z_base).abs() < 1e-12);
    }

    #[test]
    fn economic_scenario_doubles_impedance_and_widens_box() {
        let file = ieee33_file();
        let safety = Network::from_file(&file, Scenario::Safety).unwrap();
        let econ = Network::from_file(&file, Scenario::Economic).unwrap();
        assert!((econ.branches[0].r_pu / safety.branches[0].r_pu - 2.0).abs() < 1e-12);
        assert_eq!(econ.v_min, 0.94);
        assert_eq!(safety.v_min, 0.95);
    }

    #[test]
    fn ieee33_asset_checksum_pinned() {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(ieee33_raw_json().as_bytes());
        assert_eq!(
            format!("{digest:x}"),
            "bf29ab670187858a05a587807e8583974531ec5139b49ff7fe5de5cc69ef7dc0",
            "ieee33.json changed; update the pinned checksum deliberately"
        );
    }

    #[test]
    fn non_tree_topology_is_rejected() {
        let mut file = three_bus_file();
        // duplicate an edge to make a cycle (3 branches over 3 buses)
        file.branches.push(file.branches[0].clone());
        assert!(matches!(
            Network::from_file(&file, Scenario::Safety),
            Err(GridError::Topology(_))
        ));
    }

    #[test]
    fn disconnected_topology_is_rejected() {
        let mut file = three_bus_file();
        // self-loop replaces the second branch: bus 3 unreachable
        file.branches[1].from = 3;
        file.branches[1].to = 3;
        let err = Network::from_file(&file, Scenario::Safety);
        assert!(err.is_err());
    }

    #[test]
    fn devices_resolve_and_validate() {
        let file = ieee33_file();
        let net = Network::from_file(&file, Scenario::Safety).unwrap();
        let dev = DeviceSet::from_file(&file.devices, &net).unwrap();
        assert_eq!(dev.pv.len(), 6);
        assert_eq!(dev.svc.len(), 5);
        assert_eq!(dev.dg.len(), 6);
        // PV1 is at bus id 4 with 600 kW
        assert_eq!(net.buses[dev.pv[0].0].id, 4);
        assert_eq!(dev.pv[0].1, 600.0);

        let mut bad = file.devices.clone();
        bad.svc[0].kvar_min = 1.0;
        bad.svc[0].kvar_max = -1.0;
        assert!(DeviceSet::from_file(&bad, &net).is_err());
    }

    #[test]
    fn scenario_parsing() {
        assert_eq!("economic".parse::<Scenario>().unwrap(), Scenario::Economic);
        assert!("bogus".parse::<Scenario>().is_err());
    }

    #[test]
    fn load_shares_sum_to_one() {
        let net = Network::from_file(&ieee33_file(), Scenario::Safety).unwrap();
        let shares = net.load_shares();
        assert!((shares.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(shares[0], 0.0); // slack carries no load in this feeder
    }
}
