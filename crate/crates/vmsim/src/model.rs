//! Domain types shared by all other modules: hosts, VMs, policies, cost
//! parameters, and the default fleet / instance catalog constructors.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::error::SimError;

/// Length of one simulation step in seconds (trace sampling interval).
pub const STEP_SECONDS: f64 = 300.0;

/// Utilization-history ring capacity: one hour of 5-minute steps.
pub const HISTORY_CAPACITY: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HostId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VmId(pub u32);

impl fmt::Display for HostId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "h{}", self.0)
    }
}

impl fmt::Display for VmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "vm{}", self.0)
    }
}

/// Host power draw in watts at load levels 0%, 10%, ..., 100%.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerCurve {
    anchors: [f64; 11],
}

impl PowerCurve {
    pub fn new(anchors: [f64; 11]) -> Result<Self, SimError> {
        if anchors.iter().any(|&w| w.is_nan() || w <= 0.0) {
            return Err(SimError::InvalidArgument(
                "power anchors must all be positive".into(),
            ));
        }
        if anchors.windows(2).any(|w| w[1] < w[0]) {
            return Err(SimError::InvalidArgument(
                "power anchors must be non-decreasing in load".into(),
            ));
        }
        Ok(Self { anchors })
    }

    pub fn anchors(&self) -> &[f64; 11] {
        &self.anchors
    }
}

/// HP ProLiant ML110 G4: 0% to 100% load in 10% increments, watts.
pub const G4_POWER: [f64; 11] = [
    86.0, 89.4, 92.6, 96.0, 99.5, 102.0, 106.0, 108.0, 112.0, 114.0, 117.0,
];

/// HP ProLiant ML110 G5: 0% to 100% load in 10% increments, watts.
pub const G5_POWER: [f64; 11] = [
    93.7, 97.0, 101.0, 105.0, 110.0, 116.0, 121.0, 125.0, 129.0, 133.0, 135.0,
];

pub const G4_MIPS_PER_CORE: f64 = 1860.0;
pub const G5_MIPS_PER_CORE: f64 = 2660.0;
pub const HOST_CORES: u32 = 2;
pub const HOST_RAM_MIB: f64 = 4096.0;
pub const HOST_BANDWIDTH_MBPS: f64 = 1000.0;

#[derive(Debug, Clone)]
pub struct HostSpec {
    pub id: HostId,
    pub cpu_cores: u32,
    pub mips_per_core: f64,
    pub ram_capacity: f64,
    pub net_bandwidth: f64,
    pub power_curve: PowerCurve,
}

impl HostSpec {
    /// Total CPU capacity of the host in MIPS.
    pub fn total_mips(&self) -> f64 {
        self.cpu_cores as f64 * self.mips_per_core
    }

    pub fn g4(id: HostId) -> Self {
        Self {
            id,
            cpu_cores: HOST_CORES,
            mips_per_core: G4_MIPS_PER_CORE,
            ram_capacity: HOST_RAM_MIB,
            net_bandwidth: HOST_BANDWIDTH_MBPS,
            power_curve: PowerCurve::new(G4_POWER).expect("static curve"),
        }
    }

    pub fn g5(id: HostId) -> Self {
        Self {
            id,
            cpu_cores: HOST_CORES,
            mips_per_core: G5_MIPS_PER_CORE,
            ram_capacity: HOST_RAM_MIB,
            net_bandwidth: HOST_BANDWIDTH_MBPS,
            power_curve: PowerCurve::new(G5_POWER).expect("static curve"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HostMode {
    Active,
    Sleeping,
}

#[derive(Debug, Clone)]
pub struct HostState {
    pub spec: HostSpec,
    pub mode: HostMode,
    pub resident_vms: Vec<VmId>,
    pub utilization_history: VecDeque<f64>,
}

impl HostState {
    pub fn new(spec: HostSpec) -> Self {
        Self {
            spec,
            mode: HostMode::Active,
            resident_vms: Vec::new(),
            utilization_history: VecDeque::with_capacity(HISTORY_CAPACITY),
        }
    }

    pub fn is_active(&self) -> bool {
        self.mode == HostMode::Active
    }

    pub fn push_history(&mut self, utilization: f64) {
        if self.utilization_history.len() == HISTORY_CAPACITY {
            self.utilization_history.pop_front();
        }
        self.utilization_history.push_back(utilization);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VmSpec {
    pub id: VmId,
    pub mips: f64,
    pub ram: f64,
}

#[derive(Debug, Clone)]
pub struct VmState {
    pub spec: VmSpec,
    pub host: Option<HostId>,
    pub cpu_demand: f64,
    pub ram_used: f64,
    pub in_migration: bool,
    pub migration_remaining: f64,
}

impl VmState {
    pub fn new(spec: VmSpec) -> Self {
        let ram = spec.ram;
        Self {
            spec,
            host: None,
            cpu_demand: 0.0,
            ram_used: ram,
            in_migration: false,
            migration_remaining: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Detection {
    Thr,
    Iqr,
    Mad,
    Lr,
    Lrr,
}

impl fmt::Display for Detection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Detection::Thr => "THR",
            Detection::Iqr => "IQR",
            Detection::Mad => "MAD",
            Detection::Lr => "LR",
            Detection::Lrr => "LRR",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Selection {
    MxMt,
    Mmt,
    Rc,
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Selection::MxMt => "MxMT",
            Selection::Mmt => "MMT",
            Selection::Rc => "RC",
        };
        f.write_str(s)
    }
}

/// A detection-selection-safety triple, e.g. "THR-MxMT-0.8".
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyConfig {
    pub detection: Detection,
    pub selection: Selection,
    pub safety: f64,
}

impl PolicyConfig {
    pub fn new(detection: Detection, selection: Selection, safety: f64) -> Result<Self, SimError> {
        if safety.is_nan() || safety <= 0.0 {
            return Err(SimError::InvalidArgument(
                "policy safety parameter must be > 0".into(),
            ));
        }
        Ok(Self {
            detection,
            selection,
            safety,
        })
    }
}

impl fmt::Display for PolicyConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.safety.fract() == 0.0 {
            write!(f, "{}-{}-{:.1}", self.detection, self.selection, self.safety)
        } else {
            write!(f, "{}-{}-{}", self.detection, self.selection, self.safety)
        }
    }
}

impl FromStr for PolicyConfig {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        let parts: Vec<&str> = s.splitn(3, '-').collect();
        if parts.len() != 3 {
            return Err(SimError::InvalidArgument(format!(
                "policy '{s}' is not of the form DETECTION-SELECTION-SAFETY"
            )));
        }
        let detection = match parts[0].to_ascii_uppercase().as_str() {
            "THR" => Detection::Thr,
            "IQR" => Detection::Iqr,
            "MAD" => Detection::Mad,
            "LR" => Detection::Lr,
            "LRR" => Detection::Lrr,
            other => {
                return Err(SimError::InvalidArgument(format!(
                    "unknown detection policy '{other}'"
                )))
            }
        };
        let selection = match parts[1].to_ascii_uppercase().as_str() {
            "MXMT" => Selection::MxMt,
            "MMT" => Selection::Mmt,
            "RC" => Selection::Rc,
            other => {
                return Err(SimError::InvalidArgument(format!(
                    "unknown selection policy '{other}'"
                )))
            }
        };
        let safety: f64 = parts[2]
            .parse()
            .map_err(|_| SimError::InvalidArgument(format!("bad safety value '{}'", parts[2])))?;
        PolicyConfig::new(detection, selection, safety)
    }
}

/// Analytical cost-model parameters: power cost, violation cost, migration time.
#[derive(Debug, Clone, Copy)]
pub struct CostParams {
    pub c_p: f64,
    pub c_v: f64,
    pub t_mig: f64,
}

impl CostParams {
    pub fn new(c_p: f64, c_v: f64, t_mig: f64) -> Result<Self, SimError> {
        if [c_p, c_v, t_mig].iter().any(|&v| v.is_nan() || v <= 0.0) {
            return Err(SimError::InvalidArgument(
                "cost parameters must be positive".into(),
            ));
        }
        Ok(Self { c_p, c_v, t_mig })
    }

    /// Violation-to-power cost ratio s = c_v / c_p.
    pub fn s(&self) -> f64 {
        self.c_v / self.c_p
    }
}

/// Builds the default heterogeneous fleet: half G4, half G5, all active and
/// empty, ids in ascending order. `_seed` is accepted for signature stability;
/// the layout is fully deterministic.
pub fn make_default_datacenter(n_hosts: usize, _seed: u64) -> Result<Vec<HostState>, SimError> {
    if n_hosts < 2 || !n_hosts.is_multiple_of(2) {
        return Err(SimError::InvalidArgument(format!(
            "host count must be even and >= 2, got {n_hosts}"
        )));
    }
    let half = n_hosts / 2;
    let mut hosts = Vec::with_capacity(n_hosts);
    for i in 0..n_hosts {
        let id = HostId(i as u32);
        let spec = if i < half {
            HostSpec::g4(id)
        } else {
            HostSpec::g5(id)
        };
        hosts.push(HostState::new(spec));
    }
    Ok(hosts)
}

/// The four Amazon-EC2-style instance types: (MIPS, RAM MiB).
pub fn instance_catalog() -> Vec<VmSpec> {
    vec![
        VmSpec { id: VmId(0), mips: 2500.0, ram: 870.0 },
        VmSpec { id: VmId(1), mips: 2000.0, ram: 3840.0 },
        VmSpec { id: VmId(2), mips: 1000.0, ram: 1740.0 },
        VmSpec { id: VmId(3), mips: 500.0, ram: 613.0 },
    ]
}

/// Draws `n_vms` specs round-robin from the instance catalog with fresh ids.
pub fn vm_fleet(n_vms: usize) -> Vec<VmSpec> {
    let catalog = instance_catalog();
    (0..n_vms)
        .map(|i| {
            let base = &catalog[i % catalog.len()];
            VmSpec {
                id: VmId(i as u32),
                mips: base.mips,
                ram: base.ram,
            }
        })
        .collect()
}
