//! Grid data model, network file ingestion and per-unit conversion.
//!
//! A network file is a TOML document with three sections:
//!
//! ```toml
//! [bases]
//! power_mva = 5.0
//! voltage_kv = 2.4
//!
//! [[buses]]
//! id = "650"
//! kind = "slack"
//! shunt_g = 0.0
//! shunt_b = 0.0
//!
//! [[branches]]
//! from = "650"
//! to = "632"
//! kind = "line"
//! g = 1.0
//! b = -10.0
//! ratio_re = 1.0
//! ratio_im = 0.0
//! ```
//!
//! Branch and shunt admittances are already in per-unit. Bus ordering is fixed
//! at parse time: the slack bus first, then load buses in file order.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("duplicate bus id `{0}`")]
    DuplicateBus(String),
    #[error("branch {branch} references unknown bus `{bus}`")]
    DanglingEndpoint { branch: usize, bus: String },
    #[error("branch {branch} ({from} -> {to}) has non-positive conductance {g}")]
    NonPositiveConductance {
        branch: usize,
        from: String,
        to: String,
        g: f64,
    },
    #[error("bus `{bus}` has negative shunt conductance {g}")]
    NegativeShuntConductance { bus: String, g: f64 },
    #[error("expected exactly one slack bus, found {0}")]
    SlackCount(usize),
    #[error("bus `{0}` is not connected to the slack bus")]
    Disconnected(String),
    #[error("branch {branch} connects bus `{bus}` to itself")]
    SelfLoop { branch: usize, bus: String },
    #[error("branch {0} has a zero transformer ratio")]
    ZeroRatio(usize),
    #[error("branch {0} is a line but its ratio is not exactly 1")]
    LineRatio(usize),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("base must be positive, got {0}")]
    NonPositiveBase(f64),
    #[error("network has no load buses")]
    NoLoadBuses,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Slack,
    Load,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchKind {
    Line,
    Transformer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: String,
    pub kind: BusKind,
    /// Per-unit shunt admittance to ground.
    pub shunt: Complex64,
}

impl Bus {
    pub fn slack(id: impl Into<String>) -> Self {
        Bus {
            id: id.into(),
            kind: BusKind::Slack,
            shunt: Complex64::new(0.0, 0.0),
        }
    }

    pub fn load(id: impl Into<String>) -> Self {
        Bus {
            id: id.into(),
            kind: BusKind::Load,
            shunt: Complex64::new(0.0, 0.0),
        }
    }

    pub fn with_shunt(mut self, shunt: Complex64) -> Self {
        self.shunt = shunt;
        self
    }
}

/// A line or a two-winding transformer.
///
/// For transformers `from` is the primary side, `admittance` is the series
/// admittance referred to the primary and `ratio` is the complex ratio K.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: String,
    pub to: String,
    pub kind: BranchKind,
    pub admittance: Complex64,
    pub ratio: Complex64,
}

impl Branch {
    pub fn line(from: impl Into<String>, to: impl Into<String>, admittance: Complex64) -> Self {
        Branch {
            from: from.into(),
            to: to.into(),
            kind: BranchKind::Line,
            admittance,
            ratio: Complex64::new(1.0, 0.0),
        }
    }

    pub fn transformer(
        primary: impl Into<String>,
        secondary: impl Into<String>,
        admittance: Complex64,
        ratio: Complex64,
    ) -> Self {
        Branch {
            from: primary.into(),
            to: secondary.into(),
            kind: BranchKind::Transformer,
            admittance,
            ratio,
        }
    }

    /// The same transformer declared from its secondary side: admittance
    /// `y|K|^-2` and ratio `1/K`. Lines are returned with swapped endpoints.
    pub fn reversed(&self) -> Branch {
        match self.kind {
            BranchKind::Line => Branch {
                from: self.to.clone(),
                to: self.from.clone(),
                ..self.clone()
            },
            BranchKind::Transformer => Branch {
                from: self.to.clone(),
                to: self.from.clone(),
                kind: BranchKind::Transformer,
                admittance: self.admittance / self.ratio.norm_sqr(),
                ratio: self.ratio.inv(),
            },
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            BranchKind::Line => "line",
            BranchKind::Transformer => "transformer",
        };
        write!(f, "{} {} -> {}", kind, self.from, self.to)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bases {
    pub power_mva: f64,
    pub voltage_kv: f64,
}

/// Why the admittance structure could fail to yield an invertible `Y_LL`.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum InvertibilityDiagnostic {
    #[error("branch {index} ({branch}) has conductance {g} <= 0")]
    BranchConductance {
        index: usize,
        branch: String,
        g: f64,
    },
    #[error("bus `{bus}` has shunt conductance {g} < 0")]
    ShuntConductance { bus: String, g: f64 },
    #[error("bus `{0}` cannot reach the slack bus")]
    Unreachable(String),
    #[error("no slack bus")]
    NoSlack,
}

/// Structural invertibility check for `Y_LL`.
///
/// `Re(x^H Y_LL x)` is a sum of nonnegative weighted squares. It vanishes only
/// for `x = 0` when every branch has positive conductance, every shunt has
/// nonnegative conductance and every bus reaches the slack bus.
/// Returns the first offending element.
pub fn structural_invertibility_check(
    buses: &[Bus],
    branches: &[Branch],
) -> Result<(), InvertibilityDiagnostic> {
    for (index, br) in branches.iter().enumerate() {
        if !(br.admittance.re > 0.0) {
            return Err(InvertibilityDiagnostic::BranchConductance {
                index,
                branch: br.to_string(),
                g: br.admittance.re,
            });
        }
    }
    for bus in buses {
        if !(bus.shunt.re >= 0.0) {
            return Err(InvertibilityDiagnostic::ShuntConductance {
                bus: bus.id.clone(),
                g: bus.shunt.re,
            });
        }
    }
    let index: HashMap<&str, usize> = buses
        .iter()
        .enumerate()
        .map(|(i, b)| (b.id.as_str(), i))
        .collect();
    let slack = buses
        .iter()
        .position(|b| b.kind == BusKind::Slack)
        .ok_or(InvertibilityDiagnostic::NoSlack)?;
    let mut adjacency = vec![Vec::new(); buses.len()];
    for br in branches {
        if let (Some(&a), Some(&b)) = (index.get(br.from.as_str()), index.get(br.to.as_str())) {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
    }
    let mut seen = vec![false; buses.len()];
    seen[slack] = true;
    let mut queue = VecDeque::from([slack]);
    while let Some(node) = queue.pop_front() {
        for &next in &adjacency[node] {
            if !seen[next] {
                seen[next] = true;
                queue.push_back(next);
            }
        }
    }
    match seen.iter().position(|&s| !s) {
        Some(i) => Err(InvertibilityDiagnostic::Unreachable(buses[i].id.clone())),
        None => Ok(()),
    }
}

/// A validated network snapshot. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkDescription {
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    bases: Bases,
    slack_voltage: Complex64,
    index: HashMap<String, usize>,
}

impl NetworkDescription {
    /// Validates the parts and fixes the bus ordering (slack first, then load
    /// buses in the given order).
    pub fn new(buses: Vec<Bus>, branches: Vec<Branch>, bases: Bases) -> Result<Self, NetworkError> {
        for (what, v) in [
            ("bases.power_mva", bases.power_mva),
            ("bases.voltage_kv", bases.voltage_kv),
        ] {
            if !v.is_finite() {
                return Err(NetworkError::NonFinite(what.to_string()));
            }
        }
        if bases.power_mva <= 0.0 {
            return Err(NetworkError::NonPositiveBase(bases.power_mva));
        }
        if bases.voltage_kv <= 0.0 {
            return Err(NetworkError::NonPositiveBase(bases.voltage_kv));
        }

        let slack_count = buses.iter().filter(|b| b.kind == BusKind::Slack).count();
        if slack_count != 1 {
            return Err(NetworkError::SlackCount(slack_count));
        }
        let mut ordered = Vec::with_capacity(buses.len());
        ordered.extend(buses.iter().filter(|b| b.kind == BusKind::Slack).cloned());
        ordered.extend(buses.iter().filter(|b| b.kind == BusKind::Load).cloned());
        if ordered.len() < 2 {
            return Err(NetworkError::NoLoadBuses);
        }

        let mut index = HashMap::with_capacity(ordered.len());
        for (i, bus) in ordered.iter().enumerate() {
            if !(bus.shunt.re.is_finite() && bus.shunt.im.is_finite()) {
                return Err(NetworkError::NonFinite(format!(
                    "shunt of bus `{}`",
                    bus.id
                )));
            }
            if bus.shunt.re < 0.0 {
                return Err(NetworkError::NegativeShuntConductance {
                    bus: bus.id.clone(),
                    g: bus.shunt.re,
                });
            }
            if index.insert(bus.id.clone(), i).is_some() {
                return Err(NetworkError::DuplicateBus(bus.id.clone()));
            }
        }

        for (k, br) in branches.iter().enumerate() {
            for end in [&br.from, &br.to] {
                if !index.contains_key(end) {
                    return Err(NetworkError::DanglingEndpoint {
                        branch: k,
                        bus: end.clone(),
                    });
                }
            }
            if br.from == br.to {
                return Err(NetworkError::SelfLoop {
                    branch: k,
                    bus: br.from.clone(),
                });
            }
            let finite = [br.admittance.re, br.admittance.im, br.ratio.re, br.ratio.im]
                .iter()
                .all(|v| v.is_finite());
            if !finite {
                return Err(NetworkError::NonFinite(format!("branch {k}")));
            }
            if !(br.admittance.re > 0.0) {
                return Err(NetworkError::NonPositiveConductance {
                    branch: k,
                    from: br.from.clone(),
                    to: br.to.clone(),
                    g: br.admittance.re,
                });
            }
            match br.kind {
                BranchKind::Line if br.ratio != Complex64::new(1.0, 0.0) => {
                    return Err(NetworkError::LineRatio(k))
                }
                BranchKind::Transformer if br.ratio == Complex64::new(0.0, 0.0) => {
                    return Err(NetworkError::ZeroRatio(k))
                }
                _ => {}
            }
        }

        if let Err(InvertibilityDiagnostic::Unreachable(bus)) =
            structural_invertibility_check(&ordered, &branches)
        {
            return Err(NetworkError::Disconnected(bus));
        }

        Ok(NetworkDescription {
            buses: ordered,
            branches,
            bases,
            slack_voltage: Complex64::new(1.0, 0.0),
            index,
        })
    }

    /// Overrides the slack voltage (1 p.u. by default).
    pub fn with_slack_voltage(mut self, v0: Complex64) -> Self {
        self.slack_voltage = v0;
        self
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn bases(&self) -> Bases {
        self.bases
    }

    pub fn slack_voltage(&self) -> Complex64 {
        self.slack_voltage
    }

    pub fn slack(&self) -> &Bus {
        &self.buses[0]
    }

    /// Load buses in index order; position `k` here is entry `k` of every
    /// injection and voltage vector.
    pub fn load_buses(&self) -> &[Bus] {
        &self.buses[1..]
    }

    /// Number of load (non-slack) buses.
    pub fn load_count(&self) -> usize {
        self.buses.len() - 1
    }

    /// Position of a bus in the full ordering (slack = 0).
    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Position of a load bus in the injection/voltage vectors.
    pub fn load_index(&self, id: &str) -> Option<usize> {
        match self.bus_index(id) {
            Some(0) | None => None,
            Some(i) => Some(i - 1),
        }
    }

    pub fn structural_check(&self) -> Result<(), InvertibilityDiagnostic> {
        structural_invertibility_check(&self.buses, &self.branches)
    }

    /// True when the graph is a tree (radial feeder).
    pub fn is_radial(&self) -> bool {
        // connected by construction, so a tree iff |E| = |V| - 1 and no parallel branches
        self.branches.len() + 1 == self.buses.len()
    }

    /// Load-bus positions with exactly one incident branch.
    pub fn leaf_loads(&self) -> Vec<usize> {
        let mut degree = vec![0usize; self.buses.len()];
        for br in &self.branches {
            degree[self.index[&br.from]] += 1;
            degree[self.index[&br.to]] += 1;
        }
        (1..self.buses.len())
            .filter(|&i| degree[i] == 1)
            .map(|i| i - 1)
            .collect()
    }

    /// Serializes into the canonical file form.
    pub fn to_toml(&self) -> String {
        let doc = NetworkFile {
            bases: self.bases,
            buses: self
                .buses
                .iter()
                .map(|b| BusRecord {
                    id: b.id.clone(),
                    kind: b.kind,
                    shunt_g: b.shunt.re,
                    shunt_b: b.shunt.im,
                })
                .collect(),
            branches: self
                .branches
                .iter()
                .map(|br| BranchRecord {
                    from: br.from.clone(),
                    to: br.to.clone(),
                    kind: br.kind,
                    g: br.admittance.re,
                    b: br.admittance.im,
                    ratio_re: br.ratio.re,
                    ratio_im: br.ratio.im,
                })
                .collect(),
        };
        toml::to_string(&doc).expect("network document always serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    bases: Bases,
    buses: Vec<BusRecord>,
    #[serde(default)]
    branches: Vec<BranchRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BusRecord {
    id: String,
    kind: BusKind,
    #[serde(default)]
    shunt_g: f64,
    #[serde(default)]
    shunt_b: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BranchRecord {
    from: String,
    to: String,
    kind: BranchKind,
    g: f64,
    b: f64,
    #[serde(default = "one")]
    ratio_re: f64,
    #[serde(default)]
    ratio_im: f64,
}

fn one() -> f64 {
    1.0
}

/// Parses and validates a network document.
pub fn parse_network(text: &str) -> Result<NetworkDescription, NetworkError> {
    let doc: NetworkFile =
        toml::from_str(text).map_err(|e| NetworkError::Schema(e.message().to_string()))?;
    let buses = doc
        .buses
        .into_iter()
        .map(|b| Bus {
            id: b.id,
            kind: b.kind,
            shunt: Complex64::new(b.shunt_g, b.shunt_b),
        })
        .collect();
    let branches = doc
        .branches
        .into_iter()
        .map(|b| Branch {
            from: b.from,
            to: b.to,
            kind: b.kind,
            admittance: Complex64::new(b.g, b.b),
            ratio: Complex64::new(b.ratio_re, b.ratio_im),
        })
        .collect();
    NetworkDescription::new(buses, branches, doc.bases)
}

/// Converts a power in MW + j Mvar to per-unit on `power_base` MVA.
pub fn to_per_unit(power: Complex64, power_base: f64) -> Result<Complex64, NetworkError> {
    if !(power_base > 0.0) {
        return Err(NetworkError::NonPositiveBase(power_base));
    }
    Ok(power / power_base)
}

/// Complex injections at the load buses, per-unit, in network load order.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectionVector(pub Vec<Complex64>);

impl InjectionVector {
    pub fn zeros(n: usize) -> Self {
        InjectionVector(vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Measured,
    #[default]
    Solved,
}

/// A known load-flow solution pair `(v_hat, s_hat)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub s: InjectionVector,
    pub v: Vec<Complex64>,
    pub provenance: Provenance,
}

#[derive(Debug, Deserialize)]
struct InjectionFile {
    #[serde(default)]
    injections: Vec<InjectionRecord>,
}

#[derive(Debug, Deserialize)]
struct InjectionRecord {
    bus: String,
    #[serde(default)]
    p_mw: f64,
    #[serde(default)]
    q_mvar: f64,
}

#[derive(Debug, Deserialize)]
struct OperatingPointFile {
    #[serde(default)]
    provenance: Provenance,
    buses: Vec<OperatingPointRecord>,
}

#[derive(Debug, Deserialize)]
struct OperatingPointRecord {
    id: String,
    #[serde(default)]
    p_mw: f64,
    #[serde(default)]
    q_mvar: f64,
    v_re: f64,
    v_im: f64,
}

fn load_slot(net: &NetworkDescription, id: &str) -> Result<usize, NetworkError> {
    match net.bus_index(id) {
        None => Err(NetworkError::Schema(format!("unknown bus `{id}`"))),
        Some(0) => Err(NetworkError::Schema(format!("bus `{id}` is the slack bus"))),
        Some(i) => Ok(i - 1),
    }
}

/// Parses an injection document (`[[injections]] bus, p_mw, q_mvar`).
/// Buses not listed inject zero; repeated entries accumulate.
pub fn parse_injections(
    text: &str,
    net: &NetworkDescription,
) -> Result<InjectionVector, NetworkError> {
    let doc: InjectionFile =
        toml::from_str(text).map_err(|e| NetworkError::Schema(e.message().to_string()))?;
    let mut s = InjectionVector::zeros(net.load_count());
    for rec in doc.injections {
        let k = load_slot(net, &rec.bus)?;
        let pu = to_per_unit(Complex64::new(rec.p_mw, rec.q_mvar), net.bases().power_mva)?;
        if !(pu.re.is_finite() && pu.im.is_finite()) {
            return Err(NetworkError::NonFinite(format!(
                "injection at `{}`",
                rec.bus
            )));
        }
        s.0[k] += pu;
    }
    Ok(s)
}

/// Parses an operating-point document. Every load bus must appear exactly once.
pub fn parse_operating_point(
    text: &str,
    net: &NetworkDescription,
) -> Result<OperatingPoint, NetworkError> {
    let doc: OperatingPointFile =
        toml::from_str(text).map_err(|e| NetworkError::Schema(e.message().to_string()))?;
    let n = net.load_count();
    let mut s = InjectionVector::zeros(n);
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    let mut seen = vec![false; n];
    for rec in doc.buses {
        let k = load_slot(net, &rec.id)?;
        if std::mem::replace(&mut seen[k], true) {
            return Err(NetworkError::DuplicateBus(rec.id));
        }
        s.0[k] = to_per_unit(Complex64::new(rec.p_mw, rec.q_mvar), net.bases().power_mva)?;
        v[k] = Complex64::new(rec.v_re, rec.v_im);
        if !(v[k].re.is_finite()
            && v[k].im.is_finite()
            && s.0[k].re.is_finite()
            && s.0[k].im.is_finite())
        {
            return Err(NetworkError::NonFinite(format!(
                "operating point at `{}`",
                rec.id
            )));
        }
    }
    if let Some(k) = seen.iter().position(|&s| !s) {
        return Err(NetworkError::Schema(format!(
            "operating point is missing bus `{}`",
            net.load_buses()[k].id
        )));
    }
    Ok(OperatingPoint {
        s,
        v,
        provenance: doc.provenance,
    })
}
