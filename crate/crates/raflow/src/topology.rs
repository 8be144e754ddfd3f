//! Scenario ingestion and validation: nodes, flows with explicit disjoint
//! paths, interferer-set construction and end-to-end path metrics.
//!
//! Scenarios are described in a TOML document:
//!
//! ```toml
//! interference_policy = "path_nodes"   # or "all_nodes"; optional
//!
//! [channel]
//! alpha = 4.0
//! v_default = 1.0
//!
//! [[nodes]]
//! id = 0
//! x_m = 0.0
//! y_m = 0.0
//! tx_power_w = 0.1
//! noise_w = 7e-11
//! sinr_threshold = 0.5
//! role = "source"        # source | relay | destination
//! q = 0.5                # required for relays, optional placeholder for sources
//!
//! [[flows]]
//! id = 1
//! source = 0
//! path = [0, 5, 10, 15]
//! ```
//!
//! Unknown fields are rejected. Paths must be pairwise node- and
//! link-disjoint except at the single destination, which never transmits.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelError, ChannelParams, RadioSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Source,
    Relay,
    Destination,
}

/// Which nodes count as interferers for a link: every node in the network
/// or only the nodes participating in employed paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferencePolicy {
    AllNodes,
    #[default]
    PathNodes,
}

/// One network node: position, radio front end, role and (for relays) the
/// fixed transmit probability. For sources `q` is only a placeholder for
/// the rate decided by the optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub id: u32,
    pub x_m: f64,
    pub y_m: f64,
    pub radio: RadioSpec,
    pub role: Role,
    pub q: Option<f64>,
}

/// A unicast flow and the explicit path it is source-routed over, from its
/// originator to the destination.
#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub id: u32,
    pub source: u32,
    pub path: Vec<u32>,
}

impl Flow {
    /// Directed links of the path in hop order.
    pub fn links(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.path.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn hop_count(&self) -> usize {
        self.path.len() - 1
    }
}

/// How a node occupies slots: driven by a flow's source rate, by a fixed
/// relay transmit probability, or never (destination, idle source).
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum TransmitKind {
    FlowRate(u32),
    Fixed(f64),
    Never,
}

/// A validated scenario. Nodes are kept sorted by id; all queries are
/// read-only, so a `Scenario` can be shared freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    nodes: Vec<NodeSpec>,
    flows: Vec<Flow>,
    channel: ChannelParams,
    interference_policy: InterferencePolicy,
    destination: u32,
    index: BTreeMap<u32, usize>,
    radios: Vec<RadioSpec>,
    distances: Vec<f64>,
    flow_by_source: BTreeMap<u32, u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioError {
    Parse(String),
    Channel(ChannelError),
    InvalidRadio { node: u32, source: ChannelError },
    InvalidPosition { node: u32 },
    DuplicateNodeId { id: u32 },
    DuplicatePosition { a: u32, b: u32 },
    InvalidTransmitProb { node: u32, q: f64 },
    MissingRelayQ { node: u32 },
    NoDestination,
    MultipleDestinations { first: u32, second: u32 },
    DuplicateFlowId { id: u32 },
    EmptyPath { flow: u32 },
    UnknownPathNode { flow: u32, node: u32 },
    PathSourceMismatch { flow: u32, path_start: u32, source: u32 },
    PathDestinationMismatch { flow: u32, last: u32, destination: u32 },
    RepeatedPathNode { flow: u32, node: u32 },
    SourceRoleMismatch { flow: u32, node: u32 },
    InteriorNotRelay { flow: u32, node: u32 },
    SourceReused { node: u32, first_flow: u32, second_flow: u32 },
    NonDisjointPaths { flow_a: u32, flow_b: u32, node: u32 },
    LinkNotOnPath { link: (u32, u32) },
    EmptyFlows,
    UnknownFlow { flow: u32 },
    UnknownNode { node: u32 },
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Parse(msg) => write!(f, "scenario document: {msg}"),
            Self::Channel(e) => write!(f, "channel parameters: {e}"),
            Self::InvalidRadio { node, source } => write!(f, "node {node}: {source}"),
            Self::InvalidPosition { node } => write!(f, "node {node}: position is not finite"),
            Self::DuplicateNodeId { id } => write!(f, "duplicate node id {id}"),
            Self::DuplicatePosition { a, b } => {
                write!(f, "nodes {a} and {b} occupy the same position")
            }
            Self::InvalidTransmitProb { node, q } => {
                write!(f, "node {node}: transmit probability {q} outside [0, 1]")
            }
            Self::MissingRelayQ { node } => {
                write!(f, "relay {node} has no transmit probability q")
            }
            Self::NoDestination => write!(f, "scenario has no destination node"),
            Self::MultipleDestinations { first, second } => {
                write!(f, "multiple destinations: nodes {first} and {second}")
            }
            Self::DuplicateFlowId { id } => write!(f, "duplicate flow id {id}"),
            Self::EmptyPath { flow } => write!(f, "flow {flow}: path has fewer than two nodes"),
            Self::UnknownPathNode { flow, node } => {
                write!(f, "flow {flow}: path references unknown node {node}")
            }
            Self::PathSourceMismatch { flow, path_start, source } => write!(
                f,
                "flow {flow}: path starts at {path_start}, not at its source {source}"
            ),
            Self::PathDestinationMismatch { flow, last, destination } => write!(
                f,
                "flow {flow}: path ends at {last}, not at the destination {destination}"
            ),
            Self::RepeatedPathNode { flow, node } => {
                write!(f, "flow {flow}: node {node} appears twice in the path")
            }
            Self::SourceRoleMismatch { flow, node } => {
                write!(f, "flow {flow}: source node {node} does not have the source role")
            }
            Self::InteriorNotRelay { flow, node } => {
                write!(f, "flow {flow}: interior path node {node} is not a relay")
            }
            Self::SourceReused { node, first_flow, second_flow } => write!(
                f,
                "source node {node} originates both flow {first_flow} and flow {second_flow}"
            ),
            Self::NonDisjointPaths { flow_a, flow_b, node } => write!(
                f,
                "flows {flow_a} and {flow_b} share node {node}; paths may share only the destination"
            ),
            Self::LinkNotOnPath { link: (i, j) } => {
                write!(f, "link ({i}, {j}) is not on any flow's path")
            }
            Self::EmptyFlows => write!(f, "scenario has no flows"),
            Self::UnknownFlow { flow } => write!(f, "no flow with id {flow}"),
            Self::UnknownNode { node } => write!(f, "no node with id {node}"),
        }
    }
}

impl std::error::Error for ScenarioError {}

impl From<ChannelError> for ScenarioError {
    fn from(e: ChannelError) -> Self {
        Self::Channel(e)
    }
}

// ---------------------------------------------------------------------------
// File schema (exact field names; unknown fields rejected)
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    interference_policy: InterferencePolicy,
    channel: ChannelSection,
    #[serde(default)]
    nodes: Vec<NodeRecord>,
    #[serde(default)]
    flows: Vec<FlowRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelSection {
    alpha: f64,
    v_default: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    id: u32,
    x_m: f64,
    y_m: f64,
    tx_power_w: f64,
    noise_w: f64,
    sinr_threshold: f64,
    role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowRecord {
    id: u32,
    source: u32,
    path: Vec<u32>,
}

impl Scenario {
    /// Parse and validate a scenario document.
    pub fn from_toml_str(doc: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile =
            toml::from_str(doc).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        let channel = ChannelParams::new(file.channel.alpha, file.channel.v_default)?;
        let mut nodes = Vec::with_capacity(file.nodes.len());
        for rec in file.nodes {
            let radio = RadioSpec::new(rec.tx_power_w, rec.noise_w, rec.sinr_threshold)
                .map_err(|source| ScenarioError::InvalidRadio { node: rec.id, source })?;
            nodes.push(NodeSpec {
                id: rec.id,
                x_m: rec.x_m,
                y_m: rec.y_m,
                radio,
                role: rec.role,
                q: rec.q,
            });
        }
        let flows = file
            .flows
            .into_iter()
            .map(|rec| Flow { id: rec.id, source: rec.source, path: rec.path })
            .collect();
        Self::from_parts(channel, file.interference_policy, nodes, flows)
    }

    /// Serialize back to the document format. Round-trips through
    /// [`Scenario::from_toml_str`] to the identical scenario.
    pub fn to_toml_string(&self) -> String {
        let file = ScenarioFile {
            interference_policy: self.interference_policy,
            channel: ChannelSection {
                alpha: self.channel.alpha,
                v_default: self.channel.v_default,
            },
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeRecord {
                    id: n.id,
                    x_m: n.x_m,
                    y_m: n.y_m,
                    tx_power_w: n.radio.tx_power,
                    noise_w: n.radio.noise,
                    sinr_threshold: n.radio.sinr_threshold,
                    role: n.role,
                    q: n.q,
                })
                .collect(),
            flows: self
                .flows
                .iter()
                .map(|fl| FlowRecord { id: fl.id, source: fl.source, path: fl.path.clone() })
                .collect(),
        };
        toml::to_string(&file).expect("validated scenario serializes")
    }

    /// Validated constructor; every scenario goes through here.
    pub fn from_parts(
        channel: ChannelParams,
        interference_policy: InterferencePolicy,
        mut nodes: Vec<NodeSpec>,
        mut flows: Vec<Flow>,
    ) -> Result<Self, ScenarioError> {
        nodes.sort_by_key(|n| n.id);
        flows.sort_by_key(|f| f.id);

        let mut index = BTreeMap::new();
        for (pos, node) in nodes.iter().enumerate() {
            if index.insert(node.id, pos).is_some() {
                return Err(ScenarioError::DuplicateNodeId { id: node.id });
            }
            if !node.x_m.is_finite() || !node.y_m.is_finite() {
                return Err(ScenarioError::InvalidPosition { node: node.id });
            }
            if let Some(q) = node.q {
                if !(0.0..=1.0).contains(&q) {
                    return Err(ScenarioError::InvalidTransmitProb { node: node.id, q });
                }
            }
            if node.role == Role::Relay && node.q.is_none() {
                return Err(ScenarioError::MissingRelayQ { node: node.id });
            }
        }

        let mut destination = None;
        for node in &nodes {
            if node.role == Role::Destination {
                match destination {
                    None => destination = Some(node.id),
                    Some(first) => {
                        return Err(ScenarioError::MultipleDestinations {
                            first,
                            second: node.id,
                        })
                    }
                }
            }
        }
        let destination = destination.ok_or(ScenarioError::NoDestination)?;

        for a in 0..nodes.len() {
            for b in a + 1..nodes.len() {
                if nodes[a].x_m == nodes[b].x_m && nodes[a].y_m == nodes[b].y_m {
                    return Err(ScenarioError::DuplicatePosition {
                        a: nodes[a].id,
                        b: nodes[b].id,
                    });
                }
            }
        }

        let mut flow_ids = BTreeSet::new();
        let mut flow_by_source = BTreeMap::new();
        for flow in &flows {
            if !flow_ids.insert(flow.id) {
                return Err(ScenarioError::DuplicateFlowId { id: flow.id });
            }
            if flow.path.len() < 2 {
                return Err(ScenarioError::EmptyPath { flow: flow.id });
            }
            for &n in &flow.path {
                if !index.contains_key(&n) {
                    return Err(ScenarioError::UnknownPathNode { flow: flow.id, node: n });
                }
            }
            if flow.path[0] != flow.source {
                return Err(ScenarioError::PathSourceMismatch {
                    flow: flow.id,
                    path_start: flow.path[0],
                    source: flow.source,
                });
            }
            let last = *flow.path.last().expect("non-empty path");
            if last != destination {
                return Err(ScenarioError::PathDestinationMismatch {
                    flow: flow.id,
                    last,
                    destination,
                });
            }
            let mut seen = BTreeSet::new();
            for &n in &flow.path {
                if !seen.insert(n) {
                    return Err(ScenarioError::RepeatedPathNode { flow: flow.id, node: n });
                }
            }
            let src = &nodes[index[&flow.source]];
            if src.role != Role::Source {
                return Err(ScenarioError::SourceRoleMismatch {
                    flow: flow.id,
                    node: flow.source,
                });
            }
            for &n in &flow.path[1..flow.path.len() - 1] {
                if nodes[index[&n]].role != Role::Relay {
                    return Err(ScenarioError::InteriorNotRelay { flow: flow.id, node: n });
                }
            }
            if let Some(&first_flow) = flow_by_source.get(&flow.source) {
                return Err(ScenarioError::SourceReused {
                    node: flow.source,
                    first_flow,
                    second_flow: flow.id,
                });
            }
            flow_by_source.insert(flow.source, flow.id);
        }

        // Paths may share only the destination node.
        for (a, fa) in flows.iter().enumerate() {
            for fb in &flows[a + 1..] {
                let set_a: BTreeSet<u32> = fa.path.iter().copied().collect();
                for &n in &fb.path {
                    if n != destination && set_a.contains(&n) {
                        return Err(ScenarioError::NonDisjointPaths {
                            flow_a: fa.id,
                            flow_b: fb.id,
                            node: n,
                        });
                    }
                }
            }
        }

        let radios: Vec<RadioSpec> = nodes.iter().map(|n| n.radio).collect();
        let n = nodes.len();
        let mut distances = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                distances[a * n + b] =
                    (nodes[a].x_m - nodes[b].x_m).hypot(nodes[a].y_m - nodes[b].y_m);
            }
        }

        Ok(Self {
            nodes,
            flows,
            channel,
            interference_policy,
            destination,
            index,
            radios,
            distances,
            flow_by_source,
        })
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    pub fn flows(&self) -> &[Flow] {
        &self.flows
    }

    pub fn channel(&self) -> &ChannelParams {
        &self.channel
    }

    pub fn interference_policy(&self) -> InterferencePolicy {
        self.interference_policy
    }

    pub fn destination(&self) -> u32 {
        self.destination
    }

    pub fn node(&self, id: u32) -> Option<&NodeSpec> {
        self.index.get(&id).map(|&pos| &self.nodes[pos])
    }

    pub fn flow(&self, id: u32) -> Option<&Flow> {
        self.flows.iter().find(|f| f.id == id)
    }

    pub fn node_index(&self, id: u32) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub(crate) fn radios(&self) -> &[RadioSpec] {
        &self.radios
    }

    pub(crate) fn distance_idx(&self, a: usize, b: usize) -> f64 {
        self.distances[a * self.nodes.len() + b]
    }

    /// Nodes participating in any employed path.
    pub fn employed_nodes(&self) -> BTreeSet<u32> {
        self.flows.iter().flat_map(|f| f.path.iter().copied()).collect()
    }

    /// Is `link` a directed hop on some flow's path?
    pub fn is_path_link(&self, link: (u32, u32)) -> bool {
        self.flows.iter().any(|f| f.links().any(|l| l == link))
    }

    /// The set of interferers of a path link, ordered by ascending node id.
    /// The ordering fixes the bit positions of the subset enumeration.
    pub fn interferer_set(&self, link: (u32, u32)) -> Result<Vec<u32>, ScenarioError> {
        if !self.is_path_link(link) {
            return Err(ScenarioError::LinkNotOnPath { link });
        }
        let (i, j) = link;
        let excluded = [i, j, self.destination];
        let ids: Vec<u32> = match self.interference_policy {
            InterferencePolicy::AllNodes => self
                .nodes
                .iter()
                .map(|n| n.id)
                .filter(|id| !excluded.contains(id))
                .collect(),
            InterferencePolicy::PathNodes => self
                .employed_nodes()
                .into_iter()
                .filter(|id| !excluded.contains(id))
                .collect(),
        };
        Ok(ids)
    }

    /// Success probability of a transmission `tx -> rx` when exactly the
    /// nodes in `active` (which must include `tx` and exclude `rx`)
    /// transmit in the same slot.
    pub fn link_success_probability(
        &self,
        tx: u32,
        rx: u32,
        active: &[u32],
    ) -> Result<f64, ScenarioError> {
        let lookup = |id: u32| self.node_index(id).ok_or(ScenarioError::UnknownNode { node: id });
        let ti = lookup(tx)?;
        let tj = lookup(rx)?;
        let act: Vec<usize> = active.iter().map(|&k| lookup(k)).collect::<Result<_, _>>()?;
        channel::success_probability(ti, tj, &act, &self.radios, &self.channel, |a, b| {
            self.distance_idx(a, b)
        })
        .map_err(ScenarioError::Channel)
    }

    /// Interference-free end-to-end success probability of a path: the
    /// product over its links of the single-transmitter success probability.
    pub fn end_to_end_success(&self, flow: &Flow) -> f64 {
        flow.links()
            .map(|(i, j)| {
                let ti = self.node_index(i).expect("flow belongs to scenario");
                let tj = self.node_index(j).expect("flow belongs to scenario");
                channel::success_probability(ti, tj, &[ti], &self.radios, &self.channel, |a, b| {
                    self.distance_idx(a, b)
                })
                .expect("validated link")
            })
            .product()
    }

    /// The flow whose path maximizes [`Scenario::end_to_end_success`]; ties
    /// break toward the lowest flow id.
    pub fn best_path(&self) -> Result<&Flow, ScenarioError> {
        let mut flows = self.flows.iter();
        let first = flows.next().ok_or(ScenarioError::EmptyFlows)?;
        let mut best = (first, self.end_to_end_success(first));
        for flow in flows {
            let p = self.end_to_end_success(flow);
            if p > best.1 {
                best = (flow, p);
            }
        }
        Ok(best.0)
    }

    /// Copy of the scenario with every node's SINR threshold replaced.
    pub fn with_uniform_sinr_threshold(&self, gamma: f64) -> Result<Scenario, ScenarioError> {
        let nodes = self
            .nodes
            .iter()
            .map(|n| {
                RadioSpec::new(n.radio.tx_power, n.radio.noise, gamma)
                    .map(|radio| NodeSpec { radio, ..n.clone() })
                    .map_err(|source| ScenarioError::InvalidRadio { node: n.id, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_parts(self.channel, self.interference_policy, nodes, self.flows.clone())
    }

    /// Copy of the scenario with a different interference policy.
    pub fn with_interference_policy(&self, policy: InterferencePolicy) -> Scenario {
        Self::from_parts(self.channel, policy, self.nodes.clone(), self.flows.clone())
            .expect("policy change preserves validity")
    }

    /// Copy of the scenario keeping only one flow (used by the best-path
    /// baseline, where the interferer pool shrinks to that path's nodes).
    pub fn restricted_to_flow(&self, flow_id: u32) -> Result<Scenario, ScenarioError> {
        let flow = self.flow(flow_id).ok_or(ScenarioError::UnknownFlow { flow: flow_id })?;
        Self::from_parts(
            self.channel,
            self.interference_policy,
            self.nodes.clone(),
            vec![flow.clone()],
        )
    }

    pub(crate) fn transmit_kind(&self, id: u32) -> TransmitKind {
        let node = &self.nodes[self.index[&id]];
        match node.role {
            Role::Destination => TransmitKind::Never,
            Role::Source => match self.flow_by_source.get(&id) {
                Some(&flow) => TransmitKind::FlowRate(flow),
                None => TransmitKind::Never,
            },
            Role::Relay => TransmitKind::Fixed(node.q.expect("validated relay q")),
        }
    }
}
