//! Infrastructure network model: stations, access points, BSS cells and the
//! AP-to-AP distribution system, with per-node compromise probabilities.
//!
//! Topologies come from a JSON scenario file:
//!
//! ```json
//! {
//!   "nodes": [{"id": "s1", "kind": "station", "bss": "b1", "p": 0.1}],
//!   "links": [{"a": "s1", "b": "ap1", "latency": 1, "medium": "b1"}],
//!   "mac":   {"cw_min": 4, "cw_max": 64, "max_retries": 7}
//! }
//! ```
//!
//! `relay_allowed` defaults to true for access points and false for
//! stations: in infrastructure mode stations talk only to their own AP, so
//! only APs and the distribution system forward traffic. Scenarios may
//! override the flag per node to let stations relay. Link `latency`
//! defaults to 1 time unit; `medium` defaults to the BSS id for
//! station-to-AP links and `"ds"` for AP-to-AP links.
//!
//! A topology is immutable once loaded and validated.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mac::BackoffPolicy;

/// Identifier of a station or access point, unique within a topology.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(id: &str) -> Self {
        Self(id.to_owned())
    }
}

impl std::borrow::Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Station,
    AccessPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    /// BSS this node belongs to (the cell it coordinates, for an AP).
    pub bss: String,
    /// Probability that an adversary controls this node.
    pub p: f64,
    /// Whether paths may route through this node.
    pub relay_allowed: bool,
}

/// Undirected link. Endpoints are stored in sorted order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    /// Transmission time across the link, in integer time units.
    pub latency: u64,
    /// Shared medium this link transmits on; links on one medium contend.
    pub medium: String,
}

impl Link {
    fn key(&self) -> (&NodeId, &NodeId) {
        (&self.a, &self.b)
    }
}

/// One invariant violation, named after the rule that caught it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: &'static str,
    pub subject: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.rule, self.subject)
    }
}

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("scenario invalid: {}", format_violations(.0))]
    Validation(Vec<Violation>),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(Violation::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// The network graph. Construction does not enforce invariants; run
/// [`validate`] (or load through [`load_scenario`], which does) before
/// trusting one.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: Vec<Node>,
    links: Vec<Link>,
}

impl Topology {
    /// Build from raw parts. Nodes are sorted by id and link endpoints are
    /// canonicalized so equal topologies compare equal.
    pub fn new(mut nodes: Vec<Node>, links: Vec<Link>) -> Self {
        nodes.sort_by(|x, y| x.id.cmp(&y.id));
        let mut links: Vec<Link> = links
            .into_iter()
            .map(|mut l| {
                if l.b < l.a {
                    std::mem::swap(&mut l.a, &mut l.b);
                }
                l
            })
            .collect();
        links.sort_by(|x, y| x.key().cmp(&y.key()));
        Self { nodes, links }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes
            .binary_search_by(|n| n.id.cmp(id))
            .ok()
            .map(|i| &self.nodes[i])
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.node(id).is_some()
    }

    /// All nodes adjacent to `v`.
    pub fn neighbors(&self, v: &NodeId) -> Result<BTreeSet<NodeId>, TopologyError> {
        if !self.contains(v) {
            return Err(TopologyError::UnknownNode(v.clone()));
        }
        let mut out = BTreeSet::new();
        for link in &self.links {
            if link.a == *v {
                out.insert(link.b.clone());
            } else if link.b == *v {
                out.insert(link.a.clone());
            }
        }
        Ok(out)
    }

    /// The link joining `a` and `b`, if any.
    pub fn link_between(&self, a: &NodeId, b: &NodeId) -> Option<&Link> {
        let key = if a <= b { (a, b) } else { (b, a) };
        self.links
            .binary_search_by(|l| l.key().cmp(&key))
            .ok()
            .map(|i| &self.links[i])
    }

    /// Per-node compromise probabilities, keyed by id.
    pub fn compromise_probs(&self) -> BTreeMap<NodeId, f64> {
        self.nodes
            .iter()
            .map(|n| (n.id.clone(), n.p))
            .collect()
    }

    /// BSS id to (access points, member stations). Well-formed topologies
    /// have exactly one AP per entry.
    pub fn bss_map(&self) -> BTreeMap<&str, (Vec<&NodeId>, Vec<&NodeId>)> {
        let mut map: BTreeMap<&str, (Vec<&NodeId>, Vec<&NodeId>)> = BTreeMap::new();
        for node in &self.nodes {
            let entry = map.entry(node.bss.as_str()).or_default();
            match node.kind {
                NodeKind::AccessPoint => entry.0.push(&node.id),
                NodeKind::Station => entry.1.push(&node.id),
            }
        }
        map
    }
}

/// A loaded scenario: the network plus the medium-access policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub topology: Topology,
    pub mac: BackoffPolicy,
}

impl Scenario {
    /// Parse the JSON scenario format without validating invariants.
    pub fn parse(bytes: &[u8]) -> Result<Self, TopologyError> {
        let file: ScenarioFile =
            serde_json::from_slice(bytes).map_err(|e| TopologyError::Parse(e.to_string()))?;
        Ok(file.into_scenario())
    }

    /// All invariant violations in the scenario, topology rules first.
    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = validate(&self.topology);
        violations.extend(
            self.mac
                .validate()
                .into_iter()
                .map(|(rule, subject)| Violation { rule, subject }),
        );
        violations
    }

    /// Canonical JSON: nodes and links sorted, every default written out.
    /// Loading the output reproduces the scenario exactly.
    pub fn to_canonical_json(&self) -> String {
        let file = ScenarioFile {
            nodes: self
                .topology
                .nodes()
                .iter()
                .map(|n| NodeSpec {
                    id: n.id.clone(),
                    kind: n.kind,
                    bss: n.bss.clone(),
                    p: n.p,
                    relay_allowed: Some(n.relay_allowed),
                })
                .collect(),
            links: self
                .topology
                .links()
                .iter()
                .map(|l| LinkSpec {
                    a: l.a.clone(),
                    b: l.b.clone(),
                    latency: Some(l.latency),
                    medium: Some(l.medium.clone()),
                })
                .collect(),
            mac: Some(self.mac.clone()),
        };
        let mut out = serde_json::to_string_pretty(&file).expect("scenario serializes");
        out.push('\n');
        out
    }
}

/// Parse and validate a scenario file.
pub fn load_scenario(bytes: &[u8]) -> Result<Scenario, TopologyError> {
    let scenario = Scenario::parse(bytes)?;
    let violations = scenario.validate();
    if violations.is_empty() {
        Ok(scenario)
    } else {
        Err(TopologyError::Validation(violations))
    }
}

/// Parse and validate, keeping only the network.
pub fn load_topology(bytes: &[u8]) -> Result<Topology, TopologyError> {
    load_scenario(bytes).map(|s| s.topology)
}

/// Check every topology invariant, returning one entry per violation.
///
/// Rules: `unique-node-id`, `prob-range`, `one-ap-per-bss`,
/// `infrastructure-mode` (stations link only to the AP of their own BSS),
/// `link-endpoint-exists`, `link-endpoints-distinct`, `latency-positive`,
/// `duplicate-link`.
pub fn validate(topo: &Topology) -> Vec<Violation> {
    let mut violations = Vec::new();
    let nodes = topo.nodes();

    for pair in nodes.windows(2) {
        if pair[0].id == pair[1].id {
            violations.push(Violation {
                rule: "unique-node-id",
                subject: pair[0].id.to_string(),
            });
        }
    }

    for node in nodes {
        if !(0.0..=1.0).contains(&node.p) {
            violations.push(Violation {
                rule: "prob-range",
                subject: node.id.to_string(),
            });
        }
    }

    for (bss, (aps, _stations)) in topo.bss_map() {
        if aps.len() != 1 {
            violations.push(Violation {
                rule: "one-ap-per-bss",
                subject: bss.to_owned(),
            });
        }
    }

    for pair in topo.links().windows(2) {
        if pair[0].key() == pair[1].key() {
            violations.push(Violation {
                rule: "duplicate-link",
                subject: link_subject(&pair[0].a, &pair[0].b),
            });
        }
    }

    for link in topo.links() {
        if link.a == link.b {
            violations.push(Violation {
                rule: "link-endpoints-distinct",
                subject: link_subject(&link.a, &link.b),
            });
            continue;
        }
        if link.latency == 0 {
            violations.push(Violation {
                rule: "latency-positive",
                subject: link_subject(&link.a, &link.b),
            });
        }
        let (a, b) = match (topo.node(&link.a), topo.node(&link.b)) {
            (Some(a), Some(b)) => (a, b),
            (a, b) => {
                if a.is_none() {
                    violations.push(Violation {
                        rule: "link-endpoint-exists",
                        subject: link.a.to_string(),
                    });
                }
                if b.is_none() {
                    violations.push(Violation {
                        rule: "link-endpoint-exists",
                        subject: link.b.to_string(),
                    });
                }
                continue;
            }
        };
        // Infrastructure mode: a station's links must end at the access
        // point of its own BSS. AP-to-AP links form the distribution system.
        for (station, peer) in [(a, b), (b, a)] {
            if station.kind == NodeKind::Station
                && (peer.kind != NodeKind::AccessPoint || peer.bss != station.bss)
            {
                violations.push(Violation {
                    rule: "infrastructure-mode",
                    subject: link_subject(&link.a, &link.b),
                });
                break;
            }
        }
    }

    violations
}

fn link_subject(a: &NodeId, b: &NodeId) -> String {
    format!("{a}<->{b}")
}

// ---------------------------------------------------------------------------
// Scenario file format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    nodes: Vec<NodeSpec>,
    links: Vec<LinkSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mac: Option<BackoffPolicy>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeSpec {
    id: NodeId,
    kind: NodeKind,
    bss: String,
    p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    relay_allowed: Option<bool>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkSpec {
    a: NodeId,
    b: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    latency: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    medium: Option<String>,
}

impl ScenarioFile {
    fn into_scenario(self) -> Scenario {
        let nodes: Vec<Node> = self
            .nodes
            .into_iter()
            .map(|spec| {
                let relay_allowed = spec
                    .relay_allowed
                    .unwrap_or(spec.kind == NodeKind::AccessPoint);
                Node {
                    id: spec.id,
                    kind: spec.kind,
                    bss: spec.bss,
                    p: spec.p,
                    relay_allowed,
                }
            })
            .collect();
        let by_id: BTreeMap<&str, &Node> =
            nodes.iter().map(|n| (n.id.as_str(), n)).collect();
        let links: Vec<Link> = self
            .links
            .into_iter()
            .map(|spec| {
                let medium = spec.medium.unwrap_or_else(|| {
                    default_medium(by_id.get(spec.a.as_str()).copied(), by_id.get(spec.b.as_str()).copied())
                });
                Link {
                    a: spec.a,
                    b: spec.b,
                    latency: spec.latency.unwrap_or(1),
                    medium,
                }
            })
            .collect();
        Scenario {
            topology: Topology::new(nodes, links),
            mac: self.mac.unwrap_or_default(),
        }
    }
}

/// Station links inherit the station's BSS medium; AP-to-AP links ride the
/// distribution system.
fn default_medium(a: Option<&Node>, b: Option<&Node>) -> String {
    match (a, b) {
        (Some(a), _) if a.kind == NodeKind::Station => a.bss.clone(),
        (_, Some(b)) if b.kind == NodeKind::Station => b.bss.clone(),
        _ => "ds".to_owned(),
    }
}
