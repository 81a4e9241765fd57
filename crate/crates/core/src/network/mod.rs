//! Trading networks: producer, middleman and consumer populations connected by
//! directed trade edges, together with the matching distribution and the
//! agents' patience.
//!
//! [`NetworkFile`] is the on-disk description and may be invalid;
//! [`TradingNetwork`] is the checked, index-resolved form every solver takes.

mod builtin;
mod coefficients;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use builtin::{builtin, network2, surplus_triangle, triangle_halfcost, two_hop, BUILTIN_NAMES};
pub use coefficients::{kappa, BellmanCoefficients};

/// Limit Bellman coefficients of a network at its own patience.
pub fn coefficients(net: &TradingNetwork) -> Result<BellmanCoefficients> {
    BellmanCoefficients::new(net)
}

/// Absolute tolerance on the matching distribution's total mass.
pub const PI_MASS_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeClass {
    Producer,
    Middleman,
    Consumer,
}

impl fmt::Display for NodeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NodeClass::Producer => "producer",
            NodeClass::Middleman => "middleman",
            NodeClass::Consumer => "consumer",
        };
        f.write_str(s)
    }
}

/// A population of identical agents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Node {
    pub id: String,
    pub class: NodeClass,
    pub population: f64,
    /// Consumption value; present exactly for consumers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub cost: f64,
    pub pi: f64,
}

/// Which of the three admissible edge families an edge belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    /// producer -> consumer
    Direct,
    /// producer -> middleman
    Supply,
    /// middleman -> consumer
    Resale,
}

impl EdgeKind {
    pub fn classify(from: NodeClass, to: NodeClass) -> Option<EdgeKind> {
        match (from, to) {
            (NodeClass::Producer, NodeClass::Consumer) => Some(EdgeKind::Direct),
            (NodeClass::Producer, NodeClass::Middleman) => Some(EdgeKind::Supply),
            (NodeClass::Middleman, NodeClass::Consumer) => Some(EdgeKind::Resale),
            _ => None,
        }
    }
}

/// How impatient agents are.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Patience {
    /// Per-period discount factor in (0, 1).
    Discount(f64),
    /// Uniform patience parameter `f > 0`, with `1/f = pi / (2 N ln(1/delta))` on every
    /// edge endpoint. Only meaningful for equal populations and uniform `pi`.
    Uniform(f64),
}

impl Patience {
    /// The time scale `t` such that every Bellman coefficient equals `weight / t`.
    pub fn timescale(&self) -> Result<f64> {
        match *self {
            Patience::Discount(d) => {
                if !(d > 0.0 && d < 1.0) {
                    return Err(Error::Parameter(format!("discount {d} outside (0, 1)")));
                }
                Ok(-d.ln())
            }
            Patience::Uniform(f) => {
                if !(f > 0.0 && f.is_finite()) {
                    return Err(Error::Parameter(format!("patience parameter f = {f} must be positive")));
                }
                Ok(f)
            }
        }
    }

    pub fn discount(&self) -> Option<f64> {
        match *self {
            Patience::Discount(d) => Some(d),
            Patience::Uniform(_) => None,
        }
    }
}

/// The canonical on-disk form of a network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discount: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<f64>,
}

impl NetworkFile {
    pub fn load(path: impl AsRef<Path>) -> Result<NetworkFile> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<NetworkFile> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network file serializes")
    }

    /// Replaces whichever patience field is present.
    pub fn set_patience(&mut self, patience: Patience) {
        match patience {
            Patience::Discount(d) => {
                self.discount = Some(d);
                self.f = None;
            }
            Patience::Uniform(f) => {
                self.f = Some(f);
                self.discount = None;
            }
        }
    }

    pub fn with_patience(mut self, patience: Patience) -> NetworkFile {
        self.set_patience(patience);
        self
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }

    pub fn build(&self) -> Result<TradingNetwork> {
        TradingNetwork::from_file(self)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    /// The offending element, e.g. `edge 5-1` or `network`.
    pub element: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, element: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation { element: element.into(), message: message.into() });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}: {}", v.element, v.message)?;
        }
        Ok(())
    }
}

/// Checks every structural and numeric invariant of a network description.
pub fn validate(file: &NetworkFile) -> ValidationReport {
    let mut report = ValidationReport::default();

    match (file.discount, file.f) {
        (Some(_), Some(_)) => report.push("network", "both `discount` and `f` given; exactly one is allowed"),
        (None, None) => report.push("network", "neither `discount` nor `f` given"),
        (Some(d), None) => {
            if !(d > 0.0 && d < 1.0) {
                report.push("network", format!("discount {d} outside (0, 1)"));
            }
        }
        (None, Some(f)) => {
            if !(f > 0.0 && f.is_finite()) {
                report.push("network", format!("patience parameter f = {f} must be positive"));
            }
        }
    }

    let mut classes: HashMap<&str, NodeClass> = HashMap::new();
    for node in &file.nodes {
        let el = format!("node {}", node.id);
        if node.id.is_empty() {
            report.push("node", "empty node id");
        }
        if classes.insert(node.id.as_str(), node.class).is_some() {
            report.push(&el, "duplicate node id");
        }
        if !(node.population > 0.0 && node.population.is_finite()) {
            report.push(&el, format!("population {} must be positive", node.population));
        }
        match (node.class, node.value) {
            (NodeClass::Consumer, None) => report.push(&el, "consumer without a value"),
            (NodeClass::Consumer, Some(v)) if !(v >= 0.0 && v.is_finite()) => {
                report.push(&el, format!("value {v} must be non-negative"))
            }
            (NodeClass::Producer | NodeClass::Middleman, Some(_)) => {
                report.push(&el, "only consumers carry a value")
            }
            _ => {}
        }
    }
    if !file.nodes.iter().any(|n| n.class == NodeClass::Producer) {
        report.push("network", "no producer node");
    }
    if !file.nodes.iter().any(|n| n.class == NodeClass::Consumer) {
        report.push("network", "no consumer node");
    }

    let mut seen = HashSet::new();
    let mut mass = 0.0;
    for edge in &file.edges {
        let el = format!("edge {}-{}", edge.from, edge.to);
        if !seen.insert((edge.from.as_str(), edge.to.as_str())) {
            report.push(&el, "duplicate edge");
        }
        match (classes.get(edge.from.as_str()), classes.get(edge.to.as_str())) {
            (Some(&a), Some(&b)) => {
                if EdgeKind::classify(a, b).is_none() {
                    report.push(&el, format!("illegal edge class pair ({a} -> {b})"));
                }
            }
            (from, to) => {
                if from.is_none() {
                    report.push(&el, format!("unknown node `{}`", edge.from));
                }
                if to.is_none() {
                    report.push(&el, format!("unknown node `{}`", edge.to));
                }
            }
        }
        if !(edge.cost >= 0.0 && edge.cost.is_finite()) {
            report.push(&el, format!("cost {} must be non-negative", edge.cost));
        }
        if !(edge.pi >= 0.0 && edge.pi.is_finite()) {
            report.push(&el, format!("selection probability {} must be non-negative", edge.pi));
        }
        mass += edge.pi;
    }
    if (mass - 1.0).abs() > PI_MASS_TOL {
        report.push("network", format!("matching distribution mass {mass} ≠ 1"));
    }

    if file.f.is_some() && file.discount.is_none() {
        if let Some(first) = file.nodes.first() {
            if file.nodes.iter().any(|n| (n.population - first.population).abs() > PI_MASS_TOL) {
                report.push("network", "uniform patience `f` requires equal populations");
            }
        }
        if let Some(first) = file.edges.first() {
            if file.edges.iter().any(|e| (e.pi - first.pi).abs() > PI_MASS_TOL) {
                report.push("network", "uniform patience `f` requires a uniform matching distribution");
            }
        }
    }

    report
}

/// A resolved edge of a validated network.
#[derive(Clone, Debug, PartialEq)]
pub struct Link {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
    pub cost: f64,
    pub pi: f64,
}

/// A validated trading network.
///
/// Edges are stored in canonical order, sorted by `(from id, to id)`, so results
/// never depend on the order of the input file.
#[derive(Clone, Debug)]
pub struct TradingNetwork {
    nodes: Vec<Node>,
    links: Vec<Link>,
    patience: Patience,
    index: HashMap<String, usize>,
    middlemen: Vec<usize>,
    slot: Vec<Option<usize>>,
}

impl TradingNetwork {
    pub fn from_file(file: &NetworkFile) -> Result<TradingNetwork> {
        let report = validate(file);
        if !report.is_ok() {
            return Err(Error::InvalidNetwork(report));
        }
        let patience = match (file.discount, file.f) {
            (Some(d), None) => Patience::Discount(d),
            (None, Some(f)) => Patience::Uniform(f),
            _ => unreachable!("validated"),
        };
        let nodes = file.nodes.clone();
        let index: HashMap<String, usize> =
            nodes.iter().enumerate().map(|(i, n)| (n.id.clone(), i)).collect();

        let mut edges: Vec<&Edge> = file.edges.iter().collect();
        edges.sort_by(|a, b| (&a.from, &a.to).cmp(&(&b.from, &b.to)));
        let links = edges
            .into_iter()
            .map(|e| {
                let from = index[&e.from];
                let to = index[&e.to];
                Link {
                    from,
                    to,
                    kind: EdgeKind::classify(nodes[from].class, nodes[to].class).expect("validated"),
                    cost: e.cost,
                    pi: e.pi,
                }
            })
            .collect();

        let middlemen: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i].class == NodeClass::Middleman).collect();
        let mut slot = vec![None; nodes.len()];
        for (s, &m) in middlemen.iter().enumerate() {
            slot[m] = Some(s);
        }
        Ok(TradingNetwork { nodes, links, patience, index, middlemen, slot })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Link] {
        &self.links
    }

    pub fn patience(&self) -> Patience {
        self.patience
    }

    pub fn node(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn edge(&self, from: &str, to: &str) -> Option<usize> {
        let (a, b) = (self.node(from)?, self.node(to)?);
        self.links.iter().position(|l| l.from == a && l.to == b)
    }

    /// Resolves an edge label of the form `from-to`.
    pub fn edge_by_label(&self, label: &str) -> Result<usize> {
        let (from, to) = label.split_once('-').ok_or_else(|| Error::UnknownEdge(label.to_string()))?;
        self.edge(from.trim(), to.trim()).ok_or_else(|| Error::UnknownEdge(label.to_string()))
    }

    pub fn edge_label(&self, e: usize) -> String {
        let l = &self.links[e];
        format!("{}-{}", self.nodes[l.from].id, self.nodes[l.to].id)
    }

    pub fn node_id(&self, v: usize) -> &str {
        &self.nodes[v].id
    }

    /// Node indices of the middlemen, in node order.
    pub fn middlemen(&self) -> &[usize] {
        &self.middlemen
    }

    /// Position of a middleman node within [`TradingNetwork::middlemen`].
    pub fn middleman_slot(&self, v: usize) -> Option<usize> {
        self.slot[v]
    }

    pub fn class(&self, v: usize) -> NodeClass {
        self.nodes[v].class
    }

    pub fn value(&self, v: usize) -> f64 {
        self.nodes[v].value.unwrap_or(0.0)
    }

    pub fn max_value(&self) -> f64 {
        self.nodes.iter().filter_map(|n| n.value).fold(0.0, f64::max)
    }

    pub fn to_file(&self) -> NetworkFile {
        let (discount, f) = match self.patience {
            Patience::Discount(d) => (Some(d), None),
            Patience::Uniform(f) => (None, Some(f)),
        };
        NetworkFile {
            nodes: self.nodes.clone(),
            edges: self
                .links
                .iter()
                .map(|l| Edge {
                    from: self.nodes[l.from].id.clone(),
                    to: self.nodes[l.to].id.clone(),
                    cost: l.cost,
                    pi: l.pi,
                })
                .collect(),
            discount,
            f,
        }
    }

    pub fn with_patience(&self, patience: Patience) -> Result<TradingNetwork> {
        self.to_file().with_patience(patience).build()
    }

    /// Incoming (supply) and outgoing (resale) edges of a middleman.
    pub fn middleman_edges(&self, m: usize) -> (Vec<usize>, Vec<usize>) {
        let inflow = (0..self.links.len()).filter(|&e| self.links[e].to == m).collect();
        let outflow = (0..self.links.len()).filter(|&e| self.links[e].from == m).collect();
        (inflow, outflow)
    }
}
