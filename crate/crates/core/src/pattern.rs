//! Trade patterns: per-edge trade probabilities conditional on a feasible match.
//!
//! Textual form, clauses separated by `;`:
//!
//! ```text
//! always                      every edge trades (the default base)
//! never                       no edge trades
//! never:1-4,2-4               override listed edges
//! always:1-3
//! mixed:1-2=0.25,2-3=auto     interior probabilities; `auto` asks the solver
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::TradingNetwork;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Disposition {
    Always,
    Never,
    /// Trade with probability strictly inside (0, 1).
    Mixed(f64),
}

impl Disposition {
    pub fn lambda(self) -> f64 {
        match self {
            Disposition::Always => 1.0,
            Disposition::Never => 0.0,
            Disposition::Mixed(l) => l,
        }
    }

    pub fn is_mixed(self) -> bool {
        matches!(self, Disposition::Mixed(_))
    }
}

impl fmt::Display for Disposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Disposition::Always => f.write_str("always"),
            Disposition::Never => f.write_str("never"),
            Disposition::Mixed(l) => write!(f, "mixed({l})"),
        }
    }
}

/// One disposition per edge, in the network's canonical edge order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradePattern {
    pub edges: Vec<Disposition>,
}

/// A parsed pattern plus the edges whose probability the solver must find.
#[derive(Clone, Debug, PartialEq)]
pub struct PatternSpec {
    pub pattern: TradePattern,
    pub auto: Vec<usize>,
}

impl TradePattern {
    pub fn uniform(edges: usize, d: Disposition) -> TradePattern {
        TradePattern { edges: vec![d; edges] }
    }

    pub fn always(net: &TradingNetwork) -> TradePattern {
        Self::uniform(net.edges().len(), Disposition::Always)
    }

    pub fn never(net: &TradingNetwork) -> TradePattern {
        Self::uniform(net.edges().len(), Disposition::Never)
    }

    /// Always everywhere except on the listed edges.
    pub fn avoiding(net: &TradingNetwork, labels: &[&str]) -> Result<TradePattern> {
        let mut p = Self::always(net);
        for l in labels {
            p.edges[net.edge_by_label(l)?] = Disposition::Never;
        }
        Ok(p)
    }

    /// Classifies probabilities: 1 -> Always, 0 -> Never, otherwise Mixed.
    pub fn from_lambdas(lambdas: &[f64]) -> TradePattern {
        TradePattern {
            edges: lambdas
                .iter()
                .map(|&l| {
                    if l >= 1.0 {
                        Disposition::Always
                    } else if l <= 0.0 {
                        Disposition::Never
                    } else {
                        Disposition::Mixed(l)
                    }
                })
                .collect(),
        }
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.edges.iter().map(|d| d.lambda()).collect()
    }

    pub fn mixed_edges(&self) -> Vec<usize> {
        (0..self.edges.len()).filter(|&e| self.edges[e].is_mixed()).collect()
    }

    pub fn parse(net: &TradingNetwork, text: &str) -> Result<PatternSpec> {
        parse(net, text)
    }

    /// Canonical text form; parsing it yields the same pattern.
    pub fn to_spec_string(&self, net: &TradingNetwork) -> String {
        let mut never = Vec::new();
        let mut mixed = Vec::new();
        for (e, d) in self.edges.iter().enumerate() {
            match d {
                Disposition::Always => {}
                Disposition::Never => never.push(net.edge_label(e)),
                Disposition::Mixed(l) => mixed.push(format!("{}={}", net.edge_label(e), l)),
            }
        }
        if never.len() == self.edges.len() && !never.is_empty() {
            return "never".into();
        }
        let mut parts = vec!["always".to_string()];
        if !never.is_empty() {
            parts.push(format!("never:{}", never.join(",")));
        }
        if !mixed.is_empty() {
            parts.push(format!("mixed:{}", mixed.join(",")));
        }
        parts.join(";")
    }
}

fn parse(net: &TradingNetwork, text: &str) -> Result<PatternSpec> {
    let fail = |reason: String| Error::Pattern { input: text.to_string(), reason };
    let mut pattern = TradePattern::always(net);
    let mut auto = Vec::new();
    let clauses: Vec<&str> = text.split(';').map(str::trim).filter(|s| !s.is_empty()).collect();
    if clauses.is_empty() {
        return Err(fail("empty pattern".into()));
    }
    for clause in clauses {
        let (head, list) = match clause.split_once(':') {
            Some((h, l)) => (h.trim(), Some(l.trim())),
            None => (clause, None),
        };
        let items = || list.unwrap_or("").split(',').map(str::trim).filter(|s| !s.is_empty());
        let edge = |label: &str| net.edge_by_label(label).map_err(|_| fail(format!("unknown edge `{label}`")));
        match (head, list) {
            ("always", None) => pattern = TradePattern::always(net),
            ("never", None) => pattern = TradePattern::never(net),
            ("always" | "never", Some(_)) => {
                let d = if head == "always" { Disposition::Always } else { Disposition::Never };
                let mut any = false;
                for label in items() {
                    let e = edge(label)?;
                    pattern.edges[e] = d;
                    auto.retain(|&a| a != e);
                    any = true;
                }
                if !any {
                    return Err(fail(format!("`{head}:` needs at least one edge")));
                }
            }
            ("mixed", Some(_)) => {
                let mut any = false;
                for item in items() {
                    let (label, value) =
                        item.split_once('=').ok_or_else(|| fail(format!("`{item}` lacks `=<probability>`")))?;
                    let e = edge(label.trim())?;
                    let value = value.trim();
                    if value == "auto" {
                        pattern.edges[e] = Disposition::Mixed(0.5);
                        if !auto.contains(&e) {
                            auto.push(e);
                        }
                    } else {
                        let l: f64 = value.parse().map_err(|_| fail(format!("bad probability `{value}`")))?;
                        if !(l > 0.0 && l < 1.0) {
                            return Err(fail(format!("mixed probability {l} must lie strictly inside (0, 1)")));
                        }
                        pattern.edges[e] = Disposition::Mixed(l);
                        auto.retain(|&a| a != e);
                    }
                    any = true;
                }
                if !any {
                    return Err(fail("`mixed:` needs at least one edge".into()));
                }
            }
            _ => return Err(fail(format!("unrecognized clause `{clause}`"))),
        }
    }
    auto.sort_unstable();
    Ok(PatternSpec { pattern, auto })
}
