//! One-parameter sweeps producing one CSV row per equilibrium per grid point.
//!
//! Column order: `param, eq_id, status, method, pattern`, then `u0_<node>` and
//! `u1_<node>` for every node, `z_<edge>` and `lambda_<edge>` for every edge,
//! and `mu_<middleman>`. Nodes and edges follow the network's canonical order.

use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::equilibrium::{enumerate_pure, solve_mixed, two_hop_closed_form, verify_with, EquilibriumReport, Method};
use crate::error::{Error, Result};
use crate::network::{NodeClass, Patience, TradingNetwork};
use crate::pattern::{Disposition, TradePattern};
use crate::payoffs::{Evaluation, SIGN_TOL};

/// Largest edge count for the single-mixed-edge search.
pub const MIXED_SEARCH_BUDGET: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum SweepParameter {
    F,
    Delta,
    EdgeCost(String),
    ConsumerValue(String),
    /// Sets the cost of edge 1-3 to `4 - x`.
    X,
}

impl FromStr for SweepParameter {
    type Err = Error;

    /// `f`, `delta`, `x`, `edge-cost:<from-to>`, `consumer-value:<node>`.
    fn from_str(s: &str) -> Result<SweepParameter> {
        match s.split_once(':') {
            None => match s {
                "f" => Ok(SweepParameter::F),
                "delta" => Ok(SweepParameter::Delta),
                "x" => Ok(SweepParameter::X),
                _ => Err(Error::Parameter(format!("unknown sweep parameter `{s}`"))),
            },
            Some(("edge-cost", e)) => Ok(SweepParameter::EdgeCost(e.trim().to_string())),
            Some(("consumer-value", v)) => Ok(SweepParameter::ConsumerValue(v.trim().to_string())),
            Some(_) => Err(Error::Parameter(format!("unknown sweep parameter `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum SweepTask {
    Verify(String),
    Enumerate { single_mixed: bool },
    TwoHop,
    Mixed { base: String, edges: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub grid: Vec<f64>,
    pub task: SweepTask,
    pub evaluation: Evaluation,
}

impl SweepSpec {
    pub fn check(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Parameter("sweep grid is empty".into()));
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) || self.grid.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parameter("sweep grid must be finite and strictly ascending".into()));
        }
        Ok(())
    }
}

/// Parses `start:stop:step` or a comma-separated list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::Parameter(format!("cannot parse grid `{text}`"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let v: Vec<f64> = parts.iter().map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?;
        let (start, stop, step) = (v[0], v[1], v[2]);
        if !(step > 0.0) || stop < start {
            return Err(bad());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| start + i as f64 * step).collect());
    }
    text.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: f64,
    pub eq_id: Option<usize>,
    /// `verified`, `rejected` or `none-found`.
    pub status: String,
    pub method: String,
    pub pattern: String,
    pub u0: Vec<f64>,
    pub u1: Vec<f64>,
    pub z: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
}

impl SweepRow {
    fn none_found(param: f64, note: &str) -> SweepRow {
        SweepRow {
            param,
            eq_id: None,
            status: "none-found".into(),
            method: note.into(),
            pattern: String::new(),
            u0: vec![],
            u1: vec![],
            z: vec![],
            lambda: vec![],
            mu: vec![],
        }
    }

    fn from_report(net: &TradingNetwork, param: f64, id: usize, r: &EquilibriumReport) -> SweepRow {
        let method = serde_json::to_value(r.method).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        let (u0, u1, z) = match &r.profile {
            Some(p) => (p.u0.clone(), p.u1.clone(), p.z.clone()),
            None => (vec![], vec![], vec![]),
        };
        SweepRow {
            param,
            eq_id: Some(id),
            status: if r.verified { "verified" } else { "rejected" }.into(),
            method,
            pattern: r.pattern.to_spec_string(net),
            u0,
            u1,
            z,
            lambda: r.pattern.lambdas(),
            mu: r.state.mu.clone(),
        }
    }
}

/// The network with the swept parameter set to `value`.
pub fn apply_parameter(net: &TradingNetwork, parameter: &SweepParameter, value: f64) -> Result<TradingNetwork> {
    let mut file = net.to_file();
    match parameter {
        SweepParameter::F => file.set_patience(Patience::Uniform(value)),
        SweepParameter::Delta => file.set_patience(Patience::Discount(value)),
        SweepParameter::EdgeCost(_) | SweepParameter::X => {
            let label = match parameter {
                SweepParameter::EdgeCost(label) => label.as_str(),
                _ => "1-3",
            };
            let e = net.edge_by_label(label)?;
            let (from, to) = (net.node_id(net.edges()[e].from), net.node_id(net.edges()[e].to));
            let edge = file.edges.iter_mut().find(|x| x.from == from && x.to == to).expect("edge exists");
            edge.cost = if *parameter == SweepParameter::X { 4.0 - value } else { value };
        }
        SweepParameter::ConsumerValue(id) => {
            let node = file
                .nodes
                .iter_mut()
                .find(|n| &n.id == id && n.class == NodeClass::Consumer)
                .ok_or_else(|| Error::Parameter(format!("no consumer `{id}`")))?;
            node.value = Some(value);
        }
    }
    file.build()
}

/// Verified equilibria with one mixed edge: every edge against every pure
/// disposition of the others.
pub fn single_mixed_equilibria(net: &TradingNetwork, evaluation: Evaluation) -> Result<Vec<EquilibriumReport>> {
    let n = net.edges().len();
    if n > MIXED_SEARCH_BUDGET {
        return Err(Error::Budget { edges: n, limit: MIXED_SEARCH_BUDGET });
    }
    let jobs: Vec<(usize, u64)> = (0..n).flat_map(|e| (0..1u64 << (n - 1)).map(move |m| (e, m))).collect();
    let found: Vec<Option<EquilibriumReport>> = jobs
        .par_iter()
        .map(|&(e, mask)| {
            let others: Vec<usize> = (0..n).filter(|&x| x != e).collect();
            let mut base = TradePattern::always(net);
            for (bit, &x) in others.iter().enumerate() {
                if mask >> (others.len() - 1 - bit) & 1 == 1 {
                    base.edges[x] = Disposition::Never;
                }
            }
            base.edges[e] = Disposition::Mixed(0.5);
            match solve_mixed(net, &base, &[e], evaluation) {
                Ok(r) if r.verified => Some(r),
                _ => None,
            }
        })
        .collect();
    Ok(found.into_iter().flatten().collect())
}

fn same_equilibrium(a: &EquilibriumReport, b: &EquilibriumReport) -> bool {
    a.pattern.edges.len() == b.pattern.edges.len()
        && a.pattern.edges.iter().zip(&b.pattern.edges).all(|(x, y)| match (x, y) {
            (Disposition::Mixed(p), Disposition::Mixed(q)) => (p - q).abs() < 1e-7,
            _ => x == y,
        })
}

fn closed_form_row(net: &TradingNetwork, param: f64) -> Result<SweepRow> {
    let shape = net.nodes().len() == 3
        && net.edges().len() == 2
        && net.edge("1", "2").is_some()
        && net.edge("2", "3").is_some()
        && net.class(net.node("2").unwrap()) == NodeClass::Middleman;
    if !shape {
        return Err(Error::Parameter("closed form needs the two-hop chain 1 -> 2 -> 3".into()));
    }
    let (e12, e23) = (net.edge("1", "2").unwrap(), net.edge("2", "3").unwrap());
    let l = net.edges();
    let v3 = net.node("3").unwrap();
    let s = two_hop_closed_form(l[e12].cost, l[e23].cost, net.value(v3), l[e12].pi, l[e23].pi)?;
    let mut u0 = vec![0.0; 3];
    let mut u1 = vec![0.0; 3];
    let (n1, n2) = (net.node("1").unwrap(), net.node("2").unwrap());
    u1[n1] = s.u1_1;
    u0[n2] = s.u0_2;
    u1[n2] = s.u1_2;
    u0[v3] = s.u0_3;
    u1[v3] = net.value(v3);
    let mut lambda = vec![0.0; 2];
    lambda[e12] = s.lambda12;
    lambda[e23] = s.lambda23;
    let pattern = TradePattern::from_lambdas(&lambda).to_spec_string(net);
    Ok(SweepRow {
        param,
        eq_id: Some(0),
        status: "verified".into(),
        method: "closed-form".into(),
        pattern,
        u0,
        u1,
        z: vec![f64::NAN; 2],
        lambda,
        mu: vec![s.mu2],
    })
}

fn point(net: &TradingNetwork, spec: &SweepSpec, param: f64) -> Result<Vec<SweepRow>> {
    let net = apply_parameter(net, &spec.parameter, param)?;
    let eval = spec.evaluation;
    let reports: Vec<EquilibriumReport> = match &spec.task {
        SweepTask::Verify(text) => {
            let p = TradePattern::parse(&net, text)?.pattern;
            vec![verify_with(&net, &p, eval, SIGN_TOL)?]
        }
        SweepTask::Enumerate { single_mixed } => {
            let mut all = enumerate_pure(&net, eval)?;
            if *single_mixed {
                for r in single_mixed_equilibria(&net, eval)? {
                    if !all.iter().any(|x| same_equilibrium(x, &r)) {
                        all.push(r);
                    }
                }
            }
            all
        }
        SweepTask::TwoHop => {
            return Ok(vec![match closed_form_row(&net, param) {
                Ok(row) => row,
                Err(Error::Domain(_)) => SweepRow::none_found(param, "closed-form"),
                Err(e) => return Err(e),
            }])
        }
        SweepTask::Mixed { base, edges } => {
            let base = TradePattern::parse(&net, base)?.pattern;
            let idx = edges.iter().map(|l| net.edge_by_label(l)).collect::<Result<Vec<_>>>()?;
            match solve_mixed(&net, &base, &idx, eval) {
                Ok(r) if r.verified => vec![r],
                Ok(_) | Err(Error::NoInteriorMixed(_)) => vec![],
                Err(e) => return Err(e),
            }
        }
    };
    if reports.is_empty() {
        let note = match spec.task {
            SweepTask::Mixed { .. } => Method::MixedRoot,
            _ => Method::Enumeration,
        };
        let note = serde_json::to_value(note).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        return Ok(vec![SweepRow::none_found(param, &note)]);
    }
    Ok(reports.iter().enumerate().map(|(i, r)| SweepRow::from_report(&net, param, i, r)).collect())
}

/// Runs the task at every grid point; rows come back in grid order.
pub fn run_sweep(net: &TradingNetwork, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.check()?;
    let per_point: Vec<Result<Vec<SweepRow>>> = spec.grid.par_iter().map(|&x| point(net, spec, x)).collect();
    let mut rows = Vec::new();
    for r in per_point {
        rows.extend(r?);
    }
    Ok(rows)
}

pub fn sweep_header(net: &TradingNetwork) -> Vec<String> {
    let mut h: Vec<String> = ["param", "eq_id", "status", "method", "pattern"].iter().map(|s| s.to_string()).collect();
    let ids: Vec<&str> = (0..net.nodes().len()).map(|v| net.node_id(v)).collect();
    let labels: Vec<String> = (0..net.edges().len()).map(|e| net.edge_label(e)).collect();
    h.extend(ids.iter().map(|id| format!("u0_{id}")));
    h.extend(ids.iter().map(|id| format!("u1_{id}")));
    h.extend(labels.iter().map(|l| format!("z_{l}")));
    h.extend(labels.iter().map(|l| format!("lambda_{l}")));
    h.extend(net.middlemen().iter().map(|&m| format!("mu_{}", net.node_id(m))));
    h
}

pub fn write_sweep_csv<W: std::io::Write>(net: &TradingNetwork, rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(sweep_header(net)).map_err(io)?;
    let nv = net.nodes().len();
    let ne = net.edges().len();
    let nm = net.middlemen().len();
    let num = |xs: &[f64], n: usize| -> Vec<String> {
        if xs.is_empty() {
            vec![String::new(); n]
        } else {
            xs.iter().map(|x| if x.is_finite() { x.to_string() } else { String::new() }).collect()
        }
    };
    for r in rows {
        let mut rec = vec![
            r.param.to_string(),
            r.eq_id.map(|i| i.to_string()).unwrap_or_default(),
            r.status.clone(),
            r.method.clone(),
            r.pattern.clone(),
        ];
        rec.extend(num(&r.u0, nv));
        rec.extend(num(&r.u1, nv));
        rec.extend(num(&r.z, ne));
        rec.extend(num(&r.lambda, ne));
        rec.extend(num(&r.mu, nm));
        w.write_record(rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn sweep_csv(net: &TradingNetwork, rows: &[SweepRow]) -> String {
    let mut buf = Vec::new();
    write_sweep_csv(net, rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{network2, surplus_triangle, two_hop};

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0.5,1.2,2").unwrap(), vec![0.5, 1.2, 2.0]);
        let g = parse_grid("0.2:2.0:0.1").unwrap();
        assert_eq!(g.len(), 19);
        assert!((g[18] - 2.0).abs() < 1e-12);
        assert!(parse_grid("a,b").is_err());
        let spec = SweepSpec {
            parameter: SweepParameter::F,
            grid: vec![1.0, 0.5],
            task: SweepTask::Enumerate { single_mixed: false },
            evaluation: Evaluation::Limit,
        };
        assert!(spec.check().is_err());
    }

    #[test]
    fn parameters_parse_and_apply() {
        assert_eq!("edge-cost:1-3".parse::<SweepParameter>().unwrap(), SweepParameter::EdgeCost("1-3".into()));
        assert!("colour".parse::<SweepParameter>().is_err());
        let net = surplus_triangle(0.0).unwrap();
        let at = apply_parameter(&net, &SweepParameter::X, 2.5).unwrap();
        assert_eq!(at.edges()[at.edge("1", "3").unwrap()].cost, 1.5);
        let at = apply_parameter(&net, &SweepParameter::ConsumerValue("2".into()), 5.0).unwrap();
        assert_eq!(at.value(at.node("2").unwrap()), 5.0);
    }

    #[test]
    fn network2_rows() {
        let spec = SweepSpec {
            parameter: SweepParameter::F,
            grid: vec![0.2, 0.5],
            task: SweepTask::Enumerate { single_mixed: false },
            evaluation: Evaluation::Limit,
        };
        let net = network2();
        let rows = run_sweep(&net, &spec).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].pattern, "always;never:1-4");
        assert_eq!(rows[1].pattern, "always");
        let csv = sweep_csv(&net, &rows);
        let header = csv.lines().next().unwrap();
        assert!(header.starts_with("param,eq_id,status,method,pattern,u0_1,"));
        assert!(header.ends_with("lambda_4-6,mu_3,mu_4"));
    }

    #[test]
    fn none_found_rows_are_kept() {
        let spec = SweepSpec {
            parameter: SweepParameter::F,
            grid: vec![0.4],
            task: SweepTask::Enumerate { single_mixed: false },
            evaluation: Evaluation::Limit,
        };
        let rows = run_sweep(&network2(), &spec).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].status, "none-found");
    }

    #[test]
    fn closed_form_rows() {
        let spec = SweepSpec {
            parameter: SweepParameter::ConsumerValue("3".into()),
            grid: vec![0.5, 1.0],
            task: SweepTask::TwoHop,
            evaluation: Evaluation::Patient,
        };
        let rows = run_sweep(&two_hop(0.6, 0.2, 1.0, 0.5, 0.5).unwrap(), &spec).unwrap();
        assert_eq!(rows[0].status, "none-found");
        assert!((rows[1].lambda[0] - 0.5).abs() < 1e-12);
    }
}
