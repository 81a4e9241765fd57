//! Reference networks. All use unit populations and `delta = 0.9` unless
//! parameterized; callers switch patience with [`TradingNetwork::with_patience`].

use super::{Edge, NetworkFile, Node, NodeClass, TradingNetwork};
use crate::error::{Error, Result};

pub const BUILTIN_NAMES: [&str; 4] = ["network2", "triangle-halfcost", "two-hop(a,b,V,pi12,pi23)", "surplus-triangle(x)"];

const DEFAULT_DISCOUNT: f64 = 0.9;

fn node(id: &str, class: NodeClass, value: Option<f64>) -> Node {
    Node { id: id.into(), class, population: 1.0, value }
}

fn edge(from: &str, to: &str, cost: f64, pi: f64) -> Edge {
    Edge { from: from.into(), to: to.into(), cost, pi }
}

fn file(nodes: Vec<Node>, edges: Vec<Edge>) -> NetworkFile {
    NetworkFile { nodes, edges, discount: Some(DEFAULT_DISCOUNT), f: None }
}

/// Two producers, two middlemen, two consumers; six zero-cost edges, unit values.
pub fn network2() -> TradingNetwork {
    use NodeClass::*;
    let pi = 1.0 / 6.0;
    file(
        vec![
            node("1", Producer, None),
            node("2", Producer, None),
            node("3", Middleman, None),
            node("4", Middleman, None),
            node("5", Consumer, Some(1.0)),
            node("6", Consumer, Some(1.0)),
        ],
        ["1-3", "1-4", "2-4", "3-5", "3-6", "4-6"]
            .iter()
            .map(|s| {
                let (a, b) = s.split_once('-').unwrap();
                edge(a, b, 0.0, pi)
            })
            .collect(),
    )
    .build()
    .expect("network2 is valid")
}

/// Producer 1, consumer 2, middleman 3. The direct edge costs 1/2, the route
/// through the middleman is free.
pub fn triangle_halfcost() -> TradingNetwork {
    use NodeClass::*;
    let pi = 1.0 / 3.0;
    file(
        vec![node("1", Producer, None), node("2", Consumer, Some(1.0)), node("3", Middleman, None)],
        vec![edge("1", "2", 0.5, pi), edge("1", "3", 0.0, pi), edge("3", "2", 0.0, pi)],
    )
    .build()
    .expect("triangle is valid")
}

/// Producer 1, middleman 2, consumer 3 with costs `a` on (1,2) and `b` on (2,3).
pub fn two_hop(a: f64, b: f64, value: f64, pi12: f64, pi23: f64) -> Result<TradingNetwork> {
    use NodeClass::*;
    file(
        vec![node("1", Producer, None), node("2", Middleman, None), node("3", Consumer, Some(value))],
        vec![edge("1", "2", a, pi12), edge("2", "3", b, pi23)],
    )
    .build()
}

/// Producer 1, consumer 2 (value 4), middleman 3; `C12 = 3`, `C32 = 0`, `C13 = 4 - x`.
pub fn surplus_triangle(x: f64) -> Result<TradingNetwork> {
    use NodeClass::*;
    let pi = 1.0 / 3.0;
    file(
        vec![node("1", Producer, None), node("2", Consumer, Some(4.0)), node("3", Middleman, None)],
        vec![edge("1", "2", 3.0, pi), edge("1", "3", 4.0 - x, pi), edge("3", "2", 0.0, pi)],
    )
    .build()
}

/// Resolves a builtin by name: `network2`, `triangle-halfcost`,
/// `two-hop(a,b,V,pi12,pi23)` (bare `two-hop` means `two-hop(0,0,1,0.5,0.5)`)
/// and `surplus-triangle(x)`.
pub fn builtin(name: &str) -> Result<TradingNetwork> {
    let name = name.trim();
    let unknown = || Error::UnknownBuiltin(name.to_string());
    let (head, args) = match name.split_once('(') {
        Some((head, rest)) => {
            let inner = rest.strip_suffix(')').ok_or_else(unknown)?;
            let args = inner
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| unknown())?;
            (head.trim(), Some(args))
        }
        None => (name, None),
    };
    match (head, args.as_deref()) {
        ("network2", None) => Ok(network2()),
        ("triangle-halfcost", None) => Ok(triangle_halfcost()),
        ("two-hop", None) => two_hop(0.0, 0.0, 1.0, 0.5, 0.5),
        ("two-hop", Some(&[a, b, v, p12, p23])) => two_hop(a, b, v, p12, p23),
        ("surplus-triangle", Some(&[x])) => surplus_triangle(x),
        _ => Err(unknown()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn network2_matches_figure() {
        let net = network2();
        assert_eq!(net.nodes().len(), 6);
        let labels: Vec<_> = (0..6).map(|e| net.edge_label(e)).collect();
        assert_eq!(labels, ["1-3", "1-4", "2-4", "3-5", "3-6", "4-6"]);
        assert!(net.edges().iter().all(|l| l.cost == 0.0));
        assert_eq!(net.middlemen().len(), 2);
    }

    #[test]
    fn surplus_triangle_costs() {
        let net = surplus_triangle(2.0).unwrap();
        let cost = |a, b| net.edges()[net.edge(a, b).unwrap()].cost;
        assert_eq!(cost("1", "2"), 3.0);
        assert_eq!(cost("3", "2"), 0.0);
        assert_eq!(cost("1", "3"), 2.0);
        assert_eq!(net.value(net.node("2").unwrap()), 4.0);
    }

    #[test]
    fn names_resolve() {
        for name in ["network2", "triangle-halfcost", "two-hop", "two-hop(0.6, 0.2, 1, 0.5, 0.5)", "surplus-triangle(1.5)"] {
            let net = builtin(name).unwrap();
            assert!(net.to_file().validate().is_ok(), "{name}");
        }
        assert!(matches!(builtin("pentagon"), Err(Error::UnknownBuiltin(_))));
        assert!(matches!(builtin("two-hop(1,2)"), Err(Error::UnknownBuiltin(_))));
    }
}
