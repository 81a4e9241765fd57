use serde::Serialize;

use super::EquilibriumReport;
use crate::network::{NodeClass, TradingNetwork};
use crate::payoffs::Evaluation;

/// Default bound on the effective patience parameter below which the
/// network counts as patient.
pub const PATIENT_THRESHOLD: f64 = 0.1;

/// Surplus-bound slack per unit of effective patience parameter.
const EPS_PER_F: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Route {
    /// Node ids along the route.
    pub path: Vec<String>,
    pub cost: f64,
    /// Every edge of the route trades with positive probability.
    pub traded: bool,
    /// Traded although a cheaper route exists.
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairRoutes {
    pub producer: String,
    pub consumer: String,
    pub routes: Vec<Route>,
    pub min_cost: f64,
    /// `u1(p) + u0(c)`.
    pub surplus: f64,
    /// `V_c - min_cost - eps`.
    pub bound: f64,
    pub bound_holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RouteReport {
    pub pairs: Vec<PairRoutes>,
    /// Largest `1/kappa` over edge endpoints; 0 in the patience limit.
    pub effective_f: f64,
    pub patient_regime: bool,
    pub eps: f64,
}

impl RouteReport {
    pub fn flags(&self) -> impl Iterator<Item = (&PairRoutes, &Route)> {
        self.pairs.iter().flat_map(|p| p.routes.iter().filter(|r| r.flagged).map(move |r| (p, r)))
    }

    pub fn clean(&self) -> bool {
        self.flags().next().is_none() && self.pairs.iter().all(|p| p.bound_holds)
    }
}

/// Lists every producer-consumer route, flags traded routes that are not of
/// minimum cost and evaluates the surplus bound `u1(p) + u0(c) >= V_c - min cost - eps`.
/// `eps` defaults to ten times the effective patience parameter.
pub fn cheapest_route_check(net: &TradingNetwork, report: &EquilibriumReport, eps: Option<f64>) -> RouteReport {
    let effective_f = match report.metadata.evaluation {
        Evaluation::Patient => 0.0,
        _ => crate::network::BellmanCoefficients::new(net)
            .map(|c| {
                (0..net.edges().len())
                    .flat_map(|e| [c.kappa(e, 0), c.kappa(e, 1)])
                    .filter(|k| *k > 0.0)
                    .map(|k| 1.0 / k)
                    .fold(0.0, f64::max)
            })
            .unwrap_or(f64::INFINITY),
    };
    let eps = eps.unwrap_or(EPS_PER_F * effective_f);
    let lambdas = report.pattern.lambdas();
    let traded = |e: usize| lambdas[e] > 0.0;
    let n = net.nodes().len();
    let mut pairs = Vec::new();
    for p in (0..n).filter(|&v| net.class(v) == NodeClass::Producer) {
        for c in (0..n).filter(|&v| net.class(v) == NodeClass::Consumer) {
            let mut routes = Vec::new();
            if let Some(e) = net.edge(net.node_id(p), net.node_id(c)) {
                routes.push(Route {
                    path: vec![net.node_id(p).into(), net.node_id(c).into()],
                    cost: net.edges()[e].cost,
                    traded: traded(e),
                    flagged: false,
                });
            }
            for &m in net.middlemen() {
                let first = net.edge(net.node_id(p), net.node_id(m));
                let second = net.edge(net.node_id(m), net.node_id(c));
                if let (Some(a), Some(b)) = (first, second) {
                    routes.push(Route {
                        path: vec![net.node_id(p).into(), net.node_id(m).into(), net.node_id(c).into()],
                        cost: net.edges()[a].cost + net.edges()[b].cost,
                        traded: traded(a) && traded(b),
                        flagged: false,
                    });
                }
            }
            if routes.is_empty() {
                continue;
            }
            let min_cost = routes.iter().map(|r| r.cost).fold(f64::INFINITY, f64::min);
            for r in &mut routes {
                r.flagged = r.traded && r.cost > min_cost + 1e-12;
            }
            let (surplus, bound) = match &report.profile {
                Some(prof) => (prof.u1[p] + prof.u0[c], net.value(c) - min_cost - eps),
                None => (f64::NAN, f64::NAN),
            };
            pairs.push(PairRoutes {
                producer: net.node_id(p).into(),
                consumer: net.node_id(c).into(),
                routes,
                min_cost,
                surplus,
                bound,
                bound_holds: surplus >= bound,
            });
        }
    }
    RouteReport { pairs, effective_f, patient_regime: effective_f <= PATIENT_THRESHOLD, eps }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::verify;
    use crate::network::{triangle_halfcost, two_hop, Patience};
    use crate::pattern::TradePattern;

    #[test]
    fn patient_triangle_avoids_direct_edge() {
        let net = triangle_halfcost().with_patience(Patience::Uniform(0.1)).unwrap();
        let r = verify(&net, &TradePattern::avoiding(&net, &["1-2"]).unwrap()).unwrap();
        assert!(r.verified);
        let routes = cheapest_route_check(&net, &r, None);
        assert!(routes.patient_regime);
        assert!(routes.clean(), "{routes:?}");
        assert_eq!(routes.pairs[0].min_cost, 0.0);
    }

    #[test]
    fn impatient_triangle_flags_direct_edge() {
        let net = triangle_halfcost().with_patience(Patience::Uniform(1.0)).unwrap();
        let r = verify(&net, &TradePattern::always(&net)).unwrap();
        assert!(r.verified);
        let routes = cheapest_route_check(&net, &r, None);
        let flags: Vec<_> = routes.flags().map(|(_, r)| r.path.join("-")).collect();
        assert_eq!(flags, vec!["1-2"]);
        assert!(!routes.patient_regime);
    }

    #[test]
    fn single_route_is_never_flagged() {
        let net = two_hop(0.1, 0.1, 1.0, 0.5, 0.5).unwrap();
        let r = verify(&net, &TradePattern::always(&net)).unwrap();
        assert_eq!(cheapest_route_check(&net, &r, None).flags().count(), 0);
    }
}
