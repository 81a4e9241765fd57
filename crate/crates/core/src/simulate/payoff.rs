//! Empirical discounted payoffs of tagged agents.
//!
//! A tagged agent of node `v` lives inside the aggregate inventory chain. When
//! an edge at `v` is drawn the agent is the matched member with probability
//! `1/(kN_v)`; the partner is feasible with the probability given by the
//! partner population's current holding fraction. A feasible pair trades with
//! the pattern's probability, each side proposing with probability 1/2. The
//! proposer pays the transaction cost and offers the responder exactly its
//! discounted payoff difference `delta'(u1 - u0)` from the finite-economy
//! profile. A consumer's purchase is worth `delta' V`; producers and consumers
//! leave after trading while middlemen are followed until `delta'^t < 1e-9`.

use rayon::prelude::*;
use serde::Serialize;

use super::{rng_for, Chain, InitialStock, SimConfig};
use crate::dynamics::steady_state;
use crate::error::{Error, Result};
use crate::network::{NodeClass, Patience, TradingNetwork};
use crate::pattern::TradePattern;
use crate::payoffs::{solve_finite, SupportAssignment};
use rand::Rng;

const CHUNK: usize = 250;
const WINDOW_WEIGHT: f64 = 1e-9;
const Z95: f64 = 1.959963984540054;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PayoffInterval {
    pub mean: f64,
    /// Half-width of the 95% confidence interval.
    pub half_width: f64,
    pub samples: usize,
}

impl PayoffInterval {
    pub fn contains(&self, x: f64) -> bool {
        (x - self.mean).abs() <= self.half_width
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodePayoffEstimate {
    pub id: String,
    /// Absent where the payoff is fixed (producers without the good).
    pub u0: Option<PayoffInterval>,
    /// Absent where the payoff is fixed (consumers holding the good).
    pub u1: Option<PayoffInterval>,
    pub analytic_u0: f64,
    pub analytic_u1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PayoffEstimate {
    pub nodes: Vec<NodePayoffEstimate>,
    /// Per-period discount factor `delta^(1/k)`.
    pub discount: f64,
    /// Periods a middleman is followed.
    pub window: u64,
}

struct Task {
    node: usize,
    holding: bool,
    agents: usize,
}

/// Estimates `u0`/`u1` of every node from `agents` tagged agents per
/// (node, holding state), with 95% confidence intervals.
pub fn estimate_payoffs(
    net: &TradingNetwork,
    pattern: &TradePattern,
    cfg: &SimConfig,
    agents: usize,
) -> Result<PayoffEstimate> {
    cfg.check()?;
    let delta = match net.patience() {
        Patience::Discount(d) => d,
        Patience::Uniform(_) => return Err(Error::Parameter("payoff estimation needs a discount factor, not `f`".into())),
    };
    if agents < 2 {
        return Err(Error::Parameter("at least two agents per node are needed".into()));
    }
    let chain = Chain::new(net, pattern, cfg.k, InitialStock::Steady)?;
    let state = steady_state(net, pattern);
    let profile = solve_finite(net, &state, &SupportAssignment::from_pattern(pattern), cfg.k as f64)?;
    let disc = delta.powf(1.0 / cfg.k as f64);
    let window = (WINDOW_WEIGHT.ln() / disc.ln()).ceil() as u64;
    let diff: Vec<f64> = (0..net.nodes().len()).map(|v| profile.u1[v] - profile.u0[v]).collect();
    let lambdas = pattern.lambdas();
    let pops = super::scaled_populations(net, cfg.k)?;

    let mut tasks = Vec::new();
    for v in 0..net.nodes().len() {
        let states: &[bool] = match net.class(v) {
            NodeClass::Producer => &[true],
            NodeClass::Consumer => &[false],
            NodeClass::Middleman => &[false, true],
        };
        for &holding in states {
            let mut left = agents;
            while left > 0 {
                let n = left.min(CHUNK);
                tasks.push(Task { node: v, holding, agents: n });
                left -= n;
            }
        }
    }

    let samples: Vec<Vec<f64>> = tasks
        .par_iter()
        .enumerate()
        .map(|(i, task)| {
            let mut rng = rng_for(cfg.seed, i as u64);
            let mut chain = chain.clone();
            for _ in 0..cfg.burn_in {
                chain.step(&mut rng);
            }
            let v = task.node;
            let class = net.class(v);
            let share = 1.0 / pops[v] as f64;
            let mut holding = vec![task.holding; task.agents];
            let mut alive = vec![true; task.agents];
            let mut total = vec![0.0; task.agents];
            let mut weight = 1.0;
            for _ in 0..window {
                let e = chain.pick(rng.random::<f64>());
                let l = &net.edges()[e];
                let side = if l.from == v {
                    Some(true)
                } else if l.to == v {
                    Some(false)
                } else {
                    None
                };
                if let Some(seller) = side {
                    let partner = if seller { l.to } else { l.from };
                    let partner_holds = match net.middleman_slot(partner) {
                        Some(s) => chain.fraction(s),
                        None => {
                            if net.class(partner) == NodeClass::Producer {
                                1.0
                            } else {
                                0.0
                            }
                        }
                    };
                    // Chance that the drawn partner can trade with a feasible tagged agent.
                    let partner_ok = if seller { 1.0 - partner_holds } else { partner_holds };
                    for a in 0..task.agents {
                        if !alive[a] || holding[a] != seller {
                            continue;
                        }
                        if rng.random::<f64>() >= share {
                            continue;
                        }
                        if rng.random::<f64>() >= partner_ok * lambdas[e] {
                            continue;
                        }
                        let proposes = rng.random::<bool>();
                        let flow = match (seller, proposes) {
                            (true, true) => disc * diff[l.to] - l.cost,
                            (true, false) => disc * diff[l.from],
                            (false, true) => -disc * diff[l.from] - l.cost,
                            (false, false) => -disc * diff[l.to],
                        };
                        total[a] += weight * flow;
                        match class {
                            NodeClass::Producer => alive[a] = false,
                            NodeClass::Consumer => {
                                total[a] += weight * disc * net.value(v);
                                alive[a] = false;
                            }
                            NodeClass::Middleman => holding[a] = !seller,
                        }
                    }
                }
                chain.step_edge(e, &mut rng);
                weight *= disc;
                if class != NodeClass::Middleman && !alive.iter().any(|&x| x) {
                    break;
                }
            }
            total
        })
        .collect();

    let mut nodes: Vec<NodePayoffEstimate> = (0..net.nodes().len())
        .map(|v| NodePayoffEstimate {
            id: net.node_id(v).to_string(),
            u0: None,
            u1: None,
            analytic_u0: profile.u0[v],
            analytic_u1: profile.u1[v],
        })
        .collect();
    let mut pooled: Vec<[Vec<f64>; 2]> = (0..net.nodes().len()).map(|_| [Vec::new(), Vec::new()]).collect();
    for (task, s) in tasks.iter().zip(samples) {
        pooled[task.node][task.holding as usize].extend(s);
    }
    for (v, [s0, s1]) in pooled.into_iter().enumerate() {
        nodes[v].u0 = interval(&s0);
        nodes[v].u1 = interval(&s1);
    }
    Ok(PayoffEstimate { nodes, discount: disc, window })
}

fn interval(xs: &[f64]) -> Option<PayoffInterval> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    Some(PayoffInterval { mean, half_width: Z95 * (var / n).sqrt(), samples: xs.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{network2, two_hop};

    #[test]
    fn zero_value_pays_nothing() {
        let net = two_hop(0.0, 0.0, 0.0, 0.5, 0.5).unwrap();
        let est = estimate_payoffs(&net, &TradePattern::always(&net), &SimConfig::new(5, 100, 1), 20).unwrap();
        for n in &est.nodes {
            for iv in [&n.u0, &n.u1].into_iter().flatten() {
                assert_eq!(iv.mean, 0.0);
            }
        }
    }

    #[test]
    fn uniform_patience_is_rejected() {
        let net = network2().with_patience(Patience::Uniform(0.5)).unwrap();
        let r = estimate_payoffs(&net, &TradePattern::always(&net), &SimConfig::new(5, 100, 1), 20);
        assert!(matches!(r, Err(Error::Parameter(_))));
    }
}
