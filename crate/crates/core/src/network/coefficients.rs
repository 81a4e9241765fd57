use serde::Serialize;

use super::{Patience, TradingNetwork};
use crate::error::{Error, Result};

/// `pi / (2 N ln(1/delta))`.
pub fn kappa(pi: f64, population: f64, delta: f64) -> f64 {
    pi / (2.0 * population * (1.0 / delta).ln())
}

/// Coefficients of the `max{z, 0}` terms in the payoff equations.
///
/// Every coefficient factors as `weight(e, v) / timescale`: the weight is
/// `pi_e / (2 N_v)` when a discount factor is given and `1` under uniform
/// patience, and the time scale is `ln(1/delta)`, `f`, or
/// `k (1 - delta^(1/k))` for the `k`-th replicated economy. In the patience
/// limit the time scale vanishes and only the weights remain meaningful.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BellmanCoefficients {
    /// Per edge, the weights seen from the `from` and the `to` endpoint.
    pub weights: Vec<[f64; 2]>,
    pub timescale: f64,
    /// Discount applied to payoff differences inside `z` (1 in the limit).
    pub theta: f64,
    /// Set when `delta -> 1`, where every coefficient diverges.
    pub patient_limit: bool,
}

impl BellmanCoefficients {
    /// Limit coefficients `kappa(e, v)` for the network's own patience.
    pub fn new(net: &TradingNetwork) -> Result<BellmanCoefficients> {
        let timescale = net.patience().timescale()?;
        Ok(BellmanCoefficients { weights: weights(net), timescale, theta: 1.0, patient_limit: false })
    }

    /// Coefficients of the `k`-th replicated economy: `N -> kN`, `delta -> delta^(1/k)`.
    pub fn finite(net: &TradingNetwork, k: f64) -> Result<BellmanCoefficients> {
        let delta = match net.patience() {
            Patience::Discount(d) => d,
            Patience::Uniform(_) => {
                return Err(Error::Parameter("finite-k payoffs need a discount factor, not `f`".into()))
            }
        };
        if !(k >= 1.0 && k.is_finite()) {
            return Err(Error::Parameter(format!("replication index k = {k} must be >= 1")));
        }
        let step = delta.ln() / k;
        Ok(BellmanCoefficients {
            weights: weights(net),
            timescale: -k * step.exp_m1(),
            theta: step.exp(),
            patient_limit: false,
        })
    }

    /// The `delta -> 1` limit: weights only, infinite coefficients.
    pub fn patient(net: &TradingNetwork) -> BellmanCoefficients {
        BellmanCoefficients { weights: weights(net), timescale: 0.0, theta: 1.0, patient_limit: true }
    }

    /// The coefficient of edge `e` in the equation of its `from` (`side = 0`) or
    /// `to` (`side = 1`) endpoint. Infinite in the patience limit.
    pub fn kappa(&self, e: usize, side: usize) -> f64 {
        if self.patient_limit {
            f64::INFINITY
        } else {
            self.weights[e][side] / self.timescale
        }
    }
}

fn weights(net: &TradingNetwork) -> Vec<[f64; 2]> {
    match net.patience() {
        Patience::Uniform(_) => vec![[1.0, 1.0]; net.edges().len()],
        Patience::Discount(_) => net
            .edges()
            .iter()
            .map(|l| {
                let n_from = net.nodes()[l.from].population;
                let n_to = net.nodes()[l.to].population;
                [l.pi / (2.0 * n_from), l.pi / (2.0 * n_to)]
            })
            .collect(),
    }
}
