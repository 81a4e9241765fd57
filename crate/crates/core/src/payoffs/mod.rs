//! Stationary payoffs for a given state and trade-pattern support.
//!
//! Three evaluations share one assembly:
//! * [`Evaluation::Limit`]: the large-economy equations at the network's own patience;
//! * [`Evaluation::Finite`]: the `k`-th replicated economy, `N -> kN`, `delta -> delta^(1/k)`;
//! * [`Evaluation::Patient`]: the `delta -> 1` limit. Gap variables on active
//!   edges vanish there, so the profile stores their normalized rates
//!   `lim z / t` (same sign) while payoffs and inactive gaps are money amounts.

mod system;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dynamics::MarketState;
use crate::error::{Error, Result};
use crate::network::{BellmanCoefficients, TradingNetwork};
use crate::pattern::{Disposition, TradePattern};

pub(crate) use system::solve_system;

/// Default absolute tolerance on gap signs.
pub const SIGN_TOL: f64 = 1e-9;

/// Base time scale of the patience-limit extrapolation fallback.
pub const PATIENT_BASE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Evaluation {
    Limit,
    Finite { k: f64 },
    Patient,
}

impl fmt::Display for Evaluation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Evaluation::Limit => f.write_str("limit"),
            Evaluation::Finite { k } => write!(f, "finite(k={k})"),
            Evaluation::Patient => f.write_str("patient"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeSupport {
    /// Term kept, requires `z >= 0`.
    Active,
    /// Term dropped, requires `z <= 0`.
    Inactive,
    /// Term dropped and `z = 0` required; the trade probability is free.
    Pinned,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportAssignment(pub Vec<EdgeSupport>);

impl SupportAssignment {
    pub fn from_pattern(pattern: &TradePattern) -> SupportAssignment {
        SupportAssignment(
            pattern
                .edges
                .iter()
                .map(|d| match d {
                    Disposition::Always => EdgeSupport::Active,
                    Disposition::Never => EdgeSupport::Inactive,
                    Disposition::Mixed(_) => EdgeSupport::Pinned,
                })
                .collect(),
        )
    }

    fn weights(&self) -> Vec<f64> {
        self.0.iter().map(|s| if *s == EdgeSupport::Active { 1.0 } else { 0.0 }).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PayoffProfile {
    /// Per node, payoff without the good.
    pub u0: Vec<f64>,
    /// Per node, payoff holding the good.
    pub u1: Vec<f64>,
    /// Per edge surplus gap (see the module docs for the patient convention).
    pub z: Vec<f64>,
    pub evaluation: Evaluation,
    pub support: SupportAssignment,
    pub state: MarketState,
    /// Set when a patient profile came from two-point extrapolation.
    pub extrapolated: bool,
}

impl PayoffProfile {
    pub fn to_json(&self, net: &TradingNetwork) -> Value {
        let nodes: BTreeMap<_, _> = (0..net.nodes().len())
            .map(|v| (net.node_id(v).to_string(), json!({"u0": self.u0[v], "u1": self.u1[v]})))
            .collect();
        let edges: BTreeMap<_, _> = (0..net.edges().len())
            .map(|e| (net.edge_label(e), json!({"z": self.z[e], "support": self.support.0[e]})))
            .collect();
        let mu: BTreeMap<_, _> =
            net.middlemen().iter().zip(&self.state.mu).map(|(&m, &x)| (net.node_id(m).to_string(), x)).collect();
        json!({
            "evaluation": self.evaluation,
            "nodes": nodes,
            "edges": edges,
            "mu": mu,
            "degenerate": self.state.degenerate.iter().map(|&m| net.node_id(m)).collect::<Vec<_>>(),
            "extrapolated": self.extrapolated,
        })
    }
}

fn check_support(net: &TradingNetwork, state: &MarketState, support: &SupportAssignment) -> Result<()> {
    state.check(net)?;
    if support.0.len() != net.edges().len() {
        return Err(Error::Parameter(format!(
            "support has {} entries, network has {} edges",
            support.0.len(),
            net.edges().len()
        )));
    }
    Ok(())
}

fn profile(sol: system::Solution, evaluation: Evaluation, support: &SupportAssignment, state: &MarketState) -> PayoffProfile {
    PayoffProfile {
        u0: sol.u0,
        u1: sol.u1,
        z: sol.z,
        evaluation,
        support: support.clone(),
        state: state.clone(),
        extrapolated: false,
    }
}

/// Large-economy payoffs at the network's own patience.
pub fn solve_limit(net: &TradingNetwork, state: &MarketState, support: &SupportAssignment) -> Result<PayoffProfile> {
    check_support(net, state, support)?;
    let c = BellmanCoefficients::new(net)?;
    let sol = solve_system(net, state, &support.weights(), &c, 1.0 / c.timescale, 1.0, 1.0)?;
    Ok(profile(sol, Evaluation::Limit, support, state))
}

/// Payoffs of the `k`-th replicated economy; requires a discount factor.
pub fn solve_finite(
    net: &TradingNetwork,
    state: &MarketState,
    support: &SupportAssignment,
    k: f64,
) -> Result<PayoffProfile> {
    check_support(net, state, support)?;
    let c = BellmanCoefficients::finite(net, k)?;
    let sol = solve_system(net, state, &support.weights(), &c, 1.0 / c.timescale, 1.0, c.theta)?;
    Ok(profile(sol, Evaluation::Finite { k }, support, state))
}

/// Payoffs in the `delta -> 1` limit.
///
/// Solves the exact limit system in the rate variables; when the support
/// leaves it singular (routes of equal cost forming a cycle), falls back to
/// Richardson extrapolation of the limit solution at time scales
/// [`PATIENT_BASE`] and half of it.
pub fn solve_patient(net: &TradingNetwork, state: &MarketState, support: &SupportAssignment) -> Result<PayoffProfile> {
    check_support(net, state, support)?;
    let c = BellmanCoefficients::patient(net);
    let w = support.weights();
    match solve_system(net, state, &w, &c, 1.0, 0.0, 1.0) {
        Ok(sol) => Ok(profile(sol, Evaluation::Patient, support, state)),
        Err(Error::IndeterminateSupport { .. }) => {
            let t = PATIENT_BASE;
            let coarse = solve_system(net, state, &w, &c, 1.0 / t, 1.0, 1.0)?;
            let fine = solve_system(net, state, &w, &c, 2.0 / t, 1.0, 1.0)?;
            let mix = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| 2.0 * y - x).collect::<Vec<_>>();
            let z = (0..net.edges().len())
                .map(|e| {
                    if coarse.unknown[e] {
                        2.0 * fine.z[e] / (0.5 * t) - coarse.z[e] / t
                    } else {
                        2.0 * fine.z[e] - coarse.z[e]
                    }
                })
                .collect();
            let sol = system::Solution { u0: mix(&coarse.u0, &fine.u0), u1: mix(&coarse.u1, &fine.u1), z, unknown: fine.unknown };
            let mut p = profile(sol, Evaluation::Patient, support, state);
            p.extrapolated = true;
            Ok(p)
        }
        Err(e) => Err(e),
    }
}

pub fn solve(
    net: &TradingNetwork,
    state: &MarketState,
    support: &SupportAssignment,
    evaluation: Evaluation,
) -> Result<PayoffProfile> {
    match evaluation {
        Evaluation::Limit => solve_limit(net, state, support),
        Evaluation::Finite { k } => solve_finite(net, state, support, k),
        Evaluation::Patient => solve_patient(net, state, support),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SignViolation {
    pub edge: String,
    pub index: usize,
    pub support: EdgeSupport,
    pub z: f64,
}

impl fmt::Display for SignViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cond = match self.support {
            EdgeSupport::Active => "active edge needs z >= 0",
            EdgeSupport::Inactive => "inactive edge needs z <= 0",
            EdgeSupport::Pinned => "pinned edge needs z = 0",
        };
        write!(f, "edge {}: z = {:.6e} ({cond})", self.edge, self.z)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SignReport {
    pub tol: f64,
    pub violations: Vec<SignViolation>,
}

impl SignReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lists every gap whose sign contradicts its support.
pub fn check_signs(net: &TradingNetwork, profile: &PayoffProfile, support: &SupportAssignment, tol: f64) -> SignReport {
    let violations = support
        .0
        .iter()
        .enumerate()
        .filter(|&(e, s)| {
            let z = profile.z[e];
            match s {
                EdgeSupport::Active => z < -tol,
                EdgeSupport::Inactive => z > tol,
                EdgeSupport::Pinned => z.abs() > tol,
            }
        })
        .map(|(e, &s)| SignViolation { edge: net.edge_label(e), index: e, support: s, z: profile.z[e] })
        .collect();
    SignReport { tol, violations }
}
