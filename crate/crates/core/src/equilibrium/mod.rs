//! Limit stationary equilibria: verification of a given pattern, pure-pattern
//! enumeration, interior mixed roots, the two-hop closed form, a smoothed
//! fixed-point iteration and the cheapest-route check.

mod fixed_point;
mod mixed;
mod routes;
mod two_hop;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::dynamics::{balance_residual, steady_state_lambdas, MarketState};
use crate::error::{Error, Result};
use crate::network::TradingNetwork;
use crate::pattern::{Disposition, TradePattern};
use crate::payoffs::{check_signs, solve, EdgeSupport, Evaluation, PayoffProfile, SignReport, SupportAssignment, SIGN_TOL};

pub use fixed_point::{fixed_point_iterate, FixedPointConfig, FixedPointOutcome, FixedPointStart};
pub use mixed::solve_mixed;
pub use routes::{cheapest_route_check, PairRoutes, Route, RouteReport, PATIENT_THRESHOLD};
pub use two_hop::{two_hop_closed_form, Regime, TwoHopSolution};

/// Largest edge count [`enumerate_pure`] accepts.
pub const ENUMERATION_BUDGET: usize = 24;

/// Tolerance on the balance residual of a verified state.
pub const BALANCE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Verification,
    Enumeration,
    MixedRoot,
    FixedPoint,
    ClosedForm,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metadata {
    pub evaluation: Evaluation,
    pub sign_tol: f64,
    pub balance_tol: f64,
    pub iterations: Option<usize>,
    pub residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub pattern: TradePattern,
    pub state: MarketState,
    /// Absent when the payoff system had no unique solution.
    pub profile: Option<PayoffProfile>,
    pub verified: bool,
    pub violations: SignReport,
    pub method: Method,
    /// Active or inactive edges whose gap is zero within tolerance; both
    /// dispositions verify there.
    pub boundary: Vec<usize>,
    /// Largest absolute balance residual over non-degenerate middlemen.
    pub balance: f64,
    pub diagnostic: Option<String>,
    pub metadata: Metadata,
}

impl EquilibriumReport {
    pub fn profile(&self) -> &PayoffProfile {
        self.profile.as_ref().expect("report carries a profile")
    }

    pub fn to_json(&self, net: &TradingNetwork) -> Value {
        let pattern: BTreeMap<_, _> =
            self.pattern.edges.iter().enumerate().map(|(e, d)| (net.edge_label(e), *d)).collect();
        json!({
            "verified": self.verified,
            "method": self.method,
            "pattern": pattern,
            "pattern_spec": self.pattern.to_spec_string(net),
            "profile": self.profile.as_ref().map(|p| p.to_json(net)),
            "violations": self.violations,
            "boundary": self.boundary.iter().map(|&e| net.edge_label(e)).collect::<Vec<_>>(),
            "balance_residual": self.balance,
            "diagnostic": self.diagnostic,
            "metadata": self.metadata,
        })
    }
}

pub(crate) fn support_for(lambdas: &[f64], pinned: &[usize]) -> SupportAssignment {
    SupportAssignment(
        lambdas
            .iter()
            .enumerate()
            .map(|(e, &l)| {
                if pinned.contains(&e) || (l > 0.0 && l < 1.0) {
                    EdgeSupport::Pinned
                } else if l >= 1.0 {
                    EdgeSupport::Active
                } else {
                    EdgeSupport::Inactive
                }
            })
            .collect(),
    )
}

pub(crate) fn build_report(
    net: &TradingNetwork,
    pattern: TradePattern,
    evaluation: Evaluation,
    tol: f64,
    method: Method,
) -> Result<EquilibriumReport> {
    let lambdas = pattern.lambdas();
    let state = steady_state_lambdas(net, &lambdas);
    let balance = balance_residual(net, &pattern, &state)
        .iter()
        .zip(net.middlemen())
        .filter(|(_, m)| !state.is_degenerate(**m))
        .map(|(r, _)| r.abs())
        .fold(0.0, f64::max);
    let support = SupportAssignment::from_pattern(&pattern);
    let metadata = Metadata { evaluation, sign_tol: tol, balance_tol: BALANCE_TOL, iterations: None, residual: None };
    match solve(net, &state, &support, evaluation) {
        Ok(profile) => {
            let violations = check_signs(net, &profile, &support, tol);
            let boundary = (0..net.edges().len())
                .filter(|&e| support.0[e] != EdgeSupport::Pinned && profile.z[e].abs() <= tol)
                .collect();
            Ok(EquilibriumReport {
                verified: violations.is_ok() && balance <= BALANCE_TOL,
                pattern,
                state,
                profile: Some(profile),
                violations,
                method,
                boundary,
                balance,
                diagnostic: None,
                metadata,
            })
        }
        Err(err @ Error::IndeterminateSupport { .. }) => Ok(EquilibriumReport {
            pattern,
            state,
            profile: None,
            verified: false,
            violations: SignReport { tol, violations: vec![] },
            method,
            boundary: vec![],
            balance,
            diagnostic: Some(err.to_string()),
            metadata,
        }),
        Err(err) => Err(err),
    }
}

/// Checks a pattern in the large-economy limit at the network's own patience.
pub fn verify(net: &TradingNetwork, pattern: &TradePattern) -> Result<EquilibriumReport> {
    verify_with(net, pattern, Evaluation::Limit, SIGN_TOL)
}

/// Computes the steady state of the pattern, solves the payoffs under its
/// support and checks every gap sign.
pub fn verify_with(net: &TradingNetwork, pattern: &TradePattern, evaluation: Evaluation, tol: f64) -> Result<EquilibriumReport> {
    if pattern.edges.len() != net.edges().len() {
        return Err(Error::Parameter(format!(
            "pattern has {} edges, network has {}",
            pattern.edges.len(),
            net.edges().len()
        )));
    }
    build_report(net, pattern.clone(), evaluation, tol, Method::Verification)
}

/// The pattern with index `mask` in enumeration order: the first edge is the
/// most significant digit and Always sorts before Never.
fn pure_pattern(edges: usize, mask: u64) -> TradePattern {
    TradePattern {
        edges: (0..edges)
            .map(|e| if mask >> (edges - 1 - e) & 1 == 0 { Disposition::Always } else { Disposition::Never })
            .collect(),
    }
}

/// Every verified pattern in `{Always, Never}^E`, in lexicographic order of
/// the canonical edge list.
pub fn enumerate_pure(net: &TradingNetwork, evaluation: Evaluation) -> Result<Vec<EquilibriumReport>> {
    let n = net.edges().len();
    if n > ENUMERATION_BUDGET {
        return Err(Error::Budget { edges: n, limit: ENUMERATION_BUDGET });
    }
    let found: Vec<Result<Option<EquilibriumReport>>> = (0..1u64 << n)
        .into_par_iter()
        .map(|mask| {
            let r = build_report(net, pure_pattern(n, mask), evaluation, SIGN_TOL, Method::Enumeration)?;
            Ok(r.verified.then_some(r))
        })
        .collect();
    found.into_iter().filter_map(|r| r.transpose()).collect()
}
