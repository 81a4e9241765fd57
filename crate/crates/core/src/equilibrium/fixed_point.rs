//! Damped iteration of the map `(lambda, mu, u) -> (Lambda, mu', u')`.
//!
//! `Lambda` is a logistic smoothing of the sign of each gap with an annealed
//! temperature, `mu'` the steady state of the current probabilities, and `u'`
//! the payoffs solving the probability-weighted payoff equations at the
//! current state. Evaluating the payoff equations once per step instead of
//! solving them diverges at moderate patience, so the solve is used.

use serde::Serialize;

use super::{build_report, solve_mixed, EquilibriumReport, Method};
use crate::dynamics::{steady_state_lambdas, MarketState};
use crate::error::{Error, Result};
use crate::network::{BellmanCoefficients, TradingNetwork};
use crate::pattern::TradePattern;
use crate::payoffs::{solve_system, Evaluation, SIGN_TOL};

/// Time scale at which patient runs iterate; the smoothed gaps need to stay
/// well above the temperature floor.
const PATIENT_SCALE: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FixedPointConfig {
    pub damping: f64,
    pub max_iters: usize,
    pub tau_start: f64,
    pub tau_min: f64,
    pub anneal_every: usize,
    pub anneal_factor: f64,
    pub tol: f64,
    /// Probabilities within this distance of 0 or 1 are read as pure.
    pub pure_tol: f64,
    /// Evaluation used for the final exact check.
    pub evaluation: Evaluation,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig {
            damping: 0.5,
            max_iters: 100_000,
            tau_start: 0.1,
            tau_min: 1e-6,
            anneal_every: 100,
            anneal_factor: 0.5,
            tol: 1e-8,
            pure_tol: 1e-6,
            evaluation: Evaluation::Limit,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixedPointStart {
    pub lambda: Vec<f64>,
    /// Defaults to the steady state of `lambda`.
    pub mu: Option<Vec<f64>>,
    /// `(u0, u1)` per node; defaults to the payoffs solved at `lambda`.
    pub u: Option<(Vec<f64>, Vec<f64>)>,
}

impl FixedPointStart {
    pub fn uniform(net: &TradingNetwork, lambda: f64) -> FixedPointStart {
        FixedPointStart { lambda: vec![lambda; net.edges().len()], mu: None, u: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FixedPointOutcome {
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub tau: f64,
    /// Residual every `anneal_every` iterations.
    pub history: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    /// Every iterate stayed in `[0,1]^E x [0,1]^M x [0, max V]^(2|V|)`.
    pub in_domain: bool,
    /// Exact check of the rounded pattern; present only after convergence.
    pub report: Option<EquilibriumReport>,
    pub diagnostic: Option<String>,
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn fixed_point_iterate(net: &TradingNetwork, start: &FixedPointStart, cfg: &FixedPointConfig) -> Result<FixedPointOutcome> {
    let n = net.edges().len();
    let nv = net.nodes().len();
    if !(cfg.damping > 0.0 && cfg.damping <= 1.0) {
        return Err(Error::Parameter(format!("damping {} outside (0, 1]", cfg.damping)));
    }
    if start.lambda.len() != n || start.lambda.iter().any(|l| !(0.0..=1.0).contains(l)) {
        return Err(Error::Parameter("initial probabilities must be one per edge in [0, 1]".into()));
    }
    let (coefs, scale) = match cfg.evaluation {
        Evaluation::Limit => {
            let c = BellmanCoefficients::new(net)?;
            let s = 1.0 / c.timescale;
            (c, s)
        }
        Evaluation::Finite { k } => {
            let c = BellmanCoefficients::finite(net, k)?;
            let s = 1.0 / c.timescale;
            (c, s)
        }
        Evaluation::Patient => (BellmanCoefficients::patient(net), 1.0 / PATIENT_SCALE),
    };
    let theta = coefs.theta;
    let vmax = net.max_value();

    let payoffs = |lambda: &[f64], mu: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
        let state = MarketState { mu: mu.to_vec(), degenerate: steady_state_lambdas(net, lambda).degenerate };
        let sol = solve_system(net, &state, lambda, &coefs, scale, 1.0, theta)?;
        let clamp = |v: Vec<f64>| v.into_iter().map(|x| x.clamp(0.0, vmax)).collect::<Vec<_>>();
        Ok((clamp(sol.u0), clamp(sol.u1)))
    };

    let mut lambda = start.lambda.clone();
    let mut mu = match &start.mu {
        Some(m) => {
            if m.len() != net.middlemen().len() || m.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(Error::Parameter("initial state must be one fraction in [0, 1] per middleman".into()));
            }
            m.clone()
        }
        None => steady_state_lambdas(net, &lambda).mu,
    };
    let (mut u0, mut u1) = match &start.u {
        Some((a, b)) if a.len() == nv && b.len() == nv => (a.clone(), b.clone()),
        Some(_) => return Err(Error::Parameter("initial payoffs must have one entry per node".into())),
        None => payoffs(&lambda, &mu)?,
    };

    let d = cfg.damping;
    let mut step_damping = vec![d; n];
    let mut last_step = vec![0.0; n];
    let mut tau = cfg.tau_start;
    let mut history = Vec::new();
    let mut in_domain = true;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iters {
        if iterations > 0 && iterations % cfg.anneal_every == 0 {
            tau = (tau * cfg.anneal_factor).max(cfg.tau_min);
            history.push(residual);
        }
        iterations += 1;
        let gain: Vec<f64> = net
            .edges()
            .iter()
            .map(|l| theta * ((u1[l.to] - u0[l.to]) - (u1[l.from] - u0[l.from])) - l.cost)
            .collect();
        let target: Vec<f64> = gain.iter().map(|z| logistic(z / tau)).collect();
        let mu_next = steady_state_lambdas(net, &lambda).mu;
        let (u0_next, u1_next) = payoffs(&lambda, &mu)?;

        residual = target
            .iter()
            .zip(&lambda)
            .chain(mu_next.iter().zip(&mu))
            .chain(u0_next.iter().zip(&u0))
            .chain(u1_next.iter().zip(&u1))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);

        // Probabilities oscillating around an interior root get their step halved.
        for e in 0..n {
            let step = target[e] - lambda[e];
            if step * last_step[e] < 0.0 {
                step_damping[e] *= 0.5;
            }
            last_step[e] = step;
            lambda[e] = (lambda[e] + step_damping[e] * step).clamp(0.0, 1.0);
        }
        for (m, x) in mu.iter_mut().zip(&mu_next) {
            *m = (1.0 - d) * *m + d * x;
        }
        for (u, x) in u0.iter_mut().zip(&u0_next).chain(u1.iter_mut().zip(&u1_next)) {
            *u = (1.0 - d) * *u + d * x;
        }
        in_domain &= mu.iter().all(|m| (0.0..=1.0).contains(m))
            && u0.iter().chain(&u1).all(|u| (0.0..=vmax).contains(u));

        if residual < cfg.tol && tau <= cfg.tau_min {
            converged = true;
            break;
        }
    }
    history.push(residual);

    let mut outcome = FixedPointOutcome {
        converged,
        iterations,
        residual,
        tau,
        history,
        lambda: lambda.clone(),
        mu,
        in_domain,
        report: None,
        diagnostic: None,
    };
    if !converged {
        outcome.diagnostic = Some(format!("no convergence after {iterations} iterations (residual {residual:.3e})"));
        return Ok(outcome);
    }

    let rounded: Vec<f64> = lambda
        .iter()
        .map(|&l| if l > 1.0 - cfg.pure_tol { 1.0 } else if l < cfg.pure_tol { 0.0 } else { l })
        .collect();
    let pattern = TradePattern::from_lambdas(&rounded);
    let mixed = pattern.mixed_edges();
    let report = if mixed.is_empty() {
        build_report(net, pattern, cfg.evaluation, SIGN_TOL, Method::FixedPoint)
    } else if mixed.len() <= 2 {
        match solve_mixed(net, &pattern, &mixed, cfg.evaluation) {
            Ok(mut r) => {
                r.method = Method::FixedPoint;
                Ok(r)
            }
            Err(Error::NoInteriorMixed(reason)) => {
                outcome.diagnostic = Some(format!("exact mixed re-solve failed: {reason}"));
                build_report(net, pattern, cfg.evaluation, SIGN_TOL, Method::FixedPoint)
            }
            Err(e) => Err(e),
        }
    } else {
        outcome.diagnostic = Some(format!("{} mixed edges; exact re-solve supports at most 2", mixed.len()));
        build_report(net, pattern, cfg.evaluation, SIGN_TOL, Method::FixedPoint)
    }?;
    let mut report = report;
    report.metadata.iterations = Some(iterations);
    report.metadata.residual = Some(residual);
    outcome.report = Some(report);
    Ok(outcome)
}
