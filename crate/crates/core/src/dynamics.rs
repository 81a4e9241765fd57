//! Stationary inventory state of the middlemen and the fluid-limit ODE.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{EdgeKind, TradingNetwork};
use crate::pattern::TradePattern;

pub const DEFAULT_STEP: f64 = 0.01;
pub const DEFAULT_HORIZON: f64 = 50.0;

/// Fraction of each middleman population holding the good.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarketState {
    /// Indexed like [`TradingNetwork::middlemen`].
    pub mu: Vec<f64>,
    /// Node indices of middlemen with neither inflow nor outflow.
    pub degenerate: Vec<usize>,
}

impl MarketState {
    /// Holding probability of node `v`: 1 for producers, 0 for consumers.
    pub fn holding(&self, net: &TradingNetwork, v: usize) -> f64 {
        match net.middleman_slot(v) {
            Some(s) => self.mu[s],
            None => match net.class(v) {
                crate::network::NodeClass::Producer => 1.0,
                _ => 0.0,
            },
        }
    }

    pub fn is_degenerate(&self, v: usize) -> bool {
        self.degenerate.contains(&v)
    }

    /// Checks dimensions and range against a network.
    pub fn check(&self, net: &TradingNetwork) -> Result<()> {
        if self.mu.len() != net.middlemen().len() {
            return Err(Error::Parameter(format!(
                "state has {} middleman entries, network has {}",
                self.mu.len(),
                net.middlemen().len()
            )));
        }
        if let Some(m) = self.mu.iter().find(|m| !(0.0..=1.0).contains(*m)) {
            return Err(Error::Parameter(format!("holding fraction {m} outside [0, 1]")));
        }
        Ok(())
    }
}

/// Per middleman, the total acquisition rate `sum pi_pm lambda_pm` and
/// disposal rate `sum pi_mc lambda_mc`.
pub fn flow_rates(net: &TradingNetwork, lambdas: &[f64]) -> Vec<(f64, f64)> {
    let mut rates = vec![(0.0, 0.0); net.middlemen().len()];
    for (e, l) in net.edges().iter().enumerate() {
        match l.kind {
            EdgeKind::Supply => rates[net.middleman_slot(l.to).unwrap()].0 += l.pi * lambdas[e],
            EdgeKind::Resale => rates[net.middleman_slot(l.from).unwrap()].1 += l.pi * lambdas[e],
            EdgeKind::Direct => {}
        }
    }
    rates
}

pub fn steady_state(net: &TradingNetwork, pattern: &TradePattern) -> MarketState {
    steady_state_lambdas(net, &pattern.lambdas())
}

pub fn steady_state_lambdas(net: &TradingNetwork, lambdas: &[f64]) -> MarketState {
    let mut mu = Vec::with_capacity(net.middlemen().len());
    let mut degenerate = Vec::new();
    for (s, (a, b)) in flow_rates(net, lambdas).into_iter().enumerate() {
        if a + b > 0.0 {
            mu.push(a / (a + b));
        } else {
            mu.push(0.0);
            degenerate.push(net.middlemen()[s]);
        }
    }
    MarketState { mu, degenerate }
}

/// Signed per-middleman imbalance, expected outflow minus expected inflow.
pub fn balance_residual(net: &TradingNetwork, pattern: &TradePattern, state: &MarketState) -> Vec<f64> {
    flow_rates(net, &pattern.lambdas())
        .into_iter()
        .zip(&state.mu)
        .map(|((a, b), &mu)| mu * b - (1.0 - mu) * a)
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct FluidTrajectory {
    pub ids: Vec<String>,
    pub times: Vec<f64>,
    /// `fractions[i][s]` is middleman `s`'s holding fraction at `times[i]`.
    pub fractions: Vec<Vec<f64>>,
    pub target: Vec<f64>,
    /// `max |x_m(T)/N_m - mu_m|` over non-degenerate middlemen.
    pub residual: f64,
}

impl FluidTrajectory {
    /// Squared distance to the steady state at every grid point.
    pub fn lyapunov(&self) -> Vec<f64> {
        self.fractions
            .iter()
            .map(|row| row.iter().zip(&self.target).map(|(x, m)| (x - m) * (x - m)).sum())
            .collect()
    }

    pub fn terminal(&self) -> &[f64] {
        self.fractions.last().expect("trajectory has a grid point")
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("t,{}\n", self.ids.join(","));
        for (t, row) in self.times.iter().zip(&self.fractions) {
            out.push_str(&t.to_string());
            for x in row {
                out.push(',');
                out.push_str(&x.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Integrates `dx_m/dt = (1 - x_m/N_m) a_m - (x_m/N_m) b_m` with classical RK4
/// from the given initial holding fractions.
pub fn fluid_integrate(
    net: &TradingNetwork,
    pattern: &TradePattern,
    initial: &[f64],
    horizon: f64,
    step: f64,
) -> Result<FluidTrajectory> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Parameter(format!("step {step} must be positive")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Parameter(format!("horizon {horizon} must be positive")));
    }
    let ms = net.middlemen();
    if initial.len() != ms.len() {
        return Err(Error::Parameter(format!("{} initial fractions for {} middlemen", initial.len(), ms.len())));
    }
    if let Some(x) = initial.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::Parameter(format!("initial fraction {x} outside [0, 1]")));
    }
    let rates = flow_rates(net, &pattern.lambdas());
    let state = steady_state(net, pattern);
    let pop: Vec<f64> = ms.iter().map(|&m| net.nodes()[m].population).collect();

    let steps = (horizon / step - 1e-9).ceil().max(1.0) as usize;
    let dt = horizon / steps as f64;
    let rhs = |s: usize, y: f64| ((1.0 - y) * rates[s].0 - y * rates[s].1) / pop[s];

    let mut y = initial.to_vec();
    let mut times = Vec::with_capacity(steps + 1);
    let mut fractions = Vec::with_capacity(steps + 1);
    times.push(0.0);
    fractions.push(y.clone());
    for i in 1..=steps {
        for (s, ys) in y.iter_mut().enumerate() {
            let k1 = rhs(s, *ys);
            let k2 = rhs(s, *ys + 0.5 * dt * k1);
            let k3 = rhs(s, *ys + 0.5 * dt * k2);
            let k4 = rhs(s, *ys + dt * k3);
            *ys = (*ys + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).clamp(0.0, 1.0);
        }
        times.push(i as f64 * dt);
        fractions.push(y.clone());
    }
    let residual = (0..ms.len())
        .filter(|&s| !state.is_degenerate(ms[s]))
        .map(|s| (y[s] - state.mu[s]).abs())
        .fold(0.0, f64::max);
    Ok(FluidTrajectory {
        ids: ms.iter().map(|&m| net.node_id(m).to_string()).collect(),
        times,
        fractions,
        target: state.mu,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{network2, two_hop};

    #[test]
    fn network2_states() {
        let net = network2();
        let s = steady_state(&net, &TradePattern::always(&net));
        assert!((s.mu[0] - 1.0 / 3.0).abs() < 1e-15 && (s.mu[1] - 2.0 / 3.0).abs() < 1e-15);
        let s = steady_state(&net, &TradePattern::avoiding(&net, &["1-4"]).unwrap());
        assert!((s.mu[0] - 1.0 / 3.0).abs() < 1e-15 && (s.mu[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn all_never_is_degenerate() {
        let net = network2();
        let s = steady_state(&net, &TradePattern::never(&net));
        assert_eq!(s.mu, vec![0.0, 0.0]);
        assert_eq!(s.degenerate, net.middlemen().to_vec());
        let r = balance_residual(&net, &TradePattern::never(&net), &MarketState { mu: vec![0.3, 0.9], degenerate: vec![] });
        assert_eq!(r, vec![0.0, 0.0]);
    }

    #[test]
    fn residual_off_equilibrium() {
        let net = network2();
        let p = TradePattern::always(&net);
        let r = balance_residual(&net, &p, &MarketState { mu: vec![0.5, 0.5], degenerate: vec![] });
        assert!((r[0] - 1.0 / 12.0).abs() < 1e-15);
        let r = balance_residual(&net, &p, &steady_state(&net, &p));
        assert!(r.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn two_hop_fluid_solution() {
        let net = two_hop(0.0, 0.0, 1.0, 0.5, 0.5).unwrap();
        let p = TradePattern::always(&net);
        let traj = fluid_integrate(&net, &p, &[0.0], 40.0, 0.01).unwrap();
        for (t, row) in traj.times.iter().zip(&traj.fractions).step_by(100) {
            assert!((row[0] - 0.5 * (1.0 - (-t).exp())).abs() < 1e-9);
        }
        assert!((traj.terminal()[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn never_pattern_is_constant() {
        let net = network2();
        let traj = fluid_integrate(&net, &TradePattern::never(&net), &[0.25, 0.75], 5.0, 0.1).unwrap();
        assert!(traj.fractions.iter().all(|r| r == &vec![0.25, 0.75]));
        assert_eq!(traj.residual, 0.0);
    }

    #[test]
    fn bad_step_is_rejected() {
        let net = network2();
        let p = TradePattern::always(&net);
        assert!(fluid_integrate(&net, &p, &[0.0, 0.0], 1.0, 0.0).is_err());
        assert!(fluid_integrate(&net, &p, &[0.0, 0.0], -1.0, 0.1).is_err());
    }

    #[test]
    fn csv_header() {
        let net = network2();
        let traj = fluid_integrate(&net, &TradePattern::always(&net), &[1.0, 0.0], 0.02, 0.01).unwrap();
        let csv = traj.to_csv();
        assert!(csv.starts_with("t,3,4\n0,1,0\n"));
        assert_eq!(csv.lines().count(), 4);
    }
}
