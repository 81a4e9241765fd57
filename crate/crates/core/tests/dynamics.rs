mod common;

use netbargain::dynamics::{balance_residual, flow_rates, fluid_integrate, steady_state, steady_state_lambdas};
use netbargain::network::{network2, two_hop, EdgeKind, TradingNetwork};
use netbargain::pattern::TradePattern;
use proptest::prelude::*;

/// Holding fraction from detailed balance of a single middleman, computed
/// straight from the edge list.
fn balance_oracle(net: &TradingNetwork, lambdas: &[f64], m: usize) -> Option<f64> {
    let (mut inflow, mut outflow) = (0.0, 0.0);
    for (e, l) in net.edges().iter().enumerate() {
        if l.kind == EdgeKind::Supply && l.to == m {
            inflow += l.pi * lambdas[e];
        }
        if l.kind == EdgeKind::Resale && l.from == m {
            outflow += l.pi * lambdas[e];
        }
    }
    (inflow + outflow > 0.0).then(|| inflow / (inflow + outflow))
}

#[test]
fn network2_states() {
    let net = network2();
    let s = steady_state(&net, &TradePattern::always(&net));
    assert_eq!(s.mu.len(), 2);
    assert!((s.mu[0] - 1.0 / 3.0).abs() < 1e-15);
    assert!((s.mu[1] - 2.0 / 3.0).abs() < 1e-15);
    let avoid = TradePattern::avoiding(&net, &["1-4"]).unwrap();
    let s = steady_state(&net, &avoid);
    assert!((s.mu[1] - 0.5).abs() < 1e-15);
}

#[test]
fn isolated_middleman_is_degenerate() {
    let net = two_hop(0.1, 0.1, 1.0, 0.5, 0.5).unwrap();
    let s = steady_state(&net, &TradePattern::never(&net));
    assert_eq!(s.degenerate, vec![net.node("2").unwrap()]);
    let s = steady_state_lambdas(&net, &[1.0, 0.0]);
    assert!(s.degenerate.is_empty());
    assert_eq!(s.mu[0], 1.0);
}

#[test]
fn fluid_reaches_steady_state() {
    let net = network2();
    let p = TradePattern::always(&net);
    let traj = fluid_integrate(&net, &p, &[1.0, 0.0], 100.0, 0.01).unwrap();
    assert!(traj.residual < 1e-6);
    assert_eq!(traj.times.len(), traj.fractions.len());
    assert!(traj.to_csv().starts_with("t,3,4\n0,1,0\n"));
}

#[test]
fn fluid_rejects_bad_input() {
    let net = network2();
    let p = TradePattern::always(&net);
    assert!(fluid_integrate(&net, &p, &[0.5], 1.0, 0.01).is_err());
    assert!(fluid_integrate(&net, &p, &[0.5, 1.5], 1.0, 0.01).is_err());
    assert!(fluid_integrate(&net, &p, &[0.5, 0.5], 1.0, 0.0).is_err());
}

proptest! {
    #[test]
    fn steady_state_matches_detailed_balance(seed in any::<u64>()) {
        let net = common::random_network(seed);
        let lambdas = common::random_lambdas(&net, seed);
        let s = steady_state_lambdas(&net, &lambdas);
        for (slot, &m) in net.middlemen().iter().enumerate() {
            match balance_oracle(&net, &lambdas, m) {
                Some(mu) => prop_assert!((s.mu[slot] - mu).abs() < 1e-14),
                None => prop_assert!(s.is_degenerate(m)),
            }
        }
        let p = TradePattern::from_lambdas(&lambdas);
        for r in balance_residual(&net, &p, &s) {
            prop_assert!(r.abs() < 1e-14);
        }
    }

    #[test]
    fn steady_state_ignores_common_scaling(seed in any::<u64>(), c in 0.01f64..1.0) {
        let net = common::random_network(seed);
        let lambdas = common::random_lambdas(&net, seed);
        let scaled: Vec<f64> = lambdas.iter().map(|l| l * c).collect();
        let a = steady_state_lambdas(&net, &lambdas);
        let b = steady_state_lambdas(&net, &scaled);
        prop_assert_eq!(&a.degenerate, &b.degenerate);
        for (x, y) in a.mu.iter().zip(&b.mu) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        let ra = flow_rates(&net, &lambdas);
        let rb = flow_rates(&net, &scaled);
        for (x, y) in ra.iter().zip(&rb) {
            prop_assert!((x.0 * c - y.0).abs() < 1e-14 && (x.1 * c - y.1).abs() < 1e-14);
        }
    }

    #[test]
    fn fluid_distance_never_grows(seed in any::<u64>(), x0 in proptest::collection::vec(0.0f64..=1.0, 3)) {
        let net = common::random_network(seed);
        let lambdas = common::random_lambdas(&net, seed);
        let init: Vec<f64> = (0..net.middlemen().len()).map(|s| x0[s % 3]).collect();
        let traj = fluid_integrate(&net, &TradePattern::from_lambdas(&lambdas), &init, 20.0, 0.01).unwrap();
        let v = traj.lyapunov();
        for w in v.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-300);
        }
        for row in &traj.fractions {
            prop_assert!(row.iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }
}
