use netbargain::network::{network2, two_hop, NodeClass, Patience};
use netbargain::pattern::TradePattern;
use netbargain::simulate::{
    convergence_csv, convergence_sweep, estimate_payoffs, occupancy_trace_csv, simulate_inventory, InitialStock, SimConfig,
};
use netbargain::Error;

#[test]
fn symmetric_two_hop_occupancy() {
    let net = two_hop(0.1, 0.1, 1.0, 0.5, 0.5).unwrap();
    let est = simulate_inventory(&net, &TradePattern::always(&net), &SimConfig::new(100, 2_000_000, 11)).unwrap();
    assert_eq!(est.ids, ["2"]);
    assert!((est.mean[0] - 0.5).abs() < 0.02, "{:?}", est.mean);
    assert!(est.min_count[0] <= est.max_count[0] && est.max_count[0] <= 100);
}

#[test]
fn runs_are_reproducible() {
    let net = network2();
    let p = TradePattern::always(&net);
    let cfg = SimConfig { replicas: 3, ..SimConfig::new(10, 200_000, 5) };
    let a = simulate_inventory(&net, &p, &cfg).unwrap();
    let b = simulate_inventory(&net, &p, &cfg).unwrap();
    assert_eq!(a, b);
    let c = simulate_inventory(&net, &p, &SimConfig { seed: 6, ..cfg }).unwrap();
    assert_ne!(a.mean, c.mean);
}

#[test]
fn initial_stock_is_forgotten() {
    let net = network2();
    let p = TradePattern::always(&net);
    for initial in [InitialStock::Empty, InitialStock::Full] {
        let cfg = SimConfig { initial, ..SimConfig::new(50, 2_000_000, 2) };
        let est = simulate_inventory(&net, &p, &cfg).unwrap();
        for (m, mu) in est.mean.iter().zip(&est.mu) {
            assert!((m - mu).abs() < 0.02);
        }
    }
}

#[test]
fn trace_is_recorded() {
    let net = network2();
    let cfg = SimConfig { trace_every: Some(1000), ..SimConfig::new(10, 10_000, 1) };
    let est = simulate_inventory(&net, &TradePattern::always(&net), &cfg).unwrap();
    let csv = occupancy_trace_csv(&est);
    assert!(csv.starts_with("period,3,4\n0,"));
    assert!(csv.lines().count() > 5);
}

#[test]
fn bad_configurations() {
    let net = network2();
    let p = TradePattern::always(&net);
    assert!(matches!(simulate_inventory(&net, &p, &SimConfig::new(0, 100, 1)), Err(Error::Parameter(_))));
    let cfg = SimConfig { burn_in: 100, ..SimConfig::new(1, 100, 1) };
    assert!(matches!(simulate_inventory(&net, &p, &cfg), Err(Error::Parameter(_))));
    assert!(matches!(convergence_sweep(&net, &p, &[100, 10], &SimConfig::new(1, 100, 1)), Err(Error::Parameter(_))));

    let mut file = net.to_file();
    file.nodes[2].population = 1.5;
    let odd = file.build().unwrap();
    assert!(simulate_inventory(&odd, &p, &SimConfig::new(1, 100, 1)).is_err());
    assert!(simulate_inventory(&odd, &p, &SimConfig::new(2, 100, 1)).is_ok());
}

#[test]
fn deviation_shrinks_with_k() {
    let net = network2();
    let rows = convergence_sweep(&net, &TradePattern::always(&net), &[5, 50, 500], &SimConfig::new(1, 1_000_000, 3)).unwrap();
    assert_eq!(rows.len(), 6);
    for node in ["3", "4"] {
        let d: Vec<f64> = rows.iter().filter(|r| r.node == node).map(|r| r.deviation).collect();
        assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
    }
    assert!(convergence_csv(&rows).starts_with("k,node,estimate,stderr,mu,deviation\n"));
}

#[test]
fn two_hop_payoffs_within_confidence() {
    let net = two_hop(0.1, 0.1, 1.0, 0.5, 0.5).unwrap();
    let est = estimate_payoffs(&net, &TradePattern::always(&net), &SimConfig::new(50, 20_000, 3), 4000).unwrap();
    assert!((est.discount - 0.9f64.powf(1.0 / 50.0)).abs() < 1e-15);
    for n in &est.nodes {
        let v = net.node(&n.id).unwrap();
        match net.class(v) {
            NodeClass::Producer => assert!(n.u0.is_none() && n.u1.is_some()),
            NodeClass::Consumer => assert!(n.u0.is_some() && n.u1.is_none()),
            NodeClass::Middleman => assert!(n.u0.is_some() && n.u1.is_some()),
        }
        for (iv, a) in [(&n.u0, n.analytic_u0), (&n.u1, n.analytic_u1)] {
            if let Some(iv) = iv {
                assert!(iv.contains(a), "node {}: {iv:?} vs {a}", n.id);
            }
        }
    }
}

#[test]
fn network2_payoffs_near_finite_solution() {
    // Finite-k inventory fluctuations and the shared chain within a batch of
    // agents leave an O(1/k) gap to the mean-field solution; allow two half-widths.
    let net = network2();
    let est = estimate_payoffs(&net, &TradePattern::always(&net), &SimConfig::new(100, 20_000, 3), 4000).unwrap();
    for n in &est.nodes {
        for (iv, a) in [(&n.u0, n.analytic_u0), (&n.u1, n.analytic_u1)] {
            if let Some(iv) = iv {
                assert!((iv.mean - a).abs() <= 2.0 * iv.half_width, "node {}: {iv:?} vs {a}", n.id);
            }
        }
    }
}

#[test]
fn payoff_estimation_needs_discounting() {
    let net = network2().with_patience(Patience::Uniform(0.5)).unwrap();
    let r = estimate_payoffs(&net, &TradePattern::always(&net), &SimConfig::new(5, 100, 1), 10);
    assert!(matches!(r, Err(Error::Parameter(_))));
}
