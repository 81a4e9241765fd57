mod common;

use netbargain::network::{
    builtin, kappa, network2, BellmanCoefficients, NetworkFile, NodeClass, Patience, BUILTIN_NAMES,
};
use netbargain::Error;
use proptest::prelude::*;

const NETWORK2: &str = r#"{
  "nodes": [
    {"id": "1", "class": "producer", "population": 1},
    {"id": "2", "class": "producer", "population": 1},
    {"id": "3", "class": "middleman", "population": 1},
    {"id": "4", "class": "middleman", "population": 1},
    {"id": "5", "class": "consumer", "population": 1, "value": 1},
    {"id": "6", "class": "consumer", "population": 1, "value": 1}
  ],
  "edges": [
    {"from": "4", "to": "6", "cost": 0, "pi": 0.16666666666666666},
    {"from": "1", "to": "3", "cost": 0, "pi": 0.16666666666666666},
    {"from": "1", "to": "4", "cost": 0, "pi": 0.16666666666666666},
    {"from": "2", "to": "4", "cost": 0, "pi": 0.16666666666666666},
    {"from": "3", "to": "5", "cost": 0, "pi": 0.16666666666666666},
    {"from": "3", "to": "6", "cost": 0, "pi": 0.16666666666666669}
  ],
  "discount": 0.9
}"#;

fn messages(file: &NetworkFile) -> Vec<String> {
    file.validate().violations.iter().map(|v| format!("{}: {}", v.element, v.message)).collect()
}

#[test]
fn parses_and_sorts_edges() {
    let net = NetworkFile::parse(NETWORK2).unwrap().build().unwrap();
    let labels: Vec<_> = (0..6).map(|e| net.edge_label(e)).collect();
    assert_eq!(labels, ["1-3", "1-4", "2-4", "3-5", "3-6", "4-6"]);
    assert_eq!(net.patience(), Patience::Discount(0.9));
    assert_eq!(net.middlemen().len(), 2);
}

#[test]
fn json_round_trip() {
    let net = network2();
    let back = NetworkFile::parse(&net.to_file().to_json()).unwrap().build().unwrap();
    assert_eq!(back.to_file(), net.to_file());
}

#[test]
fn unknown_fields_are_rejected() {
    let text = NETWORK2.replace("\"discount\": 0.9", "\"discount\": 0.9, \"extra\": 1");
    assert!(matches!(NetworkFile::parse(&text), Err(Error::Json(_))));
}

#[test]
fn illegal_class_pair_is_named() {
    let mut file = network2().to_file();
    file.edges[0].from = "5".into();
    file.edges[0].to = "1".into();
    let msgs = messages(&file);
    assert!(msgs.iter().any(|m| m.contains("edge 5-1") && m.contains("illegal edge class pair (consumer -> producer)")), "{msgs:?}");
    assert!(matches!(file.build(), Err(Error::InvalidNetwork(_))));
}

#[test]
fn middleman_to_middleman_is_illegal() {
    let mut file = network2().to_file();
    file.edges[0].from = "3".into();
    file.edges[0].to = "4".into();
    assert!(messages(&file).iter().any(|m| m.contains("middleman -> middleman")));
}

#[test]
fn mass_violation_reports_the_mass() {
    let mut file = network2().to_file();
    file.edges[0].pi = 0.5;
    let msgs = messages(&file);
    assert!(msgs.iter().any(|m| m.contains("matching distribution mass") && m.contains("≠ 1")), "{msgs:?}");
}

#[test]
fn every_violation_is_collected() {
    let mut file = network2().to_file();
    file.nodes[0].population = 0.0;
    file.nodes[4].value = None;
    file.edges[1].cost = -1.0;
    file.discount = Some(1.0);
    let msgs = messages(&file);
    assert!(msgs.len() >= 4, "{msgs:?}");
    assert!(msgs.iter().any(|m| m.contains("node 1") && m.contains("population")));
    assert!(msgs.iter().any(|m| m.contains("consumer without a value")));
    assert!(msgs.iter().any(|m| m.contains("cost -1")));
    assert!(msgs.iter().any(|m| m.contains("discount 1")));
}

#[test]
fn patience_must_be_exactly_one() {
    let mut file = network2().to_file();
    file.f = Some(0.5);
    assert!(messages(&file).iter().any(|m| m.contains("exactly one")));
    file.discount = None;
    file.f = None;
    assert!(messages(&file).iter().any(|m| m.contains("neither")));
}

#[test]
fn uniform_patience_needs_symmetry() {
    let mut file = network2().to_file();
    file.discount = None;
    file.f = Some(0.5);
    assert!(file.validate().is_ok());
    file.nodes[2].population = 2.0;
    assert!(messages(&file).iter().any(|m| m.contains("equal populations")));
}

#[test]
fn duplicates_and_unknown_nodes() {
    let mut file = network2().to_file();
    file.nodes[1].id = "1".into();
    file.edges[5].to = "9".into();
    let msgs = messages(&file);
    assert!(msgs.iter().any(|m| m.contains("duplicate node id")));
    assert!(msgs.iter().any(|m| m.contains("unknown node `9`")));
}

#[test]
fn builtins_resolve() {
    for name in ["network2", "triangle-halfcost", "two-hop", "two-hop(0.1, 0.2, 1, 0.3, 0.7)", "surplus-triangle(2)"] {
        assert!(builtin(name).is_ok(), "{name}");
    }
    assert!(matches!(builtin("network9"), Err(Error::UnknownBuiltin(_))));
    assert!(matches!(builtin("two-hop(1,2)"), Err(Error::UnknownBuiltin(_))));
    assert_eq!(BUILTIN_NAMES.len(), 4);
    let th = builtin("two-hop(0.1, 0.2, 1, 0.3, 0.7)").unwrap();
    assert_eq!(th.class(th.node("2").unwrap()), NodeClass::Middleman);
}

#[test]
fn coefficient_scales() {
    let net = network2();
    let c = BellmanCoefficients::new(&net).unwrap();
    let expected = (1.0 / 6.0) / (2.0 * (1.0f64 / 0.9).ln());
    assert!((c.kappa(0, 0) - expected).abs() < 1e-15);
    assert!((kappa(1.0 / 6.0, 1.0, 0.9) - expected).abs() < 1e-15);

    let u = net.with_patience(Patience::Uniform(0.25)).unwrap();
    let c = BellmanCoefficients::new(&u).unwrap();
    assert!((c.kappa(3, 1) - 4.0).abs() < 1e-15);

    let p = BellmanCoefficients::patient(&net);
    assert!(p.patient_limit && p.kappa(0, 0).is_infinite());
}

#[test]
fn finite_coefficients_approach_the_limit() {
    let net = network2();
    let lim = BellmanCoefficients::new(&net).unwrap();
    let mut prev = f64::INFINITY;
    for k in [1.0, 10.0, 100.0, 1e4, 1e6] {
        let fin = BellmanCoefficients::finite(&net, k).unwrap();
        let gap = (fin.kappa(0, 0) - lim.kappa(0, 0)).abs();
        assert!(gap < prev);
        assert!((fin.theta - 0.9f64.powf(1.0 / k)).abs() < 1e-15);
        prev = gap;
    }
    assert!(prev < 1e-6 * lim.kappa(0, 0));
    assert!(BellmanCoefficients::finite(&net.with_patience(Patience::Uniform(1.0)).unwrap(), 10.0).is_err());
}

proptest! {
    #[test]
    fn kappa_is_homogeneous_of_degree_zero(pi in 0.01f64..1.0, n in 0.1f64..10.0, c in 0.1f64..10.0, delta in 0.05f64..0.999) {
        let a = kappa(pi, n, delta);
        let b = kappa(c * pi, c * n, delta);
        prop_assert!((a - b).abs() <= 1e-12 * a.abs());
    }

    #[test]
    fn edge_order_does_not_matter(seed in any::<u64>(), rot in 0usize..16) {
        let file = common::random_file(seed);
        let mut shuffled = file.clone();
        let r = rot % shuffled.edges.len();
        shuffled.edges.rotate_left(r);
        shuffled.edges.reverse();
        let a = file.build().unwrap();
        let b = shuffled.build().unwrap();
        prop_assert_eq!(a.edges(), b.edges());
        let (ca, cb) = (BellmanCoefficients::new(&a).unwrap(), BellmanCoefficients::new(&b).unwrap());
        prop_assert_eq!(ca, cb);
    }

    #[test]
    fn random_networks_validate(seed in any::<u64>()) {
        let file = common::random_file(seed);
        prop_assert!(file.validate().is_ok(), "{}", file.validate());
    }
}
