#![allow(dead_code)]

use netbargain::network::{Edge, NetworkFile, Node, NodeClass, TradingNetwork};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random valid network with 1-3 nodes per class, discount 0.9 and every
/// legal pair present with probability 0.6.
pub fn random_file(seed: u64) -> NetworkFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::new();
    for class in [NodeClass::Producer, NodeClass::Middleman, NodeClass::Consumer] {
        for _ in 0..rng.random_range(1..=3) {
            nodes.push(Node {
                id: format!("{}", nodes.len() + 1),
                class,
                population: rng.random_range(1..=3) as f64,
                value: (class == NodeClass::Consumer).then(|| rng.random_range(0.5..2.0)),
            });
        }
    }
    let mut edges = Vec::new();
    while edges.is_empty() {
        for a in &nodes {
            for b in &nodes {
                let legal = matches!(
                    (a.class, b.class),
                    (NodeClass::Producer, NodeClass::Consumer)
                        | (NodeClass::Producer, NodeClass::Middleman)
                        | (NodeClass::Middleman, NodeClass::Consumer)
                );
                if legal && rng.random::<f64>() < 0.6 {
                    edges.push(Edge {
                        from: a.id.clone(),
                        to: b.id.clone(),
                        cost: rng.random_range(0.0..0.3),
                        pi: rng.random_range(0.1..1.0),
                    });
                }
            }
        }
    }
    let mass: f64 = edges.iter().map(|e| e.pi).sum();
    for e in &mut edges {
        e.pi /= mass;
    }
    NetworkFile { nodes, edges, discount: Some(0.9), f: None }
}

pub fn random_network(seed: u64) -> TradingNetwork {
    random_file(seed).build().unwrap()
}

/// Random trade probabilities in `(0, 1]`, one per edge.
pub fn random_lambdas(net: &TradingNetwork, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    (0..net.edges().len()).map(|_| rng.random_range(0.05..=1.0)).collect()
}
