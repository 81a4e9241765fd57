use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    AlwaysTrade,
    Delay,
}

/// Patient-limit equilibrium of the chain producer 1 -> middleman 2 -> consumer 3.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TwoHopSolution {
    pub regime: Regime,
    pub lambda12: f64,
    pub lambda23: f64,
    pub mu2: f64,
    pub u1_2: f64,
    pub u0_2: f64,
    pub u0_3: f64,
    pub u1_1: f64,
    /// Value above which trade is never delayed.
    pub threshold: f64,
}

/// Closed-form patient-limit equilibrium with costs `a` on (1,2), `b` on (2,3),
/// consumer value `v` and unit populations.
pub fn two_hop_closed_form(a: f64, b: f64, v: f64, pi12: f64, pi23: f64) -> Result<TwoHopSolution> {
    if !(pi12 > 0.0 && pi23 > 0.0) {
        return Err(Error::Parameter(format!("selection probabilities ({pi12}, {pi23}) must be positive")));
    }
    if !(a >= 0.0 && b >= 0.0) {
        return Err(Error::Parameter(format!("costs ({a}, {b}) must be non-negative")));
    }
    if v <= a + b {
        return Err(Error::Domain(format!("value {v} does not exceed the route cost {}", a + b)));
    }
    let share = pi12 / (pi12 + pi23);
    let threshold = (1.0 + share) * a + b;
    if v >= threshold {
        let mu = share;
        let den = 1.0 + mu - mu * mu;
        let u1_2 = ((2.0 - mu) * (v - b) - a) / den;
        let u0_2 = (v - (1.0 + mu) * a - b) / den;
        Ok(TwoHopSolution {
            regime: Regime::AlwaysTrade,
            lambda12: 1.0,
            lambda23: 1.0,
            mu2: mu,
            u1_2,
            u0_2,
            u0_3: mu * u1_2,
            u1_1: (1.0 - mu) * u0_2,
            threshold,
        })
    } else {
        Ok(TwoHopSolution {
            regime: Regime::Delay,
            lambda12: pi23 * (v - b - a) / (pi12 * (2.0 * a + b - v)),
            lambda23: 1.0,
            mu2: (v - b - a) / a,
            u1_2: a,
            u0_2: 0.0,
            u0_3: v - b - a,
            u1_1: 0.0,
            threshold,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn always_trade_instance() {
        let s = two_hop_closed_form(2.0, 0.0, 4.0, 0.5, 0.5).unwrap();
        assert_eq!(s.regime, Regime::AlwaysTrade);
        assert!((s.u1_1 - 0.4).abs() < 1e-12);
        assert!((s.u0_3 - 1.6).abs() < 1e-12);
    }

    #[test]
    fn delay_instance() {
        let s = two_hop_closed_form(2.8, 0.0, 4.0, 0.5, 0.5).unwrap();
        assert_eq!(s.regime, Regime::Delay);
        assert_eq!(s.u1_1, 0.0);
        assert!((s.u0_3 - 1.2).abs() < 1e-12);
        let s = two_hop_closed_form(0.6, 0.2, 1.0, 0.5, 0.5).unwrap();
        assert!((s.lambda12 - 0.5).abs() < 1e-12);
        assert!((s.mu2 - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn branches_meet_at_threshold() {
        let (a, b, p12, p23) = (0.7, 0.1, 0.3, 0.7);
        let vbar = (1.0 + p12 / (p12 + p23)) * a + b;
        let at = two_hop_closed_form(a, b, vbar, p12, p23).unwrap();
        let below = two_hop_closed_form(a, b, vbar - 1e-12, p12, p23).unwrap();
        assert_eq!(at.regime, Regime::AlwaysTrade);
        assert_eq!(below.regime, Regime::Delay);
        for (x, y) in [
            (at.mu2, below.mu2),
            (at.u1_2, below.u1_2),
            (at.u0_2, below.u0_2),
            (at.u0_3, below.u0_3),
            (at.u1_1, below.u1_1),
            (at.lambda12, below.lambda12),
        ] {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
        assert!(at.u0_2.abs() < 1e-12);
    }

    #[test]
    fn unfavourable_trade_is_a_domain_error() {
        assert!(matches!(two_hop_closed_form(0.5, 0.5, 1.0, 0.5, 0.5), Err(Error::Domain(_))));
    }
}
