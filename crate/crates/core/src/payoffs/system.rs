//! Assembly of the stationary payoff equations as a linear system in the
//! per-edge surplus gaps.
//!
//! Every payoff is an affine function of the gaps: `u_s(v) = c + sum_e a_e x_e`,
//! where `a_e` is the (weighted) Bellman coefficient times the search-friction
//! factor. Substituting these forms into the gap definitions
//! `z_e = theta (D(to) - D(from)) - C_e`, with `D = u1 - u0`, gives a square
//! system over the edges whose terms are kept.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::MarketState;
use crate::error::{Error, Result};
use crate::network::{BellmanCoefficients, EdgeKind, TradingNetwork};

/// `u_s(v)` as `constant + coef . x`.
#[derive(Clone, Debug)]
struct Affine {
    coef: Vec<f64>,
    constant: f64,
}

impl Affine {
    fn zero(n: usize) -> Affine {
        Affine { coef: vec![0.0; n], constant: 0.0 }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.coef.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }
}

pub(crate) struct Forms {
    u: Vec<[Affine; 2]>,
}

impl Forms {
    /// `scale` multiplies every coefficient weight (the inverse time scale, or
    /// 1 for rate variables in the patience limit); `edge_weight[e]` is the
    /// probability that edge `e`'s term is collected.
    pub(crate) fn new(
        net: &TradingNetwork,
        state: &MarketState,
        edge_weight: &[f64],
        coefs: &BellmanCoefficients,
        scale: f64,
    ) -> Forms {
        let n = net.edges().len();
        let mut u: Vec<[Affine; 2]> = (0..net.nodes().len()).map(|_| [Affine::zero(n), Affine::zero(n)]).collect();
        for v in 0..net.nodes().len() {
            if net.class(v) == crate::network::NodeClass::Consumer {
                u[v][1].constant = net.value(v);
            }
        }
        for (e, l) in net.edges().iter().enumerate() {
            let w = edge_weight[e];
            if w == 0.0 || state.is_degenerate(l.from) || state.is_degenerate(l.to) {
                continue;
            }
            let [wf, wt] = coefs.weights[e];
            let (ff, ft) = match l.kind {
                EdgeKind::Direct => (1.0, 1.0),
                EdgeKind::Supply => (1.0 - state.holding(net, l.to), 1.0),
                EdgeKind::Resale => (1.0, state.holding(net, l.from)),
            };
            // The seller collects in its holding state, the buyer in its empty one.
            u[l.from][1].coef[e] += w * wf * ff * scale;
            u[l.to][0].coef[e] += w * wt * ft * scale;
        }
        Forms { u }
    }

    /// `D(to) - D(from)` as an affine form.
    fn gap(&self, net: &TradingNetwork, e: usize) -> Affine {
        let l = &net.edges()[e];
        let n = net.edges().len();
        let mut g = Affine::zero(n);
        for (v, sign) in [(l.to, 1.0), (l.from, -1.0)] {
            g.constant += sign * (self.u[v][1].constant - self.u[v][0].constant);
            for i in 0..n {
                g.coef[i] += sign * (self.u[v][1].coef[i] - self.u[v][0].coef[i]);
            }
        }
        g
    }

    fn column_used(&self, e: usize) -> bool {
        self.u.iter().any(|f| f[0].coef[e] != 0.0 || f[1].coef[e] != 0.0)
    }
}

pub(crate) struct Solution {
    pub u0: Vec<f64>,
    pub u1: Vec<f64>,
    /// Gap variables for the unknown edges, `theta (D(to)-D(from)) - C` elsewhere.
    pub z: Vec<f64>,
    pub unknown: Vec<bool>,
}

/// Solves `alpha x - theta G x = theta h - C` over the edges whose term
/// appears in some payoff equation.
pub(crate) fn solve_system(
    net: &TradingNetwork,
    state: &MarketState,
    edge_weight: &[f64],
    coefs: &BellmanCoefficients,
    scale: f64,
    alpha: f64,
    theta: f64,
) -> Result<Solution> {
    let n = net.edges().len();
    let forms = Forms::new(net, state, edge_weight, coefs, scale);
    let gaps: Vec<Affine> = (0..n).map(|e| forms.gap(net, e)).collect();
    let unknown: Vec<bool> = (0..n).map(|e| forms.column_used(e)).collect();
    let idx: Vec<usize> = (0..n).filter(|&e| unknown[e]).collect();
    let m = idx.len();

    let mut x = vec![0.0; n];
    if m > 0 {
        let a = DMatrix::from_fn(m, m, |r, c| {
            let diag = if r == c { alpha } else { 0.0 };
            diag - theta * gaps[idx[r]].coef[idx[c]]
        });
        let b = DVector::from_fn(m, |r, _| theta * gaps[idx[r]].constant - net.edges()[idx[r]].cost);
        if let Some(dependent) = dependent_rows(&a) {
            return Err(Error::IndeterminateSupport {
                dependent: dependent.into_iter().map(|r| net.edge_label(idx[r])).collect(),
            });
        }
        let sol = a.lu().solve(&b).ok_or_else(|| Error::IndeterminateSupport {
            dependent: idx.iter().map(|&e| net.edge_label(e)).collect(),
        })?;
        for (r, &e) in idx.iter().enumerate() {
            x[e] = sol[r];
        }
    }

    let u0 = forms.u.iter().map(|f| f[0].eval(&x)).collect();
    let u1 = forms.u.iter().map(|f| f[1].eval(&x)).collect();
    let z = (0..n)
        .map(|e| if unknown[e] { x[e] } else { theta * gaps[e].eval(&x) - net.edges()[e].cost })
        .collect();
    Ok(Solution { u0, u1, z, unknown })
}

/// Rows taking part in a linear dependency, or `None` when the matrix is
/// numerically nonsingular.
fn dependent_rows(a: &DMatrix<f64>) -> Option<Vec<usize>> {
    let svd = a.clone().svd(true, false);
    let sv = &svd.singular_values;
    let (imin, smin) = sv.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smin >= 1e-12 * smax.max(1.0) {
        return None;
    }
    let left = svd.u.as_ref().expect("requested").column(imin).into_owned();
    let big = left.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Some((0..left.len()).filter(|&r| left[r].abs() > 1e-6 * big).collect())
}
