use super::{build_report, support_for, EquilibriumReport, Method};
use crate::dynamics::steady_state_lambdas;
use crate::error::{Error, Result};
use crate::network::TradingNetwork;
use crate::pattern::{Disposition, TradePattern};
use crate::payoffs::{solve, Evaluation, SIGN_TOL};

const MAX_SWEEPS: usize = 400;
const SWEEP_DAMPING: f64 = 0.5;

/// Gaps on the pinned edges when the network trades with probabilities `lambdas`.
fn pinned_gaps(net: &TradingNetwork, lambdas: &[f64], pinned: &[usize], evaluation: Evaluation) -> Result<Vec<f64>> {
    let state = steady_state_lambdas(net, lambdas);
    let profile = solve(net, &state, &support_for(lambdas, pinned), evaluation)?;
    Ok(pinned.iter().map(|&e| profile.z[e]).collect())
}

/// Root of the gap on edge `pinned[i]` in its probability, the other entries
/// held fixed. Returns the root or a reason why there is no interior one.
fn bisect(
    net: &TradingNetwork,
    lambdas: &mut [f64],
    pinned: &[usize],
    i: usize,
    evaluation: Evaluation,
) -> Result<std::result::Result<f64, String>> {
    let e = pinned[i];
    let label = net.edge_label(e);
    let gap = |l: f64, lambdas: &mut [f64]| -> Result<f64> {
        lambdas[e] = l;
        Ok(pinned_gaps(net, lambdas, pinned, evaluation)?[i])
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut g_lo = gap(lo, lambdas)?;
    let g_hi = gap(hi, lambdas)?;
    let tol = SIGN_TOL;
    if g_lo.abs() <= tol && g_hi.abs() <= tol {
        return Ok(Err(format!("gap on {label} vanishes at both ends of [0, 1]; the mixed edge is not isolated")));
    }
    if (g_lo > tol && g_hi > tol) || (g_lo < -tol && g_hi < -tol) {
        return Ok(Err(format!("gap on {label} keeps its sign on [0, 1] (z(0) = {g_lo:.6e}, z(1) = {g_hi:.6e})")));
    }
    if g_lo.abs() <= tol || g_hi.abs() <= tol {
        let at = if g_lo.abs() <= tol { 0 } else { 1 };
        return Ok(Err(format!("gap on {label} vanishes only at the boundary probability {at}")));
    }
    let (mut best, mut best_gap) = (lo, g_lo.abs());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g = gap(mid, lambdas)?;
        if g.abs() < best_gap {
            best = mid;
            best_gap = g.abs();
        }
        if g == 0.0 {
            break;
        }
        if (g > 0.0) == (g_lo > 0.0) {
            lo = mid;
            g_lo = g;
        } else {
            hi = mid;
        }
    }
    lambdas[e] = best;
    if best_gap > tol {
        return Ok(Err(format!("gap on {label} changes sign without a root (|z| = {best_gap:.3e} at the jump)")));
    }
    Ok(Ok(best))
}

/// Finds interior trade probabilities on the designated edges (at most two)
/// such that each of their gaps vanishes; the remaining edges keep the
/// dispositions of `base`.
pub fn solve_mixed(
    net: &TradingNetwork,
    base: &TradePattern,
    mixed: &[usize],
    evaluation: Evaluation,
) -> Result<EquilibriumReport> {
    if mixed.is_empty() || mixed.len() > 2 {
        return Err(Error::Parameter(format!("{} mixed edges designated; between 1 and 2 are supported", mixed.len())));
    }
    if mixed.iter().any(|&e| e >= net.edges().len()) || base.edges.len() != net.edges().len() {
        return Err(Error::Parameter("mixed designation does not match the network".into()));
    }
    let mut pinned = mixed.to_vec();
    pinned.sort_unstable();
    pinned.dedup();
    let mut lambdas = base.lambdas();
    for &e in &pinned {
        lambdas[e] = base.edges[e].is_mixed().then(|| base.edges[e].lambda()).unwrap_or(0.5);
    }

    let mut sweeps = 0;
    if pinned.len() == 1 {
        if let Err(reason) = bisect(net, &mut lambdas, &pinned, 0, evaluation)? {
            return Err(Error::NoInteriorMixed(reason));
        }
    } else {
        loop {
            sweeps += 1;
            for i in 0..pinned.len() {
                let start = lambdas[pinned[i]];
                match bisect(net, &mut lambdas, &pinned, i, evaluation)? {
                    Ok(root) => lambdas[pinned[i]] = start + SWEEP_DAMPING * (root - start),
                    Err(reason) => return Err(Error::NoInteriorMixed(reason)),
                }
            }
            let gaps = pinned_gaps(net, &lambdas, &pinned, evaluation)?;
            if gaps.iter().all(|g| g.abs() <= SIGN_TOL) {
                break;
            }
            if sweeps >= MAX_SWEEPS {
                return Err(Error::NoInteriorMixed(format!(
                    "alternating bisection did not settle after {MAX_SWEEPS} sweeps (gaps {gaps:?})"
                )));
            }
        }
    }

    let mut pattern = base.clone();
    for &e in &pinned {
        let l = lambdas[e];
        if !(l > 0.0 && l < 1.0) {
            return Err(Error::NoInteriorMixed(format!("root on {} sits at the boundary {l}", net.edge_label(e))));
        }
        pattern.edges[e] = Disposition::Mixed(l);
    }
    let mut report = build_report(net, pattern, evaluation, SIGN_TOL, Method::MixedRoot)?;
    report.metadata.iterations = Some(sweeps.max(1));
    Ok(report)
}
