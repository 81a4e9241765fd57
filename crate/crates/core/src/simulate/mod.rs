//! Monte Carlo of the replicated economy's inventory process and payoffs.
//!
//! Each period one edge is drawn from the matching distribution; a
//! producer-middleman draw adds a unit to the middleman population with
//! probability `(1 - X/(kN)) lambda`, a middleman-consumer draw removes one with
//! probability `(X/(kN)) lambda`. Agents within a population are exchangeable,
//! so only the counts `X` are tracked.
//!
//! Randomness comes from ChaCha8 seeded with `seed`; replica `r` uses stream
//! `r` of that seed, and results are reduced in replica order, so outputs are
//! bit-reproducible regardless of thread scheduling.

mod payoff;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::steady_state;
use crate::error::{Error, Result};
use crate::network::{EdgeKind, TradingNetwork};
use crate::pattern::TradePattern;

pub use payoff::{estimate_payoffs, NodePayoffEstimate, PayoffEstimate, PayoffInterval};

const BATCHES: u64 = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialStock {
    /// `round(mu_m k N_m)`.
    Steady,
    Empty,
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimConfig {
    pub k: u64,
    pub periods: u64,
    pub seed: u64,
    pub burn_in: u64,
    pub replicas: usize,
    pub initial: InitialStock,
    /// Record holding fractions of replica 0 every this many periods.
    pub trace_every: Option<u64>,
}

impl SimConfig {
    pub fn new(k: u64, periods: u64, seed: u64) -> SimConfig {
        SimConfig { k, periods, seed, burn_in: periods / 10, replicas: 1, initial: InitialStock::Steady, trace_every: None }
    }

    fn check(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Parameter("replication factor k must be positive".into()));
        }
        if self.periods == 0 || self.burn_in >= self.periods {
            return Err(Error::Parameter(format!(
                "burn-in {} must be smaller than the horizon {}",
                self.burn_in, self.periods
            )));
        }
        if self.replicas == 0 {
            return Err(Error::Parameter("at least one replica is needed".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OccupancyEstimate {
    pub ids: Vec<String>,
    /// Time-averaged holding fraction per middleman.
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Root-mean-square distance of the holding fraction from `mu`.
    pub rms_dev: Vec<f64>,
    pub rms_dev_stderr: Vec<f64>,
    pub mu: Vec<f64>,
    /// Averaged periods, summed over replicas.
    pub samples: u64,
    pub min_count: Vec<u64>,
    pub max_count: Vec<u64>,
    /// `(period, fractions)` of replica 0.
    pub trace: Vec<(u64, Vec<f64>)>,
}

/// Scaled population `k N` of every node, which must be integral.
pub(crate) fn scaled_populations(net: &TradingNetwork, k: u64) -> Result<Vec<u64>> {
    net.nodes()
        .iter()
        .map(|n| {
            let s = n.population * k as f64;
            if s.fract() != 0.0 || s < 1.0 {
                Err(Error::Parameter(format!("population of node {} times k = {s} is not a positive integer", n.id)))
            } else {
                Ok(s as u64)
            }
        })
        .collect()
}

/// Inventory-relevant view of the matching distribution.
#[derive(Clone)]
pub(crate) struct Chain {
    cumulative: Vec<f64>,
    /// Per edge: (slot, +1 for supply, -1 for resale, 0 for direct), lambda.
    moves: Vec<(usize, i8, f64)>,
    pub capacity: Vec<u64>,
    pub stock: Vec<u64>,
}

impl Chain {
    pub(crate) fn new(net: &TradingNetwork, pattern: &TradePattern, k: u64, initial: InitialStock) -> Result<Chain> {
        if pattern.edges.len() != net.edges().len() {
            return Err(Error::Parameter("pattern does not match the network".into()));
        }
        let pops = scaled_populations(net, k)?;
        let mut acc = 0.0;
        let cumulative = net
            .edges()
            .iter()
            .map(|l| {
                acc += l.pi;
                acc
            })
            .collect();
        let lambdas = pattern.lambdas();
        let moves = net
            .edges()
            .iter()
            .zip(&lambdas)
            .map(|(l, &lam)| match l.kind {
                EdgeKind::Supply => (net.middleman_slot(l.to).unwrap(), 1, lam),
                EdgeKind::Resale => (net.middleman_slot(l.from).unwrap(), -1, lam),
                EdgeKind::Direct => (0, 0, lam),
            })
            .collect();
        let capacity: Vec<u64> = net.middlemen().iter().map(|&m| pops[m]).collect();
        let mu = steady_state(net, pattern).mu;
        let stock = capacity
            .iter()
            .zip(&mu)
            .map(|(&c, &m)| match initial {
                InitialStock::Steady => (m * c as f64).round() as u64,
                InitialStock::Empty => 0,
                InitialStock::Full => c,
            })
            .collect();
        Ok(Chain { cumulative, moves, capacity, stock })
    }

    pub(crate) fn pick(&self, u: f64) -> usize {
        let last = self.cumulative.len() - 1;
        self.cumulative.iter().position(|&c| u < c).unwrap_or(last)
    }

    /// Advances one period with the already drawn edge; returns the slot whose
    /// count changed and its previous count.
    pub(crate) fn step_edge<R: Rng>(&mut self, e: usize, rng: &mut R) -> Option<(usize, u64)> {
        let (slot, dir, lam) = self.moves[e];
        if dir == 0 || lam == 0.0 {
            return None;
        }
        let x = self.stock[slot];
        let cap = self.capacity[slot];
        let frac = x as f64 / cap as f64;
        let p = if dir > 0 { (1.0 - frac) * lam } else { frac * lam };
        if rng.random::<f64>() < p {
            self.stock[slot] = if dir > 0 { (x + 1).min(cap) } else { x.saturating_sub(1) };
            Some((slot, x))
        } else {
            None
        }
    }

    pub(crate) fn step<R: Rng>(&mut self, rng: &mut R) -> usize {
        let e = self.pick(rng.random::<f64>());
        self.step_edge(e, rng);
        e
    }

    pub(crate) fn fraction(&self, slot: usize) -> f64 {
        self.stock[slot] as f64 / self.capacity[slot] as f64
    }
}

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct ReplicaResult {
    /// Per batch, per slot: mean fraction and mean squared deviation.
    batches: Vec<(Vec<f64>, Vec<f64>)>,
    min: Vec<u64>,
    max: Vec<u64>,
    trace: Vec<(u64, Vec<f64>)>,
}

fn run_replica(chain: &Chain, mu: &[f64], cfg: &SimConfig, replica: usize) -> ReplicaResult {
    let mut chain = chain.clone();
    let mut rng = rng_for(cfg.seed, replica as u64);
    let m = mu.len();
    let mut trace = Vec::new();
    let tracing = if replica == 0 { cfg.trace_every } else { None };
    let record = |t: u64, chain: &Chain, trace: &mut Vec<(u64, Vec<f64>)>| {
        if let Some(every) = tracing {
            if every > 0 && t % every == 0 {
                trace.push((t, (0..m).map(|s| chain.fraction(s)).collect()));
            }
        }
    };
    record(0, &chain, &mut trace);
    for t in 1..=cfg.burn_in {
        chain.step(&mut rng);
        record(t, &chain, &mut trace);
    }
    let span = cfg.periods - cfg.burn_in;
    let nb = BATCHES.min(span);
    let mut min = chain.stock.clone();
    let mut max = chain.stock.clone();
    let mut batches = Vec::with_capacity(nb as usize);
    let mut t = cfg.burn_in;
    for b in 0..nb {
        let len = span / nb + u64::from(b < span % nb);
        let mut sum = vec![0.0; m];
        let mut sq = vec![0.0; m];
        // Accumulate each count over the periods it was held.
        let mut since = vec![0u64; m];
        for i in 0..len {
            t += 1;
            let e = chain.pick(rng.random::<f64>());
            if let Some((s, before)) = chain.step_edge(e, &mut rng) {
                let f = before as f64 / chain.capacity[s] as f64;
                let held = (i - since[s]) as f64;
                sum[s] += f * held;
                sq[s] += (f - mu[s]) * (f - mu[s]) * held;
                since[s] = i;
                min[s] = min[s].min(chain.stock[s]);
                max[s] = max[s].max(chain.stock[s]);
            }
            record(t, &chain, &mut trace);
        }
        for s in 0..m {
            let f = chain.fraction(s);
            let held = (len - since[s]) as f64;
            sum[s] += f * held;
            sq[s] += (f - mu[s]) * (f - mu[s]) * held;
        }
        let n = len as f64;
        batches.push((sum.iter().map(|x| x / n).collect(), sq.iter().map(|x| x / n).collect()));
    }
    ReplicaResult { batches, min, max, trace }
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Time-averaged middleman holding fractions with batch-means standard errors.
pub fn simulate_inventory(net: &TradingNetwork, pattern: &TradePattern, cfg: &SimConfig) -> Result<OccupancyEstimate> {
    cfg.check()?;
    let chain = Chain::new(net, pattern, cfg.k, cfg.initial)?;
    let mu = steady_state(net, pattern).mu;
    let results: Vec<ReplicaResult> =
        (0..cfg.replicas).into_par_iter().map(|r| run_replica(&chain, &mu, cfg, r)).collect();

    let m = mu.len();
    let mut est = OccupancyEstimate {
        ids: net.middlemen().iter().map(|&v| net.node_id(v).to_string()).collect(),
        mean: vec![0.0; m],
        stderr: vec![0.0; m],
        rms_dev: vec![0.0; m],
        rms_dev_stderr: vec![0.0; m],
        mu: mu.clone(),
        samples: (cfg.periods - cfg.burn_in) * cfg.replicas as u64,
        min_count: (0..m).map(|s| results.iter().map(|r| r.min[s]).min().unwrap()).collect(),
        max_count: (0..m).map(|s| results.iter().map(|r| r.max[s]).max().unwrap()).collect(),
        trace: results[0].trace.clone(),
    };
    for s in 0..m {
        let means: Vec<f64> = results.iter().flat_map(|r| r.batches.iter().map(|b| b.0[s])).collect();
        let sqs: Vec<f64> = results.iter().flat_map(|r| r.batches.iter().map(|b| b.1[s])).collect();
        let (mean, se) = mean_and_stderr(&means);
        let (msd, msd_se) = mean_and_stderr(&sqs);
        est.mean[s] = mean;
        est.stderr[s] = se;
        est.rms_dev[s] = msd.sqrt();
        est.rms_dev_stderr[s] = if msd > 0.0 { msd_se / (2.0 * msd.sqrt()) } else { 0.0 };
    }
    Ok(est)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub k: u64,
    pub node: String,
    pub estimate: f64,
    pub stderr: f64,
    pub mu: f64,
    /// Root-mean-square distance of the holding fraction from `mu`.
    pub deviation: f64,
    pub deviation_stderr: f64,
}

/// Simulates each replication factor in turn (`cfg.k` is ignored) and
/// tabulates how far the occupancy strays from the fluid steady state.
pub fn convergence_sweep(
    net: &TradingNetwork,
    pattern: &TradePattern,
    ks: &[u64],
    cfg: &SimConfig,
) -> Result<Vec<ConvergenceRow>> {
    if ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Parameter("k-list must be strictly ascending".into()));
    }
    let mut rows = Vec::new();
    for &k in ks {
        let est = simulate_inventory(net, pattern, &SimConfig { k, ..cfg.clone() })?;
        for s in 0..est.ids.len() {
            rows.push(ConvergenceRow {
                k,
                node: est.ids[s].clone(),
                estimate: est.mean[s],
                stderr: est.stderr[s],
                mu: est.mu[s],
                deviation: est.rms_dev[s],
                deviation_stderr: est.rms_dev_stderr[s],
            });
        }
    }
    Ok(rows)
}

/// Largest deviation among the rows of replication factor `k`, with its standard error.
pub fn max_deviation(rows: &[ConvergenceRow], k: u64) -> Option<(f64, f64)> {
    rows.iter()
        .filter(|r| r.k == k)
        .map(|r| (r.deviation, r.deviation_stderr))
        .fold(None, |acc, x| match acc {
            Some(a) if a.0 >= x.0 => Some(a),
            _ => Some(x),
        })
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from("k,node,estimate,stderr,mu,deviation\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{},{},{}\n", r.k, r.node, r.estimate, r.stderr, r.mu, r.deviation));
    }
    out
}

pub fn occupancy_trace_csv(est: &OccupancyEstimate) -> String {
    let mut out = format!("period,{}\n", est.ids.join(","));
    for (t, row) in &est.trace {
        out.push_str(&t.to_string());
        for x in row {
            out.push_str(&format!(",{x}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{network2, two_hop};

    #[test]
    fn never_pattern_keeps_initial_stock() {
        let net = network2();
        let p = TradePattern::never(&net);
        let cfg = SimConfig { initial: InitialStock::Full, ..SimConfig::new(10, 10_000, 3) };
        let est = simulate_inventory(&net, &p, &cfg).unwrap();
        assert_eq!(est.mean, vec![1.0, 1.0]);
        assert_eq!(est.min_count, vec![10, 10]);
    }

    #[test]
    fn reproducible() {
        let net = network2();
        let p = TradePattern::always(&net);
        let cfg = SimConfig { replicas: 3, ..SimConfig::new(20, 20_000, 11) };
        let a = simulate_inventory(&net, &p, &cfg).unwrap();
        let b = simulate_inventory(&net, &p, &cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate_inventory(&net, &p, &SimConfig { seed: 12, ..cfg }).unwrap();
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn counts_stay_in_range_from_the_boundaries() {
        let net = two_hop(0.0, 0.0, 1.0, 0.5, 0.5).unwrap();
        let p = TradePattern::always(&net);
        for initial in [InitialStock::Empty, InitialStock::Full] {
            let cfg = SimConfig { initial, burn_in: 0, ..SimConfig::new(2, 5_000, 1) };
            let est = simulate_inventory(&net, &p, &cfg).unwrap();
            assert!(est.max_count[0] <= 2);
            assert!((0.0..=1.0).contains(&est.mean[0]));
        }
    }

    #[test]
    fn non_integer_population_is_rejected() {
        let mut file = network2().to_file();
        file.nodes[2].population = 1.5;
        let net = file.build().unwrap();
        let r = simulate_inventory(&net, &TradePattern::always(&net), &SimConfig::new(1, 100, 0));
        assert!(matches!(r, Err(Error::Parameter(_))));
        assert!(simulate_inventory(&net, &TradePattern::always(&net), &SimConfig::new(2, 100, 0)).is_ok());
    }

    #[test]
    fn bad_config() {
        let net = network2();
        let p = TradePattern::always(&net);
        let cfg = SimConfig { burn_in: 100, ..SimConfig::new(1, 100, 0) };
        assert!(simulate_inventory(&net, &p, &cfg).is_err());
        assert!(convergence_sweep(&net, &p, &[100, 10], &SimConfig::new(1, 1000, 0)).is_err());
    }

    #[test]
    fn trace_and_csv() {
        let net = network2();
        let p = TradePattern::always(&net);
        let cfg = SimConfig { trace_every: Some(100), ..SimConfig::new(5, 1_000, 0) };
        let est = simulate_inventory(&net, &p, &cfg).unwrap();
        assert_eq!(est.trace.len(), 11);
        assert!(occupancy_trace_csv(&est).starts_with("period,3,4\n0,"));
        let rows = convergence_sweep(&net, &p, &[1, 2], &cfg).unwrap();
        let csv = convergence_csv(&rows);
        assert!(csv.starts_with("k,node,estimate,stderr,mu,deviation\n1,3,"));
        assert_eq!(csv.lines().count(), 5);
    }
}
