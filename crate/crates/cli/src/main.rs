//! `netbargain`: validate trading networks, solve for limit stationary
//! equilibria, run parameter sweeps and simulate the inventory process.
//!
//! Exit codes: 0 success, 1 invalid input or domain violation, 2 I/O or
//! parse failure, 3 solver non-convergence.

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use netbargain::dynamics::{fluid_integrate, DEFAULT_HORIZON, DEFAULT_STEP};
use netbargain::equilibrium::{
    cheapest_route_check, enumerate_pure, fixed_point_iterate, solve_mixed, two_hop_closed_form, verify_with,
    EquilibriumReport, FixedPointConfig, FixedPointStart,
};
use netbargain::network::{builtin, NetworkFile, NodeClass, Patience, TradingNetwork, BUILTIN_NAMES};
use netbargain::pattern::TradePattern;
use netbargain::payoffs::{Evaluation, SIGN_TOL};
use netbargain::simulate::{
    convergence_csv, convergence_sweep, estimate_payoffs, occupancy_trace_csv, simulate_inventory, InitialStock,
    SimConfig,
};
use netbargain::sweep::{
    parse_grid, run_sweep, single_mixed_equilibria, write_sweep_csv, SweepParameter, SweepSpec, SweepTask,
};
use netbargain::Error;

#[derive(Parser)]
#[command(name = "netbargain", version, about = "Search-and-bargaining equilibria with middlemen on trading networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct NetworkArgs {
    /// Network file, or `builtin:<name>` (see `netbargain builtins`).
    network: String,
    /// Override the patience parameter with uniform `f`.
    #[arg(long, conflicts_with = "delta")]
    f: Option<f64>,
    /// Override the discount factor.
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Args, Clone)]
struct EvalArgs {
    /// Evaluate in the patience limit.
    #[arg(long, conflicts_with = "finite_k")]
    patient: bool,
    /// Evaluate the k-th replicated economy instead of the limit.
    #[arg(long)]
    finite_k: Option<f64>,
}

impl EvalArgs {
    fn evaluation(&self) -> Evaluation {
        match (self.patient, self.finite_k) {
            (true, _) => Evaluation::Patient,
            (false, Some(k)) => Evaluation::Finite { k },
            (false, None) => Evaluation::Limit,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a network file and list every violation.
    Validate {
        #[command(flatten)]
        net: NetworkArgs,
        #[arg(long)]
        json: bool,
    },
    /// Verify a pattern, enumerate pure equilibria or solve for mixed ones.
    Solve {
        #[command(flatten)]
        net: NetworkArgs,
        #[command(flatten)]
        eval: EvalArgs,
        /// Pattern, e.g. `always`, `always;never:1-4`, `mixed:1-2=auto`.
        #[arg(long, default_value = "always")]
        pattern: String,
        /// List every verified pure pattern.
        #[arg(long, conflicts_with_all = ["mixed", "single_mixed", "fixed_point"])]
        enumerate: bool,
        /// Edges (comma separated) whose probabilities are solved for, on top of `--pattern`.
        #[arg(long, value_delimiter = ',')]
        mixed: Vec<String>,
        /// Try every single mixed edge over every pure base pattern.
        #[arg(long, conflicts_with_all = ["mixed", "fixed_point"])]
        single_mixed: bool,
        /// Run the smoothed fixed-point iteration from uniform probabilities `--start`.
        #[arg(long, conflicts_with = "mixed")]
        fixed_point: bool,
        #[arg(long, default_value_t = 0.5)]
        start: f64,
        #[arg(long)]
        json: bool,
    },
    /// Tabulate equilibria over a parameter grid as CSV.
    Sweep {
        #[command(flatten)]
        net: NetworkArgs,
        #[command(flatten)]
        eval: EvalArgs,
        /// `f`, `delta`, `x`, `edge-cost:<from-to>` or `consumer-value:<node>`.
        #[arg(long)]
        param: String,
        /// `start:stop:step` or a comma-separated list.
        #[arg(long)]
        grid: String,
        /// Verify this pattern at each point (the base pattern with `--mixed`).
        #[arg(long)]
        pattern: Option<String>,
        #[arg(long)]
        enumerate: bool,
        /// With `--enumerate`, also search single mixed edges.
        #[arg(long)]
        single_mixed: bool,
        /// Closed form of the two-hop network.
        #[arg(long)]
        two_hop: bool,
        #[arg(long, value_delimiter = ',')]
        mixed: Vec<String>,
        /// Output file; standard output if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo of the replicated economy's middleman inventories.
    Simulate {
        #[command(flatten)]
        net: NetworkArgs,
        #[arg(long, default_value = "always")]
        pattern: String,
        #[arg(long, default_value_t = 100)]
        k: u64,
        /// Several replication factors, ascending; overrides `--k`.
        #[arg(long, value_delimiter = ',')]
        ks: Vec<u64>,
        #[arg(long, default_value_t = 1_000_000)]
        periods: u64,
        /// Defaults to a tenth of the periods.
        #[arg(long)]
        burn_in: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        replicas: usize,
        /// `steady`, `empty` or `full`.
        #[arg(long, default_value = "steady")]
        initial: String,
        /// Also estimate payoffs from this many tagged agents per node and state.
        #[arg(long)]
        payoffs: Option<usize>,
        /// Write the occupancy trace of replica 0 every this many periods.
        #[arg(long, requires = "trace_out")]
        trace_every: Option<u64>,
        #[arg(long)]
        trace_out: Option<PathBuf>,
        /// CSV of the per-k deviations.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Integrate the fluid-limit inventory dynamics.
    Fluid {
        #[command(flatten)]
        net: NetworkArgs,
        #[arg(long, default_value = "always")]
        pattern: String,
        /// Initial holding fraction per middleman (comma separated); 0 if absent.
        #[arg(long, value_delimiter = ',')]
        init: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_HORIZON)]
        horizon: f64,
        #[arg(long, default_value_t = DEFAULT_STEP)]
        step: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that traded routes are of minimum cost.
    Routes {
        #[command(flatten)]
        net: NetworkArgs,
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long, default_value = "always")]
        pattern: String,
        /// Slack of the surplus bound; ten times the effective patience if absent.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        json: bool,
    },
    /// List builtin networks, or print one as a network file.
    Builtins { name: Option<String> },
}

enum Failure {
    Lib(Error),
    /// Invalid request that the library cannot see, e.g. conflicting flags.
    Usage(String),
    NoConvergence(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Lib(Error::Io(_) | Error::Json(_)) => 2,
            Failure::Lib(Error::NoInteriorMixed(_)) | Failure::NoConvergence(_) => 3,
            Failure::Lib(_) | Failure::Usage(_) => 1,
        }
    }
}

type Outcome = Result<(), Failure>;

/// The network file with patience overrides applied, not yet validated.
fn read(args: &NetworkArgs) -> Result<NetworkFile, Failure> {
    let mut file = match args.network.strip_prefix("builtin:") {
        Some(name) => builtin(name)?.to_file(),
        None => NetworkFile::load(&args.network).map_err(|e| match e {
            Error::Io(io) => Error::Io(io::Error::new(io.kind(), format!("{}: {io}", args.network))),
            e => e,
        })?,
    };
    if let Some(f) = args.f {
        file.set_patience(Patience::Uniform(f));
    }
    if let Some(d) = args.delta {
        file.set_patience(Patience::Discount(d));
    }
    Ok(file)
}

fn load(args: &NetworkArgs) -> Result<TradingNetwork, Failure> {
    Ok(read(args)?.build()?)
}

fn print_json(v: &Value) -> Outcome {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v).map_err(Error::Json)?;
    writeln!(out)?;
    Ok(())
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(", ")
}

fn print_report(net: &TradingNetwork, r: &EquilibriumReport) {
    println!("pattern   {}", r.pattern.to_spec_string(net));
    println!("verified  {} ({:?})", r.verified, r.method);
    let mu: Vec<String> =
        net.middlemen().iter().zip(&r.state.mu).map(|(&m, x)| format!("{}={x:.6}", net.node_id(m))).collect();
    if !mu.is_empty() {
        println!("mu        {}", mu.join(" "));
    }
    if let Some(p) = &r.profile {
        if p.extrapolated {
            println!("payoffs extrapolated to the patience limit");
        }
        for v in 0..net.nodes().len() {
            println!("  node {:>4} {:<9} u0 = {:>10.6}  u1 = {:>10.6}", net.node_id(v), net.class(v).to_string(), p.u0[v], p.u1[v]);
        }
        for e in 0..net.edges().len() {
            let mark = if r.boundary.contains(&e) { "  (boundary)" } else { "" };
            println!("  edge {:>7} lambda = {:.6}  z = {:>12.6e}{mark}", net.edge_label(e), r.pattern.edges[e].lambda(), p.z[e]);
        }
    }
    for v in &r.violations.violations {
        println!("  violation: {v}");
    }
    if let Some(d) = &r.diagnostic {
        println!("  note: {d}");
    }
}

/// Closed-form parameters `(a, b, V, pi12, pi23)` when the network is a
/// single producer-middleman-consumer chain with equal populations.
fn two_hop_shape(net: &TradingNetwork) -> Option<(f64, f64, f64, f64, f64)> {
    if net.nodes().len() != 3 || net.edges().len() != 2 || net.middlemen().len() != 1 {
        return None;
    }
    let pop = net.nodes()[0].population;
    if net.nodes().iter().any(|n| n.population != pop) {
        return None;
    }
    let m = net.middlemen()[0];
    let (ins, outs) = net.middleman_edges(m);
    let (&i, &o) = (ins.first()?, outs.first()?);
    let (supply, resale) = (&net.edges()[i], &net.edges()[o]);
    if supply.to != m || resale.from != m || net.class(supply.from) != NodeClass::Producer {
        return None;
    }
    Some((supply.cost, resale.cost, net.value(resale.to), supply.pi, resale.pi))
}

fn closed_form_json(net: &TradingNetwork) -> Option<Value> {
    let (a, b, v, p12, p23) = two_hop_shape(net)?;
    let s = two_hop_closed_form(a, b, v, p12, p23).ok()?;
    serde_json::to_value(s).ok()
}

fn emit_reports(net: &TradingNetwork, reports: &[EquilibriumReport], json: bool, extra: Option<Value>) -> Outcome {
    if json {
        let mut doc = json!({ "equilibria": reports.iter().map(|r| r.to_json(net)).collect::<Vec<_>>() });
        if let Some(x) = extra {
            doc["closed_form"] = x;
        }
        return print_json(&doc);
    }
    if reports.is_empty() {
        println!("no equilibrium found");
    }
    for (i, r) in reports.iter().enumerate() {
        if reports.len() > 1 {
            println!("-- equilibrium {i}");
        }
        print_report(net, r);
    }
    if let Some(x) = extra {
        println!("closed form: {x}");
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(
    args: &NetworkArgs,
    eval: &EvalArgs,
    pattern: &str,
    enumerate: bool,
    mixed: &[String],
    single_mixed: bool,
    fixed_point: bool,
    start: f64,
    json: bool,
) -> Outcome {
    let net = load(args)?;
    let evaluation = eval.evaluation();
    let closed = if eval.patient { closed_form_json(&net) } else { None };
    if enumerate {
        let reports = enumerate_pure(&net, evaluation)?;
        return emit_reports(&net, &reports, json, closed);
    }
    if single_mixed {
        let mut reports = enumerate_pure(&net, evaluation)?;
        reports.extend(single_mixed_equilibria(&net, evaluation)?);
        return emit_reports(&net, &reports, json, closed);
    }
    if fixed_point {
        let cfg = FixedPointConfig { evaluation, ..FixedPointConfig::default() };
        let out = fixed_point_iterate(&net, &FixedPointStart::uniform(&net, start), &cfg)?;
        if json {
            let mut doc = serde_json::to_value(&out).map_err(Error::Json)?;
            doc["report"] = out.report.as_ref().map(|r| r.to_json(&net)).unwrap_or(Value::Null);
            print_json(&doc)?;
        } else {
            println!("fixed point: {} iterations, residual {:.3e}, tau {:.1e}", out.iterations, out.residual, out.tau);
            if let Some(r) = &out.report {
                print_report(&net, r);
            }
        }
        return match (out.converged, out.diagnostic) {
            (true, _) => Ok(()),
            (false, d) => Err(Failure::NoConvergence(d.unwrap_or_default())),
        };
    }

    let spec = TradePattern::parse(&net, pattern)?;
    let mut free = spec.auto.clone();
    for label in mixed {
        let e = net.edge_by_label(label)?;
        if !free.contains(&e) {
            free.push(e);
        }
    }
    let report = if free.is_empty() {
        verify_with(&net, &spec.pattern, evaluation, SIGN_TOL)?
    } else {
        solve_mixed(&net, &spec.pattern, &free, evaluation)?
    };
    emit_reports(&net, &[report], json, closed)
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    args: &NetworkArgs,
    eval: &EvalArgs,
    param: &str,
    grid: &str,
    pattern: Option<String>,
    enumerate: bool,
    single_mixed: bool,
    two_hop: bool,
    mixed: Vec<String>,
    out: Option<PathBuf>,
) -> Outcome {
    let net = load(args)?;
    let chosen = [enumerate, two_hop, !mixed.is_empty()].iter().filter(|&&x| x).count();
    if chosen > 1 || (chosen == 1 && pattern.is_some() && mixed.is_empty()) {
        return Err(Failure::Usage("choose one of --pattern, --enumerate, --two-hop or --mixed (with an optional --pattern base)".into()));
    }
    let task = if enumerate {
        SweepTask::Enumerate { single_mixed }
    } else if two_hop {
        SweepTask::TwoHop
    } else if !mixed.is_empty() {
        SweepTask::Mixed { base: pattern.unwrap_or_else(|| "always".into()), edges: mixed }
    } else {
        SweepTask::Verify(pattern.unwrap_or_else(|| "always".into()))
    };
    let spec = SweepSpec { parameter: param.parse::<SweepParameter>()?, grid: parse_grid(grid)?, task, evaluation: eval.evaluation() };
    let rows = run_sweep(&net, &spec)?;
    match out {
        Some(path) => {
            write_sweep_csv(&net, &rows, File::create(&path)?)?;
            eprintln!("{} rows written to {}", rows.len(), path.display());
        }
        None => write_sweep_csv(&net, &rows, io::stdout().lock())?,
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    args: &NetworkArgs,
    pattern: &str,
    k: u64,
    ks: Vec<u64>,
    periods: u64,
    burn_in: Option<u64>,
    seed: u64,
    replicas: usize,
    initial: &str,
    payoffs: Option<usize>,
    trace: Option<(u64, PathBuf)>,
    out: Option<PathBuf>,
    json: bool,
) -> Outcome {
    let net = load(args)?;
    if !matches!(net.patience(), Patience::Discount(_)) {
        return Err(Failure::Usage("simulation needs a discount factor; pass --delta".into()));
    }
    let pattern = TradePattern::parse(&net, pattern)?;
    if !pattern.auto.is_empty() {
        return Err(Failure::Usage("simulation needs explicit probabilities, not `auto`".into()));
    }
    let pattern = pattern.pattern;
    let initial = match initial {
        "steady" => InitialStock::Steady,
        "empty" => InitialStock::Empty,
        "full" => InitialStock::Full,
        other => return Err(Failure::Usage(format!("unknown initial stock `{other}`"))),
    };
    let mut cfg = SimConfig { replicas, initial, ..SimConfig::new(k, periods, seed) };
    if let Some(b) = burn_in {
        cfg.burn_in = b;
    }
    let ks = if ks.is_empty() { vec![k] } else { ks };

    let rows = convergence_sweep(&net, &pattern, &ks, &cfg)?;
    let mut doc = json!({ "config": cfg, "rows": rows });
    if let Some((every, path)) = trace {
        let est = simulate_inventory(&net, &pattern, &SimConfig { k: ks[ks.len() - 1], trace_every: Some(every), ..cfg.clone() })?;
        std::fs::write(&path, occupancy_trace_csv(&est))?;
    }
    let payoff_est = match payoffs {
        Some(n) => Some(estimate_payoffs(&net, &pattern, &SimConfig { k: ks[ks.len() - 1], ..cfg.clone() }, n)?),
        None => None,
    };
    if let Some(p) = &payoff_est {
        doc["payoffs"] = serde_json::to_value(p).map_err(Error::Json)?;
    }
    if let Some(path) = &out {
        std::fs::write(path, convergence_csv(&rows))?;
    }

    if json {
        return print_json(&doc);
    }
    println!("{:>8} {:>6} {:>10} {:>10} {:>10} {:>10} {:>10}", "k", "node", "estimate", "stderr", "mu", "rms dev", "stderr");
    for r in &rows {
        println!(
            "{:>8} {:>6} {:>10.6} {:>10.6} {:>10.6} {:>10.6} {:>10.6}",
            r.k, r.node, r.estimate, r.stderr, r.mu, r.deviation, r.deviation_stderr
        );
    }
    if let Some(p) = payoff_est {
        println!("payoffs (95% intervals, discount {:.6} per period):", p.discount);
        for n in &p.nodes {
            for (name, iv, exact) in [("u0", &n.u0, n.analytic_u0), ("u1", &n.u1, n.analytic_u1)] {
                if let Some(iv) = iv {
                    println!("  node {:>4} {name} = {:.6} ± {:.6}  (finite-k solution {:.6})", n.id, iv.mean, iv.half_width, exact);
                }
            }
        }
    }
    Ok(())
}

fn cmd_fluid(args: &NetworkArgs, pattern: &str, init: Vec<f64>, horizon: f64, step: f64, out: Option<PathBuf>) -> Outcome {
    let net = load(args)?;
    let pattern = TradePattern::parse(&net, pattern)?.pattern;
    let init = if init.is_empty() { vec![0.0; net.middlemen().len()] } else { init };
    let traj = fluid_integrate(&net, &pattern, &init, horizon, step)?;
    match out {
        Some(path) => {
            std::fs::write(&path, traj.to_csv())?;
            println!("steady state  {}", fmt_list(&traj.target));
            println!("terminal      {}", fmt_list(traj.terminal()));
            println!("residual      {:.3e}", traj.residual);
        }
        None => print!("{}", traj.to_csv()),
    }
    Ok(())
}

fn cmd_routes(args: &NetworkArgs, eval: &EvalArgs, pattern: &str, eps: Option<f64>, json: bool) -> Outcome {
    let net = load(args)?;
    let pattern = TradePattern::parse(&net, pattern)?.pattern;
    let r = verify_with(&net, &pattern, eval.evaluation(), SIGN_TOL)?;
    let routes = cheapest_route_check(&net, &r, eps);
    if json {
        return print_json(&json!({ "verified": r.verified, "routes": routes }));
    }
    println!("pattern {} verified={}", pattern.to_spec_string(&net), r.verified);
    for p in &routes.pairs {
        println!(
            "{} -> {}: min cost {:.6}, surplus {:.6}, bound {:.6} ({})",
            p.producer,
            p.consumer,
            p.min_cost,
            p.surplus,
            p.bound,
            if p.bound_holds { "holds" } else { "fails" }
        );
        for route in &p.routes {
            let flag = if route.flagged { "  FLAG: traded above minimum cost" } else { "" };
            println!("    {:<16} cost {:.6} traded {}{flag}", route.path.join("-"), route.cost, route.traded);
        }
    }
    println!("{}", if routes.clean() { "clean" } else { "flags raised" });
    Ok(())
}

fn cmd_builtins(name: Option<String>) -> Outcome {
    match name {
        None => {
            for n in BUILTIN_NAMES {
                println!("{n}");
            }
        }
        Some(n) => println!("{}", builtin(&n)?.to_file().to_json()),
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Validate { net, json } => {
            let file = read(&net)?;
            let report = file.validate();
            if json {
                print_json(&json!({ "valid": report.is_ok(), "violations": report.violations }))?;
            } else if report.is_ok() {
                println!("ok: {} nodes, {} edges", file.nodes.len(), file.edges.len());
            }
            if report.is_ok() {
                Ok(())
            } else {
                Err(Failure::Lib(Error::InvalidNetwork(report)))
            }
        }
        Command::Solve { net, eval, pattern, enumerate, mixed, single_mixed, fixed_point, start, json } => {
            cmd_solve(&net, &eval, &pattern, enumerate, &mixed, single_mixed, fixed_point, start, json)
        }
        Command::Sweep { net, eval, param, grid, pattern, enumerate, single_mixed, two_hop, mixed, out } => {
            cmd_sweep(&net, &eval, &param, &grid, pattern, enumerate, single_mixed, two_hop, mixed, out)
        }
        Command::Simulate {
            net,
            pattern,
            k,
            ks,
            periods,
            burn_in,
            seed,
            replicas,
            initial,
            payoffs,
            trace_every,
            trace_out,
            out,
            json,
        } => cmd_simulate(
            &net,
            &pattern,
            k,
            ks,
            periods,
            burn_in,
            seed,
            replicas,
            &initial,
            payoffs,
            trace_every.zip(trace_out),
            out,
            json,
        ),
        Command::Fluid { net, pattern, init, horizon, step, out } => cmd_fluid(&net, &pattern, init, horizon, step, out),
        Command::Routes { net, eval, pattern, eps, json } => cmd_routes(&net, &eval, &pattern, eps, json),
        Command::Builtins { name } => cmd_builtins(name),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Lib(e) => eprintln!("error: {e}"),
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::NoConvergence(m) => eprintln!("error: solver did not converge: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
