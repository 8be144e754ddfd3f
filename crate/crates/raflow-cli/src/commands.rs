//! Subcommand implementations. Sweep points run on the library's ordered
//! worker-pool map, and rows are emitted in threshold order regardless of
//! completion order.

use std::fs;
use std::path::{Path, PathBuf};

use raflow::exec;
use raflow::optimizer::{self, SolverConfig, SolverError};
use raflow::simulator::{self, SimConfig};
use raflow::throughput::{self, RateVector};
use raflow::topology::Scenario;

use crate::report::{flag, num, Report};
use crate::{BaselineArgs, CheckConvexityArgs, DumpProblemArgs, PolicyArg, SimulateArgs, SolveArgs};

pub enum CliError {
    Usage(String),
    Scenario(String),
    Internal(String),
}

fn solver_err(e: SolverError) -> CliError {
    match e {
        SolverError::Scenario(_)
        | SolverError::Throughput(_)
        | SolverError::WrongTopologyShape(_) => CliError::Scenario(e.to_string()),
        SolverError::InvalidConfig(_) => CliError::Usage(e.to_string()),
        SolverError::DimensionMismatch { .. } => CliError::Internal(e.to_string()),
    }
}

fn load(path: &Path, policy: Option<PolicyArg>) -> Result<(Scenario, Vec<u8>), CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Scenario(format!("{}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::Scenario(format!("{}: not valid UTF-8", path.display())))?;
    let mut scenario =
        Scenario::from_toml_str(&text).map_err(|e| CliError::Scenario(e.to_string()))?;
    if let Some(p) = policy {
        scenario = scenario.with_interference_policy(p.into());
    }
    Ok((scenario, bytes))
}

/// Parse `A:B:S` (inclusive of B when it lands on the grid) or a single
/// positive value.
fn parse_sweep(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || {
        CliError::Usage(format!(
            "invalid sweep '{spec}'; expected START:STOP:STEP or a single value"
        ))
    };
    let nums: Vec<f64> = spec
        .split(':')
        .map(|part| part.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let values = match nums.as_slice() {
        [v] => vec![*v],
        [a, b, s] => {
            if !(*s > 0.0) {
                return Err(CliError::Usage(format!("sweep step {s} must be positive")));
            }
            if b < a {
                return Err(CliError::Usage(format!("sweep stop {b} lies below start {a}")));
            }
            let n = ((b - a) / s + 1e-9).floor() as usize + 1;
            (0..n).map(|i| a + s * i as f64).collect()
        }
        _ => return Err(bad()),
    };
    if values.iter().any(|&g| !(g > 0.0)) {
        return Err(CliError::Usage("sweep thresholds must be positive".to_string()));
    }
    Ok(values)
}

struct SweepPoint {
    gamma: f64,
    scenario: Scenario,
}

fn sweep_points(base: &Scenario, sweep: Option<&str>) -> Result<Vec<SweepPoint>, CliError> {
    match sweep {
        None => Ok(vec![SweepPoint { gamma: uniform_gamma(base), scenario: base.clone() }]),
        Some(spec) => parse_sweep(spec)?
            .into_iter()
            .map(|gamma| {
                base.with_uniform_sinr_threshold(gamma)
                    .map(|scenario| SweepPoint { gamma, scenario })
                    .map_err(|e| CliError::Scenario(e.to_string()))
            })
            .collect(),
    }
}

/// The scenario's own threshold when uniform, NaN otherwise.
fn uniform_gamma(s: &Scenario) -> f64 {
    match s.nodes().first() {
        None => f64::NAN,
        Some(first) => {
            let g = first.radio.sinr_threshold;
            if s.nodes().iter().all(|n| n.radio.sinr_threshold == g) {
                g
            } else {
                f64::NAN
            }
        }
    }
}

fn solver_config(seed: u64, restarts: Option<u32>) -> SolverConfig {
    let mut cfg = SolverConfig { seed, ..SolverConfig::default() };
    if let Some(r) = restarts {
        cfg.restarts = r;
    }
    cfg
}

fn parse_rates(spec: &str, scenario: &Scenario) -> Result<RateVector, CliError> {
    let values: Vec<f64> = spec
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("invalid rate list '{spec}'")))?;
    if values.len() != scenario.flows().len() {
        return Err(CliError::Usage(format!(
            "{} rates given but the scenario has {} flows",
            values.len(),
            scenario.flows().len()
        )));
    }
    let pairs = scenario.flows().iter().map(|f| f.id).zip(values);
    RateVector::from_pairs(pairs).map_err(|e| CliError::Usage(e.to_string()))
}

fn write_output(out: Option<&PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| CliError::Internal(format!("writing {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

pub fn cmd_solve(args: &SolveArgs) -> Result<(), CliError> {
    let (scenario, bytes) = load(&args.scenario, args.interference_policy)?;
    let points = sweep_points(&scenario, args.sweep_gamma.as_deref())?;
    let cfg = solver_config(args.seed, args.restarts);
    let flow_ids: Vec<u32> = scenario.flows().iter().map(|f| f.id).collect();

    let mut columns = vec!["gamma".to_string()];
    columns.extend(flow_ids.iter().map(|id| format!("rate_f{id}")));
    columns.extend(flow_ids.iter().map(|id| format!("tput_f{id}")));
    columns.extend(["aat", "feasible", "seed"].map(String::from));

    let rows = exec::map_ordered(&points, |pt| -> Result<Vec<String>, CliError> {
        let problem = optimizer::build_problem(&pt.scenario).map_err(solver_err)?;
        let res = optimizer::solve(&problem, &cfg).map_err(solver_err)?;
        let mut row = vec![num(pt.gamma)];
        row.extend(flow_ids.iter().map(|&id| num(res.rates.get(id).unwrap_or(0.0))));
        row.extend(flow_ids.iter().map(|&id| num(res.per_flow[&id])));
        row.push(num(res.aat));
        row.push(flag(res.feasible));
        row.push(args.seed.to_string());
        Ok(row)
    });

    let mut report = Report::new(args.seed, &bytes, &columns);
    for row in rows {
        report.push_row(&row?);
    }
    write_output(args.out.as_ref(), &report.render())
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let (scenario, bytes) = load(&args.scenario, args.interference_policy)?;
    let warmup = args.warmup.unwrap_or(args.slots / 10);
    if warmup >= args.slots {
        return Err(CliError::Usage(format!(
            "slots ({}) must exceed warmup ({warmup})",
            args.slots
        )));
    }
    let fixed_rates = match &args.rates {
        Some(spec) => Some(parse_rates(spec, &scenario)?),
        None => None,
    };
    let points: Vec<(u64, SweepPoint)> = sweep_points(&scenario, args.sweep_gamma.as_deref())?
        .into_iter()
        .enumerate()
        .map(|(i, p)| (i as u64, p))
        .collect();
    let cfg = solver_config(args.seed, args.restarts);
    let flow_ids: Vec<u32> = scenario.flows().iter().map(|f| f.id).collect();

    let mut columns = vec!["gamma".to_string()];
    columns.extend(flow_ids.iter().map(|id| format!("sim_tput_f{id}")));
    columns.extend(["sim_aat", "analytic_aat", "rel_gap"].map(String::from));
    columns.extend(flow_ids.iter().map(|id| format!("delay_mean_f{id}")));
    columns.extend(flow_ids.iter().map(|id| format!("delay_p99_f{id}")));
    columns.push("delay_bounded".to_string());

    let rows = exec::map_ordered(&points, |(idx, pt)| -> Result<Vec<String>, CliError> {
        let rates = match &fixed_rates {
            Some(r) => r.clone(),
            None => {
                let problem = optimizer::build_problem(&pt.scenario).map_err(solver_err)?;
                optimizer::solve(&problem, &cfg).map_err(solver_err)?.rates
            }
        };
        let analytic = throughput::aggregate_throughput(&rates, &pt.scenario)
            .map_err(|e| CliError::Scenario(e.to_string()))?;
        let sim_cfg = SimConfig::new(args.slots, warmup, exec::derive_seed(args.seed, *idx), rates)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let stats = simulator::run(&pt.scenario, &sim_cfg);
        let rel_gap = if analytic != 0.0 {
            (stats.aat - analytic) / analytic
        } else if stats.aat == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        let mut row = vec![num(pt.gamma)];
        row.extend(flow_ids.iter().map(|id| num(stats.per_flow_throughput[id])));
        row.push(num(stats.aat));
        row.push(num(analytic));
        row.push(num(rel_gap));
        row.extend(flow_ids.iter().map(|id| num(stats.delay[id].mean)));
        row.extend(flow_ids.iter().map(|id| num(stats.delay[id].p99)));
        row.push(flag(simulator::delay_bounded(&stats, &pt.scenario)));
        Ok(row)
    });

    let mut report = Report::new(args.seed, &bytes, &columns);
    for row in rows {
        report.push_row(&row?);
    }
    write_output(args.out.as_ref(), &report.render())
}

pub fn cmd_baseline(args: &BaselineArgs) -> Result<(), CliError> {
    let (scenario, bytes) = load(&args.scenario, args.interference_policy)?;
    let points = sweep_points(&scenario, Some(args.sweep_gamma.as_str()))?;
    let cfg = solver_config(args.seed, args.restarts);

    let columns: Vec<String> =
        ["gamma", "multipath_aat", "best_path_aat", "ratio"].map(String::from).into();
    let rows = exec::map_ordered(&points, |pt| -> Result<(Vec<String>, f64), CliError> {
        let problem = optimizer::build_problem(&pt.scenario).map_err(solver_err)?;
        let multi = optimizer::solve(&problem, &cfg).map_err(solver_err)?;
        let single = optimizer::solve_best_path(&pt.scenario, &cfg).map_err(solver_err)?;
        let ratio = multi.aat / single.aat;
        let row = vec![num(pt.gamma), num(multi.aat), num(single.aat), num(ratio)];
        Ok((row, ratio))
    });

    let mut report = Report::new(args.seed, &bytes, &columns);
    let mut ratios = Vec::with_capacity(points.len());
    for row in rows {
        let (fields, ratio) = row?;
        report.push_row(&fields);
        ratios.push(ratio);
    }
    write_output(args.out.as_ref(), &report.render())?;
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    println!("mean multipath/best-path AAT ratio: {}", num(mean));
    Ok(())
}

pub fn cmd_check_convexity(args: &CheckConvexityArgs) -> Result<(), CliError> {
    let (scenario, _) = load(&args.scenario, args.interference_policy)?;
    let scenario = match args.gamma {
        Some(g) => scenario
            .with_uniform_sinr_threshold(g)
            .map_err(|e| CliError::Usage(e.to_string()))?,
        None => scenario,
    };
    let report = optimizer::nonconvexity_condition(&scenario).map_err(solver_err)?;
    println!("lhs = {}", num(report.lhs));
    println!("rhs = {}", num(report.rhs));
    println!("holds = {}", report.holds);
    Ok(())
}

pub fn cmd_dump_problem(args: &DumpProblemArgs) -> Result<(), CliError> {
    let (scenario, _) = load(&args.scenario, args.interference_policy)?;
    let scenario = match args.gamma {
        Some(g) => scenario
            .with_uniform_sinr_threshold(g)
            .map_err(|e| CliError::Usage(e.to_string()))?,
        None => scenario,
    };
    let problem = optimizer::build_problem(&scenario).map_err(solver_err)?;
    write_output(args.out.as_ref(), &problem.render())
}
