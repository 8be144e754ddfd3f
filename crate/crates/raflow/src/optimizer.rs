//! Source-rate optimization.
//!
//! [`build_problem`] materializes the smooth allocation problem: maximize
//! the sum over flows of the path throughput, written with one auxiliary
//! variable per multi-hop path, subject to
//!
//! * S1 — source rates in `[0, 1]`;
//! * S2 — along every multi-hop path, each link's throughput must not
//!   exceed its successor's (bounded relay queues, hence bounded delay);
//! * S3 — auxiliaries in `[0, 1]`;
//! * S4 — each auxiliary bounded by every link throughput of its path.
//!
//! [`solve`] runs penalized simulated annealing over the source rates; the
//! auxiliaries are eliminated inside the solver (each evaluates to the
//! minimum link throughput of its path, making the objective the plain
//! sum-of-minima), while the materialized problem retains them for
//! inspection and audits. The two evaluation modes agree exactly, which is
//! test-enforced.
//!
//! [`solve_best_path`] is the single-path baseline: it keeps only the flow
//! whose path has the highest end-to-end success probability and solves the
//! single-flow problem. [`nonconvexity_condition`] evaluates the inequality
//! under which the two-flow/one-relay toy problem is non-convex.

use std::collections::BTreeMap;
use std::fmt;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::channel;
use crate::exec;
use crate::throughput::{RateVector, ThroughputError, ThroughputModel};
use crate::topology::{Scenario, ScenarioError};

/// Constraint tolerance for the final feasibility audit.
pub const FEASIBILITY_TOL: f64 = 1e-6;

/// Rates below this are reported as exactly zero (path left unutilized).
pub const UNUSED_RATE_EPS: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub enum SolverError {
    Scenario(ScenarioError),
    Throughput(ThroughputError),
    DimensionMismatch { expected: usize, got: usize },
    InvalidConfig(String),
    WrongTopologyShape(String),
}

impl fmt::Display for SolverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Scenario(e) => write!(f, "{e}"),
            Self::Throughput(e) => write!(f, "{e}"),
            Self::DimensionMismatch { expected, got } => {
                write!(f, "point has dimension {got}, problem expects {expected}")
            }
            Self::InvalidConfig(msg) => write!(f, "solver config: {msg}"),
            Self::WrongTopologyShape(msg) => write!(f, "unsupported topology shape: {msg}"),
        }
    }
}

impl std::error::Error for SolverError {}

impl From<ScenarioError> for SolverError {
    fn from(e: ScenarioError) -> Self {
        Self::Scenario(e)
    }
}

impl From<ThroughputError> for SolverError {
    fn from(e: ThroughputError) -> Self {
        Self::Throughput(e)
    }
}

/// Simulated-annealing parameters. The defaults are sized so the toy
/// topology solves well inside a second per threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub seed: u64,
    pub restarts: u32,
    pub initial_temperature: f64,
    pub cooling_factor: f64,
    pub iterations_per_temperature: u32,
    pub min_temperature: f64,
    pub step_sigma: f64,
    pub penalty_coefficient: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            restarts: 8,
            initial_temperature: 1.0,
            cooling_factor: 0.95,
            iterations_per_temperature: 200,
            min_temperature: 1e-4,
            step_sigma: 0.05,
            penalty_coefficient: 100.0,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<(), SolverError> {
        let err = |msg: &str| Err(SolverError::InvalidConfig(msg.to_string()));
        if self.restarts < 1 {
            return err("restarts must be >= 1");
        }
        if !(self.cooling_factor > 0.0 && self.cooling_factor < 1.0) {
            return err("cooling factor must lie in (0, 1)");
        }
        if self.iterations_per_temperature < 1 {
            return err("iterations per temperature must be >= 1");
        }
        if !(self.initial_temperature > 0.0) || !(self.min_temperature > 0.0) {
            return err("temperatures must be positive");
        }
        if !(self.step_sigma > 0.0) {
            return err("step sigma must be positive");
        }
        if !(self.penalty_coefficient >= 0.0) {
            return err("penalty coefficient must be non-negative");
        }
        Ok(())
    }
}

/// Decision variables, in problem order: one source rate per flow, then one
/// auxiliary per multi-hop flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    SourceRate { flow: u32 },
    Auxiliary { flow: u32 },
}

/// One summand of the maximized objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveTerm {
    /// Single-hop path: the direct link throughput.
    SingleHopLink { flow: u32, link: (u32, u32) },
    /// Multi-hop path: the auxiliary standing in for the path minimum.
    PathAuxiliary { flow: u32 },
}

/// One inequality of the constraint system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    /// S1: `0 <= q`.
    RateLower { flow: u32 },
    /// S1: `q <= 1`.
    RateUpper { flow: u32 },
    /// S2: `T(upstream) <= T(downstream)` for consecutive links.
    BoundedDelay { flow: u32, upstream: (u32, u32), downstream: (u32, u32) },
    /// S4: `q' <= T(link)`.
    AuxiliaryCap { flow: u32, link: (u32, u32) },
    /// S3: `0 <= q'`.
    AuxiliaryLower { flow: u32 },
    /// S3: `q' <= 1`.
    AuxiliaryUpper { flow: u32 },
}

impl Constraint {
    pub fn set_tag(&self) -> &'static str {
        match self {
            Self::RateLower { .. } | Self::RateUpper { .. } => "S1",
            Self::BoundedDelay { .. } => "S2",
            Self::AuxiliaryCap { .. } => "S4",
            Self::AuxiliaryLower { .. } | Self::AuxiliaryUpper { .. } => "S3",
        }
    }
}

/// Objective and per-constraint violations `max(0, lhs - rhs)` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub objective: f64,
    pub violations: Vec<f64>,
    pub max_violation: f64,
}

impl Evaluation {
    pub fn violation_sum(&self) -> f64 {
        self.violations.iter().sum()
    }
}

/// The materialized allocation problem for one scenario.
#[derive(Debug, Clone)]
pub struct AllocationProblem {
    scenario: Scenario,
    model: ThroughputModel,
    variables: Vec<Variable>,
    objective: Vec<ObjectiveTerm>,
    constraints: Vec<Constraint>,
    rate_dim: usize,
    /// flow position -> number of hops (links) of its path
    hops: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationResult {
    pub rates: RateVector,
    /// Analytic aggregate throughput at the returned rates.
    pub aat: f64,
    pub feasible: bool,
    pub max_violation: f64,
    /// Path throughput per flow at the returned rates.
    pub per_flow: BTreeMap<u32, f64>,
}

/// Both sides of the toy-topology non-convexity inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct NonconvexityReport {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
}

pub fn build_problem(scenario: &Scenario) -> Result<AllocationProblem, SolverError> {
    if scenario.flows().is_empty() {
        return Err(ScenarioError::EmptyFlows.into());
    }
    let model = ThroughputModel::build(scenario)?;

    let mut variables = Vec::new();
    let mut objective = Vec::new();
    for flow in scenario.flows() {
        variables.push(Variable::SourceRate { flow: flow.id });
        if flow.hop_count() == 1 {
            let link = flow.links().next().expect("one hop");
            objective.push(ObjectiveTerm::SingleHopLink { flow: flow.id, link });
        } else {
            objective.push(ObjectiveTerm::PathAuxiliary { flow: flow.id });
        }
    }
    for flow in scenario.flows() {
        if flow.hop_count() > 1 {
            variables.push(Variable::Auxiliary { flow: flow.id });
        }
    }

    let mut constraints = Vec::new();
    for flow in scenario.flows() {
        constraints.push(Constraint::RateLower { flow: flow.id });
        constraints.push(Constraint::RateUpper { flow: flow.id });
    }
    for flow in scenario.flows() {
        if flow.hop_count() > 1 {
            let links: Vec<(u32, u32)> = flow.links().collect();
            for pair in links.windows(2) {
                constraints.push(Constraint::BoundedDelay {
                    flow: flow.id,
                    upstream: pair[0],
                    downstream: pair[1],
                });
            }
        }
    }
    for flow in scenario.flows() {
        if flow.hop_count() > 1 {
            for link in flow.links() {
                constraints.push(Constraint::AuxiliaryCap { flow: flow.id, link });
            }
        }
    }
    for flow in scenario.flows() {
        if flow.hop_count() > 1 {
            constraints.push(Constraint::AuxiliaryLower { flow: flow.id });
            constraints.push(Constraint::AuxiliaryUpper { flow: flow.id });
        }
    }

    let rate_dim = scenario.flows().len();
    let hops = scenario.flows().iter().map(|f| f.hop_count()).collect();
    Ok(AllocationProblem {
        scenario: scenario.clone(),
        model,
        variables,
        objective,
        constraints,
        rate_dim,
        hops,
    })
}

impl AllocationProblem {
    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn objective(&self) -> &[ObjectiveTerm] {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Full dimension: source rates plus auxiliaries.
    pub fn dimension(&self) -> usize {
        self.variables.len()
    }

    /// Number of source-rate variables (= number of flows).
    pub fn rate_dimension(&self) -> usize {
        self.rate_dim
    }

    fn flow_position(&self, flow: u32) -> usize {
        self.scenario
            .flows()
            .iter()
            .position(|f| f.id == flow)
            .expect("constraint references a scenario flow")
    }

    fn aux_position(&self, flow: u32) -> usize {
        self.variables
            .iter()
            .position(|v| matches!(v, Variable::Auxiliary { flow: f } if *f == flow))
            .expect("auxiliary exists for multi-hop flow")
    }

    fn hop_index(&self, flow_pos: usize, link: (u32, u32)) -> usize {
        self.scenario.flows()[flow_pos]
            .links()
            .position(|l| l == link)
            .expect("constraint link lies on its flow's path")
    }

    /// Evaluate objective and violations at a full point (rates then
    /// auxiliaries, in variable order).
    pub fn evaluate(&self, point: &[f64]) -> Result<Evaluation, SolverError> {
        if point.len() != self.dimension() {
            return Err(SolverError::DimensionMismatch {
                expected: self.dimension(),
                got: point.len(),
            });
        }
        let rates = &point[..self.rate_dim];
        let link_values = self.model.link_values(rates);
        Ok(self.evaluate_at(point, &link_values))
    }

    /// Evaluate at source rates only, with each auxiliary eliminated to its
    /// path's minimum link throughput (the P1 form).
    pub fn evaluate_rates(&self, rates: &[f64]) -> Result<Evaluation, SolverError> {
        if rates.len() != self.rate_dim {
            return Err(SolverError::DimensionMismatch {
                expected: self.rate_dim,
                got: rates.len(),
            });
        }
        let link_values = self.model.link_values(rates);
        let point = self.implied_point(rates, &link_values);
        Ok(self.evaluate_at(&point, &link_values))
    }

    /// The full point with auxiliaries set to their path minima.
    pub fn implied_point_for(&self, rates: &[f64]) -> Result<Vec<f64>, SolverError> {
        if rates.len() != self.rate_dim {
            return Err(SolverError::DimensionMismatch {
                expected: self.rate_dim,
                got: rates.len(),
            });
        }
        let link_values = self.model.link_values(rates);
        Ok(self.implied_point(rates, &link_values))
    }

    fn implied_point(&self, rates: &[f64], link_values: &[Vec<f64>]) -> Vec<f64> {
        let mut point = rates.to_vec();
        for var in &self.variables[self.rate_dim..] {
            let Variable::Auxiliary { flow } = var else { unreachable!("aux tail") };
            let pos = self.flow_position(*flow);
            point.push(min_of(&link_values[pos]));
        }
        point
    }

    fn evaluate_at(&self, point: &[f64], link_values: &[Vec<f64>]) -> Evaluation {
        let objective = self
            .objective
            .iter()
            .map(|term| match term {
                ObjectiveTerm::SingleHopLink { flow, .. } => {
                    link_values[self.flow_position(*flow)][0]
                }
                ObjectiveTerm::PathAuxiliary { flow } => point[self.aux_position(*flow)],
            })
            .sum();
        let violations: Vec<f64> = self
            .constraints
            .iter()
            .map(|c| {
                let raw = match *c {
                    Constraint::RateLower { flow } => -point[self.flow_position(flow)],
                    Constraint::RateUpper { flow } => point[self.flow_position(flow)] - 1.0,
                    Constraint::BoundedDelay { flow, upstream, downstream } => {
                        let pos = self.flow_position(flow);
                        let up = self.hop_index(pos, upstream);
                        let down = self.hop_index(pos, downstream);
                        link_values[pos][up] - link_values[pos][down]
                    }
                    Constraint::AuxiliaryCap { flow, link } => {
                        let pos = self.flow_position(flow);
                        let hop = self.hop_index(pos, link);
                        point[self.aux_position(flow)] - link_values[pos][hop]
                    }
                    Constraint::AuxiliaryLower { flow } => -point[self.aux_position(flow)],
                    Constraint::AuxiliaryUpper { flow } => point[self.aux_position(flow)] - 1.0,
                };
                raw.max(0.0)
            })
            .collect();
        let max_violation = violations.iter().copied().fold(0.0, f64::max);
        Evaluation { objective, violations, max_violation }
    }

    /// Lean objective/S2 evaluation used inside the annealing loop. Rates
    /// are assumed clipped to the box.
    fn sa_objective_and_s2(&self, rates: &[f64]) -> (f64, f64) {
        let link_values = self.model.link_values(rates);
        let mut objective = 0.0;
        let mut s2_sum = 0.0;
        for (pos, values) in link_values.iter().enumerate() {
            objective += min_of(values);
            if self.hops[pos] > 1 {
                for pair in values.windows(2) {
                    s2_sum += (pair[0] - pair[1]).max(0.0);
                }
            }
        }
        (objective, s2_sum)
    }

    /// Max S2 violation on one flow's path at `rates`.
    fn flow_s2_violation(&self, rates: &[f64], flow_pos: usize) -> f64 {
        let values: Vec<f64> =
            self.model.flows[flow_pos].iter().map(|l| l.value(rates)).collect();
        values.windows(2).map(|p| (p[0] - p[1]).max(0.0)).fold(0.0, f64::max)
    }

    /// Text rendering of variables, objective and constraints, in stable
    /// order.
    pub fn render(&self) -> String {
        use fmt::Write;
        let mut out = String::new();
        let var_name = |v: &Variable| match v {
            Variable::SourceRate { flow } => format!("q[f{flow}]"),
            Variable::Auxiliary { flow } => format!("q'[f{flow}]"),
        };
        out.push_str("variables:\n");
        for (i, v) in self.variables.iter().enumerate() {
            let kind = match v {
                Variable::SourceRate { .. } => "source rate",
                Variable::Auxiliary { .. } => "auxiliary",
            };
            writeln!(out, "  x{i} = {:<8} ({kind})", var_name(v)).unwrap();
        }
        let term = |t: &ObjectiveTerm| match t {
            ObjectiveTerm::SingleHopLink { link: (i, j), .. } => format!("T({i}->{j})"),
            ObjectiveTerm::PathAuxiliary { flow } => format!("q'[f{flow}]"),
        };
        let terms: Vec<String> = self.objective.iter().map(term).collect();
        writeln!(out, "maximize: {}", terms.join(" + ")).unwrap();
        out.push_str("subject to:\n");
        for (i, c) in self.constraints.iter().enumerate() {
            let body = match *c {
                Constraint::RateLower { flow } => format!("0 <= q[f{flow}]"),
                Constraint::RateUpper { flow } => format!("q[f{flow}] <= 1"),
                Constraint::BoundedDelay { upstream: (a, b), downstream: (c_, d), .. } => {
                    format!("T({a}->{b}) <= T({c_}->{d})")
                }
                Constraint::AuxiliaryCap { flow, link: (a, b) } => {
                    format!("q'[f{flow}] <= T({a}->{b})")
                }
                Constraint::AuxiliaryLower { flow } => format!("0 <= q'[f{flow}]"),
                Constraint::AuxiliaryUpper { flow } => format!("q'[f{flow}] <= 1"),
            };
            writeln!(out, "  g{}: {body}  [{}]", i + 1, c.set_tag()).unwrap();
        }
        out
    }
}

fn min_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::INFINITY, f64::min)
}

struct RestartOutcome {
    rates: Vec<f64>,
    objective: f64,
    feasible: bool,
    max_violation: f64,
}

/// Solve with simulated annealing (parallel restarts when the `parallel`
/// feature is enabled). If no restart reaches feasibility the result is
/// returned with `feasible == false`, never silently.
pub fn solve(
    problem: &AllocationProblem,
    config: &SolverConfig,
) -> Result<AllocationResult, SolverError> {
    let free: Vec<usize> = (0..problem.rate_dimension()).collect();
    solve_masked(problem, config, &free, true)
}

/// Sequential [`solve`]; bit-identical, kept as the non-rayon fallback and
/// for benchmarks.
pub fn solve_sequential(
    problem: &AllocationProblem,
    config: &SolverConfig,
) -> Result<AllocationResult, SolverError> {
    let free: Vec<usize> = (0..problem.rate_dimension()).collect();
    solve_masked(problem, config, &free, false)
}

/// Anneal over the rates at `free` positions; the rest stay pinned at zero.
fn solve_masked(
    problem: &AllocationProblem,
    config: &SolverConfig,
    free: &[usize],
    parallel: bool,
) -> Result<AllocationResult, SolverError> {
    config.validate()?;
    let restarts: Vec<u32> = (0..config.restarts).collect();
    let run = |r: &u32| run_restart(problem, config, *r, free);
    let outcomes = if parallel {
        exec::map_ordered(&restarts, run)
    } else {
        exec::map_ordered_sequential(&restarts, run)
    };
    Ok(pick_winner(problem, outcomes))
}

fn run_restart(
    problem: &AllocationProblem,
    config: &SolverConfig,
    restart: u32,
    free: &[usize],
) -> RestartOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(u64::from(restart) + 1);
    let step = Normal::new(0.0, config.step_sigma).expect("validated sigma");
    let energy = |rates: &[f64]| {
        let (objective, s2) = problem.sa_objective_and_s2(rates);
        -objective + config.penalty_coefficient * s2
    };

    let mut x = vec![0.0; problem.rate_dimension()];
    for &pos in free {
        x[pos] = rng.random::<f64>();
    }
    let mut e = energy(&x);
    let mut best_x = x.clone();
    let mut best_e = e;

    let mut temperature = config.initial_temperature;
    while temperature > config.min_temperature {
        for _ in 0..config.iterations_per_temperature {
            let mut candidate = x.clone();
            for &pos in free {
                candidate[pos] = (candidate[pos] + step.sample(&mut rng)).clamp(0.0, 1.0);
            }
            let e_candidate = energy(&candidate);
            let delta = e_candidate - e;
            if delta <= 0.0 || rng.random::<f64>() < (-delta / temperature).exp() {
                x = candidate;
                e = e_candidate;
                if e < best_e {
                    best_e = e;
                    best_x = x.clone();
                }
            }
        }
        temperature *= config.cooling_factor;
    }

    // Rates too small to matter are zeroed before repair so unutilized
    // paths report exactly 0.
    for xi in &mut best_x {
        if *xi < UNUSED_RATE_EPS {
            *xi = 0.0;
        }
    }
    repair(problem, &mut best_x, free);
    let eval = problem.evaluate_rates(&best_x).expect("dimension matches");
    RestartOutcome {
        rates: best_x,
        objective: eval.objective,
        feasible: eval.max_violation <= FEASIBILITY_TOL,
        max_violation: eval.max_violation,
    }
}

/// Pull violated bounded-delay constraints back to feasibility by reducing
/// the offending flow's own rate (bisection; the first link's throughput is
/// monotone increasing in it, downstream links non-decreasing as it drops).
fn repair(problem: &AllocationProblem, rates: &mut [f64], free: &[usize]) {
    for _pass in 0..16 {
        let mut violated = false;
        let mut changed = false;
        for &pos in free {
            if problem.flow_s2_violation(rates, pos) <= FEASIBILITY_TOL {
                continue;
            }
            violated = true;
            let hi = rates[pos];
            rates[pos] = 0.0;
            if problem.flow_s2_violation(rates, pos) > 0.0 {
                // Not fixable through this flow's rate alone.
                rates[pos] = hi;
                continue;
            }
            let mut lo = 0.0;
            let mut hi = hi;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                rates[pos] = mid;
                if problem.flow_s2_violation(rates, pos) > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            rates[pos] = lo;
            changed = true;
        }
        if !violated || !changed {
            return;
        }
    }
}

fn pick_winner(problem: &AllocationProblem, outcomes: Vec<RestartOutcome>) -> AllocationResult {
    let best = outcomes
        .into_iter()
        .reduce(|a, b| {
            let b_wins = match (a.feasible, b.feasible) {
                (false, true) => true,
                (true, false) => false,
                _ => b.objective > a.objective,
            };
            if b_wins { b } else { a }
        })
        .expect("at least one restart");

    let link_values = problem.model.link_values(&best.rates);
    let per_flow: BTreeMap<u32, f64> = problem
        .scenario
        .flows()
        .iter()
        .zip(&link_values)
        .map(|(flow, values)| (flow.id, min_of(values)))
        .collect();
    AllocationResult {
        rates: RateVector::from_ordered(&problem.scenario, &best.rates),
        aat: per_flow.values().sum(),
        feasible: best.feasible,
        max_violation: best.max_violation,
        per_flow,
    }
}

/// The best-path baseline: zero every rate except the flow with the
/// highest end-to-end success probability and solve that single-flow
/// restriction of the full problem. Keeping the full problem (including
/// the idle paths' relays in the interferer sets) makes the returned point
/// feasible for [`solve`]'s problem, so multipath allocation can never do
/// worse than this baseline.
pub fn solve_best_path(
    scenario: &Scenario,
    config: &SolverConfig,
) -> Result<AllocationResult, SolverError> {
    let best_id = scenario.best_path()?.id;
    let problem = build_problem(scenario)?;
    let best_pos = problem.flow_position(best_id);
    solve_masked(&problem, config, &[best_pos], true)
}

/// Evaluate the non-convexity condition of the two-flow/one-relay topology
/// (paths `a-b-D` and `c-D`):
///
/// ```text
/// p(b|{b,c}) - p(b|{a,b,c}) <
///     (1-q_b)/q_b * (p(a|{a}) - p(a|{a,c})) + p(b|{b}) - p(b|{a,b})
/// ```
///
/// where `p(tx|T)` is the success probability of the path link from `tx`
/// with active set `T`.
pub fn nonconvexity_condition(scenario: &Scenario) -> Result<NonconvexityReport, SolverError> {
    let shape_err = |msg: &str| SolverError::WrongTopologyShape(msg.to_string());
    if scenario.flows().len() != 2 {
        return Err(shape_err("expected exactly two flows"));
    }
    if scenario.nodes().len() != 4 {
        return Err(shape_err("expected exactly four nodes"));
    }
    let multi = scenario
        .flows()
        .iter()
        .find(|f| f.hop_count() == 2)
        .ok_or_else(|| shape_err("expected one two-hop path"))?;
    let single = scenario
        .flows()
        .iter()
        .find(|f| f.hop_count() == 1)
        .ok_or_else(|| shape_err("expected one single-hop path"))?;
    let (a, b) = (multi.path[0], multi.path[1]);
    let c = single.path[0];
    let d = scenario.destination();
    let q_b = scenario.node(b).expect("validated relay").q.expect("validated relay q");
    if !(q_b > 0.0) {
        return Err(shape_err("relay transmit probability must be positive"));
    }

    let p = |tx: u32, rx: u32, active: &[u32]| -> f64 {
        let ti = scenario.node_index(tx).expect("node");
        let tj = scenario.node_index(rx).expect("node");
        let act: Vec<usize> =
            active.iter().map(|&k| scenario.node_index(k).expect("node")).collect();
        channel::success_probability(ti, tj, &act, scenario.radios(), scenario.channel(), |x, y| {
            scenario.distance_idx(x, y)
        })
        .expect("validated geometry")
    };

    let lhs = p(b, d, &[b, c]) - p(b, d, &[a, b, c]);
    let rhs = (1.0 - q_b) / q_b * (p(a, b, &[a]) - p(a, b, &[a, c])) + p(b, d, &[b])
        - p(b, d, &[a, b]);
    Ok(NonconvexityReport { holds: lhs < rhs, lhs, rhs })
}
