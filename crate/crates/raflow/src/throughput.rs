//! Analytic throughput engine.
//!
//! The average throughput of a path link `(i,j)` is obtained by enumerating
//! every subset of its interferer set `I(i,j)`:
//!
//! ```text
//! T(i,j) = sum_{l=0}^{2^L - 1} P(i,j,l) * q(i,j)
//!          * prod_n q_n^{b(l,n)} (1 - q_n)^{1 - b(l,n)}
//! ```
//!
//! where `b(l,n)` tests bit `n` of the subset index `l`, `P(i,j,l)` is the
//! link success probability with exactly that subset active, and the
//! attempt probability is `q(i,j) = q_i` when `j` is the destination and
//! `q_i (1 - q_j)` otherwise. A node's activity probability is its flow
//! rate if it originates a flow, its fixed transmit probability if it is a
//! relay. A path's throughput is the minimum over its links and the
//! aggregate objective sums the paths.
//!
//! Enumeration is exact and exponential in `L`; sets larger than
//! [`ENUMERATION_CAP`] are rejected rather than silently truncated. The
//! subset sum is partitioned into fixed blocks combined pairwise (see
//! [`crate::exec`]), so parallel and sequential evaluation agree bitwise.

use std::collections::BTreeMap;
use std::fmt;

use crate::channel::{self, RadioSpec};
use crate::exec;
use crate::topology::{Flow, Scenario, ScenarioError, TransmitKind};

/// Largest admissible interferer set; 2^24 subset terms.
pub const ENUMERATION_CAP: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub enum ThroughputError {
    RateOutOfRange { flow: u32, rate: f64 },
    MissingRate { flow: u32 },
    MissingSourcePlaceholder { flow: u32, node: u32 },
    IntractableEnumeration { link: (u32, u32), interferers: usize },
    Scenario(ScenarioError),
}

impl fmt::Display for ThroughputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::RateOutOfRange { flow, rate } => {
                write!(f, "flow {flow}: rate {rate} outside [0, 1]")
            }
            Self::MissingRate { flow } => write!(f, "no rate given for flow {flow}"),
            Self::MissingSourcePlaceholder { flow, node } => {
                write!(f, "flow {flow}: source node {node} carries no placeholder q")
            }
            Self::IntractableEnumeration { link: (i, j), interferers } => write!(
                f,
                "link ({i}, {j}) has {interferers} interferers; enumerating 2^{interferers} \
                 subsets exceeds the cap of 2^{ENUMERATION_CAP}"
            ),
            Self::Scenario(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ThroughputError {}

impl From<ScenarioError> for ThroughputError {
    fn from(e: ScenarioError) -> Self {
        Self::Scenario(e)
    }
}

/// Source rates by flow id, each in `[0, 1]` packets/slot.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RateVector {
    rates: BTreeMap<u32, f64>,
}

impl RateVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I>(pairs: I) -> Result<Self, ThroughputError>
    where
        I: IntoIterator<Item = (u32, f64)>,
    {
        let mut rv = Self::new();
        for (flow, rate) in pairs {
            rv.set(flow, rate)?;
        }
        Ok(rv)
    }

    /// Rates taken from each flow source's placeholder `q`.
    pub fn from_node_placeholders(scenario: &Scenario) -> Result<Self, ThroughputError> {
        let mut rv = Self::new();
        for flow in scenario.flows() {
            let node = scenario.node(flow.source).expect("validated flow source");
            let q = node.q.ok_or(ThroughputError::MissingSourcePlaceholder {
                flow: flow.id,
                node: flow.source,
            })?;
            rv.set(flow.id, q)?;
        }
        Ok(rv)
    }

    pub fn set(&mut self, flow: u32, rate: f64) -> Result<(), ThroughputError> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(ThroughputError::RateOutOfRange { flow, rate });
        }
        self.rates.insert(flow, rate);
        Ok(())
    }

    pub fn get(&self, flow: u32) -> Option<f64> {
        self.rates.get(&flow).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.rates.iter().map(|(&f, &r)| (f, r))
    }

    /// Rates in scenario flow order; every flow must be covered.
    pub(crate) fn ordered_for(&self, scenario: &Scenario) -> Result<Vec<f64>, ThroughputError> {
        scenario
            .flows()
            .iter()
            .map(|f| self.get(f.id).ok_or(ThroughputError::MissingRate { flow: f.id }))
            .collect()
    }

    pub(crate) fn from_ordered(scenario: &Scenario, rates: &[f64]) -> Self {
        let mut rv = Self::new();
        for (flow, &r) in scenario.flows().iter().zip(rates) {
            rv.rates.insert(flow.id, r);
        }
        rv
    }
}

/// Per-link result: the enumerated average throughput and the number of
/// subset terms it took.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkThroughputResult {
    pub link: (u32, u32),
    pub value: f64,
    pub terms_evaluated: u64,
}

/// A path's throughput with per-link detail; `bottleneck_hop` is the lowest
/// hop index attaining the minimum.
#[derive(Debug, Clone, PartialEq)]
pub struct PathThroughput {
    pub flow: u32,
    pub value: f64,
    pub links: Vec<LinkThroughputResult>,
    pub bottleneck_hop: usize,
}

/// Where a slot-occupancy probability comes from when evaluating a link.
#[derive(Debug, Clone, Copy)]
enum RateRef {
    /// Position into the scenario-ordered rate slice.
    Flow(usize),
    Fixed(f64),
}

impl RateRef {
    fn resolve(self, rates: &[f64]) -> f64 {
        match self {
            Self::Flow(pos) => rates[pos],
            Self::Fixed(q) => q,
        }
    }
}

/// A link with everything static precomputed: base success probability,
/// one interference factor per interferer (ascending node id, defining the
/// bit positions) and the activity-probability sources.
#[derive(Debug, Clone)]
pub(crate) struct PreparedLink {
    tx_rate: RateRef,
    rx_discount: Option<RateRef>,
    base: f64,
    factors: Vec<f64>,
    interferer_rates: Vec<RateRef>,
}

impl PreparedLink {
    pub(crate) fn prepare(
        scenario: &Scenario,
        link: (u32, u32),
    ) -> Result<Self, ThroughputError> {
        let interferers = scenario.interferer_set(link)?;
        if interferers.len() > ENUMERATION_CAP {
            return Err(ThroughputError::IntractableEnumeration {
                link,
                interferers: interferers.len(),
            });
        }
        let (i, j) = link;
        let ti = scenario.node_index(i).expect("validated link");
        let tj = scenario.node_index(j).expect("validated link");
        let radios: &[RadioSpec] = scenario.radios();
        let base = channel::success_probability(ti, tj, &[ti], radios, scenario.channel(), |a, b| {
            scenario.distance_idx(a, b)
        })
        .expect("validated scenario geometry");

        let gamma = radios[tj].sinr_threshold;
        let v = scenario.channel().v_default;
        let g_signal =
            channel::rx_power_factor(radios[ti].tx_power, scenario.distance_idx(ti, tj), scenario.channel().alpha)
                .expect("validated scenario geometry");
        let mut factors = Vec::with_capacity(interferers.len());
        let mut interferer_rates = Vec::with_capacity(interferers.len());
        for &k in &interferers {
            let tk = scenario.node_index(k).expect("validated interferer");
            let g_k = channel::rx_power_factor(
                radios[tk].tx_power,
                scenario.distance_idx(tk, tj),
                scenario.channel().alpha,
            )
            .expect("validated scenario geometry");
            factors.push(1.0 / (1.0 + gamma * (v * g_k) / (v * g_signal)));
            interferer_rates.push(rate_ref(scenario, k));
        }

        let tx_rate = rate_ref(scenario, i);
        let rx_discount = if j == scenario.destination() { None } else { Some(rate_ref(scenario, j)) };
        Ok(Self { tx_rate, rx_discount, base, factors, interferer_rates })
    }

    pub(crate) fn terms(&self) -> u64 {
        1u64 << self.factors.len()
    }

    /// Attempt probability `q(i,j)`.
    fn attempt_prob(&self, rates: &[f64]) -> f64 {
        let qi = self.tx_rate.resolve(rates);
        match self.rx_discount {
            None => qi,
            Some(r) => qi * (1.0 - r.resolve(rates)),
        }
    }

    fn subset_term(&self, l: u64, activity: &[f64]) -> f64 {
        let mut t = self.base;
        for (n, (&f, &q)) in self.factors.iter().zip(activity).enumerate() {
            if (l >> n) & 1 == 1 {
                t *= q * f;
            } else {
                t *= 1.0 - q;
            }
        }
        t
    }

    fn activity(&self, rates: &[f64]) -> Vec<f64> {
        self.interferer_rates.iter().map(|r| r.resolve(rates)).collect()
    }

    pub(crate) fn value(&self, rates: &[f64]) -> f64 {
        let q_attempt = self.attempt_prob(rates);
        if q_attempt == 0.0 {
            return 0.0;
        }
        let activity = self.activity(rates);
        q_attempt * exec::sum_terms(self.terms(), |l| self.subset_term(l, &activity))
    }

    pub(crate) fn value_sequential(&self, rates: &[f64]) -> f64 {
        let q_attempt = self.attempt_prob(rates);
        if q_attempt == 0.0 {
            return 0.0;
        }
        let activity = self.activity(rates);
        q_attempt * exec::sum_terms_sequential(self.terms(), |l| self.subset_term(l, &activity))
    }
}

fn rate_ref(scenario: &Scenario, node: u32) -> RateRef {
    match scenario.transmit_kind(node) {
        TransmitKind::FlowRate(flow) => {
            let pos = scenario
                .flows()
                .iter()
                .position(|f| f.id == flow)
                .expect("flow exists");
            RateRef::Flow(pos)
        }
        TransmitKind::Fixed(q) => RateRef::Fixed(q),
        TransmitKind::Never => RateRef::Fixed(0.0),
    }
}

/// All path links of a scenario in flow order, prepared once and
/// evaluated many times.
#[derive(Debug, Clone)]
pub(crate) struct ThroughputModel {
    pub(crate) flows: Vec<Vec<PreparedLink>>,
}

impl ThroughputModel {
    pub(crate) fn build(scenario: &Scenario) -> Result<Self, ThroughputError> {
        let flows = scenario
            .flows()
            .iter()
            .map(|flow| {
                flow.links()
                    .map(|link| PreparedLink::prepare(scenario, link))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, ThroughputError>>()?;
        Ok(Self { flows })
    }

    /// Per-flow link throughputs at `rates` (scenario flow order).
    pub(crate) fn link_values(&self, rates: &[f64]) -> Vec<Vec<f64>> {
        self.flows
            .iter()
            .map(|links| links.iter().map(|l| l.value(rates)).collect())
            .collect()
    }
}

/// The attempt probability `q(i,j)`: `q_i` toward the destination,
/// `q_i (1 - q_j)` toward a relay that may itself be transmitting.
pub fn effective_tx_prob(
    i: u32,
    j: u32,
    rates: &RateVector,
    scenario: &Scenario,
) -> Result<f64, ThroughputError> {
    if !scenario.is_path_link((i, j)) {
        return Err(ScenarioError::LinkNotOnPath { link: (i, j) }.into());
    }
    let qi = node_activity(scenario, i, rates)?;
    if j == scenario.destination() {
        Ok(qi)
    } else {
        Ok(qi * (1.0 - node_activity(scenario, j, rates)?))
    }
}

fn node_activity(
    scenario: &Scenario,
    node: u32,
    rates: &RateVector,
) -> Result<f64, ThroughputError> {
    match scenario.transmit_kind(node) {
        TransmitKind::FlowRate(flow) => {
            rates.get(flow).ok_or(ThroughputError::MissingRate { flow })
        }
        TransmitKind::Fixed(q) => Ok(q),
        TransmitKind::Never => Ok(0.0),
    }
}

/// Average throughput of one path link by full subset enumeration.
pub fn link_throughput(
    link: (u32, u32),
    rates: &RateVector,
    scenario: &Scenario,
) -> Result<LinkThroughputResult, ThroughputError> {
    let prepared = PreparedLink::prepare(scenario, link)?;
    let ordered = rates.ordered_for(scenario)?;
    Ok(LinkThroughputResult {
        link,
        value: prepared.value(&ordered),
        terms_evaluated: prepared.terms(),
    })
}

/// Sequential evaluation of [`link_throughput`]; bit-identical, kept as the
/// non-rayon fallback and for benchmarks.
pub fn link_throughput_sequential(
    link: (u32, u32),
    rates: &RateVector,
    scenario: &Scenario,
) -> Result<LinkThroughputResult, ThroughputError> {
    let prepared = PreparedLink::prepare(scenario, link)?;
    let ordered = rates.ordered_for(scenario)?;
    Ok(LinkThroughputResult {
        link,
        value: prepared.value_sequential(&ordered),
        terms_evaluated: prepared.terms(),
    })
}

/// Path throughput: the minimum link throughput along the flow's path.
pub fn path_throughput(
    flow: &Flow,
    rates: &RateVector,
    scenario: &Scenario,
) -> Result<f64, ThroughputError> {
    Ok(path_throughput_detail(flow, rates, scenario)?.value)
}

/// As [`path_throughput`] with per-link results and the bottleneck hop.
pub fn path_throughput_detail(
    flow: &Flow,
    rates: &RateVector,
    scenario: &Scenario,
) -> Result<PathThroughput, ThroughputError> {
    let links = flow
        .links()
        .map(|link| link_throughput(link, rates, scenario))
        .collect::<Result<Vec<_>, _>>()?;
    let mut bottleneck_hop = 0;
    for (hop, lr) in links.iter().enumerate() {
        if lr.value < links[bottleneck_hop].value {
            bottleneck_hop = hop;
        }
    }
    Ok(PathThroughput {
        flow: flow.id,
        value: links[bottleneck_hop].value,
        links,
        bottleneck_hop,
    })
}

/// Average aggregate throughput: the sum of path throughputs over all flows.
pub fn aggregate_throughput(
    rates: &RateVector,
    scenario: &Scenario,
) -> Result<f64, ThroughputError> {
    let mut total = 0.0;
    for flow in scenario.flows() {
        total += path_throughput(flow, rates, scenario)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use crate::topology::{InterferencePolicy, NodeSpec, Role};
    use crate::channel::ChannelParams;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_rates(q1: f64, q3: f64) -> RateVector {
        RateVector::from_pairs([(1, q1), (2, q3)]).unwrap()
    }

    /// p_{tx/active}^{rx} on a scenario, active given as node ids.
    fn p(scenario: &Scenario, tx: u32, rx: u32, active: &[u32]) -> f64 {
        let ti = scenario.node_index(tx).unwrap();
        let tj = scenario.node_index(rx).unwrap();
        let act: Vec<usize> = active.iter().map(|&k| scenario.node_index(k).unwrap()).collect();
        channel::success_probability(ti, tj, &act, scenario.radios(), scenario.channel(), |a, b| {
            scenario.distance_idx(a, b)
        })
        .unwrap()
    }

    /// Hand-expanded closed forms of the toy topology's three links.
    fn toy_closed_forms(s: &Scenario, q1: f64, q3: f64) -> (f64, f64, f64) {
        let q2 = 0.5;
        let t12 = q1 * (1.0 - q2) * (1.0 - q3) * p(s, 1, 2, &[1])
            + q1 * (1.0 - q2) * q3 * p(s, 1, 2, &[1, 3]);
        let t20 = q2 * (1.0 - q1) * (1.0 - q3) * p(s, 2, 0, &[2])
            + q2 * q1 * (1.0 - q3) * p(s, 2, 0, &[1, 2])
            + q2 * (1.0 - q1) * q3 * p(s, 2, 0, &[2, 3])
            + q2 * q1 * q3 * p(s, 2, 0, &[1, 2, 3]);
        let t30 = q3 * (1.0 - q1) * (1.0 - q2) * p(s, 3, 0, &[3])
            + q3 * q1 * (1.0 - q2) * p(s, 3, 0, &[1, 3])
            + q3 * (1.0 - q1) * q2 * p(s, 3, 0, &[2, 3])
            + q3 * q1 * q2 * p(s, 3, 0, &[1, 2, 3]);
        (t12, t20, t30)
    }

    #[test]
    fn effective_tx_prob_piecewise_rule() {
        let s = presets::toy();
        // Source toward the destination: no half-duplex discount.
        let r = toy_rates(1.0, 1.0);
        assert_eq!(effective_tx_prob(3, 0, &r, &s).unwrap(), 1.0);
        // Source toward a relay with q = 0.5.
        assert_eq!(effective_tx_prob(1, 2, &r, &s).unwrap(), 0.5);
        // Zero rate silences the link entirely.
        let r0 = toy_rates(0.0, 0.5);
        assert_eq!(effective_tx_prob(1, 2, &r0, &s).unwrap(), 0.0);
    }

    #[test]
    fn isolated_link_full_rate_no_noise_is_one() {
        let mk = |role, id, x| NodeSpec {
            id,
            x_m: x,
            y_m: 0.0,
            radio: crate::channel::RadioSpec::new(0.1, 0.0, 1.0).unwrap(),
            role,
            q: None,
        };
        let s = Scenario::from_parts(
            ChannelParams::new(4.0, 1.0).unwrap(),
            InterferencePolicy::PathNodes,
            vec![mk(Role::Destination, 0, 0.0), mk(Role::Source, 1, 120.0)],
            vec![Flow { id: 1, source: 1, path: vec![1, 0] }],
        )
        .unwrap();
        let r = RateVector::from_pairs([(1, 1.0)]).unwrap();
        let lt = link_throughput((1, 0), &r, &s).unwrap();
        assert_eq!(lt.value, 1.0);
        assert_eq!(lt.terms_evaluated, 1);
        assert_eq!(aggregate_throughput(&r, &s).unwrap(), 1.0);
    }

    #[test]
    fn toy_enumeration_matches_hand_expanded_terms() {
        let s = presets::toy();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let q1: f64 = rng.random();
            let q3: f64 = rng.random();
            let r = toy_rates(q1, q3);
            let (t12, t20, t30) = toy_closed_forms(&s, q1, q3);
            assert_abs_diff_eq!(link_throughput((1, 2), &r, &s).unwrap().value, t12, epsilon = 1e-12);
            assert_abs_diff_eq!(link_throughput((2, 0), &r, &s).unwrap().value, t20, epsilon = 1e-12);
            assert_abs_diff_eq!(link_throughput((3, 0), &r, &s).unwrap().value, t30, epsilon = 1e-12);
        }
    }

    #[test]
    fn toy_terms_evaluated_counts_subsets() {
        let s = presets::toy();
        let r = toy_rates(0.7, 0.3);
        assert_eq!(link_throughput((1, 2), &r, &s).unwrap().terms_evaluated, 2);
        assert_eq!(link_throughput((2, 0), &r, &s).unwrap().terms_evaluated, 4);
    }

    #[test]
    fn path_throughput_is_min_over_links() {
        let s = presets::toy();
        let r = toy_rates(0.9, 0.4);
        let flow1 = s.flow(1).unwrap();
        let detail = path_throughput_detail(flow1, &r, &s).unwrap();
        let (t12, t20, _) = toy_closed_forms(&s, 0.9, 0.4);
        assert_abs_diff_eq!(detail.value, t12.min(t20), epsilon = 1e-12);
        for lr in &detail.links {
            assert!(detail.value <= lr.value + 1e-15);
        }
        // Single-link path equals its only link.
        let flow2 = s.flow(2).unwrap();
        let d2 = path_throughput_detail(flow2, &r, &s).unwrap();
        assert_eq!(d2.value, d2.links[0].value);
        assert_eq!(d2.bottleneck_hop, 0);
    }

    #[test]
    fn aggregate_at_zero_rates_is_zero() {
        let s = presets::grid_three_flow();
        let r = RateVector::from_pairs([(1, 0.0), (2, 0.0), (3, 0.0)]).unwrap();
        assert_eq!(aggregate_throughput(&r, &s).unwrap(), 0.0);
    }

    #[test]
    fn toy_aggregate_matches_closed_form_sum() {
        // gamma = 0.5, full source rates, relay q = 0.5.
        let s = presets::toy();
        let r = toy_rates(1.0, 1.0);
        let (t12, t20, t30) = toy_closed_forms(&s, 1.0, 1.0);
        let expected = t30 + t12.min(t20);
        assert_abs_diff_eq!(aggregate_throughput(&r, &s).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn missing_rate_is_reported() {
        let s = presets::toy();
        let r = RateVector::from_pairs([(1, 0.5)]).unwrap();
        assert_eq!(
            aggregate_throughput(&r, &s).unwrap_err(),
            ThroughputError::MissingRate { flow: 2 }
        );
    }

    #[test]
    fn rate_vector_rejects_out_of_range() {
        assert!(matches!(
            RateVector::from_pairs([(1, 1.2)]),
            Err(ThroughputError::RateOutOfRange { flow: 1, .. })
        ));
    }

    #[test]
    fn enumeration_is_invariant_under_interferer_permutation() {
        let s = presets::grid_two_flow();
        let r = RateVector::from_pairs([(1, 0.63), (2, 0.27)]).unwrap();
        let ordered = r.ordered_for(&s).unwrap();
        let prepared = PreparedLink::prepare(&s, (3, 7)).unwrap();
        let reference = prepared.value(&ordered);

        // Reversing the bit labeling must not change the sum.
        let mut reversed = prepared.clone();
        reversed.factors.reverse();
        reversed.interferer_rates.reverse();
        assert_relative_eq!(reversed.value(&ordered), reference, max_relative = 1e-12);
    }

    #[test]
    fn zero_rate_interferer_equals_removed_interferer() {
        // Link (1,2) of the toy sees interferer {3}; rate 0 for flow 2 must
        // equal dropping node 3 from the set entirely.
        let s = presets::toy();
        let r = toy_rates(0.8, 0.0);
        let with_silent = link_throughput((1, 2), &r, &s).unwrap().value;

        let prepared = PreparedLink::prepare(&s, (1, 2)).unwrap();
        let mut removed = prepared.clone();
        removed.factors.clear();
        removed.interferer_rates.clear();
        let ordered = r.ordered_for(&s).unwrap();
        assert_eq!(removed.value(&ordered), with_silent);
    }

    #[test]
    fn subset_success_matches_channel_closed_form() {
        // P(i,j,l) assembled from base * factors equals the channel-module
        // evaluation with the same active set.
        let s = presets::grid_two_flow();
        let link = (0u32, 5u32);
        let interferers = s.interferer_set(link).unwrap();
        let prepared = PreparedLink::prepare(&s, link).unwrap();
        for l in 0..(1u64 << interferers.len()) {
            let mut active: Vec<u32> = vec![0];
            let mut expected = prepared.base;
            for (n, &k) in interferers.iter().enumerate() {
                if (l >> n) & 1 == 1 {
                    active.push(k);
                    expected *= prepared.factors[n];
                }
            }
            let direct = p(&s, 0, 5, &active);
            assert_relative_eq!(expected, direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn oversized_interferer_set_is_rejected() {
        // 28 nodes, all-nodes policy, link straight into the destination:
        // 26 interferers on the single link.
        let mut nodes = vec![
            NodeSpec {
                id: 0,
                x_m: 0.0,
                y_m: 0.0,
                radio: crate::channel::RadioSpec::new(0.1, 7e-11, 1.0).unwrap(),
                role: Role::Destination,
                q: None,
            },
            NodeSpec {
                id: 1,
                x_m: 100.0,
                y_m: 0.0,
                radio: crate::channel::RadioSpec::new(0.1, 7e-11, 1.0).unwrap(),
                role: Role::Source,
                q: Some(1.0),
            },
        ];
        for id in 2..28 {
            nodes.push(NodeSpec {
                id,
                x_m: 40.0 * f64::from(id),
                y_m: 70.0,
                radio: crate::channel::RadioSpec::new(0.1, 7e-11, 1.0).unwrap(),
                role: Role::Relay,
                q: Some(0.5),
            });
        }
        let s = Scenario::from_parts(
            ChannelParams::new(4.0, 1.0).unwrap(),
            InterferencePolicy::AllNodes,
            nodes,
            vec![Flow { id: 1, source: 1, path: vec![1, 0] }],
        )
        .unwrap();
        let r = RateVector::from_pairs([(1, 1.0)]).unwrap();
        assert_eq!(
            link_throughput((1, 0), &r, &s).unwrap_err(),
            ThroughputError::IntractableEnumeration { link: (1, 0), interferers: 26 }
        );
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_and_sequential_link_throughput_agree_bitwise() {
        let s = presets::grid_three_flow();
        let r = RateVector::from_pairs([(1, 0.496), (2, 0.222), (3, 0.496)]).unwrap();
        for flow in s.flows() {
            for link in flow.links() {
                let par = link_throughput(link, &r, &s).unwrap().value;
                let seq = link_throughput_sequential(link, &r, &s).unwrap().value;
                assert_eq!(par.to_bits(), seq.to_bits(), "link {link:?}");
            }
        }
    }

    #[test]
    fn central_difference_matches_single_link_derivative() {
        // One flow s -> D plus an off-path relay interferer with fixed q:
        // T(q) = q * C, so dT/dq = C analytically.
        let mk = |id, x: f64, y: f64, role, q| NodeSpec {
            id,
            x_m: x,
            y_m: y,
            radio: crate::channel::RadioSpec::new(0.1, 7e-11, 1.0).unwrap(),
            role,
            q,
        };
        let s = Scenario::from_parts(
            ChannelParams::new(4.0, 1.0).unwrap(),
            InterferencePolicy::AllNodes,
            vec![
                mk(0, 0.0, 0.0, Role::Destination, None),
                mk(1, 150.0, 0.0, Role::Source, Some(1.0)),
                mk(2, 80.0, 140.0, Role::Relay, Some(0.5)),
            ],
            vec![Flow { id: 1, source: 1, path: vec![1, 0] }],
        )
        .unwrap();
        let at = |q: f64| {
            let r = RateVector::from_pairs([(1, q)]).unwrap();
            aggregate_throughput(&r, &s).unwrap()
        };
        let slope_analytic = at(1.0); // C = T(1)
        let h = 1e-6;
        let q0 = 0.41;
        let slope_fd = (at(q0 + h) - at(q0 - h)) / (2.0 * h);
        assert_relative_eq!(slope_fd, slope_analytic, max_relative = 1e-4);
    }

    proptest! {
        #[test]
        fn link_throughput_never_exceeds_attempt_probability(
            q1 in 0.0f64..1.0,
            q2 in 0.0f64..1.0,
            q3 in 0.0f64..1.0,
        ) {
            let s = presets::grid_three_flow();
            let r = RateVector::from_pairs([(1, q1), (2, q2), (3, q3)]).unwrap();
            for flow in s.flows() {
                for (i, j) in flow.links() {
                    let t = link_throughput((i, j), &r, &s).unwrap().value;
                    let q_att = effective_tx_prob(i, j, &r, &s).unwrap();
                    prop_assert!(t <= q_att + 1e-15);
                    prop_assert!((0.0..=1.0).contains(&t));
                }
            }
        }

        #[test]
        fn path_throughput_bounded_by_each_link(q1 in 0.0f64..1.0, q3 in 0.0f64..1.0) {
            let s = presets::toy();
            let r = toy_rates(q1, q3);
            let flow = s.flow(1).unwrap();
            let detail = path_throughput_detail(flow, &r, &s).unwrap();
            for lr in &detail.links {
                prop_assert!(detail.value <= lr.value + 1e-15);
            }
        }
    }
}
