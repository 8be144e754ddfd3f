//! Slotted Monte Carlo validation harness.
//!
//! Replays the system model packet by packet: Bernoulli slotted-ALOHA
//! transmissions, fresh Rayleigh fading per (tx, rx) pair per slot, SINR
//! decoding with multi-packet reception, half-duplex nodes, relay FIFO
//! queues with retransmission of failed packets. ACKs are free and
//! instantaneous and queues are unbounded; instability is detected by
//! [`delay_bounded`] from the queue trend instead.
//!
//! Each slot:
//! 1. every source transmits with probability equal to its flow rate
//!    (saturated; a failed packet is retried before a new one is created),
//!    every relay with a non-empty queue transmits its head-of-line packet
//!    with its fixed probability, the destination never transmits;
//! 2. a transmitting node cannot receive, so packets aimed at it fail;
//! 3. for each receiving node a fading gain is drawn for every concurrent
//!    transmitter, and a packet is decoded iff its SINR meets the
//!    receiver's threshold — several packets may decode at one receiver in
//!    the same slot;
//! 4. decoded packets advance one hop (or count as delivered at the
//!    destination), failed ones stay for retransmission.
//!
//! A single run is sequential over slots; sweeps parallelize across runs
//! with one RNG stream per run.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{rx_power_factor, sample_fading};
use crate::throughput::RateVector;
use crate::topology::{Role, Scenario};

/// A relay queue whose length grows faster than this (least-squares slope
/// in packets/slot) is considered unstable.
pub const QUEUE_TREND_EPS: f64 = 1e-4;

/// Number of queue-occupancy samples kept per relay.
const TRACE_POINTS: u64 = 2048;

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    InvalidWindow { slots: u64, warmup_slots: u64 },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidWindow { slots, warmup_slots } => write!(
                f,
                "warmup ({warmup_slots} slots) must be shorter than the run ({slots} slots)"
            ),
        }
    }
}

impl std::error::Error for SimError {}

/// Monte Carlo run parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub slots: u64,
    pub warmup_slots: u64,
    pub seed: u64,
    pub rates: RateVector,
}

impl SimConfig {
    pub fn new(
        slots: u64,
        warmup_slots: u64,
        seed: u64,
        rates: RateVector,
    ) -> Result<Self, SimError> {
        if warmup_slots >= slots {
            return Err(SimError::InvalidWindow { slots, warmup_slots });
        }
        Ok(Self { slots, warmup_slots, seed, rates })
    }
}

/// Packet delay statistics in slots, from first transmission attempt at the
/// source to decode at the destination (a first-try single-hop delivery
/// counts 1). Zeros when no packet was delivered.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayStats {
    pub mean: f64,
    pub p99: f64,
    pub samples: u64,
}

/// Attempt/success counters of one directed link.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinkActivity {
    pub attempts: u64,
    pub successes: u64,
}

impl LinkActivity {
    /// Empirical per-attempt success rate; 0 when no attempt was made.
    pub fn success_rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.successes as f64 / self.attempts as f64
        }
    }
}

/// Statistics of one run, collected after the warmup window.
#[derive(Debug, Clone, PartialEq)]
pub struct SimStats {
    pub slots_measured: u64,
    /// Packets delivered at the destination per slot, per flow.
    pub per_flow_throughput: BTreeMap<u32, f64>,
    /// Sum of the per-flow throughputs.
    pub aat: f64,
    pub per_link: BTreeMap<(u32, u32), LinkActivity>,
    pub delay: BTreeMap<u32, DelayStats>,
    pub max_queue: BTreeMap<u32, u64>,
    /// Least-squares slope of queue length over time, packets/slot.
    pub queue_trend: BTreeMap<u32, f64>,
    /// Decimated queue-occupancy traces, one sample every `trace_stride`
    /// measured slots.
    pub queue_trace: BTreeMap<u32, Vec<u32>>,
    pub trace_stride: u64,
    /// Whole-run conservation counters: every injected packet is either
    /// delivered or still queued (sources hold at most one pending retry).
    pub injected: u64,
    pub delivered: u64,
    pub backlog: u64,
}

/// Linear-regression accumulators over integer samples; exact in i128.
#[derive(Default)]
struct TrendAcc {
    n: u64,
    sum_t: u128,
    sum_t2: u128,
    sum_y: u128,
    sum_ty: u128,
}

impl TrendAcc {
    fn push(&mut self, t: u64, y: u64) {
        let (t, y) = (u128::from(t), u128::from(y));
        self.n += 1;
        self.sum_t += t;
        self.sum_t2 += t * t;
        self.sum_y += y;
        self.sum_ty += t * y;
    }

    fn slope(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = i128::from(self.n);
        let num = n * self.sum_ty as i128 - self.sum_t as i128 * self.sum_y as i128;
        let den = n * self.sum_t2 as i128 - (self.sum_t as i128).pow(2);
        num as f64 / den as f64
    }
}

/// Run the slotted simulation. Flows without an entry in `config.rates`
/// transmit nothing; degenerate inputs yield zero-throughput statistics.
pub fn run(scenario: &Scenario, config: &SimConfig) -> SimStats {
    let n = scenario.nodes().len();
    let dest = scenario.node_index(scenario.destination()).expect("destination exists");
    let v = scenario.channel().v_default;
    let alpha = scenario.channel().alpha;

    // Static per-node tables, indexed by node position (ascending id).
    let mut rate = vec![0.0f64; n];
    let mut next_hop: Vec<Option<usize>> = vec![None; n];
    let mut flow_of: Vec<Option<u32>> = vec![None; n];
    let mut draws_coin = vec![false; n];
    for flow in scenario.flows() {
        let flow_rate = config.rates.get(flow.id).unwrap_or(0.0);
        for (a, b) in flow.links() {
            let ai = scenario.node_index(a).expect("path node");
            let bi = scenario.node_index(b).expect("path node");
            next_hop[ai] = Some(bi);
            flow_of[ai] = Some(flow.id);
            draws_coin[ai] = true;
            rate[ai] = match scenario.nodes()[ai].role {
                Role::Source => flow_rate,
                Role::Relay => scenario.nodes()[ai].q.expect("validated relay q"),
                Role::Destination => unreachable!("destination never transmits"),
            };
        }
    }
    let is_source: Vec<bool> = scenario.nodes().iter().map(|s| s.role == Role::Source).collect();
    let noise: Vec<f64> = scenario.nodes().iter().map(|s| s.radio.noise).collect();
    let gamma: Vec<f64> = scenario.nodes().iter().map(|s| s.radio.sinr_threshold).collect();
    let mut g = vec![0.0f64; n * n];
    for a in 0..n {
        for b in 0..n {
            if a != b {
                g[a * n + b] = rx_power_factor(
                    scenario.nodes()[a].radio.tx_power,
                    scenario.distance_idx(a, b),
                    alpha,
                )
                .expect("distinct positions");
            }
        }
    }

    // Dynamic state.
    let mut queues: Vec<VecDeque<u64>> = vec![VecDeque::new(); n];
    let mut pending: Vec<Option<u64>> = vec![None; n];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // Counters.
    let slots_measured = config.slots - config.warmup_slots;
    let trace_stride = (slots_measured / TRACE_POINTS).max(1);
    let mut injected = 0u64;
    let mut delivered = 0u64;
    let mut delivered_window: BTreeMap<u32, u64> = BTreeMap::new();
    let mut delays: BTreeMap<u32, Vec<u64>> = BTreeMap::new();
    let mut per_link: BTreeMap<(u32, u32), LinkActivity> = BTreeMap::new();
    for flow in scenario.flows() {
        delivered_window.insert(flow.id, 0);
        delays.insert(flow.id, Vec::new());
        for link in flow.links() {
            per_link.insert(link, LinkActivity::default());
        }
    }
    let relays: Vec<usize> = (0..n)
        .filter(|&i| scenario.nodes()[i].role == Role::Relay && draws_coin[i])
        .collect();
    let mut trend: BTreeMap<usize, TrendAcc> = relays.iter().map(|&r| (r, TrendAcc::default())).collect();
    let mut max_queue: BTreeMap<usize, u64> = relays.iter().map(|&r| (r, 0)).collect();
    let mut trace: BTreeMap<usize, Vec<u32>> = relays.iter().map(|&r| (r, Vec::new())).collect();

    // Per-slot scratch, reused.
    let mut transmitters: Vec<(usize, usize)> = Vec::with_capacity(n);
    let mut tx_flag = vec![false; n];
    let mut receivers: Vec<usize> = Vec::with_capacity(n);
    let mut fading: Vec<f64> = Vec::new();
    let mut decoded: Vec<usize> = Vec::with_capacity(n);

    for slot in 0..config.slots {
        let measured = slot >= config.warmup_slots;

        // 1. Transmission coins, ascending node order. A coin is drawn for
        // every source and path relay each slot so the RNG stream does not
        // depend on queue state.
        transmitters.clear();
        for idx in 0..n {
            if !draws_coin[idx] {
                continue;
            }
            let coin: f64 = rng.random();
            if coin >= rate[idx] {
                continue;
            }
            if is_source[idx] {
                if pending[idx].is_none() {
                    pending[idx] = Some(slot);
                    injected += 1;
                }
                transmitters.push((idx, next_hop[idx].expect("source has a hop")));
            } else if !queues[idx].is_empty() {
                transmitters.push((idx, next_hop[idx].expect("relay has a hop")));
            }
        }
        for &(tx, _) in &transmitters {
            tx_flag[tx] = true;
        }

        // 2. Receivers able to listen this slot.
        receivers.clear();
        for &(_, rx) in &transmitters {
            if !tx_flag[rx] {
                receivers.push(rx);
            }
        }
        receivers.sort_unstable();
        receivers.dedup();

        // 3. One fading draw per (receiver, transmitter) pair, fixed order.
        fading.clear();
        for _ in 0..receivers.len() * transmitters.len() {
            fading.push(sample_fading(&mut rng, v));
        }

        // 4. SINR decoding; several packets may decode at one receiver.
        decoded.clear();
        for (t_i, &(tx, rx)) in transmitters.iter().enumerate() {
            if measured {
                let id_link =
                    (scenario.nodes()[tx].id, scenario.nodes()[rx].id);
                let entry = per_link.entry(id_link).or_default();
                entry.attempts += 1;
            }
            if tx_flag[rx] {
                continue; // receiver busy transmitting
            }
            let row = receivers.binary_search(&rx).expect("receiver listed") * transmitters.len();
            let signal = fading[row + t_i] * g[tx * n + rx];
            let mut interference = 0.0;
            for (o_i, &(otx, _)) in transmitters.iter().enumerate() {
                if o_i != t_i {
                    interference += fading[row + o_i] * g[otx * n + rx];
                }
            }
            let denom = noise[rx] + interference;
            let ok = if denom > 0.0 { signal / denom >= gamma[rx] } else { signal > 0.0 };
            if ok {
                decoded.push(t_i);
                if measured {
                    let id_link =
                        (scenario.nodes()[tx].id, scenario.nodes()[rx].id);
                    per_link.entry(id_link).or_default().successes += 1;
                }
            }
        }

        // 5. Advance decoded packets. A node never both sends and receives
        // in one slot, so pops and pushes cannot collide.
        for &t_i in &decoded {
            let (tx, rx) = transmitters[t_i];
            let birth = if is_source[tx] {
                pending[tx].take().expect("source transmitted its pending packet")
            } else {
                queues[tx].pop_front().expect("relay transmitted its head packet")
            };
            if rx == dest {
                delivered += 1;
                if measured {
                    let flow = flow_of[tx].expect("path node carries a flow");
                    *delivered_window.get_mut(&flow).expect("flow counter") += 1;
                    delays.get_mut(&flow).expect("flow delays").push(slot - birth + 1);
                }
            } else {
                queues[rx].push_back(birth);
            }
        }

        // 6. Queue statistics.
        if measured {
            let t = slot - config.warmup_slots;
            for &r in &relays {
                let len = queues[r].len() as u64;
                trend.get_mut(&r).expect("relay").push(t, len);
                let m = max_queue.get_mut(&r).expect("relay");
                *m = (*m).max(len);
                if t % trace_stride == 0 {
                    trace.get_mut(&r).expect("relay").push(len.min(u64::from(u32::MAX)) as u32);
                }
            }
        }
        for &(tx, _) in &transmitters {
            tx_flag[tx] = false;
        }
    }

    let per_flow_throughput: BTreeMap<u32, f64> = delivered_window
        .iter()
        .map(|(&flow, &count)| (flow, count as f64 / slots_measured as f64))
        .collect();
    let aat = per_flow_throughput.values().sum();
    let delay: BTreeMap<u32, DelayStats> = delays
        .into_iter()
        .map(|(flow, mut samples)| {
            samples.sort_unstable();
            let stats = if samples.is_empty() {
                DelayStats { mean: 0.0, p99: 0.0, samples: 0 }
            } else {
                let n_s = samples.len();
                let mean = samples.iter().sum::<u64>() as f64 / n_s as f64;
                let idx = ((n_s as f64 * 0.99).ceil() as usize).max(1) - 1;
                DelayStats { mean, p99: samples[idx] as f64, samples: n_s as u64 }
            };
            (flow, stats)
        })
        .collect();

    let id_of = |idx: usize| scenario.nodes()[idx].id;
    let backlog = queues.iter().map(|q| q.len() as u64).sum::<u64>()
        + pending.iter().filter(|p| p.is_some()).count() as u64;

    SimStats {
        slots_measured,
        per_flow_throughput,
        aat,
        per_link,
        delay,
        max_queue: max_queue.into_iter().map(|(r, m)| (id_of(r), m)).collect(),
        queue_trend: trend.into_iter().map(|(r, acc)| (id_of(r), acc.slope())).collect(),
        queue_trace: trace.into_iter().map(|(r, t)| (id_of(r), t)).collect(),
        trace_stride,
        injected,
        delivered,
        backlog,
    }
}

/// True iff no relay queue shows a positive linear trend (slope at most
/// [`QUEUE_TREND_EPS`] packets/slot). Meant for runs with at least 1e5
/// measured slots.
pub fn delay_bounded(stats: &SimStats, scenario: &Scenario) -> bool {
    scenario
        .nodes()
        .iter()
        .filter(|node| node.role == Role::Relay)
        .all(|node| stats.queue_trend.get(&node.id).copied().unwrap_or(0.0) <= QUEUE_TREND_EPS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelParams, RadioSpec};
    use crate::presets;
    use crate::throughput;
    use crate::topology::{Flow, InterferencePolicy, NodeSpec, Scenario};
    use approx::assert_abs_diff_eq;

    fn mk_node(id: u32, x: f64, y: f64, role: Role, q: Option<f64>, gamma: f64, eta: f64) -> NodeSpec {
        NodeSpec {
            id,
            x_m: x,
            y_m: y,
            radio: RadioSpec::new(0.1, eta, gamma).unwrap(),
            role,
            q,
        }
    }

    fn single_link(gamma: f64, eta: f64) -> Scenario {
        Scenario::from_parts(
            ChannelParams::new(4.0, 1.0).unwrap(),
            InterferencePolicy::PathNodes,
            vec![
                mk_node(0, 0.0, 0.0, Role::Destination, None, gamma, eta),
                mk_node(1, 120.0, 0.0, Role::Source, Some(1.0), gamma, eta),
            ],
            vec![Flow { id: 1, source: 1, path: vec![1, 0] }],
        )
        .unwrap()
    }

    fn rates(pairs: &[(u32, f64)]) -> RateVector {
        RateVector::from_pairs(pairs.iter().copied()).unwrap()
    }

    #[test]
    fn isolated_link_without_noise_delivers_every_slot() {
        let s = single_link(1.0, 0.0);
        let cfg = SimConfig::new(5_000, 500, 1, rates(&[(1, 1.0)])).unwrap();
        let stats = run(&s, &cfg);
        assert_eq!(stats.per_flow_throughput[&1], 1.0);
        assert_eq!(stats.aat, 1.0);
        assert_eq!(stats.delay[&1].mean, 1.0);
        assert_eq!(stats.per_link[&(1, 0)].success_rate(), 1.0);
    }

    #[test]
    fn symmetric_always_on_interferer_halves_delivery() {
        // Two saturated sources at the same distance, gamma = 1, no noise:
        // each decodes iff its fading ratio favors it, probability 1/2.
        let s = Scenario::from_parts(
            ChannelParams::new(4.0, 1.0).unwrap(),
            InterferencePolicy::PathNodes,
            vec![
                mk_node(0, 0.0, 0.0, Role::Destination, None, 1.0, 0.0),
                mk_node(1, -150.0, 0.0, Role::Source, None, 1.0, 0.0),
                mk_node(2, 150.0, 0.0, Role::Source, None, 1.0, 0.0),
            ],
            vec![
                Flow { id: 1, source: 1, path: vec![1, 0] },
                Flow { id: 2, source: 2, path: vec![2, 0] },
            ],
        )
        .unwrap();
        let slots = 300_000u64;
        let cfg = SimConfig::new(slots, 0, 7, rates(&[(1, 1.0), (2, 1.0)])).unwrap();
        let stats = run(&s, &cfg);
        let sigma = (0.25f64 / slots as f64).sqrt();
        assert_abs_diff_eq!(stats.per_flow_throughput[&1], 0.5, epsilon = 3.0 * sigma);
        assert_abs_diff_eq!(stats.per_flow_throughput[&2], 0.5, epsilon = 3.0 * sigma);
    }

    #[test]
    fn packet_conservation_is_exact() {
        for (scenario, r) in [
            (presets::toy(), rates(&[(1, 0.9), (2, 0.7)])),
            (presets::grid_three_flow(), rates(&[(1, 0.496), (2, 0.222), (3, 0.496)])),
        ] {
            let cfg = SimConfig::new(40_000, 4_000, 11, r).unwrap();
            let stats = run(&scenario, &cfg);
            assert_eq!(
                stats.injected,
                stats.delivered + stats.backlog,
                "conservation violated on {:?}",
                scenario.flows().len()
            );
        }
    }

    #[test]
    fn identical_seeds_reproduce_identical_stats() {
        let s = presets::toy();
        let cfg = SimConfig::new(20_000, 2_000, 42, rates(&[(1, 1.0), (2, 1.0)])).unwrap();
        let a = run(&s, &cfg);
        let b = run(&s, &cfg);
        assert_eq!(a, b);
        let cfg2 = SimConfig { seed: 43, ..cfg };
        let c = run(&s, &cfg2);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_rates_yield_zero_throughput_and_bounded_delay() {
        let s = presets::grid_two_flow();
        let cfg = SimConfig::new(120_000, 1_000, 3, rates(&[(1, 0.0), (2, 0.0)])).unwrap();
        let stats = run(&s, &cfg);
        assert_eq!(stats.aat, 0.0);
        assert_eq!(stats.injected, 0);
        assert!(delay_bounded(&stats, &s));
        assert_eq!(stats.delay[&1].samples, 0);
    }

    #[test]
    fn warmup_must_be_shorter_than_run() {
        assert!(matches!(
            SimConfig::new(100, 100, 0, RateVector::new()),
            Err(SimError::InvalidWindow { .. })
        ));
    }

    #[test]
    fn empirical_link_success_matches_channel_probability() {
        // Single link, no interferers: success per attempt is
        // exp(-gamma eta / (v g)), binomial over attempts.
        let s = single_link(2.0, 7e-11);
        let p = {
            let flow = &s.flows()[0];
            s.end_to_end_success(flow)
        };
        assert!(p < 1.0);
        let cfg = SimConfig::new(200_000, 0, 5, rates(&[(1, 0.5)])).unwrap();
        let stats = run(&s, &cfg);
        let act = stats.per_link[&(1, 0)];
        let sigma = (p * (1.0 - p) / act.attempts as f64).sqrt();
        assert_abs_diff_eq!(act.success_rate(), p, epsilon = 3.0 * sigma);
    }

    #[test]
    fn overdriven_relay_flips_delay_bounded_false() {
        // (q1, q3) = (1, 0) at gamma = 1 violates the bounded-delay
        // constraint on the toy topology: the relay queue grows linearly.
        let s = presets::toy().with_uniform_sinr_threshold(1.0).unwrap();
        let r = rates(&[(1, 1.0), (2, 0.0)]);
        {
            let rv = throughput::RateVector::from_pairs([(1, 1.0), (2, 0.0)]).unwrap();
            let t12 = throughput::link_throughput((1, 2), &rv, &s).unwrap().value;
            let t20 = throughput::link_throughput((2, 0), &rv, &s).unwrap().value;
            assert!(t12 > t20, "construction must violate the delay bound");
        }
        let cfg = SimConfig::new(160_000, 10_000, 17, r).unwrap();
        let stats = run(&s, &cfg);
        assert!(!delay_bounded(&stats, &s));
        assert!(stats.queue_trend[&2] > QUEUE_TREND_EPS);
        assert!(stats.max_queue[&2] > 1_000);
    }

    #[test]
    fn saturated_relay_delivery_stays_within_analytic_bound() {
        // With the relay permanently backlogged the analytic saturation
        // assumption holds exactly; simulated AAT must not exceed the
        // analytic value by more than 3 sigma.
        let s = presets::toy().with_uniform_sinr_threshold(1.0).unwrap();
        let rv = rates(&[(1, 1.0), (2, 0.0)]);
        let analytic = throughput::aggregate_throughput(&rv, &s).unwrap();
        let slots = 200_000u64;
        let cfg = SimConfig::new(slots + 10_000, 10_000, 23, rv).unwrap();
        let stats = run(&s, &cfg);
        let sigma = (analytic * (1.0 - analytic) / slots as f64).sqrt();
        assert!(
            stats.aat <= analytic + 3.0 * sigma,
            "sim {} vs analytic {analytic} (+3 sigma {})",
            stats.aat,
            3.0 * sigma
        );
    }

    #[test]
    fn queue_trace_is_decimated_and_non_empty() {
        let s = presets::toy();
        let cfg = SimConfig::new(50_000, 1_000, 9, rates(&[(1, 1.0), (2, 1.0)])).unwrap();
        let stats = run(&s, &cfg);
        let trace = &stats.queue_trace[&2];
        assert!(!trace.is_empty());
        assert!(trace.len() as u64 <= 2 * TRACE_POINTS);
        assert_eq!(stats.trace_stride, 49_000 / TRACE_POINTS);
    }
}
