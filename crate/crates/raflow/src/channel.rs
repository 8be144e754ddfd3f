//! Physical-layer math shared by the analytic model and the simulator:
//! received power factors, Rayleigh-fading link success probabilities and
//! per-slot fading samples.
//!
//! A transmission from `i` to `j` is decoded iff `SINR(i,j) >= gamma_j`,
//! where `SINR(i,j) = A(i,j) g(i,j) / (eta_j + sum_k A(k,j) g(k,j))` over
//! the other concurrent transmitters `k`. With exponentially distributed
//! fading gains `A` (mean `v`), the success probability has the closed form
//!
//! ```text
//! p = exp(-gamma_j eta_j / (v g(i,j)))
//!     * prod_k (1 + gamma_j * v g(k,j) / (v g(i,j)))^-1
//! ```
//!
//! which [`success_probability`] evaluates and the simulator reproduces by
//! sampling.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp};

/// Above this many interference factors the product is accumulated in log
/// space to avoid underflow.
const LOG_SPACE_THRESHOLD: usize = 32;

/// Channel-wide propagation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Path loss exponent, valid in `[2, 6]`.
    pub alpha: f64,
    /// Mean of the exponential fading gain, applied uniformly to all links.
    pub v_default: f64,
}

impl ChannelParams {
    pub fn new(alpha: f64, v_default: f64) -> Result<Self, ChannelError> {
        if !(2.0..=6.0).contains(&alpha) {
            return Err(ChannelError::InvalidPathLossExponent { alpha });
        }
        if !(v_default > 0.0) {
            return Err(ChannelError::InvalidFadingMean { v: v_default });
        }
        Ok(Self { alpha, v_default })
    }
}

/// Per-node radio front end: transmit power, receiver noise and the SINR
/// threshold above which a packet is decoded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioSpec {
    /// Transmit power in watts.
    pub tx_power: f64,
    /// Receiver noise power in watts.
    pub noise: f64,
    /// Dimensionless decoding threshold.
    pub sinr_threshold: f64,
}

impl RadioSpec {
    pub fn new(tx_power: f64, noise: f64, sinr_threshold: f64) -> Result<Self, ChannelError> {
        if !(tx_power > 0.0) {
            return Err(ChannelError::InvalidTxPower { tx_power });
        }
        if !(noise >= 0.0) {
            return Err(ChannelError::InvalidNoise { noise });
        }
        if !(sinr_threshold > 0.0) {
            return Err(ChannelError::InvalidSinrThreshold { sinr_threshold });
        }
        Ok(Self { tx_power, noise, sinr_threshold })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelError {
    InvalidPathLossExponent { alpha: f64 },
    InvalidFadingMean { v: f64 },
    InvalidTxPower { tx_power: f64 },
    InvalidNoise { noise: f64 },
    InvalidSinrThreshold { sinr_threshold: f64 },
    /// A node cannot link to itself; distances must be strictly positive.
    NonPositiveDistance { distance: f64 },
    /// The transmitter must be part of the active set.
    TransmitterNotActive { tx: usize },
    /// Half-duplex: the receiver cannot be transmitting in the same slot.
    ReceiverActive { rx: usize },
}

impl fmt::Display for ChannelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidPathLossExponent { alpha } => {
                write!(f, "path loss exponent {alpha} outside [2, 6]")
            }
            Self::InvalidFadingMean { v } => write!(f, "fading mean {v} must be positive"),
            Self::InvalidTxPower { tx_power } => {
                write!(f, "transmit power {tx_power} W must be positive")
            }
            Self::InvalidNoise { noise } => write!(f, "noise power {noise} W must be non-negative"),
            Self::InvalidSinrThreshold { sinr_threshold } => {
                write!(f, "SINR threshold {sinr_threshold} must be positive")
            }
            Self::NonPositiveDistance { distance } => {
                write!(f, "link distance {distance} m must be positive")
            }
            Self::TransmitterNotActive { tx } => {
                write!(f, "transmitter {tx} is not in the active set")
            }
            Self::ReceiverActive { rx } => {
                write!(f, "receiver {rx} is in the active set (half-duplex violation)")
            }
        }
    }
}

impl std::error::Error for ChannelError {}

/// Received power factor `g(i,j) = P_tx * d^-alpha`.
pub fn rx_power_factor(tx_power: f64, distance: f64, alpha: f64) -> Result<f64, ChannelError> {
    if !(distance > 0.0) {
        return Err(ChannelError::NonPositiveDistance { distance });
    }
    Ok(tx_power * distance.powf(-alpha))
}

/// Success probability of the link `tx -> rx` when the nodes in `active`
/// (which must include `tx` and exclude `rx`) transmit in the same slot.
///
/// `radios` is indexed by node index; `distance(a, b)` returns the distance
/// in meters between two node indices.
pub fn success_probability<D>(
    tx: usize,
    rx: usize,
    active: &[usize],
    radios: &[RadioSpec],
    channel: &ChannelParams,
    distance: D,
) -> Result<f64, ChannelError>
where
    D: Fn(usize, usize) -> f64,
{
    if !active.contains(&tx) {
        return Err(ChannelError::TransmitterNotActive { tx });
    }
    if active.contains(&rx) {
        return Err(ChannelError::ReceiverActive { rx });
    }
    let gamma = radios[rx].sinr_threshold;
    let v = channel.v_default;
    let g_signal = rx_power_factor(radios[tx].tx_power, distance(tx, rx), channel.alpha)?;
    let noise_exponent = -gamma * radios[rx].noise / (v * g_signal);

    let interferers: Vec<usize> = active.iter().copied().filter(|&k| k != tx).collect();
    if interferers.len() <= LOG_SPACE_THRESHOLD {
        let mut p = noise_exponent.exp();
        for &k in &interferers {
            let g_k = rx_power_factor(radios[k].tx_power, distance(k, rx), channel.alpha)?;
            p *= 1.0 / (1.0 + gamma * (v * g_k) / (v * g_signal));
        }
        Ok(p)
    } else {
        let mut log_p = noise_exponent;
        for &k in &interferers {
            let g_k = rx_power_factor(radios[k].tx_power, distance(k, rx), channel.alpha)?;
            log_p -= (gamma * (v * g_k) / (v * g_signal)).ln_1p();
        }
        Ok(log_p.exp())
    }
}

/// Draw one fading gain with mean `v`, i.e. `P(A > x) = exp(-x/v)`.
pub fn sample_fading<R: Rng + ?Sized>(rng: &mut R, v: f64) -> f64 {
    debug_assert!(v > 0.0, "fading mean must be positive");
    Exp::new(1.0 / v).expect("positive rate").sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn radio(gamma: f64, noise: f64) -> RadioSpec {
        RadioSpec::new(0.1, noise, gamma).unwrap()
    }

    #[test]
    fn rx_power_factor_unit_distance_is_tx_power() {
        assert_eq!(rx_power_factor(0.1, 1.0, 4.0).unwrap(), 0.1);
    }

    #[test]
    fn rx_power_factor_direct_evaluation() {
        // 0.1 * 100^-4
        assert_relative_eq!(
            rx_power_factor(0.1, 100.0, 4.0).unwrap(),
            1.0e-9,
            max_relative = 1e-12
        );
    }

    #[test]
    fn rx_power_factor_doubling_distance_scales_by_two_to_alpha() {
        for alpha in [2.0, 3.0, 4.0, 5.5] {
            let near = rx_power_factor(0.25, 137.0, alpha).unwrap();
            let far = rx_power_factor(0.25, 274.0, alpha).unwrap();
            assert_relative_eq!(near / far, 2f64.powf(alpha), max_relative = 1e-12);
        }
    }

    #[test]
    fn rx_power_factor_rejects_zero_distance() {
        assert!(matches!(
            rx_power_factor(0.1, 0.0, 4.0),
            Err(ChannelError::NonPositiveDistance { .. })
        ));
        assert!(matches!(
            rx_power_factor(0.1, -3.0, 4.0),
            Err(ChannelError::NonPositiveDistance { .. })
        ));
    }

    #[test]
    fn success_probability_no_noise_no_interference_is_one() {
        let radios = vec![radio(1.0, 0.0), radio(1.0, 0.0)];
        let ch = ChannelParams::new(4.0, 1.0).unwrap();
        let p = success_probability(0, 1, &[0], &radios, &ch, |_, _| 100.0).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn success_probability_symmetric_interferer_is_half() {
        // One interferer at the same distance, gamma = 1, no noise: (1+1)^-1.
        let radios = vec![radio(1.0, 0.0); 3];
        let ch = ChannelParams::new(4.0, 1.0).unwrap();
        let p = success_probability(0, 2, &[0, 1], &radios, &ch, |_, _| 250.0).unwrap();
        assert_eq!(p, 0.5);
    }

    #[test]
    fn success_probability_grid_link_with_one_interferer() {
        // Link over 100 m with an interferer at sqrt(100^2 + 300^2) m,
        // alpha = 4, P_tx = 0.1 W, eta = 7e-11 W, gamma = 0.5. Expected value
        // frozen from a 50-digit evaluation of the closed form.
        let radios = vec![radio(0.5, 7e-11); 3];
        let ch = ChannelParams::new(4.0, 1.0).unwrap();
        let dist = |a: usize, b: usize| match (a.min(b), a.max(b)) {
            (0, 1) => 100.0,
            (1, 2) => (100.0f64 * 100.0 + 300.0 * 300.0).sqrt(),
            _ => unreachable!(),
        };
        let p = success_probability(0, 1, &[0, 2], &radios, &ch, dist).unwrap();
        assert_relative_eq!(p, 0.960_801_409_211_508_93, max_relative = 1e-12);
    }

    #[test]
    fn success_probability_contract_violations() {
        let radios = vec![radio(1.0, 0.0); 3];
        let ch = ChannelParams::new(4.0, 1.0).unwrap();
        assert!(matches!(
            success_probability(0, 2, &[1], &radios, &ch, |_, _| 10.0),
            Err(ChannelError::TransmitterNotActive { tx: 0 })
        ));
        assert!(matches!(
            success_probability(0, 2, &[0, 2], &radios, &ch, |_, _| 10.0),
            Err(ChannelError::ReceiverActive { rx: 2 })
        ));
    }

    #[test]
    fn success_probability_log_space_matches_direct_product() {
        // 40 interferers forces the log-space path; rebuild the direct
        // product by splitting into two calls of 20.
        let n = 42;
        let radios = vec![radio(0.8, 1e-11); n];
        let ch = ChannelParams::new(3.0, 1.0).unwrap();
        let dist = |a: usize, b: usize| 50.0 + 13.0 * (a + b) as f64;
        let all: Vec<usize> = (0..n - 1).collect();
        let p_log = success_probability(0, n - 1, &all, &radios, &ch, dist).unwrap();

        let gamma = radios[n - 1].sinr_threshold;
        let g_sig = rx_power_factor(0.1, dist(0, n - 1), ch.alpha).unwrap();
        let mut p_direct = (-gamma * radios[n - 1].noise / g_sig).exp();
        for k in 1..n - 1 {
            let g_k = rx_power_factor(0.1, dist(k, n - 1), ch.alpha).unwrap();
            p_direct *= 1.0 / (1.0 + gamma * g_k / g_sig);
        }
        assert_relative_eq!(p_log, p_direct, max_relative = 1e-12);
    }

    #[test]
    fn fading_sample_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xFAD);
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut above_two = 0u32;
        for _ in 0..n {
            let a = sample_fading(&mut rng, 1.0);
            sum += a;
            if a > 2.0 {
                above_two += 1;
            }
        }
        assert_abs_diff_eq!(sum / n as f64, 1.0, epsilon = 0.01);
        assert_abs_diff_eq!(above_two as f64 / n as f64, (-2.0f64).exp(), epsilon = 0.005);
    }

    #[test]
    fn fading_is_reproducible_for_fixed_seed() {
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            (0..32).map(|_| sample_fading(&mut rng, 0.7)).collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn monte_carlo_estimate_matches_closed_form() {
        // Estimate P(SINR >= gamma) by sampling Eq.-style fading draws and
        // compare against the closed form within 3-sigma binomial bounds.
        let radios = vec![radio(0.9, 5e-11); 4];
        let ch = ChannelParams::new(3.5, 1.0).unwrap();
        let pos: [(f64, f64); 4] = [(0.0, 0.0), (210.0, 40.0), (90.0, 160.0), (130.0, -80.0)];
        let dist = |a: usize, b: usize| -> f64 {
            let (xa, ya) = pos[a];
            let (xb, yb) = pos[b];
            (xa - xb).hypot(ya - yb)
        };
        let active = [0usize, 2, 3];
        let rx = 1usize;
        let p = success_probability(0, rx, &active, &radios, &ch, dist).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(4242);
        let trials = 400_000u32;
        let mut hits = 0u32;
        for _ in 0..trials {
            let mut interference = 0.0;
            let mut signal = 0.0;
            for &k in &active {
                let a = sample_fading(&mut rng, ch.v_default);
                let g = rx_power_factor(radios[k].tx_power, dist(k, rx), ch.alpha).unwrap();
                if k == 0 {
                    signal = a * g;
                } else {
                    interference += a * g;
                }
            }
            if signal / (radios[rx].noise + interference) >= radios[rx].sinr_threshold {
                hits += 1;
            }
        }
        let p_hat = f64::from(hits) / f64::from(trials);
        let sigma = (p * (1.0 - p) / f64::from(trials)).sqrt();
        assert!(
            (p_hat - p).abs() <= 3.0 * sigma,
            "p_hat {p_hat} vs p {p} exceeds 3 sigma {sigma}"
        );
    }

    proptest! {
        #[test]
        fn success_probability_monotone_in_threshold_noise_and_interference(
            seed in 0u64..1024,
            n in 2usize..6,
            gamma in 0.1f64..3.0,
            noise in 0.0f64..1e-9,
            alpha in 2.0f64..6.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pos: Vec<(f64, f64)> = (0..n)
                .map(|_| (rng.random_range(10.0..800.0), rng.random_range(10.0..800.0)))
                .collect();
            let dist = |a: usize, b: usize| -> f64 {
                let d = ((pos[a].0 - pos[b].0).powi(2) + (pos[a].1 - pos[b].1).powi(2)).sqrt();
                d.max(1.0)
            };
            let ch = ChannelParams::new(alpha, 1.0).unwrap();
            let rx = n - 1;
            let active: Vec<usize> = (0..n - 1).collect();

            let radios = vec![radio(gamma, noise); n];
            let p_full = success_probability(0, rx, &active, &radios, &ch, dist).unwrap();
            prop_assert!((0.0..=1.0).contains(&p_full));

            // Removing any interferer can only help.
            for drop in 1..n - 1 {
                let reduced: Vec<usize> =
                    active.iter().copied().filter(|&k| k != drop).collect();
                let p_less = success_probability(0, rx, &reduced, &radios, &ch, dist).unwrap();
                prop_assert!(p_less >= p_full);
            }

            // Raising the threshold or the noise can only hurt.
            let harder = vec![radio(gamma * 1.5, noise); n];
            let p_harder = success_probability(0, rx, &active, &harder, &ch, dist).unwrap();
            prop_assert!(p_harder <= p_full);

            let noisier = vec![radio(gamma, noise + 1e-10); n];
            let p_noisier = success_probability(0, rx, &active, &noisier, &ch, dist).unwrap();
            prop_assert!(p_noisier <= p_full);
        }
    }
}
