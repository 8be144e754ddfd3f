//! Aggregate-throughput-optimal flow rate allocation over disjoint paths in
//! random-access wireless multi-hop networks with multi-packet reception.
//!
//! The crate has two halves that check each other:
//!
//! * an analytic side — SINR/Rayleigh link success probabilities
//!   ([`channel`]), interferer-subset enumeration of per-link throughput
//!   ([`throughput`]) and a simulated-annealing rate optimizer with
//!   bounded-delay constraints ([`optimizer`]);
//! * a slotted Monte Carlo simulator ([`simulator`]) that replays the same
//!   model packet by packet and is used to validate the analytic estimates.
//!
//! Scenarios (nodes, disjoint paths, channel parameters) are described in a
//! TOML schema handled by [`topology`]; [`presets`] builds the bundled
//! reference topologies programmatically.
//!
//! With the default `parallel` feature, subset enumeration, solver restarts
//! and parameter sweeps run on rayon; disabling the feature falls back to
//! sequential execution with bit-identical results.

pub mod channel;
pub mod exec;
pub mod optimizer;
pub mod presets;
pub mod simulator;
pub mod throughput;
pub mod topology;
