//! Split-and-disperse multipath messaging over infrastructure wireless networks.
//!
//! The library splits a message into equal parts, combines the parts pairwise
//! over GF(2), encrypts and shuffles the resulting combinations, and disperses
//! them over node-disjoint paths between a sender and a receiver. An
//! eavesdropper that controls relay nodes sees only the combinations routed
//! through those nodes; the [`leakage`] module quantifies what such an
//! adversary can recover, both by exact enumeration and by Monte Carlo
//! estimation, and the [`engine`] module replays a full transfer through a
//! deterministic discrete-event simulation with carrier-sense media access.
//!
//! Everything is deterministic: all randomness flows from one seeded
//! generator ([`rng::Keystream`]), so identical inputs give identical results
//! across runs and platforms.

pub mod codec;
pub mod engine;
pub mod gf2;
pub mod leakage;
pub mod mac;
pub mod rng;
pub mod routing;
pub mod topology;

pub use rng::Keystream;
