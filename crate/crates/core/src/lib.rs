//! Laboratory for the random-to-random insertion shuffle.
//!
//! The crate is organised bottom-up:
//!
//! * [`deck`]: decks, single insertion moves `M(a,b)`, move paths, ranking.
//! * [`coupling`]: the queue process, good times and the path transform
//!   that builds a non-Markovian coupling of two adjacent decks.
//! * [`chain`]: the 9-state truncated queue-size chain, its generator and
//!   limit matrix, spectral quantities and the mixing-time bound.
//! * [`eigen`]: Perron-root computation for small dense absorbing blocks.
//! * [`exact`]: exact distribution evolution over all `n!` decks.
//! * [`montecarlo`]: seeded, order-independent batch estimators.
//! * [`acceptance`]: the end-to-end verification criteria.

pub mod acceptance;
pub mod chain;
pub mod coupling;
pub mod deck;
pub mod eigen;
pub mod error;
pub mod exact;
pub mod montecarlo;
pub mod report;
pub mod rng;
pub mod stats;

pub use chain::{BoundConstants, MatrixKind, TransitionMatrix, TruncatedState, YState};
pub use coupling::{
    CoupledOutcome, CouplingVariant, GoodTimeRule, LastGoodTime, QueueMembership, QueueState, SpecialPair,
};
pub use deck::{Card, Deck, Shuffle, ShufflePath};
pub use error::{Error, Result};
pub use rng::SeedSpec;
pub use stats::EstimateWithCI;
