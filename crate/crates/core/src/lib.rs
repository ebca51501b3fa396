//! Monte-Carlo simulator and closed-form toolkit for multi-stream cooperative
//! relay networks.
//!
//! A single-antenna source sends a codeword to an `Nr`-antenna destination
//! with the help of `M` decode-and-forward relays. The source transmits
//! alone until `K` relays have decoded; the destination then selects which of
//! the source and the decoded relays each send one row of the codeword in
//! the cooperative phase. Four reference schemes (DF-SDiv, AF-SDiv, DDF,
//! DF-MSC-rand) are modelled for comparison, together with the analytical
//! outage bound and the diversity-multiplexing and throughput-reliability
//! tradeoffs.

pub mod analysis;
pub mod baselines;
pub mod channel;
pub mod engine;
pub mod error;
pub mod numerics;
pub mod protocol;

pub use channel::{ChannelRealization, ListeningOutcome, SystemParams};
pub use engine::{Engine, EstimateWithCI, Scheme, SnrSearch, SweepResult};
pub use error::{Error, Result};
pub use numerics::{ComplexMatrix, SeedStream};
pub use protocol::{FeedbackPattern, NodeSelection};
