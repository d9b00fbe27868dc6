//! Identify which reference channel signature is embedded in an aggregated
//! smart-meter signal.
//!
//! The crate covers the whole chain: per-cycle electrical features from raw
//! current and voltage ([`features`]), frame blocking with DC removal
//! ([`signals`]), four elastic matchers ([`matching`]), ReliefF feature
//! ranking ([`ranking`]), channel identification against a reference set
//! ([`pipeline`]), the noiseless / noisy / cross-monitor evaluation
//! protocols ([`evaluation`]) and a deterministic synthetic corpus
//! ([`synth`]). File formats live in [`io`].

pub mod error;
pub mod evaluation;
pub mod features;
pub mod io;
pub mod matching;
pub mod par;
pub mod pipeline;
pub mod ranking;
pub mod signals;
pub mod synth;

pub use error::{Error, Result};
pub use matching::{Algorithm, MatchParams, MatchScore, Metric, Sequence};
pub use par::Exec;
pub use signals::{FeatureSeries, Frame, Waveform, WaveformKind};
