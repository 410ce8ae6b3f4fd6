//! Asynchronous peak detection for diffusive molecular communication.
//!
//! A point transmitter sends an ON/OFF keyed bit sequence by releasing
//! impulses of molecules into an unbounded 3D medium. A passive spherical
//! receiver counts the molecules inside its volume once per sampling slot,
//! with an unknown integer clock offset relative to the transmitter. This
//! crate models that link and compares five symbol-by-symbol detectors:
//!
//! * single-sample: thresholds the sample where the peak is expected,
//! * energy: thresholds the sum of the symbol window,
//! * asynchronous peak: thresholds the largest sample in the window,
//! * and the decision-feedback variants of energy and asynchronous peak,
//!   which subtract the interference implied by earlier decisions.
//!
//! The modules are layered bottom-up:
//!
//! * [`channel`]: hitting probabilities and expected signals,
//! * [`stats`]: Poisson CDFs and exceedance probabilities of maxima and sums,
//! * [`detectors`]: the decision rules applied to observation traces,
//! * [`analysis`]: analytic bit-error probabilities and threshold search,
//! * [`simulation`]: seeded Monte Carlo trace generation and BER measurement,
//! * [`experiment`]: the configuration-driven sweep harness behind the CLI.

pub mod analysis;
pub mod channel;
pub mod detectors;
mod error;
pub mod experiment;
mod params;
pub mod simulation;
pub mod stats;

pub use error::{Error, Result};
pub use params::{BitSequence, ChannelParams};
