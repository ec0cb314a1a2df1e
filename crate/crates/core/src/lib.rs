//! Echo observables for the quantum kicked rotor and a driven quartic
//! oscillator: fidelity amplitudes of packet mixtures, allegiance, averaged
//! and mixed-state fidelity, with the classical and semiclassical
//! counterparts used to interpret them.

pub mod analysis;
pub mod classical;
pub mod error;
pub mod harness;
pub mod kicked_rotor;
pub mod metrics;
pub mod oscillator;
pub mod quantum;
pub mod series;

pub use error::{Error, Result};
