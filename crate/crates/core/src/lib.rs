//! Simulator for a covert channel hidden in the OFDM short training sequence, used
//! to exfiltrate neural-network weights one byte per frame.
//!
//! Signal path: [`covert`] encodes a byte into the STS, [`ofdm`] builds the frame,
//! [`channel`] impairs it, [`rx_bob`] decodes the payload as a normal receiver,
//! and [`rx_eve`] recovers the hidden byte. [`recovery`] votes over repeated
//! leaks and rebuilds the weights of the [`victim`] model. [`leakage`] holds the
//! analytical timing budget.

pub mod bits;
pub mod channel;
pub mod config;
pub mod covert;
pub mod error;
pub mod experiments;
pub mod iq;
pub mod leakage;
pub mod ofdm;
pub mod recovery;
pub mod rx_bob;
pub mod rx_eve;
pub mod stats;
pub mod victim;

pub use error::{Error, Result};
