//! Coexistence of a downstream quantum access network with a 10G-EPON.
//!
//! The crate covers the whole planning chain for one QKD transmitter at the
//! central office serving N users through the PON's power splitter:
//!
//! * [`odn`]: signal plan, splitter and WDM losses, the three coexistence
//!   topologies (shared feeder, dual feeder, dual splitter)
//! * [`raman`]: forward Raman noise from the OLT pump and its calibration
//! * [`keyrate`]: decoy-state BB84 observables, bounds and key rate
//! * [`analysis`]: single-point evaluation, distance and capacity queries
//! * [`mc`]: pulse-level Monte Carlo of the same link
//! * [`postproc`]: Winnow reconciliation and Toeplitz privacy amplification
//! * [`scenario`]: JSON scenarios, sweeps and the CLI commands

// `!(x > 0.0)` rejects NaN along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bits;
pub mod error;
pub mod keyfile;
pub mod keyrate;
pub mod mc;
pub mod odn;
pub mod postproc;
pub mod raman;
pub mod scenario;
pub mod toeplitz;
pub mod units;
pub mod winnow;

pub use error::{Error, Result};
