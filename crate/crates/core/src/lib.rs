#![no_std]
#![cfg_attr(test, allow(unused_imports))]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
//! Beamforming designs for downlink multi-antenna NOMA.
//!
//! Power minimization by successive convex approximation ([`sca`]) and by
//! semidefinite relaxation ([`sdr`]), max-min rate fairness by bisection
//! ([`maxmin`]), outage-constrained robust design ([`robust`]) and orthogonal
//! / zero-forcing comparators ([`baselines`]). All convex subproblems go
//! through the dense conic solver in [`conic`].
//!
//! The crate is `no_std` and only needs `alloc`.

extern crate alloc;

pub mod baselines;
mod beam;
pub mod channel;
pub mod conic;
pub mod error;
pub mod linalg;
pub mod maxmin;
pub mod model;
pub mod robust;
pub mod sca;
pub mod sdr;

pub use error::{Error, Result};
pub use model::{BeamformerSet, ChannelSet, RateReport, SystemConfig};
