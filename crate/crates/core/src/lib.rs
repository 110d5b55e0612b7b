//! Fisher information of a coherent ⊗ squeezed-vacuum Mach-Zehnder
//! interferometer read out by photon counters with a finite number
//! resolution.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its arguments; IO, file formats and thread pools live in the
//! `mzfisher` companion crate.
//!
//! Module map:
//!
//! * [`numerics`]: log-factorials, `erfc`, signed log-domain arithmetic.
//! * [`states`]: Fock amplitudes of the two inputs, generation probabilities
//!   `G_N` and post-selected `N`-photon states.
//! * [`rotation`]: Wigner small-d blocks of `exp(-iφ J_y)` and the resulting
//!   photon-counting probabilities.
//! * [`fisher`]: per-`N` and total classical/quantum Fisher information,
//!   the ideal limit and the `erfc` closed-form approximation.
//! * [`optimize`]: optimal input splits and power-law fits.
//! * [`simulate`]: Monte-Carlo photon counting and maximum-likelihood phase
//!   estimation.
#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// reference values are quoted to more digits than f64 holds
#![cfg_attr(test, allow(clippy::excessive_precision, clippy::needless_range_loop))]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod fisher;
mod linalg;
pub mod numerics;
pub mod optimize;
pub mod rotation;
pub mod simulate;
pub mod states;

pub use error::{Error, Result};
pub use fisher::{FisherReport, PerNRecord, Threshold};
pub use numerics::LogSigned;
pub use states::{AmplitudeTable, LightSource, NPhotonState};
