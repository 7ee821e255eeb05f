//! Per-channel SNR and throughput prediction for ultra-wideband (S+C+L) WDM
//! links with hybrid distributed-Raman and lumped amplification.
//!
//! The crate solves the coupled Raman power-evolution equations over a fibre
//! span ([`raman`]), compresses the resulting power profiles into normalized
//! multi-exponential fits ([`profile`]), evaluates nonlinear interference with
//! both an integral GN model and a fast closed-form approximation ([`gn`]),
//! tracks signal/ASE/NLI through an amplifier-loop stage chain ([`link`]), and
//! combines the noise contributions into per-channel SNR, GMI and throughput
//! ([`qot`]).
//!
//! The crate is `no_std`-compatible (`--no-default-features`, allocator
//! required); IO, file formats and the command-line front end live in the
//! companion `qot-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod constants;
pub(crate) mod fmath;
pub mod gn;
pub mod link;
pub mod ode;
pub mod profile;
pub mod qot;
pub mod quad;
pub mod raman;
pub mod spectral;
