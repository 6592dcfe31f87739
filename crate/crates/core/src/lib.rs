//! Mutual-coupling-aware RIS-assisted multi-user MIMO downlink design.
//!
//! The RIS is modelled through scattering parameters: a port-to-port block
//! `S_αα`, a space-to-port block `S_αβ` (with `S_βα = S_αβᵀ`) and a diagonal
//! tunable load `Υ`. Coupling makes the effective reflection
//! `Φ = (Υ⁻¹ − S_αα)⁻¹` non-diagonal. The design splits into
//!
//! * an **online** problem per channel realization: transmit precoder `F`,
//!   common receive scale `ρ` and phases `θ` ([`inner`]);
//! * an **offline** problem over a channel ensemble: the diagonal factors of
//!   `S_αα = UΣ_ααUᴴ`, `S_αβ = UΣ_αβUᴴ` with `U = D⊗D` ([`outer`]).
//!
//! [`harness`] reproduces the baseline comparisons and parameter sweeps.

pub mod channels;
pub mod config;
pub mod error;
pub mod harness;
pub mod inner;
pub mod linalg;
pub mod metrics;
pub mod outer;
pub mod scattering;
pub mod system;

pub use error::{Error, Result};
pub use system::{
    dbm_to_watts, validate_params, ChannelSample, Precoder, RisPhaseConfig, ScatteringDesign,
    SystemParams,
};
