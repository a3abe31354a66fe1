//! Numerical laboratory for one-parameter families of nondegenerate unimodal
//! interval maps.
//!
//! The crate builds, at explicitly constructed parameters, the objects that
//! drive parameter-response experiments for absolutely continuous invariant
//! measures: critical-orbit diagnostics and expansion checks, pre-periodic
//! ("Misiurewicz-Thurston") parameter construction, two independent
//! estimators of the invariant density (long-orbit averaging and an Ulam
//! matrix), a tower extension of the phase space with its weighted transfer
//! operator and truncated leading eigenpairs, and the response-curve /
//! spike-displacement experiments that measure the square-root modulus of
//! continuity of `t -> integral of A d mu_t`.

pub mod error;
pub mod map_family;
pub mod numeric;
pub mod parameter_select;
pub mod response_experiment;
pub mod srb_estimate;
pub mod tower;
pub mod transfer_op;

pub use error::{Result, SrbError};
pub use map_family::MapFamily;
