//! Utility-based shortfall and divergence risk measures on finite
//! probability spaces, scalar and set-valued, with market extensions under
//! conical trading models.
//!
//! The crate is organized in layers:
//!
//! * numeric foundations: [`xreal`] (tagged extended reals), [`optim`]
//!   (bracketing and golden-section search), [`simplex`] (dense LP);
//! * model data: [`space`], [`tree`], [`loss`], [`divergence`], [`poly`];
//! * scalar measures: [`scalar`] (shortfall and divergence risk, duals);
//! * set-valued measures: [`set_risk`], [`entropic`], [`avar`];
//! * markets: [`market`] (solvency cones, trading constraints, liquidation);
//! * interchange: [`io`] (JSON input, report types).
//!
//! All computations are deterministic: identical inputs produce identical
//! bytes in reports.

pub mod avar;
pub mod config;
pub mod divergence;
pub mod entropic;
pub mod error;
pub mod loss;
pub mod optim;
pub mod poly;
pub mod sampling;
pub mod scalar;
pub mod set_risk;
pub mod simplex;
pub mod space;
pub mod tree;
pub mod xreal;

pub use error::{Error, Result};
