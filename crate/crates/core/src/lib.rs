//! Pricing and hedging of long-dated savings-account bonds and stylized
//! catastrophe bonds under the minimal market model.
//!
//! Prices come in three flavours: the minimal (real-world) price, the formally
//! obtained risk-neutral price, and loading prices that interpolate between
//! the two with a non-negative loading degree. The crate covers calibration of
//! the model from an index series, exact simulation of the discounted
//! numeraire portfolio, and the hedge ledgers that deliver these claims.
//!
//! Monte Carlo loops run on rayon when the `parallel` feature (default) is
//! enabled; results are identical either way.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod error;
pub mod hedging;
pub mod market_data;
pub mod mc;
pub mod model;
pub mod pricing;
pub mod rng;
pub mod simulation;

pub use error::{Error, Result};
pub use mc::Execution;
pub use model::{MmmParams, YearTime};
pub use pricing::PriceTriple;
