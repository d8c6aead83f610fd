//! Two-sector education policy model.
//!
//! Agents carry talents in sectors `a` and `b`; a government spends a fixed
//! education budget before agents learn their taste θ, whose distribution
//! may depend on post-education wages. The crate computes each agent's
//! freedom value `V`, solves the one-school and two-school policies under
//! resource and expected-utility equalization, and checks the welfare
//! ranking between them.

pub mod cli;
pub mod error;
pub mod freedom;
pub mod harness;
pub mod numeric;
pub mod policies;
pub mod population;
pub mod preferences;
pub mod verify;
pub mod welfare;

pub use error::{Error, Result};
pub use freedom::{QuadratureSpec, Sector, WagePair};
pub use population::{Population, TalentProfile};
pub use preferences::{Family, TasteDensity};
