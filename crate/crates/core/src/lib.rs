//! Metric geometry on step-two Carnot groups.
//!
//! * [`group`]: group law, inverse, dilations and horizontality.
//! * [`norms`]: Korányi, Lee–Naor, `N_{p,a}` and Hebisch–Sikora norms, the
//!   induced left-invariant distances, axiom and convexity diagnostics.
//! * [`wasserstein`]: finitely supported measures and exact 1-Wasserstein
//!   distances with dual certificates.
//! * [`geodesics`]: metric segments, ratio sets and explicit geodesics in
//!   the Wasserstein space.
//! * [`rigidity`]: push-forwards of group isometries and the rigidity
//!   demonstration.
//! * [`formats`]: JSON inputs and CSV reports used by the CLI.

pub mod error;
pub mod formats;
pub mod geodesics;
pub mod group;
mod linalg;
pub mod norms;
pub mod report;
pub mod rigidity;
pub mod rng;
pub mod transport;
pub mod wasserstein;

pub use error::{Error, Result};
pub use group::{GroupKind, GroupPoint, GroupSpec};
pub use norms::{NormKind, NormSpec};
pub use wasserstein::DiscreteMeasure;
