//! Explicit ReLU network constructions for Lipschitz approximation and for
//! generating (countably) rectifiable measures, with exact certification of
//! their architecture, Lipschitz and Wasserstein bounds.

pub mod checks;
pub mod cli;
pub mod error;
pub mod grid;
pub mod lipschitz_approx;
pub mod measures;
pub mod pwl;
pub mod rectifiable;
pub mod relu_net;
pub mod scalar;
pub mod spike;
pub mod transport;
pub mod wasserstein;

pub use error::{Error, Result};
pub use grid::WeightGrid;
pub use pwl::Pwl;
pub use relu_net::{AffineLayer, NetworkMetrics, PadMode, ReluNetwork};
pub use scalar::{Rational, Scalar};

/// Exact weight type used by all builders.
pub type RationalWeight = Rational;
/// Floating point network used for fast evaluation.
pub type Net = ReluNetwork<f64>;
/// Network with exact rational weights.
pub type ExactNet = ReluNetwork<Rational>;
/// Single precision network.
pub type NetF32 = ReluNetwork<f32>;
