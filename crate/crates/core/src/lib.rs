//! Analysis of the spine of a two-particle Fleming-Viot process driven by
//! Brownian motion in (0, pi).
//!
//! The bounded harmonic function h on (0, pi)^2 — vanishing on the vertical
//! sides, equal to 1 on the horizontal sides — is h(x, y) = P(particle 2
//! exits first from (x, y)). This crate evaluates h and its gradient by two
//! independent analytic routes (a Fourier sine series and a
//! Schwarz-Christoffel conformal chain), simulates the Fleming-Viot pair,
//! its spine, and Brownian motion conditioned to stay in the interval, and
//! provides the stationary-regime analytics used to compare them.

pub mod conformal;
pub mod fourier;
pub mod montecarlo;
pub mod numerics;
pub mod stationary;

pub use conformal::{ConformalError, DiskPoint, HalfPlaneCoord, MapConstants, PolyRoots};
pub use fourier::{FourierError, GridReport, SeriesEvaluation, SquarePoint};
pub use montecarlo::{
    Boundary, BranchEvent, DriftEstimate, FvRun, McError, McEstimate, PairExit, RngSeed,
    SpineInterval, SpinePath,
};
pub use numerics::{ComplexValue, NumericsError, QuadratureResult};
pub use stationary::{
    GreenKernel, HarmonicMeasureSpec, OccupationReport, OccupationRow, StationaryError,
};
