//! Capacity analysis for simultaneous lightwave information and power
//! transfer (SLIPT) links.
//!
//! The crate models an optical link whose receiver splits light between a
//! photodiode (information) and a photovoltaic cell (energy harvesting), and
//! computes the largest achievable information rate under peak, average and
//! harvested-energy constraints:
//!
//! * [`channel`]: path loss, lognormal fading, harvesting law, transition density.
//! * [`measure`]: input distributions, output densities, information densities.
//! * [`solver`]: constrained capacity solver, optimality verifier, sweeps.
//! * [`highsnr`]: closed-form exponential-family input law and its calibration.
//! * [`transition`]: three-point input family and peak-power transition analysis.
//! * [`learner`]: interchange with an external adversarial capacity learner.

pub mod channel;
pub mod error;
pub mod highsnr;
pub mod learner;
pub mod measure;
pub mod quad;
pub mod solver;
pub mod transition;

pub use channel::{ChannelGeometry, ChannelModel, ChannelSpec, DeviceParams, FadingParams, FadingQuadrature};
pub use error::{Error, Result};
pub use measure::{ConstraintSet, InputDistribution, InputGrid};
pub use solver::{MultiplierSet, RegionPoint, SolveOptions, SolveReport};
