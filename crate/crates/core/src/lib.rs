//! Joint first-order projective differential invariants of point
//! configurations carrying gradients.
//!
//! The projective group PGL(3, R) acts on n points of the plane together with
//! the gradient of a scalar field at each point. This crate builds an explicit
//! moving frame for that action and derives from it
//!
//! * closed-form absolute invariants (a generating set of `4n - 8` functions),
//! * the invariantized Jacobian, a relative invariant of weight `-1`, and the
//!   primitive element of the field of relative invariants,
//! * the contracting homotopy of the multiplicative group-cochain complex,
//! * numerical verification harnesses (invariance trials, finite-difference
//!   rank, cochain identities),
//! * a small raster pipeline estimating jets with Sobel filters.
//!
//! Randomized suites run trials on rayon when the `parallel` feature is on
//! (default); each trial owns an independent random stream, so output is the
//! same with or without the feature.

pub mod action;
pub mod cochain;
pub mod descriptor;
pub mod error;
pub mod exec;
pub mod frame;
pub mod invariants;
pub mod jet;
pub mod relative;
pub mod suite;
pub mod verify;

pub use action::Homography;
pub use error::{Error, Result};
pub use exec::{Execution, TrialConfig};
pub use frame::{normalize, solve_frame, FrameParameters, NormalizedConfiguration};
pub use invariants::{generating_set, InvariantVector, IotaCoordinates};
pub use jet::{GeneralPositionReport, JetBlock, JetConfiguration};

use serde::Serialize;

/// Numerical thresholds shared by the frame and the invariant formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// General-position threshold on the scaled brackets.
    pub eps_gp: f64,
    /// Normalization residual threshold, multiplied by the configuration scale.
    pub eps_res: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eps_gp: jet::DEFAULT_EPS_GP,
            eps_res: 1e-9,
        }
    }
}

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let m = a.abs().max(b.abs());
    if m == 0.0 {
        0.0
    } else {
        (a - b).abs() / m
    }
}
