//! Numerical laboratory for eigenfields of curl: steady flows satisfying
//! curl u = f u with div u = 0 for a scalar factor f.
//!
//! The crate provides
//!
//! * generators for closed-form and ODE-integrated eigenfields (triply
//!   periodic trigonometric flows, radially layered flows, planar-rotated
//!   harmonic flows),
//! * semilinear elliptic solvers for the stream-function reductions with
//!   translational or rotational symmetry, including free-boundary vortex
//!   problems with power nonlinearities,
//! * level-set machinery that builds surface-adapted charts by flowing
//!   level curves of the factor along its gradient,
//! * pullback diagnostics: the induced 1-form coefficients on those charts,
//!   their constrained linear evolution in the flow parameter, and the
//!   associated elliptic compatibility systems,
//! * rigidity diagnostics that measure how strongly the geometry pins down
//!   the field (coefficient variation bounds, discrete nullspace ranks,
//!   symmetry defects).
//!
//! Everything works on uniform grids with explicit chart tags and returns
//! typed errors; see the `scenario` module and the `beltrami-lab` binary for
//! the batch pipeline.

pub mod cg;
pub mod chart;
pub mod error;
pub mod generators;
pub mod gs;
pub mod io;
pub mod render;
pub mod levelset;
pub mod ops;
pub mod pullback;
pub mod rigidity;
pub mod profile;
pub mod report;
pub mod scenario;
pub mod vector;
pub mod vortex;

pub use chart::{ChartTag, GridSpec3, ScalarChartField, ScalarGrid3};
pub use error::{Error, Result};
pub use profile::{ProfileTag, RadialProfile};
pub use report::{DiagnosticReport, ReportEntry};
pub use vector::SymmetricVectorField;
