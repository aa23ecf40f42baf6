//! leafmatch matches a partially occluded open 2D contour against a database
//! of full closed contours.
//!
//! The pipeline: contours become beta-spline curves resampled to a fixed
//! point count; discrete contour evolution picks salient vertices; subgraph
//! matching plants the occluded curve's vertex graph into each full curve and
//! cuts out the corresponding section; a least-squares affine overlay plus
//! the discrete Frechet distance prunes the field to a few survivors; a
//! four-term adjacency energy minimized by graduated non-convexity (GNCCP)
//! picks the final answer.
//!
//! All numeric modules are generic over the scalar type ([`Real`], i.e. f32
//! or f64); the pipeline, persistence and CLI layers run on f64, and the
//! crate root exports f64 aliases for the common types.

pub mod alignment;
mod assignment;
pub mod dce;
pub mod energy;
mod error;
pub mod eval;
pub mod geometry;
pub mod gnccp;
pub mod io;
pub mod pipeline;
mod scalar;
pub mod spline;
pub mod subgraph;
mod util;

pub use error::{Error, Result};
pub use scalar::Real;

/// f64 instantiations used throughout the pipeline and CLI.
pub type Point2 = geometry::Point2<f64>;
pub type Contour = geometry::Contour<f64>;
pub type OpenCurve = geometry::OpenCurve<f64>;
pub type CurvatureProfile = geometry::CurvatureProfile<f64>;
pub type SplineConfig = spline::SplineConfig<f64>;
pub type SplineCurve = spline::SplineCurve<f64>;
pub type FeatureGraph = dce::FeatureGraph<f64>;
pub type MatchConfig = subgraph::MatchConfig<f64>;
pub type NodeMapping = subgraph::NodeMapping<f64>;
pub type AffineTransform = alignment::AffineTransform<f64>;
pub type FrechetResult = alignment::FrechetResult<f64>;
pub type EnergyWeights = energy::EnergyWeights<f64>;
pub type AdjacencyBundle = energy::AdjacencyBundle<f64>;
pub type GnccpConfig = gnccp::GnccpConfig<f64>;
pub type GnccpResult = gnccp::GnccpResult<f64>;

/// f32 aliases for callers that want the single-precision core.
pub type Point2f = geometry::Point2<f32>;
pub type Contourf = geometry::Contour<f32>;
pub type OpenCurvef = geometry::OpenCurve<f32>;
