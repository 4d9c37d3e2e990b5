//! Constructive approximation on closed planar sets: rasterized topology
//! checks, weighted polynomial fitting, zero-free entire interpolants and a
//! staged pointwise-tolerance pipeline.

pub mod audit;
pub mod error;
pub mod fitting;
pub mod fixtures;
pub mod func;
pub mod geom;
pub mod noncrit;
pub mod pipeline;
pub mod poly;
pub mod topology;

pub use error::{Error, Result};
pub use func::{AnalyticMap, FnMap, Target};
pub use geom::{raster_tolerance, Grid, RasterPatch, Region, Shape, Window};
pub use poly::{CPoly, ScaledPoly};
