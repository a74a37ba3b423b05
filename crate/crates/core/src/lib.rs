//! Core engine for rendering IFS fractal ground truth and scoring turtle
//! programs against it.
//!
//! - [`turtle`]: turtle semantics and the line-based trace protocol
//! - [`catalog`]: the twelve fractals, their maps and turtle constructors
//! - [`raster`]: auto-fit rendering, PNG I/O, binary masks
//! - [`eval`]: IoU, correctness, aggregation and statistics
//!
//! Batch work goes through [`parallel`], which uses rayon when the
//! `parallel` feature is on (the default).

pub mod catalog;
pub mod eval;
pub mod parallel;
pub mod raster;
pub mod turtle;

pub use catalog::{catalog, generate, lookup, FractalKind, FractalSpec};
pub use eval::{iou, EvalRecord, Status};
pub use raster::{BinaryMask, Image, LineColor, RenderConfig};
pub use turtle::{
    execute, parse_trace, serialize_trace, PathSet, Point, TurtleCommand, TurtleTrace,
};
