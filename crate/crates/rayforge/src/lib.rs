//! rayforge: a numerical engine for the dynamics of transcendental entire
//! maps — periodic dynamic rays traced by inverse-branch pullback, landing
//! verification at repelling/parabolic periodic points, leg-map iteration,
//! and hyperbolic contraction certificates on finitely punctured planes.
//!
//! The crate is organized around explicit map families ([`map::MapSpec`]),
//! canonical tract partitions and external addresses ([`symbolic`]), ray
//! tracing and landing ([`rays`]), leg pullback sequences ([`legs`]),
//! hyperbolic density bounds ([`hyperbolic`]), postsingular-orbit analysis
//! ([`domains`]), and a deterministic escape-time renderer ([`render`]).
//!
//! With the default `parallel` feature, grid searches, rasterization, and
//! batch evaluations run data-parallel on rayon; built with
//! `--no-default-features` the same code paths run sequentially and produce
//! byte-identical results.

pub mod domains;
pub mod geometry;
pub mod hyperbolic;
pub mod legs;
pub mod map;
pub mod orbit;
pub mod parallel;
pub mod periodic;
pub mod rays;
pub mod render;
pub mod symbolic;

pub use geometry::Rect;
pub use map::{EvalError, MapError, MapSpec};
pub use num_complex::Complex64;
pub use orbit::{orbit, OrbitRecord, OrbitVerdict};
pub use periodic::{
    classify, cycle_multiplier, find_periodic_points, PeriodicPointRecord, PointClass,
};
pub use symbolic::{address_of, build_partition, ExternalAddress, PartitionSpec, Symbol};
