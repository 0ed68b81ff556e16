//! Numerical laboratory for strange attractors.
//!
//! The crate is organised around a single universal object, [`SystemModel`],
//! which wraps either a flow (vector field) or a discrete map together with its
//! coordinate domain, optional analytic Jacobian and optional discontinuity
//! locus. Everything else consumes it:
//!
//! * [`dynsys`]: integration, iteration, tangent propagation, Jacobians.
//! * [`zoo`]: constructors for the concrete systems (Lorenz flow, saddle-node
//!   normal form, torus automorphisms and endomorphisms, circle families, the
//!   solid-torus map, the geometric Lorenz map and the wild saddle-focus map).
//! * [`verify`]: sampled checks of hyperbolicity and pseudo-hyperbolicity
//!   inequalities, returning [`verify::ConditionReport`]s.
//! * [`kneading`]: one-dimensional reduction, kneading invariants and
//!   topological Markov chains.
//! * [`analysis`]: Lyapunov spectra, box dimension, recurrence statistics,
//!   periodic orbits and chain-recurrent attractors on cell graphs.
//! * [`scan`]: parameter sweeps over the bifurcation scenarios.

// `!(x > 0.0)` deliberately rejects NaN; index loops mirror the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod dynsys;
mod error;
pub mod kneading;
pub mod linalg;
pub mod scan;
pub mod verify;
pub mod zoo;

pub use dynsys::{Coord, ModelKind, Orbit, State, SystemModel};
pub use error::{Error, Result};
