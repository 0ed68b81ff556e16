//! Lyapunov spectra, box-counting dimension, recurrence statistics, periodic
//! points and chain attractors on cell graphs.

mod boxcount;
mod cells;
mod lyapunov;
mod periodic;
mod recurrence;

pub use boxcount::{box_counting_dimension, BoxCountResult, ScaleRange, MIN_POINTS, MIN_R_SQUARED, MIN_SCALES};
pub use cells::{build_cell_graph, chain_attractor, CellGraph, CellGraphSpec, ChainAttractor, FLOW_DT};
pub use lyapunov::{lyapunov_spectrum, HistoryEntry, LyapunovResult, LyapunovSettings, MAX_HISTORY};
pub use periodic::{
    classify, find_periodic_points, reverify_attracting, seed_grid, PeriodicOrbitRecord, Stability, DEDUP_TOL,
    ROOT_TOL, UNIT_TOL,
};
pub use recurrence::{recurrence_times, RecurrenceResult};
