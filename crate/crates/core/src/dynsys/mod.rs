//! States, models, integration, iteration and tangent propagation.

mod integrate;
mod jacobian;
mod model;
mod orbit;
mod tangent;

pub(crate) use integrate::Rk4;
pub use integrate::{
    integrate_flow, integrate_to_crossing, iterate_map, iterate_map_with, MapSettings,
    StepSettings,
};
pub use jacobian::{finite_difference_jacobian, jacobian_at, JacobianEval, JacobianMethod, FD_STEP};
pub use model::{wrap, wrapped_diff, Coord, Dynamics, Locus, ModelKind, State, SystemModel};
pub use orbit::{fmt17, Orbit, OrbitMeta};
pub(crate) use tangent::run_tangent;
pub use tangent::{propagate_tangent, Span, TangentFrame, TangentSettings};
