//! CR Yamabe flow on the standard CR 3-sphere.

pub mod action;
pub mod calculus;
pub mod error;
pub mod field;
pub mod flow;
pub mod harnack;
pub mod initial;
pub mod optim;
pub mod interp;
pub mod poly;
pub mod sphere;
pub mod transform;

pub use calculus::{CovariantSecond, Direction, FrameCalculus};
pub use error::{Error, Result};
pub use flow::{FlowConfig, FlowRun, InitialSpec, Integrator, TerminalEvent};
pub use field::{ComplexField, Field, ScalarField};
pub use initial::Section5Params;
pub use sphere::{build_grid, frame_at, GridDims, HopfGrid, SpherePoint};
pub use transform::{DiagnosticsRecord, PseudohermitianState};
