//! Observers for linear systems measured through a quadratic output.
//!
//! A plant `ẋ = Ax + Bu`, `y = ½xᵀCx` whose C-sequence vanishes after `m`
//! steps is immersed into a state-affine system of dimension `m + n`. The
//! crate builds that immersion, certifies observability of the extended
//! system for a given input, and runs a Kalman-type observer on it.
//!
//! * [`augmentation`]: C-sequence, extended matrices, Γ table and `r_i`.
//! * [`observability`]: transition blocks, Gramians and excitation checks.
//! * [`observer`]: Riccati observer stepping.
//! * [`harness`]: scenarios, co-simulation and CSV output.

pub mod augmentation;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod observability;
pub mod observer;
pub mod signal;

pub use augmentation::{AugmentedSystem, CMatrixSequence, GammaTable, QuadraticOutputSystem};
pub use error::{Error, Result};
pub use harness::{Scenario, SimulationTrace};
pub use numerics::IntegrationGrid;
pub use observability::{Condition, PeReport, PeWindows};
pub use observer::{ObserverConfig, ObserverState};
pub use signal::{Primitive, PrimitiveSignal, SmoothSignal};
