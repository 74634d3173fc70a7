//! Deterministic lifecycle simulator with a learning data-loss healer.
//!
//! Components hold typed member and view variables. A stop-start event
//! destroys and recreates a component; the framework carries views across,
//! app handlers (possibly faulty) carry members. The [`healer`] watches each
//! event through lifecycle hooks, learns which abstract states lose which
//! variables, and heals them.
//!
//! Everything carrying a `Float` payload is generic over [`Scalar`]
//! (`f32` or `f64`); the aliases below fix it to `f64`.

pub mod abstraction;
pub mod appmodel;
pub mod error;
pub mod fixtures;
pub mod healer;
pub mod lifecycle;
pub mod oracle;
pub mod runner;
pub mod scalar;
pub mod scenario;
pub mod snapshot;
pub mod value;

pub use abstraction::{abstract_equal, abstract_state, default_value, is_default, AbstractState};
pub use error::{Error, Result};
pub use healer::{ActionLabel, ClassLabel, Classification, HealerMemory, MemoryUpdate, VarSet};
pub use lifecycle::{EventKind, LifecycleHooks, NoHooks, StopStartEvent};
pub use oracle::{GroundTruth, Limits};
pub use runner::{EventRecord, Report, RunOptions, Totals};
pub use scalar::Scalar;
pub use value::ValueType;

pub type Value = value::Value<f64>;
pub type VariableSpec = appmodel::VariableSpec<f64>;
pub type ComponentState = appmodel::ComponentState<f64>;
pub type HandlerModel = appmodel::HandlerModel<f64>;
pub type Behavior = appmodel::Behavior<f64>;
pub type Bundle = snapshot::Bundle<f64>;
pub type EncodedValue = snapshot::EncodedValue<f64>;
pub type Snapshot = snapshot::Snapshot<f64>;
pub type SaveAction = healer::SaveAction<f64>;
pub type Healer = healer::Healer<f64>;
pub type Scenario = scenario::Scenario<f64>;
pub type RunResult = runner::RunResult<f64>;

/// Single-precision variants.
pub mod f32 {
    pub type Value = crate::value::Value<f32>;
    pub type VariableSpec = crate::appmodel::VariableSpec<f32>;
    pub type ComponentState = crate::appmodel::ComponentState<f32>;
    pub type HandlerModel = crate::appmodel::HandlerModel<f32>;
    pub type Snapshot = crate::snapshot::Snapshot<f32>;
    pub type Scenario = crate::scenario::Scenario<f32>;
    pub type RunResult = crate::runner::RunResult<f32>;
}
