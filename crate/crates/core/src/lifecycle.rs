//! Stop-start event dispatch.
//!
//! One event runs, in order: the healer's pre-destroy hook, the framework
//! save of views, the app save handler, recreation with type defaults, the
//! framework restore of views, the app restore handler, and finally the
//! healer's post-recreate hook.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::appmodel::{handler_restore, handler_save, ComponentState, HandlerModel};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::snapshot::Bundle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Rotation,
    ContextSwitch,
    ProcessKill,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Rotation => "rotation",
            EventKind::ContextSwitch => "context_switch",
            EventKind::ProcessKill => "process_kill",
        })
    }
}

/// The kind is reporting metadata only; every kind destroys and recreates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopStartEvent {
    pub kind: EventKind,
    pub sequence_index: u64,
}

impl StopStartEvent {
    pub fn new(kind: EventKind, sequence_index: u64) -> Self {
        StopStartEvent {
            kind,
            sequence_index,
        }
    }
}

/// Interception points around a stop-start event.
pub trait LifecycleHooks<F> {
    /// Sees the state before any app code runs.
    fn pre_destroy(&mut self, c: &ComponentState<F>, event: &StopStartEvent) -> Result<()>;

    /// Receives the restored component and returns the one the app continues with.
    fn post_recreate(
        &mut self,
        c: ComponentState<F>,
        event: &StopStartEvent,
    ) -> Result<ComponentState<F>>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoHooks;

impl<F> LifecycleHooks<F> for NoHooks {
    fn pre_destroy(&mut self, _: &ComponentState<F>, _: &StopStartEvent) -> Result<()> {
        Ok(())
    }

    fn post_recreate(
        &mut self,
        c: ComponentState<F>,
        _: &StopStartEvent,
    ) -> Result<ComponentState<F>> {
        Ok(c)
    }
}

/// Destroyed-and-recreated component: same variables, type defaults.
pub fn recreate<F: Scalar>(c: &ComponentState<F>) -> ComponentState<F> {
    c.with_defaults()
}

pub fn dispatch_stop_start<F: Scalar, H: LifecycleHooks<F> + ?Sized>(
    c: &ComponentState<F>,
    handler: &HandlerModel<F>,
    hooks: &mut H,
    event: &StopStartEvent,
) -> Result<ComponentState<F>> {
    hooks.pre_destroy(c, event)?;

    let mut bundle = Bundle::new();
    for view in c.views() {
        bundle.put(view.name(), view.value());
    }
    let bundle = handler_save(c, handler, bundle);

    let mut fresh = recreate(c);
    let views: Vec<String> = fresh.views().map(|v| v.name().to_owned()).collect();
    for name in &views {
        fresh.assign_from(name, &bundle)?;
    }
    let restored = handler_restore(fresh, handler, &bundle)?;

    hooks.post_recreate(restored, event)
}
