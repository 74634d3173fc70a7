//! The bundled note-editing scenario: a `NoteActivity` whose restore handler
//! brings back an outdated date, note body, and note object after rotation.

use crate::appmodel::{ComponentState, HandlerModel, VariableSpec};
use crate::scalar::Scalar;
use crate::scenario::Scenario;

pub const OWNCLOUD_NOTES_JSON: &str = include_str!("../fixtures/owncloud_notes.json");

pub fn owncloud_notes<F: Scalar>() -> Scenario<F> {
    Scenario::from_json_str(OWNCLOUD_NOTES_JSON).expect("bundled fixture is valid")
}

/// Variable specs of `NoteActivity` in declaration order.
pub fn note_activity_specs() -> Vec<VariableSpec<f64>> {
    owncloud_notes::<f64>().components.remove(0).variables
}

/// `NoteActivity` at its initial values together with its faulty handler.
pub fn note_activity() -> (ComponentState<f64>, HandlerModel<f64>) {
    let def = owncloud_notes::<f64>().components.remove(0);
    (
        def.instantiate().expect("bundled fixture is valid"),
        def.handler,
    )
}
