//! Declarative scenarios: components, their handlers, and an event script.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::abstraction::default_value;
use crate::appmodel::{Behavior, ComponentState, HandlerModel, VarKind, VariableSpec};
use crate::error::{Error, Result};
use crate::lifecycle::EventKind;
use crate::scalar::Scalar;
use crate::value::{Value, ValueType};

#[derive(Debug, Clone)]
pub struct ComponentDef<F> {
    pub name: String,
    /// Declaration order, as written in the scenario.
    pub variables: Vec<VariableSpec<F>>,
    pub handler: HandlerModel<F>,
}

impl<F: Scalar> ComponentDef<F> {
    pub fn instantiate(&self) -> Result<ComponentState<F>> {
        ComponentState::instantiate(self.name.clone(), self.variables.clone())
    }
}

/// One stop-start event, preceded by variable assignments.
#[derive(Debug, Clone)]
pub struct Step<F> {
    pub component: String,
    pub kind: EventKind,
    pub mutations: Vec<(String, Value<F>)>,
}

#[derive(Debug, Clone)]
pub struct Scenario<F> {
    pub name: String,
    pub components: Vec<ComponentDef<F>>,
    pub script: Vec<Step<F>>,
}

impl<F: Scalar> Scenario<F> {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ScenarioFile =
            serde_json::from_str(&text).map_err(|e| Error::parse(Some(path), &e))?;
        Self::from_file(file)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| Error::parse(None, &e))?;
        Self::from_file(file)
    }

    pub fn component(&self, name: &str) -> Option<&ComponentDef<F>> {
        self.components.iter().find(|c| c.name == name)
    }

    /// Checks every cross reference and type in the scenario.
    pub fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        for def in &self.components {
            if !names.insert(def.name.as_str()) {
                return Err(Error::Scenario(format!(
                    "duplicate component `{}`",
                    def.name
                )));
            }
            let state = def.instantiate()?;
            def.handler.validate(&state)?;
        }
        for (i, step) in self.script.iter().enumerate() {
            let def = self.component(&step.component).ok_or_else(|| {
                Error::Scenario(format!(
                    "script step {} refers to unknown component `{}`",
                    i + 1,
                    step.component
                ))
            })?;
            for (name, value) in &step.mutations {
                let spec = def
                    .variables
                    .iter()
                    .find(|v| &v.name == name)
                    .ok_or_else(|| {
                        Error::Scenario(format!(
                            "script step {} mutates unknown variable `{}.{name}`",
                            i + 1,
                            def.name
                        ))
                    })?;
                value.check(spec.ty).map_err(|reason| Error::TypeMismatch {
                    name: format!("{}.{name}", def.name),
                    reason,
                })?;
            }
        }
        Ok(())
    }

    /// Splits the script after `at` steps. The second scenario starts from
    /// the initial values with the first part's mutations applied.
    pub fn split_at(&self, at: usize) -> (Self, Self) {
        let at = at.min(self.script.len());
        let mut second = self.clone();
        for step in &self.script[..at] {
            let Some(def) = second
                .components
                .iter_mut()
                .find(|c| c.name == step.component)
            else {
                continue;
            };
            for (name, value) in &step.mutations {
                if let Some(spec) = def.variables.iter_mut().find(|v| &v.name == name) {
                    spec.initial = value.clone();
                }
            }
        }
        second.script = self.script[at..].to_vec();
        let mut first = self.clone();
        first.script.truncate(at);
        (first, second)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self.to_file()).expect("scenario is plain data")
    }

    /// Pretty JSON with sorted keys.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(&self.to_json()).expect("scenario is plain data");
        bytes.push(b'\n');
        bytes
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    fn from_file(file: ScenarioFile) -> Result<Self> {
        let mut components = Vec::with_capacity(file.components.len());
        for comp in file.components {
            let mut variables = Vec::with_capacity(comp.variables.len());
            for var in comp.variables {
                let initial = match &var.initial {
                    None => default_value(var.ty),
                    Some(json) => {
                        Value::from_json(json, var.ty).map_err(|reason| Error::TypeMismatch {
                            name: format!("{}.{}", comp.name, var.name),
                            reason,
                        })?
                    }
                };
                variables.push(VariableSpec {
                    name: var.name,
                    kind: var.kind,
                    ty: var.ty,
                    initial,
                });
            }
            let types: BTreeMap<&str, ValueType> =
                variables.iter().map(|v| (v.name.as_str(), v.ty)).collect();
            let handler = HandlerModel {
                save: behavior_from_file(&comp.name, comp.handler.save, &types)?,
                restore: behavior_from_file(&comp.name, comp.handler.restore, &types)?,
            };
            components.push(ComponentDef {
                name: comp.name,
                variables,
                handler,
            });
        }

        let mut script = Vec::with_capacity(file.script.len());
        for (i, step) in file.script.into_iter().enumerate() {
            let def = components
                .iter()
                .find(|c| c.name == step.component)
                .ok_or_else(|| {
                    Error::Scenario(format!(
                        "script step {} refers to unknown component `{}`",
                        i + 1,
                        step.component
                    ))
                })?;
            let mut mutations = Vec::with_capacity(step.mutations.len());
            for (name, json) in step.mutations {
                let spec = def
                    .variables
                    .iter()
                    .find(|v| v.name == name)
                    .ok_or_else(|| {
                        Error::Scenario(format!(
                            "script step {} mutates unknown variable `{}.{name}`",
                            i + 1,
                            def.name
                        ))
                    })?;
                let value =
                    Value::from_json(&json, spec.ty).map_err(|reason| Error::TypeMismatch {
                        name: format!("{}.{name}", def.name),
                        reason,
                    })?;
                mutations.push((name, value));
            }
            script.push(Step {
                component: step.component,
                kind: step.event,
                mutations,
            });
        }

        let scenario = Scenario {
            name: file.name,
            components,
            script,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    fn to_file(&self) -> ScenarioFile {
        ScenarioFile {
            name: self.name.clone(),
            components: self
                .components
                .iter()
                .map(|def| ComponentFile {
                    name: def.name.clone(),
                    variables: def
                        .variables
                        .iter()
                        .map(|v| VariableFile {
                            name: v.name.clone(),
                            kind: v.kind,
                            ty: v.ty,
                            initial: Some(v.initial.to_json()),
                        })
                        .collect(),
                    handler: HandlerFile {
                        save: behavior_to_file(&def.handler.save),
                        restore: behavior_to_file(&def.handler.restore),
                    },
                })
                .collect(),
            script: self
                .script
                .iter()
                .map(|step| StepFile {
                    component: step.component.clone(),
                    event: step.kind,
                    mutations: step
                        .mutations
                        .iter()
                        .map(|(name, value)| (name.clone(), value.to_json()))
                        .collect(),
                })
                .collect(),
        }
    }
}

fn behavior_from_file<F: Scalar>(
    component: &str,
    behavior: BehaviorFile,
    types: &BTreeMap<&str, ValueType>,
) -> Result<Behavior<F>> {
    Ok(match behavior {
        BehaviorFile::Correct => Behavior::Correct,
        BehaviorFile::Missing => Behavior::Missing,
        BehaviorFile::Partial(names) => Behavior::Partial(names.into_iter().collect()),
        BehaviorFile::Stale(values) => {
            let mut stale = BTreeMap::new();
            for (name, json) in values {
                let ty = types
                    .get(name.as_str())
                    .ok_or_else(|| Error::InvalidHandler {
                        component: component.to_owned(),
                        reason: format!("unknown variable `{name}`"),
                    })?;
                let value =
                    Value::from_json(&json, *ty).map_err(|reason| Error::InvalidHandler {
                        component: component.to_owned(),
                        reason: format!("stale value for `{name}`: {reason}"),
                    })?;
                stale.insert(name, value);
            }
            Behavior::Stale(stale)
        }
    })
}

fn behavior_to_file<F: Scalar>(behavior: &Behavior<F>) -> BehaviorFile {
    match behavior {
        Behavior::Correct => BehaviorFile::Correct,
        Behavior::Missing => BehaviorFile::Missing,
        Behavior::Partial(names) => BehaviorFile::Partial(names.iter().cloned().collect()),
        Behavior::Stale(values) => BehaviorFile::Stale(
            values
                .iter()
                .map(|(name, value)| (name.clone(), value.to_json()))
                .collect(),
        ),
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    name: String,
    components: Vec<ComponentFile>,
    #[serde(default)]
    script: Vec<StepFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentFile {
    name: String,
    variables: Vec<VariableFile>,
    #[serde(default)]
    handler: HandlerFile,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariableFile {
    name: String,
    kind: VarKind,
    #[serde(rename = "type")]
    ty: ValueType,
    #[serde(default)]
    initial: Option<serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HandlerFile {
    save: BehaviorFile,
    restore: BehaviorFile,
}

impl Default for HandlerFile {
    fn default() -> Self {
        HandlerFile {
            save: BehaviorFile::Correct,
            restore: BehaviorFile::Correct,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum BehaviorFile {
    Correct,
    Missing,
    Partial(BTreeSet<String>),
    Stale(BTreeMap<String, serde_json::Value>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepFile {
    component: String,
    event: EventKind,
    #[serde(default)]
    mutations: BTreeMap<String, serde_json::Value>,
}
