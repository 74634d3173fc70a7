//! Simulated components and the app-author save/restore handlers.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::abstraction::default_value;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::snapshot::{decode, Bundle};
use crate::value::{Value, ValueType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    /// Field of the component; only app handlers carry it across recreation.
    Member,
    /// GUI state; saved and restored by the framework default.
    View,
}

#[derive(Debug, Clone)]
pub struct VariableSpec<F> {
    pub name: String,
    pub kind: VarKind,
    pub ty: ValueType,
    pub initial: Value<F>,
}

impl<F: Scalar> VariableSpec<F> {
    pub fn member(name: impl Into<String>, ty: ValueType, initial: Value<F>) -> Self {
        VariableSpec {
            name: name.into(),
            kind: VarKind::Member,
            ty,
            initial,
        }
    }

    pub fn view(name: impl Into<String>, ty: ValueType, initial: Value<F>) -> Self {
        VariableSpec {
            name: name.into(),
            kind: VarKind::View,
            ty,
            initial,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Variable<F> {
    spec: VariableSpec<F>,
    value: Value<F>,
}

impl<F> Variable<F> {
    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn kind(&self) -> VarKind {
        self.spec.kind
    }

    pub fn spec(&self) -> &VariableSpec<F> {
        &self.spec
    }

    pub fn value(&self) -> &Value<F> {
        &self.value
    }
}

/// Concrete state of one component.
///
/// Variables are kept in tracking order: members in declaration order, then
/// views in declaration order. The order never changes after instantiation.
#[derive(Debug, Clone)]
pub struct ComponentState<F> {
    name: String,
    vars: Vec<Variable<F>>,
}

impl<F: Scalar> ComponentState<F> {
    /// Builds a component with every variable at its initial value.
    pub fn instantiate(name: impl Into<String>, specs: Vec<VariableSpec<F>>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::Scenario("component name is empty".into()));
        }
        let mut seen = HashSet::new();
        for spec in &specs {
            if spec.name.is_empty() {
                return Err(Error::InvalidVariable {
                    name: String::new(),
                    reason: format!("empty variable name in `{name}`"),
                });
            }
            if !seen.insert(spec.name.as_str()) {
                return Err(Error::DuplicateVariable(spec.name.clone()));
            }
            spec.initial
                .check(spec.ty)
                .map_err(|reason| Error::TypeMismatch {
                    name: spec.name.clone(),
                    reason,
                })?;
        }
        let (members, views): (Vec<_>, Vec<_>) =
            specs.into_iter().partition(|s| s.kind == VarKind::Member);
        let vars = members
            .into_iter()
            .chain(views)
            .map(|spec| Variable {
                value: spec.initial.clone(),
                spec,
            })
            .collect();
        Ok(ComponentState { name, vars })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// Variables in tracking order.
    pub fn variables(&self) -> impl Iterator<Item = &Variable<F>> {
        self.vars.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.vars.iter().map(Variable::name)
    }

    pub fn members(&self) -> impl Iterator<Item = &Variable<F>> {
        self.vars.iter().filter(|v| v.kind() == VarKind::Member)
    }

    pub fn views(&self) -> impl Iterator<Item = &Variable<F>> {
        self.vars.iter().filter(|v| v.kind() == VarKind::View)
    }

    pub fn variable(&self, name: &str) -> Option<&Variable<F>> {
        self.vars.iter().find(|v| v.name() == name)
    }

    pub fn get(&self, name: &str) -> Option<&Value<F>> {
        self.variable(name).map(Variable::value)
    }

    /// Assigns a well-typed value.
    pub fn set(&mut self, name: &str, value: Value<F>) -> Result<()> {
        let component = &self.name;
        let var = self
            .vars
            .iter_mut()
            .find(|v| v.spec.name == name)
            .ok_or_else(|| Error::UnknownVariable {
                component: component.clone(),
                name: name.to_owned(),
            })?;
        value
            .check(var.spec.ty)
            .map_err(|reason| Error::TypeMismatch {
                name: name.to_owned(),
                reason,
            })?;
        var.value = value;
        Ok(())
    }

    /// Assigns the decoded bundle entry for `name`.
    pub(crate) fn assign_from(&mut self, name: &str, bundle: &Bundle<F>) -> Result<()> {
        let Some(encoded) = bundle.get(name) else {
            return Ok(());
        };
        let ty = self
            .variable(name)
            .map(|v| v.spec.ty)
            .ok_or_else(|| Error::UnknownVariable {
                component: self.name.clone(),
                name: name.to_owned(),
            })?;
        let value = decode(encoded, ty).map_err(|reason| Error::Decode {
            name: name.to_owned(),
            reason,
        })?;
        self.set(name, value)
    }

    /// Same component with every variable at its type default.
    pub fn with_defaults(&self) -> Self {
        ComponentState {
            name: self.name.clone(),
            vars: self
                .vars
                .iter()
                .map(|v| Variable {
                    spec: v.spec.clone(),
                    value: default_value(v.spec.ty),
                })
                .collect(),
        }
    }
}

pub fn instantiate_component<F: Scalar>(
    specs: Vec<VariableSpec<F>>,
    name: &str,
) -> Result<ComponentState<F>> {
    ComponentState::instantiate(name, specs)
}

/// What one handler callback does with member state.
#[derive(Debug, Clone)]
pub enum Behavior<F> {
    /// Handles every member variable.
    Correct,
    /// Not implemented; only the framework default runs.
    Missing,
    /// Handles only the named members.
    Partial(BTreeSet<String>),
    /// Restores the named variables with fixed wrong values. Other bundled
    /// members are restored normally. On save it behaves like `Partial`
    /// over the named members.
    Stale(BTreeMap<String, Value<F>>),
}

impl<F> Behavior<F> {
    pub fn label(&self) -> &'static str {
        match self {
            Behavior::Correct => "correct",
            Behavior::Missing => "missing",
            Behavior::Partial(_) => "partial",
            Behavior::Stale(_) => "stale",
        }
    }
}

#[derive(Debug, Clone)]
pub struct HandlerModel<F> {
    pub save: Behavior<F>,
    pub restore: Behavior<F>,
}

impl<F: Scalar> HandlerModel<F> {
    pub fn correct() -> Self {
        HandlerModel {
            save: Behavior::Correct,
            restore: Behavior::Correct,
        }
    }

    pub fn missing() -> Self {
        HandlerModel {
            save: Behavior::Missing,
            restore: Behavior::Missing,
        }
    }

    /// Checks the names a handler refers to against the component.
    ///
    /// `Partial` may only name members. `Stale` may also name views, which
    /// models restore code that overwrites a view from stale data after the
    /// framework has restored it.
    pub fn validate(&self, c: &ComponentState<F>) -> Result<()> {
        for behavior in [&self.save, &self.restore] {
            let invalid = |reason: String| Error::InvalidHandler {
                component: c.name().to_owned(),
                reason,
            };
            match behavior {
                Behavior::Correct | Behavior::Missing => {}
                Behavior::Partial(names) => {
                    for name in names {
                        match c.variable(name) {
                            Some(v) if v.kind() == VarKind::Member => {}
                            Some(_) => return Err(invalid(format!("`{name}` is a view"))),
                            None => return Err(invalid(format!("unknown variable `{name}`"))),
                        }
                    }
                }
                Behavior::Stale(values) => {
                    for (name, value) in values {
                        let var = c
                            .variable(name)
                            .ok_or_else(|| invalid(format!("unknown variable `{name}`")))?;
                        value
                            .check(var.spec().ty)
                            .map_err(|e| invalid(format!("stale value for `{name}`: {e}")))?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// App-author save callback: extends `bundle` per the save behavior.
pub fn handler_save<F: Scalar>(
    c: &ComponentState<F>,
    h: &HandlerModel<F>,
    mut bundle: Bundle<F>,
) -> Bundle<F> {
    let listed = |name: &str| match &h.save {
        Behavior::Correct => true,
        Behavior::Missing => false,
        Behavior::Partial(names) => names.contains(name),
        Behavior::Stale(values) => values.contains_key(name),
    };
    for var in c.members().filter(|v| listed(v.name())) {
        bundle.put(var.name(), var.value());
    }
    bundle
}

/// App-author restore callback on a freshly recreated component.
pub fn handler_restore<F: Scalar>(
    mut c: ComponentState<F>,
    h: &HandlerModel<F>,
    bundle: &Bundle<F>,
) -> Result<ComponentState<F>> {
    let members: Vec<String> = c.members().map(|v| v.name().to_owned()).collect();
    match &h.restore {
        Behavior::Missing => {}
        Behavior::Correct => {
            for name in &members {
                c.assign_from(name, bundle)?;
            }
        }
        Behavior::Partial(names) => {
            for name in members.iter().filter(|n| names.contains(*n)) {
                c.assign_from(name, bundle)?;
            }
        }
        Behavior::Stale(values) => {
            for name in members.iter().filter(|n| !values.contains_key(*n)) {
                c.assign_from(name, bundle)?;
            }
            for (name, value) in values {
                c.set(name, value.clone())?;
            }
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::snapshot::{deep_equal, EncodedValue};

    type V = Value<f64>;

    fn names(list: &[&str]) -> BTreeSet<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    fn specs() -> Vec<VariableSpec<f64>> {
        vec![
            VariableSpec::view("title", ValueType::Text, V::text("hello")),
            VariableSpec::member("count", ValueType::Int, V::Int(5)),
            VariableSpec::member("flag", ValueType::Bool, V::Bool(true)),
            VariableSpec::view("zoom", ValueType::Float, V::Float(1.5)),
            VariableSpec::member("obj", ValueType::Object, V::object([("a", V::Int(1))])),
        ]
    }

    #[test]
    fn fixture_has_nine_variables_at_initial_values() {
        let (c, _) = fixtures::note_activity();
        assert_eq!(c.len(), 9);
        let initials = fixtures::note_activity_specs();
        for spec in &initials {
            assert_eq!(
                deep_equal(c.get(&spec.name).unwrap(), &spec.initial),
                Ok(true)
            );
        }
    }

    #[test]
    fn empty_spec_list() {
        let c = instantiate_component::<f64>(Vec::new(), "Empty").unwrap();
        assert!(c.is_empty());
    }

    #[test]
    fn duplicate_name_is_rejected() {
        let specs = vec![
            VariableSpec::member("note", ValueType::Int, V::Int(1)),
            VariableSpec::view("note", ValueType::Text, V::text("x")),
        ];
        match instantiate_component(specs, "A") {
            Err(Error::DuplicateVariable(name)) => assert_eq!(name, "note"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ill_typed_initial_is_rejected() {
        let specs = vec![VariableSpec::member("n", ValueType::Int, V::text("1"))];
        assert!(matches!(
            instantiate_component(specs, "A"),
            Err(Error::TypeMismatch { .. })
        ));
    }

    #[test]
    fn members_come_before_views() {
        let c = instantiate_component(specs(), "A").unwrap();
        let order: Vec<&str> = c.names().collect();
        assert_eq!(order, ["count", "flag", "obj", "title", "zoom"]);
    }

    #[test]
    fn set_checks_types() {
        let mut c = instantiate_component(specs(), "A").unwrap();
        assert!(c.set("count", V::Bool(true)).is_err());
        assert!(c.set("ghost", V::Int(1)).is_err());
        c.set("obj", V::Null).unwrap();
        assert!(matches!(c.get("obj"), Some(Value::Null)));
    }

    #[test]
    fn missing_save_adds_nothing() {
        let c = instantiate_component(specs(), "A").unwrap();
        assert!(handler_save(&c, &HandlerModel::missing(), Bundle::new()).is_empty());
    }

    #[test]
    fn correct_save_adds_every_member() {
        let (c, _) = fixtures::note_activity();
        let b = handler_save(&c, &HandlerModel::correct(), Bundle::new());
        let expected: BTreeSet<String> = fixtures::note_activity_specs()
            .iter()
            .filter(|s| s.kind == VarKind::Member)
            .map(|s| s.name.clone())
            .collect();
        assert_eq!(
            b.keys().map(str::to_owned).collect::<BTreeSet<_>>(),
            expected
        );
    }

    #[test]
    fn partial_save_adds_listed_members() {
        let (c, _) = fixtures::note_activity();
        let h = HandlerModel {
            save: Behavior::Partial(names(&["notePosition"])),
            restore: Behavior::Correct,
        };
        let b = handler_save(&c, &h, Bundle::new());
        assert_eq!(b.keys().collect::<Vec<_>>(), ["notePosition"]);
    }

    #[test]
    fn save_extends_framework_bundle() {
        let c = instantiate_component(specs(), "A").unwrap();
        let mut framework = Bundle::new();
        framework.put("title", c.get("title").unwrap());
        let b = handler_save(&c, &HandlerModel::correct(), framework);
        assert_eq!(b.len(), 4);
    }

    #[test]
    fn missing_restore_leaves_state() {
        let c = instantiate_component(specs(), "A").unwrap();
        let fresh = c.with_defaults();
        let b = handler_save(&c, &HandlerModel::correct(), Bundle::new());
        let out = handler_restore(fresh.clone(), &HandlerModel::missing(), &b).unwrap();
        for (x, y) in out.variables().zip(fresh.variables()) {
            assert_eq!(deep_equal(x.value(), y.value()), Ok(true));
        }
    }

    #[test]
    fn correct_restore_round_trips_members() {
        let c = instantiate_component(specs(), "A").unwrap();
        let b = handler_save(&c, &HandlerModel::correct(), Bundle::new());
        let out = handler_restore(c.with_defaults(), &HandlerModel::correct(), &b).unwrap();
        for var in c.members() {
            assert_eq!(
                deep_equal(out.get(var.name()).unwrap(), var.value()),
                Ok(true)
            );
        }
    }

    #[test]
    fn partial_restore_assigns_only_listed() {
        let c = instantiate_component(specs(), "A").unwrap();
        let b = handler_save(&c, &HandlerModel::correct(), Bundle::new());
        let h = HandlerModel {
            save: Behavior::Correct,
            restore: Behavior::Partial(names(&["flag"])),
        };
        let out = handler_restore(c.with_defaults(), &h, &b).unwrap();
        assert!(matches!(out.get("flag"), Some(Value::Bool(true))));
        assert!(matches!(out.get("count"), Some(Value::Int(0))));
        assert!(matches!(out.get("obj"), Some(Value::Null)));
    }

    #[test]
    fn fixture_stale_restore() {
        let (c, h) = fixtures::note_activity();
        let b = handler_save(&c, &h, Bundle::new());
        let out = handler_restore(c.with_defaults(), &h, &b).unwrap();
        let Behavior::Stale(stale) = &h.restore else {
            panic!("fixture is stale")
        };
        assert_eq!(
            stale.keys().cloned().collect::<BTreeSet<_>>(),
            names(&["mSubtitleTextView", "noteContent", "note"])
        );
        for (name, value) in stale {
            assert_eq!(deep_equal(out.get(name).unwrap(), value), Ok(true));
        }
        // Remaining views are still at their defaults: the framework restore is not part of this call.
        assert!(matches!(out.get("mTitleTextView"), Some(Value::Text(t)) if t.is_empty()));
        for var in c.members().filter(|v| !stale.contains_key(v.name())) {
            assert_eq!(
                deep_equal(out.get(var.name()).unwrap(), var.value()),
                Ok(true)
            );
        }
    }

    #[test]
    fn restore_rejects_ill_typed_bundle() {
        let c = instantiate_component(specs(), "A").unwrap();
        let mut b = Bundle::new();
        b.put("count", &V::text("five"));
        match handler_restore(c.with_defaults(), &HandlerModel::correct(), &b) {
            Err(Error::Decode { name, .. }) => assert_eq!(name, "count"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(b.get("count"), Some(EncodedValue::Text(_))));
    }

    #[test]
    fn handler_validation() {
        let c = instantiate_component(specs(), "A").unwrap();
        let partial_view = HandlerModel {
            save: Behavior::Partial(names(&["title"])),
            restore: Behavior::Correct,
        };
        assert!(partial_view.validate(&c).is_err());
        let stale_unknown = HandlerModel {
            save: Behavior::Correct,
            restore: Behavior::Stale([("ghost".to_string(), V::Int(1))].into()),
        };
        assert!(stale_unknown.validate(&c).is_err());
        let stale_ill_typed = HandlerModel {
            save: Behavior::Correct,
            restore: Behavior::Stale([("count".to_string(), V::text("x"))].into()),
        };
        assert!(stale_ill_typed.validate(&c).is_err());
        let stale_view = HandlerModel {
            save: Behavior::Correct,
            restore: Behavior::Stale([("title".to_string(), V::text("old"))].into()),
        };
        assert!(stale_view.validate(&c).is_ok());
    }

    #[test]
    fn handlers_are_deterministic() {
        let (c, h) = fixtures::note_activity();
        let a = handler_save(&c, &h, Bundle::new());
        let b = handler_save(&c, &h, Bundle::new());
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}
