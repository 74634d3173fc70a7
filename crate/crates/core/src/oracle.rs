//! Ground truth for data loss and a seeded scenario generator.
//!
//! The ground truth runs an event with no hooks installed and compares every
//! variable before and after. The comparison here is written independently
//! of the snapshot codec so it can check the healer's detection path.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::appmodel::{Behavior, ComponentState, HandlerModel, VarKind, VariableSpec};
use crate::error::Result;
use crate::lifecycle::{dispatch_stop_start, EventKind, NoHooks, StopStartEvent};
use crate::scalar::Scalar;
use crate::scenario::{ComponentDef, Scenario, Step};
use crate::value::{Fields, Value, ValueType};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    pub event_index: u64,
    pub lost: BTreeSet<String>,
}

pub fn oracle_lost_vars<F: Scalar>(
    c: &ComponentState<F>,
    h: &HandlerModel<F>,
    e: &StopStartEvent,
) -> Result<GroundTruth> {
    let after = dispatch_stop_start(c, h, &mut NoHooks, e)?;
    Ok(GroundTruth {
        event_index: e.sequence_index,
        lost: changed_vars(c, &after),
    })
}

/// Names whose value in `after` differs from `before`.
pub fn changed_vars<F: Scalar>(
    before: &ComponentState<F>,
    after: &ComponentState<F>,
) -> BTreeSet<String> {
    before
        .variables()
        .filter(|v| {
            !after
                .get(v.name())
                .is_some_and(|other| same_value(v.value(), other))
        })
        .map(|v| v.name().to_owned())
        .collect()
}

fn same_value<F: Scalar>(a: &Value<F>, b: &Value<F>) -> bool {
    match (a, b) {
        (Value::Null, Value::Null) => true,
        (Value::Int(x), Value::Int(y)) => x == y,
        (Value::Bool(x), Value::Bool(y)) => x == y,
        (Value::Float(x), Value::Float(y)) => x.to_bits_u64() == y.to_bits_u64(),
        (Value::Text(x), Value::Text(y)) => x == y,
        (Value::Object(x), Value::Object(y)) => {
            let mut xs: Vec<_> = x.iter().collect();
            let mut ys: Vec<_> = y.iter().collect();
            xs.sort_by(|p, q| p.0.cmp(q.0));
            ys.sort_by(|p, q| p.0.cmp(q.0));
            xs.len() == ys.len()
                && xs
                    .iter()
                    .zip(&ys)
                    .all(|((kx, vx), (ky, vy))| kx == ky && same_value(vx, vy))
        }
        _ => false,
    }
}

/// Size bounds for generated scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_components: usize,
    pub max_variables: usize,
    pub max_events: usize,
    /// Adds a component whose loss depends on the concrete value, which the
    /// abstraction cannot distinguish.
    pub adversarial: bool,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_components: 3,
            max_variables: 6,
            max_events: 4,
            adversarial: false,
        }
    }
}

/// Deterministic in `seed`.
///
/// Unless `limits.adversarial` is set, every handler's effect depends only on
/// which variables are non-default: stale values are drawn from a pool that
/// ordinary values never take, so a stale restore always loses the value.
pub fn generate_scenario<F: Scalar>(seed: u64, limits: &Limits) -> Scenario<F> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if limits.adversarial {
        return adversarial_scenario(&mut rng, limits);
    }
    let n_components = rng.gen_range(1..=limits.max_components.max(1));
    let components: Vec<ComponentDef<F>> = (0..n_components)
        .map(|i| random_component(&mut rng, format!("C{i}"), limits.max_variables.max(1)))
        .collect();
    let n_events = rng.gen_range(1..=limits.max_events.max(1));
    let script = (0..n_events)
        .map(|_| {
            let def = components.choose(&mut rng).expect("at least one component");
            random_step(&mut rng, def)
        })
        .collect();
    Scenario {
        name: format!("generated-{seed}"),
        components,
        script,
    }
}

fn random_component<F: Scalar>(
    rng: &mut ChaCha8Rng,
    name: String,
    max_vars: usize,
) -> ComponentDef<F> {
    let n = rng.gen_range(1..=max_vars);
    let variables: Vec<VariableSpec<F>> = (0..n)
        .map(|j| {
            let ty = *ValueType::ALL.choose(rng).expect("non-empty");
            let kind = if rng.gen_bool(0.6) {
                VarKind::Member
            } else {
                VarKind::View
            };
            VariableSpec {
                name: format!("v{j}"),
                kind,
                ty,
                initial: ordinary_value(rng, ty),
            }
        })
        .collect();
    let handler = HandlerModel {
        save: random_behavior(rng, &variables),
        restore: random_behavior(rng, &variables),
    };
    ComponentDef {
        name,
        variables,
        handler,
    }
}

fn random_behavior<F: Scalar>(rng: &mut ChaCha8Rng, vars: &[VariableSpec<F>]) -> Behavior<F> {
    match rng.gen_range(0..4) {
        0 => Behavior::Correct,
        1 => Behavior::Missing,
        2 => Behavior::Partial(
            vars.iter()
                .filter(|v| v.kind == VarKind::Member && rng.gen_bool(0.5))
                .map(|v| v.name.clone())
                .collect(),
        ),
        _ => {
            let mut stale = BTreeMap::new();
            // A bool has no value outside the ordinary pool.
            for v in vars.iter().filter(|v| v.ty != ValueType::Bool) {
                if rng.gen_bool(0.4) {
                    stale.insert(v.name.clone(), stale_value(rng, v.ty));
                }
            }
            Behavior::Stale(stale)
        }
    }
}

fn random_step<F: Scalar>(rng: &mut ChaCha8Rng, def: &ComponentDef<F>) -> Step<F> {
    let mut mutations = BTreeMap::new();
    if rng.gen_bool(0.5) {
        for _ in 0..rng.gen_range(1..=2) {
            let spec = def.variables.choose(rng).expect("non-empty component");
            mutations.insert(spec.name.clone(), ordinary_value(rng, spec.ty));
        }
    }
    Step {
        component: def.name.clone(),
        kind: random_kind(rng),
        mutations: mutations.into_iter().collect(),
    }
}

fn random_kind(rng: &mut ChaCha8Rng) -> EventKind {
    *[
        EventKind::Rotation,
        EventKind::ContextSwitch,
        EventKind::ProcessKill,
    ]
    .choose(rng)
    .expect("non-empty")
}

/// Ordinary values: defaults about a third of the time, otherwise small
/// non-negative numbers, plain words, and trees without a `stale` field.
fn ordinary_value<F: Scalar>(rng: &mut ChaCha8Rng, ty: ValueType) -> Value<F> {
    let default = rng.gen_bool(0.3);
    match ty {
        ValueType::Int if default => Value::Int(0),
        ValueType::Int => Value::Int(rng.gen_range(1..=9)),
        ValueType::Bool => Value::Bool(!default && rng.gen_bool(0.8)),
        ValueType::Float if default => Value::Float(F::zero()),
        ValueType::Float => Value::Float(F::from_wide(f64::from(rng.gen_range(1..=8)) * 0.25)),
        ValueType::Text if default => Value::Text(String::new()),
        ValueType::Text => Value::text(
            *["alpha", "beta", "gamma", "delta"]
                .choose(rng)
                .expect("non-empty"),
        ),
        ValueType::Object if default => Value::Null,
        ValueType::Object => random_tree(rng, 2),
    }
}

fn random_tree<F: Scalar>(rng: &mut ChaCha8Rng, depth: u32) -> Value<F> {
    let mut fields = Fields::new();
    let n = rng.gen_range(0..=3);
    for i in 0..n {
        let name = format!("f{i}");
        let leaf = match rng.gen_range(0..5) {
            0 => Value::Int(rng.gen_range(-5..=5)),
            1 => Value::Bool(rng.gen_bool(0.5)),
            2 => Value::Float(F::from_wide(f64::from(rng.gen_range(-8..=8)) * 0.5)),
            3 => Value::text(*["x", "y", "", "note"].choose(rng).expect("non-empty")),
            _ if depth > 0 => random_tree(rng, depth - 1),
            _ => Value::Int(0),
        };
        fields.insert(name, leaf);
    }
    Value::Object(fields)
}

/// Values that ordinary generation never produces, none of them defaults.
fn stale_value<F: Scalar>(rng: &mut ChaCha8Rng, ty: ValueType) -> Value<F> {
    let k = rng.gen_range(1..=9);
    match ty {
        ValueType::Int => Value::Int(-k),
        ValueType::Float => Value::Float(F::from_wide(-f64::from(k as i32) * 0.25)),
        ValueType::Text => Value::text(format!("stale-{k}")),
        ValueType::Object => Value::object([("stale", Value::Int(k))]),
        ValueType::Bool => Value::Bool(true),
    }
}

/// A component whose restore handler always writes back the counter's
/// initial value. The first event therefore looks lossless and is learned
/// safe; the script then moves the counter to another non-default value
/// (same abstract state) and the next event loses it unnoticed.
fn adversarial_scenario<F: Scalar>(rng: &mut ChaCha8Rng, limits: &Limits) -> Scenario<F> {
    let start = rng.gen_range(1..=9i64);
    let moved = start % 9 + 1;
    let mut variables = vec![VariableSpec::member(
        "counter",
        ValueType::Int,
        Value::Int(start),
    )];
    let extra = rng.gen_range(0..limits.max_variables.max(1));
    for j in 0..extra {
        let ty = *ValueType::ALL.choose(rng).expect("non-empty");
        variables.push(VariableSpec::view(
            format!("v{j}"),
            ty,
            ordinary_value(rng, ty),
        ));
    }
    let handler = HandlerModel {
        save: Behavior::Correct,
        restore: Behavior::Stale([("counter".to_string(), Value::Int(start))].into()),
    };
    let def = ComponentDef {
        name: "Adversarial".to_string(),
        variables,
        handler,
    };
    let mut script = vec![
        Step {
            component: def.name.clone(),
            kind: random_kind(rng),
            mutations: Vec::new(),
        },
        Step {
            component: def.name.clone(),
            kind: random_kind(rng),
            mutations: vec![("counter".to_string(), Value::Int(moved))],
        },
    ];
    for _ in 2..limits.max_events {
        script.push(random_step(rng, &def));
    }
    Scenario {
        name: "adversarial".to_string(),
        components: vec![def],
        script,
    }
}
