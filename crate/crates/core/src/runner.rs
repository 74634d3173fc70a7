//! Executes a scenario's event script and builds the run report.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::abstraction::{abstract_state, AbstractState};
use crate::appmodel::ComponentState;
use crate::error::{Error, Result};
use crate::healer::{ActionLabel, ClassLabel, Healer, HealerMemory, MemoryUpdate};
use crate::lifecycle::{dispatch_stop_start, EventKind, LifecycleHooks, StopStartEvent};
use crate::oracle::{changed_vars, oracle_lost_vars};
use crate::scalar::Scalar;
use crate::scenario::Scenario;
use crate::snapshot::{diff, take_snapshot, Snapshot};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Install the healer. Without it the run only detects losses.
    pub healer: bool,
    /// Annotate every event with oracle ground truth.
    pub oracle_check: bool,
    /// Where per-event snapshot files are kept while an event is in flight.
    pub snapshot_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub event: u64,
    pub component: String,
    pub kind: EventKind,
    pub abstract_state: AbstractState,
    pub classification: Option<ClassLabel>,
    pub action: ActionLabel,
    pub bytes_serialized: usize,
    pub lost: BTreeSet<String>,
    pub healed: BTreeSet<String>,
    pub memory_update: Option<MemoryUpdate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_lost: Option<BTreeSet<String>>,
    /// Variables still differing from their pre-event value after the event.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub missed: Option<BTreeSet<String>>,
    /// Whether snapshot diffing found exactly the oracle's lost set; only
    /// present for events that ran a full diff.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection_matches_oracle: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub events: usize,
    pub full_snapshots: usize,
    pub selective_saves: usize,
    pub skips: usize,
    pub losses_detected: usize,
    pub losses_healed: usize,
    pub losses_missed: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub healer: bool,
    pub oracle_check: bool,
    pub events: Vec<EventRecord>,
    pub totals: Totals,
}

impl Report {
    fn new(scenario: &str, opts: &RunOptions, events: Vec<EventRecord>) -> Self {
        let mut totals = Totals {
            events: events.len(),
            ..Totals::default()
        };
        for rec in &events {
            match rec.action {
                ActionLabel::FullSnapshot => totals.full_snapshots += 1,
                ActionLabel::SelectiveSave => totals.selective_saves += 1,
                ActionLabel::Skip => totals.skips += 1,
                ActionLabel::None => {}
            }
            totals.losses_detected += rec.lost.len();
            totals.losses_healed += rec.healed.len();
        }
        if opts.oracle_check {
            totals.losses_missed = Some(
                events
                    .iter()
                    .map(|r| r.missed.as_ref().map_or(0, BTreeSet::len))
                    .sum(),
            );
        }
        Report {
            scenario: scenario.to_owned(),
            healer: opts.healer,
            oracle_check: opts.oracle_check,
            events,
            totals,
        }
    }

    /// Pretty JSON with sorted keys.
    pub fn to_bytes(&self) -> Vec<u8> {
        let value = serde_json::to_value(self).expect("report is plain data");
        let mut bytes = serde_json::to_vec_pretty(&value).expect("report is plain data");
        bytes.push(b'\n');
        bytes
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        serde_json::from_slice(bytes).map_err(|e| Error::parse(None, &e))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    /// True when every event that ran a full diff agreed with the oracle.
    pub fn detection_agrees(&self) -> bool {
        self.events
            .iter()
            .all(|r| r.detection_matches_oracle != Some(false))
    }
}

#[derive(Debug)]
pub struct RunResult<F> {
    pub report: Report,
    pub memory: HealerMemory,
    /// Component states after the last event.
    pub states: Vec<ComponentState<F>>,
    /// Some variable still differed from its pre-event value after an event.
    pub unhealed_loss: bool,
}

impl<F> RunResult<F> {
    /// 0 on success, 1 when the healer left a loss behind.
    pub fn exit_code(&self) -> i32 {
        if self.report.healer && self.unhealed_loss {
            1
        } else {
            0
        }
    }
}

/// Full snapshot before every event, diff after; nothing is healed.
struct Detector<F> {
    pending: Option<Snapshot<F>>,
    lost: BTreeSet<String>,
}

impl<F> Default for Detector<F> {
    fn default() -> Self {
        Detector {
            pending: None,
            lost: BTreeSet::new(),
        }
    }
}

impl<F: Scalar> LifecycleHooks<F> for Detector<F> {
    fn pre_destroy(&mut self, c: &ComponentState<F>, event: &StopStartEvent) -> Result<()> {
        self.pending = Some(take_snapshot(c, event.sequence_index));
        Ok(())
    }

    fn post_recreate(
        &mut self,
        c: ComponentState<F>,
        _: &StopStartEvent,
    ) -> Result<ComponentState<F>> {
        self.lost = match self.pending.take() {
            Some(snapshot) => diff(&snapshot, &c)?,
            None => BTreeSet::new(),
        };
        Ok(c)
    }
}

/// Runs the script in order, starting from `memory` when the healer is on.
/// Events are numbered from 1.
pub fn run<F: Scalar>(
    scenario: &Scenario<F>,
    opts: &RunOptions,
    memory: HealerMemory,
) -> Result<RunResult<F>> {
    scenario.validate()?;
    let mut states: BTreeMap<&str, ComponentState<F>> = BTreeMap::new();
    for def in &scenario.components {
        states.insert(def.name.as_str(), def.instantiate()?);
    }
    let mut healer = Healer::new(memory);
    if let Some(dir) = &opts.snapshot_dir {
        healer = healer.with_snapshot_dir(dir);
    }
    let mut detector = Detector::default();
    let mut records = Vec::with_capacity(scenario.script.len());
    let mut unhealed_loss = false;

    for (i, step) in scenario.script.iter().enumerate() {
        let def = scenario
            .component(&step.component)
            .ok_or_else(|| Error::Scenario(format!("unknown component `{}`", step.component)))?;
        let state = states
            .get_mut(def.name.as_str())
            .expect("every component was instantiated");
        for (name, value) in &step.mutations {
            state.set(name, value.clone())?;
        }
        let event = StopStartEvent::new(step.kind, i as u64 + 1);
        let before = state.clone();
        let truth = if opts.oracle_check {
            Some(oracle_lost_vars(&before, &def.handler, &event)?)
        } else {
            None
        };

        let mut rec = EventRecord {
            event: event.sequence_index,
            component: def.name.clone(),
            kind: step.kind,
            abstract_state: abstract_state(&before),
            classification: None,
            action: ActionLabel::None,
            bytes_serialized: 0,
            lost: BTreeSet::new(),
            healed: BTreeSet::new(),
            memory_update: None,
            oracle_lost: None,
            missed: None,
            detection_matches_oracle: None,
        };

        let after = if opts.healer {
            let after = dispatch_stop_start(&before, &def.handler, &mut healer, &event)?;
            let done = healer.take_last().expect("healer records every event");
            rec.classification = Some(done.outcome.classification);
            rec.action = done.action;
            rec.bytes_serialized = done.bytes_serialized;
            rec.lost = done.outcome.lost;
            rec.healed = done.outcome.healed;
            rec.memory_update = Some(done.outcome.memory_update);
            after
        } else {
            let after = dispatch_stop_start(&before, &def.handler, &mut detector, &event)?;
            rec.lost = std::mem::take(&mut detector.lost);
            after
        };

        let residual = changed_vars(&before, &after);
        unhealed_loss |= !residual.is_empty();
        if let Some(truth) = truth {
            let full_diff = !opts.healer || rec.action == ActionLabel::FullSnapshot;
            if full_diff {
                rec.detection_matches_oracle = Some(rec.lost == truth.lost);
            }
            rec.oracle_lost = Some(truth.lost);
            rec.missed = Some(residual);
        }
        *state = after;
        records.push(rec);
    }

    let report = Report::new(&scenario.name, opts, records);
    Ok(RunResult {
        report,
        memory: healer.into_memory(),
        states: states.into_values().collect(),
        unhealed_loss,
    })
}

/// File-level run: loads memory from `memory_path` (empty if absent) and,
/// with the healer on, writes the updated memory back. The report is
/// written to `report_path` when given.
pub fn run_files<F: Scalar>(
    scenario: &Scenario<F>,
    opts: &RunOptions,
    memory_path: Option<&Path>,
    report_path: Option<&Path>,
) -> Result<RunResult<F>> {
    let memory = match memory_path {
        Some(path) if opts.healer => HealerMemory::load_or_default(path)?,
        _ => HealerMemory::new(),
    };
    let result = run(scenario, opts, memory)?;
    if let (Some(path), true) = (memory_path, opts.healer) {
        result.memory.persist(path)?;
    }
    if let Some(path) = report_path {
        result.report.write(path)?;
    }
    Ok(result)
}
