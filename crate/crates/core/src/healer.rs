//! The learning data-loss healer.
//!
//! At save time the abstract state of the component is classified against
//! the memory. A state never seen before gets a full snapshot which is
//! diffed after recreation: a clean diff marks the state safe, otherwise the
//! lost variables are recorded as failing for that state and healed from the
//! snapshot. A known failing state only saves and restores its recorded
//! variables. A known safe state is left alone.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::abstraction::{abstract_state, AbstractState};
use crate::appmodel::ComponentState;
use crate::error::{Error, Result};
use crate::lifecycle::{LifecycleHooks, StopStartEvent};
use crate::scalar::Scalar;
use crate::snapshot::{decode, diff, take_selective, take_snapshot, LostVarSet, Snapshot};

/// Variables known to lose their value in a failing state.
pub type VarSet = BTreeSet<String>;

/// Learned safe (MS) and failing (MF) abstract states.
///
/// No state is ever both safe and failing, and every failing entry names at
/// least one variable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HealerMemory {
    safe: BTreeSet<AbstractState>,
    failing: BTreeMap<AbstractState, VarSet>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Classification {
    New,
    Safe,
    Unsafe(VarSet),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    New,
    Safe,
    Unsafe,
}

impl Classification {
    pub fn label(&self) -> ClassLabel {
        match self {
            Classification::New => ClassLabel::New,
            Classification::Safe => ClassLabel::Safe,
            Classification::Unsafe(_) => ClassLabel::Unsafe,
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassLabel::New => "new",
            ClassLabel::Safe => "safe",
            ClassLabel::Unsafe => "unsafe",
        })
    }
}

impl HealerMemory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.safe.is_empty() && self.failing.is_empty()
    }

    pub fn safe(&self) -> impl Iterator<Item = &AbstractState> {
        self.safe.iter()
    }

    pub fn failing(&self) -> impl Iterator<Item = (&AbstractState, &VarSet)> {
        self.failing.iter()
    }

    /// Every abstract state the memory knows about.
    pub fn states(&self) -> impl Iterator<Item = &AbstractState> {
        self.safe.iter().chain(self.failing.keys())
    }

    pub fn classify(&self, state: &AbstractState) -> Classification {
        if let Some(vars) = self.failing.get(state) {
            Classification::Unsafe(vars.clone())
        } else if self.safe.contains(state) {
            Classification::Safe
        } else {
            Classification::New
        }
    }

    pub fn add_safe(&mut self, state: AbstractState) -> Result<()> {
        if self.failing.contains_key(&state) {
            return Err(Error::Integrity(format!("{state} is already failing")));
        }
        self.safe.insert(state);
        Ok(())
    }

    pub fn add_failing(&mut self, state: AbstractState, vars: VarSet) -> Result<()> {
        if vars.is_empty() {
            return Err(Error::Integrity(format!(
                "{state} has an empty variable set"
            )));
        }
        if self.safe.contains(&state) {
            return Err(Error::Integrity(format!("{state} is already safe")));
        }
        self.failing.insert(state, vars);
        Ok(())
    }

    /// Canonical pretty-printed JSON form.
    pub fn to_bytes(&self) -> Vec<u8> {
        let file = MemoryFile {
            failing: self
                .failing
                .iter()
                .map(|(state, vars)| FailingEntry {
                    activity: state.activity.clone(),
                    bitmask: state.bitmask.clone(),
                    vars: vars.iter().cloned().collect(),
                })
                .collect(),
            safe: self.safe.iter().cloned().collect(),
        };
        let mut bytes = serde_json::to_vec_pretty(&file).expect("memory is plain data");
        bytes.push(b'\n');
        bytes
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::parse(bytes, None)
    }

    fn parse(bytes: &[u8], path: Option<&Path>) -> Result<Self> {
        let file: MemoryFile = serde_json::from_slice(bytes).map_err(|e| Error::parse(path, &e))?;
        let mut memory = HealerMemory::new();
        for state in file.safe {
            check_state(&state)?;
            if !memory.safe.insert(state.clone()) {
                return Err(Error::Integrity(format!("{state} listed twice in MS")));
            }
        }
        for entry in file.failing {
            let state = AbstractState::new(entry.activity, entry.bitmask);
            check_state(&state)?;
            if memory.failing.contains_key(&state) {
                return Err(Error::Integrity(format!("{state} listed twice in MF")));
            }
            if memory.safe.contains(&state) {
                return Err(Error::Integrity(format!("{state} is in both MS and MF")));
            }
            let vars: VarSet = entry.vars.into_iter().collect();
            if vars.iter().any(String::is_empty) {
                return Err(Error::Integrity(format!("{state} names an empty variable")));
            }
            memory.add_failing(state, vars)?;
        }
        Ok(memory)
    }

    pub fn persist(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&bytes, Some(path))
    }

    /// Loads `path`, or an empty memory if the file does not exist yet.
    pub fn load_or_default(path: &Path) -> Result<Self> {
        if path.exists() {
            Self::load(path)
        } else {
            Ok(Self::new())
        }
    }

    /// One line per entry, sorted by activity then bitmask.
    pub fn listing(&self) -> String {
        let mut entries: Vec<(&AbstractState, String)> = self
            .safe
            .iter()
            .map(|s| (s, format!("MS {} {}", s.activity, s.bitmask)))
            .chain(self.failing.iter().map(|(s, vars)| {
                let vars: Vec<&str> = vars.iter().map(String::as_str).collect();
                (
                    s,
                    format!("MF {} {} {}", s.activity, s.bitmask, vars.join(",")),
                )
            }))
            .collect();
        entries.sort_by(|a, b| a.0.cmp(b.0));
        entries.into_iter().map(|(_, line)| line + "\n").collect()
    }
}

fn check_state(state: &AbstractState) -> Result<()> {
    if state.is_well_formed() {
        Ok(())
    } else {
        Err(Error::Integrity(format!(
            "malformed abstract state {state}"
        )))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MemoryFile {
    #[serde(rename = "MF", default)]
    failing: Vec<FailingEntry>,
    #[serde(rename = "MS", default)]
    safe: Vec<AbstractState>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FailingEntry {
    activity: String,
    bitmask: String,
    vars: Vec<String>,
}

pub fn classify(state: &AbstractState, memory: &HealerMemory) -> Classification {
    memory.classify(state)
}

#[derive(Debug, Clone)]
pub enum SaveKind<F> {
    FullSnapshot(Snapshot<F>),
    SelectiveSave(Snapshot<F>, VarSet),
    Skip,
}

#[derive(Debug, Clone)]
pub struct SaveAction<F> {
    pub state: AbstractState,
    pub kind: SaveKind<F>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionLabel {
    FullSnapshot,
    SelectiveSave,
    Skip,
    /// Healer not installed.
    None,
}

impl<F: Scalar> SaveAction<F> {
    pub fn label(&self) -> ActionLabel {
        match self.kind {
            SaveKind::FullSnapshot(_) => ActionLabel::FullSnapshot,
            SaveKind::SelectiveSave(..) => ActionLabel::SelectiveSave,
            SaveKind::Skip => ActionLabel::Skip,
        }
    }

    pub fn snapshot(&self) -> Option<&Snapshot<F>> {
        match &self.kind {
            SaveKind::FullSnapshot(s) | SaveKind::SelectiveSave(s, _) => Some(s),
            SaveKind::Skip => None,
        }
    }

    /// Bytes written for this action; zero for a skip.
    pub fn bytes_serialized(&self) -> usize {
        self.snapshot().map_or(0, Snapshot::serialized_len)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "vars")]
pub enum MemoryUpdate {
    AddedToMs,
    AddedToMf(VarSet),
    None,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RestoreOutcome {
    pub classification: ClassLabel,
    pub lost: LostVarSet,
    pub healed: VarSet,
    pub memory_update: MemoryUpdate,
}

pub fn on_save<F: Scalar>(
    c: &ComponentState<F>,
    memory: &HealerMemory,
    event: u64,
) -> Result<SaveAction<F>> {
    let state = abstract_state(c);
    let kind = match memory.classify(&state) {
        Classification::New => SaveKind::FullSnapshot(take_snapshot(c, event)),
        Classification::Safe => SaveKind::Skip,
        Classification::Unsafe(vars) => {
            let snapshot =
                take_selective(c, &vars, event).map_err(|e| Error::MemoryCorruption {
                    component: c.name().to_owned(),
                    reason: format!("{state}: {e}"),
                })?;
            SaveKind::SelectiveSave(snapshot, vars)
        }
    };
    Ok(SaveAction { state, kind })
}

pub fn on_restore<F: Scalar>(
    c: ComponentState<F>,
    action: &SaveAction<F>,
    memory: &mut HealerMemory,
) -> Result<(ComponentState<F>, RestoreOutcome)> {
    if action.state.activity != c.name() {
        return Err(Error::ComponentMismatch {
            component: c.name().to_owned(),
            reason: format!("save action was for `{}`", action.state.activity),
        });
    }
    match &action.kind {
        SaveKind::FullSnapshot(snapshot) => {
            let lost = diff(snapshot, &c)?;
            if lost.is_empty() {
                memory.add_safe(action.state.clone())?;
                let outcome = RestoreOutcome {
                    classification: ClassLabel::New,
                    lost,
                    healed: VarSet::new(),
                    memory_update: MemoryUpdate::AddedToMs,
                };
                Ok((c, outcome))
            } else {
                memory.add_failing(action.state.clone(), lost.clone())?;
                let healed = heal(c, snapshot, &lost)?;
                let outcome = RestoreOutcome {
                    classification: ClassLabel::New,
                    healed: lost.clone(),
                    memory_update: MemoryUpdate::AddedToMf(lost.clone()),
                    lost,
                };
                Ok((healed, outcome))
            }
        }
        SaveKind::SelectiveSave(snapshot, vars) => {
            let healed = heal(c, snapshot, vars)?;
            let outcome = RestoreOutcome {
                classification: ClassLabel::Unsafe,
                lost: LostVarSet::new(),
                healed: vars.clone(),
                memory_update: MemoryUpdate::None,
            };
            Ok((healed, outcome))
        }
        SaveKind::Skip => Ok((
            c,
            RestoreOutcome {
                classification: ClassLabel::Safe,
                lost: LostVarSet::new(),
                healed: VarSet::new(),
                memory_update: MemoryUpdate::None,
            },
        )),
    }
}

/// Assigns the snapshot value of every variable in `names`.
pub fn heal<F: Scalar>(
    mut c: ComponentState<F>,
    snapshot: &Snapshot<F>,
    names: &BTreeSet<String>,
) -> Result<ComponentState<F>> {
    if snapshot.component != c.name() {
        return Err(Error::ComponentMismatch {
            component: c.name().to_owned(),
            reason: format!("snapshot was taken from `{}`", snapshot.component),
        });
    }
    for name in names {
        let encoded = snapshot
            .entries
            .get(name)
            .ok_or_else(|| Error::ComponentMismatch {
                component: c.name().to_owned(),
                reason: format!("snapshot has no entry for `{name}`"),
            })?;
        let ty = c
            .variable(name)
            .map(|v| v.spec().ty)
            .ok_or_else(|| Error::UnknownVariable {
                component: c.name().to_owned(),
                name: name.clone(),
            })?;
        let value = decode(encoded, ty).map_err(|reason| Error::Decode {
            name: name.clone(),
            reason,
        })?;
        c.set(name, value)?;
    }
    Ok(c)
}

/// What the healer did for one event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HealerEvent {
    pub event: u64,
    pub state: AbstractState,
    pub action: ActionLabel,
    pub bytes_serialized: usize,
    pub outcome: RestoreOutcome,
}

/// The healer installed as lifecycle hooks.
///
/// When a snapshot directory is set, each save is written there and read
/// back at the matching restore, then removed.
#[derive(Debug)]
pub struct Healer<F> {
    memory: HealerMemory,
    snapshot_dir: Option<PathBuf>,
    pending: Option<(SaveAction<F>, usize)>,
    last: Option<HealerEvent>,
}

impl<F: Scalar> Healer<F> {
    pub fn new(memory: HealerMemory) -> Self {
        Healer {
            memory,
            snapshot_dir: None,
            pending: None,
            last: None,
        }
    }

    pub fn with_snapshot_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.snapshot_dir = Some(dir.into());
        self
    }

    pub fn memory(&self) -> &HealerMemory {
        &self.memory
    }

    pub fn into_memory(self) -> HealerMemory {
        self.memory
    }

    /// Record of the most recent completed event.
    pub fn take_last(&mut self) -> Option<HealerEvent> {
        self.last.take()
    }
}

impl<F: Scalar> LifecycleHooks<F> for Healer<F> {
    fn pre_destroy(&mut self, c: &ComponentState<F>, event: &StopStartEvent) -> Result<()> {
        let action = on_save(c, &self.memory, event.sequence_index)?;
        let bytes = action.bytes_serialized();
        if let (Some(dir), Some(snapshot)) = (&self.snapshot_dir, action.snapshot()) {
            snapshot.write_to_dir(dir)?;
        }
        self.pending = Some((action, bytes));
        Ok(())
    }

    fn post_recreate(
        &mut self,
        c: ComponentState<F>,
        event: &StopStartEvent,
    ) -> Result<ComponentState<F>> {
        let (mut action, bytes) = self
            .pending
            .take()
            .ok_or_else(|| Error::ComponentMismatch {
                component: c.name().to_owned(),
                reason: format!("no save recorded for event {}", event.sequence_index),
            })?;
        if let Some(dir) = &self.snapshot_dir {
            if let Some(saved) = action.snapshot() {
                let path = dir.join(saved.file_name());
                let stored = Snapshot::read_file(&path)?;
                std::fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
                action.kind = match action.kind {
                    SaveKind::FullSnapshot(_) => SaveKind::FullSnapshot(stored),
                    SaveKind::SelectiveSave(_, vars) => SaveKind::SelectiveSave(stored, vars),
                    SaveKind::Skip => SaveKind::Skip,
                };
            }
        }
        let (healed, outcome) = on_restore(c, &action, &mut self.memory)?;
        self.last = Some(HealerEvent {
            event: event.sequence_index,
            state: action.state.clone(),
            action: action.label(),
            bytes_serialized: bytes,
            outcome,
        });
        Ok(healed)
    }
}
