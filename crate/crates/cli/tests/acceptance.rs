//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;

use lifeheal_core::abstraction::abstract_state;
use lifeheal_core::appmodel::Behavior;
use lifeheal_core::fixtures;
use lifeheal_core::healer::{on_save, Healer, HealerMemory};
use lifeheal_core::lifecycle::{dispatch_stop_start, StopStartEvent};
use lifeheal_core::oracle::{changed_vars, generate_scenario, oracle_lost_vars, Limits};
use lifeheal_core::runner::run;
use lifeheal_core::snapshot::{decode, deep_equal, encode, EncodedValue};
use lifeheal_core::value::{Fields, Value, ValueType};
use lifeheal_core::{ActionLabel, ClassLabel, Report, RunOptions, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RANDOM_SCENARIOS: u64 = 500;
const VALUE_CORPUS: usize = 100;

type Check = fn(&Path) -> Result<String, String>;

fn main() {
    let criteria: [(&str, &str, Check); 7] = [
        ("C1", "fixture reproduction", fixture_reproduction),
        ("C2", "learning curve", learning_curve),
        ("C3", "oracle equivalence", oracle_equivalence),
        ("C4", "learn-once and disjoint memory", learn_once),
        ("C5", "round trips", round_trips),
        ("C6", "cross-run learning", cross_run_learning),
        ("C7", "abstraction limit characterization", known_limitation),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        let dir = tempfile::tempdir().expect("temp dir");
        let result = catch_unwind(AssertUnwindSafe(|| check(dir.path())))
            .unwrap_or_else(|panic| Err(panic_message(panic)));
        match result {
            Ok(detail) => println!("PASS {id} {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {id} {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn panic_message(panic: Box<dyn std::any::Any + Send>) -> String {
    panic
        .downcast_ref::<String>()
        .cloned()
        .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "panicked".to_string())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn names(list: &[&str]) -> BTreeSet<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn fixture_lost() -> BTreeSet<String> {
    names(&["mSubtitleTextView", "noteContent", "note"])
}

/// Runs the CLI, returning its exit code.
fn lifeheal(args: &[&Path]) -> i32 {
    let out = Command::new(env!("CARGO_BIN_EXE_lifeheal"))
        .args(args)
        .output()
        .expect("run lifeheal");
    out.status.code().unwrap_or(-1)
}

fn run_cli(scenario: &Path, memory: Option<&Path>, report: &Path, extra: &[&str]) -> (i32, Report) {
    let mut args: Vec<&Path> = vec![Path::new("run"), Path::new("--scenario"), scenario];
    if let Some(m) = memory {
        args.extend([Path::new("--memory"), m]);
    }
    args.extend([Path::new("--report"), report]);
    args.extend(extra.iter().map(Path::new));
    let code = lifeheal(&args);
    let report =
        Report::from_bytes(&std::fs::read(report).expect("report written")).expect("report parses");
    (code, report)
}

fn write_scenario(dir: &Path, name: &str, s: &Scenario) -> PathBuf {
    let path = dir.join(name);
    s.save(&path).expect("write scenario");
    path
}

fn fixture_with_rotations(n: usize) -> Scenario {
    let mut s = fixtures::owncloud_notes::<f64>();
    let step = s.script[0].clone();
    s.script = vec![step; n];
    s
}

fn fixture_reproduction(dir: &Path) -> Result<String, String> {
    let scenario = write_scenario(dir, "owncloud_notes.json", &fixtures::owncloud_notes());
    let report = dir.join("off.json");
    let (code, off) = run_cli(&scenario, None, &report, &["--no-healer"]);
    ensure(code == 0, || format!("healer-off exit {code}"))?;
    ensure(off.events.len() == 1, || "expected one event".into())?;
    ensure(off.events[0].lost == fixture_lost(), || {
        format!("lost {:?}", off.events[0].lost)
    })?;
    ensure(off.events[0].healed.is_empty(), || {
        "healer-off healed something".into()
    })?;

    let memory = dir.join("memory.json");
    let report = dir.join("on.json");
    let (code, on) = run_cli(&scenario, Some(&memory), &report, &["--oracle-check"]);
    ensure(code == 0, || format!("healer-on exit {code}"))?;
    ensure(on.events[0].missed == Some(BTreeSet::new()), || {
        format!("missed {:?}", on.events[0].missed)
    })?;

    // Same run in-process to compare every variable directly.
    let s = fixtures::owncloud_notes::<f64>();
    let opts = RunOptions {
        healer: true,
        ..RunOptions::default()
    };
    let result = run(&s, &opts, HealerMemory::new()).map_err(|e| e.to_string())?;
    let pre = s.components[0].instantiate().map_err(|e| e.to_string())?;
    let post = &result.states[0];
    ensure(post.len() == 9, || "expected 9 variables".into())?;
    let differing = changed_vars(&pre, post);
    ensure(differing.is_empty(), || {
        format!("post-state differs on {differing:?}")
    })?;

    let stored = HealerMemory::load(&memory).map_err(|e| e.to_string())?;
    let failing: Vec<_> = stored.failing().collect();
    ensure(stored.safe().count() == 0, || {
        "unexpected MS entries".into()
    })?;
    ensure(failing.len() == 1, || {
        format!("{} MF entries", failing.len())
    })?;
    let (state, vars) = failing[0];
    ensure(
        state.activity == "NoteActivity" && state.bitmask == "101111111",
        || format!("MF key {state}"),
    )?;
    ensure(*vars == fixture_lost(), || format!("MF vars {vars:?}"))?;
    Ok(
        "lost {mSubtitleTextView, noteContent, note}; healed 9/9; MF = {(NoteActivity, 101111111)}"
            .into(),
    )
}

fn learning_curve(dir: &Path) -> Result<String, String> {
    let scenario = write_scenario(dir, "three.json", &fixture_with_rotations(3));
    let memory = dir.join("memory.json");
    let (code, report) = run_cli(&scenario, Some(&memory), &dir.join("r.json"), &[]);
    ensure(code == 0, || format!("exit {code}"))?;
    let actions: Vec<ActionLabel> = report.events.iter().map(|e| e.action).collect();
    ensure(
        actions
            == [
                ActionLabel::FullSnapshot,
                ActionLabel::SelectiveSave,
                ActionLabel::SelectiveSave,
            ],
        || format!("actions {actions:?}"),
    )?;
    for ev in &report.events[1..] {
        ensure(ev.healed == fixture_lost(), || {
            format!("event {} healed {:?}", ev.event, ev.healed)
        })?;
    }
    let bytes: Vec<usize> = report.events.iter().map(|e| e.bytes_serialized).collect();
    ensure(bytes[1] < bytes[0], || format!("bytes {bytes:?}"))?;

    // Entry count of the selective save the healer takes in the learned state.
    let learned = HealerMemory::load(&memory).map_err(|e| e.to_string())?;
    let (c, _) = fixtures::note_activity();
    let action = on_save(&c, &learned, 2).map_err(|e| e.to_string())?;
    let entries = action.snapshot().map_or(0, |s| s.entries.len());
    ensure(entries == 3, || {
        format!("selective save holds {entries} entries")
    })?;

    let mut safe = fixture_with_rotations(3);
    safe.components[0].handler.restore = Behavior::Correct;
    let scenario = write_scenario(dir, "safe.json", &safe);
    let (code, report) = run_cli(
        &scenario,
        Some(&dir.join("safe-memory.json")),
        &dir.join("s.json"),
        &[],
    );
    ensure(code == 0, || format!("safe exit {code}"))?;
    let safe_bytes: Vec<usize> = report.events.iter().map(|e| e.bytes_serialized).collect();
    ensure(
        safe_bytes[0] > 0 && safe_bytes[1..].iter().all(|b| *b == 0),
        || format!("safe bytes {safe_bytes:?}"),
    )?;
    Ok(format!(
        "bytes {bytes:?}, selective entries 3, safe variant bytes {safe_bytes:?}"
    ))
}

struct RandomRunStats {
    events: usize,
    detection_mismatches: usize,
    heal_mismatches: usize,
    repeated_full_snapshots: usize,
    overlap_violations: usize,
    memories: Vec<HealerMemory>,
}

/// Runs every random scenario twice: detection-only against the oracle, and
/// stepped with the healer installed, checking state and memory after each
/// event.
fn random_runs() -> Result<RandomRunStats, String> {
    let limits = Limits::default();
    let mut stats = RandomRunStats {
        events: 0,
        detection_mismatches: 0,
        heal_mismatches: 0,
        repeated_full_snapshots: 0,
        overlap_violations: 0,
        memories: Vec::new(),
    };
    for seed in 0..RANDOM_SCENARIOS {
        let s = generate_scenario::<f64>(seed, &limits);
        ensure(
            s.components.iter().all(|c| c.variables.len() <= 6) && s.script.len() <= 4,
            || format!("seed {seed} exceeds size bounds"),
        )?;

        let detect = RunOptions {
            healer: false,
            oracle_check: true,
            snapshot_dir: None,
        };
        let report = run(&s, &detect, HealerMemory::new())
            .map_err(|e| e.to_string())?
            .report;
        stats.detection_mismatches += report
            .events
            .iter()
            .filter(|e| e.detection_matches_oracle != Some(true))
            .count();

        let mut healer = Healer::new(HealerMemory::new());
        let mut full_snapshots: BTreeMap<_, usize> = BTreeMap::new();
        let mut states: Vec<_> = s
            .components
            .iter()
            .map(|d| d.instantiate().expect("valid scenario"))
            .collect();
        for (i, step) in s.script.iter().enumerate() {
            let idx = s
                .components
                .iter()
                .position(|d| d.name == step.component)
                .expect("resolved");
            let def = &s.components[idx];
            let c = &mut states[idx];
            for (name, value) in &step.mutations {
                c.set(name, value.clone()).map_err(|e| e.to_string())?;
            }
            let event = StopStartEvent::new(step.kind, i as u64 + 1);
            let truth = oracle_lost_vars(c, &def.handler, &event).map_err(|e| e.to_string())?;
            let post = dispatch_stop_start(c, &def.handler, &mut healer, &event)
                .map_err(|e| e.to_string())?;
            let done = healer.take_last().expect("healer records each event");
            stats.events += 1;

            if done.action == ActionLabel::FullSnapshot {
                if done.outcome.lost != truth.lost {
                    stats.detection_mismatches += 1;
                }
                let n = full_snapshots.entry(abstract_state(c)).or_insert(0);
                *n += 1;
                if *n > 1 {
                    stats.repeated_full_snapshots += 1;
                }
            }
            if !changed_vars(c, &post).is_empty() {
                stats.heal_mismatches += 1;
            }
            let memory = healer.memory();
            let safe: BTreeSet<_> = memory.safe().collect();
            if memory.failing().any(|(state, _)| safe.contains(state)) {
                stats.overlap_violations += 1;
            }
            *c = post;
        }
        stats.memories.push(healer.into_memory());
    }
    Ok(stats)
}

fn oracle_equivalence(_: &Path) -> Result<String, String> {
    let stats = random_runs()?;
    ensure(stats.detection_mismatches == 0, || {
        format!("{} detection mismatches", stats.detection_mismatches)
    })?;
    ensure(stats.heal_mismatches == 0, || {
        format!("{} unhealed events", stats.heal_mismatches)
    })?;
    Ok(format!(
        "{RANDOM_SCENARIOS} scenarios, {} events, 0 detection mismatches, 0 unhealed events",
        stats.events
    ))
}

fn learn_once(_: &Path) -> Result<String, String> {
    let stats = random_runs()?;
    ensure(stats.repeated_full_snapshots == 0, || {
        format!("{} repeated full snapshots", stats.repeated_full_snapshots)
    })?;
    ensure(stats.overlap_violations == 0, || {
        format!(
            "{} events left MS and MF overlapping",
            stats.overlap_violations
        )
    })?;
    Ok(format!(
        "{} events, no repeated full snapshot, MS and MF disjoint throughout",
        stats.events
    ))
}

fn random_leaf(rng: &mut ChaCha8Rng) -> Value<f64> {
    match rng.gen_range(0..4) {
        0 => Value::Int(rng.gen()),
        1 => Value::Bool(rng.gen()),
        2 => Value::Float(rng.gen_range(-1.0e9..1.0e9)),
        _ => {
            let len = rng.gen_range(0..10);
            Value::Text((0..len).map(|_| rng.gen_range('!'..='~')).collect())
        }
    }
}

fn random_object(rng: &mut ChaCha8Rng, depth: u32) -> Value<f64> {
    let mut fields = Fields::new();
    for i in 0..rng.gen_range(1..=4) {
        let child = if depth > 0 && rng.gen_bool(0.4) {
            random_object(rng, depth - 1)
        } else {
            random_leaf(rng)
        };
        fields.insert(format!("k{}", (i * 7 + 3) % 5), child);
    }
    Value::Object(fields)
}

fn nested(v: &Value<f64>) -> bool {
    matches!(v, Value::Object(f) if f.values().any(|c| matches!(c, Value::Object(_))))
}

fn round_trips(dir: &Path) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut per_type: BTreeMap<ValueType, usize> = BTreeMap::new();
    let mut nested_objects = 0;
    for i in 0..VALUE_CORPUS {
        let ty = ValueType::ALL[i % ValueType::ALL.len()];
        let value = match ty {
            ValueType::Object if i % 10 == 4 => Value::Null,
            ValueType::Object => random_object(&mut rng, 3),
            _ => loop {
                let v = random_leaf(&mut rng);
                if v.value_type() == ty {
                    break v;
                }
            },
        };
        if nested(&value) {
            nested_objects += 1;
        }
        *per_type.entry(ty).or_default() += 1;
        let text = serde_json::to_string(&encode(&value)).map_err(|e| e.to_string())?;
        let parsed: EncodedValue<f64> = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        let back = decode(&parsed, ty).map_err(|e| format!("case {i}: {e}"))?;
        ensure(deep_equal(&value, &back) == Ok(true), || {
            format!("case {i} differs after round trip")
        })?;
    }
    ensure(per_type.len() == 5 && nested_objects > 0, || {
        format!("corpus coverage {per_type:?}, {nested_objects} nested")
    })?;

    let stats = random_runs()?;
    let mut memories = stats.memories;
    let s = fixture_with_rotations(1);
    let opts = RunOptions {
        healer: true,
        ..RunOptions::default()
    };
    memories.push(
        run(&s, &opts, HealerMemory::new())
            .map_err(|e| e.to_string())?
            .memory,
    );
    let mut states_checked = 0;
    let path = dir.join("memory.json");
    for memory in &memories {
        memory.persist(&path).map_err(|e| e.to_string())?;
        let loaded = HealerMemory::load(&path).map_err(|e| e.to_string())?;
        for state in memory.states() {
            states_checked += 1;
            ensure(loaded.classify(state) == memory.classify(state), || {
                format!("classification of {state} changed")
            })?;
        }
    }
    Ok(format!(
        "{VALUE_CORPUS} values ({nested_objects} nested objects), {} memories / {states_checked} states reloaded",
        memories.len()
    ))
}

fn cross_run_learning(dir: &Path) -> Result<String, String> {
    let mut scenarios = vec![fixture_with_rotations(3)];
    scenarios.extend(
        (0..200u64)
            .map(|seed| generate_scenario::<f64>(seed, &Limits::default()))
            .filter(|s| s.script.len() >= 2)
            .take(40),
    );
    let mut splits = 0;
    for (n, s) in scenarios.iter().enumerate() {
        let whole = write_scenario(dir, &format!("whole-{n}.json"), s);
        let single = dir.join(format!("single-{n}.json"));
        let report = dir.join("r.json");
        run_cli(&whole, Some(&single), &report, &[]);
        let expected = std::fs::read(&single).map_err(|e| e.to_string())?;
        for at in 1..s.script.len() {
            let (first, second) = s.split_at(at);
            let a = write_scenario(dir, "first.json", &first);
            let b = write_scenario(dir, "second.json", &second);
            let shared = dir.join(format!("shared-{n}-{at}.json"));
            run_cli(&a, Some(&shared), &report, &[]);
            run_cli(&b, Some(&shared), &report, &[]);
            let got = std::fs::read(&shared).map_err(|e| e.to_string())?;
            ensure(got == expected, || {
                format!("scenario {} split at {at} diverged", s.name)
            })?;
            splits += 1;
        }
    }
    Ok(format!(
        "{} scenarios, {splits} splits, memory files byte-identical",
        scenarios.len()
    ))
}

fn known_limitation(dir: &Path) -> Result<String, String> {
    let limits = Limits {
        adversarial: true,
        ..Limits::default()
    };
    let mut missed_total = 0;
    for seed in 0..5 {
        let s = generate_scenario::<f64>(seed, &limits);
        let path = write_scenario(dir, "adversarial.json", &s);
        let memory = dir.join(format!("adv-memory-{seed}.json"));
        let (code, report) = run_cli(
            &path,
            Some(&memory),
            &dir.join("r.json"),
            &["--oracle-check"],
        );
        let missed = report.totals.losses_missed.unwrap_or(0);
        ensure(missed >= 1, || {
            format!("seed {seed}: losses_missed = {missed}")
        })?;
        ensure(code == 1, || {
            format!("seed {seed}: exit {code}, expected 1")
        })?;
        let second = &report.events[1];
        ensure(second.classification == Some(ClassLabel::Safe), || {
            format!(
                "seed {seed}: second event classified {:?}",
                second.classification
            )
        })?;
        ensure(
            second
                .missed
                .as_ref()
                .is_some_and(|m| m.contains("counter")),
            || format!("seed {seed}: counter not reported missed"),
        )?;
        missed_total += missed;
    }
    Ok(format!(
        "5 adversarial scenarios, {missed_total} missed losses reported, exit status 1"
    ))
}
