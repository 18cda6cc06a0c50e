//! Primitive-evaluation schedules, SPSR/TCR aggregation, and trajectory
//! counters.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{OutcomeCounts, Tenths};
use crate::policy_sim::{sample_outcome, OutcomeProfile};
use crate::primitives::{AgentPrimitive, PrimitiveGroup, RobotPrimitive};
use crate::tabletop::{ChipCount, Denomination, OutcomeLevel, Side};
use crate::translator::split_chips;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BenchError {
    #[error("outcome log is empty")]
    EmptyLog,
    #[error("state index {found} where {expected} was expected")]
    NonContiguous { expected: u64, found: u64 },
    #[error("unknown trajectory label `{0}`")]
    UnknownLabel(String),
}

/// Per-trial RNG stream derived from `(seed, index)`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scene {
    /// Both hole cards face-down in their slots.
    CardSlots,
    /// A card held after the pickup trial at `source` (schedule index).
    HeldCard { side: Side, source: usize },
    /// Chips in front of the robot; the first entry is the target.
    PushChips { chips: Vec<Denomination> },
    /// Chips on both sides of the bet zone.
    PullChips { left: Vec<Denomination>, right: Vec<Denomination> },
}

impl Scene {
    pub fn chip_count(&self) -> usize {
        match self {
            Scene::PushChips { chips } => chips.len(),
            Scene::PullChips { left, right } => left.len() + right.len(),
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub index: usize,
    pub primitive: RobotPrimitive,
    pub repetition: u32,
    pub scene: Scene,
}

fn others(target: Denomination) -> Vec<Denomination> {
    Denomination::ALL.into_iter().filter(|d| *d != target).collect()
}

/// The 80-trial schedule: pickups ten times each, every other primitive
/// five times.
pub fn generate_schedule(seed: u64) -> Vec<TrialSpec> {
    let mut out: Vec<TrialSpec> = Vec::with_capacity(80);
    let mut pickup_index = [[0usize; 10]; 2];
    for side in Side::BOTH {
        for (rep, slot) in pickup_index[side.index()].iter_mut().enumerate() {
            *slot = out.len();
            out.push(TrialSpec {
                index: out.len(),
                primitive: RobotPrimitive::PickUp(side),
                repetition: rep as u32,
                scene: Scene::CardSlots,
            });
        }
    }
    for d in Denomination::ALL {
        for k in 1..=5u32 {
            let mut rng = trial_rng(seed, out.len() as u64);
            let pool = others(d);
            let mut chips = vec![d];
            chips.extend((1..k).map(|_| *pool.choose(&mut rng).expect("three others")));
            out.push(TrialSpec {
                index: out.len(),
                primitive: RobotPrimitive::Push(d),
                repetition: k - 1,
                scene: Scene::PushChips { chips },
            });
        }
    }
    for d in Denomination::ALL {
        let mut rng = trial_rng(seed, out.len() as u64);
        let mut pool = others(d);
        pool.shuffle(&mut rng);
        let mut left = vec![d, pool[0], pool[1]];
        let mut right = vec![d, pool[2]];
        for rep in 0..5u32 {
            match rep {
                1 | 2 => {
                    left.pop();
                }
                3 | 4 => {
                    right.pop();
                }
                _ => {}
            }
            out.push(TrialSpec {
                index: out.len(),
                primitive: RobotPrimitive::Pull(d),
                repetition: rep,
                scene: Scene::PullChips { left: left.clone(), right: right.clone() },
            });
        }
    }
    // Put-down trials reuse the first five pickups of a side, show trials
    // the last five.
    for (prim_of, offset) in [(RobotPrimitive::PutDown as fn(Side) -> RobotPrimitive, 0), (RobotPrimitive::Show, 5)] {
        for side in Side::BOTH {
            for rep in 0..5 {
                out.push(TrialSpec {
                    index: out.len(),
                    primitive: prim_of(side),
                    repetition: rep as u32,
                    scene: Scene::HeldCard { side, source: pickup_index[side.index()][offset + rep] },
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub primitive: RobotPrimitive,
    pub level: OutcomeLevel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateReport {
    pub counts: OutcomeCounts,
    pub n: u64,
    pub spsr: Tenths,
    pub tcr: Tenths,
}

impl RateReport {
    pub fn from_counts(counts: OutcomeCounts) -> Option<RateReport> {
        Some(RateReport {
            counts,
            n: counts.total(),
            spsr: Tenths::round(counts.spsr()?),
            tcr: Tenths::round(counts.tcr()?),
        })
    }
}

impl fmt::Display for RateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.spsr, self.tcr)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchReport {
    pub overall: RateReport,
    pub groups: BTreeMap<PrimitiveGroup, RateReport>,
}

pub fn aggregate_outcomes(log: &[TrialOutcome]) -> Result<BenchReport, BenchError> {
    let mut total = OutcomeCounts::default();
    let mut per_group: BTreeMap<PrimitiveGroup, OutcomeCounts> = BTreeMap::new();
    for o in log {
        total.record(o.level);
        per_group.entry(o.primitive.group()).or_default().record(o.level);
    }
    let overall = RateReport::from_counts(total).ok_or(BenchError::EmptyLog)?;
    let groups = per_group
        .into_iter()
        .filter_map(|(g, c)| RateReport::from_counts(c).map(|r| (g, r)))
        .collect();
    Ok(BenchReport { overall, groups })
}

/// Samples one outcome per trial from its own RNG stream.
pub fn run_primitive_bench(
    schedule: &[TrialSpec],
    profile: &OutcomeProfile,
    seed: u64,
) -> Result<(Vec<TrialOutcome>, BenchReport), BenchError> {
    let log: Vec<TrialOutcome> = schedule
        .iter()
        .map(|spec| {
            let mut rng = trial_rng(seed ^ 0x5eed_b3c4, spec.index as u64);
            TrialOutcome {
                trial: spec.index,
                primitive: spec.primitive,
                level: sample_outcome(spec.primitive, profile, &mut rng),
            }
        })
        .collect();
    let report = aggregate_outcomes(&log)?;
    Ok((log, report))
}

/// A dispatched robot atom. Replayed labels for `call`, `all_in` and
/// `collect_winnings` do not say which denomination moved first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomRef {
    Known(RobotPrimitive),
    UnresolvedPush,
    UnresolvedPull,
}

impl fmt::Display for AtomRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AtomRef::Known(p) => f.write_str(&p.name()),
            AtomRef::UnresolvedPush => f.write_str("push(?)"),
            AtomRef::UnresolvedPull => f.write_str("pull(?)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryEvent {
    pub state_index: u64,
    pub gate: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_primitive: Option<AgentPrimitive>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atom: Option<AtomRef>,
    #[serde(default)]
    pub retry: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl TrajectoryEvent {
    pub fn new(state_index: u64, gate: &str) -> TrajectoryEvent {
        TrajectoryEvent {
            state_index,
            gate: gate.to_string(),
            reason: None,
            agent_primitive: None,
            atom: None,
            retry: false,
            label: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub struct CounterReport {
    #[serde(rename = "States")]
    pub states: u64,
    pub ap: u64,
    pub dpp: u64,
    pub wa: u64,
    pub hl: u64,
    pub rc: u64,
    pub lap: String,
    pub ldp: String,
}

/// Tracks the longest run of consecutive states held by one name.
#[derive(Default)]
struct RunTracker {
    current: Option<(String, u64)>,
    best: Option<(String, u64)>,
}

impl RunTracker {
    fn start(&mut self, name: String) {
        self.close();
        self.current = Some((name, 1));
    }

    fn extend(&mut self) {
        if let Some((_, len)) = &mut self.current {
            *len += 1;
        }
    }

    fn close(&mut self) {
        if let Some((name, len)) = self.current.take() {
            if self.best.as_ref().is_none_or(|(_, b)| len > *b) {
                self.best = Some((name, len));
            }
        }
    }

    fn winner(mut self) -> String {
        self.close();
        self.best.map(|(n, _)| n).unwrap_or_default()
    }
}

pub fn compute_counters(events: &[TrajectoryEvent]) -> Result<CounterReport, BenchError> {
    let mut r = CounterReport::default();
    let mut ap_runs = RunTracker::default();
    let mut atom_runs = RunTracker::default();
    for (i, e) in events.iter().enumerate() {
        if e.state_index != i as u64 {
            return Err(BenchError::NonContiguous { expected: i as u64, found: e.state_index });
        }
        r.states += 1;
        if e.gate == "wait" {
            r.wa += 1;
        }
        if e.retry {
            r.rc += 1;
        }
        if e.atom.is_some() {
            r.dpp += 1;
        }
        match (&e.agent_primitive, e.atom) {
            (Some(ap), atom) => {
                r.ap += 1;
                if matches!(ap, AgentPrimitive::RequestHuman(_)) {
                    r.hl += 1;
                }
                ap_runs.start(ap.kind().to_string() + &arg_suffix(ap));
                match atom {
                    Some(a) => atom_runs.start(a.to_string()),
                    None => atom_runs.close(),
                }
            }
            (None, Some(a)) => {
                ap_runs.extend();
                atom_runs.start(a.to_string());
            }
            (None, None) => {
                ap_runs.extend();
                atom_runs.extend();
            }
        }
    }
    r.lap = ap_runs.winner();
    r.ldp = atom_runs.winner();
    Ok(r)
}

/// Label form used in counter reports: sides are kept, amounts and
/// free-text reasons are dropped.
fn arg_suffix(ap: &AgentPrimitive) -> String {
    match ap {
        AgentPrimitive::ViewCard(s) | AgentPrimitive::ShowCard(s) => format!("({s})"),
        AgentPrimitive::PutDownCard(s, _) => format!("({s})"),
        _ => String::new(),
    }
}

/// The first robot atom an agent primitive dispatches, judged from the
/// label alone.
pub fn first_atom(ap: &AgentPrimitive) -> Option<AtomRef> {
    match ap {
        AgentPrimitive::ViewCard(s) | AgentPrimitive::ShowCard(s) => {
            Some(AtomRef::Known(RobotPrimitive::PickUp(*s)))
        }
        AgentPrimitive::PutDownCard(s, crate::primitives::PlaceFacing::Down) => {
            Some(AtomRef::Known(RobotPrimitive::PutDown(*s)))
        }
        AgentPrimitive::PutDownCard(s, crate::primitives::PlaceFacing::Up) => {
            Some(AtomRef::Known(RobotPrimitive::Show(*s)))
        }
        AgentPrimitive::Raise(amount) => {
            let unbounded = ChipCount::new(u32::MAX / 8, u32::MAX / 8, u32::MAX / 8, u32::MAX / 8);
            let chips = split_chips(*amount, &unbounded).ok()?;
            chips.first().map(|d| AtomRef::Known(RobotPrimitive::Push(*d)))
        }
        AgentPrimitive::Call | AgentPrimitive::AllIn => Some(AtomRef::UnresolvedPush),
        AgentPrimitive::CollectWinnings => Some(AtomRef::UnresolvedPull),
        _ => None,
    }
}

/// Parses one trajectory label into an event at `index`.
pub fn parse_label(index: u64, label: &str) -> Result<TrajectoryEvent, BenchError> {
    let text = label.trim();
    let unknown = || BenchError::UnknownLabel(label.to_string());
    let mut e = TrajectoryEvent::new(index, "");
    e.label = Some(text.to_string());
    if let Some(rest) = text.strip_prefix("cont.") {
        let prim: RobotPrimitive = rest.trim().parse().map_err(|_| unknown())?;
        e.gate = "continue_atom".into();
        e.atom = Some(AtomRef::Known(prim));
        return Ok(e);
    }
    if let Some(reason) = text.strip_prefix("wait(").and_then(|r| r.strip_suffix(')')) {
        if !matches!(reason, "scene" | "acting" | "turn") {
            return Err(unknown());
        }
        e.gate = "wait".into();
        e.reason = Some(reason.to_string());
        return Ok(e);
    }
    match text {
        "cache hole card" => e.gate = "cache_hole_card".into(),
        "verify" => e.gate = "verify".into(),
        "complete" => e.gate = "complete".into(),
        "end" => e.gate = "terminate".into(),
        "retry" => {
            e.gate = "recover_retry".into();
            e.retry = true;
            e.atom = Some(AtomRef::UnresolvedPush);
        }
        _ => {
            let ap: AgentPrimitive = text.parse().map_err(|_| unknown())?;
            if ap == AgentPrimitive::Wait {
                return Err(unknown());
            }
            e.gate = if matches!(ap, AgentPrimitive::RequestHuman(_)) {
                "request_human".into()
            } else {
                "invoke_agent".into()
            };
            e.atom = first_atom(&ap);
            e.agent_primitive = Some(ap);
        }
    }
    Ok(e)
}

/// Parses labelled states and repairs retry atoms to repeat the atom that
/// was last dispatched.
pub fn parse_labels<S: AsRef<str>>(labels: &[S]) -> Result<Vec<TrajectoryEvent>, BenchError> {
    let mut events = Vec::with_capacity(labels.len());
    let mut last_atom = None;
    for (i, l) in labels.iter().enumerate() {
        let mut e = parse_label(i as u64, l.as_ref())?;
        if e.retry {
            e.atom = last_atom.or(e.atom);
        }
        if e.atom.is_some() {
            last_atom = e.atom;
        }
        events.push(e);
    }
    Ok(events)
}

pub fn replay_labels<S: AsRef<str>>(labels: &[S]) -> Result<CounterReport, BenchError> {
    compute_counters(&parse_labels(labels)?)
}

/// Reads a label file: one label per line, blank lines and `#` comments
/// skipped.
pub fn read_label_lines(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

/// Reference counters for the three labeled trajectories, keyed by name.
pub const PUBLISHED_COUNTERS: [(&str, [u64; 6], &str, &str); 3] = [
    ("i", [22, 8, 7, 7, 2, 1], "view_card(L)", "pick_up_left"),
    ("ii", [54, 13, 22, 26, 0, 1], "collect_winnings", "push_100"),
    ("iii", [23, 8, 10, 7, 0, 1], "call", "pick_up_left"),
];

pub fn published_counters(name: &str) -> Option<CounterReport> {
    PUBLISHED_COUNTERS.iter().find(|(n, ..)| *n == name).map(|(_, c, lap, ldp)| CounterReport {
        states: c[0],
        ap: c[1],
        dpp: c[2],
        wa: c[3],
        hl: c[4],
        rc: c[5],
        lap: lap.to_string(),
        ldp: ldp.to_string(),
    })
}

/// Names of the counters where `got` differs from `want`.
pub fn counter_mismatches(got: &CounterReport, want: &CounterReport) -> Vec<&'static str> {
    let pairs = [
        ("States", got.states == want.states),
        ("AP", got.ap == want.ap),
        ("DPP", got.dpp == want.dpp),
        ("WA", got.wa == want.wa),
        ("HL", got.hl == want.hl),
        ("RC", got.rc == want.rc),
        ("LAP", got.lap == want.lap),
        ("LDP", got.ldp == want.ldp),
    ];
    pairs.into_iter().filter(|(_, ok)| !ok).map(|(n, _)| n).collect()
}
