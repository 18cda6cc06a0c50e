//! Exact-match evaluator for the perception benchmark.
//!
//! A problem directory holds one sub-directory per problem with
//! `problem.json` (`{"id": .., "class": ..}`), `label.json` and
//! `prediction.json`, the latter two being parsed-state documents.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{mean, percent, Rate, Tenths};
use crate::perceiver::{perceive, project_truth, Field, NoiseProfile, ParsedState, ShowdownOutcome};
use crate::tabletop::{new_initial_table, Blind, Denomination, Facing, LoopStage, Side, TableConfig};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no problems to aggregate")]
    EmptyRun,
    #[error("problem `{0}` has no label.json")]
    MissingLabel(String),
    #[error("malformed document {path}: {reason}")]
    MalformedDocument { path: String, reason: String },
    #[error("problem id `{0}` appears more than once")]
    DuplicateId(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemClass {
    TableDecision,
    OutcomeJudge,
    TurnGate,
    RobotProgress,
    HeldCardRead,
    RecoverySafety,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    Parsed(ParsedState),
    /// The prediction failed artifact validation; the reason is kept.
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerceptionProblem {
    pub id: String,
    pub class: ProblemClass,
    pub label: ParsedState,
    pub prediction: Prediction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Correct,
    Incorrect,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnResult {
    pub id: String,
    #[serde(rename = "Overall")]
    pub overall: Verdict,
    pub columns: BTreeMap<Field, Verdict>,
}

impl ColumnResult {
    pub fn verdict(&self, f: Field) -> Verdict {
        self.columns[&f]
    }
}

pub fn applicable_columns(class: ProblemClass, label: &ParsedState) -> Vec<Field> {
    let mut out = vec![Field::LS, Field::TO, Field::BI];
    let bets = matches!(class, ProblemClass::TableDecision | ProblemClass::OutcomeJudge);
    if bets && matches!(label.table.community_cards.len(), 3..=5) {
        out.push(Field::CC);
    }
    if bets {
        out.extend([Field::CB, Field::RCI, Field::OCI]);
    }
    if class == ProblemClass::OutcomeJudge {
        out.push(Field::SO);
    }
    out
}

fn field_matches(f: Field, label: &ParsedState, pred: &ParsedState) -> bool {
    let (l, p) = (&label.table, &pred.table);
    match f {
        Field::LS => label.loop_stage == pred.loop_stage,
        Field::TO => l.is_my_turn == p.is_my_turn,
        Field::BI => label.blind == pred.blind,
        Field::CC => {
            let mut a = l.community_cards.clone();
            let mut b = p.community_cards.clone();
            a.sort();
            b.sort();
            a == b
        }
        Field::CB => l.my_current_bet == p.my_current_bet && l.opponent_bet == p.opponent_bet,
        Field::RCI => l.my_chips == p.my_chips,
        Field::OCI => l.opponent_chips == p.opponent_chips,
        Field::SO => label.showdown_outcome == pred.showdown_outcome,
    }
}

pub fn score_problem(p: &PerceptionProblem) -> ColumnResult {
    let applicable = applicable_columns(p.class, &p.label);
    let pred = match &p.prediction {
        Prediction::Parsed(ps) if ps.validate().is_ok() => Some(ps),
        _ => None,
    };
    let columns: BTreeMap<Field, Verdict> = Field::ALL
        .into_iter()
        .map(|f| {
            let v = if !applicable.contains(&f) {
                Verdict::NotApplicable
            } else if pred.is_some_and(|ps| field_matches(f, &p.label, ps)) {
                Verdict::Correct
            } else {
                Verdict::Incorrect
            };
            (f, v)
        })
        .collect();
    let overall = if columns.values().all(|v| *v != Verdict::Incorrect) {
        Verdict::Correct
    } else {
        Verdict::Incorrect
    };
    ColumnResult { id: p.id.clone(), overall, columns }
}

/// Exact per-run rates; `None` marks a column with no applicable problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunRates {
    pub problems: u64,
    pub overall: Rate,
    pub columns: BTreeMap<Field, Option<Rate>>,
}

impl RunRates {
    pub fn from_results(results: &[ColumnResult]) -> Result<RunRates, EvalError> {
        if results.is_empty() {
            return Err(EvalError::EmptyRun);
        }
        let n = results.len() as u64;
        let overall = percent(results.iter().filter(|r| r.overall == Verdict::Correct).count() as u64, n);
        let columns = Field::ALL
            .into_iter()
            .map(|f| {
                let applicable = results.iter().filter(|r| r.verdict(f) != Verdict::NotApplicable).count();
                let correct = results.iter().filter(|r| r.verdict(f) == Verdict::Correct).count();
                (f, (applicable > 0).then(|| percent(correct as u64, applicable as u64)))
            })
            .collect();
        Ok(RunRates { problems: n, overall, columns })
    }

    /// Unweighted mean over the columns that had applicable problems.
    pub fn avg(&self) -> Rate {
        let present: Vec<Rate> = self.columns.values().flatten().copied().collect();
        mean(&present).unwrap_or_default()
    }

    /// Averages unrounded rates across runs.
    pub fn average(runs: &[RunRates]) -> Result<RunRates, EvalError> {
        let first = runs.first().ok_or(EvalError::EmptyRun)?;
        let overall = mean(&runs.iter().map(|r| r.overall).collect::<Vec<_>>()).expect("non-empty");
        let columns = Field::ALL
            .into_iter()
            .map(|f| {
                let vals: Vec<Rate> = runs.iter().filter_map(|r| r.columns[&f]).collect();
                (f, mean(&vals))
            })
            .collect();
        Ok(RunRates { problems: first.problems, overall, columns })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnStat {
    pub correct: u64,
    pub applicable: u64,
    pub percent: Option<Tenths>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub problems: u64,
    #[serde(rename = "Overall")]
    pub overall: Tenths,
    pub columns: BTreeMap<Field, ColumnStat>,
    #[serde(rename = "Avg")]
    pub avg: Tenths,
    pub results: Vec<ColumnResult>,
}

pub fn aggregate_run(results: &[ColumnResult]) -> Result<RunReport, EvalError> {
    let rates = RunRates::from_results(results)?;
    let columns = Field::ALL
        .into_iter()
        .map(|f| {
            let applicable = results.iter().filter(|r| r.verdict(f) != Verdict::NotApplicable).count() as u64;
            let correct = results.iter().filter(|r| r.verdict(f) == Verdict::Correct).count() as u64;
            (f, ColumnStat { correct, applicable, percent: rates.columns[&f].map(Tenths::round) })
        })
        .collect();
    Ok(RunReport {
        problems: rates.problems,
        overall: Tenths::round(rates.overall),
        columns,
        avg: Tenths::round(rates.avg()),
        results: results.to_vec(),
    })
}

/// Renders one row in column order Overall, LS .. SO, Avg.
pub fn render_rates(name: &str, rates: &RunRates) -> String {
    let mut cells = vec![name.to_string(), Tenths::round(rates.overall).to_string()];
    for f in Field::ALL {
        cells.push(rates.columns[&f].map_or("-".into(), |r| Tenths::round(r).to_string()));
    }
    cells.push(Tenths::round(rates.avg()).to_string());
    cells.join(" | ")
}

pub fn render_header() -> String {
    let mut cells = vec!["Perceiver".to_string(), "Overall".to_string()];
    cells.extend(Field::ALL.iter().map(|f| f.label().to_string()));
    cells.push("Avg".into());
    cells.join(" | ")
}

/// Orders ids like `p2` before `p10`.
pub fn id_order_key(id: &str) -> (String, u64, String) {
    let digits_at = id.find(|c: char| c.is_ascii_digit()).unwrap_or(id.len());
    let (prefix, rest) = id.split_at(digits_at);
    let end = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
    let num = rest[..end].parse().unwrap_or(0);
    (prefix.to_string(), num, rest[end..].to_string())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemMeta {
    id: String,
    class: ProblemClass,
}

fn read_doc<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, EvalError> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| EvalError::MalformedDocument {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

/// Loads every problem under `dir`. In strict mode a missing or malformed
/// prediction is an error; otherwise it is scored as incorrect.
pub fn load_problem_set(dir: &Path, strict: bool) -> Result<Vec<PerceptionProblem>, EvalError> {
    let mut problems = Vec::new();
    let mut ids = BTreeSet::new();
    let mut entries: Vec<_> = fs::read_dir(dir)?
        .filter_map(Result::ok)
        .filter(|e| e.path().is_dir())
        .collect();
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let path = entry.path();
        let meta: ProblemMeta = read_doc(&path.join("problem.json"))?;
        if !ids.insert(meta.id.clone()) {
            return Err(EvalError::DuplicateId(meta.id));
        }
        let label_path = path.join("label.json");
        if !label_path.exists() {
            return Err(EvalError::MissingLabel(meta.id));
        }
        let label: ParsedState = read_doc(&label_path)?;
        label.validate().map_err(|e| EvalError::MalformedDocument {
            path: label_path.display().to_string(),
            reason: e.to_string(),
        })?;
        let pred_path = path.join("prediction.json");
        let prediction = match read_doc::<ParsedState>(&pred_path) {
            Ok(ps) => match ps.validate() {
                Ok(()) => Prediction::Parsed(ps),
                Err(e) if strict => {
                    return Err(EvalError::MalformedDocument {
                        path: pred_path.display().to_string(),
                        reason: e.to_string(),
                    })
                }
                Err(e) => Prediction::Malformed(e.to_string()),
            },
            Err(e) if strict => return Err(e),
            Err(e) => Prediction::Malformed(e.to_string()),
        };
        problems.push(PerceptionProblem { id: meta.id, class: meta.class, label, prediction });
    }
    problems.sort_by_key(|p| id_order_key(&p.id));
    Ok(problems)
}

/// Writes problems in the directory format read by [`load_problem_set`].
pub fn write_problem_set(dir: &Path, problems: &[PerceptionProblem]) -> Result<(), EvalError> {
    for p in problems {
        let sub = dir.join(&p.id);
        fs::create_dir_all(&sub)?;
        let meta = serde_json::json!({ "id": p.id, "class": p.class });
        fs::write(sub.join("problem.json"), crate::codec::encode(&meta))?;
        fs::write(sub.join("label.json"), crate::codec::encode(&p.label))?;
        match &p.prediction {
            Prediction::Parsed(ps) => fs::write(sub.join("prediction.json"), crate::codec::encode(ps))?,
            Prediction::Malformed(raw) => fs::write(sub.join("prediction.json"), raw)?,
        }
    }
    Ok(())
}

/// Class of each of the 36 reference problems, and its board size where the
/// class reads the board.
pub fn reference_layout() -> Vec<(u32, ProblemClass, usize)> {
    use ProblemClass::*;
    let outcome = [19, 23, 30, 31, 32, 33, 36];
    let decision = [9, 11, 13, 14, 18, 20, 26, 27, 35];
    let empty_board = [9, 11, 26];
    let held = [1, 2, 5, 6];
    let progress = [3, 4, 7, 10, 15, 21];
    let turn = [8, 12, 16, 22, 25, 29];
    (1..=36)
        .map(|id| {
            let class = if outcome.contains(&id) {
                OutcomeJudge
            } else if decision.contains(&id) {
                TableDecision
            } else if held.contains(&id) {
                HeldCardRead
            } else if progress.contains(&id) {
                RobotProgress
            } else if turn.contains(&id) {
                TurnGate
            } else {
                RecoverySafety
            };
            let board = match class {
                OutcomeJudge => 5,
                TableDecision if empty_board.contains(&id) => 0,
                TableDecision => [3, 4, 5][id as usize % 3],
                _ => [0, 3, 4, 5][id as usize % 4],
            };
            (id, class, board)
        })
        .collect()
}

fn synthetic_label(id: u32, class: ProblemClass, board: usize, rng: &mut ChaCha8Rng) -> ParsedState {
    let blind = if rng.gen() { Blind::BigBlind } else { Blind::SmallBlind };
    let mut t = new_initial_table(&TableConfig { robot_blind: blind, deck_seed: u64::from(id), ..TableConfig::default() });
    t.community_cards = t.deck.drain(..board).collect();
    for _ in 0..rng.gen_range(1..=4) {
        let d = *Denomination::ALL.choose(rng).expect("non-empty");
        if t.robot_inventory.take(d).is_ok() {
            t.robot_bet_zone.add(d, 1);
        }
        let d = *Denomination::ALL.choose(rng).expect("non-empty");
        if t.opponent_inventory.take(d).is_ok() {
            t.opponent_bet_zone.add(d, 1);
        }
    }
    let (stage, outcome) = match class {
        ProblemClass::OutcomeJudge => {
            if rng.gen() {
                (LoopStage::Win, ShowdownOutcome::Win)
            } else {
                (LoopStage::Lose, ShowdownOutcome::Lose)
            }
        }
        ProblemClass::TableDecision => (LoopStage::Idle, ShowdownOutcome::NotShowdown),
        ProblemClass::TurnGate => {
            t.is_robot_turn = false;
            (LoopStage::Idle, ShowdownOutcome::NotShowdown)
        }
        ProblemClass::RobotProgress => {
            let stage = *[LoopStage::Acting, LoopStage::AtomIdle].choose(rng).expect("non-empty");
            (stage, ShowdownOutcome::NotShowdown)
        }
        ProblemClass::HeldCardRead => {
            if let Some(h) = t.hole_mut(Side::BOTH[(id % 2) as usize]) {
                h.facing = Facing::InHand;
            }
            (LoopStage::AtomIdle, ShowdownOutcome::NotShowdown)
        }
        ProblemClass::RecoverySafety => {
            t.scene_stable = rng.gen();
            let stage = *[LoopStage::ToRecover, LoopStage::Down].choose(rng).expect("non-empty");
            (stage, ShowdownOutcome::NotShowdown)
        }
    };
    project_truth(&t, stage, outcome)
}

/// Synthetic 36-problem set whose class membership follows the reference
/// applicability table; predictions come from the given noise profile.
pub fn reference_problem_set(seed: u64, noise: &NoiseProfile) -> Vec<PerceptionProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    reference_layout()
        .into_iter()
        .map(|(id, class, board)| {
            let label = synthetic_label(id, class, board, &mut rng);
            let prediction = noisy_copy(&label, noise, &mut rng);
            PerceptionProblem { id: format!("p{id}"), class, label, prediction: Prediction::Parsed(prediction) }
        })
        .collect()
}

/// Re-derives a noisy prediction from a label through the perceiver channel.
fn noisy_copy(label: &ParsedState, noise: &NoiseProfile, rng: &mut ChaCha8Rng) -> ParsedState {
    let mut t = new_initial_table(&TableConfig { robot_blind: label.blind, ..TableConfig::default() });
    t.scene_stable = label.table.scene_stable;
    t.is_robot_turn = label.table.is_my_turn;
    t.community_cards = label.table.community_cards.clone();
    t.robot_inventory = label.table.my_chips;
    t.opponent_inventory = label.table.opponent_chips;
    t.robot_bet_zone = label.table.my_current_bet;
    t.opponent_bet_zone = label.table.opponent_bet;
    perceive(&t, label.loop_stage, label.showdown_outcome, noise, rng)
}
