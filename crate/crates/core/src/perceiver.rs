//! Parsed-state schema, truth projection and the noisy perception channel.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tabletop::{Blind, Card, ChipCount, Denomination, LoopStage, TableState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemaError {
    #[error("community_cards has {0} cards")]
    CommunityLength(usize),
    #[error("card {0} listed twice in community_cards")]
    DuplicateCard(Card),
    #[error("unknown field `{0}` in uncertain_fields")]
    UnknownField(String),
    #[error("unknown noise profile `{0}`")]
    UnknownProfile(String),
    #[error("error rate {0} outside [0, 1]")]
    BadRate(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShowdownOutcome {
    Win,
    Lose,
    NotShowdown,
}

impl ShowdownOutcome {
    pub const ALL: [ShowdownOutcome; 3] =
        [ShowdownOutcome::Win, ShowdownOutcome::Lose, ShowdownOutcome::NotShowdown];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParsedTable {
    pub scene_stable: bool,
    pub is_my_turn: bool,
    pub community_cards: Vec<Card>,
    pub my_chips: ChipCount,
    pub opponent_chips: ChipCount,
    pub my_current_bet: ChipCount,
    pub opponent_bet: ChipCount,
    pub uncertain_fields: Vec<String>,
}

/// The structured visual summary emitted by a perceiver.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParsedState {
    pub loop_stage: LoopStage,
    pub blind: Blind,
    pub showdown_outcome: ShowdownOutcome,
    pub table: ParsedTable,
}

/// Field names that may appear in `uncertain_fields`.
pub const SCHEMA_FIELDS: [&str; 11] = [
    "loop_stage",
    "blind",
    "showdown_outcome",
    "scene_stable",
    "is_my_turn",
    "community_cards",
    "my_chips",
    "opponent_chips",
    "my_current_bet",
    "opponent_bet",
    "uncertain_fields",
];

impl ParsedState {
    pub fn validate(&self) -> Result<(), SchemaError> {
        let cards = &self.table.community_cards;
        if !matches!(cards.len(), 0 | 3 | 4 | 5) {
            return Err(SchemaError::CommunityLength(cards.len()));
        }
        let mut seen = BTreeSet::new();
        for c in cards {
            if !seen.insert(*c) {
                return Err(SchemaError::DuplicateCard(*c));
            }
        }
        for f in &self.table.uncertain_fields {
            if !SCHEMA_FIELDS.contains(&f.as_str()) {
                return Err(SchemaError::UnknownField(f.clone()));
            }
        }
        Ok(())
    }

    pub fn bets_empty(&self) -> bool {
        self.table.my_current_bet.is_empty() && self.table.opponent_bet.is_empty()
    }
}

/// The eight perception challenges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Field {
    LS,
    TO,
    BI,
    CC,
    CB,
    RCI,
    OCI,
    SO,
}

impl Field {
    pub const ALL: [Field; 8] = [
        Field::LS,
        Field::TO,
        Field::BI,
        Field::CC,
        Field::CB,
        Field::RCI,
        Field::OCI,
        Field::SO,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Field::LS => "LS",
            Field::TO => "TO",
            Field::BI => "BI",
            Field::CC => "CC",
            Field::CB => "CB",
            Field::RCI => "RCI",
            Field::OCI => "OCI",
            Field::SO => "SO",
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Faithful projection of the ground truth; hole cards are never included.
pub fn project_truth(truth: &TableState, stage: LoopStage, outcome: ShowdownOutcome) -> ParsedState {
    ParsedState {
        loop_stage: stage,
        blind: truth.blind,
        showdown_outcome: outcome,
        table: ParsedTable {
            scene_stable: truth.scene_stable,
            is_my_turn: truth.is_robot_turn,
            community_cards: truth.community_cards.clone(),
            my_chips: truth.robot_inventory,
            opponent_chips: truth.opponent_inventory,
            my_current_bet: truth.robot_bet_zone,
            opponent_bet: truth.opponent_bet_zone,
            uncertain_fields: Vec::new(),
        },
    }
}

/// Per-field error rates, indexed like [`Field::ALL`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    pub ls: f64,
    pub to: f64,
    pub bi: f64,
    pub cc: f64,
    pub cb: f64,
    pub rci: f64,
    pub oci: f64,
    pub so: f64,
    /// List corrupted fields in `uncertain_fields`.
    #[serde(default)]
    pub self_aware: bool,
}

/// Field-wise accuracies (LS, TO, BI, CC, CB, RCI, OCI, SO) per perceiver.
pub const PERCEIVER_ACCURACIES: [(&str, [f64; 8]); 8] = [
    ("gpt55", [72.2, 80.6, 100.0, 61.5, 45.8, 62.5, 35.4, 76.2]),
    ("gpt54", [65.7, 93.5, 100.0, 23.1, 31.2, 56.2, 18.8, 47.6]),
    ("gpt54mini", [56.5, 94.4, 99.1, 33.3, 14.6, 29.2, 18.8, 47.6]),
    ("opus47", [43.5, 93.5, 100.0, 43.6, 31.2, 37.5, 43.8, 0.0]),
    ("sonnet46", [46.3, 88.0, 100.0, 23.1, 10.4, 29.2, 22.9, 14.3]),
    ("haiku45", [47.2, 68.5, 91.7, 35.9, 12.5, 25.0, 18.8, 0.0]),
    ("gemini3flash", [63.9, 77.8, 100.0, 28.2, 18.8, 29.2, 22.9, 71.4]),
    ("gemini31flashlite", [27.8, 73.1, 94.4, 28.2, 12.5, 22.9, 14.6, 0.0]),
];

impl NoiseProfile {
    pub fn clean() -> NoiseProfile {
        NoiseProfile::from_rates([0.0; 8])
    }

    pub fn from_rates(r: [f64; 8]) -> NoiseProfile {
        NoiseProfile {
            ls: r[0],
            to: r[1],
            bi: r[2],
            cc: r[3],
            cb: r[4],
            rci: r[5],
            oci: r[6],
            so: r[7],
            self_aware: false,
        }
    }

    pub fn only(field: Field, rate: f64) -> NoiseProfile {
        let mut r = [0.0; 8];
        r[Field::ALL.iter().position(|&f| f == field).unwrap()] = rate;
        NoiseProfile::from_rates(r)
    }

    pub fn rate(&self, field: Field) -> f64 {
        match field {
            Field::LS => self.ls,
            Field::TO => self.to,
            Field::BI => self.bi,
            Field::CC => self.cc,
            Field::CB => self.cb,
            Field::RCI => self.rci,
            Field::OCI => self.oci,
            Field::SO => self.so,
        }
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        for f in Field::ALL {
            let r = self.rate(f);
            if !(0.0..=1.0).contains(&r) {
                return Err(SchemaError::BadRate(r));
            }
        }
        Ok(())
    }
}

pub fn noise_profile_names() -> Vec<String> {
    std::iter::once("clean".to_string())
        .chain(PERCEIVER_ACCURACIES.iter().map(|(n, _)| format!("{n}-like")))
        .collect()
}

/// `clean`, or `<perceiver>-like` with rate = 1 − accuracy/100 per field.
pub fn named_noise(name: &str) -> Result<NoiseProfile, SchemaError> {
    if name == "clean" {
        return Ok(NoiseProfile::clean());
    }
    let base = name
        .strip_suffix("-like")
        .ok_or_else(|| SchemaError::UnknownProfile(name.to_string()))?;
    let (_, acc) = PERCEIVER_ACCURACIES
        .iter()
        .find(|(n, _)| *n == base)
        .ok_or_else(|| SchemaError::UnknownProfile(name.to_string()))?;
    Ok(NoiseProfile::from_rates(acc.map(|a| 1.0 - a / 100.0)))
}

/// ±1 on one uniformly chosen denomination; a decrement that would go below
/// zero becomes an increment so the map always changes.
pub fn perturb_chips<R: Rng + ?Sized>(c: &ChipCount, rng: &mut R) -> ChipCount {
    let mut out = *c;
    let d = Denomination::ALL[rng.gen_range(0..4)];
    let up: bool = rng.gen();
    let n = out.get(d);
    if up || n == 0 {
        out.set(d, n + 1);
    } else {
        out.set(d, n - 1);
    }
    out
}

fn unused_card<R: Rng + ?Sized>(used: &[Card], rng: &mut R) -> Card {
    let pool: Vec<Card> = Card::full_deck().into_iter().filter(|c| !used.contains(c)).collect();
    *pool.choose(rng).expect("at most five cards are in use")
}

/// Changes the board while keeping it schema-valid.
pub fn perturb_board<R: Rng + ?Sized>(cards: &[Card], rng: &mut R) -> Vec<Card> {
    let mut out = cards.to_vec();
    let replace = |out: &mut Vec<Card>, rng: &mut R| {
        let i = rng.gen_range(0..out.len());
        let c = unused_card(out, rng);
        out[i] = c;
    };
    match out.len() {
        0 => {
            for _ in 0..3 {
                let c = unused_card(&out, rng);
                out.push(c);
            }
        }
        3 => {
            if rng.gen() {
                let c = unused_card(&out, rng);
                out.push(c);
            } else {
                replace(&mut out, rng);
            }
        }
        4 => match rng.gen_range(0..3) {
            0 => {
                let c = unused_card(&out, rng);
                out.push(c);
            }
            1 => {
                let i = rng.gen_range(0..out.len());
                out.remove(i);
            }
            _ => replace(&mut out, rng),
        },
        _ => {
            if rng.gen() {
                let i = rng.gen_range(0..out.len());
                out.remove(i);
            } else {
                replace(&mut out, rng);
            }
        }
    }
    out
}

fn other_value<T: Copy + PartialEq, R: Rng + ?Sized>(all: &[T], current: T, rng: &mut R) -> T {
    let others: Vec<T> = all.iter().copied().filter(|v| *v != current).collect();
    *others.choose(rng).expect("domain has at least two values")
}

/// Projects the truth, then corrupts each field independently.
pub fn perceive<R: Rng + ?Sized>(
    truth: &TableState,
    stage: LoopStage,
    outcome: ShowdownOutcome,
    noise: &NoiseProfile,
    rng: &mut R,
) -> ParsedState {
    let mut ps = project_truth(truth, stage, outcome);
    let mut flagged: Vec<&str> = Vec::new();
    for field in Field::ALL {
        let rate = noise.rate(field);
        if rate <= 0.0 || rng.gen::<f64>() >= rate {
            continue;
        }
        match field {
            Field::LS => {
                ps.loop_stage = other_value(&LoopStage::ALL, ps.loop_stage, rng);
                flagged.push("loop_stage");
            }
            Field::TO => {
                ps.table.is_my_turn = !ps.table.is_my_turn;
                flagged.push("is_my_turn");
            }
            Field::BI => {
                ps.blind = ps.blind.other();
                flagged.push("blind");
            }
            Field::CC => {
                ps.table.community_cards = perturb_board(&ps.table.community_cards, rng);
                flagged.push("community_cards");
            }
            Field::CB => {
                if rng.gen() {
                    ps.table.my_current_bet = perturb_chips(&ps.table.my_current_bet, rng);
                    flagged.push("my_current_bet");
                } else {
                    ps.table.opponent_bet = perturb_chips(&ps.table.opponent_bet, rng);
                    flagged.push("opponent_bet");
                }
            }
            Field::RCI => {
                ps.table.my_chips = perturb_chips(&ps.table.my_chips, rng);
                flagged.push("my_chips");
            }
            Field::OCI => {
                ps.table.opponent_chips = perturb_chips(&ps.table.opponent_chips, rng);
                flagged.push("opponent_chips");
            }
            Field::SO => {
                ps.showdown_outcome = other_value(&ShowdownOutcome::ALL, ps.showdown_outcome, rng);
                flagged.push("showdown_outcome");
            }
        }
    }
    if noise.self_aware {
        ps.table.uncertain_fields = flagged.into_iter().map(String::from).collect();
    }
    ps
}
