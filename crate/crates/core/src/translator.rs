//! Agent-primitive translation into robot atoms and non-robot steps.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::primitives::{AgentPrimitive, PlaceFacing, RobotPrimitive};
use crate::tabletop::{ChipCount, Denomination, TableState};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TranslateError {
    #[error("{value} is not representable with the available chips")]
    NotRepresentable { value: u32 },
    #[error("{primitive} is not applicable here: {reason}")]
    IllegalPrimitive { primitive: AgentPrimitive, reason: String },
}

/// Fewest chips from `inventory` summing to `delta`, largest first.
///
/// Each denomination divides the next, so bounded greedy from the top is
/// both complete and count-minimal.
pub fn split_chips(delta: u32, inventory: &ChipCount) -> Result<Vec<Denomination>, TranslateError> {
    if !delta.is_multiple_of(5) {
        return Err(TranslateError::NotRepresentable { value: delta });
    }
    let mut rest = delta;
    let mut out = Vec::new();
    for d in Denomination::DESCENDING {
        let n = (rest / d.value()).min(inventory.get(d));
        out.extend(std::iter::repeat_n(d, n as usize));
        rest -= n * d.value();
    }
    if rest != 0 {
        return Err(TranslateError::NotRepresentable { value: delta });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transition {
    /// State-machine sleep until the next capture.
    Sleep,
    /// The fold is recognized from the scene; nothing is manipulated.
    Fold,
    Terminate,
    /// Reset the hand to its home pose.
    ResetHome,
    /// Hand control to a human.
    Down,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Atom(RobotPrimitive),
    Perceive,
    Audio(String),
    Transition(Transition),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomPlan {
    pub origin: AgentPrimitive,
    pub steps: Vec<Step>,
    pub cursor: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Next {
    Step(Step),
    Done,
}

impl AtomPlan {
    pub fn new(origin: AgentPrimitive, steps: Vec<Step>) -> AtomPlan {
        AtomPlan { origin, steps, cursor: 0 }
    }

    /// Returns the step at the cursor and advances past it.
    pub fn next_atom(&mut self) -> Next {
        match self.steps.get(self.cursor) {
            Some(step) => {
                self.cursor += 1;
                Next::Step(step.clone())
            }
            None => Next::Done,
        }
    }

    pub fn peek(&self) -> Option<&Step> {
        self.steps.get(self.cursor)
    }

    pub fn is_complete(&self) -> bool {
        self.cursor >= self.steps.len()
    }

    pub fn atoms(&self) -> impl Iterator<Item = RobotPrimitive> + '_ {
        self.steps.iter().filter_map(|s| match s {
            Step::Atom(a) => Some(*a),
            _ => None,
        })
    }
}

fn pushes(chips: Vec<Denomination>) -> Vec<Step> {
    chips
        .into_iter()
        .map(|d| Step::Atom(RobotPrimitive::Push(d)))
        .collect()
}

/// Translates one agent primitive against the current table.
pub fn translate(p: &AgentPrimitive, s: &TableState) -> Result<AtomPlan, TranslateError> {
    let illegal = |reason: &str| TranslateError::IllegalPrimitive {
        primitive: p.clone(),
        reason: reason.to_string(),
    };
    let atom = |a: RobotPrimitive| Step::Atom(a);
    let my_bet = s.robot_street_bet();
    let steps = match p {
        AgentPrimitive::Wait => vec![Step::Transition(Transition::Sleep)],
        AgentPrimitive::Fold => vec![Step::Transition(Transition::Fold)],
        AgentPrimitive::Stop => vec![Step::Transition(Transition::Terminate)],
        AgentPrimitive::ResetToInit => vec![Step::Transition(Transition::ResetHome)],
        AgentPrimitive::ViewCard(side) => vec![
            atom(RobotPrimitive::PickUp(*side)),
            Step::Perceive,
            atom(RobotPrimitive::PutDown(*side)),
        ],
        AgentPrimitive::ShowCard(side) => vec![
            atom(RobotPrimitive::PickUp(*side)),
            atom(RobotPrimitive::Show(*side)),
        ],
        AgentPrimitive::PutDownCard(side, PlaceFacing::Down) => {
            vec![atom(RobotPrimitive::PutDown(*side))]
        }
        AgentPrimitive::PutDownCard(side, PlaceFacing::Up) => vec![atom(RobotPrimitive::Show(*side))],
        AgentPrimitive::Check => vec![Step::Audio("Check".into())],
        AgentPrimitive::Call => {
            let opp = s.opponent_street_bet();
            if opp <= my_bet {
                return Err(illegal("no outstanding bet to call"));
            }
            pushes(split_chips(opp - my_bet, &s.robot_inventory)?)
        }
        AgentPrimitive::Raise(target) => {
            if *target <= my_bet {
                return Err(illegal("raise target does not exceed the current bet"));
            }
            pushes(split_chips(target - my_bet, &s.robot_inventory)?)
        }
        AgentPrimitive::AllIn => {
            if s.robot_inventory.is_empty() {
                return Err(illegal("no chips left"));
            }
            pushes(s.robot_inventory.to_descending())
        }
        AgentPrimitive::CollectWinnings => {
            let mut steps = Vec::new();
            for d in Denomination::DESCENDING {
                let n = s.robot_bet_zone.get(d) + s.opponent_bet_zone.get(d);
                steps.extend((0..n).map(|_| atom(RobotPrimitive::Pull(d))));
            }
            if steps.is_empty() {
                return Err(illegal("both bet zones are empty"));
            }
            steps
        }
        AgentPrimitive::RequestHuman(reason) => vec![
            Step::Audio(reason.clone()),
            Step::Transition(Transition::Down),
        ],
    };
    Ok(AtomPlan::new(p.clone(), steps))
}
