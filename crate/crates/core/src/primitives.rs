//! The two primitive vocabularies: 14 robot atoms and 13 agent primitives.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::tabletop::{Denomination, Side};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PrimitiveError {
    #[error("unknown robot primitive `{0}`")]
    UnknownRobot(String),
    #[error("unknown agent primitive `{0}`")]
    UnknownAgent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RobotPrimitive {
    PickUp(Side),
    Push(Denomination),
    Pull(Denomination),
    PutDown(Side),
    Show(Side),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveGroup {
    Pickup,
    Push,
    Pull,
    PutDownShow,
}

impl PrimitiveGroup {
    pub const ALL: [PrimitiveGroup; 4] = [
        PrimitiveGroup::Pickup,
        PrimitiveGroup::Push,
        PrimitiveGroup::Pull,
        PrimitiveGroup::PutDownShow,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PrimitiveGroup::Pickup => "pickup",
            PrimitiveGroup::Push => "push",
            PrimitiveGroup::Pull => "pull",
            PrimitiveGroup::PutDownShow => "put_down_show",
        }
    }
}

impl RobotPrimitive {
    pub const COUNT: u8 = 14;

    pub fn all() -> impl Iterator<Item = RobotPrimitive> {
        (0..Self::COUNT).map(|id| RobotPrimitive::from_id(id).expect("id in range"))
    }

    pub fn id(self) -> u8 {
        let d = |d: Denomination| Denomination::ALL.iter().position(|&x| x == d).unwrap() as u8;
        match self {
            RobotPrimitive::PickUp(s) => s.index() as u8,
            RobotPrimitive::Push(x) => 2 + d(x),
            RobotPrimitive::Pull(x) => 6 + d(x),
            RobotPrimitive::PutDown(s) => 10 + s.index() as u8,
            RobotPrimitive::Show(s) => 12 + s.index() as u8,
        }
    }

    pub fn from_id(id: u8) -> Option<RobotPrimitive> {
        let side = |i: u8| Side::BOTH[i as usize];
        Some(match id {
            0 | 1 => RobotPrimitive::PickUp(side(id)),
            2..=5 => RobotPrimitive::Push(Denomination::ALL[(id - 2) as usize]),
            6..=9 => RobotPrimitive::Pull(Denomination::ALL[(id - 6) as usize]),
            10 | 11 => RobotPrimitive::PutDown(side(id - 10)),
            12 | 13 => RobotPrimitive::Show(side(id - 12)),
            _ => return None,
        })
    }

    pub fn name(self) -> String {
        let side = |s: Side| match s {
            Side::Left => "left",
            Side::Right => "right",
        };
        match self {
            RobotPrimitive::PickUp(s) => format!("pick_up_{}", side(s)),
            RobotPrimitive::Push(d) => format!("push_{d}"),
            RobotPrimitive::Pull(d) => format!("pull_{d}"),
            RobotPrimitive::PutDown(s) => format!("put_down_{}", side(s)),
            RobotPrimitive::Show(s) => format!("show_{}", side(s)),
        }
    }

    /// Language instruction given to the dexterous policy.
    pub fn instruction(self) -> String {
        let side = |s: Side| match s {
            Side::Left => "left",
            Side::Right => "right",
        };
        match self {
            RobotPrimitive::PickUp(s) => format!("Pick up the card on the {} side.", side(s)),
            RobotPrimitive::Push(d) => format!("Push forward the chips worth {d}."),
            RobotPrimitive::Pull(d) => format!("Pull back the chips worth {d}."),
            RobotPrimitive::PutDown(s) => {
                format!("Place the held card onto the {} position.", side(s))
            }
            RobotPrimitive::Show(s) => format!("Reveal the face of the {} card.", side(s)),
        }
    }

    pub fn group(self) -> PrimitiveGroup {
        match self {
            RobotPrimitive::PickUp(_) => PrimitiveGroup::Pickup,
            RobotPrimitive::Push(_) => PrimitiveGroup::Push,
            RobotPrimitive::Pull(_) => PrimitiveGroup::Pull,
            RobotPrimitive::PutDown(_) | RobotPrimitive::Show(_) => PrimitiveGroup::PutDownShow,
        }
    }
}

impl fmt::Display for RobotPrimitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for RobotPrimitive {
    type Err = PrimitiveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RobotPrimitive::all()
            .find(|p| p.name() == s)
            .ok_or_else(|| PrimitiveError::UnknownRobot(s.to_string()))
    }
}

impl Serialize for RobotPrimitive {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for RobotPrimitive {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaceFacing {
    Up,
    Down,
}

/// High-level actions available to the main agent.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AgentPrimitive {
    Wait,
    Fold,
    Stop,
    ResetToInit,
    ViewCard(Side),
    ShowCard(Side),
    PutDownCard(Side, PlaceFacing),
    Check,
    Call,
    /// Target total street bet for the robot.
    Raise(u32),
    AllIn,
    CollectWinnings,
    RequestHuman(String),
}

impl AgentPrimitive {
    /// Bare primitive name without arguments.
    pub fn kind(&self) -> &'static str {
        match self {
            AgentPrimitive::Wait => "wait",
            AgentPrimitive::Fold => "fold",
            AgentPrimitive::Stop => "stop",
            AgentPrimitive::ResetToInit => "reset_to_init",
            AgentPrimitive::ViewCard(_) => "view_card",
            AgentPrimitive::ShowCard(_) => "show_card",
            AgentPrimitive::PutDownCard(..) => "put_down_card",
            AgentPrimitive::Check => "check",
            AgentPrimitive::Call => "call",
            AgentPrimitive::Raise(_) => "raise",
            AgentPrimitive::AllIn => "all_in",
            AgentPrimitive::CollectWinnings => "collect_winnings",
            AgentPrimitive::RequestHuman(_) => "request_human",
        }
    }

    pub fn is_betting(&self) -> bool {
        matches!(
            self,
            AgentPrimitive::Check
                | AgentPrimitive::Call
                | AgentPrimitive::Raise(_)
                | AgentPrimitive::AllIn
                | AgentPrimitive::Fold
        )
    }
}

impl fmt::Display for AgentPrimitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentPrimitive::ViewCard(s) => write!(f, "view_card({s})"),
            AgentPrimitive::ShowCard(s) => write!(f, "show_card({s})"),
            AgentPrimitive::PutDownCard(s, PlaceFacing::Up) => write!(f, "put_down_card({s},up)"),
            AgentPrimitive::PutDownCard(s, PlaceFacing::Down) => {
                write!(f, "put_down_card({s},down)")
            }
            AgentPrimitive::Raise(a) => write!(f, "raise({a})"),
            AgentPrimitive::RequestHuman(reason) => write!(f, "request_human({reason})"),
            other => f.write_str(other.kind()),
        }
    }
}

fn parse_side(s: &str) -> Option<Side> {
    match s.trim() {
        "L" | "l" | "left" => Some(Side::Left),
        "R" | "r" | "right" => Some(Side::Right),
        _ => None,
    }
}

impl FromStr for AgentPrimitive {
    type Err = PrimitiveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PrimitiveError::UnknownAgent(s.to_string());
        let text = s.trim();
        let (name, arg) = match text.split_once('(') {
            Some((name, rest)) => (name.trim(), Some(rest.strip_suffix(')').ok_or_else(bad)?)),
            None => (text, None),
        };
        let p = match (name, arg) {
            ("wait", None) => AgentPrimitive::Wait,
            ("fold", None) => AgentPrimitive::Fold,
            ("stop", None) => AgentPrimitive::Stop,
            ("reset_to_init", None) => AgentPrimitive::ResetToInit,
            ("check", None) => AgentPrimitive::Check,
            ("call", None) => AgentPrimitive::Call,
            ("all_in", None) => AgentPrimitive::AllIn,
            ("collect_winnings", None) => AgentPrimitive::CollectWinnings,
            ("view_card", Some(a)) => AgentPrimitive::ViewCard(parse_side(a).ok_or_else(bad)?),
            ("show_card", Some(a)) => AgentPrimitive::ShowCard(parse_side(a).ok_or_else(bad)?),
            ("put_down_card", Some(a)) => {
                let (side, facing) = a.split_once(',').ok_or_else(bad)?;
                let facing = match facing.trim() {
                    "up" => PlaceFacing::Up,
                    "down" => PlaceFacing::Down,
                    _ => return Err(bad()),
                };
                AgentPrimitive::PutDownCard(parse_side(side).ok_or_else(bad)?, facing)
            }
            ("raise", Some(a)) => AgentPrimitive::Raise(a.trim().parse().map_err(|_| bad())?),
            ("request_human", Some(a)) => AgentPrimitive::RequestHuman(a.to_string()),
            ("request_human", None) => AgentPrimitive::RequestHuman(String::new()),
            _ => return Err(bad()),
        };
        Ok(p)
    }
}

impl Serialize for AgentPrimitive {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AgentPrimitive {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}
