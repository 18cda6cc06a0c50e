//! Decision makers for both seats.
//!
//! The robot seat answers [`DecisionRequest`]s with agent primitives; the
//! opponent seat answers with [`OpponentAction`]s that bypass translation.
//! Both share the scripted and threshold-heuristic machinery.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perceiver::ParsedState;
use crate::poker::{check_distinct, evaluate_best, PokerError};
use crate::primitives::AgentPrimitive;
use crate::rules::OpponentAction;
use crate::tabletop::{Card, Street};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("board must hold 0, 3, 4 or 5 cards, got {0}")]
    BoardSize(usize),
    #[error(transparent)]
    Poker(#[from] PokerError),
    #[error("external agent: {0}")]
    External(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRequest {
    pub parsed: ParsedState,
    pub hole_cards: Vec<Card>,
    pub legal: Vec<AgentPrimitive>,
    pub street: Street,
    pub pot: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub fold_below: f64,
    pub raise_at: f64,
    pub all_in_at: f64,
    /// Monte-Carlo samples when exhaustive enumeration is too large.
    pub trials: u32,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { fold_below: 0.3, raise_at: 0.7, all_in_at: 0.95, trials: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentKind {
    Scripted { script: Vec<AgentPrimitive> },
    Heuristic {
        #[serde(default)]
        thresholds: Thresholds,
    },
    External {
        endpoint: String,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
    },
}

fn default_timeout_ms() -> u64 {
    30_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OpponentKind {
    Scripted { script: Vec<OpponentAction> },
    Heuristic {
        #[serde(default)]
        thresholds: Thresholds,
    },
    /// Actions arrive over the wire; headless runs treat it as heuristic.
    Console,
}

/// Win/tie/lose probabilities against one uniformly random opponent hand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equity {
    pub win: f64,
    pub tie: f64,
    pub lose: f64,
}

impl Equity {
    /// Share of the pot expected: wins plus half of ties.
    pub fn strength(&self) -> f64 {
        self.win + self.tie / 2.0
    }
}

/// Largest enumeration handled exactly.
pub const EXHAUSTIVE_LIMIT: u64 = 1_000_000;

fn choose(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of (opponent hand, board completion) pairs for a board size.
pub fn enumeration_size(board_len: usize) -> u64 {
    let unknown = 52 - 2 - board_len as u64;
    choose(unknown, 2) * choose(unknown - 2, 5 - board_len as u64)
}

fn tally(mine: &[Card], theirs: &[Card], board: &[Card], counts: &mut [u64; 3]) {
    let a = evaluate_best(&[mine, board].concat());
    let b = evaluate_best(&[theirs, board].concat());
    counts[match a.cmp(&b) {
        std::cmp::Ordering::Greater => 0,
        std::cmp::Ordering::Equal => 1,
        std::cmp::Ordering::Less => 2,
    }] += 1;
}

fn equity_from(counts: [u64; 3]) -> Equity {
    let n = counts.iter().sum::<u64>() as f64;
    Equity { win: counts[0] as f64 / n, tie: counts[1] as f64 / n, lose: counts[2] as f64 / n }
}

/// Equity of `hole` on `board`; exact when the enumeration fits under
/// [`EXHAUSTIVE_LIMIT`], otherwise `trials` Monte-Carlo samples.
pub fn hand_strength<R: Rng + ?Sized>(
    hole: [Card; 2],
    board: &[Card],
    trials: u32,
    rng: &mut R,
) -> Result<Equity, AgentError> {
    if !matches!(board.len(), 0 | 3 | 4 | 5) {
        return Err(AgentError::BoardSize(board.len()));
    }
    let known: Vec<Card> = hole.iter().chain(board).copied().collect();
    check_distinct(&known)?;
    let rest: Vec<Card> = Card::full_deck().into_iter().filter(|c| !known.contains(c)).collect();
    let mut counts = [0u64; 3];
    if enumeration_size(board.len()) <= EXHAUSTIVE_LIMIT {
        let n = rest.len();
        let mut full = board.to_vec();
        for i in 0..n {
            for j in i + 1..n {
                let opp = [rest[i], rest[j]];
                let remaining: Vec<Card> = rest.iter().copied().filter(|c| !opp.contains(c)).collect();
                match board.len() {
                    5 => tally(&hole, &opp, board, &mut counts),
                    4 => {
                        for c in &remaining {
                            full.truncate(4);
                            full.push(*c);
                            tally(&hole, &opp, &full, &mut counts);
                        }
                    }
                    _ => unreachable!("larger enumerations take the sampling path"),
                }
            }
        }
    } else {
        let mut deck = rest;
        let need = 2 + 5 - board.len();
        let mut full = board.to_vec();
        for _ in 0..trials.max(1) {
            let (drawn, _) = deck.partial_shuffle(rng, need);
            full.truncate(board.len());
            full.extend_from_slice(&drawn[2..]);
            let opp = [drawn[0], drawn[1]];
            tally(&hole, &opp, &full, &mut counts);
        }
    }
    Ok(equity_from(counts))
}

/// Seat-independent betting intent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Intent {
    Fold,
    Passive,
    Raise,
    AllIn,
}

fn intent(strength: f64, facing: bool, th: &Thresholds) -> Intent {
    if strength >= th.all_in_at {
        Intent::AllIn
    } else if strength >= th.raise_at {
        Intent::Raise
    } else if facing && strength < th.fold_below {
        Intent::Fold
    } else {
        Intent::Passive
    }
}

/// Picks the legal raise target closest to `want`, preferring smaller.
fn nearest_raise(targets: impl Iterator<Item = u32>, want: u32) -> Option<u32> {
    targets.min_by_key(|t| (t.abs_diff(want), *t))
}

/// Ordered script with skip-illegal and exhaustion fallback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Script<A> {
    pub entries: Vec<A>,
    pub cursor: usize,
}

impl<A> Default for Script<A> {
    fn default() -> Self {
        Script { entries: Vec::new(), cursor: 0 }
    }
}

impl<A: Clone + PartialEq + std::fmt::Debug> Script<A> {
    pub fn new(entries: Vec<A>) -> Script<A> {
        Script { entries, cursor: 0 }
    }

    /// Next legal entry, skipping illegal ones; `None` once exhausted.
    pub fn next_legal(&mut self, legal: &[A]) -> Option<A> {
        while let Some(e) = self.entries.get(self.cursor).cloned() {
            self.cursor += 1;
            if legal.contains(&e) {
                return Some(e);
            }
            log::warn!("skipping illegal scripted entry {e:?}");
        }
        None
    }
}

/// Robot-seat agent with its own RNG stream and script cursor.
#[derive(Debug, Clone)]
pub struct Agent {
    pub kind: AgentKind,
    script: Script<AgentPrimitive>,
    rng: ChaCha8Rng,
    session_id: String,
    asked: u64,
}

impl Agent {
    pub fn new(kind: AgentKind, seed: u64) -> Agent {
        let script = match &kind {
            AgentKind::Scripted { script } => Script::new(script.clone()),
            _ => Script::default(),
        };
        Agent { kind, script, rng: ChaCha8Rng::seed_from_u64(seed), session_id: String::new(), asked: 0 }
    }

    /// Session id stamped on requests to an external agent.
    pub fn for_session(mut self, session_id: &str) -> Agent {
        self.session_id = session_id.to_string();
        self
    }

    /// Returns a member of `req.legal`, or `request_human` when an external
    /// agent cannot be reached.
    pub fn decide(&mut self, req: &DecisionRequest) -> AgentPrimitive {
        match self.kind.clone() {
            AgentKind::Scripted { .. } => {
                self.script.next_legal(&req.legal).unwrap_or_else(|| fallback(&req.legal))
            }
            AgentKind::Heuristic { thresholds } => heuristic_robot(req, &thresholds, &mut self.rng),
            AgentKind::External { endpoint, timeout_ms } => {
                let seq = self.asked;
                self.asked += 1;
                let msg = ExternalRequest { kind: "decision_request", session_id: &self.session_id, seq, req };
                match ask_external(&endpoint, Duration::from_millis(timeout_ms), &msg) {
                    Ok(p) if req.legal.contains(&p) => p,
                    Ok(p) => {
                        log::warn!("external agent chose illegal {p}");
                        AgentPrimitive::RequestHuman("external agent chose an illegal action".into())
                    }
                    Err(e) => {
                        log::warn!("{e}");
                        AgentPrimitive::RequestHuman("external agent unavailable".into())
                    }
                }
            }
        }
    }
}

/// Exhausted scripts fold when folding is legal, else take the first legal
/// action.
fn fallback(legal: &[AgentPrimitive]) -> AgentPrimitive {
    if legal.contains(&AgentPrimitive::Fold) {
        AgentPrimitive::Fold
    } else {
        legal.first().cloned().unwrap_or(AgentPrimitive::Wait)
    }
}

fn heuristic_robot<R: Rng + ?Sized>(req: &DecisionRequest, th: &Thresholds, rng: &mut R) -> AgentPrimitive {
    let legal = &req.legal;
    if !legal.iter().any(AgentPrimitive::is_betting) {
        return legal.first().cloned().unwrap_or(AgentPrimitive::Wait);
    }
    let table = &req.parsed.table;
    let my_bet = table.my_current_bet.value();
    let opp_bet = table.opponent_bet.value();
    let blind = req.parsed.blind.amount();
    // Blind not yet posted: the only raise on offer is the blind itself.
    if legal.contains(&AgentPrimitive::Raise(blind)) && my_bet == 0 && opp_bet == 0 && req.street == Street::Preflop {
        return AgentPrimitive::Raise(blind);
    }
    let strength = match <[Card; 2]>::try_from(req.hole_cards.as_slice()) {
        Ok(hole) => hand_strength(hole, &table.community_cards, th.trials, rng).map_or(0.5, |e| e.strength()),
        Err(_) => 0.5,
    };
    let facing = legal.contains(&AgentPrimitive::Call) || !legal.contains(&AgentPrimitive::Check);
    let raises = || {
        legal.iter().filter_map(|p| match p {
            AgentPrimitive::Raise(t) => Some(*t),
            _ => None,
        })
    };
    let passive = || {
        [AgentPrimitive::Check, AgentPrimitive::Call]
            .into_iter()
            .find(|p| legal.contains(p))
    };
    let pick = match intent(strength, facing, th) {
        Intent::AllIn if legal.contains(&AgentPrimitive::AllIn) => Some(AgentPrimitive::AllIn),
        Intent::AllIn | Intent::Raise => {
            let want = opp_bet.max(my_bet) + req.pot.max(5) / 5 * 5;
            nearest_raise(raises(), want).map(AgentPrimitive::Raise).or_else(passive)
        }
        Intent::Fold => Some(AgentPrimitive::Fold),
        Intent::Passive => passive(),
    };
    pick.filter(|p| legal.contains(p))
        .or_else(passive)
        .or_else(|| legal.contains(&AgentPrimitive::AllIn).then_some(AgentPrimitive::AllIn))
        .unwrap_or_else(|| fallback(legal))
}

#[derive(Serialize)]
struct ExternalRequest<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    session_id: &'a str,
    seq: u64,
    #[serde(flatten)]
    req: &'a DecisionRequest,
}

#[derive(Deserialize)]
struct ExternalReply {
    #[serde(rename = "type")]
    kind: String,
    session_id: String,
    seq: u64,
    primitive: AgentPrimitive,
}

fn ask_external(endpoint: &str, timeout: Duration, msg: &ExternalRequest) -> Result<AgentPrimitive, AgentError> {
    let err = |e: &dyn std::fmt::Display| AgentError::External(format!("{endpoint}: {e}"));
    let addr = endpoint
        .to_socket_addrs()
        .map_err(|e| err(&e))?
        .next()
        .ok_or_else(|| err(&"no address"))?;
    let mut stream = TcpStream::connect_timeout(&addr, timeout).map_err(|e| err(&e))?;
    stream.set_read_timeout(Some(timeout)).map_err(|e| err(&e))?;
    stream.set_write_timeout(Some(timeout)).map_err(|e| err(&e))?;
    let line = crate::codec::encode_line(msg);
    stream.write_all(line.as_bytes()).map_err(|e| err(&e))?;
    let mut reply = String::new();
    BufReader::new(stream).read_line(&mut reply).map_err(|e| err(&e))?;
    let reply: ExternalReply = serde_json::from_str(&reply).map_err(|e| err(&e))?;
    if reply.kind != "decision_reply" {
        return Err(err(&format!("unexpected message type {}", reply.kind)));
    }
    if (reply.session_id.as_str(), reply.seq) != (msg.session_id, msg.seq) {
        return Err(err(&format!("reply for {}/{} does not answer {}/{}", reply.session_id, reply.seq, msg.session_id, msg.seq)));
    }
    Ok(reply.primitive)
}

/// What the opponent seat sees: its own hole cards and the public table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpponentRequest {
    pub hole_cards: [Card; 2],
    pub board: Vec<Card>,
    pub legal: Vec<OpponentAction>,
    pub my_bet: u32,
    pub other_bet: u32,
    pub pot: u32,
}

#[derive(Debug, Clone)]
pub struct OpponentAgent {
    pub kind: OpponentKind,
    script: Script<OpponentAction>,
    rng: ChaCha8Rng,
}

impl OpponentAgent {
    pub fn new(kind: OpponentKind, seed: u64) -> OpponentAgent {
        let script = match &kind {
            OpponentKind::Scripted { script } => Script::new(script.clone()),
            _ => Script::default(),
        };
        OpponentAgent { kind, script, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn decide(&mut self, req: &OpponentRequest) -> Option<OpponentAction> {
        if req.legal.is_empty() {
            return None;
        }
        let th = match &self.kind {
            OpponentKind::Scripted { .. } => {
                let fold = req.legal.contains(&OpponentAction::Fold).then_some(OpponentAction::Fold);
                return self.script.next_legal(&req.legal).or(fold).or_else(|| req.legal.first().copied());
            }
            OpponentKind::Heuristic { thresholds } => *thresholds,
            OpponentKind::Console => Thresholds::default(),
        };
        let strength = hand_strength(req.hole_cards, &req.board, th.trials, &mut self.rng).map_or(0.5, |e| e.strength());
        let facing = req.other_bet > req.my_bet;
        let passive = if facing { OpponentAction::Call } else { OpponentAction::Check };
        let pick = match intent(strength, facing, &th) {
            Intent::AllIn => OpponentAction::AllIn,
            Intent::Raise => {
                let want = req.other_bet.max(req.my_bet) + req.pot.max(5) / 5 * 5;
                let raises = req.legal.iter().filter_map(|a| match a {
                    OpponentAction::Raise(t) => Some(*t),
                    _ => None,
                });
                nearest_raise(raises, want).map_or(passive, OpponentAction::Raise)
            }
            Intent::Fold => OpponentAction::Fold,
            Intent::Passive => passive,
        };
        if req.legal.contains(&pick) {
            return Some(pick);
        }
        // A call the stack cannot make exactly becomes an all-in call.
        let over_call = (pick == OpponentAction::Call && req.legal.contains(&OpponentAction::AllIn)).then_some(OpponentAction::AllIn);
        Some(over_call.unwrap_or(req.legal[0]))
    }
}
