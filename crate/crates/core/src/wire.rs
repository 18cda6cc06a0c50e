//! Newline-delimited wire protocol for consoles.
//!
//! Every message is one compact JSON document per line carrying `type`,
//! `session_id` and `seq`. Outgoing `seq` values are assigned per session by
//! the server and increase by one, so gaps are detectable by clients.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::mpsc::{channel, Sender};
use std::sync::{Arc, Mutex};
use std::thread;

use serde::{Deserialize, Serialize};

use crate::agents::DecisionRequest;
use crate::primitives::AgentPrimitive;
use crate::router::{Escalation, TerminationCause};
use crate::rules::{opponent_legal, OpponentAction, RulesError};
use crate::session::{Session, SessionConfig, SessionError, StepOutcome};
use crate::tabletop::{Blind, Card, ChipCount, Facing, HandResult, LoopStage, Street, TableState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    UnknownSession,
    OutOfTurn,
    Malformed,
    IllegalAction,
    SessionFinished,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionName {
    Check,
    Call,
    Raise,
    AllIn,
    Fold,
}

/// Table contents anyone at the table can see. Hole cards appear only once
/// they lie face up.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicView {
    pub street: Street,
    pub robot_blind: Blind,
    pub is_robot_turn: bool,
    pub community_cards: Vec<Card>,
    pub robot_chips: ChipCount,
    pub opponent_chips: ChipCount,
    pub robot_bet: ChipCount,
    pub opponent_bet: ChipCount,
    pub robot_hole: [Option<Card>; 2],
    pub opponent_hole: [Option<Card>; 2],
    pub result: Option<HandResult>,
    pub opponent_legal: Vec<OpponentAction>,
}

impl PublicView {
    pub fn of(t: &TableState) -> PublicView {
        let up = |h: Option<crate::tabletop::HoleCard>| h.filter(|h| h.facing == Facing::Up).map(|h| h.card);
        PublicView {
            street: t.street,
            robot_blind: t.blind,
            is_robot_turn: t.is_robot_turn,
            community_cards: t.community_cards.clone(),
            robot_chips: t.robot_inventory,
            opponent_chips: t.opponent_inventory,
            robot_bet: t.robot_bet_zone,
            opponent_bet: t.opponent_bet_zone,
            robot_hole: [up(t.hole_left), up(t.hole_right)],
            opponent_hole: [up(t.opponent_hole[0]), up(t.opponent_hole[1])],
            result: t.result,
            opponent_legal: opponent_legal(t),
        }
    }
}

#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Join {
        session_id: String,
        seq: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        config: Option<SessionConfig>,
    },
    OpponentAction {
        session_id: String,
        seq: u64,
        action: ActionName,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        amount: Option<u32>,
    },
    HumanHelpAck {
        session_id: String,
        seq: u64,
    },
    Subscribe {
        session_id: String,
        seq: u64,
    },
    Resign {
        session_id: String,
        seq: u64,
    },
    StateUpdate {
        session_id: String,
        seq: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        state_index: Option<u64>,
        stage: LoopStage,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gate: Option<String>,
        view: PublicView,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cause: Option<TerminationCause>,
    },
    HumanHelp {
        session_id: String,
        seq: u64,
        reason: Escalation,
        text: String,
    },
    Error {
        session_id: String,
        seq: u64,
        code: ErrorCode,
        message: String,
    },
    DecisionRequest {
        session_id: String,
        seq: u64,
        #[serde(flatten)]
        request: DecisionRequest,
    },
    DecisionReply {
        session_id: String,
        seq: u64,
        primitive: AgentPrimitive,
    },
}

impl Message {
    pub fn session_id(&self) -> &str {
        match self {
            Message::Join { session_id, .. }
            | Message::OpponentAction { session_id, .. }
            | Message::HumanHelpAck { session_id, .. }
            | Message::Subscribe { session_id, .. }
            | Message::Resign { session_id, .. }
            | Message::StateUpdate { session_id, .. }
            | Message::HumanHelp { session_id, .. }
            | Message::Error { session_id, .. }
            | Message::DecisionRequest { session_id, .. }
            | Message::DecisionReply { session_id, .. } => session_id,
        }
    }

    pub fn seq(&self) -> u64 {
        match self {
            Message::Join { seq, .. }
            | Message::OpponentAction { seq, .. }
            | Message::HumanHelpAck { seq, .. }
            | Message::Subscribe { seq, .. }
            | Message::Resign { seq, .. }
            | Message::StateUpdate { seq, .. }
            | Message::HumanHelp { seq, .. }
            | Message::Error { seq, .. }
            | Message::DecisionRequest { seq, .. }
            | Message::DecisionReply { seq, .. } => *seq,
        }
    }

    pub fn encode(&self) -> String {
        crate::codec::encode_line(self)
    }
}

/// Converts the wire form of an opponent move.
pub fn to_opponent_action(action: ActionName, amount: Option<u32>) -> Option<OpponentAction> {
    Some(match (action, amount) {
        (ActionName::Check, None) => OpponentAction::Check,
        (ActionName::Call, None) => OpponentAction::Call,
        (ActionName::Raise, Some(a)) => OpponentAction::Raise(a),
        (ActionName::AllIn, None) => OpponentAction::AllIn,
        (ActionName::Fold, None) => OpponentAction::Fold,
        _ => return None,
    })
}

/// Messages produced by one inbound message.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Replies {
    /// Only for the sender, e.g. errors and join snapshots.
    pub direct: Vec<Message>,
    /// For every subscriber of the session.
    pub broadcast: Vec<Message>,
}

struct Served {
    session: Session,
    seq: u64,
    help_sent: bool,
    finished_sent: bool,
    subscribers: Vec<Sender<String>>,
}

impl Served {
    fn next_seq(&mut self) -> u64 {
        let s = self.seq;
        self.seq += 1;
        s
    }

    fn snapshot(&mut self, id: &str) -> Message {
        let seq = self.next_seq();
        let last = self.session.last_state();
        Message::StateUpdate {
            session_id: id.to_string(),
            seq,
            state_index: last.map(|s| s.state_index),
            stage: self.session.stage(),
            gate: last.map(|s| s.gate.kind().to_string()),
            view: PublicView::of(self.session.truth()),
            cause: self.session.cause(),
        }
    }

    /// Steps until the loop needs outside input, one update per state.
    fn advance(&mut self, id: &str) -> Result<Vec<Message>, SessionError> {
        let mut out = Vec::new();
        loop {
            match self.session.step()? {
                StepOutcome::Captured(snap) => {
                    let seq = self.next_seq();
                    out.push(Message::StateUpdate {
                        session_id: id.to_string(),
                        seq,
                        state_index: Some(snap.state_index),
                        stage: self.session.stage(),
                        gate: Some(snap.gate.kind().to_string()),
                        view: PublicView::of(self.session.truth()),
                        cause: self.session.cause(),
                    });
                }
                StepOutcome::AwaitingHuman => {
                    if !self.help_sent {
                        let reason = self.session.escalated().unwrap_or(Escalation::AgentRequest);
                        let seq = self.next_seq();
                        out.push(Message::HumanHelp {
                            session_id: id.to_string(),
                            seq,
                            reason,
                            text: reason.reason_text().to_string(),
                        });
                        self.help_sent = true;
                    }
                    return Ok(out);
                }
                StepOutcome::AwaitingOpponent => return Ok(out),
                StepOutcome::Finished(_) => {
                    if !self.finished_sent {
                        self.finished_sent = true;
                        let announced = matches!(out.last(), Some(Message::StateUpdate { cause: Some(_), .. }));
                        if !announced {
                            out.push(self.snapshot(id));
                        }
                    }
                    return Ok(out);
                }
            }
        }
    }
}

/// All served sessions. Safe to share between connection threads; every
/// message is processed under one lock, so each session sees a serial
/// stream of events.
pub struct Hub {
    default_config: SessionConfig,
    sessions: Mutex<BTreeMap<String, Served>>,
}

fn error(id: &str, code: ErrorCode, message: impl Into<String>) -> Message {
    Message::Error { session_id: id.to_string(), seq: 0, code, message: message.into() }
}

fn rules_code(e: &SessionError) -> ErrorCode {
    match e {
        SessionError::Rules(RulesError::NotOpponentTurn | RulesError::NotRobotTurn) => ErrorCode::OutOfTurn,
        SessionError::Terminated | SessionError::Rules(RulesError::AlreadySettled) => ErrorCode::SessionFinished,
        SessionError::ConfigUnresolvable(_) => ErrorCode::Malformed,
        _ => ErrorCode::IllegalAction,
    }
}

impl Hub {
    pub fn new(default_config: SessionConfig) -> Hub {
        Hub { default_config, sessions: Mutex::new(BTreeMap::new()) }
    }

    /// Parses and handles one inbound line.
    pub fn handle_line(&self, line: &str) -> Replies {
        match serde_json::from_str::<Message>(line.trim_end()) {
            Ok(msg) => self.handle(msg, None),
            Err(e) => {
                let id = serde_json::from_str::<serde_json::Value>(line)
                    .ok()
                    .and_then(|v| v.get("session_id").and_then(|s| s.as_str()).map(String::from))
                    .unwrap_or_default();
                Replies { direct: vec![error(&id, ErrorCode::Malformed, e.to_string())], broadcast: vec![] }
            }
        }
    }

    /// Handles one message. `subscriber` is registered on join/subscribe.
    pub fn handle(&self, msg: Message, subscriber: Option<Sender<String>>) -> Replies {
        let mut sessions = self.sessions.lock().unwrap_or_else(|p| p.into_inner());
        let id = msg.session_id().to_string();
        let replies = Self::process(&self.default_config, &mut sessions, msg, subscriber);
        Self::publish(&mut sessions, &id, &replies.broadcast);
        replies
    }

    /// Like [`Hub::handle`], but writes the direct replies to `conn` before
    /// any broadcast goes out, so a connection sees its own replies in order.
    /// Broadcasts also go to `conn` unless it is subscribed to the session.
    pub fn handle_from(&self, msg: Message, conn: &Sender<String>, subscribe: bool, subscribed: bool) {
        let mut sessions = self.sessions.lock().unwrap_or_else(|p| p.into_inner());
        let id = msg.session_id().to_string();
        let replies = Self::process(&self.default_config, &mut sessions, msg, subscribe.then(|| conn.clone()));
        for m in &replies.direct {
            let _ = conn.send(m.encode());
        }
        if !subscribed && !subscribe {
            for m in &replies.broadcast {
                let _ = conn.send(m.encode());
            }
        }
        Self::publish(&mut sessions, &id, &replies.broadcast);
    }

    fn publish(sessions: &mut BTreeMap<String, Served>, id: &str, broadcast: &[Message]) {
        let Some(served) = sessions.get_mut(id) else { return };
        for m in broadcast {
            let line = m.encode();
            served.subscribers.retain(|tx| tx.send(line.clone()).is_ok());
        }
    }

    fn process(
        default_config: &SessionConfig,
        sessions: &mut BTreeMap<String, Served>,
        msg: Message,
        subscriber: Option<Sender<String>>,
    ) -> Replies {
        let id = msg.session_id().to_string();
        let mut replies = Replies::default();
        if let Message::Join { config, .. } = &msg {
            if !sessions.contains_key(&id) {
                let mut cfg = config.clone().unwrap_or_else(|| default_config.clone());
                cfg.session_id = id.clone();
                match Session::served(cfg) {
                    Ok(session) => {
                        sessions.insert(
                            id.clone(),
                            Served { session, seq: 0, help_sent: false, finished_sent: false, subscribers: vec![] },
                        );
                    }
                    Err(e) => {
                        replies.direct.push(error(&id, ErrorCode::Malformed, e.to_string()));
                        return replies;
                    }
                }
            }
        }
        let Some(served) = sessions.get_mut(&id) else {
            replies.direct.push(error(&id, ErrorCode::UnknownSession, format!("no session `{id}`")));
            return replies;
        };
        let result: Result<(), SessionError> = match msg {
            Message::Join { .. } | Message::Subscribe { .. } => {
                if let Some(tx) = subscriber {
                    served.subscribers.push(tx);
                }
                replies.direct.push(served.snapshot(&id));
                Ok(())
            }
            Message::OpponentAction { action, amount, .. } => match to_opponent_action(action, amount) {
                None => {
                    replies.direct.push(error(&id, ErrorCode::Malformed, "amount is required for raise only"));
                    return replies;
                }
                Some(a) => served.session.opponent_action(a),
            },
            Message::HumanHelpAck { .. } => {
                if served.session.escalated().is_none() {
                    replies.direct.push(error(&id, ErrorCode::OutOfTurn, "no help request is pending"));
                    return replies;
                }
                served.help_sent = false;
                served.session.human_ack()
            }
            Message::Resign { .. } => served.session.resign(),
            other => {
                let kind = serde_json::to_value(&other).ok().and_then(|v| v["type"].as_str().map(String::from));
                replies.direct.push(error(
                    &id,
                    ErrorCode::Malformed,
                    format!("`{}` is not accepted from clients", kind.unwrap_or_default()),
                ));
                return replies;
            }
        };
        if let Err(e) = result {
            replies.direct.push(error(&id, rules_code(&e), e.to_string()));
            return replies;
        }
        match served.advance(&id) {
            Ok(updates) => replies.broadcast = updates,
            Err(e) => replies.direct.push(error(&id, ErrorCode::IllegalAction, e.to_string())),
        }
        replies
    }
}

fn handle_connection(hub: Arc<Hub>, stream: TcpStream) -> std::io::Result<()> {
    let (tx, rx) = channel::<String>();
    let mut writer = stream.try_clone()?;
    let writer_thread = thread::spawn(move || {
        for line in rx {
            if writer.write_all(line.as_bytes()).is_err() {
                break;
            }
        }
    });
    let mut subscribed = false;
    for line in BufReader::new(stream).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Message>(&line) {
            Ok(msg) => {
                let joins = matches!(msg, Message::Join { .. } | Message::Subscribe { .. });
                let subscribe = joins && !subscribed;
                hub.handle_from(msg, &tx, subscribe, subscribed);
                subscribed |= joins;
            }
            Err(_) => {
                for m in hub.handle_line(&line).direct {
                    let _ = tx.send(m.encode());
                }
            }
        }
    }
    drop(tx);
    let _ = writer_thread.join();
    Ok(())
}

/// Accepts connections until the listener fails; one thread per client.
pub fn serve(listener: TcpListener, hub: Arc<Hub>) -> std::io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let hub = Arc::clone(&hub);
        thread::spawn(move || {
            if let Err(e) = handle_connection(hub, stream) {
                log::warn!("connection closed: {e}");
            }
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::OpponentKind;
    use crate::session::reference_hand_config;

    fn console_config() -> SessionConfig {
        SessionConfig { opponent_agent: OpponentKind::Console, ..reference_hand_config() }
    }

    fn join(hub: &Hub, id: &str) -> Replies {
        hub.handle(Message::Join { session_id: id.into(), seq: 0, config: None }, None)
    }

    #[test]
    fn join_hides_hole_cards() {
        let hub = Hub::new(console_config());
        let r = join(&hub, "a");
        let Message::StateUpdate { view, state_index, .. } = &r.direct[0] else { panic!("{r:?}") };
        assert_eq!(*state_index, None);
        assert_eq!(view.robot_hole, [None, None]);
        assert_eq!(view.opponent_hole, [None, None]);
        // The robot runs until the opponent must answer its blind.
        assert!(!r.broadcast.is_empty());
        let Message::StateUpdate { view, .. } = r.broadcast.last().unwrap() else { panic!() };
        assert!(!view.is_robot_turn);
        let seqs: Vec<u64> = r.direct.iter().chain(&r.broadcast).map(Message::seq).collect();
        assert_eq!(seqs, (0..seqs.len() as u64).collect::<Vec<_>>());
    }

    #[test]
    fn out_of_turn_and_unknown_session() {
        let hub = Hub::new(console_config());
        let r = hub.handle(Message::Resign { session_id: "zz".into(), seq: 1 }, None);
        assert!(matches!(r.direct[0], Message::Error { code: ErrorCode::UnknownSession, .. }));
        // Before the robot has acted the opponent may not move.
        let hub = Hub::new(SessionConfig { max_states: 1, ..console_config() });
        join(&hub, "b");
        let r = hub.handle(
            Message::OpponentAction { session_id: "b".into(), seq: 1, action: ActionName::Raise, amount: Some(20) },
            None,
        );
        assert!(matches!(r.direct[0], Message::Error { code: ErrorCode::OutOfTurn | ErrorCode::SessionFinished, .. }), "{r:?}");
        let r = hub.handle_line("{\"type\":\"join\"");
        assert!(matches!(r.direct[0], Message::Error { code: ErrorCode::Malformed, .. }));
    }

    #[test]
    fn opponent_moves_drive_the_hand() {
        let hub = Hub::new(console_config());
        join(&hub, "c");
        let act = |action, amount| {
            hub.handle(Message::OpponentAction { session_id: "c".into(), seq: 1, action, amount }, None)
        };
        let r = act(ActionName::Call, None);
        assert!(r.direct.is_empty(), "{r:?}");
        let r = act(ActionName::AllIn, None);
        assert!(r.direct.is_empty(), "{r:?}");
        let Message::StateUpdate { cause, view, .. } = r.broadcast.last().unwrap() else { panic!() };
        assert_eq!(*cause, Some(TerminationCause::TerminalOutcome));
        assert!(view.opponent_hole.iter().all(Option::is_some));
    }

    #[test]
    fn human_ack_resumes_after_failure() {
        use crate::policy_sim::{OutcomeProfile, Quad};
        let cfg = SessionConfig {
            custom_profile: Some(OutcomeProfile::uniform(Quad::new(0.0, 0.0, 0.0, 1.0))),
            ..console_config()
        };
        let hub = Hub::new(cfg);
        let r = join(&hub, "d");
        assert!(matches!(r.broadcast.last(), Some(Message::HumanHelp { reason: Escalation::SceneDown, .. })));
        let r = hub.handle(Message::HumanHelpAck { session_id: "d".into(), seq: 2 }, None);
        // The reset loop looks at a card again, fails again and asks again.
        let Message::StateUpdate { gate, .. } = &r.broadcast[0] else { panic!("{r:?}") };
        assert_eq!(gate.as_deref(), Some("force_view"));
        assert!(matches!(r.broadcast.last(), Some(Message::HumanHelp { .. })));
        let hub = Hub::new(console_config());
        join(&hub, "e");
        let r = hub.handle(Message::HumanHelpAck { session_id: "e".into(), seq: 1 }, None);
        assert!(matches!(r.direct[0], Message::Error { code: ErrorCode::OutOfTurn, .. }));
    }
}
