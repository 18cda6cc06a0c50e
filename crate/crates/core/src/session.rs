//! One hand as a closed loop: capture, perceive, route, execute.
//!
//! [`Session`] advances one captured state per [`Session::step`]. Headless
//! runs drive it to termination with [`run_hand`]; the wire server drives it
//! interactively and feeds opponent actions and human acknowledgements in.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{Agent, AgentKind, DecisionRequest, OpponentAgent, OpponentKind, OpponentRequest, Thresholds};
use crate::bench::{compute_counters, AtomRef, CounterReport, TrajectoryEvent};
use crate::perceiver::{named_noise, perceive, project_truth, NoiseProfile, ParsedState, ShowdownOutcome};
use crate::policy_sim::{execute_atom, named_profile, sample_outcome, OutcomeProfile};
use crate::primitives::{AgentPrimitive, RobotPrimitive};
use crate::router::{
    apply_gate, route, verify_post_condition, Budgets, Escalation, Gate, GateEvent, SessionContext, TerminationCause,
};
use crate::rules::{apply_opponent_action, commit_robot_action, legal_actions, opponent_legal, OpponentAction, RulesError};
use crate::tabletop::{
    new_initial_table, Blind, Card, ChipCount, Facing, HandResult, LoopStage, OutcomeLevel, Side, Street, TableConfig,
    TableState,
};
use crate::translator::{translate, AtomPlan, Next, Step, Transition};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("configuration cannot be resolved: {0}")]
    ConfigUnresolvable(String),
    #[error(transparent)]
    Rules(#[from] RulesError),
    #[error(transparent)]
    Router(#[from] crate::router::RouterError),
    #[error(transparent)]
    Translate(#[from] crate::translator::TranslateError),
    #[error("session already terminated")]
    Terminated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Seeds {
    pub deck: u64,
    pub policy: u64,
    pub perceiver: u64,
    pub agent: u64,
    pub opponent: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds { deck: 0, policy: 1, perceiver: 2, agent: 3, opponent: 4 }
    }
}

impl Seeds {
    /// Derives all five seeds from one number.
    pub fn from_master(seed: u64) -> Seeds {
        let s = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        Seeds { deck: s, policy: s ^ 1, perceiver: s ^ 2, agent: s ^ 3, opponent: s ^ 4 }
    }
}

/// How a split pot is labelled on the loop stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieLabel {
    Win,
    Lose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub session_id: String,
    pub seeds: Seeds,
    /// Named outcome profile; ignored when `custom_profile` is set.
    pub outcome_profile: String,
    pub custom_profile: Option<OutcomeProfile>,
    /// Named noise profile; ignored when `custom_noise` is set.
    pub noise_profile: String,
    pub custom_noise: Option<NoiseProfile>,
    pub budgets: Budgets,
    pub robot_agent: AgentKind,
    pub opponent_agent: OpponentKind,
    pub max_states: u32,
    /// Captures spent in `acting` after each dispatched atom.
    pub acting_delay: u32,
    pub tie_label: TieLabel,
    pub table: TableConfig,
    /// Carry inventories from hand to hand in [`run_match`].
    pub carry_over: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            session_id: "s0".into(),
            seeds: Seeds::default(),
            outcome_profile: "all-sp".into(),
            custom_profile: None,
            noise_profile: "clean".into(),
            custom_noise: None,
            budgets: Budgets::default(),
            robot_agent: AgentKind::Heuristic { thresholds: Thresholds::default() },
            opponent_agent: OpponentKind::Heuristic { thresholds: Thresholds::default() },
            max_states: 200,
            acting_delay: 0,
            tie_label: TieLabel::Win,
            table: TableConfig::default(),
            carry_over: false,
        }
    }
}

impl SessionConfig {
    pub fn resolve_profile(&self) -> Result<OutcomeProfile, SessionError> {
        let p = match &self.custom_profile {
            Some(p) => p.clone(),
            None => named_profile(&self.outcome_profile).map_err(|e| SessionError::ConfigUnresolvable(e.to_string()))?,
        };
        p.validate().map_err(|e| SessionError::ConfigUnresolvable(e.to_string()))?;
        Ok(p)
    }

    pub fn resolve_noise(&self) -> Result<NoiseProfile, SessionError> {
        let n = match &self.custom_noise {
            Some(n) => n.clone(),
            None => named_noise(&self.noise_profile).map_err(|e| SessionError::ConfigUnresolvable(e.to_string()))?,
        };
        n.validate().map_err(|e| SessionError::ConfigUnresolvable(e.to_string()))?;
        Ok(n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyLog {
    pub passed: bool,
    /// The same check against the ground truth.
    pub truth_passed: bool,
}

/// Everything captured for one state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub state_index: u64,
    pub stage: LoopStage,
    pub truth: TableState,
    pub parsed: ParsedState,
    pub gate: Gate,
    /// Gate the router would have chosen on a noise-free perception.
    pub clean_gate: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atom: Option<RobotPrimitive>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<OutcomeLevel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyLog>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opponent_action: Option<OpponentAction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub config: SessionConfig,
    pub events: Vec<TrajectoryEvent>,
    pub states: Vec<StateSnapshot>,
    pub counters: CounterReport,
    pub cause: TerminationCause,
    pub result: Option<HandResult>,
}

/// What a step produced, or why no state was captured.
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Captured(Box<StateSnapshot>),
    /// A human must acknowledge before the loop resumes.
    AwaitingHuman,
    /// The opponent seat is remote and it is its move.
    AwaitingOpponent,
    Finished(TerminationCause),
}

enum OpponentSeat {
    Local(Box<OpponentAgent>),
    Remote,
}

pub struct Session {
    cfg: SessionConfig,
    profile: OutcomeProfile,
    noise: NoiseProfile,
    truth: TableState,
    stage: LoopStage,
    ctx: SessionContext,
    agent: Agent,
    opponent: OpponentSeat,
    policy_rng: ChaCha8Rng,
    perceiver_rng: ChaCha8Rng,
    hole_cache: BTreeMap<Side, Card>,
    settle_left: u32,
    acting_left: u32,
    events: Vec<TrajectoryEvent>,
    states: Vec<StateSnapshot>,
    cause: Option<TerminationCause>,
    /// Headless sessions terminate on escalation; served ones pause.
    headless: bool,
}

impl Session {
    pub fn new(cfg: SessionConfig) -> Result<Session, SessionError> {
        Session::build(cfg, true)
    }

    /// A session whose opponent acts through [`Session::opponent_action`]
    /// and whose escalations wait for [`Session::human_ack`].
    pub fn served(cfg: SessionConfig) -> Result<Session, SessionError> {
        Session::build(cfg, false)
    }

    fn build(cfg: SessionConfig, headless: bool) -> Result<Session, SessionError> {
        if cfg.max_states == 0 {
            return Err(SessionError::ConfigUnresolvable("max_states must be at least 1".into()));
        }
        let profile = cfg.resolve_profile()?;
        let noise = cfg.resolve_noise()?;
        let mut table_cfg = cfg.table.clone();
        table_cfg.deck_seed = cfg.seeds.deck;
        let opponent = match (&cfg.opponent_agent, headless) {
            (OpponentKind::Console, false) => OpponentSeat::Remote,
            (kind, _) => OpponentSeat::Local(Box::new(OpponentAgent::new(kind.clone(), cfg.seeds.opponent))),
        };
        Ok(Session {
            profile,
            noise,
            truth: new_initial_table(&table_cfg),
            stage: LoopStage::Idle,
            ctx: SessionContext::default(),
            agent: Agent::new(cfg.robot_agent.clone(), cfg.seeds.agent).for_session(&cfg.session_id),
            opponent,
            policy_rng: ChaCha8Rng::seed_from_u64(cfg.seeds.policy),
            perceiver_rng: ChaCha8Rng::seed_from_u64(cfg.seeds.perceiver),
            hole_cache: BTreeMap::new(),
            settle_left: 0,
            acting_left: 0,
            events: Vec::new(),
            states: Vec::new(),
            cause: None,
            headless,
            cfg,
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    pub fn truth(&self) -> &TableState {
        &self.truth
    }

    pub fn stage(&self) -> LoopStage {
        self.stage
    }

    pub fn cause(&self) -> Option<TerminationCause> {
        self.cause
    }

    pub fn escalated(&self) -> Option<Escalation> {
        self.ctx.escalated
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn last_state(&self) -> Option<&StateSnapshot> {
        self.states.last()
    }

    fn showdown_view(&self) -> (LoopStage, ShowdownOutcome, bool) {
        let tie_stage = match self.cfg.tie_label {
            TieLabel::Win => (LoopStage::Win, ShowdownOutcome::Win),
            TieLabel::Lose => (LoopStage::Lose, ShowdownOutcome::Lose),
        };
        match self.truth.result {
            None => (self.stage, ShowdownOutcome::NotShowdown, false),
            Some(HandResult::Win) => (LoopStage::Win, ShowdownOutcome::Win, false),
            Some(HandResult::Lose) => (LoopStage::Lose, ShowdownOutcome::Lose, false),
            Some(HandResult::Tie) => (tie_stage.0, tie_stage.1, true),
            Some(HandResult::OpponentFolded) => (LoopStage::Win, ShowdownOutcome::NotShowdown, false),
            Some(HandResult::RobotFolded) => (LoopStage::Lose, ShowdownOutcome::NotShowdown, false),
        }
    }

    /// Moves an idle loop to win/lose once the hand has settled.
    fn refresh_stage(&mut self) {
        if matches!(self.stage, LoopStage::Idle | LoopStage::Win | LoopStage::Lose) {
            self.stage = self.showdown_view().0;
        }
    }

    fn outcome_label(&self) -> (ShowdownOutcome, bool) {
        let (_, outcome, tie) = self.showdown_view();
        (outcome, tie)
    }

    fn tick_timers(&mut self) {
        if self.settle_left > 0 {
            self.settle_left -= 1;
            if self.settle_left == 0 {
                self.truth.scene_stable = true;
            }
        }
        if self.acting_left > 0 {
            self.acting_left -= 1;
            if self.acting_left == 0 && self.stage == LoopStage::Acting {
                self.stage = LoopStage::AtomIdle;
            }
        }
    }

    fn legal(&self) -> Vec<AgentPrimitive> {
        legal_actions(&self.truth).unwrap_or_default()
    }

    /// Runs one atom against the simulator and sets the loop stage.
    fn execute(&mut self, atom: RobotPrimitive) -> OutcomeLevel {
        let level = sample_outcome(atom, &self.profile, &mut self.policy_rng);
        match execute_atom(&self.truth, atom, level, self.profile.dc_continuable) {
            Ok((next, stage)) => {
                let moved = next != self.truth;
                self.truth = next;
                self.stage = stage;
                if moved && self.profile.settle_delay > 0 {
                    self.truth.scene_stable = false;
                    self.settle_left = self.profile.settle_delay;
                }
                if stage == LoopStage::AtomIdle && self.cfg.acting_delay > 0 {
                    self.stage = LoopStage::Acting;
                    self.acting_left = self.cfg.acting_delay;
                }
            }
            Err(e) => {
                log::warn!("atom {} could not run: {e}", atom.name());
                self.stage = LoopStage::Down;
            }
        }
        level
    }

    /// Commits a finished plan's poker effect and returns the loop to idle.
    fn commit(&mut self, origin: &AgentPrimitive) -> Result<(), SessionError> {
        if origin.is_betting() || matches!(origin, AgentPrimitive::CollectWinnings | AgentPrimitive::ShowCard(_)) {
            self.truth = commit_robot_action(&self.truth, origin)?;
        }
        if self.stage == LoopStage::AtomIdle {
            self.stage = LoopStage::Idle;
        }
        self.refresh_stage();
        Ok(())
    }

    /// Starts a plan: runs leading non-robot steps, then the first atom.
    fn dispatch(
        &mut self,
        primitive: AgentPrimitive,
        ps: &ParsedState,
        snap_atom: &mut Option<RobotPrimitive>,
        snap_outcome: &mut Option<OutcomeLevel>,
    ) -> Result<GateEvent, SessionError> {
        let mut plan = translate(&primitive, &self.truth)?;
        let atom = self.advance_plan(&mut plan, snap_outcome)?;
        *snap_atom = atom;
        if atom.is_none() && plan.is_complete() {
            self.commit(&primitive)?;
        }
        Ok(GateEvent::Dispatched { plan, atom, baseline: atom.map(|_| ps.clone()) })
    }

    /// Consumes steps up to and including the next atom.
    fn advance_plan(
        &mut self,
        plan: &mut AtomPlan,
        snap_outcome: &mut Option<OutcomeLevel>,
    ) -> Result<Option<RobotPrimitive>, SessionError> {
        loop {
            if plan.peek() == Some(&Step::Perceive) {
                return Ok(None);
            }
            match plan.next_atom() {
                Next::Done => return Ok(None),
                Next::Step(Step::Atom(a)) => {
                    *snap_outcome = Some(self.execute(a));
                    return Ok(Some(a));
                }
                Next::Step(Step::Audio(text)) => log::info!("audio cue: {text}"),
                Next::Step(Step::Perceive) => unreachable!("peeked above"),
                Next::Step(Step::Transition(t)) => match t {
                    Transition::Sleep | Transition::Fold => {}
                    Transition::Terminate => self.ctx.terminal = Some(TerminationCause::HumanRequested),
                    Transition::ResetHome => self.reset_home(),
                    Transition::Down => self.stage = LoopStage::Down,
                },
            }
        }
    }

    fn reset_home(&mut self) {
        for side in Side::BOTH {
            if let Some(h) = self.truth.hole_mut(side) {
                if h.facing == Facing::InHand {
                    h.facing = Facing::Down;
                }
            }
        }
        self.truth.scene_stable = true;
        self.settle_left = 0;
        self.acting_left = 0;
        self.stage = LoopStage::Idle;
        self.refresh_stage();
    }

    fn opponent_request(&self) -> Option<OpponentRequest> {
        let hole = [self.truth.opponent_hole[0]?.card, self.truth.opponent_hole[1]?.card];
        Some(OpponentRequest {
            hole_cards: hole,
            board: self.truth.community_cards.clone(),
            legal: opponent_legal(&self.truth),
            my_bet: self.truth.opponent_street_bet(),
            other_bet: self.truth.robot_street_bet(),
            pot: self.truth.pot_value(),
        })
    }

    fn opponent_to_act(&self) -> bool {
        !self.truth.is_robot_turn && !opponent_legal(&self.truth).is_empty()
    }

    /// Applies an opponent move received from outside.
    pub fn opponent_action(&mut self, action: OpponentAction) -> Result<(), SessionError> {
        if self.cause.is_some() {
            return Err(SessionError::Terminated);
        }
        if !opponent_legal(&self.truth).contains(&action) {
            return Err(if self.truth.is_robot_turn {
                RulesError::NotOpponentTurn.into()
            } else {
                RulesError::Illegal(format!("opponent action {action:?}")).into()
            });
        }
        self.truth = apply_opponent_action(&self.truth, action)?;
        self.refresh_stage();
        Ok(())
    }

    /// Clears an escalation and resumes via reset-to-init.
    pub fn human_ack(&mut self) -> Result<(), SessionError> {
        if self.cause.is_some() {
            return Err(SessionError::Terminated);
        }
        self.ctx.escalated = None;
        self.ctx.plan = None;
        self.ctx.pending_verify = None;
        self.ctx.consecutive_waits = 0;
        self.ctx.retries = 0;
        self.ctx.verify_failures = 0;
        self.reset_home();
        Ok(())
    }

    /// The opponent concedes the hand.
    pub fn resign(&mut self) -> Result<(), SessionError> {
        if opponent_legal(&self.truth).contains(&OpponentAction::Fold) {
            return self.opponent_action(OpponentAction::Fold);
        }
        if self.truth.street == Street::Settled {
            return Err(RulesError::AlreadySettled.into());
        }
        self.truth = crate::rules::settle_pot(&self.truth, HandResult::OpponentFolded)?;
        self.refresh_stage();
        Ok(())
    }

    fn perceive_now(&mut self) -> (ParsedState, ParsedState) {
        let (outcome, tie) = self.outcome_label();
        let mut parsed = perceive(&self.truth, self.stage, outcome, &self.noise, &mut self.perceiver_rng);
        let mut clean = project_truth(&self.truth, self.stage, outcome);
        if tie {
            for ps in [&mut parsed, &mut clean] {
                if !ps.table.uncertain_fields.iter().any(|f| f == "showdown_outcome") {
                    ps.table.uncertain_fields.push("showdown_outcome".into());
                }
            }
        }
        (parsed, clean)
    }

    /// Captures and processes one state.
    pub fn step(&mut self) -> Result<StepOutcome, SessionError> {
        if let Some(cause) = self.cause {
            return Ok(StepOutcome::Finished(cause));
        }
        if self.states.len() as u32 >= self.cfg.max_states {
            self.cause = Some(TerminationCause::StateLimit);
            return Ok(StepOutcome::Finished(TerminationCause::StateLimit));
        }
        if !self.headless {
            if self.ctx.escalated.is_some() {
                return Ok(StepOutcome::AwaitingHuman);
            }
            if matches!(self.opponent, OpponentSeat::Remote) && self.opponent_to_act() {
                return Ok(StepOutcome::AwaitingOpponent);
            }
        }

        let index = self.states.len() as u64;
        let truth_before = self.truth.clone();
        let stage_before = self.stage;
        let (parsed, clean) = self.perceive_now();
        self.tick_timers();
        self.ctx.legal = self.legal();
        let routed = route(&parsed, &self.ctx, &self.cfg.budgets)?;
        let clean_gate = route(&clean, &self.ctx, &self.cfg.budgets)?.gate.kind().to_string();

        let mut event = TrajectoryEvent::new(index, routed.gate.kind());
        let mut atom = None;
        let mut outcome = None;
        let mut verify = None;
        let mut agent_escalation = false;
        let gate_event = match &routed.gate {
            Gate::Wait { reason } => {
                event.reason = Some(serde_json::to_value(reason).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default());
                GateEvent::Observed
            }
            Gate::Verify => {
                let pv = self.ctx.pending_verify.clone().expect("verify gate implies a pending check");
                let passed = verify_post_condition(pv.atom, &pv.baseline, &parsed);
                let truth_base = self.states.iter().rev().find(|s| s.atom == Some(pv.atom)).map(|s| project_truth(&s.truth, s.stage, ShowdownOutcome::NotShowdown));
                let truth_passed = truth_base.is_none_or(|b| verify_post_condition(pv.atom, &b, &clean));
                verify = Some(VerifyLog { passed, truth_passed });
                GateEvent::Verified { passed }
            }
            Gate::Complete => {
                let plan = self.ctx.plan.clone().expect("complete gate implies a plan");
                self.commit(&plan.origin)?;
                GateEvent::Observed
            }
            Gate::ContinueAtom | Gate::CacheHoleCard => {
                let mut plan = self.ctx.plan.clone().expect("continuation implies a plan");
                if routed.gate == Gate::CacheHoleCard {
                    plan.next_atom();
                    if let AgentPrimitive::ViewCard(side) = plan.origin {
                        if let Some(h) = self.truth.hole(side) {
                            self.hole_cache.insert(side, h.card);
                        }
                    }
                }
                let a = if routed.gate == Gate::ContinueAtom {
                    self.advance_plan(&mut plan, &mut outcome)?
                } else {
                    None
                };
                atom = a;
                event.atom = a.map(AtomRef::Known);
                GateEvent::Dispatched { plan, atom: a, baseline: a.map(|_| parsed.clone()) }
            }
            Gate::RecoverRetry => {
                let last = self.ctx.last_atom.expect("retry implies a dispatched atom");
                let plan = self.ctx.plan.clone().unwrap_or_else(|| AtomPlan::new(AgentPrimitive::Wait, vec![]));
                self.stage = LoopStage::AtomIdle;
                outcome = Some(self.execute(last));
                atom = Some(last);
                event.atom = Some(AtomRef::Known(last));
                event.retry = true;
                GateEvent::Dispatched { plan, atom: Some(last), baseline: Some(parsed.clone()) }
            }
            Gate::ForceView { side } => {
                let p = AgentPrimitive::ViewCard(*side);
                let ev = self.dispatch(p.clone(), &parsed, &mut atom, &mut outcome)?;
                event.agent_primitive = Some(p);
                event.atom = atom.map(AtomRef::Known);
                ev
            }
            Gate::InvokeAgent { legal } => {
                let req = DecisionRequest {
                    parsed: parsed.clone(),
                    hole_cards: self.hole_cache.values().copied().collect(),
                    legal: legal.clone(),
                    street: self.truth.street,
                    pot: self.truth.pot_value(),
                };
                let p = self.agent.decide(&req);
                agent_escalation = matches!(p, AgentPrimitive::RequestHuman(_));
                let ev = self.dispatch(p.clone(), &parsed, &mut atom, &mut outcome)?;
                event.agent_primitive = Some(p);
                event.atom = atom.map(AtomRef::Known);
                ev
            }
            Gate::RequestHuman { reason } => {
                let p = AgentPrimitive::RequestHuman(reason.reason_text().into());
                event.reason = Some(escalation_name(*reason));
                let ev = self.dispatch(p.clone(), &parsed, &mut atom, &mut outcome)?;
                event.agent_primitive = Some(p);
                ev
            }
            Gate::Terminate { cause } => {
                event.reason = serde_json::to_value(cause).ok().and_then(|v| v.as_str().map(String::from));
                self.cause = Some(*cause);
                GateEvent::Observed
            }
        };
        let terminal_from_plan = self.ctx.terminal;
        self.ctx = apply_gate(&self.ctx, &routed, gate_event)?;
        if terminal_from_plan.is_some() && self.ctx.terminal.is_none() {
            self.ctx.terminal = terminal_from_plan;
        }
        if agent_escalation {
            self.ctx.escalated = Some(Escalation::AgentRequest);
        }

        let mut opponent_action = None;
        if self.cause.is_none() && self.opponent_to_act() {
            let req = self.opponent_request();
            if let (OpponentSeat::Local(agent), Some(req)) = (&mut self.opponent, req) {
                if let Some(a) = agent.decide(&req) {
                    self.truth = apply_opponent_action(&self.truth, a)?;
                    opponent_action = Some(a);
                }
            }
            self.refresh_stage();
        }

        self.events.push(event);
        let snap = StateSnapshot {
            state_index: index,
            stage: stage_before,
            truth: truth_before,
            parsed,
            gate: routed.gate,
            clean_gate,
            atom,
            outcome,
            verify,
            opponent_action,
        };
        self.states.push(snap.clone());
        Ok(StepOutcome::Captured(Box::new(snap)))
    }

    /// Closes the session and computes its counters.
    pub fn finish(self) -> Result<SessionRecord, SessionError> {
        let counters = compute_counters(&self.events).expect("events are numbered contiguously");
        Ok(SessionRecord {
            config: self.cfg,
            events: self.events,
            states: self.states,
            counters,
            cause: self.cause.unwrap_or(TerminationCause::StateLimit),
            result: self.truth.result,
        })
    }
}

fn escalation_name(e: Escalation) -> String {
    serde_json::to_value(e).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

/// Runs one headless hand to termination.
pub fn run_hand(cfg: &SessionConfig) -> Result<SessionRecord, SessionError> {
    let mut s = Session::new(cfg.clone())?;
    loop {
        if let StepOutcome::Finished(_) = s.step()? {
            break;
        }
    }
    s.finish()
}

/// Plays `hands` hands, alternating blinds. With `carry_over` each hand
/// starts from the previous hand's final inventories.
pub fn run_match(cfg: &SessionConfig, hands: u32) -> Result<Vec<SessionRecord>, SessionError> {
    let mut out = Vec::new();
    let mut cur = cfg.clone();
    for h in 0..hands {
        cur.seeds = Seeds::from_master(cfg.seeds.deck.wrapping_add(u64::from(h)));
        cur.session_id = format!("{}-{h}", cfg.session_id);
        let rec = run_hand(&cur)?;
        let last = rec.states.last().map(|s| s.truth.clone());
        out.push(rec);
        if let (true, Some(t)) = (cfg.carry_over, last) {
            let robot = t.robot_inventory.plus(&t.robot_bet_zone);
            let opponent = t.opponent_inventory.plus(&t.opponent_bet_zone);
            if robot.value() < Blind::BigBlind.amount() || opponent.value() < Blind::BigBlind.amount() {
                break;
            }
            cur.table.robot_chips = robot;
            cur.table.opponent_chips = opponent;
        }
        cur.table.robot_blind = cur.table.robot_blind.other();
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCategory {
    Perception,
    RoutingDecision,
    PolicyExecution,
    Verification,
    DisruptiveScene,
}

/// Attributes each failure in a record to one category.
pub fn classify_failure(rec: &SessionRecord) -> BTreeMap<FailureCategory, u32> {
    let mut out = BTreeMap::new();
    let mut add = |c| *out.entry(c).or_insert(0) += 1;
    for s in &rec.states {
        match s.outcome {
            Some(OutcomeLevel::TF) => add(FailureCategory::PolicyExecution),
            Some(OutcomeLevel::DC | OutcomeLevel::DF) => add(FailureCategory::DisruptiveScene),
            _ => {}
        }
        if let Some(v) = s.verify {
            if v.passed != v.truth_passed {
                add(FailureCategory::Verification);
            }
        }
        if s.gate.kind() != s.clean_gate {
            add(FailureCategory::Perception);
        } else if let Gate::RequestHuman { reason: Escalation::WaitBudget | Escalation::VerifyBudget } = s.gate {
            add(FailureCategory::RoutingDecision);
        }
    }
    out
}

/// The decision list and opponent setup that replays the all-in hand used
/// as the closed-loop reference.
pub fn reference_hand_config() -> SessionConfig {
    use crate::tabletop::Side::{Left, Right};
    SessionConfig {
        robot_agent: AgentKind::Scripted {
            script: vec![
                AgentPrimitive::Raise(10),
                AgentPrimitive::Check,
                AgentPrimitive::Check,
                AgentPrimitive::Call,
                AgentPrimitive::ShowCard(Left),
                AgentPrimitive::ShowCard(Right),
            ],
        },
        opponent_agent: OpponentKind::Scripted { script: vec![OpponentAction::Call, OpponentAction::AllIn] },
        table: TableConfig { opponent_chips: ChipCount::new(2, 0, 0, 2), ..TableConfig::default() },
        ..SessionConfig::default()
    }
}
