//! Rule-based per-state router.
//!
//! [`route`] is a pure, ordered decision procedure over the parsed state and
//! the session context; [`apply_gate`] folds the result back into the context.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perceiver::{ParsedState, SchemaError};
use crate::primitives::{AgentPrimitive, RobotPrimitive};
use crate::tabletop::{LoopStage, Side};
use crate::translator::{AtomPlan, Step};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RouterError {
    #[error("parsed state is not schema-valid: {0}")]
    SchemaInvalid(#[from] SchemaError),
    #[error("gate was routed at generation {routed}, context is at {current}")]
    StaleContext { routed: u64, current: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaitReason {
    Scene,
    Acting,
    Turn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationCause {
    TerminalOutcome,
    SceneUnusable,
    BudgetExhausted,
    HumanRequested,
    StateLimit,
}

/// Why a human was asked for help; decides the later termination cause.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Escalation {
    SceneDown,
    WaitBudget,
    RetryBudget,
    VerifyBudget,
    AgentRequest,
}

impl Escalation {
    pub fn reason_text(self) -> &'static str {
        match self {
            Escalation::SceneDown => "scene needs a reset",
            Escalation::WaitBudget => "scene did not settle within the wait budget",
            Escalation::RetryBudget => "retry budget exhausted",
            Escalation::VerifyBudget => "post-condition could not be verified",
            Escalation::AgentRequest => "agent requested help",
        }
    }

    pub fn termination(self) -> TerminationCause {
        match self {
            Escalation::SceneDown => TerminationCause::SceneUnusable,
            Escalation::WaitBudget | Escalation::RetryBudget | Escalation::VerifyBudget => {
                TerminationCause::BudgetExhausted
            }
            Escalation::AgentRequest => TerminationCause::HumanRequested,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gate {
    Wait { reason: WaitReason },
    Verify,
    Complete,
    ContinueAtom,
    /// The pending step is a perceive inside view_card: record the held card.
    CacheHoleCard,
    RecoverRetry,
    /// First action of a fresh game is always a look at an unviewed card.
    ForceView { side: Side },
    InvokeAgent { legal: Vec<AgentPrimitive> },
    RequestHuman { reason: Escalation },
    Terminate { cause: TerminationCause },
}

impl Gate {
    pub fn kind(&self) -> &'static str {
        match self {
            Gate::Wait { .. } => "wait",
            Gate::Verify => "verify",
            Gate::Complete => "complete",
            Gate::ContinueAtom => "continue_atom",
            Gate::CacheHoleCard => "cache_hole_card",
            Gate::RecoverRetry => "recover_retry",
            Gate::ForceView { .. } => "force_view",
            Gate::InvokeAgent { .. } => "invoke_agent",
            Gate::RequestHuman { .. } => "request_human",
            Gate::Terminate { .. } => "terminate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budgets {
    pub wait_budget: u32,
    pub retry_budget: u32,
    /// Failed verifications tolerated before escalation.
    pub verify_budget: u32,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets { wait_budget: 4, retry_budget: 1, verify_budget: 2 }
    }
}

/// Post-condition baseline captured when an atom is dispatched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingVerify {
    pub atom: RobotPrimitive,
    pub baseline: ParsedState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionContext {
    pub generation: u64,
    pub plan: Option<AtomPlan>,
    pub last_atom: Option<RobotPrimitive>,
    pub pending_verify: Option<PendingVerify>,
    pub consecutive_waits: u32,
    pub retries: u32,
    pub verify_failures: u32,
    pub fresh_game: bool,
    pub viewed: [bool; 2],
    pub escalated: Option<Escalation>,
    pub terminal: Option<TerminationCause>,
    /// Legal robot primitives, supplied by the session from the rules.
    pub legal: Vec<AgentPrimitive>,
}

impl Default for SessionContext {
    fn default() -> Self {
        SessionContext {
            generation: 0,
            plan: None,
            last_atom: None,
            pending_verify: None,
            consecutive_waits: 0,
            retries: 0,
            verify_failures: 0,
            fresh_game: true,
            viewed: [false, false],
            escalated: None,
            terminal: None,
            legal: Vec::new(),
        }
    }
}

impl SessionContext {
    pub fn has_pending_steps(&self) -> bool {
        self.plan.as_ref().is_some_and(|p| !p.is_complete())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Routed {
    pub gate: Gate,
    pub generation: u64,
}

/// Chooses exactly one gate for a captured state.
pub fn route(ps: &ParsedState, ctx: &SessionContext, budgets: &Budgets) -> Result<Routed, RouterError> {
    ps.validate()?;
    Ok(Routed { gate: decide(ps, ctx, budgets), generation: ctx.generation })
}

fn decide(ps: &ParsedState, ctx: &SessionContext, budgets: &Budgets) -> Gate {
    use Gate::*;
    let stage = ps.loop_stage;
    let table = &ps.table;

    // 1. termination
    if let Some(cause) = ctx.terminal {
        return Terminate { cause };
    }
    if let Some(esc) = ctx.escalated {
        return Terminate { cause: esc.termination() };
    }
    let finished = matches!(stage, LoopStage::Win | LoopStage::Lose);
    if finished && ps.bets_empty() && ctx.plan.is_none() && ctx.pending_verify.is_none() {
        return Terminate { cause: TerminationCause::TerminalOutcome };
    }

    // 2. human help
    if stage == LoopStage::Down {
        return RequestHuman { reason: Escalation::SceneDown };
    }
    if ctx.consecutive_waits >= budgets.wait_budget {
        return RequestHuman { reason: Escalation::WaitBudget };
    }

    // 3. recovery
    if stage == LoopStage::ToRecover {
        return if ctx.last_atom.is_some() && ctx.retries < budgets.retry_budget {
            RecoverRetry
        } else {
            RequestHuman { reason: Escalation::RetryBudget }
        };
    }
    if ctx.verify_failures > budgets.verify_budget {
        return RequestHuman { reason: Escalation::VerifyBudget };
    }

    // 4. waiting
    if stage == LoopStage::Acting {
        return Wait { reason: WaitReason::Acting };
    }
    if !table.scene_stable {
        return Wait { reason: WaitReason::Scene };
    }
    let plan_active = ctx.plan.is_some() || ctx.pending_verify.is_some();
    if !table.is_my_turn && !plan_active && !finished {
        return Wait { reason: WaitReason::Turn };
    }

    // 5. verification and completion
    if ctx.pending_verify.is_some() {
        return Verify;
    }
    if let Some(plan) = &ctx.plan {
        if plan.is_complete() {
            return Complete;
        }
        // 6. continuation
        return match plan.peek() {
            Some(Step::Perceive) => CacheHoleCard,
            _ => ContinueAtom,
        };
    }

    // 7. forced first look
    if ctx.fresh_game && matches!(stage, LoopStage::Idle) {
        for side in Side::BOTH {
            if !ctx.viewed[side.index()] && ctx.legal.contains(&AgentPrimitive::ViewCard(side)) {
                return ForceView { side };
            }
        }
    }

    // 8. agent invocation
    let collecting = stage == LoopStage::Win && !ps.bets_empty();
    if stage == LoopStage::Idle || collecting {
        return if ctx.legal.is_empty() {
            Wait { reason: WaitReason::Turn }
        } else {
            InvokeAgent { legal: ctx.legal.clone() }
        };
    }
    Wait { reason: WaitReason::Acting }
}

/// Observation the session feeds back after acting on a gate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GateEvent {
    /// Nothing beyond the gate itself happened.
    Observed,
    /// Result of a verification against the current parsed state.
    Verified { passed: bool },
    /// A plan was installed or advanced; `atom` is the robot atom dispatched
    /// in this state, with the parsed state it must be verified against.
    Dispatched { plan: AtomPlan, atom: Option<RobotPrimitive>, baseline: Option<ParsedState> },
}

/// Folds a routed gate and its event into the context.
pub fn apply_gate(ctx: &SessionContext, routed: &Routed, event: GateEvent) -> Result<SessionContext, RouterError> {
    if routed.generation != ctx.generation {
        return Err(RouterError::StaleContext { routed: routed.generation, current: ctx.generation });
    }
    let mut next = ctx.clone();
    next.generation += 1;
    match routed.gate {
        Gate::Wait { .. } => next.consecutive_waits += 1,
        _ => next.consecutive_waits = 0,
    }
    match &routed.gate {
        Gate::Terminate { cause } => next.terminal = Some(*cause),
        Gate::RequestHuman { reason } => next.escalated = Some(*reason),
        Gate::Complete => {
            next.plan = None;
            next.pending_verify = None;
        }
        Gate::Verify => {
            if let GateEvent::Verified { passed } = event {
                if passed {
                    next.pending_verify = None;
                    next.verify_failures = 0;
                } else {
                    next.verify_failures += 1;
                }
            }
            return Ok(next);
        }
        _ => {}
    }
    if let GateEvent::Dispatched { plan, atom, baseline } = event {
        if let AgentPrimitive::ViewCard(side) = plan.origin {
            next.viewed[side.index()] = true;
        }
        if next.viewed.iter().all(|v| *v) {
            next.fresh_game = false;
        }
        if routed.gate == Gate::RecoverRetry {
            next.retries += 1;
        } else if atom.is_some() {
            next.retries = 0;
        }
        if let Some(atom) = atom {
            next.last_atom = Some(atom);
            next.pending_verify = baseline.map(|baseline| PendingVerify { atom, baseline });
        }
        let finished_without_atoms = plan.is_complete() && next.pending_verify.is_none();
        next.plan = if finished_without_atoms { None } else { Some(plan) };
    }
    Ok(next)
}

/// Post-condition of an atom, judged from two parsed states.
pub fn verify_post_condition(atom: RobotPrimitive, before: &ParsedState, after: &ParsedState) -> bool {
    match atom {
        RobotPrimitive::Push(d) => {
            let bet = |ps: &ParsedState| ps.table.my_current_bet.get(d);
            let inv = |ps: &ParsedState| ps.table.my_chips.get(d);
            bet(after) == bet(before) + 1 && inv(after) + 1 == inv(before)
        }
        RobotPrimitive::Pull(d) => after.table.my_chips.get(d) == before.table.my_chips.get(d) + 1,
        _ => true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perceiver::{project_truth, ShowdownOutcome};
    use crate::tabletop::{new_initial_table, Denomination, TableConfig};
    use crate::translator::translate;

    fn parsed(stage: LoopStage) -> ParsedState {
        project_truth(&new_initial_table(&TableConfig::default()), stage, ShowdownOutcome::NotShowdown)
    }

    fn ctx_with_legal() -> SessionContext {
        SessionContext {
            legal: vec![
                AgentPrimitive::ViewCard(Side::Left),
                AgentPrimitive::ViewCard(Side::Right),
                AgentPrimitive::Raise(10),
            ],
            ..SessionContext::default()
        }
    }

    fn gate(ps: &ParsedState, ctx: &SessionContext) -> Gate {
        route(ps, ctx, &Budgets::default()).unwrap().gate
    }

    #[test]
    fn acting_waits() {
        assert_eq!(gate(&parsed(LoopStage::Acting), &ctx_with_legal()), Gate::Wait { reason: WaitReason::Acting });
    }

    #[test]
    fn fresh_game_forces_left_view() {
        assert_eq!(gate(&parsed(LoopStage::Idle), &ctx_with_legal()), Gate::ForceView { side: Side::Left });
        let ctx = SessionContext { viewed: [true, false], ..ctx_with_legal() };
        assert_eq!(gate(&parsed(LoopStage::Idle), &ctx), Gate::ForceView { side: Side::Right });
    }

    #[test]
    fn pending_atom_continues() {
        let t = new_initial_table(&TableConfig::default());
        let plan = translate(&AgentPrimitive::Raise(100), &t).unwrap();
        let ctx = SessionContext { plan: Some(plan), ..ctx_with_legal() };
        assert_eq!(gate(&parsed(LoopStage::AtomIdle), &ctx), Gate::ContinueAtom);
    }

    #[test]
    fn recovery_then_escalation() {
        let ctx = SessionContext {
            last_atom: Some(RobotPrimitive::Push(Denomination::D10)),
            ..ctx_with_legal()
        };
        let ps = parsed(LoopStage::ToRecover);
        let routed = route(&ps, &ctx, &Budgets::default()).unwrap();
        assert_eq!(routed.gate, Gate::RecoverRetry);
        let t = new_initial_table(&TableConfig::default());
        let plan = translate(&AgentPrimitive::Raise(10), &t).unwrap();
        let ctx = apply_gate(
            &ctx,
            &routed,
            GateEvent::Dispatched { plan, atom: Some(RobotPrimitive::Push(Denomination::D10)), baseline: Some(ps.clone()) },
        )
        .unwrap();
        assert_eq!(ctx.retries, 1);
        assert_eq!(gate(&ps, &ctx), Gate::RequestHuman { reason: Escalation::RetryBudget });
    }

    #[test]
    fn wait_budget_escalates() {
        let ctx = SessionContext { consecutive_waits: 4, ..ctx_with_legal() };
        assert_eq!(gate(&parsed(LoopStage::Acting), &ctx), Gate::RequestHuman { reason: Escalation::WaitBudget });
    }

    #[test]
    fn down_requests_help_then_terminates() {
        let ps = parsed(LoopStage::Down);
        let ctx = ctx_with_legal();
        let routed = route(&ps, &ctx, &Budgets::default()).unwrap();
        assert_eq!(routed.gate, Gate::RequestHuman { reason: Escalation::SceneDown });
        let ctx = apply_gate(&ctx, &routed, GateEvent::Observed).unwrap();
        assert_eq!(gate(&ps, &ctx), Gate::Terminate { cause: TerminationCause::SceneUnusable });
    }

    #[test]
    fn counters_follow_gates() {
        let ps = parsed(LoopStage::Acting);
        let ctx = ctx_with_legal();
        let routed = route(&ps, &ctx, &Budgets::default()).unwrap();
        let ctx = apply_gate(&ctx, &routed, GateEvent::Observed).unwrap();
        assert_eq!(ctx.consecutive_waits, 1);
        assert!(matches!(
            apply_gate(&ctx, &routed, GateEvent::Observed),
            Err(RouterError::StaleContext { .. })
        ));
        let t = new_initial_table(&TableConfig::default());
        let mut plan = translate(&AgentPrimitive::Raise(10), &t).unwrap();
        plan.next_atom();
        let ctx = SessionContext { plan: Some(plan), ..ctx };
        let routed = route(&parsed(LoopStage::Idle), &ctx, &Budgets::default()).unwrap();
        assert_eq!(routed.gate, Gate::Complete);
        let ctx = apply_gate(&ctx, &routed, GateEvent::Observed).unwrap();
        assert_eq!(ctx.plan, None);
        assert_eq!(ctx.consecutive_waits, 0);
    }

    #[test]
    fn push_post_condition() {
        let before = parsed(LoopStage::Acting);
        let mut after = before.clone();
        after.table.my_chips.take(Denomination::D10).unwrap();
        after.table.my_current_bet.add(Denomination::D10, 1);
        assert!(verify_post_condition(RobotPrimitive::Push(Denomination::D10), &before, &after));
        assert!(!verify_post_condition(RobotPrimitive::Push(Denomination::D10), &before, &before));
        assert!(verify_post_condition(RobotPrimitive::PickUp(Side::Left), &before, &before));
    }
}
