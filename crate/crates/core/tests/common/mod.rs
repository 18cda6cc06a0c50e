//! Independent oracles and invariant checks shared by the integration tests.
#![allow(dead_code)]

use dexholdem_core::bench::{compute_counters, CounterReport, TrajectoryEvent};
use dexholdem_core::codec::{decode, encode};
use dexholdem_core::metrics::{OutcomeCounts, Tenths};
use dexholdem_core::perceiver::NoiseProfile;
use dexholdem_core::policy_sim::{OutcomeProfile, Quad};
use dexholdem_core::router::{route, Budgets, Escalation, Gate, PendingVerify, SessionContext, TerminationCause};
use dexholdem_core::session::{run_hand, reference_hand_config, Seeds, SessionConfig, SessionRecord};
use dexholdem_core::tabletop::{validate_state, Card, ChipCount, Denomination, Side, Violation};
use dexholdem_core::translator::{AtomPlan, Step};
use dexholdem_core::{AgentPrimitive, LoopStage, RobotPrimitive};
use dexholdem_core::perceiver::{ParsedState, ParsedTable, ShowdownOutcome};
use dexholdem_core::tabletop::Blind;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------- splitter

/// Fewest chips summing to `delta` by exhaustive search over the counts of
/// every denomination; `None` when no combination exists.
pub fn brute_force_split(delta: u32, inv: &ChipCount) -> Option<u32> {
    let avail = |d: Denomination| inv.get(d);
    let mut best: Option<u32> = None;
    for n100 in 0..=avail(Denomination::D100).min(delta / 100) {
        let r100 = delta - 100 * n100;
        for n50 in 0..=avail(Denomination::D50).min(r100 / 50) {
            let r50 = r100 - 50 * n50;
            for n10 in 0..=avail(Denomination::D10).min(r50 / 10) {
                let r10 = r50 - 10 * n10;
                if !r10.is_multiple_of(5) || r10 / 5 > avail(Denomination::D5) {
                    continue;
                }
                let count = n100 + n50 + n10 + r10 / 5;
                if best.is_none_or(|b| count < b) {
                    best = Some(count);
                }
            }
        }
    }
    best
}

// ---------------------------------------------------------------- evaluator

/// Category index in the conventional order, high card = 0.
pub type OracleRank = (u8, [u8; 5]);

/// Rank of exactly five cards, from first principles.
pub fn oracle_five(cards: &[Card]) -> OracleRank {
    assert_eq!(cards.len(), 5);
    let mut ranks: Vec<u8> = cards.iter().map(|c| c.rank.value()).collect();
    ranks.sort_unstable_by(|a, b| b.cmp(a));
    let flush = cards.iter().all(|c| c.suit == cards[0].suit);

    let mut distinct = ranks.clone();
    distinct.dedup();
    let straight_high = if distinct.len() == 5 {
        if distinct[0] - distinct[4] == 4 {
            Some(distinct[0])
        } else if distinct == [14, 5, 4, 3, 2] {
            Some(5)
        } else {
            None
        }
    } else {
        None
    };

    // Ranks grouped by multiplicity, larger groups first, then higher rank.
    let mut groups: Vec<(usize, u8)> = distinct
        .iter()
        .map(|&r| (ranks.iter().filter(|&&x| x == r).count(), r))
        .collect();
    groups.sort_unstable_by(|a, b| b.cmp(a));
    let shape: Vec<usize> = groups.iter().map(|g| g.0).collect();
    let ordered: Vec<u8> = groups.iter().map(|g| g.1).collect();

    let pad = |v: &[u8]| {
        let mut t = [0u8; 5];
        t[..v.len()].copy_from_slice(v);
        t
    };
    match (straight_high, flush) {
        (Some(hi), true) => return (8, pad(&[hi])),
        (_, true) => return (5, pad(&ranks)),
        (Some(hi), false) => return (4, pad(&[hi])),
        _ => {}
    }
    let cat = match shape.as_slice() {
        [4, 1] => 7,
        [3, 2] => 6,
        [3, 1, 1] => 3,
        [2, 2, 1] => 2,
        [2, 1, 1, 1] => 1,
        _ => 0,
    };
    (cat, pad(&ordered))
}

/// Best of the 21 five-card subsets of seven cards.
pub fn oracle_seven(cards: &[Card]) -> OracleRank {
    assert_eq!(cards.len(), 7);
    let mut best: Option<OracleRank> = None;
    for skip_a in 0..7 {
        for skip_b in skip_a + 1..7 {
            let five: Vec<Card> = (0..7).filter(|&i| i != skip_a && i != skip_b).map(|i| cards[i]).collect();
            let r = oracle_five(&five);
            if best.is_none_or(|b| r > b) {
                best = Some(r);
            }
        }
    }
    best.expect("21 subsets")
}

pub fn draw(rng: &mut ChaCha8Rng, n: usize) -> Vec<Card> {
    let mut deck = Card::full_deck();
    deck.shuffle(rng);
    deck.truncate(n);
    deck
}

// ---------------------------------------------------------------- sessions

/// A hand with a uniform outcome quad and per-field noise, seeded from one number.
pub fn noisy_config(seed: u64, quad: [u32; 4], noise: f64, scripted: bool) -> SessionConfig {
    let [sp, dc, tf, df] = quad;
    let base = if scripted { reference_hand_config() } else { SessionConfig::default() };
    SessionConfig {
        seeds: Seeds::from_master(seed),
        custom_profile: Some(OutcomeProfile::uniform(Quad::from_counts(sp.max(1), dc, tf, df))),
        custom_noise: Some(NoiseProfile::from_rates([noise; 8])),
        ..base
    }
}

pub fn hand(seed: u64, quad: [u32; 4], noise: f64, scripted: bool) -> Result<SessionRecord, String> {
    run_hand(&noisy_config(seed, quad, noise, scripted)).map_err(|e| e.to_string())
}

pub fn check_chip_conservation(rec: &SessionRecord) -> Result<(), String> {
    let t = &rec.config.table;
    let expected = t.robot_chips.plus(&t.opponent_chips);
    for s in &rec.states {
        let broken: Vec<Violation> = validate_state(&s.truth, &expected)
            .into_iter()
            .filter(|v| matches!(v, Violation::ChipConservationBroken { .. }))
            .collect();
        if !broken.is_empty() {
            return Err(format!("state {}: {broken:?}", s.state_index));
        }
    }
    Ok(())
}

pub fn check_card_uniqueness(rec: &SessionRecord) -> Result<(), String> {
    for s in &rec.states {
        let mut cards: Vec<Card> = s.truth.deck.clone();
        cards.extend(s.truth.hole_left.iter().map(|h| h.card));
        cards.extend(s.truth.hole_right.iter().map(|h| h.card));
        cards.extend(s.truth.opponent_hole.iter().flatten().map(|h| h.card));
        cards.extend(s.truth.community_cards.iter().copied());
        let n = cards.len();
        cards.sort();
        cards.dedup();
        if cards.len() != n || n != 52 {
            return Err(format!("state {}: {} locations, {} distinct", s.state_index, n, cards.len()));
        }
    }
    Ok(())
}

pub fn check_hl_le_ap(c: &CounterReport) -> Result<(), String> {
    if c.hl > c.ap {
        return Err(format!("HL {} > AP {}", c.hl, c.ap));
    }
    Ok(())
}

pub fn check_prefix_monotone(events: &[TrajectoryEvent]) -> Result<(), String> {
    let key = |c: &CounterReport| [c.states, c.ap, c.dpp, c.wa, c.hl, c.rc];
    let mut prev = [0u64; 6];
    for k in 0..=events.len() {
        let c = compute_counters(&events[..k]).map_err(|e| e.to_string())?;
        let now = key(&c);
        if now.iter().zip(prev).any(|(a, b)| *a < b) {
            return Err(format!("prefix {k}: {now:?} after {prev:?}"));
        }
        if c.states != k as u64 {
            return Err(format!("prefix {k} counts {} states", c.states));
        }
        check_hl_le_ap(&c)?;
        prev = now;
    }
    Ok(())
}

pub fn check_rates_ordered(c: OutcomeCounts) -> Result<(), String> {
    if c.total() == 0 {
        return Ok(());
    }
    let (sp, tc) = (c.spsr().unwrap(), c.tcr().unwrap());
    if sp > tc || Tenths::round(sp) > Tenths::round(tc) {
        return Err(format!("{c:?}: SPSR {sp} > TCR {tc}"));
    }
    Ok(())
}

pub fn check_round_trip<T>(value: &T) -> Result<(), String>
where
    T: serde::Serialize + serde::de::DeserializeOwned + PartialEq + std::fmt::Debug,
{
    let text = encode(value);
    let back: T = decode(&text).map_err(|e| e.to_string())?;
    if &back != value {
        return Err(format!("round trip changed the value: {text}"));
    }
    if encode(&back) != text {
        return Err("re-encoding is not byte-identical".into());
    }
    Ok(())
}

// ---------------------------------------------------------------- router grid

fn grid_parsed(stage: LoopStage, stable: bool, my_turn: bool, outcome: ShowdownOutcome, bets: bool) -> ParsedState {
    let bet = if bets { ChipCount::new(0, 1, 0, 0) } else { ChipCount::ZERO };
    ParsedState {
        loop_stage: stage,
        blind: Blind::BigBlind,
        showdown_outcome: outcome,
        table: ParsedTable {
            scene_stable: stable,
            is_my_turn: my_turn,
            community_cards: Vec::new(),
            my_chips: ChipCount::new(4, 3, 3, 3),
            opponent_chips: ChipCount::new(4, 4, 3, 3),
            my_current_bet: bet,
            opponent_bet: bet,
            uncertain_fields: Vec::new(),
        },
    }
}

fn grid_plans() -> Vec<Option<AtomPlan>> {
    let mut done = AtomPlan::new(AgentPrimitive::Check, vec![]);
    let _ = done.next_atom();
    vec![
        None,
        Some(AtomPlan::new(
            AgentPrimitive::ViewCard(Side::Left),
            vec![Step::Atom(RobotPrimitive::PickUp(Side::Left)), Step::Perceive],
        )),
        Some(AtomPlan::new(AgentPrimitive::ViewCard(Side::Left), vec![Step::Perceive])),
        Some(done),
    ]
}

/// Enumerates every combination of router inputs and checks that exactly
/// one well-formed gate comes back. Returns the number of inputs visited.
pub fn router_totality_grid() -> Result<usize, String> {
    let budgets = Budgets::default();
    let mut visited = 0;
    let legal_sets = [vec![], vec![AgentPrimitive::Check, AgentPrimitive::ViewCard(Side::Left)]];
    for stage in LoopStage::ALL {
        for stable in [false, true] {
            for my_turn in [false, true] {
                for outcome in ShowdownOutcome::ALL {
                    for bets in [false, true] {
                        let ps = grid_parsed(stage, stable, my_turn, outcome, bets);
                        for plan in grid_plans() {
                            for pending in [false, true] {
                                for escalated in [None, Some(Escalation::WaitBudget)] {
                                    for terminal in [None, Some(TerminationCause::BudgetExhausted)] {
                                        for fresh in [false, true] {
                                            for legal in &legal_sets {
                                                for waits in [0, budgets.wait_budget] {
                                                    for retries in [0, budgets.retry_budget] {
                                                        for vfail in [0, budgets.verify_budget + 1] {
                                                            for last in [None, Some(RobotPrimitive::PickUp(Side::Left))] {
                                                                let ctx = SessionContext {
                                                                    plan: plan.clone(),
                                                                    pending_verify: pending.then(|| PendingVerify {
                                                                        atom: RobotPrimitive::PickUp(Side::Left),
                                                                        baseline: ps.clone(),
                                                                    }),
                                                                    escalated,
                                                                    terminal,
                                                                    fresh_game: fresh,
                                                                    legal: legal.clone(),
                                                                    consecutive_waits: waits,
                                                                    retries,
                                                                    verify_failures: vfail,
                                                                    last_atom: last,
                                                                    ..SessionContext::default()
                                                                };
                                                                check_gate(&ps, &ctx, &budgets)?;
                                                                visited += 1;
                                                            }
                                                        }
                                                    }
                                                }
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(visited)
}

fn check_gate(ps: &ParsedState, ctx: &SessionContext, budgets: &Budgets) -> Result<(), String> {
    let routed = route(ps, ctx, budgets).map_err(|e| format!("{ctx:?}: {e}"))?;
    if routed.generation != ctx.generation {
        return Err("generation not echoed".into());
    }
    let stop = ctx.terminal.is_some() || ctx.escalated.is_some();
    match &routed.gate {
        Gate::Terminate { .. } => {}
        _ if stop => return Err(format!("{:?} routed past a stop condition", routed.gate)),
        Gate::InvokeAgent { legal } => {
            if legal.is_empty() || legal != &ctx.legal {
                return Err(format!("agent invoked with {legal:?}, context legal {:?}", ctx.legal));
            }
        }
        Gate::ForceView { side } => {
            if !ctx.legal.contains(&AgentPrimitive::ViewCard(*side)) {
                return Err("forced view outside the legal set".into());
            }
        }
        Gate::RecoverRetry
            if (ctx.last_atom.is_none() || ctx.retries >= budgets.retry_budget) => {
                return Err("retry without an atom or budget".into());
            }
        _ => {}
    }
    Ok(())
}
