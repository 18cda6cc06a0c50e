//! Heads-up no-limit betting over the table's discrete chips.
//!
//! Robot actions change chips only through executed atoms; [`commit_robot_action`]
//! is called once the translated plan has finished and updates the betting
//! bookkeeping. Opponent actions move chips instantly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poker::{judge_showdown, PokerError, Showdown};
use crate::primitives::{AgentPrimitive, PlaceFacing};
use crate::tabletop::{
    Blind, ChipCount, Denomination, Facing, HandResult, Side, Street, TableState,
};
use crate::translator::{split_chips, TranslateError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RulesError {
    #[error("it is not the robot's turn")]
    NotRobotTurn,
    #[error("it is not the opponent's turn")]
    NotOpponentTurn,
    #[error("the hand is already settled")]
    AlreadySettled,
    #[error("the betting round is still open")]
    BettingRoundOpen,
    #[error("the deck has run out")]
    DeckExhausted,
    #[error("illegal action: {0}")]
    Illegal(String),
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error(transparent)]
    Poker(#[from] PokerError),
}

/// Opponent actions; amounts are target street-bet values like `raise(A)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "action", content = "amount", rename_all = "snake_case")]
pub enum OpponentAction {
    Check,
    Call,
    Raise(u32),
    AllIn,
    Fold,
}

fn robot_capacity(s: &TableState) -> u32 {
    s.robot_street_bet() + s.robot_inventory.value()
}

fn opponent_capacity(s: &TableState) -> u32 {
    s.opponent_street_bet() + s.opponent_inventory.value()
}

fn is_betting_street(street: Street) -> bool {
    matches!(street, Street::Preflop | Street::Flop | Street::Turn | Street::River)
}

/// Robot-side legal agent primitives for the current table.
pub fn legal_actions(s: &TableState) -> Result<Vec<AgentPrimitive>, RulesError> {
    if s.awaiting_collection {
        return Ok(vec![AgentPrimitive::CollectWinnings]);
    }
    if s.street == Street::Settled {
        return Err(RulesError::AlreadySettled);
    }
    if !s.is_robot_turn {
        return Err(RulesError::NotRobotTurn);
    }
    let mut out = Vec::new();
    let in_hand: Vec<Side> = Side::BOTH
        .into_iter()
        .filter(|&side| s.hole(side).is_some_and(|h| h.facing == Facing::InHand))
        .collect();
    if !in_hand.is_empty() {
        for side in in_hand {
            out.push(AgentPrimitive::PutDownCard(side, PlaceFacing::Down));
            out.push(AgentPrimitive::PutDownCard(side, PlaceFacing::Up));
        }
        return Ok(out);
    }
    if s.street == Street::Showdown {
        for side in Side::BOTH {
            if s.hole(side).is_some_and(|h| h.facing != Facing::Up) {
                out.push(AgentPrimitive::ShowCard(side));
            }
        }
        return Ok(out);
    }

    for side in Side::BOTH {
        if s.hole(side).is_some_and(|h| h.facing == Facing::Down) {
            out.push(AgentPrimitive::ViewCard(side));
        }
    }

    if !s.betting.robot_blind_posted {
        let blind = s.blind.amount();
        if split_chips(blind, &s.robot_inventory).is_ok() {
            out.push(AgentPrimitive::Raise(blind));
        } else if !s.robot_inventory.is_empty() {
            out.push(AgentPrimitive::AllIn);
        } else {
            out.push(AgentPrimitive::Fold);
        }
        return Ok(out);
    }

    let my = s.robot_street_bet();
    let opp = s.opponent_street_bet();
    let inv = s.robot_inventory.value();
    let opp_cap = opponent_capacity(s);

    if opp > my {
        out.push(AgentPrimitive::Fold);
        let delta = opp - my;
        if delta < inv && split_chips(delta, &s.robot_inventory).is_ok() {
            out.push(AgentPrimitive::Call);
        }
    } else {
        out.push(AgentPrimitive::Check);
    }

    let opponent_can_respond = !s.opponent_inventory.is_empty();
    if opponent_can_respond {
        let floor = opp.max(my) + 5;
        let ceiling = opp_cap.min(my + inv.saturating_sub(5));
        let mut target = floor;
        while target <= ceiling {
            if split_chips(target - my, &s.robot_inventory).is_ok() {
                out.push(AgentPrimitive::Raise(target));
            }
            target += 5;
        }
    }
    let facing = opp > my;
    if inv > 0 && robot_capacity(s) <= opp_cap && (facing || opponent_can_respond) {
        out.push(AgentPrimitive::AllIn);
    }
    Ok(out)
}

fn round_closed(s: &TableState) -> bool {
    if s.robot_street_bet() != s.opponent_street_bet() {
        return false;
    }
    let all_in = s.robot_inventory.is_empty() || s.opponent_inventory.is_empty();
    all_in || !(s.betting.robot_needs_action || s.betting.opponent_needs_action)
}

/// Deals the next street once the betting round is closed.
pub fn advance_street(s: &TableState) -> Result<TableState, RulesError> {
    if !is_betting_street(s.street) {
        return Err(RulesError::AlreadySettled);
    }
    if !round_closed(s) {
        return Err(RulesError::BettingRoundOpen);
    }
    force_advance(s)
}

fn force_advance(s: &TableState) -> Result<TableState, RulesError> {
    let mut t = s.clone();
    let (next, deal) = match s.street {
        Street::Preflop => (Street::Flop, 3),
        Street::Flop => (Street::Turn, 1),
        Street::Turn => (Street::River, 1),
        Street::River => (Street::Showdown, 0),
        Street::Showdown | Street::Settled => return Err(RulesError::AlreadySettled),
    };
    if t.deck.len() < deal {
        return Err(RulesError::DeckExhausted);
    }
    let dealt: Vec<_> = t.deck.drain(..deal).collect();
    t.community_cards.extend(dealt);
    t.street = next;
    t.betting.robot_street_base = t.robot_bet_zone.value();
    t.betting.opponent_street_base = t.opponent_bet_zone.value();
    t.betting.robot_needs_action = true;
    t.betting.opponent_needs_action = true;
    t.is_robot_turn = next == Street::Showdown || t.blind == Blind::BigBlind;
    Ok(t)
}

fn run_out(s: &TableState) -> Result<TableState, RulesError> {
    let mut t = s.clone();
    while t.street != Street::Showdown {
        t = force_advance(&t)?;
    }
    Ok(t)
}

/// Returns an uncalled opponent excess to the opponent inventory where the
/// bet-zone chips allow it.
fn refund_opponent_excess(t: &mut TableState) {
    let (my, opp) = (t.robot_street_bet(), t.opponent_street_bet());
    if opp <= my || !t.robot_inventory.is_empty() {
        return;
    }
    let excess = opp - my;
    if let Ok(chips) = split_chips(excess, &t.opponent_bet_zone) {
        for d in chips {
            t.opponent_bet_zone.take(d).expect("split drew from this zone");
            t.opponent_inventory.add(d, 1);
        }
    }
}

/// Closes the street or passes the turn after a completed betting action.
fn after_betting_action(mut t: TableState) -> Result<TableState, RulesError> {
    refund_opponent_excess(&mut t);
    let (my, opp) = (t.robot_street_bet(), t.opponent_street_bet());
    let robot_out = t.robot_inventory.is_empty();
    let opp_out = t.opponent_inventory.is_empty();
    if my == opp {
        if robot_out || opp_out {
            return run_out(&t);
        }
        if !t.betting.robot_needs_action && !t.betting.opponent_needs_action {
            return force_advance(&t);
        }
        t.is_robot_turn = t.betting.robot_needs_action;
        return Ok(t);
    }
    let robot_behind = my < opp;
    if (robot_behind && robot_out) || (!robot_behind && opp_out) {
        return run_out(&t);
    }
    t.is_robot_turn = robot_behind;
    Ok(t)
}

fn post_opponent_blind(t: &mut TableState) {
    let amount = t.blind.other().amount();
    // Without exact change, the smallest chip covering the blind goes in.
    let chips = split_chips(amount, &t.opponent_inventory).unwrap_or_else(|_| {
        Denomination::ALL
            .into_iter()
            .find(|d| d.value() >= amount && t.opponent_inventory.get(*d) > 0)
            .map_or_else(|| t.opponent_inventory.to_descending(), |d| vec![d])
    });
    for d in chips {
        t.opponent_inventory.take(d).expect("split drew from inventory");
        t.opponent_bet_zone.add(d, 1);
    }
    t.betting.opponent_blind_posted = true;
}

/// Applies the bookkeeping for a robot action whose atoms have all executed.
pub fn commit_robot_action(s: &TableState, action: &AgentPrimitive) -> Result<TableState, RulesError> {
    let mut t = s.clone();
    match action {
        AgentPrimitive::Fold => return settle_pot(&t, HandResult::RobotFolded),
        AgentPrimitive::CollectWinnings => {
            if t.robot_bet_zone.is_empty() && t.opponent_bet_zone.is_empty() {
                t.awaiting_collection = false;
            }
            return Ok(t);
        }
        AgentPrimitive::ShowCard(_) | AgentPrimitive::PutDownCard(_, PlaceFacing::Up)
            if t.street == Street::Showdown =>
        {
            let shown = Side::BOTH
                .iter()
                .all(|&side| t.hole(side).is_none_or(|h| h.facing == Facing::Up));
            return if shown { reveal_and_settle(&t) } else { Ok(t) };
        }
        _ => {}
    }
    if !action.is_betting() {
        return Ok(t);
    }
    if !is_betting_street(t.street) {
        return Err(RulesError::Illegal(format!("{action} outside a betting street")));
    }
    if !t.betting.robot_blind_posted {
        // The opponent posts at once; whoever is behind (the small blind) acts next.
        t.betting.robot_blind_posted = true;
        post_opponent_blind(&mut t);
        t.betting.robot_needs_action = true;
        t.betting.opponent_needs_action = true;
        return after_betting_action(t);
    }
    t.betting.robot_needs_action = false;
    if t.robot_street_bet() > t.opponent_street_bet() {
        t.betting.opponent_needs_action = true;
    }
    after_betting_action(t)
}

/// Opponent actions legal on the current table.
pub fn opponent_legal(s: &TableState) -> Vec<OpponentAction> {
    if s.is_robot_turn || !is_betting_street(s.street) || !s.betting.opponent_blind_posted {
        return Vec::new();
    }
    let my = s.opponent_street_bet();
    let other = s.robot_street_bet();
    let inv = s.opponent_inventory.value();
    let mut out = Vec::new();
    if other > my {
        out.push(OpponentAction::Fold);
        let delta = other - my;
        if delta >= inv || split_chips(delta, &s.opponent_inventory).is_ok() {
            out.push(OpponentAction::Call);
        }
    } else {
        out.push(OpponentAction::Check);
    }
    if inv > 0 {
        if !s.robot_inventory.is_empty() {
            let mut target = other.max(my) + 5;
            while target < my + inv {
                if split_chips(target - my, &s.opponent_inventory).is_ok() {
                    out.push(OpponentAction::Raise(target));
                }
                target += 5;
            }
        }
        out.push(OpponentAction::AllIn);
    }
    out
}

fn move_opponent_chips(t: &mut TableState, chips: Vec<Denomination>) {
    for d in chips {
        t.opponent_inventory.take(d).expect("split drew from inventory");
        t.opponent_bet_zone.add(d, 1);
    }
}

/// Applies an opponent action instantly.
pub fn apply_opponent_action(s: &TableState, action: OpponentAction) -> Result<TableState, RulesError> {
    if s.street == Street::Settled {
        return Err(RulesError::AlreadySettled);
    }
    if s.is_robot_turn {
        return Err(RulesError::NotOpponentTurn);
    }
    if !is_betting_street(s.street) || !s.betting.opponent_blind_posted {
        return Err(RulesError::Illegal(format!("{action:?} at {:?}", s.street)));
    }
    let mut t = s.clone();
    let my = t.opponent_street_bet();
    let other = t.robot_street_bet();
    match action {
        OpponentAction::Fold => {
            if other <= my {
                return Err(RulesError::Illegal("fold with nothing to call".into()));
            }
            return settle_pot(&t, HandResult::OpponentFolded);
        }
        OpponentAction::Check => {
            if other != my {
                return Err(RulesError::Illegal("check while facing a bet".into()));
            }
        }
        OpponentAction::Call => {
            if other <= my {
                return Err(RulesError::Illegal("call with nothing to call".into()));
            }
            let delta = other - my;
            let chips = if delta >= t.opponent_inventory.value() {
                t.opponent_inventory.to_descending()
            } else {
                split_chips(delta, &t.opponent_inventory)?
            };
            move_opponent_chips(&mut t, chips);
        }
        OpponentAction::Raise(target) => {
            if target <= other.max(my) {
                return Err(RulesError::Illegal(format!("raise to {target} does not exceed {other}")));
            }
            let chips = split_chips(target - my, &t.opponent_inventory)?;
            move_opponent_chips(&mut t, chips);
        }
        OpponentAction::AllIn => {
            if t.opponent_inventory.is_empty() {
                return Err(RulesError::Illegal("no chips left".into()));
            }
            let chips = t.opponent_inventory.to_descending();
            move_opponent_chips(&mut t, chips);
        }
    }
    t.betting.opponent_needs_action = false;
    if t.opponent_street_bet() > t.robot_street_bet() {
        t.betting.robot_needs_action = true;
    }
    after_betting_action(t)
}

fn reveal_and_settle(s: &TableState) -> Result<TableState, RulesError> {
    let mut t = s.clone();
    for h in t.opponent_hole.iter_mut().flatten() {
        h.facing = Facing::Up;
    }
    let hole = |o: Option<crate::tabletop::HoleCard>| o.map(|h| h.card);
    let robot = [hole(t.hole_left), hole(t.hole_right)];
    let opp = [hole(t.opponent_hole[0]), hole(t.opponent_hole[1])];
    let (Some(r0), Some(r1), Some(o0), Some(o1)) = (robot[0], robot[1], opp[0], opp[1]) else {
        return Err(RulesError::Illegal("missing hole cards at showdown".into()));
    };
    let result = match judge_showdown([r0, r1], [o0, o1], &t.community_cards)? {
        Showdown::Win => HandResult::Win,
        Showdown::Lose => HandResult::Lose,
        Showdown::Tie => HandResult::Tie,
    };
    settle_pot(&t, result)
}

/// Settles the pot. Lost chips move to the opponent at once; won chips stay
/// in the bet zones until pulled by collect_winnings.
pub fn settle_pot(s: &TableState, result: HandResult) -> Result<TableState, RulesError> {
    if s.street == Street::Settled || s.result.is_some() {
        return Err(RulesError::AlreadySettled);
    }
    let mut t = s.clone();
    match result {
        HandResult::Lose | HandResult::RobotFolded => {
            let pot = t.robot_bet_zone.plus(&t.opponent_bet_zone);
            t.opponent_inventory = t.opponent_inventory.plus(&pot);
            t.robot_bet_zone = ChipCount::ZERO;
            t.opponent_bet_zone = ChipCount::ZERO;
        }
        HandResult::Tie => {
            t.robot_inventory = t.robot_inventory.plus(&t.robot_bet_zone);
            t.opponent_inventory = t.opponent_inventory.plus(&t.opponent_bet_zone);
            t.robot_bet_zone = ChipCount::ZERO;
            t.opponent_bet_zone = ChipCount::ZERO;
        }
        HandResult::Win | HandResult::OpponentFolded => {
            t.awaiting_collection = !(t.robot_bet_zone.is_empty() && t.opponent_bet_zone.is_empty());
        }
    }
    t.result = Some(result);
    t.street = Street::Settled;
    t.is_robot_turn = true;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabletop::{new_initial_table, TableConfig};
    use Denomination::*;

    fn push(t: &mut TableState, chips: &[Denomination]) {
        for &d in chips {
            t.robot_inventory.take(d).unwrap();
            t.robot_bet_zone.add(d, 1);
        }
    }

    fn posted_bb() -> TableState {
        let mut t = new_initial_table(&TableConfig::default());
        push(&mut t, &[D10]);
        commit_robot_action(&t, &AgentPrimitive::Raise(10)).unwrap()
    }

    #[test]
    fn only_blind_post_before_posting() {
        let t = new_initial_table(&TableConfig::default());
        let legal = legal_actions(&t).unwrap();
        assert!(legal.contains(&AgentPrimitive::Raise(10)));
        assert!(!legal.contains(&AgentPrimitive::Check));
        assert!(legal.contains(&AgentPrimitive::ViewCard(Side::Left)));
    }

    #[test]
    fn big_blind_posting_hands_turn_to_small_blind() {
        let t = posted_bb();
        assert!(!t.is_robot_turn);
        assert_eq!(t.opponent_street_bet(), 5);
        assert_eq!(legal_actions(&t), Err(RulesError::NotRobotTurn));
        let t = apply_opponent_action(&t, OpponentAction::Call).unwrap();
        assert!(t.is_robot_turn, "big blind keeps its option");
        let legal = legal_actions(&t).unwrap();
        assert!(legal.contains(&AgentPrimitive::Check));
        assert!(!legal.contains(&AgentPrimitive::Call));
        assert!(legal.contains(&AgentPrimitive::Raise(20)));
        let t = commit_robot_action(&t, &AgentPrimitive::Check).unwrap();
        assert_eq!(t.street, Street::Flop);
        assert_eq!(t.community_cards.len(), 3);
        assert!(t.is_robot_turn, "big blind acts first after the flop");
    }

    #[test]
    fn facing_a_bet_larger_than_the_stack() {
        let mut t = posted_bb();
        t = apply_opponent_action(&t, OpponentAction::Call).unwrap();
        t = commit_robot_action(&t, &AgentPrimitive::Check).unwrap();
        t.robot_inventory = ChipCount::new(0, 0, 1, 1);
        t.opponent_inventory = ChipCount::new(4, 8, 3, 3);
        t = commit_robot_action(&t, &AgentPrimitive::Check).unwrap();
        t = apply_opponent_action(&t, OpponentAction::Raise(200)).unwrap();
        let legal = legal_actions(&t).unwrap();
        assert!(legal.contains(&AgentPrimitive::AllIn));
        assert!(legal.contains(&AgentPrimitive::Fold));
        assert!(!legal.contains(&AgentPrimitive::Call));
        assert!(!legal.contains(&AgentPrimitive::Check));
    }

    #[test]
    fn opponent_cannot_call_an_amount_it_cannot_make() {
        let mut t = posted_bb();
        t = apply_opponent_action(&t, OpponentAction::Call).unwrap();
        t = commit_robot_action(&t, &AgentPrimitive::Check).unwrap();
        t.opponent_inventory = ChipCount::new(0, 0, 1, 2);
        push(&mut t, &[D100, D100, D10, D10, D5, D5, D5, D5]);
        t = commit_robot_action(&t, &AgentPrimitive::Raise(240)).unwrap();
        let legal = opponent_legal(&t);
        assert!(!legal.contains(&OpponentAction::Call));
        assert!(legal.contains(&OpponentAction::AllIn));
        assert!(apply_opponent_action(&t, OpponentAction::Call).is_err());
        let totals = t.chip_totals();
        let after = apply_opponent_action(&t, OpponentAction::AllIn).unwrap();
        assert_eq!(after.chip_totals(), totals);
    }

    #[test]
    fn showdown_offers_reveals() {
        let mut t = new_initial_table(&TableConfig::default());
        t.street = Street::Showdown;
        assert_eq!(
            legal_actions(&t).unwrap(),
            vec![AgentPrimitive::ShowCard(Side::Left), AgentPrimitive::ShowCard(Side::Right)]
        );
    }

    #[test]
    fn river_closes_into_showdown_without_dealing() {
        let mut t = posted_bb();
        t = apply_opponent_action(&t, OpponentAction::Call).unwrap();
        t = commit_robot_action(&t, &AgentPrimitive::Check).unwrap();
        for _ in 0..2 {
            t = commit_robot_action(&t, &AgentPrimitive::Check).unwrap();
            t = apply_opponent_action(&t, OpponentAction::Check).unwrap();
        }
        assert_eq!(t.street, Street::River);
        assert_eq!(t.community_cards.len(), 5);
        let deck = t.deck.len();
        t = commit_robot_action(&t, &AgentPrimitive::Check).unwrap();
        t = apply_opponent_action(&t, OpponentAction::Check).unwrap();
        assert_eq!(t.street, Street::Showdown);
        assert_eq!(t.deck.len(), deck);
        assert!(t.is_robot_turn);
        assert_eq!(advance_street(&t), Err(RulesError::AlreadySettled));
    }

    #[test]
    fn open_round_cannot_advance() {
        let t = posted_bb();
        assert_eq!(advance_street(&t), Err(RulesError::BettingRoundOpen));
    }

    #[test]
    fn settle_lose_and_tie() {
        let mut t = posted_bb();
        let lost = settle_pot(&t, HandResult::Lose).unwrap();
        assert!(lost.robot_bet_zone.is_empty());
        assert_eq!(lost.opponent_inventory.get(D10), 5);
        assert_eq!(settle_pot(&lost, HandResult::Lose), Err(RulesError::AlreadySettled));

        t.opponent_bet_zone = ChipCount::new(0, 1, 0, 0);
        t.opponent_inventory = ChipCount::new(4, 3, 3, 3);
        let before = (t.robot_inventory, t.opponent_inventory);
        let tied = settle_pot(&t, HandResult::Tie).unwrap();
        assert_eq!(tied.robot_inventory, before.0.plus(&ChipCount::new(0, 1, 0, 0)));
        assert_eq!(tied.opponent_inventory, before.1.plus(&ChipCount::new(0, 1, 0, 0)));

        let won = settle_pot(&t, HandResult::Win).unwrap();
        assert_eq!(won.robot_bet_zone, t.robot_bet_zone);
        assert!(won.awaiting_collection);
        assert_eq!(legal_actions(&won).unwrap(), vec![AgentPrimitive::CollectWinnings]);
    }

    #[test]
    fn opponent_out_of_turn() {
        let t = new_initial_table(&TableConfig::default());
        assert_eq!(
            apply_opponent_action(&t, OpponentAction::Raise(10)),
            Err(RulesError::NotOpponentTurn)
        );
    }
}
