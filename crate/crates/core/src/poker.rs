//! Seven-card hand evaluation and showdown judgment.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tabletop::Card;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PokerError {
    #[error("card {0} appears more than once")]
    DuplicateCard(Card),
    #[error("expected {expected} cards, got {got}")]
    WrongCardCount { expected: usize, got: usize },
    #[error("board has {0} cards; showdown needs 5")]
    IncompleteBoard(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    HighCard,
    Pair,
    TwoPair,
    Trips,
    Straight,
    Flush,
    FullHouse,
    Quads,
    StraightFlush,
}

/// Category first, then tiebreak ranks in significance order (zero padded).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HandRank {
    pub category: Category,
    pub tiebreak: [u8; 5],
}

impl HandRank {
    fn new(category: Category, ranks: &[u8]) -> HandRank {
        let mut tiebreak = [0u8; 5];
        tiebreak[..ranks.len()].copy_from_slice(ranks);
        HandRank { category, tiebreak }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Showdown {
    Win,
    Lose,
    Tie,
}

impl Showdown {
    pub fn flipped(self) -> Showdown {
        match self {
            Showdown::Win => Showdown::Lose,
            Showdown::Lose => Showdown::Win,
            Showdown::Tie => Showdown::Tie,
        }
    }
}

pub(crate) fn check_distinct(cards: &[Card]) -> Result<(), PokerError> {
    let mut seen = 0u64;
    for c in cards {
        let bit = 1u64 << c.index();
        if seen & bit != 0 {
            return Err(PokerError::DuplicateCard(*c));
        }
        seen |= bit;
    }
    Ok(())
}

/// Highest rank of a 5-long run in a rank bitmask (bit r set for rank r,
/// bit 1 mirrors the ace).
fn straight_high(mask: u16) -> Option<u8> {
    (5..=14u8).rev().find(|&hi| {
        let run = 0b11111u16 << (hi - 4);
        mask & run == run
    })
}

fn rank_mask(ranks: impl Iterator<Item = u8>) -> u16 {
    let mut mask = 0u16;
    for r in ranks {
        mask |= 1 << r;
        if r == 14 {
            mask |= 1 << 1;
        }
    }
    mask
}

/// Best five-card rank among 5 to 7 distinct cards.
pub fn evaluate_best(cards: &[Card]) -> HandRank {
    let mut counts = [0u8; 15];
    let mut suit_cards: [Vec<u8>; 4] = Default::default();
    for c in cards {
        counts[c.rank.value() as usize] += 1;
        suit_cards[c.suit.index()].push(c.rank.value());
    }

    if let Some(suited) = suit_cards.iter().find(|s| s.len() >= 5) {
        let mask = rank_mask(suited.iter().copied());
        if let Some(hi) = straight_high(mask) {
            return HandRank::new(Category::StraightFlush, &[hi]);
        }
        let mut top = suited.clone();
        top.sort_unstable_by(|a, b| b.cmp(a));
        return HandRank::new(Category::Flush, &top[..5]);
    }

    let by_count = |n: u8| -> Vec<u8> { (2..=14u8).rev().filter(|&r| counts[r as usize] == n).collect() };
    let quads = by_count(4);
    let trips = by_count(3);
    let pairs = by_count(2);
    let kickers = |exclude: &[u8], n: usize| -> Vec<u8> {
        (2..=14u8)
            .rev()
            .filter(|r| counts[*r as usize] > 0 && !exclude.contains(r))
            .take(n)
            .collect()
    };

    if let Some(&q) = quads.first() {
        let mut t = vec![q];
        t.extend(kickers(&[q], 1));
        return HandRank::new(Category::Quads, &t);
    }
    if let Some(&t) = trips.first() {
        let pair = trips.get(1).copied().into_iter().chain(pairs.first().copied()).max();
        if let Some(p) = pair {
            return HandRank::new(Category::FullHouse, &[t, p]);
        }
    }
    let present = rank_mask((2..=14u8).filter(|&r| counts[r as usize] > 0));
    if let Some(hi) = straight_high(present) {
        return HandRank::new(Category::Straight, &[hi]);
    }
    if let Some(&t) = trips.first() {
        let mut tb = vec![t];
        tb.extend(kickers(&[t], 2));
        return HandRank::new(Category::Trips, &tb);
    }
    if pairs.len() >= 2 {
        let (a, b) = (pairs[0], pairs[1]);
        let mut tb = vec![a, b];
        tb.extend(kickers(&[a, b], 1));
        return HandRank::new(Category::TwoPair, &tb);
    }
    if let Some(&p) = pairs.first() {
        let mut tb = vec![p];
        tb.extend(kickers(&[p], 3));
        return HandRank::new(Category::Pair, &tb);
    }
    HandRank::new(Category::HighCard, &kickers(&[], 5))
}

/// Rank of exactly seven distinct cards.
pub fn evaluate_hand(cards: &[Card]) -> Result<HandRank, PokerError> {
    if cards.len() != 7 {
        return Err(PokerError::WrongCardCount { expected: 7, got: cards.len() });
    }
    check_distinct(cards)?;
    Ok(evaluate_best(cards))
}

pub fn judge_showdown(
    robot_hole: [Card; 2],
    opponent_hole: [Card; 2],
    board: &[Card],
) -> Result<Showdown, PokerError> {
    if board.len() != 5 {
        return Err(PokerError::IncompleteBoard(board.len()));
    }
    let mut all = Vec::with_capacity(9);
    all.extend_from_slice(&robot_hole);
    all.extend_from_slice(&opponent_hole);
    all.extend_from_slice(board);
    check_distinct(&all)?;
    let mine = evaluate_best(&[&robot_hole[..], board].concat());
    let theirs = evaluate_best(&[&opponent_hole[..], board].concat());
    Ok(match mine.cmp(&theirs) {
        std::cmp::Ordering::Greater => Showdown::Win,
        std::cmp::Ordering::Less => Showdown::Lose,
        std::cmp::Ordering::Equal => Showdown::Tie,
    })
}
