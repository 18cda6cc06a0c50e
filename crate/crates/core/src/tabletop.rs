//! Ground-truth tabletop model: cards, chip zones, markers and invariant checks.
//!
//! Chips are modeled as unordered tokens counted per denomination per zone.
//! Four zones exist (robot inventory, robot bet zone, opponent bet zone,
//! opponent inventory); every effect only moves tokens between them, so the
//! per-denomination total is conserved for the life of a hand.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TableError {
    #[error("cannot parse card `{0}`")]
    BadCard(String),
    #[error("unknown chip denomination {0}")]
    BadDenomination(u32),
    #[error("zone holds no {0}-chip")]
    NoChip(Denomination),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Suit {
    Clubs,
    Diamonds,
    Hearts,
    Spades,
}

impl Suit {
    pub const ALL: [Suit; 4] = [Suit::Clubs, Suit::Diamonds, Suit::Hearts, Suit::Spades];

    pub fn index(self) -> usize {
        self as usize
    }

    fn symbol(self) -> char {
        match self {
            Suit::Clubs => 'c',
            Suit::Diamonds => 'd',
            Suit::Hearts => 'h',
            Suit::Spades => 's',
        }
    }
}

/// Card rank as its numeric strength: 2..=14, ace high.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rank(u8);

impl Rank {
    pub const ACE: Rank = Rank(14);

    pub fn new(value: u8) -> Option<Rank> {
        (2..=14).contains(&value).then_some(Rank(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    fn symbol(self) -> char {
        match self.0 {
            10 => 'T',
            11 => 'J',
            12 => 'Q',
            13 => 'K',
            14 => 'A',
            v => (b'0' + v) as char,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Card {
    pub rank: Rank,
    pub suit: Suit,
}

impl Card {
    pub fn new(rank: u8, suit: Suit) -> Card {
        Card {
            rank: Rank::new(rank).expect("rank must be within 2..=14"),
            suit,
        }
    }

    /// Dense index in `0..52`.
    pub fn index(self) -> usize {
        (self.rank.0 as usize - 2) * 4 + self.suit.index()
    }

    pub fn from_index(index: usize) -> Card {
        assert!(index < 52, "card index out of range");
        Card {
            rank: Rank((index / 4) as u8 + 2),
            suit: Suit::ALL[index % 4],
        }
    }

    pub fn full_deck() -> Vec<Card> {
        (0..52).map(Card::from_index).collect()
    }
}

impl fmt::Display for Card {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.rank.symbol(), self.suit.symbol())
    }
}

impl FromStr for Card {
    type Err = TableError;

    /// Accepts `As`, `Td`, `10h`, and unicode suits (`A♠`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || TableError::BadCard(s.to_string());
        let mut chars: Vec<char> = s.trim().chars().collect();
        let suit_char = chars.pop().ok_or_else(bad)?;
        let suit = match suit_char {
            'c' | 'C' | '♣' => Suit::Clubs,
            'd' | 'D' | '♦' => Suit::Diamonds,
            'h' | 'H' | '♥' => Suit::Hearts,
            's' | 'S' | '♠' => Suit::Spades,
            _ => return Err(bad()),
        };
        let rank_str: String = chars.into_iter().collect();
        let rank = match rank_str.to_ascii_uppercase().as_str() {
            "A" => 14,
            "K" => 13,
            "Q" => 12,
            "J" => 11,
            "T" | "10" => 10,
            other => match other.parse::<u8>() {
                Ok(v) if (2..=9).contains(&v) => v,
                _ => return Err(bad()),
            },
        };
        Ok(Card::new(rank, suit))
    }
}

impl Serialize for Card {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Card {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Denomination {
    D5,
    D10,
    D50,
    D100,
}

impl Denomination {
    /// Ascending value order.
    pub const ALL: [Denomination; 4] = [
        Denomination::D5,
        Denomination::D10,
        Denomination::D50,
        Denomination::D100,
    ];
    /// Dispatch order for chip motions: 100 → 50 → 10 → 5.
    pub const DESCENDING: [Denomination; 4] = [
        Denomination::D100,
        Denomination::D50,
        Denomination::D10,
        Denomination::D5,
    ];

    pub fn value(self) -> u32 {
        match self {
            Denomination::D5 => 5,
            Denomination::D10 => 10,
            Denomination::D50 => 50,
            Denomination::D100 => 100,
        }
    }

    pub fn from_value(value: u32) -> Result<Denomination, TableError> {
        match value {
            5 => Ok(Denomination::D5),
            10 => Ok(Denomination::D10),
            50 => Ok(Denomination::D50),
            100 => Ok(Denomination::D100),
            v => Err(TableError::BadDenomination(v)),
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Denomination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

impl Serialize for Denomination {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u32(self.value())
    }
}

impl<'de> Deserialize<'de> for Denomination {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Denomination::from_value(u32::deserialize(deserializer)?).map_err(serde::de::Error::custom)
    }
}

/// Per-denomination chip counts. All four denominations are always present.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ChipCount([u32; 4]);

impl ChipCount {
    pub const ZERO: ChipCount = ChipCount([0; 4]);

    pub fn new(n5: u32, n10: u32, n50: u32, n100: u32) -> ChipCount {
        ChipCount([n5, n10, n50, n100])
    }

    pub fn get(&self, d: Denomination) -> u32 {
        self.0[d.slot()]
    }

    pub fn set(&mut self, d: Denomination, n: u32) {
        self.0[d.slot()] = n;
    }

    pub fn add(&mut self, d: Denomination, n: u32) {
        self.0[d.slot()] += n;
    }

    pub fn take(&mut self, d: Denomination) -> Result<(), TableError> {
        let slot = &mut self.0[d.slot()];
        if *slot == 0 {
            return Err(TableError::NoChip(d));
        }
        *slot -= 1;
        Ok(())
    }

    pub fn value(&self) -> u32 {
        chip_value(self)
    }

    pub fn token_count(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.token_count() == 0
    }

    pub fn plus(&self, other: &ChipCount) -> ChipCount {
        let mut out = *self;
        for d in Denomination::ALL {
            out.add(d, other.get(d));
        }
        out
    }

    /// Multiset of the chips held, largest denomination first.
    pub fn to_descending(&self) -> Vec<Denomination> {
        Denomination::DESCENDING
            .iter()
            .flat_map(|&d| std::iter::repeat_n(d, self.get(d) as usize))
            .collect()
    }

    pub fn from_chips(chips: &[Denomination]) -> ChipCount {
        let mut out = ChipCount::ZERO;
        for &d in chips {
            out.add(d, 1);
        }
        out
    }
}

/// Total chip value: Σ denomination × count.
pub fn chip_value(c: &ChipCount) -> u32 {
    Denomination::ALL.iter().map(|&d| d.value() * c.get(d)).sum()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChipCountDoc {
    #[serde(rename = "5")]
    n5: u32,
    #[serde(rename = "10")]
    n10: u32,
    #[serde(rename = "50")]
    n50: u32,
    #[serde(rename = "100")]
    n100: u32,
}

impl Serialize for ChipCount {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let [n5, n10, n50, n100] = self.0;
        ChipCountDoc { n5, n10, n50, n100 }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ChipCount {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let doc = ChipCountDoc::deserialize(deserializer)?;
        Ok(ChipCount([doc.n5, doc.n10, doc.n50, doc.n100]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "L")]
    Left,
    #[serde(rename = "R")]
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "L",
            Side::Right => "R",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Facing {
    Up,
    Down,
    /// Held by the robot hand in the middle of a primitive.
    InHand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HoleCard {
    pub card: Card,
    pub facing: Facing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Blind {
    SmallBlind,
    BigBlind,
}

impl Blind {
    pub fn amount(self) -> u32 {
        match self {
            Blind::SmallBlind => 5,
            Blind::BigBlind => 10,
        }
    }

    pub fn other(self) -> Blind {
        match self {
            Blind::SmallBlind => Blind::BigBlind,
            Blind::BigBlind => Blind::SmallBlind,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Street {
    Preflop,
    Flop,
    Turn,
    River,
    Showdown,
    Settled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopStage {
    Acting,
    AtomIdle,
    Idle,
    Win,
    Lose,
    ToRecover,
    Down,
}

impl LoopStage {
    pub const ALL: [LoopStage; 7] = [
        LoopStage::Acting,
        LoopStage::AtomIdle,
        LoopStage::Idle,
        LoopStage::Win,
        LoopStage::Lose,
        LoopStage::ToRecover,
        LoopStage::Down,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutcomeLevel {
    /// Scene-preserving success.
    SP,
    /// Disruptive completion.
    DC,
    /// Task failure; scene still usable for a retry.
    TF,
    /// Disruptive failure; scene must be reset.
    DF,
}

impl OutcomeLevel {
    pub const ALL: [OutcomeLevel; 4] = [
        OutcomeLevel::SP,
        OutcomeLevel::DC,
        OutcomeLevel::TF,
        OutcomeLevel::DF,
    ];

    pub fn is_completion(self) -> bool {
        matches!(self, OutcomeLevel::SP | OutcomeLevel::DC)
    }

    pub fn is_scene_preserving(self) -> bool {
        self == OutcomeLevel::SP
    }
}

/// How a hand ended, or is about to end, from the robot's perspective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HandResult {
    Win,
    Lose,
    Tie,
    OpponentFolded,
    RobotFolded,
}

/// Per-street betting bookkeeping. Bet zones accumulate over the whole hand;
/// street bets are measured against the zone values at the start of the street.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BettingRound {
    pub robot_street_base: u32,
    pub opponent_street_base: u32,
    pub robot_needs_action: bool,
    pub opponent_needs_action: bool,
    pub robot_blind_posted: bool,
    pub opponent_blind_posted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableState {
    pub deck: Vec<Card>,
    pub hole_left: Option<HoleCard>,
    pub hole_right: Option<HoleCard>,
    pub opponent_hole: [Option<HoleCard>; 2],
    pub community_cards: Vec<Card>,
    pub robot_inventory: ChipCount,
    pub opponent_inventory: ChipCount,
    pub robot_bet_zone: ChipCount,
    pub opponent_bet_zone: ChipCount,
    /// The robot's blind for this hand.
    pub blind: Blind,
    pub is_robot_turn: bool,
    pub scene_stable: bool,
    pub street: Street,
    pub betting: BettingRound,
    pub result: Option<HandResult>,
    /// Bet-zone chips are earmarked for the robot and move only by pull atoms.
    pub awaiting_collection: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TableConfig {
    pub robot_chips: ChipCount,
    pub opponent_chips: ChipCount,
    pub robot_blind: Blind,
    pub deck_seed: u64,
}

impl Default for TableConfig {
    fn default() -> Self {
        TableConfig {
            robot_chips: ChipCount::new(4, 3, 3, 3),
            opponent_chips: ChipCount::new(4, 4, 3, 3),
            robot_blind: Blind::BigBlind,
            deck_seed: 0,
        }
    }
}

pub fn seeded_deck(seed: u64) -> Vec<Card> {
    let mut deck = Card::full_deck();
    deck.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    deck
}

/// Deals a fresh hand: four hole cards face-down, empty board, empty bet zones.
pub fn new_initial_table(config: &TableConfig) -> TableState {
    let mut deck = seeded_deck(config.deck_seed);
    let mut deal = || HoleCard {
        card: deck.remove(0),
        facing: Facing::Down,
    };
    let hole_left = deal();
    let opp0 = deal();
    let hole_right = deal();
    let opp1 = deal();
    TableState {
        deck,
        hole_left: Some(hole_left),
        hole_right: Some(hole_right),
        opponent_hole: [Some(opp0), Some(opp1)],
        community_cards: Vec::new(),
        robot_inventory: config.robot_chips,
        opponent_inventory: config.opponent_chips,
        robot_bet_zone: ChipCount::ZERO,
        opponent_bet_zone: ChipCount::ZERO,
        blind: config.robot_blind,
        is_robot_turn: true,
        scene_stable: true,
        street: Street::Preflop,
        betting: BettingRound {
            robot_needs_action: true,
            opponent_needs_action: true,
            ..BettingRound::default()
        },
        result: None,
        awaiting_collection: false,
    }
}

impl TableState {
    pub fn hole(&self, side: Side) -> Option<&HoleCard> {
        match side {
            Side::Left => self.hole_left.as_ref(),
            Side::Right => self.hole_right.as_ref(),
        }
    }

    pub fn hole_mut(&mut self, side: Side) -> Option<&mut HoleCard> {
        match side {
            Side::Left => self.hole_left.as_mut(),
            Side::Right => self.hole_right.as_mut(),
        }
    }

    /// Per-denomination totals across the four zones.
    pub fn chip_totals(&self) -> ChipCount {
        self.robot_inventory
            .plus(&self.robot_bet_zone)
            .plus(&self.opponent_bet_zone)
            .plus(&self.opponent_inventory)
    }

    pub fn robot_street_bet(&self) -> u32 {
        self.robot_bet_zone
            .value()
            .saturating_sub(self.betting.robot_street_base)
    }

    pub fn opponent_street_bet(&self) -> u32 {
        self.opponent_bet_zone
            .value()
            .saturating_sub(self.betting.opponent_street_base)
    }

    pub fn pot_value(&self) -> u32 {
        self.robot_bet_zone.value() + self.opponent_bet_zone.value()
    }

    fn card_locations(&self) -> Vec<Card> {
        let mut cards = self.deck.clone();
        cards.extend(self.hole_left.iter().map(|h| h.card));
        cards.extend(self.hole_right.iter().map(|h| h.card));
        cards.extend(self.opponent_hole.iter().flatten().map(|h| h.card));
        cards.extend(self.community_cards.iter().copied());
        cards
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    CardDuplicated { card: Card },
    CardMissing { count: usize },
    ChipConservationBroken {
        denomination: u32,
        expected: u32,
        actual: u32,
    },
    CommunityLength { len: usize },
    FlagInconsistent { detail: String },
}

/// Checks every table invariant; an empty result means the state is sound.
pub fn validate_state(s: &TableState, expected_totals: &ChipCount) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut seen: BTreeMap<Card, usize> = BTreeMap::new();
    for card in s.card_locations() {
        *seen.entry(card).or_default() += 1;
    }
    out.extend(
        seen.iter()
            .filter(|(_, &n)| n > 1)
            .map(|(&card, _)| Violation::CardDuplicated { card }),
    );
    if seen.len() < 52 {
        out.push(Violation::CardMissing { count: seen.len() });
    }

    let totals = s.chip_totals();
    for d in Denomination::ALL {
        if totals.get(d) != expected_totals.get(d) {
            out.push(Violation::ChipConservationBroken {
                denomination: d.value(),
                expected: expected_totals.get(d),
                actual: totals.get(d),
            });
        }
    }

    let len = s.community_cards.len();
    if !matches!(len, 0 | 3 | 4 | 5) {
        out.push(Violation::CommunityLength { len });
    }
    let expected_len = match s.street {
        Street::Preflop => Some(0),
        Street::Flop => Some(3),
        Street::Turn => Some(4),
        Street::River => Some(5),
        Street::Showdown | Street::Settled => None,
    };
    if let Some(expected) = expected_len {
        if expected != len {
            out.push(Violation::FlagInconsistent {
                detail: format!("street {:?} with {len} community cards", s.street),
            });
        }
    }
    if s.awaiting_collection
        && !matches!(
            s.result,
            Some(HandResult::Win) | Some(HandResult::OpponentFolded)
        )
    {
        out.push(Violation::FlagInconsistent {
            detail: "collection pending without a robot win".into(),
        });
    }
    if s.street == Street::Settled && s.result.is_none() {
        out.push(Violation::FlagInconsistent {
            detail: "settled street without a result".into(),
        });
    }
    out
}
