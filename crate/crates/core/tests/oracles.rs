mod common;

use dexholdem_core::agents::hand_strength;
use dexholdem_core::bench::{compute_counters, generate_schedule, run_primitive_bench};
use dexholdem_core::poker::{judge_showdown, Showdown};
use dexholdem_core::policy_sim::named_profile;
use dexholdem_core::tabletop::{Card, Suit};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cards(text: &str) -> Vec<Card> {
    text.split_whitespace().map(|c| c.parse().unwrap()).collect()
}

fn permute_suits(cs: &[Card], perm: [Suit; 4]) -> Vec<Card> {
    cs.iter().map(|c| Card::new(c.rank.value(), perm[c.suit.index()])).collect()
}

#[test]
fn showdown_agrees_with_subset_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5000 {
        let c = common::draw(&mut rng, 9);
        let board = &c[4..];
        let mine = common::oracle_seven(&[&c[..2], board].concat());
        let theirs = common::oracle_seven(&[&c[2..4], board].concat());
        let want = match mine.cmp(&theirs) {
            std::cmp::Ordering::Greater => Showdown::Win,
            std::cmp::Ordering::Less => Showdown::Lose,
            std::cmp::Ordering::Equal => Showdown::Tie,
        };
        assert_eq!(judge_showdown([c[0], c[1]], [c[2], c[3]], board).unwrap(), want, "{c:?}");
    }
}

#[test]
fn exact_equity_ignores_hole_order_and_suit_names() {
    let perms = [
        [Suit::Hearts, Suit::Spades, Suit::Clubs, Suit::Diamonds],
        [Suit::Spades, Suit::Clubs, Suit::Diamonds, Suit::Hearts],
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for board_len in [5, 4] {
        for _ in 0..3 {
            let c = common::draw(&mut rng, 2 + board_len);
            let base = hand_strength([c[0], c[1]], &c[2..], 0, &mut rng).unwrap();
            let swapped = hand_strength([c[1], c[0]], &c[2..], 0, &mut rng).unwrap();
            assert_eq!(base, swapped);
            for perm in perms {
                let p = permute_suits(&c, perm);
                let e = hand_strength([p[0], p[1]], &p[2..], 0, &mut rng).unwrap();
                assert_eq!(base, e, "{c:?} under {perm:?}");
            }
        }
    }
}

#[test]
fn river_equity_matches_enumeration_oracle() {
    let hole = cards("Ah Kd");
    let board = cards("Qs Js 2c 7h 9d");
    let known: Vec<Card> = hole.iter().chain(&board).copied().collect();
    let rest: Vec<Card> = Card::full_deck().into_iter().filter(|c| !known.contains(c)).collect();
    let mine = common::oracle_seven(&[&hole[..], &board[..]].concat());
    let (mut win, mut tie, mut n) = (0u32, 0u32, 0u32);
    for i in 0..rest.len() {
        for j in i + 1..rest.len() {
            let theirs = common::oracle_seven(&[&[rest[i], rest[j]][..], &board[..]].concat());
            n += 1;
            match mine.cmp(&theirs) {
                std::cmp::Ordering::Greater => win += 1,
                std::cmp::Ordering::Equal => tie += 1,
                std::cmp::Ordering::Less => {}
            }
        }
    }
    let e = hand_strength([hole[0], hole[1]], &board, 0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(n, 990);
    assert!((e.win - f64::from(win) / 990.0).abs() < 1e-12);
    assert!((e.tie - f64::from(tie) / 990.0).abs() < 1e-12);
}

#[test]
fn pocket_aces_preflop_matches_independent_sampling() {
    let hole = cards("Ac Ad");
    let lib = hand_strength([hole[0], hole[1]], &[], 40_000, &mut ChaCha8Rng::seed_from_u64(13)).unwrap();

    let rest: Vec<Card> = Card::full_deck().into_iter().filter(|c| !hole.contains(c)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let trials = 20_000;
    let mut score = 0.0;
    for _ in 0..trials {
        let mut deck = rest.clone();
        let (d, _) = deck.partial_shuffle(&mut rng, 7);
        let board = &d[2..7];
        let mine = common::oracle_seven(&[&hole[..], board].concat());
        let theirs = common::oracle_seven(&[&d[..2], board].concat());
        score += match mine.cmp(&theirs) {
            std::cmp::Ordering::Greater => 1.0,
            std::cmp::Ordering::Equal => 0.5,
            std::cmp::Ordering::Less => 0.0,
        };
    }
    let oracle = score / f64::from(trials);
    assert!((lib.strength() - oracle).abs() < 0.01, "library {} vs oracle {oracle}", lib.strength());
    assert!((0.84..0.87).contains(&oracle), "{oracle}");
}

#[test]
fn stored_counters_match_event_replay() {
    for seed in 0..40 {
        let q = [[9, 0, 0, 0], [7, 1, 2, 0], [5, 2, 3, 1]][seed as usize % 3];
        let rec = common::hand(seed, q, 0.1 * (seed % 3) as f64, seed % 2 == 0).unwrap();
        assert_eq!(compute_counters(&rec.events).unwrap(), rec.counters, "seed {seed}");
        assert_eq!(rec.counters.states as usize, rec.states.len());
        for (e, s) in rec.events.iter().zip(&rec.states) {
            assert_eq!(e.state_index, s.state_index);
            assert_eq!(e.gate, s.gate.kind());
        }
    }
}

#[test]
fn aggregate_profile_centres_on_its_rate() {
    let profile = named_profile("pi05-aggregate").unwrap();
    let schedule = generate_schedule(0);
    let runs: Vec<f64> = (0..400)
        .map(|seed| run_primitive_bench(&schedule, &profile, seed).unwrap().1.overall.spsr.as_f64())
        .collect();
    let n = runs.len() as f64;
    let mean = runs.iter().sum::<f64>() / n;
    let sd = (runs.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let se = sd / n.sqrt();
    assert!((mean - 47.5).abs() <= 3.0 * se, "mean {mean}, se {se}");
}
